#include "iaa/attack.hpp"

#include <algorithm>
#include <cmath>

#include "iaa/metrics.hpp"
#include "iaa/rng.hpp"

namespace iaa {

void AttackConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("attack: alpha must be in [0,1]");
  if (eps < 0.0) throw ContractError("attack: eps must be non-negative");
  if (eps > alpha) throw ContractError("attack: eps must not exceed alpha");
  if (iterations == 0) throw ContractError("attack: iteration budget must be positive");
  if (mode == AttackMode::Targeted && target_image && target_image->size() == 0) {
    throw ContractError("attack: empty target image");
  }
  if (mode == AttackMode::NonTargeted && target_image) {
    throw ContractError("attack: target image given for a non-targeted attack");
  }
}

std::size_t AttackConfig::budget_for(std::size_t index) const {
  if (iteration_policy == IterationPolicy::HalvedAfterFirst && index > 0) {
    return (iterations + 1) / 2;  // ceil(T/2)
  }
  return iterations;
}

namespace {

double mean_of(const std::vector<TripletRecord>& rows, double (*get)(const TripletRecord&)) {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : rows) acc += get(r);
  return acc / static_cast<double>(rows.size());
}

}  // namespace

double AttackReport::mean_psnr_clean() const {
  return mean_of(rows, [](const TripletRecord& r) { return r.psnr_clean; });
}
double AttackReport::mean_psnr_adv() const {
  return mean_of(rows, [](const TripletRecord& r) { return r.psnr_adv; });
}
double AttackReport::mean_ssim_clean() const {
  return mean_of(rows, [](const TripletRecord& r) { return r.ssim_clean.value_or(0.0); });
}
double AttackReport::mean_ssim_adv() const {
  return mean_of(rows, [](const TripletRecord& r) { return r.ssim_adv.value_or(0.0); });
}
double AttackReport::mean_final_loss() const {
  return mean_of(rows, [](const TripletRecord& r) { return r.final_loss; });
}
double AttackReport::total_wall_time() const {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.wall_time_seconds;
  return acc;
}

namespace {

const Tensor& reference_frame(const FrameTriplet& triplet, const AttackConfig& config,
                              Tensor& storage) {
  if (config.mode == AttackMode::NonTargeted) return triplet.gt;
  if (config.target_image) {
    if (!config.target_image->same_shape(triplet.gt)) {
      throw ShapeError("targeted attack: target shape " +
                       shape_to_string(config.target_image->shape()) +
                       " does not match frames " + shape_to_string(triplet.gt.shape()));
    }
    return *config.target_image;
  }
  storage = Tensor::ones(triplet.gt.shape());  // white frame, the default target
  return storage;
}

// Loss of the (unclipped) adversarial pair against the reference.
double attack_loss(const InterpolationModel& model, const FrameTriplet& triplet,
                   const PerturbationState& state, const Tensor& reference) {
  Tape tape;
  Var adv_prev = tape.constant(axpy(triplet.prev, 1.0, state.prev));
  Var adv_next = tape.constant(axpy(triplet.next, 1.0, state.next));
  Var out = model.forward(tape, adv_prev, adv_next);
  return l2_norm(sub(out, tape.constant(reference))).value().item();
}

AdversarialPair materialize(const FrameTriplet& triplet, const PerturbationState& state) {
  return {clamp(axpy(triplet.prev, 1.0, state.prev), 0.0, 1.0),
          clamp(axpy(triplet.next, 1.0, state.next), 0.0, 1.0)};
}

void score_record(const InterpolationModel& model, const FrameTriplet& triplet,
                  const AdversarialPair& adv, TripletRecord& rec) {
  const Tensor out_clean = model.interpolate_clamped(triplet.prev, triplet.next);
  const Tensor out_adv = model.interpolate_clamped(adv.prev, adv.next);
  rec.psnr_clean = psnr(out_clean, triplet.gt);
  rec.psnr_adv = psnr(out_adv, triplet.gt);
  const std::size_t H = triplet.gt.shape()[triplet.gt.rank() - 2];
  const std::size_t W = triplet.gt.shape()[triplet.gt.rank() - 1];
  if (H >= 11 && W >= 11) {
    rec.ssim_clean = ssim(out_clean, triplet.gt);
    rec.ssim_adv = ssim(out_adv, triplet.gt);
  }
}

// Shared PGD loop; the caller owns initialization and budget choice.
TripletRecord run_pgd(const InterpolationModel& model, const FrameTriplet& triplet,
                      PerturbationState& state, const AttackConfig& config,
                      std::size_t iterations, std::size_t problem_index,
                      const AttackHooks* hooks) {
  Tensor target_storage;
  const Tensor& reference = reference_frame(triplet, config, target_storage);

  TripletRecord rec;
  rec.index = triplet.index;
  rec.iterations_used = iterations;
  Stopwatch timer;
  for (std::size_t n = 0; n < iterations; ++n) {
    double seen = 0.0;
    state = pgd_step(model, triplet, state, config, reference, &seen);
    rec.loss_trajectory.push_back(seen);
    if (hooks && hooks->on_iteration) {
      const AdversarialPair adv = materialize(triplet, state);
      hooks->on_iteration(problem_index, n, state, adv.prev, adv.next);
    }
  }
  rec.final_loss = attack_loss(model, triplet, state, reference);
  rec.wall_time_seconds = timer.seconds();
  return rec;
}

}  // namespace

PerturbationState pgd_step(const InterpolationModel& model, const FrameTriplet& triplet,
                           const PerturbationState& state, const AttackConfig& config,
                           const Tensor& reference, double* loss_seen) {
  if (!state.prev.same_shape(triplet.prev) || !state.next.same_shape(triplet.next)) {
    throw ShapeError("pgd_step: perturbation shape does not match the frame pair");
  }
  Tape tape;
  Var p_prev = tape.leaf(state.prev);
  Var p_next = tape.leaf(state.next);
  Var adv_prev = add(tape.constant(triplet.prev), p_prev);
  Var adv_next = add(tape.constant(triplet.next), p_next);
  Var out = model.forward(tape, adv_prev, adv_next);
  Var loss = l2_norm(sub(out, tape.constant(reference)));
  if (loss_seen) *loss_seen = loss.value().item();

  std::vector<Tensor> grads;
  try {
    grads = tape.gradients(loss, {p_prev, p_next});
  } catch (const NumericsError& e) {
    throw NumericsError(std::string("pgd_step: ") + e.what());
  }

  const double step = config.mode == AttackMode::Targeted ? -config.eps : config.eps;
  PerturbationState next_state;
  next_state.prev = clamp(axpy(state.prev, step, sign(grads[0])), -config.alpha, config.alpha);
  next_state.next = clamp(axpy(state.next, step, sign(grads[1])), -config.alpha, config.alpha);
  return next_state;
}

std::pair<AdversarialPair, TripletRecord> basic_attack(const InterpolationModel& model,
                                                       const FrameTriplet& triplet,
                                                       const AttackConfig& config,
                                                       const AttackHooks* hooks) {
  config.validate();
  PerturbationState state = PerturbationState::zeros(triplet.prev, triplet.next);
  TripletRecord rec = run_pgd(model, triplet, state, config, config.iterations,
                              triplet.index, hooks);
  AdversarialPair adv = materialize(triplet, state);
  score_record(model, triplet, adv, rec);
  return {std::move(adv), std::move(rec)};
}

namespace {

void check_clip_shapes(const std::vector<FrameTriplet>& clip) {
  if (clip.empty()) throw ContractError("attack: empty clip");
  for (const auto& t : clip) {
    if (!t.prev.same_shape(clip.front().prev) || !t.next.same_shape(clip.front().next) ||
        !t.gt.same_shape(clip.front().gt)) {
      throw ShapeError("attack: frame shape drifts across triplets");
    }
  }
}

}  // namespace

ClipAttackResult basic_attack_clip(const InterpolationModel& model,
                                   const std::vector<FrameTriplet>& clip,
                                   const AttackConfig& config, const AttackHooks* hooks) {
  config.validate();
  check_clip_shapes(clip);
  ClipAttackResult result;
  for (const auto& triplet : clip) {
    auto [adv, rec] = basic_attack(model, triplet, config, hooks);
    result.pairs.push_back(std::move(adv));
    result.report.rows.push_back(std::move(rec));
  }
  return result;
}

ClipAttackResult iaa_attack(const InterpolationModel& model,
                            const std::vector<FrameTriplet>& clip, const AttackConfig& config,
                            const AttackHooks* hooks) {
  AttackConfig cfg = config;
  cfg.warm_start = true;
  cfg.iteration_policy = IterationPolicy::HalvedAfterFirst;
  cfg.validate();
  check_clip_shapes(clip);

  ClipAttackResult result;
  // triplet 0 starts cold; each later triplet inherits the final
  // perturbation of its predecessor
  PerturbationState state = PerturbationState::zeros(clip.front().prev, clip.front().next);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    TripletRecord rec = run_pgd(model, clip[i], state, cfg, cfg.budget_for(i), i, hooks);
    AdversarialPair adv = materialize(clip[i], state);
    score_record(model, clip[i], adv, rec);
    result.pairs.push_back(std::move(adv));
    result.report.rows.push_back(std::move(rec));
  }
  return result;
}

ClipAttackResult random_init_attack(const InterpolationModel& model,
                                    const std::vector<FrameTriplet>& clip,
                                    const AttackConfig& config, std::uint64_t seed,
                                    const AttackHooks* hooks) {
  config.validate();
  check_clip_shapes(clip);
  const std::size_t budget = (config.iterations + 1) / 2;  // same per-triplet budget as IAA

  ClipAttackResult result;
  for (std::size_t i = 0; i < clip.size(); ++i) {
    Rng rng(mix_seed(seed, i));
    PerturbationState state = PerturbationState::zeros(clip[i].prev, clip[i].next);
    for (auto& v : state.prev.data()) v = std::clamp(rng.normal(), -config.alpha, config.alpha);
    for (auto& v : state.next.data()) v = std::clamp(rng.normal(), -config.alpha, config.alpha);
    TripletRecord rec = run_pgd(model, clip[i], state, config, budget, i, hooks);
    AdversarialPair adv = materialize(clip[i], state);
    score_record(model, clip[i], adv, rec);
    result.pairs.push_back(std::move(adv));
    result.report.rows.push_back(std::move(rec));
  }
  return result;
}

// ---- recognition ----

double RecognitionAttackResult::clean_accuracy() const {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : rows) acc += r.clean_correct ? 1.0 : 0.0;
  return acc / static_cast<double>(rows.size());
}

double RecognitionAttackResult::adversarial_accuracy() const {
  if (rows.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& r : rows) acc += r.adv_correct ? 1.0 : 0.0;
  return acc / static_cast<double>(rows.size());
}

double RecognitionAttackResult::total_wall_time() const {
  double acc = 0.0;
  for (const auto& r : rows) acc += r.wall_time_seconds;
  return acc;
}

namespace {

double recognition_loss(const RecognitionModel& model, const Tensor& group, std::size_t label,
                        const Tensor& perturbation) {
  Tape tape;
  Var adv = tape.constant(axpy(group, 1.0, perturbation));
  return cross_entropy(model.forward(tape, adv), label).value().item();
}

}  // namespace

RecognitionAttackResult recognition_attack(const RecognitionModel& model,
                                           const std::vector<RecognitionSample>& groups,
                                           const AttackConfig& config,
                                           const AttackHooks* hooks) {
  config.validate();
  if (config.mode == AttackMode::Targeted) {
    throw ContractError("recognition attack: only the non-targeted mode is defined");
  }
  if (groups.empty()) throw ContractError("recognition attack: empty group sequence");

  RecognitionAttackResult result;
  Tensor perturbation;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const RecognitionSample& sample = groups[i];
    if (sample.label >= model.class_count()) {
      throw ContractError("recognition attack: label out of range");
    }
    if (sample.group.shape() != groups.front().group.shape()) {
      throw ShapeError("recognition attack: group shape drifts");
    }
    const bool warm = config.warm_start && i > 0;
    if (!warm) perturbation = Tensor::zeros_like(sample.group);

    GroupRecord rec;
    rec.group_index = sample.group_index;
    rec.label = sample.label;
    rec.iterations_used = config.budget_for(i);
    Stopwatch timer;
    for (std::size_t n = 0; n < rec.iterations_used; ++n) {
      Tape tape;
      Var p = tape.leaf(perturbation);
      Var adv = add(tape.constant(sample.group), p);
      Var loss = cross_entropy(model.forward(tape, adv), sample.label);
      rec.loss_trajectory.push_back(loss.value().item());
      std::vector<Tensor> grads = tape.gradients(loss, {p});
      perturbation = clamp(axpy(perturbation, config.eps, sign(grads[0])), -config.alpha,
                           config.alpha);
      if (hooks && hooks->on_iteration) {
        const Tensor adv_group = clamp(axpy(sample.group, 1.0, perturbation), 0.0, 1.0);
        hooks->on_iteration(i, n, PerturbationState{perturbation, perturbation}, adv_group,
                            adv_group);
      }
    }
    rec.final_loss = recognition_loss(model, sample.group, sample.label, perturbation);
    rec.wall_time_seconds = timer.seconds();

    const Tensor adv_group = clamp(axpy(sample.group, 1.0, perturbation), 0.0, 1.0);
    rec.clean_correct = model.predict(sample.group) == sample.label;
    rec.adv_correct = model.predict(adv_group) == sample.label;
    result.adversarial_groups.push_back(adv_group);
    result.rows.push_back(std::move(rec));
  }
  return result;
}

ClipAttackResult transfer_eval(const InterpolationModel& source,
                               const InterpolationModel& target,
                               const std::vector<FrameTriplet>& clip,
                               const AttackConfig& config) {
  ClipAttackResult crafted = iaa_attack(source, clip, config);
  // re-score the crafted pairs through the target model
  for (std::size_t i = 0; i < clip.size(); ++i) {
    score_record(target, clip[i], crafted.pairs[i], crafted.report.rows[i]);
  }
  return crafted;
}

AttackReport score_through(const InterpolationModel& target,
                           const std::vector<FrameTriplet>& clip,
                           const std::vector<AdversarialPair>& pairs) {
  if (clip.size() != pairs.size()) throw ContractError("score_through: size mismatch");
  AttackReport report;
  for (std::size_t i = 0; i < clip.size(); ++i) {
    TripletRecord rec;
    rec.index = clip[i].index;
    score_record(target, clip[i], pairs[i], rec);
    report.rows.push_back(std::move(rec));
  }
  return report;
}

}  // namespace iaa
