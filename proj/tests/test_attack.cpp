#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "iaa/attack.hpp"
#include "iaa/datagen.hpp"
#include "iaa/models.hpp"
#include "iaa/rng.hpp"

using namespace iaa;

namespace {

Tensor random_frame(Shape shape, Rng& rng, double lo = 0.1, double hi = 0.9) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

FrameTriplet random_triplet(Rng& rng, Shape shape = {1, 4, 4}) {
  return FrameTriplet{random_frame(shape, rng), random_frame(shape, rng),
                      random_frame(shape, rng), 0};
}

std::vector<FrameTriplet> coherent_clip(std::uint64_t seed, std::size_t triplets,
                                        std::size_t size = 16) {
  Rng rng(seed);
  SceneSpec spec = random_scene(rng, 1, size, size, 0.4, 2 * triplets + 1);
  return extract_triplets(generate_clip(spec, 2 * triplets + 1, seed));
}

// hand-written one-step reference for the blend victim: the gradient of
// ||0.5(p+n) - gt||_2 with respect to each perturbation is
// 0.5 * residual / ||residual||, so the signed step is analytic
PerturbationState blend_reference_step(const FrameTriplet& t, const PerturbationState& s,
                                       double alpha, double eps) {
  Tensor residual(t.gt.shape());
  double norm_sq = 0.0;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    const double f = 0.5 * ((t.prev[i] + s.prev[i]) + (t.next[i] + s.next[i]));
    residual[i] = f - t.gt[i];
    norm_sq += residual[i] * residual[i];
  }
  PerturbationState out = s;
  if (norm_sq == 0.0) return out;
  for (std::size_t i = 0; i < residual.size(); ++i) {
    const double g = residual[i] > 0.0 ? 1.0 : (residual[i] < 0.0 ? -1.0 : 0.0);
    out.prev[i] = std::clamp(s.prev[i] + eps * g, -alpha, alpha);
    out.next[i] = std::clamp(s.next[i] + eps * g, -alpha, alpha);
  }
  return out;
}

double blend_loss(const FrameTriplet& t, const PerturbationState& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < t.gt.size(); ++i) {
    const double f = 0.5 * ((t.prev[i] + s.prev[i]) + (t.next[i] + s.next[i]));
    acc += (f - t.gt[i]) * (f - t.gt[i]);
  }
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("config invariants") {
  AttackConfig cfg;
  cfg.alpha = 0.02;
  cfg.eps = 0.03;  // eps > alpha
  CHECK_THROWS_AS(cfg.validate(), ContractError);
  cfg.eps = 0.001;
  CHECK_NOTHROW(cfg.validate());
  cfg.target_image = Tensor::ones({1, 4, 4});
  CHECK_THROWS_AS(cfg.validate(), ContractError);  // target without targeted mode
  cfg.mode = AttackMode::Targeted;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("pgd_step: eps = 0 leaves the state unchanged") {
  Rng rng(1);
  BlendModel blend;
  const FrameTriplet t = random_triplet(rng);
  AttackConfig cfg;
  cfg.alpha = 0.05;
  cfg.eps = 0.0;
  PerturbationState s = PerturbationState::zeros(t.prev, t.next);
  s.prev[3] = 0.01;
  const PerturbationState out = pgd_step(blend, t, s, cfg, t.gt);
  CHECK(out.prev.bit_equal(s.prev));
  CHECK(out.next.bit_equal(s.next));
}

TEST_CASE("pgd_step: clip dominates when eps exceeds alpha") {
  // scalar surrogate: one pixel at 0.5, positive residual
  BlendModel blend;
  FrameTriplet t{Tensor::full({1, 1, 1}, 0.5), Tensor::full({1, 1, 1}, 0.1),
                 Tensor::full({1, 1, 1}, 0.5), 0};
  AttackConfig cfg;
  cfg.alpha = 0.02;
  cfg.eps = 0.03;  // deliberately above alpha; pgd_step does not re-validate
  PerturbationState s = PerturbationState::zeros(t.prev, t.next);
  const PerturbationState out = pgd_step(blend, t, s, cfg, t.gt);
  CHECK(out.prev[0] == 0.02);
  CHECK(out.next[0] == 0.02);
}

TEST_CASE("pgd_step: one step increases the blend loss away from the boundary") {
  // grid of random instances, checked against the analytic reimplementation
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(100 + seed);
    BlendModel blend;
    const FrameTriplet t = random_triplet(rng);
    AttackConfig cfg;
    cfg.alpha = 0.05;
    cfg.eps = 0.01;
    PerturbationState s = PerturbationState::zeros(t.prev, t.next);
    const double before = blend_loss(t, s);
    const PerturbationState stepped = pgd_step(blend, t, s, cfg, t.gt);
    const double after = blend_loss(t, stepped);
    CHECK(after >= before);

    const PerturbationState ref = blend_reference_step(t, s, cfg.alpha, cfg.eps);
    CHECK(stepped.prev.bit_equal(ref.prev));
    CHECK(stepped.next.bit_equal(ref.next));
  }
}

TEST_CASE("basic_attack: zero budget leaves everything clean") {
  Rng rng(5);
  BlendModel blend;
  const FrameTriplet t = random_triplet(rng, {1, 12, 12});
  AttackConfig cfg;
  cfg.alpha = 0.0;
  cfg.eps = 0.0;
  cfg.iterations = 7;
  const auto [adv, rec] = basic_attack(blend, t, cfg);
  CHECK(adv.prev.bit_equal(t.prev));
  CHECK(adv.next.bit_equal(t.next));
  CHECK(rec.psnr_adv == rec.psnr_clean);
  CHECK(rec.iterations_used == 7);
  CHECK(rec.loss_trajectory.size() == 7);
}

TEST_CASE("basic_attack: trajectory is non-decreasing on the blend victim") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(200 + seed);
    BlendModel blend;
    const FrameTriplet t = random_triplet(rng, {1, 6, 6});
    AttackConfig cfg;
    cfg.alpha = 0.04;
    cfg.eps = 0.004;
    cfg.iterations = 12;
    const auto [adv, rec] = basic_attack(blend, t, cfg);
    for (std::size_t i = 1; i < rec.loss_trajectory.size(); ++i) {
      CHECK(rec.loss_trajectory[i] >= rec.loss_trajectory[i - 1]);
    }
    CHECK(rec.final_loss >= rec.loss_trajectory.back());
    CHECK(linf_norm(adv.prev) <= 1.0);
  }
}

TEST_CASE("attack hooks observe the box invariants at every iteration") {
  Rng rng(9);
  const KernelNetModel net = KernelNetModel::random_init(1, 4, 99);
  const auto clip = coherent_clip(77, 4);
  AttackConfig cfg;
  cfg.alpha = 0.03;
  cfg.eps = 0.003;
  cfg.iterations = 6;
  std::size_t calls = 0;
  AttackHooks hooks;
  hooks.on_iteration = [&](std::size_t, std::size_t, const PerturbationState& s,
                           const Tensor& adv_prev, const Tensor& adv_next) {
    ++calls;
    CHECK(linf_norm(s.prev) <= cfg.alpha + 1e-12);
    CHECK(linf_norm(s.next) <= cfg.alpha + 1e-12);
    for (double v : adv_prev.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    for (double v : adv_next.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  };
  iaa_attack(net, clip, cfg, &hooks);
  CHECK(calls == 6 + 3 * 3);  // T + (n-1) * ceil(T/2)
}

TEST_CASE("iaa_attack: a single triplet reduces to basic_attack") {
  Rng rng(11);
  const KernelNetModel net = KernelNetModel::random_init(1, 4, 5);
  const auto clip = coherent_clip(11, 1);
  AttackConfig cfg;
  cfg.alpha = 0.02;
  cfg.eps = 0.001;
  cfg.iterations = 9;
  const auto one = iaa_attack(net, clip, cfg);
  const auto [adv, rec] = basic_attack(net, clip[0], cfg);
  CHECK(one.pairs[0].prev.bit_equal(adv.prev));
  CHECK(one.pairs[0].next.bit_equal(adv.next));
  CHECK(one.report.rows[0].final_loss == rec.final_loss);
}

TEST_CASE("iaa_attack: warm start on an identical triplet resumes at the final loss") {
  Rng rng(13);
  const KernelNetModel net = KernelNetModel::random_init(1, 4, 6);
  auto clip = coherent_clip(13, 1, 12);
  clip.push_back(clip[0]);  // identical repeated triplet
  clip.back().index = 1;
  AttackConfig cfg;
  cfg.alpha = 0.02;
  cfg.eps = 0.002;
  cfg.iterations = 8;
  const auto result = iaa_attack(net, clip, cfg);
  // the first loss triplet 1 sees equals triplet 0's final loss, bit for bit
  CHECK(result.report.rows[1].loss_trajectory.front() == result.report.rows[0].final_loss);
  CHECK(result.report.rows[1].iterations_used == 4);
  CHECK(result.report.rows[0].iterations_used == 8);
}

TEST_CASE("iaa_attack: shape drift raises ShapeError") {
  Rng rng(15);
  BlendModel blend;
  std::vector<FrameTriplet> clip{random_triplet(rng, {1, 8, 8}), random_triplet(rng, {1, 6, 6})};
  AttackConfig cfg;
  CHECK_THROWS_AS(iaa_attack(blend, clip, cfg), ShapeError);
}

TEST_CASE("warm start does not lose to a cold start at equal budget") {
  // coherent clips, small motion: mean final loss of warm-started IAA on
  // triplets i >= 1 at ceil(T/2) iterations >= cold PGD at the same budget
  const KernelNetModel net = KernelNetModel::random_init(1, 6, 7);
  double warm_total = 0.0, cold_total = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto clip = coherent_clip(400 + seed, 5);
    AttackConfig cfg;
    cfg.alpha = 0.02;
    cfg.eps = 0.002;
    cfg.iterations = 10;
    const auto warm = iaa_attack(net, clip, cfg);

    AttackConfig cold_cfg = cfg;
    cold_cfg.iterations = 5;  // ceil(10/2)
    const auto cold = basic_attack_clip(net, clip, cold_cfg);
    for (std::size_t i = 1; i < clip.size(); ++i) {
      warm_total += warm.report.rows[i].final_loss;
      cold_total += cold.report.rows[i].final_loss;
      ++count;
    }
  }
  CHECK(count == 32);
  CHECK(warm_total / count >= cold_total / count);
}

TEST_CASE("random_init_attack: zero alpha is clean and seeds reproduce bit-exactly") {
  const KernelNetModel net = KernelNetModel::random_init(1, 4, 8);
  const auto clip = coherent_clip(21, 3);
  AttackConfig cfg;
  cfg.alpha = 0.0;
  cfg.eps = 0.0;
  cfg.iterations = 6;
  const auto clean = random_init_attack(net, clip, cfg, 123);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    CHECK(clean.pairs[i].prev.bit_equal(clip[i].prev));
    CHECK(clean.pairs[i].next.bit_equal(clip[i].next));
  }

  cfg.alpha = 0.03;
  cfg.eps = 0.003;
  const auto a = random_init_attack(net, clip, cfg, 9001);
  const auto b = random_init_attack(net, clip, cfg, 9001);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    CHECK(a.pairs[i].prev.bit_equal(b.pairs[i].prev));
    CHECK(a.pairs[i].next.bit_equal(b.pairs[i].next));
    CHECK(a.report.rows[i].iterations_used == 3);  // ceil(6/2) for every triplet
  }
  const auto c = random_init_attack(net, clip, cfg, 9002);
  CHECK_FALSE(c.pairs[0].prev.bit_equal(a.pairs[0].prev));
}

TEST_CASE("targeted attack: already-optimal state is a fixed point") {
  // target equals the ground truth and the clean output equals it too:
  // zero residual has a zero subgradient, so nothing moves
  BlendModel blend;
  const Tensor frame = Tensor::full({1, 4, 4}, 0.5);
  FrameTriplet t{frame, frame, frame, 0};
  AttackConfig cfg;
  cfg.mode = AttackMode::Targeted;
  cfg.target_image = frame;
  cfg.alpha = 0.05;
  cfg.eps = 0.01;
  PerturbationState s = PerturbationState::zeros(t.prev, t.next);
  const PerturbationState out = pgd_step(blend, t, s, cfg, *cfg.target_image);
  CHECK(out.prev.bit_equal(s.prev));
  CHECK(out.next.bit_equal(s.next));
}

TEST_CASE("targeted attack moves the output toward the target") {
  BlendModel blend;
  std::size_t improved = 0;
  double bright_clean = 0.0, bright_adv = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(300 + seed);
    const FrameTriplet t = random_triplet(rng, {1, 6, 6});
    AttackConfig cfg;
    cfg.mode = AttackMode::Targeted;
    cfg.alpha = 0.08;
    cfg.eps = 0.008;
    cfg.iterations = 10;  // default white target
    const auto [adv, rec] = basic_attack(blend, t, cfg);
    const Tensor white = Tensor::ones(t.gt.shape());
    auto dist = [&](const Tensor& out) {
      double acc = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        acc += (out[i] - white[i]) * (out[i] - white[i]);
      }
      return std::sqrt(acc);
    };
    const Tensor out_clean = blend.interpolate_clamped(t.prev, t.next);
    const Tensor out_adv = blend.interpolate_clamped(adv.prev, adv.next);
    if (dist(out_adv) <= dist(out_clean)) ++improved;
    bright_clean += mean_value(out_clean);
    bright_adv += mean_value(out_adv);
  }
  CHECK(improved == 50);
  CHECK(bright_adv > bright_clean);
}

TEST_CASE("targeted attack: mismatched target shape raises ShapeError") {
  BlendModel blend;
  Rng rng(31);
  const FrameTriplet t = random_triplet(rng, {1, 6, 6});
  AttackConfig cfg;
  cfg.mode = AttackMode::Targeted;
  cfg.target_image = Tensor::ones({1, 4, 4});
  CHECK_THROWS_AS(basic_attack(blend, t, cfg), ShapeError);
}

namespace {

// linear victim for the monotonicity argument: scores = W x + b
class LinearRecognizer final : public RecognitionModel {
 public:
  LinearRecognizer(std::size_t frames, Shape group_shape, std::size_t classes, std::uint64_t seed)
      : frames_(frames), classes_(classes) {
    Rng rng(seed);
    std::size_t numel = 1;
    for (std::size_t d : group_shape) numel *= d;
    w_ = Tensor({classes, numel});
    for (auto& v : w_.data()) v = rng.uniform(-0.2, 0.2);
    b_ = Tensor({classes});
  }
  std::size_t class_count() const override { return classes_; }
  std::size_t frames_per_group() const override { return frames_; }
  Var forward(Tape& tape, Var group) const override {
    // scores_c = <W_c, group> + b_c, built from mul + sum per class
    std::vector<Var> scores;
    const std::size_t numel = group.value().size();
    for (std::size_t c = 0; c < classes_; ++c) {
      Tensor row(group.value().shape());
      for (std::size_t i = 0; i < numel; ++i) row[i] = w_.data()[c * numel + i];
      scores.push_back(sum(mul(group, tape.constant(row))));
    }
    Var stacked = scores[0];
    for (std::size_t c = 1; c < classes_; ++c) stacked = concat0(stacked, scores[c]);
    return add(stacked, tape.constant(b_));
  }

 private:
  std::size_t frames_, classes_;
  Tensor w_, b_;
};

}  // namespace

TEST_CASE("recognition attack: true-class loss is non-decreasing on a linear victim") {
  Rng rng(41);
  const Shape group_shape{3, 1, 5, 5};
  LinearRecognizer lin(3, group_shape, 4, 17);
  RecognitionSample sample{random_frame(group_shape, rng), 2, 0, 0};
  AttackConfig cfg;
  cfg.alpha = 0.05;
  cfg.eps = 0.005;
  cfg.iterations = 12;
  const auto result = recognition_attack(lin, {sample}, cfg);
  const auto& traj = result.rows[0].loss_trajectory;
  REQUIRE(traj.size() == 12);
  for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj[i] >= traj[i - 1]);
  CHECK(result.rows[0].final_loss >= traj.back());
}

TEST_CASE("recognition attack: alpha 0 preserves accuracy; bad labels are rejected") {
  const auto samples = generate_labeled_groups(4, 2, 4, 51, 2);
  const ToyClassifier cls = ToyClassifier::random_init(4, 1, 4, 4, 3);
  AttackConfig cfg;
  cfg.alpha = 0.0;
  cfg.eps = 0.0;
  cfg.iterations = 3;
  std::vector<RecognitionSample> video(samples.begin(), samples.begin() + 2);
  const auto result = recognition_attack(cls, video, cfg);
  CHECK(result.clean_accuracy() == result.adversarial_accuracy());
  for (const auto& row : result.rows) CHECK(row.clean_correct == row.adv_correct);

  auto bad = video;
  bad[0].label = 9;
  CHECK_THROWS_AS(recognition_attack(cls, bad, cfg), ContractError);
}

TEST_CASE("recognition attack: warm start inherits across groups") {
  const auto samples = generate_labeled_groups(4, 4, 4, 52, 4);
  // one video = 4 consecutive groups
  std::vector<RecognitionSample> video(samples.begin(), samples.begin() + 4);
  const ToyClassifier cls = ToyClassifier::random_init(4, 1, 4, 4, 4);
  AttackConfig cfg;
  cfg.alpha = 0.03;
  cfg.eps = 0.003;
  cfg.iterations = 8;
  cfg.warm_start = true;
  cfg.iteration_policy = IterationPolicy::HalvedAfterFirst;
  const auto result = recognition_attack(cls, video, cfg);
  CHECK(result.rows[0].iterations_used == 8);
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    CHECK(result.rows[i].iterations_used == 4);
  }
}

TEST_CASE("transfer_eval: self transfer reproduces the white-box report") {
  const KernelNetModel net = KernelNetModel::random_init(1, 4, 12);
  const auto clip = coherent_clip(33, 3);
  AttackConfig cfg;
  cfg.alpha = 0.02;
  cfg.eps = 0.002;
  cfg.iterations = 6;
  const auto self = transfer_eval(net, net, clip, cfg);
  const auto white = iaa_attack(net, clip, cfg);
  for (std::size_t i = 0; i < clip.size(); ++i) {
    CHECK(self.report.rows[i].psnr_adv == white.report.rows[i].psnr_adv);
    CHECK(self.report.rows[i].psnr_clean == white.report.rows[i].psnr_clean);
  }

  // alpha 0 keeps psnr_adv equal to psnr_clean through any target
  AttackConfig zero;
  zero.alpha = 0.0;
  zero.eps = 0.0;
  zero.iterations = 3;
  BlendModel blend;
  const auto crossed = transfer_eval(net, blend, clip, zero);
  for (const auto& row : crossed.report.rows) {
    CHECK(row.psnr_adv == row.psnr_clean);
  }
}
