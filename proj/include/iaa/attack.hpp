#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "iaa/datagen.hpp"
#include "iaa/models.hpp"
#include "iaa/tensor.hpp"

namespace iaa {

enum class AttackMode { NonTargeted, Targeted };
enum class IterationPolicy { Fixed, HalvedAfterFirst };

struct AttackConfig {
  double alpha = 0.02;   // l-inf perturbation bound, pixel units
  double eps = 0.001;    // per-iteration step size, pixel units
  std::size_t iterations = 15;  // T
  AttackMode mode = AttackMode::NonTargeted;
  std::optional<Tensor> target_image;  // required iff targeted; defaults to all-ones
  bool warm_start = false;
  IterationPolicy iteration_policy = IterationPolicy::Fixed;

  void validate() const;  // ContractError on violated invariants
  // per-iteration budget for the i-th problem in a sequence
  std::size_t budget_for(std::size_t index) const;
};

// One perturbation pair; both tensors satisfy |P|_inf <= alpha after every
// projection.
struct PerturbationState {
  Tensor prev;
  Tensor next;

  static PerturbationState zeros(const Tensor& like_prev, const Tensor& like_next) {
    return {Tensor::zeros_like(like_prev), Tensor::zeros_like(like_next)};
  }
};

struct AdversarialPair {
  Tensor prev;
  Tensor next;
};

struct TripletRecord {
  std::size_t index = 0;
  double psnr_clean = 0.0;
  double psnr_adv = 0.0;
  // unset when the frame is smaller than the SSIM window
  std::optional<double> ssim_clean;
  std::optional<double> ssim_adv;
  std::vector<double> loss_trajectory;  // loss seen by each iteration, length == iterations_used
  double final_loss = 0.0;              // loss at the final perturbation
  std::size_t iterations_used = 0;
  double wall_time_seconds = 0.0;
};

struct AttackReport {
  std::vector<TripletRecord> rows;

  double mean_psnr_clean() const;
  double mean_psnr_adv() const;
  double mean_ssim_clean() const;
  double mean_ssim_adv() const;
  double mean_final_loss() const;
  double total_wall_time() const;
};

// Test instrumentation: called after every projection with the state and
// the materialized adversarial pair.
struct AttackHooks {
  std::function<void(std::size_t problem_index, std::size_t iteration,
                     const PerturbationState& state, const Tensor& adv_prev,
                     const Tensor& adv_next)>
      on_iteration;
};

struct ClipAttackResult {
  std::vector<AdversarialPair> pairs;
  AttackReport report;
};

// One projected signed-gradient step. `reference` is the ground truth
// (non-targeted, ascent) or the target image (targeted, descent). The
// gradient is taken at the unclipped adversarial pair I + P; both box
// constraints are re-established on P afterwards. `loss_seen`, when given,
// receives the loss value at the incoming state.
PerturbationState pgd_step(const InterpolationModel& model, const FrameTriplet& triplet,
                           const PerturbationState& state, const AttackConfig& config,
                           const Tensor& reference, double* loss_seen = nullptr);

// Runs exactly config.iterations steps from a zero-initialized perturbation.
std::pair<AdversarialPair, TripletRecord> basic_attack(const InterpolationModel& model,
                                                       const FrameTriplet& triplet,
                                                       const AttackConfig& config,
                                                       const AttackHooks* hooks = nullptr);

// Cold-start PGD applied to every triplet of a clip independently.
ClipAttackResult basic_attack_clip(const InterpolationModel& model,
                                   const std::vector<FrameTriplet>& clip,
                                   const AttackConfig& config,
                                   const AttackHooks* hooks = nullptr);

// Inter-frame warm start: triplet 0 gets config.iterations from zero;
// each later triplet starts from the previous final perturbation and,
// under the halved-after-first policy, runs ceil(T/2) iterations.
ClipAttackResult iaa_attack(const InterpolationModel& model,
                            const std::vector<FrameTriplet>& clip, const AttackConfig& config,
                            const AttackHooks* hooks = nullptr);

// Ablation baseline: every triplet starts from standard-normal noise
// clipped into [-alpha, alpha] and runs ceil(T/2) iterations.
ClipAttackResult random_init_attack(const InterpolationModel& model,
                                    const std::vector<FrameTriplet>& clip,
                                    const AttackConfig& config, std::uint64_t seed,
                                    const AttackHooks* hooks = nullptr);

struct GroupRecord {
  std::size_t group_index = 0;
  std::size_t label = 0;
  bool clean_correct = false;
  bool adv_correct = false;
  std::vector<double> loss_trajectory;
  double final_loss = 0.0;
  std::size_t iterations_used = 0;
  double wall_time_seconds = 0.0;
};

struct RecognitionAttackResult {
  std::vector<Tensor> adversarial_groups;
  std::vector<GroupRecord> rows;

  double clean_accuracy() const;
  double adversarial_accuracy() const;
  double total_wall_time() const;
};

// Signed-gradient ascent on the true-class cross-entropy, one perturbation
// per frame group. `groups` must be consecutive segments of one video;
// with warm_start, group i >= 1 inherits the final perturbation of group
// i-1 and runs the halved budget.
RecognitionAttackResult recognition_attack(const RecognitionModel& model,
                                           const std::vector<RecognitionSample>& groups,
                                           const AttackConfig& config,
                                           const AttackHooks* hooks = nullptr);

// Adversarial clip crafted on `source` (IAA), scored through `target`.
ClipAttackResult transfer_eval(const InterpolationModel& source,
                               const InterpolationModel& target,
                               const std::vector<FrameTriplet>& clip,
                               const AttackConfig& config);

// Scores already-crafted adversarial pairs through a model; rows carry
// quality metrics only.
AttackReport score_through(const InterpolationModel& target,
                           const std::vector<FrameTriplet>& clip,
                           const std::vector<AdversarialPair>& pairs);

}  // namespace iaa
