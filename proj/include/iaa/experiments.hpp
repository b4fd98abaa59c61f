#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "iaa/attack.hpp"
#include "iaa/config.hpp"

namespace iaa {

// Everything a runner needs; built from defaults, overridden by a config
// document, then by CLI flags (flag > config > default).
struct ExperimentConfig {
  std::string victim = "kernelnet";
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  std::size_t workers = 0;  // 0 = IAA_WORKERS env or hardware concurrency

  // evaluation dataset
  std::size_t clips = 20;
  std::size_t channels = 3;
  std::size_t frame_size = 64;
  std::size_t clip_length = 41;  // odd; 41 -> 20 triplets
  double max_speed = 0.5;        // px per rendered frame

  // attack grid
  std::vector<double> alphas{0.01, 0.02, 0.04, 0.08};
  std::vector<double> epss{0.0005, 0.001, 0.002, 0.003};  // paired by index
  std::size_t iters = 15;  // T; the harness also reports BA at 2T

  // training
  std::size_t train_clips = 12;
  std::size_t train_clip_length = 17;
  std::size_t train_epochs = 20;
  double train_lr = 40.0;
  std::size_t heldout_clips = 4;
  std::size_t cls_groups_per_class = 60;
  std::size_t cls_epochs = 8;
  double cls_lr = 0.05;
  std::size_t cls_features = 8;
  std::size_t kn_features = 12;

  // experiment-specific knobs
  double ablation_alpha = 0.02;
  std::size_t ablation_iters = 30;
  double targeted_alpha = 0.04;
  double transfer_alpha = 0.02;
  std::size_t rec_groups_per_class = 15;
  std::size_t rec_frames_per_group = 4;
  std::size_t rec_groups_per_video = 5;

  static ExperimentConfig from(const ConfigDoc& doc);
  double eps_for_alpha(double alpha) const;
  std::filesystem::path checkpoint_dir() const { return out_dir / "checkpoints"; }
};

// Each runner writes its CSV/SVG family under cfg.out_dir and returns the
// paths. `hooks`, when given, is forwarded to every attack invocation.
std::vector<std::filesystem::path> run_train(const ExperimentConfig& cfg);
std::vector<std::filesystem::path> run_attack_sweep(const ExperimentConfig& cfg,
                                                    const AttackHooks* hooks = nullptr);
std::vector<std::filesystem::path> run_ablation(const ExperimentConfig& cfg,
                                                const AttackHooks* hooks = nullptr);
std::vector<std::filesystem::path> run_targeted(const ExperimentConfig& cfg,
                                                const AttackHooks* hooks = nullptr);
std::vector<std::filesystem::path> run_transfer(const ExperimentConfig& cfg,
                                                const AttackHooks* hooks = nullptr);
std::vector<std::filesystem::path> run_recognition(const ExperimentConfig& cfg,
                                                   const AttackHooks* hooks = nullptr);

}  // namespace iaa
