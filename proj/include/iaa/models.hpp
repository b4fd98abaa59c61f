#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "iaa/autodiff.hpp"
#include "iaa/datagen.hpp"
#include "iaa/tensor.hpp"

namespace iaa {

// Trained parameters plus enough metadata to rebuild the model.
// Round-trips through the on-disk "IAAB1" format bit-exactly.
struct Checkpoint {
  std::string model_kind;
  std::map<std::string, std::string> hyper;
  std::vector<std::pair<std::string, Tensor>> params;  // insertion order preserved
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double final_loss = 0.0;

  const Tensor& param(const std::string& name) const;
  std::size_t hyper_int(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Differentiable frame interpolator. forward() builds the interpolation
// graph on the caller's tape; gradients flow to the frame inputs (and to
// parameters when they are bound as leaves by the trainer). Raw forward
// output is unclamped; clamping to [0,1] happens only in the *_clamped
// evaluation helpers, never inside the differentiated graph.
class InterpolationModel {
 public:
  virtual ~InterpolationModel() = default;
  virtual std::string kind() const = 0;
  virtual Var forward(Tape& tape, Var prev, Var next) const = 0;
  virtual std::vector<std::pair<std::string, Tensor>> parameters() const { return {}; }

  Tensor interpolate(const Tensor& prev, const Tensor& next) const;
  Tensor interpolate_clamped(const Tensor& prev, const Tensor& next) const;
};

// 0.5 * (prev + next). Parameter-free.
class BlendModel final : public InterpolationModel {
 public:
  std::string kind() const override { return "blend"; }
  Var forward(Tape& tape, Var prev, Var next) const override;
};

// Estimates one global integer translation between the frames by
// exhaustive SSD search, then averages the two half-shifted frames.
// The flow estimate is a fixed constant in the graph (stop-gradient).
class WarpModel final : public InterpolationModel {
 public:
  explicit WarpModel(int search_radius = 4) : radius_(search_radius) {}
  std::string kind() const override { return "warp"; }
  Var forward(Tape& tape, Var prev, Var next) const override;

  // argmin over integer (vx, vy) in [-radius, radius]^2 of
  // sum((prev shifted by +v) - next)^2; ties resolve toward (0,0) first,
  // then scan order.
  static std::pair<int, int> estimate_translation(const Tensor& prev, const Tensor& next,
                                                  int radius);

 private:
  int radius_;
};

// Two conv layers over the concatenated pair predict per-pixel softmax
// weights across the 3x3 neighborhoods of both frames; the output is the
// weighted sum of both neighborhoods.
class KernelNetModel final : public InterpolationModel {
 public:
  struct ParamVars {
    Var conv1_w, conv1_b, conv2_w, conv2_b;
  };
  static constexpr std::size_t kNeighbors = 9;  // 3x3

  KernelNetModel(std::size_t channels, std::size_t features, Tensor conv1_w, Tensor conv1_b,
                 Tensor conv2_w, Tensor conv2_b);
  static KernelNetModel random_init(std::size_t channels, std::size_t features,
                                    std::uint64_t seed);
  static KernelNetModel from_checkpoint(const Checkpoint& ckpt);
  Checkpoint to_checkpoint() const;

  std::string kind() const override { return "kernelnet"; }
  Var forward(Tape& tape, Var prev, Var next) const override;
  std::vector<std::pair<std::string, Tensor>> parameters() const override;

  std::size_t channels() const { return channels_; }
  std::size_t features() const { return features_; }

  // Shared graph builder; the trainer binds parameters as leaves.
  static Var graph(Tape& tape, Var prev, Var next, const ParamVars& p);

 private:
  std::size_t channels_, features_;
  Tensor conv1_w_, conv1_b_, conv2_w_, conv2_b_;
};

// Differentiable video-recognition victim.
class RecognitionModel {
 public:
  virtual ~RecognitionModel() = default;
  virtual std::size_t class_count() const = 0;
  virtual std::size_t frames_per_group() const = 0;
  // group is [N,C,H,W] with N == frames_per_group; returns class scores.
  virtual Var forward(Tape& tape, Var group) const = 0;

  Tensor scores(const Tensor& group) const;
  std::size_t predict(const Tensor& group) const;
};

// Temporal-difference features -> two conv layers -> global average pool
// -> linear scores.
class ToyClassifier final : public RecognitionModel {
 public:
  struct ParamVars {
    Var conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
  };

  ToyClassifier(std::size_t frames_per_group, std::size_t channels, std::size_t features,
                std::size_t class_count, std::vector<std::pair<std::string, Tensor>> params);
  static ToyClassifier random_init(std::size_t frames_per_group, std::size_t channels,
                                   std::size_t features, std::size_t class_count,
                                   std::uint64_t seed);
  static ToyClassifier from_checkpoint(const Checkpoint& ckpt);
  Checkpoint to_checkpoint() const;

  std::size_t class_count() const override { return class_count_; }
  std::size_t frames_per_group() const override { return frames_; }
  std::size_t channels() const { return channels_; }
  std::size_t features() const { return features_; }
  Var forward(Tape& tape, Var group) const override;
  std::vector<std::pair<std::string, Tensor>> parameters() const;

  static Var graph(Tape& tape, Var group, const ParamVars& p, std::size_t frames);

 private:
  std::size_t frames_, channels_, features_, class_count_;
  std::vector<std::pair<std::string, Tensor>> params_;
};

// ---- training ----

struct TrainLog {
  double initial_loss = 0.0;                // full pass before any update
  std::vector<double> epoch_mean_loss;      // running mean per epoch
  double final_loss = 0.0;                  // full pass after training
};

// Plain SGD on mean-squared interpolation error. Deterministic given the
// seed. Throws TrainingError if the loss becomes non-finite.
Checkpoint train(const KernelNetModel& init, const std::vector<FrameTriplet>& dataset,
                 std::size_t epochs, double learning_rate, std::uint64_t seed,
                 TrainLog* log = nullptr);

// Plain SGD on cross-entropy.
Checkpoint train(const ToyClassifier& init, const std::vector<RecognitionSample>& dataset,
                 std::size_t epochs, double learning_rate, std::uint64_t seed,
                 TrainLog* log = nullptr);

std::unique_ptr<InterpolationModel> make_victim(const std::string& name,
                                                const std::filesystem::path& checkpoint_dir);

}  // namespace iaa
