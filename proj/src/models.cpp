#include "iaa/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "iaa/io.hpp"
#include "iaa/rng.hpp"

namespace iaa {

// ---- Checkpoint ----

const Tensor& Checkpoint::param(const std::string& name) const {
  for (const auto& [key, value] : params) {
    if (key == name) return value;
  }
  throw CheckpointError("checkpoint lacks parameter '" + name + "'");
}

std::size_t Checkpoint::hyper_int(const std::string& key) const {
  auto it = hyper.find(key);
  if (it == hyper.end()) throw CheckpointError("checkpoint lacks hyperparameter '" + key + "'");
  return static_cast<std::size_t>(std::stoull(it->second));
}

namespace {

std::string double_to_text(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open for writing: " + path.string());
  os << "IAAB1\n";
  os << "kind=" << ckpt.model_kind << "\n";
  os << "seed=" << ckpt.seed << "\n";
  os << "epochs=" << ckpt.epochs << "\n";
  os << "final_loss=" << double_to_text(ckpt.final_loss) << "\n";
  for (const auto& [key, value] : ckpt.hyper) os << "hyper." << key << "=" << value << "\n";
  os << "param_count=" << ckpt.params.size() << "\n";
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    os << "param." << i << "=" << ckpt.params[i].first << "\n";
  }
  os << "end\n";
  for (const auto& [name, tensor] : ckpt.params) write_tensor(os, tensor);
  if (!os) throw FormatError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("missing checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "IAAB1") {
    throw FormatError("checkpoint: bad magic in " + path.string());
  }
  Checkpoint ckpt;
  std::vector<std::string> param_names;
  std::size_t param_count = 0;
  while (std::getline(is, line)) {
    if (line == "end") break;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: malformed metadata line");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "kind") {
      ckpt.model_kind = value;
    } else if (key == "seed") {
      ckpt.seed = std::stoull(value);
    } else if (key == "epochs") {
      ckpt.epochs = std::stoull(value);
    } else if (key == "final_loss") {
      ckpt.final_loss = std::stod(value);
    } else if (key == "param_count") {
      param_count = std::stoull(value);
      param_names.resize(param_count);
    } else if (key.rfind("hyper.", 0) == 0) {
      ckpt.hyper[key.substr(6)] = value;
    } else if (key.rfind("param.", 0) == 0) {
      const std::size_t idx = std::stoull(key.substr(6));
      if (idx >= param_names.size()) throw FormatError("checkpoint: param index out of range");
      param_names[idx] = value;
    } else {
      throw FormatError("checkpoint: unknown metadata key '" + key + "'");
    }
  }
  if (line != "end") throw FormatError("checkpoint: truncated metadata");
  for (std::size_t i = 0; i < param_count; ++i) {
    ckpt.params.emplace_back(param_names[i], read_tensor(is));
  }
  return ckpt;
}

// ---- InterpolationModel ----

Tensor InterpolationModel::interpolate(const Tensor& prev, const Tensor& next) const {
  Tape tape;
  Var p = tape.constant(prev);
  Var n = tape.constant(next);
  return forward(tape, p, n).value();
}

Tensor InterpolationModel::interpolate_clamped(const Tensor& prev, const Tensor& next) const {
  return clamp(interpolate(prev, next), 0.0, 1.0);
}

// ---- BlendModel ----

Var BlendModel::forward(Tape&, Var prev, Var next) const {
  return scale(add(prev, next), 0.5);
}

// ---- WarpModel ----

std::pair<int, int> WarpModel::estimate_translation(const Tensor& prev, const Tensor& next,
                                                    int radius) {
  if (!prev.same_shape(next)) throw ShapeError("warp: frame shapes differ");
  if (prev.rank() != 3) throw ShapeError("warp: frames must be [C,H,W]");
  const std::size_t C = prev.shape()[0], H = prev.shape()[1], W = prev.shape()[2];
  const double* pd = prev.data().data();
  const double* nd = next.data().data();

  auto ssd_for = [&](int vx, int vy) {
    double acc = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double* pplane = pd + c * H * W;
      const double* nplane = nd + c * H * W;
      for (std::size_t y = 0; y < H; ++y) {
        const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) - vy;
        const std::size_t py = sy < 0 ? 0 : (sy >= static_cast<std::ptrdiff_t>(H) ? H - 1
                                                                                  : static_cast<std::size_t>(sy));
        for (std::size_t x = 0; x < W; ++x) {
          const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) - vx;
          const std::size_t px = sx < 0 ? 0 : (sx >= static_cast<std::ptrdiff_t>(W) ? W - 1
                                                                                    : static_cast<std::size_t>(sx));
          const double diff = pplane[py * W + px] - nplane[y * W + x];
          acc += diff * diff;
        }
      }
    }
    return acc;
  };

  int best_vx = 0, best_vy = 0;
  double best = ssd_for(0, 0);
  for (int vy = -radius; vy <= radius; ++vy) {
    for (int vx = -radius; vx <= radius; ++vx) {
      if (vx == 0 && vy == 0) continue;
      const double ssd = ssd_for(vx, vy);
      if (ssd < best) {
        best = ssd;
        best_vx = vx;
        best_vy = vy;
      }
    }
  }
  return {best_vx, best_vy};
}

Var WarpModel::forward(Tape&, Var prev, Var next) const {
  const auto [vx, vy] = estimate_translation(prev.value(), next.value(), radius_);
  const double hx = static_cast<double>(vx) / 2.0;
  const double hy = static_cast<double>(vy) / 2.0;
  Var a = bilinear_sample(prev, -hx, -hy);
  Var b = bilinear_sample(next, hx, hy);
  return scale(add(a, b), 0.5);
}

// ---- KernelNetModel ----

namespace {

Tensor uniform_init(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

KernelNetModel::KernelNetModel(std::size_t channels, std::size_t features, Tensor conv1_w,
                               Tensor conv1_b, Tensor conv2_w, Tensor conv2_b)
    : channels_(channels),
      features_(features),
      conv1_w_(std::move(conv1_w)),
      conv1_b_(std::move(conv1_b)),
      conv2_w_(std::move(conv2_w)),
      conv2_b_(std::move(conv2_b)) {
  const Shape w1{features_, 2 * channels_, 3, 3};
  const Shape w2{2 * kNeighbors, features_, 3, 3};
  if (conv1_w_.shape() != w1 || conv2_w_.shape() != w2 ||
      conv1_b_.shape() != Shape{features_} || conv2_b_.shape() != Shape{2 * kNeighbors}) {
    throw CheckpointError("kernelnet: parameter shapes do not match hyperparameters");
  }
}

KernelNetModel KernelNetModel::random_init(std::size_t channels, std::size_t features,
                                           std::uint64_t seed) {
  Rng rng(seed);
  const double b1 = 1.0 / std::sqrt(static_cast<double>(2 * channels * 9));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(features * 9));
  return KernelNetModel(channels, features,
                        uniform_init({features, 2 * channels, 3, 3}, b1, rng),
                        Tensor::zeros({features}),
                        uniform_init({2 * kNeighbors, features, 3, 3}, b2, rng),
                        Tensor::zeros({2 * kNeighbors}));
}

KernelNetModel KernelNetModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "kernelnet") {
    throw CheckpointError("expected a kernelnet checkpoint, got '" + ckpt.model_kind + "'");
  }
  return KernelNetModel(ckpt.hyper_int("channels"), ckpt.hyper_int("features"),
                        ckpt.param("conv1.w"), ckpt.param("conv1.b"), ckpt.param("conv2.w"),
                        ckpt.param("conv2.b"));
}

Checkpoint KernelNetModel::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.model_kind = "kernelnet";
  ckpt.hyper["channels"] = std::to_string(channels_);
  ckpt.hyper["features"] = std::to_string(features_);
  ckpt.params = parameters();
  return ckpt;
}

std::vector<std::pair<std::string, Tensor>> KernelNetModel::parameters() const {
  return {{"conv1.w", conv1_w_}, {"conv1.b", conv1_b_}, {"conv2.w", conv2_w_},
          {"conv2.b", conv2_b_}};
}

Var KernelNetModel::graph(Tape&, Var prev, Var next, const ParamVars& p) {
  if (!prev.value().same_shape(next.value())) {
    throw ShapeError("kernelnet: frame shapes differ");
  }
  Var x = concat0(prev, next);
  Var h = relu(add_channel_bias(conv2d(x, p.conv1_w, 1, 1), p.conv1_b));
  Var logits = add_channel_bias(conv2d(h, p.conv2_w, 1, 1), p.conv2_b);
  Var weights = softmax0(logits);  // [18,H,W]; sums to 1 per pixel across both frames

  Var out;
  for (std::size_t d = 0; d < kNeighbors; ++d) {
    const double dy = static_cast<double>(d / 3) - 1.0;
    const double dx = static_cast<double>(d % 3) - 1.0;
    Var term = add(mul_broadcast0(bilinear_sample(prev, dx, dy), select0(weights, d)),
                   mul_broadcast0(bilinear_sample(next, dx, dy), select0(weights, kNeighbors + d)));
    out = d == 0 ? term : add(out, term);
  }
  return out;
}

Var KernelNetModel::forward(Tape& tape, Var prev, Var next) const {
  ParamVars p{tape.constant(conv1_w_), tape.constant(conv1_b_), tape.constant(conv2_w_),
              tape.constant(conv2_b_)};
  return graph(tape, prev, next, p);
}

// ---- RecognitionModel ----

Tensor RecognitionModel::scores(const Tensor& group) const {
  Tape tape;
  Var g = tape.constant(group);
  return forward(tape, g).value();
}

std::size_t RecognitionModel::predict(const Tensor& group) const {
  const Tensor s = scores(group);
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  return best;
}

// ---- ToyClassifier ----

ToyClassifier::ToyClassifier(std::size_t frames_per_group, std::size_t channels,
                             std::size_t features, std::size_t class_count,
                             std::vector<std::pair<std::string, Tensor>> params)
    : frames_(frames_per_group),
      channels_(channels),
      features_(features),
      class_count_(class_count),
      params_(std::move(params)) {
  if (frames_ < 2) throw ContractError("classifier: frames_per_group must be >= 2");
  const Shape w1{features_, (frames_ - 1) * channels_, 3, 3};
  const Shape w2{features_, features_, 3, 3};
  const Shape fc{class_count_, features_};
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& [key, value] : params_) {
      if (key == name) return value;
    }
    throw CheckpointError("classifier lacks parameter '" + name + "'");
  };
  if (find("conv1.w").shape() != w1 || find("conv2.w").shape() != w2 ||
      find("fc.w").shape() != fc || find("conv1.b").shape() != Shape{features_} ||
      find("conv2.b").shape() != Shape{features_} || find("fc.b").shape() != Shape{class_count_}) {
    throw CheckpointError("classifier: parameter shapes do not match hyperparameters");
  }
}

ToyClassifier ToyClassifier::random_init(std::size_t frames_per_group, std::size_t channels,
                                         std::size_t features, std::size_t class_count,
                                         std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t in_ch = (frames_per_group - 1) * channels;
  const double b1 = 1.0 / std::sqrt(static_cast<double>(in_ch * 9));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(features * 9));
  const double b3 = 1.0 / std::sqrt(static_cast<double>(features));
  std::vector<std::pair<std::string, Tensor>> params;
  params.emplace_back("conv1.w", uniform_init({features, in_ch, 3, 3}, b1, rng));
  params.emplace_back("conv1.b", Tensor::zeros({features}));
  params.emplace_back("conv2.w", uniform_init({features, features, 3, 3}, b2, rng));
  params.emplace_back("conv2.b", Tensor::zeros({features}));
  params.emplace_back("fc.w", uniform_init({class_count, features}, b3, rng));
  params.emplace_back("fc.b", Tensor::zeros({class_count}));
  return ToyClassifier(frames_per_group, channels, features, class_count, std::move(params));
}

ToyClassifier ToyClassifier::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != "classifier") {
    throw CheckpointError("expected a classifier checkpoint, got '" + ckpt.model_kind + "'");
  }
  return ToyClassifier(ckpt.hyper_int("frames_per_group"), ckpt.hyper_int("channels"),
                       ckpt.hyper_int("features"), ckpt.hyper_int("class_count"), ckpt.params);
}

Checkpoint ToyClassifier::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.model_kind = "classifier";
  ckpt.hyper["frames_per_group"] = std::to_string(frames_);
  ckpt.hyper["channels"] = std::to_string(channels_);
  ckpt.hyper["features"] = std::to_string(features_);
  ckpt.hyper["class_count"] = std::to_string(class_count_);
  ckpt.params = params_;
  return ckpt;
}

std::vector<std::pair<std::string, Tensor>> ToyClassifier::parameters() const { return params_; }

Var ToyClassifier::graph(Tape&, Var group, const ParamVars& p, std::size_t frames) {
  const Tensor& gv = group.value();
  if (gv.rank() != 4) throw ShapeError("classifier: group must be [N,C,H,W]");
  if (gv.shape()[0] != frames) {
    throw ShapeError("classifier: group has " + std::to_string(gv.shape()[0]) +
                     " frames, model expects " + std::to_string(frames));
  }
  // temporal-difference features; the fixed gain compensates for the
  // sparse support of frame deltas so pooled statistics land near unit scale
  constexpr double kDeltaGain = 16.0;
  Var deltas;
  for (std::size_t f = 0; f + 1 < frames; ++f) {
    Var d = scale(sub(select0(group, f + 1), select0(group, f)), kDeltaGain);
    deltas = f == 0 ? d : concat0(deltas, d);
  }
  Var h1 = relu(add_channel_bias(conv2d(deltas, p.conv1_w, 1, 1), p.conv1_b));
  Var h2 = relu(add_channel_bias(conv2d(h1, p.conv2_w, 1, 1), p.conv2_b));
  Var pooled = mean_per_slice0(h2);
  return add(matvec(p.fc_w, pooled), p.fc_b);
}

Var ToyClassifier::forward(Tape& tape, Var group) const {
  ParamVars p{tape.constant(params_[0].second), tape.constant(params_[1].second),
              tape.constant(params_[2].second), tape.constant(params_[3].second),
              tape.constant(params_[4].second), tape.constant(params_[5].second)};
  return graph(tape, group, p, frames_);
}

// ---- training ----

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace

Checkpoint train(const KernelNetModel& init, const std::vector<FrameTriplet>& dataset,
                 std::size_t epochs, double learning_rate, std::uint64_t seed, TrainLog* log) {
  if (dataset.empty()) throw ContractError("train: empty dataset");
  std::vector<std::pair<std::string, Tensor>> params = init.parameters();

  auto forward_loss = [&](const FrameTriplet& t, bool with_grads,
                          std::vector<Tensor>* grads) -> double {
    Tape tape;
    KernelNetModel::ParamVars pv;
    std::vector<Var> leaves;
    if (with_grads) {
      for (auto& [name, tensor] : params) leaves.push_back(tape.leaf(tensor));
    } else {
      for (auto& [name, tensor] : params) leaves.push_back(tape.constant(tensor));
    }
    pv.conv1_w = leaves[0];
    pv.conv1_b = leaves[1];
    pv.conv2_w = leaves[2];
    pv.conv2_b = leaves[3];
    Var prev = tape.constant(t.prev);
    Var next = tape.constant(t.next);
    Var out = KernelNetModel::graph(tape, prev, next, pv);
    Var diff = sub(out, tape.constant(t.gt));
    Var loss = mean(mul(diff, diff));
    const double value = loss.value().item();
    if (with_grads) *grads = tape.gradients(loss, leaves);
    return value;
  };

  auto full_pass = [&]() {
    double acc = 0.0;
    for (const auto& t : dataset) acc += forward_loss(t, false, nullptr);
    return acc / static_cast<double>(dataset.size());
  };

  TrainLog local_log;
  TrainLog& out_log = log ? *log : local_log;
  try {
    out_log.initial_loss = full_pass();
    Rng rng(seed);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      const auto order = shuffled_indices(dataset.size(), rng);
      double running = 0.0;
      for (std::size_t idx : order) {
        std::vector<Tensor> grads;
        running += forward_loss(dataset[idx], true, &grads);
        for (std::size_t p = 0; p < params.size(); ++p) {
          params[p].second = axpy(params[p].second, -learning_rate, grads[p]);
        }
      }
      out_log.epoch_mean_loss.push_back(running / static_cast<double>(dataset.size()));
    }
    out_log.final_loss = full_pass();
  } catch (const NumericsError& e) {
    throw TrainingError(std::string("kernelnet training diverged: ") + e.what());
  }

  KernelNetModel trained(init.channels(), init.features(), params[0].second, params[1].second,
                         params[2].second, params[3].second);
  Checkpoint ckpt = trained.to_checkpoint();
  ckpt.seed = seed;
  ckpt.epochs = epochs;
  ckpt.final_loss = out_log.final_loss;
  return ckpt;
}

Checkpoint train(const ToyClassifier& init, const std::vector<RecognitionSample>& dataset,
                 std::size_t epochs, double learning_rate, std::uint64_t seed, TrainLog* log) {
  if (dataset.empty()) throw ContractError("train: empty dataset");
  std::vector<std::pair<std::string, Tensor>> params = init.parameters();
  const std::size_t frames = init.frames_per_group();
  const std::size_t classes = init.class_count();

  auto forward_loss = [&](const RecognitionSample& s, bool with_grads,
                          std::vector<Tensor>* grads) -> double {
    if (s.label >= classes) throw ContractError("train: label out of range");
    Tape tape;
    std::vector<Var> leaves;
    if (with_grads) {
      for (auto& [name, tensor] : params) leaves.push_back(tape.leaf(tensor));
    } else {
      for (auto& [name, tensor] : params) leaves.push_back(tape.constant(tensor));
    }
    ToyClassifier::ParamVars pv{leaves[0], leaves[1], leaves[2], leaves[3], leaves[4], leaves[5]};
    Var group = tape.constant(s.group);
    Var loss = cross_entropy(ToyClassifier::graph(tape, group, pv, frames), s.label);
    const double value = loss.value().item();
    if (with_grads) *grads = tape.gradients(loss, leaves);
    return value;
  };

  auto full_pass = [&]() {
    double acc = 0.0;
    for (const auto& s : dataset) acc += forward_loss(s, false, nullptr);
    return acc / static_cast<double>(dataset.size());
  };

  TrainLog local_log;
  TrainLog& out_log = log ? *log : local_log;
  try {
    out_log.initial_loss = full_pass();
    Rng rng(seed);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      const auto order = shuffled_indices(dataset.size(), rng);
      double running = 0.0;
      for (std::size_t idx : order) {
        std::vector<Tensor> grads;
        running += forward_loss(dataset[idx], true, &grads);
        for (std::size_t p = 0; p < params.size(); ++p) {
          params[p].second = axpy(params[p].second, -learning_rate, grads[p]);
        }
      }
      out_log.epoch_mean_loss.push_back(running / static_cast<double>(dataset.size()));
    }
    out_log.final_loss = full_pass();
  } catch (const NumericsError& e) {
    throw TrainingError(std::string("classifier training diverged: ") + e.what());
  }

  ToyClassifier trained(frames, init.channels(), init.features(), classes, params);
  Checkpoint ckpt = trained.to_checkpoint();
  ckpt.seed = seed;
  ckpt.epochs = epochs;
  ckpt.final_loss = out_log.final_loss;
  return ckpt;
}

std::unique_ptr<InterpolationModel> make_victim(const std::string& name,
                                                const std::filesystem::path& checkpoint_dir) {
  if (name == "blend") return std::make_unique<BlendModel>();
  if (name == "warp") return std::make_unique<WarpModel>();
  if (name == "kernelnet") {
    const auto path = checkpoint_dir / "kernelnet.ckpt";
    if (!std::filesystem::exists(path)) {
      throw CheckpointError("missing checkpoint " + path.string() + "; run the train command first");
    }
    return std::make_unique<KernelNetModel>(
        KernelNetModel::from_checkpoint(load_checkpoint(path)));
  }
  throw ContractError("unknown victim '" + name + "' (expected blend, warp or kernelnet)");
}

}  // namespace iaa
