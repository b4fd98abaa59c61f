#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "iaa/datagen.hpp"
#include "iaa/io.hpp"
#include "iaa/models.hpp"
#include "iaa/rng.hpp"
#include "oracles.hpp"

using namespace iaa;
namespace fs = std::filesystem;

namespace {

Tensor random_frame(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform();
  return t;
}

// a small scene with one disk at (cx, cy)
Tensor disk_frame(double cx, double cy, std::size_t hw = 20) {
  SceneSpec spec;
  spec.channels = 1;
  spec.height = hw;
  spec.width = hw;
  spec.background = 0.1;
  Primitive d;
  d.kind = PrimitiveKind::Disk;
  d.cx = cx;
  d.cy = cy;
  d.width = 6.0;
  d.intensity = {0.9};
  spec.primitives.push_back(d);
  return render_frame(spec, 0.0, nullptr);
}

}  // namespace

TEST_CASE("blend examples") {
  BlendModel blend;
  Rng rng(1);
  const Tensor x = random_frame({2, 6, 6}, rng);
  CHECK(blend.interpolate(x, x).bit_equal(x));

  const Tensor zeros = Tensor::zeros({1, 4, 4});
  const Tensor ones = Tensor::ones({1, 4, 4});
  const Tensor mid = blend.interpolate(zeros, ones);
  for (double v : mid.data()) CHECK(v == 0.5);

  // gradient of the distance loss wrt prev is 0.5 * residual / ||residual||
  const Tensor prev = random_frame({1, 4, 4}, rng);
  const Tensor next = random_frame({1, 4, 4}, rng);
  const Tensor gt = random_frame({1, 4, 4}, rng);
  Tape tape;
  Var pv = tape.leaf(prev);
  Var nv = tape.leaf(next);
  Var out = blend.forward(tape, pv, nv);
  Var loss = l2_norm(sub(out, tape.constant(gt)));
  const auto grads = tape.gradients(loss, {pv});
  const Tensor f = blend.interpolate(prev, next);
  double norm = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    norm += (f[i] - gt[i]) * (f[i] - gt[i]);
  }
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(grads[0][i] == doctest::Approx(0.5 * (f[i] - gt[i]) / norm).epsilon(1e-12));
  }
}

TEST_CASE("warp: static scene gives zero flow and reproduces the frame") {
  const Tensor frame = disk_frame(10.0, 9.0);
  const auto [vx, vy] = WarpModel::estimate_translation(frame, frame, 4);
  CHECK(vx == 0);
  CHECK(vy == 0);
  WarpModel warp;
  CHECK(warp.interpolate(frame, frame).bit_equal(frame));
}

TEST_CASE("warp: 2px translation is recovered and midpoint is rendered") {
  const Tensor prev = disk_frame(8.0, 10.0);
  const Tensor next = disk_frame(10.0, 10.0);

  // brute-force argmin over the same SSD objective, coded straight-line
  int best_vx = 99, best_vy = 99;
  double best = 1e300;
  const std::size_t H = 20, W = 20;
  for (int vy = -4; vy <= 4; ++vy) {
    for (int vx = -4; vx <= 4; ++vx) {
      double ssd = 0.0;
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const long sy = std::clamp<long>(static_cast<long>(y) - vy, 0, H - 1);
          const long sx = std::clamp<long>(static_cast<long>(x) - vx, 0, W - 1);
          const double d = prev.at3(0, sy, sx) - next.at3(0, y, x);
          ssd += d * d;
        }
      }
      if (ssd < best) {
        best = ssd;
        best_vx = vx;
        best_vy = vy;
      }
    }
  }
  CHECK(best_vx == 2);
  CHECK(best_vy == 0);
  CHECK(WarpModel::estimate_translation(prev, next, 4) == std::make_pair(2, 0));

  // the interpolated frame puts the disk at the 1px midpoint
  WarpModel warp;
  const Tensor out = warp.interpolate(prev, next);
  const Tensor expected = disk_frame(9.0, 10.0);
  double max_err = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    max_err = std::max(max_err, std::abs(out[i] - expected[i]));
  }
  CHECK(max_err < 1e-12);
}

TEST_CASE("warp gradient matches finite differences with the flow held fixed") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(300 + seed);
    // clear 1px motion so the argmin is stable under small perturbations
    const double cx = 8.0 + rng.uniform(0.0, 2.0);
    const double cy = 8.0 + rng.uniform(0.0, 2.0);
    Tensor prev = disk_frame(cx, cy);
    Tensor next = disk_frame(cx + 1.0, cy);
    for (auto& v : prev.data()) v = std::clamp(v + rng.uniform(-0.02, 0.02), 0.0, 1.0);
    for (auto& v : next.data()) v = std::clamp(v + rng.uniform(-0.02, 0.02), 0.0, 1.0);
    const Tensor gt = disk_frame(cx + 0.5, cy);

    WarpModel warp;
    Tape tape;
    Var pv = tape.leaf(prev);
    Var nv = tape.leaf(next);
    Var loss = l2_norm(sub(warp.forward(tape, pv, nv), tape.constant(gt)));
    const auto grads = tape.gradients(loss, {pv, nv});

    // freeze the flow at the unperturbed estimate for the FD oracle
    const auto [vx, vy] = WarpModel::estimate_translation(prev, next, 4);
    auto loss_frozen = [&](const Tensor& p, const Tensor& n) {
      Tape t;
      Var a = bilinear_sample(t.leaf(p), -vx / 2.0, -vy / 2.0);
      Var b = bilinear_sample(t.leaf(n), vx / 2.0, vy / 2.0);
      return l2_norm(sub(scale(add(a, b), 0.5), t.constant(gt))).value().item();
    };
    const Tensor fdp = oracle::finite_difference(
        [&](const Tensor& v) { return loss_frozen(v, next); }, prev);
    const Tensor fdn = oracle::finite_difference(
        [&](const Tensor& v) { return loss_frozen(prev, v); }, next);
    CHECK(oracle::max_rel_error(grads[0], fdp) < 1e-5);
    CHECK(oracle::max_rel_error(grads[1], fdn) < 1e-5);
  }
}

TEST_CASE("kernelnet: center-mass weights reduce to blend") {
  const std::size_t C = 1, F = 4;
  // zero conv weights; bias puts equal large mass on both center channels
  Tensor w1({F, 2 * C, 3, 3}), b1({F});
  Tensor w2({2 * 9, F, 3, 3}), b2({2 * 9});
  b2[4] = 50.0;      // center offset of the prev neighborhood
  b2[9 + 4] = 50.0;  // center offset of the next neighborhood
  KernelNetModel net(C, F, w1, b1, w2, b2);

  Rng rng(17);
  const Tensor prev = random_frame({C, 8, 8}, rng);
  const Tensor next = random_frame({C, 8, 8}, rng);
  BlendModel blend;
  const Tensor expected = blend.interpolate(prev, next);
  const Tensor out = net.interpolate(prev, next);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
}

TEST_CASE("kernelnet: partition of unity maps constants to constants") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const KernelNetModel net = KernelNetModel::random_init(3, 6, seed);
    const double c = 0.3 + 0.1 * static_cast<double>(seed);
    const Tensor constant = Tensor::full({3, 9, 9}, c);
    const Tensor out = net.interpolate(constant, constant);
    for (double v : out.data()) CHECK(v == doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("kernelnet gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    const KernelNetModel net = KernelNetModel::random_init(1, 4, 900 + seed);
    const Tensor prev = random_frame({1, 6, 6}, rng);
    const Tensor next = random_frame({1, 6, 6}, rng);
    const Tensor gt = random_frame({1, 6, 6}, rng);

    Tape tape;
    Var pv = tape.leaf(prev);
    Var nv = tape.leaf(next);
    Var loss = l2_norm(sub(net.forward(tape, pv, nv), tape.constant(gt)));
    const auto grads = tape.gradients(loss, {pv, nv});

    auto eval = [&](const Tensor& p, const Tensor& n) {
      Tape t;
      return l2_norm(sub(net.forward(t, t.leaf(p), t.leaf(n)), t.constant(gt))).value().item();
    };
    const Tensor fdp = oracle::finite_difference(
        [&](const Tensor& v) { return eval(v, next); }, prev);
    const Tensor fdn = oracle::finite_difference(
        [&](const Tensor& v) { return eval(prev, v); }, next);
    CHECK(oracle::max_rel_error(grads[0], fdp) < 1e-5);
    CHECK(oracle::max_rel_error(grads[1], fdn) < 1e-5);
  }
}

TEST_CASE("classifier forward contract and gradients") {
  const ToyClassifier cls = ToyClassifier::random_init(4, 1, 4, 4, 42);
  Rng rng(21);
  const Tensor group = random_frame({4, 1, 8, 8}, rng);
  const Tensor s1 = cls.scores(group);
  const Tensor s2 = cls.scores(group);
  CHECK(s1.shape() == Shape{4});
  CHECK(s1.bit_equal(s2));  // determinism

  // wrong frame count
  CHECK_THROWS_AS(cls.scores(random_frame({3, 1, 8, 8}, rng)), ShapeError);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng r2(700 + seed);
    const Tensor g = random_frame({4, 1, 6, 6}, r2);
    const std::size_t label = seed % 4;
    Tape tape;
    Var gv = tape.leaf(g);
    Var loss = cross_entropy(cls.forward(tape, gv), label);
    const auto grads = tape.gradients(loss, {gv});
    const Tensor fd = oracle::finite_difference(
        [&](const Tensor& v) {
          Tape t;
          return cross_entropy(cls.forward(t, t.leaf(v)), label).value().item();
        },
        g);
    CHECK(oracle::max_rel_error(grads[0], fd) < 1e-5);
  }
}

TEST_CASE("checkpoint round-trip is bit exact") {
  const KernelNetModel net = KernelNetModel::random_init(3, 5, 77);
  Checkpoint ckpt = net.to_checkpoint();
  ckpt.seed = 77;
  ckpt.epochs = 3;
  ckpt.final_loss = 0.12345678901234567;

  const fs::path dir = fs::temp_directory_path() / "iaa_models_test";
  fs::create_directories(dir);
  const fs::path path = dir / "net.ckpt";
  save_checkpoint(path, ckpt);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.model_kind == ckpt.model_kind);
  CHECK(back.seed == ckpt.seed);
  CHECK(back.epochs == ckpt.epochs);
  CHECK(back.final_loss == ckpt.final_loss);
  REQUIRE(back.params.size() == ckpt.params.size());
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    CHECK(back.params[i].first == ckpt.params[i].first);
    CHECK(back.params[i].second.bit_equal(ckpt.params[i].second));
  }

  // a second save produces identical bytes
  const fs::path path2 = dir / "net2.ckpt";
  save_checkpoint(path2, back);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);

  // forwards reproduce bit-identically through the round trip
  const KernelNetModel reloaded = KernelNetModel::from_checkpoint(back);
  Rng rng(5);
  const Tensor prev = random_frame({3, 7, 7}, rng);
  const Tensor next = random_frame({3, 7, 7}, rng);
  CHECK(reloaded.interpolate(prev, next).bit_equal(net.interpolate(prev, next)));

  CHECK_THROWS_AS(load_checkpoint(dir / "nope.ckpt"), CheckpointError);
  CHECK_THROWS_AS(ToyClassifier::from_checkpoint(back), CheckpointError);
}

TEST_CASE("training: zero epochs returns the initialization") {
  const auto clips = generate_clips(2, 1, 16, 16, 0.5, 5, 31);
  std::vector<FrameTriplet> data;
  for (const auto& c : clips) {
    auto t = extract_triplets(c);
    data.insert(data.end(), t.begin(), t.end());
  }
  const KernelNetModel init = KernelNetModel::random_init(1, 4, 8);
  const Checkpoint ckpt = train(init, data, 0, 0.1, 1);
  const auto before = init.parameters();
  REQUIRE(ckpt.params.size() == before.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(ckpt.params[i].second.bit_equal(before[i].second));
  }
}

TEST_CASE("training: loss does not increase over the recorded trajectory") {
  const auto clips = generate_clips(3, 1, 16, 16, 0.5, 9, 32);
  std::vector<FrameTriplet> data;
  for (const auto& c : clips) {
    auto t = extract_triplets(c);
    data.insert(data.end(), t.begin(), t.end());
  }
  const KernelNetModel init = KernelNetModel::random_init(1, 4, 9);
  TrainLog log;
  const Checkpoint ckpt = train(init, data, 4, 20.0, 2, &log);
  CHECK(log.final_loss <= log.initial_loss);
  CHECK(ckpt.final_loss == log.final_loss);

  // deterministic given the seed
  TrainLog log2;
  const Checkpoint again = train(init, data, 4, 20.0, 2, &log2);
  CHECK(again.final_loss == ckpt.final_loss);
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    CHECK(again.params[i].second.bit_equal(ckpt.params[i].second));
  }

  CHECK_THROWS_AS(train(init, {}, 1, 0.1, 1), ContractError);
}

TEST_CASE("training: divergence raises TrainingError") {
  // identical groups with different labels keep at least one gradient
  // non-zero; a near-overflow head scale then drives the loss non-finite
  auto samples = generate_labeled_groups(4, 1, 4, 33, 1);
  samples.resize(2, samples[0]);
  samples[1] = samples[0];
  samples[1].label = (samples[0].label + 1) % 4;
  auto params = ToyClassifier::random_init(4, 1, 4, 4, 10).parameters();
  for (auto& [name, tensor] : params) {
    if (name == "fc.w") {
      for (auto& v : tensor.data()) v *= 1e300;
    }
  }
  const ToyClassifier init(4, 1, 4, 4, params);
  CHECK_THROWS_AS(train(init, samples, 5, 10.0, 3), TrainingError);
}
