#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "iaa/datagen.hpp"
#include "iaa/io.hpp"
#include "iaa/rng.hpp"

using namespace iaa;
namespace fs = std::filesystem;

namespace {

SceneSpec one_disk(double vx, double vy, double speed_margin_frames = 8) {
  SceneSpec spec;
  spec.channels = 1;
  spec.height = 24;
  spec.width = 24;
  spec.background = 0.1;
  Primitive disk;
  disk.kind = PrimitiveKind::Disk;
  disk.cx = 12.0 - vx * speed_margin_frames / 2;
  disk.cy = 12.0 - vy * speed_margin_frames / 2;
  disk.width = 8.0;
  disk.intensity = {0.9};
  disk.vx = vx;
  disk.vy = vy;
  spec.primitives.push_back(disk);
  return spec;
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "iaa_datagen_test";
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("static scene renders identical frames") {
  const VideoClip clip = generate_clip(one_disk(0.0, 0.0), 5, 1);
  for (std::size_t t = 1; t < clip.frames.size(); ++t) {
    CHECK(clip.frames[t].bit_equal(clip.frames[0]));
  }
}

TEST_CASE("integer velocity translates frames exactly in the interior") {
  const VideoClip clip = generate_clip(one_disk(1.0, 0.0), 5, 1);
  const Tensor& f0 = clip.frames[0];
  const Tensor& f1 = clip.frames[1];
  const std::size_t H = 24, W = 24;
  for (std::size_t y = 1; y + 1 < H; ++y) {
    for (std::size_t x = 1; x + 1 < W; ++x) {
      CHECK(f1.at3(0, y, x) == doctest::Approx(f0.at3(0, y, x - 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("inter-frame gap grows monotonically with velocity") {
  double last = -1.0;
  for (double v : {0.25, 0.5, 1.0, 2.0}) {
    const VideoClip clip = generate_clip(one_disk(v, 0.0), 5, 3);
    double gap = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t + 1 < clip.frames.size(); ++t) {
      auto a = clip.frames[t].data();
      auto b = clip.frames[t + 1].data();
      for (std::size_t i = 0; i < a.size(); ++i) {
        gap += std::abs(a[i] - b[i]);
        ++count;
      }
    }
    gap /= static_cast<double>(count);
    CHECK(gap > last);
    last = gap;
  }
}

TEST_CASE("clip and spec validation") {
  CHECK_THROWS_AS(generate_clip(one_disk(0.0, 0.0), 4, 1), SpecError);  // even
  CHECK_THROWS_AS(generate_clip(one_disk(0.0, 0.0), 1, 1), SpecError);  // too short
  // a fast primitive leaves the canvas
  CHECK_THROWS_AS(generate_clip(one_disk(4.0, 0.0), 21, 1), SpecError);
  SceneSpec bad = one_disk(0.0, 0.0);
  bad.primitives[0].intensity = {0.5, 0.5};  // channel mismatch
  CHECK_THROWS_AS(generate_clip(bad, 5, 1), SpecError);
}

TEST_CASE("triplet extraction") {
  const VideoClip clip3 = generate_clip(one_disk(0.5, 0.0), 3, 1);
  CHECK(extract_triplets(clip3).size() == 1);

  const VideoClip clip9 = generate_clip(one_disk(0.5, 0.0), 9, 1);
  const auto triplets = extract_triplets(clip9);
  CHECK(triplets.size() == 4);
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    CHECK(triplets[k].index == k);
    // gt is the held-out odd frame
    CHECK(triplets[k].gt.bit_equal(clip9.frames[2 * k + 1]));
    CHECK(triplets[k].prev.bit_equal(clip9.frames[2 * k]));
    CHECK(triplets[k].next.bit_equal(clip9.frames[2 * k + 2]));
  }

  VideoClip even = clip9;
  even.frames.pop_back();
  CHECK_THROWS_AS(extract_triplets(even), SpecError);
}

TEST_CASE("labeled groups: balance, determinism, centroid direction") {
  const auto samples = generate_labeled_groups(4, 6, 4, 99, 3);
  CHECK(samples.size() == 24);
  std::size_t per_class[4] = {0, 0, 0, 0};
  for (const auto& s : samples) {
    REQUIRE(s.label < 4);
    ++per_class[s.label];
    CHECK(s.group.shape()[0] == 4);
  }
  for (std::size_t c = 0; c < 4; ++c) CHECK(per_class[c] == 6);

  // bit-identical regeneration
  const auto again = generate_labeled_groups(4, 6, 4, 99, 3);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    CHECK(samples[i].label == again[i].label);
    CHECK(samples[i].group.bit_equal(again[i].group));
  }

  CHECK_THROWS_AS(generate_labeled_groups(3, 6, 4, 99), SpecError);

  // "right" samples: intensity-weighted x-centroid strictly increases
  for (const auto& s : samples) {
    if (s.label != 3) continue;
    const std::size_t N = s.group.shape()[0];
    const std::size_t H = s.group.shape()[2], W = s.group.shape()[3];
    double last_cx = -1.0;
    for (std::size_t f = 0; f < N; ++f) {
      double mass = 0.0, cx = 0.0;
      for (std::size_t y = 0; y < H; ++y) {
        for (std::size_t x = 0; x < W; ++x) {
          const double v = s.group.data()[((f * 1 + 0) * H + y) * W + x];
          mass += v;
          cx += v * static_cast<double>(x);
        }
      }
      cx /= mass;
      if (f > 0) CHECK(cx > last_cx);
      last_cx = cx;
    }
  }
}

TEST_CASE("tensor file round-trip is bit exact") {
  Rng rng(7);
  Tensor t({3, 5, 4});
  for (auto& v : t.data()) v = rng.uniform(-10.0, 10.0);
  const fs::path path = temp_dir() / "roundtrip.iaat";
  save_tensor(path, t);
  const Tensor back = load_tensor(path);
  CHECK(back.bit_equal(t));

  // header checks
  std::ifstream is(path, std::ios::binary);
  char magic[5];
  is.read(magic, 5);
  CHECK(std::string(magic, 5) == "IAAT1");

  // corrupt magic
  {
    std::ofstream os(path, std::ios::binary);
    os << "JUNK!";
  }
  CHECK_THROWS_AS(load_tensor(path), FormatError);
}

TEST_CASE("ppm export") {
  const fs::path path = temp_dir() / "black.ppm";
  save_ppm(path, Tensor({3, 4, 6}));
  std::ifstream is(path, std::ios::binary);
  std::string header;
  std::getline(is, header);
  CHECK(header == "P6");
  std::string dims;
  std::getline(is, dims);
  CHECK(dims == "6 4");
  std::string maxval;
  std::getline(is, maxval);
  CHECK(maxval == "255");
  std::vector<char> rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  CHECK(rest.size() == 6 * 4 * 3);
  for (char c : rest) CHECK(c == 0);
}

TEST_CASE("ppm quantization") {
  // 0.5 scales to exactly 127.5, the only tie representable in double;
  // ties-to-even sends it to 128
  Tensor t({1, 1, 3});
  t[0] = 0.5;
  t[1] = 0.75;  // 191.25 -> 191
  t[2] = 1.0;   // clamps at 255
  const fs::path path = temp_dir() / "round.ppm";
  save_ppm(path, t);
  std::ifstream is(path, std::ios::binary);
  std::string line;
  std::getline(is, line);
  std::getline(is, line);
  std::getline(is, line);
  unsigned char px[9];
  is.read(reinterpret_cast<char*>(px), 9);
  CHECK(static_cast<int>(px[0]) == 128);
  CHECK(static_cast<int>(px[3]) == 191);
  CHECK(static_cast<int>(px[6]) == 255);
}

TEST_CASE("csv writer and reader") {
  CsvWriter w({"a", "b"});
  w.row_values({1.0, 2.5});
  w.row({"x", "0.125"});
  CHECK_THROWS_AS(w.row({"only-one"}), ContractError);
  const fs::path path = temp_dir() / "table.csv";
  w.save(path);
  const CsvTable t = read_csv(path);
  CHECK(t.header.size() == 2);
  CHECK(t.rows.size() == 2);
  CHECK(t.number(0, 1) == 2.5);
  CHECK(t.column("b") == 1);
  CHECK_THROWS_AS(t.column("missing"), FormatError);
}

TEST_CASE("svg chart references csv-backed data") {
  const fs::path dir = temp_dir();
  const fs::path svg = dir / "chart.svg";
  save_svg_chart(svg, "demo", "x", "y", {{"series-one", {0, 1, 2}, {3.0, 2.0, 2.5}}});
  std::ifstream is(svg);
  std::stringstream buf;
  buf << is.rdbuf();
  const std::string content = buf.str();
  CHECK(content.find("<svg") != std::string::npos);
  CHECK(content.find("series-one") != std::string::npos);
  CHECK(content.find("<script") == std::string::npos);
  CHECK(content.find("polyline") != std::string::npos);
}

TEST_CASE("generated clips stay within bounds and are deterministic") {
  const auto clips = generate_clips(3, 3, 32, 32, 0.5, 9, 2024);
  CHECK(clips.size() == 3);
  for (const auto& clip : clips) {
    CHECK(clip.frames.size() == 9);
    for (const auto& f : clip.frames) {
      for (double v : f.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  const auto again = generate_clips(3, 3, 32, 32, 0.5, 9, 2024);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    for (std::size_t t = 0; t < clips[i].frames.size(); ++t) {
      CHECK(clips[i].frames[t].bit_equal(again[i].frames[t]));
    }
  }
}
