#include "iaa/datagen.hpp"

#include <algorithm>
#include <cmath>

namespace iaa {

namespace {

struct Box {
  double left, right, top, bottom;
};

Box primitive_box(const Primitive& p, double t) {
  const double cx = p.cx + p.vx * t;
  const double cy = p.cy + p.vy * t;
  return {cx - p.width / 2.0, cx + p.width / 2.0, cy - p.height / 2.0, cy + p.height / 2.0};
}

// Overlap of [lo, lo+1) with [a, b], clamped to [0,1].
inline double span_overlap(double lo, double a, double b) {
  return std::clamp(std::min(lo + 1.0, b) - std::max(lo, a), 0.0, 1.0);
}

}  // namespace

void SceneSpec::validate(std::size_t clip_length) const {
  if (channels == 0 || height == 0 || width == 0) {
    throw SpecError("scene: canvas extents must be positive");
  }
  if (background < 0.0 || background > 1.0) throw SpecError("scene: background outside [0,1]");
  if (noise_amplitude < 0.0 || noise_amplitude > 0.5) {
    throw SpecError("scene: noise amplitude outside [0, 0.5]");
  }
  const double horizon = clip_length > 0 ? static_cast<double>(clip_length - 1) : 0.0;
  for (const Primitive& p : primitives) {
    if (p.intensity.size() != channels) {
      throw SpecError("scene: primitive intensity must have one value per channel");
    }
    for (double v : p.intensity) {
      if (v < 0.0 || v > 1.0) throw SpecError("scene: intensity outside [0,1]");
    }
    if (p.width <= 0.0 || (p.kind != PrimitiveKind::Disk && p.height <= 0.0)) {
      throw SpecError("scene: primitive size must be positive");
    }
    for (double t : {0.0, horizon}) {
      const Box b = p.kind == PrimitiveKind::Disk
                        ? Box{p.cx + p.vx * t - p.width / 2.0, p.cx + p.vx * t + p.width / 2.0,
                              p.cy + p.vy * t - p.width / 2.0, p.cy + p.vy * t + p.width / 2.0}
                        : primitive_box(p, t);
      if (b.left < 0.0 || b.top < 0.0 || b.right > static_cast<double>(width) ||
          b.bottom > static_cast<double>(height)) {
        throw SpecError("scene: primitive leaves the canvas during the clip");
      }
    }
  }
}

Tensor render_frame(const SceneSpec& spec, double t, Rng* noise_rng) {
  const std::size_t C = spec.channels, H = spec.height, W = spec.width;
  Tensor frame({C, H, W});
  auto fd = frame.data();
  for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = spec.background;

  for (const Primitive& p : spec.primitives) {
    const double cx = p.cx + p.vx * t;
    const double cy = p.cy + p.vy * t;
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        double coverage = 0.0;
        double fill = 1.0;
        switch (p.kind) {
          case PrimitiveKind::Disk: {
            const double px = static_cast<double>(x) + 0.5;
            const double py = static_cast<double>(y) + 0.5;
            const double dist = std::hypot(px - cx, py - cy) - p.width / 2.0;
            coverage = std::clamp(0.5 - dist, 0.0, 1.0);  // 1px linear edge ramp
            break;
          }
          case PrimitiveKind::Rectangle: {
            const Box b = primitive_box(p, t);
            coverage = span_overlap(static_cast<double>(x), b.left, b.right) *
                       span_overlap(static_cast<double>(y), b.top, b.bottom);
            break;
          }
          case PrimitiveKind::LinearGradient: {
            const Box b = primitive_box(p, t);
            coverage = span_overlap(static_cast<double>(x), b.left, b.right) *
                       span_overlap(static_cast<double>(y), b.top, b.bottom);
            const double px = static_cast<double>(x) + 0.5;
            fill = std::clamp((px - b.left) / (b.right - b.left), 0.0, 1.0);
            break;
          }
        }
        if (coverage <= 0.0) continue;
        for (std::size_t c = 0; c < C; ++c) {
          double& v = fd[(c * H + y) * W + x];
          v = v * (1.0 - coverage) + p.intensity[c] * fill * coverage;
        }
      }
    }
  }

  if (noise_rng != nullptr && spec.noise_amplitude > 0.0) {
    for (std::size_t i = 0; i < fd.size(); ++i) {
      fd[i] += noise_rng->uniform(-spec.noise_amplitude, spec.noise_amplitude);
    }
  }
  for (std::size_t i = 0; i < fd.size(); ++i) fd[i] = std::clamp(fd[i], 0.0, 1.0);
  return frame;
}

VideoClip generate_clip(const SceneSpec& spec, std::size_t length, std::uint64_t seed) {
  if (length < 3 || length % 2 == 0) {
    throw SpecError("generate_clip: length must be odd and >= 3");
  }
  spec.validate(length);
  VideoClip clip;
  clip.seed = seed;
  for (const Primitive& p : spec.primitives) {
    clip.motion_magnitude = std::max(clip.motion_magnitude, std::hypot(p.vx, p.vy));
  }
  Rng noise(mix_seed(seed, 0x6e6f6973));
  clip.frames.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    clip.frames.push_back(render_frame(spec, static_cast<double>(t), &noise));
  }
  return clip;
}

std::vector<FrameTriplet> extract_triplets(const VideoClip& clip) {
  const std::size_t n = clip.frames.size();
  if (n < 3 || n % 2 == 0) {
    throw SpecError("extract_triplets: clip length must be odd and >= 3");
  }
  for (const Tensor& f : clip.frames) {
    if (!f.same_shape(clip.frames.front())) {
      throw SpecError("extract_triplets: frames differ in shape");
    }
  }
  std::vector<FrameTriplet> triplets;
  triplets.reserve((n - 1) / 2);
  for (std::size_t k = 0; 2 * k + 2 < n; ++k) {
    triplets.push_back(FrameTriplet{clip.frames[2 * k], clip.frames[2 * k + 1],
                                    clip.frames[2 * k + 2], k});
  }
  return triplets;
}

SceneSpec random_scene(Rng& rng, std::size_t channels, std::size_t height, std::size_t width,
                       double max_speed, std::size_t length, std::size_t primitive_count) {
  SceneSpec spec;
  spec.channels = channels;
  spec.height = height;
  spec.width = width;
  spec.background = rng.uniform(0.1, 0.4);
  spec.noise_amplitude = 0.0;
  const double Hf = static_cast<double>(height);
  const double Wf = static_cast<double>(width);
  const double horizon = length > 1 ? static_cast<double>(length - 1) : 1.0;
  for (std::size_t i = 0; i < primitive_count; ++i) {
    Primitive p;
    const int kind = rng.uniform_int(0, 2);
    p.kind = kind == 0 ? PrimitiveKind::Disk
                       : (kind == 1 ? PrimitiveKind::Rectangle : PrimitiveKind::LinearGradient);
    p.width = rng.uniform(0.15, 0.35) * std::min(Hf, Wf);
    p.height = p.kind == PrimitiveKind::Disk ? p.width : rng.uniform(0.15, 0.35) * Hf;
    p.intensity.resize(channels);
    for (double& v : p.intensity) v = rng.uniform(0.3, 1.0);
    const double half_w = p.width / 2.0;
    const double half_h = (p.kind == PrimitiveKind::Disk ? p.width : p.height) / 2.0;
    // cap the speed so the whole trajectory fits with 1px of slack
    const double allowed = std::max(0.0, std::min(Wf - 2.0 * half_w, Hf - 2.0 * half_h) - 2.0);
    double speed = max_speed > 0.0 ? rng.uniform(0.2, 1.0) * max_speed : 0.0;
    speed = std::min(speed, allowed / horizon);
    const double angle = rng.uniform(0.0, 6.283185307179586);
    p.vx = speed * std::cos(angle);
    p.vy = speed * std::sin(angle);
    const double tx = std::abs(p.vx) * horizon;
    const double ty = std::abs(p.vy) * horizon;
    const double lo_x = half_w + 1.0 + (p.vx < 0 ? tx : 0.0);
    const double hi_x = Wf - half_w - 1.0 - (p.vx > 0 ? tx : 0.0);
    const double lo_y = half_h + 1.0 + (p.vy < 0 ? ty : 0.0);
    const double hi_y = Hf - half_h - 1.0 - (p.vy > 0 ? ty : 0.0);
    p.cx = rng.uniform(lo_x, hi_x);
    p.cy = rng.uniform(lo_y, hi_y);
    spec.primitives.push_back(std::move(p));
  }
  return spec;
}

std::vector<VideoClip> generate_clips(std::size_t count, std::size_t channels,
                                      std::size_t height, std::size_t width, double max_speed,
                                      std::size_t length, std::uint64_t seed) {
  std::vector<VideoClip> clips;
  clips.reserve(count);
  Rng master(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Rng clip_rng = master.stream(i);
    SceneSpec spec = random_scene(clip_rng, channels, height, width, max_speed, length);
    clips.push_back(generate_clip(spec, length, mix_seed(seed, 1000 + i)));
  }
  return clips;
}

std::vector<RecognitionSample> generate_labeled_groups(std::size_t class_count,
                                                       std::size_t groups_per_class,
                                                       std::size_t frames_per_group,
                                                       std::uint64_t seed,
                                                       std::size_t groups_per_video) {
  if (class_count != kMotionClassCount) {
    throw SpecError("generate_labeled_groups: the motion-direction task has 4 classes");
  }
  if (frames_per_group < 2) throw SpecError("generate_labeled_groups: groups need >= 2 frames");
  if (groups_per_video == 0) throw SpecError("generate_labeled_groups: groups_per_video must be positive");

  const std::size_t C = 1, H = 32, W = 32;
  std::vector<RecognitionSample> samples;
  samples.reserve(class_count * groups_per_class);
  Rng master(seed);
  std::size_t video_id = 0;

  for (std::size_t label = 0; label < class_count; ++label) {
    std::size_t made = 0;
    while (made < groups_per_class) {
      const std::size_t take = std::min(groups_per_video, groups_per_class - made);
      const std::size_t video_frames = frames_per_group * take;
      Rng rng = master.stream(video_id);

      // one dominant moving disk; direction fixed by the label. Size,
      // speed and intensity are held constant so the pooled features vary
      // with direction, not with nuisance factors.
      static const double dir[kMotionClassCount][2] = {{0, -1}, {0, 1}, {-1, 0}, {1, 0}};
      Primitive disk;
      disk.kind = PrimitiveKind::Disk;
      disk.width = 10.0;
      disk.intensity = {0.9};
      const double speed = 0.75;
      disk.vx = dir[label][0] * speed;
      disk.vy = dir[label][1] * speed;
      const double travel = speed * static_cast<double>(video_frames - 1);
      const double r = disk.width / 2.0 + 1.0;
      const double lo_x = r + (disk.vx < 0 ? travel : 0.0);
      const double hi_x = W - r - (disk.vx > 0 ? travel : 0.0);
      const double lo_y = r + (disk.vy < 0 ? travel : 0.0);
      const double hi_y = H - r - (disk.vy > 0 ? travel : 0.0);
      disk.cx = rng.uniform(lo_x, hi_x);
      disk.cy = rng.uniform(lo_y, hi_y);

      // faint static rectangle as scenery
      Primitive rect;
      rect.kind = PrimitiveKind::Rectangle;
      rect.width = rng.uniform(6.0, 10.0);
      rect.height = rng.uniform(6.0, 10.0);
      rect.intensity = {rng.uniform(0.25, 0.4)};
      rect.cx = rng.uniform(rect.width / 2.0 + 0.5, W - rect.width / 2.0 - 0.5);
      rect.cy = rng.uniform(rect.height / 2.0 + 0.5, H - rect.height / 2.0 - 0.5);

      SceneSpec spec;
      spec.channels = C;
      spec.height = H;
      spec.width = W;
      spec.background = rng.uniform(0.05, 0.15);
      spec.primitives = {rect, disk};
      spec.validate(video_frames);

      std::vector<Tensor> frames;
      frames.reserve(video_frames);
      for (std::size_t t = 0; t < video_frames; ++t) {
        frames.push_back(render_frame(spec, static_cast<double>(t), nullptr));
      }
      for (std::size_t g = 0; g < take; ++g) {
        Tensor group({frames_per_group, C, H, W});
        auto gd = group.data();
        for (std::size_t f = 0; f < frames_per_group; ++f) {
          auto src = frames[g * frames_per_group + f].data();
          std::copy(src.begin(), src.end(), gd.begin() + f * C * H * W);
        }
        samples.push_back(RecognitionSample{std::move(group), label, video_id, g});
      }
      made += take;
      ++video_id;
    }
  }
  return samples;
}

}  // namespace iaa
