#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "iaa/rng.hpp"
#include "iaa/tensor.hpp"

namespace iaa {

enum class PrimitiveKind { Rectangle, Disk, LinearGradient };

// One moving scene element. Positions and sizes are in pixel units with
// sub-pixel precision; velocity is pixels per rendered frame.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::Disk;
  double cx = 0.0, cy = 0.0;      // center at frame 0
  double width = 0.0, height = 0.0;  // disk uses width as diameter
  std::vector<double> intensity;  // one value per channel, in [0,1]
  double vx = 0.0, vy = 0.0;
};

struct SceneSpec {
  std::size_t channels = 3;
  std::size_t height = 64;
  std::size_t width = 64;
  std::vector<Primitive> primitives;
  double background = 0.0;
  double noise_amplitude = 0.0;

  // Throws SpecError if a primitive would leave the canvas within
  // `clip_length` frames or any field is out of range.
  void validate(std::size_t clip_length) const;
};

// Frames rendered at double temporal rate; triplets are extracted by
// holding out the odd frames as ground truth.
struct VideoClip {
  std::vector<Tensor> frames;  // each [C,H,W], values in [0,1]
  std::string frame_rate_tag = "2x";
  std::uint64_t seed = 0;
  double motion_magnitude = 0.0;  // fastest primitive, px/frame
};

struct FrameTriplet {
  Tensor prev;
  Tensor gt;
  Tensor next;
  std::size_t index = 0;  // position within the clip
};

// A frame group for the recognition task plus its motion-direction label.
struct RecognitionSample {
  Tensor group;  // [N,C,H,W]
  std::size_t label = 0;
  std::size_t video_id = 0;
  std::size_t group_index = 0;  // position within its video
};

inline constexpr std::size_t kMotionClassCount = 4;
// Label order for the motion-direction task.
inline const char* const kMotionClassNames[kMotionClassCount] = {"up", "down", "left", "right"};

// Renders `length` frames (odd, >= 3) with area-coverage anti-aliased
// edges so sub-pixel motion changes pixel values smoothly.
VideoClip generate_clip(const SceneSpec& spec, std::size_t length, std::uint64_t seed);

// Renders a single frame of the scene at time t (in frames).
Tensor render_frame(const SceneSpec& spec, double t, Rng* noise_rng);

// (frame 2k, frame 2k+1, frame 2k+2) for k = 0..(len-3)/2.
std::vector<FrameTriplet> extract_triplets(const VideoClip& clip);

// Labeled motion clips for the classifier. Consecutive groups of one video
// share the scene; each video contributes `groups_per_video` groups.
std::vector<RecognitionSample> generate_labeled_groups(std::size_t class_count,
                                                       std::size_t groups_per_class,
                                                       std::size_t frames_per_group,
                                                       std::uint64_t seed,
                                                       std::size_t groups_per_video = 4);

// Random multi-primitive scene for attack experiments. Velocities are
// bounded by `max_speed` px/frame and capped so every trajectory fits the
// canvas for a clip of `length` frames.
SceneSpec random_scene(Rng& rng, std::size_t channels, std::size_t height, std::size_t width,
                       double max_speed, std::size_t length, std::size_t primitive_count = 3);

// Batch of experiment clips, one derived RNG stream per clip.
std::vector<VideoClip> generate_clips(std::size_t count, std::size_t channels,
                                      std::size_t height, std::size_t width, double max_speed,
                                      std::size_t length, std::uint64_t seed);

}  // namespace iaa
