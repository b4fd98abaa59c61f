#pragma once

#include <chrono>
#include <functional>

#include "iaa/tensor.hpp"

namespace iaa {

// Peak signal-to-noise ratio in dB: 10*log10(peak^2 / MSE). Identical
// inputs (MSE == 0) return the cap so aggregates stay finite.
inline constexpr double kPsnrCap = 99.0;
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2,
// C2=(0.03)^2 at peak 1.0, averaged over valid window positions only.
// Inputs are [H,W] or [C,H,W]; channels are scored separately and averaged.
// Frames smaller than the window throw ShapeError.
double ssim(const Tensor& a, const Tensor& b);

// Monotonic-clock stopwatch with sub-millisecond resolution.
class Stopwatch {
 public:
  Stopwatch() : start_(clock::now()) {}
  void restart() { start_ = clock::now(); }
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

// Wall-clock seconds spent inside `scope`.
double time_scope(const std::function<void()>& scope);

}  // namespace iaa
