#include "iaa/metrics.hpp"

#include <array>
#include <cmath>

namespace iaa {

double psnr(const Tensor& a, const Tensor& b, double peak) {
  if (!a.same_shape(b)) {
    throw ShapeError("psnr: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  auto ad = a.data(), bd = b.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < ad.size(); ++i) {
    const double d = ad[i] - bd[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(ad.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Normalized 11x11 Gaussian weights, built once.
const std::array<double, kWindow * kWindow>& gaussian_window() {
  static const std::array<double, kWindow * kWindow> win = [] {
    std::array<double, kWindow * kWindow> w{};
    const double half = (kWindow - 1) / 2.0;
    double total = 0.0;
    for (std::size_t y = 0; y < kWindow; ++y) {
      for (std::size_t x = 0; x < kWindow; ++x) {
        const double dy = static_cast<double>(y) - half;
        const double dx = static_cast<double>(x) - half;
        const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
        w[y * kWindow + x] = v;
        total += v;
      }
    }
    for (double& v : w) v /= total;
    return w;
  }();
  return win;
}

double ssim_plane(const double* a, const double* b, std::size_t H, std::size_t W) {
  const auto& win = gaussian_window();
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + kWindow <= H; ++y0) {
    for (std::size_t x0 = 0; x0 + kWindow <= W; ++x0) {
      double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
      for (std::size_t wy = 0; wy < kWindow; ++wy) {
        const double* arow = a + (y0 + wy) * W + x0;
        const double* brow = b + (y0 + wy) * W + x0;
        const double* wrow = win.data() + wy * kWindow;
        for (std::size_t wx = 0; wx < kWindow; ++wx) {
          const double av = arow[wx], bv = brow[wx], wv = wrow[wx];
          mu_a += wv * av;
          mu_b += wv * bv;
          aa += wv * (av * av);
          bb += wv * (bv * bv);
          ab += wv * (av * bv);  // grouped so swapping a and b is bit-exact
        }
      }
      const double var_a = aa - mu_a * mu_a;
      const double var_b = bb - mu_b * mu_b;
      const double cov = ab - mu_a * mu_b;
      const double num = (2.0 * (mu_a * mu_b) + kC1) * (2.0 * cov + kC2);
      const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
      total += num / den;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("ssim: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  std::size_t C, H, W;
  if (a.rank() == 2) {
    C = 1;
    H = a.shape()[0];
    W = a.shape()[1];
  } else if (a.rank() == 3) {
    C = a.shape()[0];
    H = a.shape()[1];
    W = a.shape()[2];
  } else {
    throw ShapeError("ssim: expected [H,W] or [C,H,W]");
  }
  if (H < kWindow || W < kWindow) {
    throw ShapeError("ssim: frame smaller than the 11x11 window");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    total += ssim_plane(a.data().data() + c * H * W, b.data().data() + c * H * W, H, W);
  }
  return total / static_cast<double>(C);
}

double time_scope(const std::function<void()>& scope) {
  Stopwatch sw;
  scope();
  return sw.seconds();
}

}  // namespace iaa
