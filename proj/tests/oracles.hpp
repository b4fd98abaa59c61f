// Test-only reference implementations, kept independent of the library's
// computation paths so they can serve as oracles.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "iaa/tensor.hpp"

namespace oracle {

// Central finite differences of a scalar function with respect to one
// tensor argument.
inline iaa::Tensor finite_difference(
    const std::function<double(const iaa::Tensor&)>& f, const iaa::Tensor& at,
    double step = 1e-5) {
  iaa::Tensor grad(at.shape());
  for (std::size_t i = 0; i < at.size(); ++i) {
    iaa::Tensor hi = at, lo = at;
    hi[i] += step;
    lo[i] -= step;
    grad[i] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return grad;
}

// Max relative error with a unit floor: |a-b| / max(1, |a|, |b|).
inline double max_rel_error(const iaa::Tensor& a, const iaa::Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Straightforward direct-window SSIM, structured differently from the
// library version (two passes, explicit mean/variance loops).
inline double reference_ssim_plane(const iaa::Tensor& a, const iaa::Tensor& b, std::size_t c,
                                   std::size_t H, std::size_t W) {
  const int win = 11;
  const double sigma = 1.5;
  std::vector<double> weights(win * win);
  double wsum = 0.0;
  for (int y = 0; y < win; ++y) {
    for (int x = 0; x < win; ++x) {
      const double dy = y - 5.0, dx = x - 5.0;
      weights[y * win + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      wsum += weights[y * win + x];
    }
  }
  for (auto& w : weights) w /= wsum;

  auto pixel = [&](const iaa::Tensor& t, std::size_t y, std::size_t x) {
    return t.data()[(c * H + y) * W + x];
  };

  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + win <= H; ++y0) {
    for (std::size_t x0 = 0; x0 + win <= W; ++x0) {
      double ma = 0.0, mb = 0.0;
      for (int y = 0; y < win; ++y) {
        for (int x = 0; x < win; ++x) {
          ma += weights[y * win + x] * pixel(a, y0 + y, x0 + x);
          mb += weights[y * win + x] * pixel(b, y0 + y, x0 + x);
        }
      }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (int y = 0; y < win; ++y) {
        for (int x = 0; x < win; ++x) {
          const double da = pixel(a, y0 + y, x0 + x) - ma;
          const double db = pixel(b, y0 + y, x0 + x) - mb;
          const double w = weights[y * win + x];
          va += w * da * da;
          vb += w * db * db;
          cov += w * da * db;
        }
      }
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
               ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

inline double reference_ssim(const iaa::Tensor& a, const iaa::Tensor& b) {
  std::size_t C = 1, H, W;
  if (a.rank() == 2) {
    H = a.shape()[0];
    W = a.shape()[1];
  } else {
    C = a.shape()[0];
    H = a.shape()[1];
    W = a.shape()[2];
  }
  double total = 0.0;
  for (std::size_t c = 0; c < C; ++c) total += reference_ssim_plane(a, b, c, H, W);
  return total / static_cast<double>(C);
}

}  // namespace oracle
