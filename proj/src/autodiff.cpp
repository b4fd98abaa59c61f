#include "iaa/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace iaa {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
  }
}

Shape trailing_shape(const Shape& s) { return Shape(s.begin() + 1, s.end()); }

}  // namespace

const Tensor& Var::value() const { return tape_->value(index_); }

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), true, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), false, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::emit(Tensor value, bool requires_grad, Backprop backprop) {
  value.check_finite("op output");
  nodes_.push_back(Node{std::move(value), requires_grad,
                        requires_grad ? std::move(backprop) : Backprop{}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad_buffer(int index) {
  if (grads_.size() != nodes_.size()) {
    grads_.resize(nodes_.size());
    has_grad_.assign(nodes_.size(), 0);
  }
  if (!has_grad_[index]) {
    grads_[index] = Tensor(nodes_[index].value.shape());
    has_grad_[index] = 1;
  }
  return grads_[index];
}

std::vector<Tensor> Tape::gradients(Var loss, const std::vector<Var>& wrt) {
  if (loss.tape() != this) throw ContractError("loss does not belong to this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_to_string(loss.value().shape()));
  }
  for (const Var& v : wrt) {
    if (v.tape() != this) throw ContractError("wrt leaf does not belong to this tape");
  }

  grads_.assign(nodes_.size(), Tensor());
  has_grad_.assign(nodes_.size(), 0);
  grad_buffer(loss.index())[0] = 1.0;

  for (int i = loss.index(); i >= 0; --i) {
    const Node& node = nodes_[i];
    if (!has_grad_[i] || !node.requires_grad || !node.backprop) continue;
    node.backprop(*this, grads_[i]);
  }

  std::vector<Tensor> result;
  result.reserve(wrt.size());
  for (const Var& v : wrt) {
    if (has_grad_[v.index()]) {
      result.push_back(grads_[v.index()]);
    } else {
      result.push_back(Tensor(v.value().shape()));
    }
    result.back().check_finite("gradient");
  }
  return result;
}

std::vector<Tensor> backward(const GradientRequest& request) {
  if (request.loss.tape() == nullptr) throw ContractError("backward: empty loss");
  return request.loss.tape()->gradients(request.loss, request.wrt);
}

// ---- elementwise ----

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor out(av.shape());
  auto ad = av.data(), bd = bv.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + bd[i];
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  const bool req = t.requires_grad(ia) || t.requires_grad(ib);
  return t.emit(std::move(out), req, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) {
      auto ga = t.grad_buffer(ia).data();
      auto gd = g.data();
      for (std::size_t i = 0; i < gd.size(); ++i) ga[i] += gd[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib).data();
      auto gd = g.data();
      for (std::size_t i = 0; i < gd.size(); ++i) gb[i] += gd[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "sub");
  Tensor out(av.shape());
  auto ad = av.data(), bd = bv.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] - bd[i];
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  const bool req = t.requires_grad(ia) || t.requires_grad(ib);
  return t.emit(std::move(out), req, [ia, ib](Tape& t, const Tensor& g) {
    auto gd = g.data();
    if (t.requires_grad(ia)) {
      auto ga = t.grad_buffer(ia).data();
      for (std::size_t i = 0; i < gd.size(); ++i) ga[i] += gd[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib).data();
      for (std::size_t i = 0; i < gd.size(); ++i) gb[i] -= gd[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor out(av.shape());
  auto ad = av.data(), bd = bv.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] * bd[i];
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  const bool req = t.requires_grad(ia) || t.requires_grad(ib);
  return t.emit(std::move(out), req, [ia, ib](Tape& t, const Tensor& g) {
    auto gd = g.data();
    if (t.requires_grad(ia)) {
      auto ga = t.grad_buffer(ia).data();
      auto bd = t.value(ib).data();
      for (std::size_t i = 0; i < gd.size(); ++i) ga[i] += gd[i] * bd[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib).data();
      auto ad = t.value(ia).data();
      for (std::size_t i = 0; i < gd.size(); ++i) gb[i] += gd[i] * ad[i];
    }
  });
}

Var scale(Var a, double s) {
  if (!std::isfinite(s)) throw NumericsError("scale: non-finite factor");
  const Tensor& av = a.value();
  Tensor out(av.shape());
  auto ad = av.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = s * ad[i];
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(std::move(out), t.requires_grad(ia), [ia, s](Tape& t, const Tensor& g) {
    auto ga = t.grad_buffer(ia).data();
    auto gd = g.data();
    for (std::size_t i = 0; i < gd.size(); ++i) ga[i] += s * gd[i];
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  const Tensor& av = a.value();
  Tensor out(av.shape());
  auto ad = av.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] > 0.0 ? ad[i] : 0.0;
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(std::move(out), t.requires_grad(ia), [ia](Tape& t, const Tensor& g) {
    auto ga = t.grad_buffer(ia).data();
    auto ad = t.value(ia).data();
    auto gd = g.data();
    for (std::size_t i = 0; i < gd.size(); ++i) {
      if (ad[i] > 0.0) ga[i] += gd[i];
    }
  });
}

// ---- reductions ----

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(Tensor({1}, {s}), t.requires_grad(ia), [ia](Tape& t, const Tensor& g) {
    auto ga = t.grad_buffer(ia).data();
    const double gv = g[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
  });
}

Var mean(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  const double n = static_cast<double>(av.size());
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(Tensor({1}, {s / n}), t.requires_grad(ia), [ia, n](Tape& t, const Tensor& g) {
    auto ga = t.grad_buffer(ia).data();
    const double gv = g[0] / n;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
  });
}

Var l2_norm(Var a) {
  const Tensor& av = a.value();
  double sq = 0.0;
  for (double v : av.data()) sq += v * v;
  if (!std::isfinite(sq)) throw NumericsError("l2_norm: sum of squares overflowed");
  const double norm = std::sqrt(sq);
  Tape& t = *a.tape();
  const int ia = a.index();
  return t.emit(Tensor({1}, {norm}), t.requires_grad(ia), [ia, norm](Tape& t, const Tensor& g) {
    // subgradient at the zero tensor is zero
    if (norm == 0.0) return;
    auto ga = t.grad_buffer(ia).data();
    auto ad = t.value(ia).data();
    const double gv = g[0] / norm;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv * ad[i];
  });
}

// ---- convolution ----

namespace {

struct ConvDims {
  std::size_t C, H, W, K, kh, kw, ph, pw, Ho, Wo;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, std::size_t ph, std::size_t pw) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be [C,H,W]");
  if (kernel.rank() != 4) throw ShapeError("conv2d: kernel must be [K,C,kh,kw]");
  ConvDims d;
  d.C = input.shape()[0];
  d.H = input.shape()[1];
  d.W = input.shape()[2];
  d.K = kernel.shape()[0];
  d.kh = kernel.shape()[2];
  d.kw = kernel.shape()[3];
  d.ph = ph;
  d.pw = pw;
  if (kernel.shape()[1] != d.C) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.shape()[1]) +
                     " input channels, input has " + std::to_string(d.C));
  }
  if (d.kh % 2 == 0 || d.kw % 2 == 0) throw ShapeError("conv2d: kernel extents must be odd");
  const std::ptrdiff_t Ho = static_cast<std::ptrdiff_t>(d.H + 2 * ph) - static_cast<std::ptrdiff_t>(d.kh) + 1;
  const std::ptrdiff_t Wo = static_cast<std::ptrdiff_t>(d.W + 2 * pw) - static_cast<std::ptrdiff_t>(d.kw) + 1;
  if (Ho < 1 || Wo < 1) throw ShapeError("conv2d: output would be empty");
  d.Ho = static_cast<std::size_t>(Ho);
  d.Wo = static_cast<std::size_t>(Wo);
  return d;
}

}  // namespace

Var conv2d(Var input, Var kernel, std::size_t pad_h, std::size_t pad_w) {
  require_same_tape(input, kernel, "conv2d");
  const Tensor& in = input.value();
  const Tensor& ker = kernel.value();
  const ConvDims d = conv_dims(in, ker, pad_h, pad_w);

  Tensor out({d.K, d.Ho, d.Wo});
  {
    const double* id = in.data().data();
    const double* kd = ker.data().data();
    double* od = out.data().data();
    for (std::size_t k = 0; k < d.K; ++k) {
      for (std::size_t c = 0; c < d.C; ++c) {
        for (std::size_t i = 0; i < d.kh; ++i) {
          for (std::size_t j = 0; j < d.kw; ++j) {
            const double w = kd[((k * d.C + c) * d.kh + i) * d.kw + j];
            if (w == 0.0) continue;
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(d.pw);
            const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -shift);
            const std::ptrdiff_t x_hi =
                std::min<std::ptrdiff_t>(d.Wo, static_cast<std::ptrdiff_t>(d.W) - shift);
            for (std::size_t yo = 0; yo < d.Ho; ++yo) {
              const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(yo + i) - static_cast<std::ptrdiff_t>(d.ph);
              if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(d.H)) continue;
              double* orow = od + (k * d.Ho + yo) * d.Wo;
              const double* irow = id + (c * d.H + static_cast<std::size_t>(yi)) * d.W;
              for (std::ptrdiff_t xo = x_lo; xo < x_hi; ++xo) orow[xo] += w * irow[xo + shift];
            }
          }
        }
      }
    }
  }

  Tape& t = *input.tape();
  const int ii = input.index(), ki = kernel.index();
  const bool req = t.requires_grad(ii) || t.requires_grad(ki);
  return t.emit(std::move(out), req, [ii, ki, d](Tape& t, const Tensor& g) {
    const double* gd = g.data().data();
    if (t.requires_grad(ii)) {
      double* gi = t.grad_buffer(ii).data().data();
      const double* kd = t.value(ki).data().data();
      for (std::size_t k = 0; k < d.K; ++k) {
        for (std::size_t c = 0; c < d.C; ++c) {
          for (std::size_t i = 0; i < d.kh; ++i) {
            for (std::size_t j = 0; j < d.kw; ++j) {
              const double w = kd[((k * d.C + c) * d.kh + i) * d.kw + j];
              if (w == 0.0) continue;
              const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(d.pw);
              const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -shift);
              const std::ptrdiff_t x_hi =
                  std::min<std::ptrdiff_t>(d.Wo, static_cast<std::ptrdiff_t>(d.W) - shift);
              for (std::size_t yo = 0; yo < d.Ho; ++yo) {
                const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(yo + i) - static_cast<std::ptrdiff_t>(d.ph);
                if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(d.H)) continue;
                const double* grow = gd + (k * d.Ho + yo) * d.Wo;
                double* irow = gi + (c * d.H + static_cast<std::size_t>(yi)) * d.W;
                for (std::ptrdiff_t xo = x_lo; xo < x_hi; ++xo) irow[xo + shift] += w * grow[xo];
              }
            }
          }
        }
      }
    }
    if (t.requires_grad(ki)) {
      double* gk = t.grad_buffer(ki).data().data();
      const double* id = t.value(ii).data().data();
      for (std::size_t k = 0; k < d.K; ++k) {
        for (std::size_t c = 0; c < d.C; ++c) {
          for (std::size_t i = 0; i < d.kh; ++i) {
            for (std::size_t j = 0; j < d.kw; ++j) {
              const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(d.pw);
              const std::ptrdiff_t x_lo = std::max<std::ptrdiff_t>(0, -shift);
              const std::ptrdiff_t x_hi =
                  std::min<std::ptrdiff_t>(d.Wo, static_cast<std::ptrdiff_t>(d.W) - shift);
              double acc = 0.0;
              for (std::size_t yo = 0; yo < d.Ho; ++yo) {
                const std::ptrdiff_t yi = static_cast<std::ptrdiff_t>(yo + i) - static_cast<std::ptrdiff_t>(d.ph);
                if (yi < 0 || yi >= static_cast<std::ptrdiff_t>(d.H)) continue;
                const double* grow = gd + (k * d.Ho + yo) * d.Wo;
                const double* irow = id + (c * d.H + static_cast<std::size_t>(yi)) * d.W;
                for (std::ptrdiff_t xo = x_lo; xo < x_hi; ++xo) acc += grow[xo] * irow[xo + shift];
              }
              gk[((k * d.C + c) * d.kh + i) * d.kw + j] += acc;
            }
          }
        }
      }
    }
  });
}

Var add_channel_bias(Var x, Var b) {
  require_same_tape(x, b, "add_channel_bias");
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  if (xv.rank() != 3 || bv.rank() != 1 || bv.shape()[0] != xv.shape()[0]) {
    throw ShapeError("add_channel_bias: expected [K,H,W] and [K]");
  }
  const std::size_t K = xv.shape()[0];
  const std::size_t hw = xv.shape()[1] * xv.shape()[2];
  Tensor out(xv.shape());
  auto xd = xv.data();
  auto od = out.data();
  for (std::size_t k = 0; k < K; ++k) {
    const double bias = bv[k];
    for (std::size_t i = 0; i < hw; ++i) od[k * hw + i] = xd[k * hw + i] + bias;
  }
  Tape& t = *x.tape();
  const int xi = x.index(), bi = b.index();
  const bool req = t.requires_grad(xi) || t.requires_grad(bi);
  return t.emit(std::move(out), req, [xi, bi, K, hw](Tape& t, const Tensor& g) {
    auto gd = g.data();
    if (t.requires_grad(xi)) {
      auto gx = t.grad_buffer(xi).data();
      for (std::size_t i = 0; i < gd.size(); ++i) gx[i] += gd[i];
    }
    if (t.requires_grad(bi)) {
      auto gb = t.grad_buffer(bi).data();
      for (std::size_t k = 0; k < K; ++k) {
        double acc = 0.0;
        for (std::size_t i = 0; i < hw; ++i) acc += gd[k * hw + i];
        gb[k] += acc;
      }
    }
  });
}

// ---- bilinear sampling ----

namespace {

struct SampleGeom {
  std::size_t C, H, W;
  std::ptrdiff_t y0, x0;  // integer part of the shift
  double fy, fx;          // fractional part in [0,1)
};

SampleGeom sample_geom(const Tensor& img, double dx, double dy) {
  if (img.rank() != 3) throw ShapeError("bilinear_sample: image must be [C,H,W]");
  SampleGeom s;
  s.C = img.shape()[0];
  s.H = img.shape()[1];
  s.W = img.shape()[2];
  const double limit = static_cast<double>(std::min(s.H, s.W));
  if (!(std::abs(dx) < limit) || !(std::abs(dy) < limit)) {
    throw ContractError("bilinear_sample: |shift| must stay below min(H,W)");
  }
  s.y0 = static_cast<std::ptrdiff_t>(std::floor(dy));
  s.x0 = static_cast<std::ptrdiff_t>(std::floor(dx));
  s.fy = dy - static_cast<double>(s.y0);
  s.fx = dx - static_cast<double>(s.x0);
  return s;
}

inline std::size_t clamp_index(std::ptrdiff_t v, std::size_t n) {
  if (v < 0) return 0;
  if (v >= static_cast<std::ptrdiff_t>(n)) return n - 1;
  return static_cast<std::size_t>(v);
}

}  // namespace

Var bilinear_sample(Var image, double dx, double dy) {
  const Tensor& img = image.value();
  const SampleGeom s = sample_geom(img, dx, dy);

  Tensor out(img.shape());
  auto id = img.data();
  auto od = out.data();
  const double w00 = (1.0 - s.fy) * (1.0 - s.fx);
  const double w01 = (1.0 - s.fy) * s.fx;
  const double w10 = s.fy * (1.0 - s.fx);
  const double w11 = s.fy * s.fx;
  for (std::size_t c = 0; c < s.C; ++c) {
    const double* plane = &id[c * s.H * s.W];
    double* oplane = &od[c * s.H * s.W];
    for (std::size_t y = 0; y < s.H; ++y) {
      const std::size_t ya = clamp_index(static_cast<std::ptrdiff_t>(y) + s.y0, s.H);
      const std::size_t yb = clamp_index(static_cast<std::ptrdiff_t>(y) + s.y0 + 1, s.H);
      for (std::size_t x = 0; x < s.W; ++x) {
        const std::size_t xa = clamp_index(static_cast<std::ptrdiff_t>(x) + s.x0, s.W);
        const std::size_t xb = clamp_index(static_cast<std::ptrdiff_t>(x) + s.x0 + 1, s.W);
        oplane[y * s.W + x] = w00 * plane[ya * s.W + xa] + w01 * plane[ya * s.W + xb] +
                              w10 * plane[yb * s.W + xa] + w11 * plane[yb * s.W + xb];
      }
    }
  }

  Tape& t = *image.tape();
  const int ii = image.index();
  return t.emit(std::move(out), t.requires_grad(ii), [ii, s, w00, w01, w10, w11](Tape& t, const Tensor& g) {
    auto gi = t.grad_buffer(ii).data();
    auto gd = g.data();
    for (std::size_t c = 0; c < s.C; ++c) {
      double* gplane = &gi[c * s.H * s.W];
      const double* gout = &gd[c * s.H * s.W];
      for (std::size_t y = 0; y < s.H; ++y) {
        const std::size_t ya = clamp_index(static_cast<std::ptrdiff_t>(y) + s.y0, s.H);
        const std::size_t yb = clamp_index(static_cast<std::ptrdiff_t>(y) + s.y0 + 1, s.H);
        for (std::size_t x = 0; x < s.W; ++x) {
          const std::size_t xa = clamp_index(static_cast<std::ptrdiff_t>(x) + s.x0, s.W);
          const std::size_t xb = clamp_index(static_cast<std::ptrdiff_t>(x) + s.x0 + 1, s.W);
          const double gv = gout[y * s.W + x];
          gplane[ya * s.W + xa] += w00 * gv;
          gplane[ya * s.W + xb] += w01 * gv;
          gplane[yb * s.W + xa] += w10 * gv;
          gplane[yb * s.W + xb] += w11 * gv;
        }
      }
    }
  });
}

// ---- structured axis-0 ops ----

Var select0(Var x, std::size_t i) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) throw ShapeError("select0: rank must be >= 2");
  const std::size_t D = xv.shape()[0];
  if (i >= D) throw ShapeError("select0: index out of range");
  const std::size_t stride = xv.size() / D;
  Tensor out(trailing_shape(xv.shape()));
  auto xd = xv.data();
  auto od = out.data();
  for (std::size_t k = 0; k < stride; ++k) od[k] = xd[i * stride + k];
  Tape& t = *x.tape();
  const int xi = x.index();
  return t.emit(std::move(out), t.requires_grad(xi), [xi, i, stride](Tape& t, const Tensor& g) {
    auto gx = t.grad_buffer(xi).data();
    auto gd = g.data();
    for (std::size_t k = 0; k < stride; ++k) gx[i * stride + k] += gd[k];
  });
}

Var concat0(Var a, Var b) {
  require_same_tape(a, b, "concat0");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != bv.rank() || av.rank() < 1 ||
      trailing_shape(av.shape()) != trailing_shape(bv.shape())) {
    throw ShapeError("concat0: trailing extents must match");
  }
  Shape out_shape = av.shape();
  out_shape[0] += bv.shape()[0];
  Tensor out(out_shape);
  auto od = out.data();
  auto ad = av.data(), bd = bv.data();
  std::copy(ad.begin(), ad.end(), od.begin());
  std::copy(bd.begin(), bd.end(), od.begin() + ad.size());
  Tape& t = *a.tape();
  const int ia = a.index(), ib = b.index();
  const std::size_t na = av.size();
  const bool req = t.requires_grad(ia) || t.requires_grad(ib);
  return t.emit(std::move(out), req, [ia, ib, na](Tape& t, const Tensor& g) {
    auto gd = g.data();
    if (t.requires_grad(ia)) {
      auto ga = t.grad_buffer(ia).data();
      for (std::size_t i = 0; i < na; ++i) ga[i] += gd[i];
    }
    if (t.requires_grad(ib)) {
      auto gb = t.grad_buffer(ib).data();
      for (std::size_t i = 0; i < gd.size() - na; ++i) gb[i] += gd[na + i];
    }
  });
}

Var mul_broadcast0(Var x, Var s) {
  require_same_tape(x, s, "mul_broadcast0");
  const Tensor& xv = x.value();
  const Tensor& sv = s.value();
  if (xv.rank() < 2 || trailing_shape(xv.shape()) != sv.shape()) {
    throw ShapeError("mul_broadcast0: scale must be shaped like one slice of x");
  }
  const std::size_t D = xv.shape()[0];
  const std::size_t stride = sv.size();
  Tensor out(xv.shape());
  auto xd = xv.data(), sd = sv.data();
  auto od = out.data();
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t k = 0; k < stride; ++k) od[d * stride + k] = xd[d * stride + k] * sd[k];
  }
  Tape& t = *x.tape();
  const int xi = x.index(), si = s.index();
  const bool req = t.requires_grad(xi) || t.requires_grad(si);
  return t.emit(std::move(out), req, [xi, si, D, stride](Tape& t, const Tensor& g) {
    auto gd = g.data();
    if (t.requires_grad(xi)) {
      auto gx = t.grad_buffer(xi).data();
      auto sd = t.value(si).data();
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t k = 0; k < stride; ++k) gx[d * stride + k] += gd[d * stride + k] * sd[k];
    }
    if (t.requires_grad(si)) {
      auto gs = t.grad_buffer(si).data();
      auto xd = t.value(xi).data();
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t k = 0; k < stride; ++k) gs[k] += gd[d * stride + k] * xd[d * stride + k];
    }
  });
}

Var mean_per_slice0(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 2) throw ShapeError("mean_per_slice0: rank must be >= 2");
  const std::size_t D = xv.shape()[0];
  const std::size_t stride = xv.size() / D;
  Tensor out({D});
  auto xd = xv.data();
  for (std::size_t d = 0; d < D; ++d) {
    double acc = 0.0;
    for (std::size_t k = 0; k < stride; ++k) acc += xd[d * stride + k];
    out[d] = acc / static_cast<double>(stride);
  }
  Tape& t = *x.tape();
  const int xi = x.index();
  return t.emit(std::move(out), t.requires_grad(xi), [xi, D, stride](Tape& t, const Tensor& g) {
    auto gx = t.grad_buffer(xi).data();
    for (std::size_t d = 0; d < D; ++d) {
      const double gv = g[d] / static_cast<double>(stride);
      for (std::size_t k = 0; k < stride; ++k) gx[d * stride + k] += gv;
    }
  });
}

Var softmax0(Var x) {
  const Tensor& xv = x.value();
  if (xv.rank() < 1) throw ShapeError("softmax0: rank must be >= 1");
  const std::size_t D = xv.shape()[0];
  const std::size_t stride = xv.size() / D;
  Tensor out(xv.shape());
  auto xd = xv.data();
  auto od = out.data();
  for (std::size_t k = 0; k < stride; ++k) {
    double mx = xd[k];
    for (std::size_t d = 1; d < D; ++d) mx = std::max(mx, xd[d * stride + k]);
    double denom = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      const double e = std::exp(xd[d * stride + k] - mx);
      od[d * stride + k] = e;
      denom += e;
    }
    for (std::size_t d = 0; d < D; ++d) od[d * stride + k] /= denom;
  }
  Tape& t = *x.tape();
  const int xi = x.index();
  const int oi = static_cast<int>(t.node_count());  // the node being emitted
  return t.emit(std::move(out), t.requires_grad(xi), [xi, oi, D, stride](Tape& t, const Tensor& g) {
    auto gx = t.grad_buffer(xi).data();
    auto sd = t.value(oi).data();
    auto gd = g.data();
    for (std::size_t k = 0; k < stride; ++k) {
      double dot = 0.0;
      for (std::size_t d = 0; d < D; ++d) dot += gd[d * stride + k] * sd[d * stride + k];
      for (std::size_t d = 0; d < D; ++d) {
        gx[d * stride + k] += sd[d * stride + k] * (gd[d * stride + k] - dot);
      }
    }
  });
}

Var matvec(Var w, Var x) {
  require_same_tape(w, x, "matvec");
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  if (wv.rank() != 2 || xv.rank() != 1 || wv.shape()[1] != xv.shape()[0]) {
    throw ShapeError("matvec: expected [M,K] and [K]");
  }
  const std::size_t M = wv.shape()[0], K = wv.shape()[1];
  Tensor out({M});
  auto wd = wv.data();
  auto xd = xv.data();
  for (std::size_t m = 0; m < M; ++m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < K; ++k) acc += wd[m * K + k] * xd[k];
    out[m] = acc;
  }
  Tape& t = *w.tape();
  const int wi = w.index(), xi = x.index();
  const bool req = t.requires_grad(wi) || t.requires_grad(xi);
  return t.emit(std::move(out), req, [wi, xi, M, K](Tape& t, const Tensor& g) {
    if (t.requires_grad(wi)) {
      auto gw = t.grad_buffer(wi).data();
      auto xd = t.value(xi).data();
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k) gw[m * K + k] += g[m] * xd[k];
    }
    if (t.requires_grad(xi)) {
      auto gx = t.grad_buffer(xi).data();
      auto wd = t.value(wi).data();
      for (std::size_t m = 0; m < M; ++m)
        for (std::size_t k = 0; k < K; ++k) gx[k] += g[m] * wd[m * K + k];
    }
  });
}

Var cross_entropy(Var scores, std::size_t label) {
  const Tensor& sv = scores.value();
  if (sv.rank() != 1) throw ShapeError("cross_entropy: scores must be rank-1");
  const std::size_t M = sv.shape()[0];
  if (label >= M) throw ContractError("cross_entropy: label out of range");
  double mx = sv[0];
  for (std::size_t m = 1; m < M; ++m) mx = std::max(mx, sv[m]);
  double denom = 0.0;
  for (std::size_t m = 0; m < M; ++m) denom += std::exp(sv[m] - mx);
  const double loss = mx + std::log(denom) - sv[label];
  Tape& t = *scores.tape();
  const int si = scores.index();
  return t.emit(Tensor({1}, {loss}), t.requires_grad(si),
                [si, label, M, mx, denom](Tape& t, const Tensor& g) {
    auto gs = t.grad_buffer(si).data();
    auto sd = t.value(si).data();
    const double gv = g[0];
    for (std::size_t m = 0; m < M; ++m) {
      const double p = std::exp(sd[m] - mx) / denom;
      gs[m] += gv * (p - (m == label ? 1.0 : 0.0));
    }
  });
}

}  // namespace iaa
