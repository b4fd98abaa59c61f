#include "iaa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace iaa {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor extents must be positive");
  }
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw ShapeError("tensor extents must be positive");
  }
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_to_string(shape_));
  }
  check_finite("tensor construction");
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  if (!std::isfinite(value)) throw NumericsError("non-finite fill value");
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() requires a one-element tensor, got " +
                        shape_to_string(shape_));
  }
  return data_[0];
}

void Tensor::check_finite(const char* context) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw NumericsError(std::string("non-finite value in ") + context);
    }
  }
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_) return false;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    // bit comparison, not value comparison: distinguishes -0.0 from 0.0
    if (std::memcmp(&data_[i], &other.data_[i], sizeof(double)) != 0) return false;
  }
  return true;
}

Tensor axpy(const Tensor& a, double s, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("axpy shape mismatch: " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
  Tensor out(a.shape());
  auto ad = a.data(), bd = b.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = ad[i] + s * bd[i];
  out.check_finite("axpy");
  return out;
}

Tensor clamp(const Tensor& t, double lo, double hi) {
  Tensor out(t.shape());
  auto td = t.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = std::min(std::max(td[i], lo), hi);
  return out;
}

Tensor sign(const Tensor& t) {
  Tensor out(t.shape());
  auto td = t.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    od[i] = td[i] > 0.0 ? 1.0 : (td[i] < 0.0 ? -1.0 : 0.0);
  }
  return out;
}

double linf_norm(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff shape mismatch");
  }
  double m = 0.0;
  auto ad = a.data(), bd = b.data();
  for (std::size_t i = 0; i < ad.size(); ++i) m = std::max(m, std::abs(ad[i] - bd[i]));
  return m;
}

double mean_value(const Tensor& t) {
  double s = 0.0;
  for (double v : t.data()) s += v;
  return s / static_cast<double>(t.size());
}

}  // namespace iaa
