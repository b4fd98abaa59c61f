#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iaa/errors.hpp"

namespace iaa {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Dense real tensor, row-major, 64-bit precision. Values are guaranteed
// finite: constructors and every operation that writes into a Tensor check
// for NaN/Inf and throw NumericsError instead of storing one.
class Tensor {
 public:
  Tensor() = default;

  // Zero-filled tensor of the given shape.
  explicit Tensor(Shape shape);

  // Takes ownership of `data`; validates size and finiteness.
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double value) { return full({1}, value); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // Row-major element access for rank-2/3/4 tensors.
  double at2(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at2(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at3(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  double& at3(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  // The single value of a one-element tensor.
  double item() const;

  // Throws NumericsError if any element is non-finite. Call after writing
  // through data() in bulk.
  void check_finite(const char* context) const;

  bool bit_equal(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// ---- value-level helpers used outside the differentiated graph ----

// Elementwise a + s * b (shapes must match).
Tensor axpy(const Tensor& a, double s, const Tensor& b);
// Elementwise clamp into [lo, hi].
Tensor clamp(const Tensor& t, double lo, double hi);
// Elementwise sign with sign(0) = 0.
Tensor sign(const Tensor& t);
// max_i |t_i|
double linf_norm(const Tensor& t);
double max_abs_diff(const Tensor& a, const Tensor& b);
double mean_value(const Tensor& t);

}  // namespace iaa
