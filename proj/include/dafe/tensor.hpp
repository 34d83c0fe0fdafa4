#pragma once

#include <cstddef>
#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "dafe/errors.hpp"

namespace dafe {

// Dense row-major tensor of 64-bit floats. Rank 1 and 2 are what the
// library actually uses; shape is kept general.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), values_(numel_of(shape_), 0.0) {}

  Tensor(std::vector<std::size_t> shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != numel_of(shape_)) {
      throw ShapeError("tensor value count " + std::to_string(values_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }
  static Tensor zeros(std::size_t n) { return Tensor({n}); }

  static Tensor row_major(std::size_t rows, std::size_t cols,
                          std::initializer_list<double> v) {
    return Tensor({rows, cols}, std::vector<double>(v));
  }
  static Tensor vector_of(std::initializer_list<double> v) {
    std::vector<double> vv(v);
    const std::size_t n = vv.size();  // read before the move: arg order is unspecified
    return Tensor({n}, std::move(vv));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t numel() const { return values_.size(); }

  // 2-D accessors; rank-1 tensors behave as a single row.
  std::size_t rows() const { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const {
    return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0);
  }

  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return values_[r * cols() + c];
  }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  void fill(double v) {
    for (double& x : values_) x = v;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double x : values_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  std::string shape_string() const { return shape_string(shape_); }

  static std::string shape_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) os << "x";
      os << shape[i];
    }
    os << "]";
    return os.str();
  }

 private:
  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

// Row-major boolean matrix used for attention masks.
struct BoolMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> v;

  BoolMat() = default;
  BoolMat(std::size_t r, std::size_t c, bool init = false)
      : rows(r), cols(c), v(r * c, init ? 1 : 0) {}

  std::uint8_t& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  bool at(std::size_t r, std::size_t c) const { return v[r * cols + c] != 0; }

  static BoolMat all_true(std::size_t r, std::size_t c) {
    return BoolMat(r, c, true);
  }
};

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

}  // namespace dafe
