#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace sar {

// Dense row-major tensor of 64-bit floats. Most of the library works with
// rank-2 shapes; rank-1 and rank-3 appear at the I/O boundaries.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<long> shape)
      : shape_(std::move(shape)), data_(count(shape_), 0.0) {}

  Tensor(long rows, long cols) : Tensor(std::vector<long>{rows, cols}) {}

  static Tensor zeros(long rows, long cols) { return Tensor(rows, cols); }

  const std::vector<long>& shape() const { return shape_; }
  long rank() const { return static_cast<long>(shape_.size()); }
  long size() const { return static_cast<long>(data_.size()); }

  long rows() const {
    assert(rank() == 2);
    return shape_[0];
  }
  long cols() const {
    assert(rank() == 2);
    return shape_[1];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  double& operator()(long i, long j) { return data_[static_cast<size_t>(i * shape_[1] + j)]; }
  double operator()(long i, long j) const { return data_[static_cast<size_t>(i * shape_[1] + j)]; }

  double* row(long i) { return data_.data() + i * shape_[1]; }
  const double* row(long i) const { return data_.data() + i * shape_[1]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  // Reinterpret the flat buffer under a new shape with the same element count.
  Tensor reshaped(std::vector<long> shape) const {
    Tensor t;
    if (count(shape) != size()) throw std::invalid_argument("reshape: element count mismatch");
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
  }

 private:
  static long count(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) {
      if (d < 0) throw std::invalid_argument("tensor dimension must be nonnegative");
      n *= d;
    }
    return n;
  }

  std::vector<long> shape_;
  std::vector<double> data_;
};

}  // namespace sar
