#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace typegan {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major float64 tensor. Image batches are NHWC: (B, H, W, C).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::int64_t numel() const noexcept { return static_cast<std::int64_t>(values_.size()); }
  bool empty() const noexcept { return values_.empty(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }

  /// NHWC element access; requires rank 4.
  double& at(std::int64_t b, std::int64_t y, std::int64_t x, std::int64_t c) {
    return values_[static_cast<std::size_t>(((b * shape_[1] + y) * shape_[2] + x) * shape_[3] + c)];
  }
  double at(std::int64_t b, std::int64_t y, std::int64_t x, std::int64_t c) const {
    return values_[static_cast<std::size_t>(((b * shape_[1] + y) * shape_[2] + x) * shape_[3] + c)];
  }

  /// Same data, new shape of equal element count.
  Tensor reshaped(Shape shape) const;

  /// Images [first, first+count) of a batch along axis 0.
  Tensor slice_batch(std::int64_t first, std::int64_t count) const;

  void fill(double value);
  bool all_finite() const;
  double min() const;
  double max() const;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Stack equally shaped tensors along a new leading axis.
Tensor stack(std::span<const Tensor> items);

/// Concatenate rank-4 batches along axis 0.
Tensor concat_batch(std::span<const Tensor> batches);

}  // namespace typegan
