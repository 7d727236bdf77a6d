#include "typegan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "typegan/errors.hpp"

namespace typegan {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d < 0) throw Error(ErrorKind::ShapeMismatch, "negative dimension in " + shape_to_string(shape_));
  }
  values_.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(values_.size())) {
    throw Error(ErrorKind::ShapeMismatch, "shape " + shape_to_string(shape_) + " does not hold " +
                                              std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw Error(ErrorKind::ShapeMismatch,
                "cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

Tensor Tensor::slice_batch(std::int64_t first, std::int64_t count) const {
  if (shape_.empty() || first < 0 || count < 0 || first + count > shape_[0]) {
    throw Error(ErrorKind::ShapeMismatch, "batch slice out of range for " + shape_to_string(shape_));
  }
  Shape out_shape = shape_;
  out_shape[0] = count;
  const std::int64_t per = shape_[0] ? numel() / shape_[0] : 0;
  std::vector<double> out(values_.begin() + first * per, values_.begin() + (first + count) * per);
  return Tensor(std::move(out_shape), std::move(out));
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Tensor::min() const { return values_.empty() ? 0.0 : *std::min_element(values_.begin(), values_.end()); }
double Tensor::max() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

Tensor stack(std::span<const Tensor> items) {
  if (items.empty()) throw Error(ErrorKind::ShapeMismatch, "cannot stack zero tensors");
  Shape shape = items.front().shape();
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(items.front().numel()) * items.size());
  for (const auto& t : items) {
    if (t.shape() != shape) {
      throw Error(ErrorKind::ShapeMismatch, "stack of " + shape_to_string(shape) + " and " +
                                                shape_to_string(t.shape()));
    }
    values.insert(values.end(), t.values().begin(), t.values().end());
  }
  shape.insert(shape.begin(), static_cast<std::int64_t>(items.size()));
  return Tensor(std::move(shape), std::move(values));
}

Tensor concat_batch(std::span<const Tensor> batches) {
  if (batches.empty()) throw Error(ErrorKind::ShapeMismatch, "cannot concatenate zero batches");
  Shape shape = batches.front().shape();
  std::int64_t total = 0;
  std::vector<double> values;
  for (const auto& b : batches) {
    if (b.rank() != shape.size() || !std::equal(shape.begin() + 1, shape.end(), b.shape().begin() + 1)) {
      throw Error(ErrorKind::ShapeMismatch, "batch concat of " + shape_to_string(shape) + " and " +
                                                shape_to_string(b.shape()));
    }
    total += b.dim(0);
    values.insert(values.end(), b.values().begin(), b.values().end());
  }
  shape[0] = total;
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace typegan
