// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/diff/tensor.hpp"

#include <cmath>
#include <sstream>

namespace xmodal::diff {

std::size_t num_elements(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

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

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  for (std::size_t d : shape_) {
    if (d == 0) {
      throw ShapeError("tensor extents must be positive, got " +
                       shape_to_string(shape_));
    }
  }
  if (values_.size() != num_elements(shape_)) {
    throw ShapeError("tensor of shape " + shape_to_string(shape_) + " needs " +
                     std::to_string(num_elements(shape_)) + " values, got " +
                     std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw NumericalError("non-finite tensor value");
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  std::size_t n = num_elements(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(row, col) needs a matrix");
  return values_.at(row * shape_[1] + col);
}

double Tensor::item() const {
  if (values_.size() != 1) {
    throw ShapeError("item() on tensor of shape " + shape_to_string(shape_));
  }
  return values_[0];
}

}  // namespace xmodal::diff
