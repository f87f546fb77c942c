// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace xmodal::diff {

using Shape = std::vector<std::size_t>;

/// Thrown when operand shapes are incompatible with a primitive.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a value becomes NaN or infinite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t num_elements(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major double tensor. A rank-0 tensor (empty shape) is a scalar.
/// Every value is finite; construction rejects NaN and infinities.
class Tensor {
 public:
  Tensor() : values_(1, 0.0) {}
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(std::size_t row, std::size_t col) const;

  /// Value of a single-element tensor.
  double item() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  friend class Graph;
  struct Unchecked {};
  Tensor(Shape shape, std::vector<double> values, Unchecked)
      : shape_(std::move(shape)), values_(std::move(values)) {}

  Shape shape_;
  std::vector<double> values_;
};

}  // namespace xmodal::diff
