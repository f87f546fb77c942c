// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmodal/diff/tensor.hpp"

namespace xmodal::diff {

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kMatMul,
  kAdd,
  kMul,
  kConcat,
  kSum,
  kMean,
  kReshape,
  kSlice,
  kRelu,
  kLeakyRelu,
  kSigmoid,
  kTanh,
  kExp,
  kLog,
  kSquare,
  kNegate,
  kScale,
};

std::string_view op_name(Op op);

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Gradients of a scalar loss with respect to every parameter node of a
/// graph, in registration order.
class Gradients {
 public:
  struct Entry {
    std::string name;
    Tensor grad;
  };

  const Tensor& operator[](std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  /// Adds weight * other by name; names missing here are appended.
  void accumulate(const Gradients& other, double weight = 1.0);
  void add(const std::string& name, const Tensor& grad, double weight = 1.0);

 private:
  friend class Graph;
  std::vector<Entry> entries_;
};

/// Define-by-run tape. Nodes are appended in evaluation order, which is a
/// topological order by construction. A graph belongs to one thread.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var scalar(double value) { return constant(Tensor::scalar(value)); }

  /// Leaf whose gradient is reported by backward() under `name`.
  Var parameter(std::string name, Tensor value);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  Op kind(Var v) const { return nodes_[v.id].op; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Parameters not reachable from the
  /// loss get zero gradients.
  Gradients backward(Var loss) const;

  // Primitive constructors; use the free functions below instead.
  Var matmul(Var a, Var b);
  Var binary(Op op, Var a, Var b);
  Var unary(Op op, Var a, double attr = 0.0);
  Var concat(std::span<const Var> parts, std::size_t axis);
  Var reduce(Op op, Var a, int axis);
  Var reshape(Var a, Shape shape);
  Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);

 private:
  struct Node {
    Op op;
    bool needs_grad = false;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    double attr = 0.0;
    int axis = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  Var push(Node node);
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> parameter_ids_;
  std::vector<std::string> parameter_names_;
};

Var matmul(Var a, Var b);
/// Elementwise sum. One operand may have a shape equal to a trailing suffix of
/// the other's; it is then repeated over the leading axes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product with the same broadcast rule as add.
Var mul(Var a, Var b);
Var concat(std::span<const Var> parts, std::size_t axis);
Var concat(std::initializer_list<Var> parts, std::size_t axis);
/// Sum of all elements (scalar result), or along `axis` when axis >= 0.
Var sum(Var a, int axis = -1);
Var mean(Var a, int axis = -1);
Var reshape(Var a, Shape shape);
Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end);
/// Row `i` of a matrix (or element `i` of a vector) as a rank-reduced view.
Var row(Var a, std::size_t i);
Var relu(Var a);
Var leaky_relu(Var a, double slope = 0.2);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var negate(Var a);
Var scale(Var a, double factor);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator-(Var a) { return negate(a); }
inline Var operator*(double k, Var a) { return scale(a, k); }

}  // namespace xmodal::diff
