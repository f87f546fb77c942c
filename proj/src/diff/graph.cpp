// Copyright 2026 The xmodal Authors.
// SPDX-License-Identifier: Apache-2.0

#include "xmodal/diff/graph.hpp"

#include <algorithm>
#include <cmath>

namespace xmodal::diff {
namespace {

struct Blocks {
  std::size_t outer = 1;
  std::size_t inner = 1;
};

Blocks blocks_around(const Shape& shape, std::size_t axis) {
  Blocks b;
  for (std::size_t i = 0; i < axis; ++i) b.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) b.inner *= shape[i];
  return b;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(),
                    big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

void check_finite(const std::vector<double>& values, Op op) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericalError("non-finite output from " +
                           std::string(op_name(op)));
    }
  }
}

// out[m x n] (+)= a[m x k] * b[k x n]
void gemm(const double* a, const double* b, double* out, std::size_t m,
          std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

// out[m x k] += g[m x n] * b^T
void gemm_bt(const double* g, const double* b, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* orow = out + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      orow[p] += acc;
    }
  }
}

// out[k x n] += a^T * g, a[m x k], g[m x n]
void gemm_at(const double* a, const double* g, double* out, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* orow = out + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * grow[j];
    }
  }
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kConcat: return "concat";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kReshape: return "reshape";
    case Op::kSlice: return "slice";
    case Op::kRelu: return "relu";
    case Op::kLeakyRelu: return "leaky_relu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSquare: return "square";
    case Op::kNegate: return "negate";
    case Op::kScale: return "scale";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(*this); }

const Tensor& Gradients::operator[](std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.grad;
  }
  throw std::out_of_range("no gradient for parameter " + std::string(name));
}

bool Gradients::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.name == name; });
}

void Gradients::accumulate(const Gradients& other, double weight) {
  for (const Entry& theirs : other.entries_) add(theirs.name, theirs.grad, weight);
}

void Gradients::add(const std::string& name, const Tensor& grad, double weight) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry& e) { return e.name == name; });
  if (it == entries_.end()) {
    std::vector<double> v(grad.values().begin(), grad.values().end());
    for (double& x : v) x *= weight;
    entries_.push_back({name, Tensor(grad.shape(), std::move(v))});
    return;
  }
  if (it->grad.shape() != grad.shape()) {
    throw ShapeError("gradient for " + name + " has shape " +
                     shape_to_string(grad.shape()) + ", expected " +
                     shape_to_string(it->grad.shape()));
  }
  std::vector<double> v(it->grad.values().begin(), it->grad.values().end());
  for (std::size_t j = 0; j < v.size(); ++j) v[j] += weight * grad[j];
  it->grad = Tensor(grad.shape(), std::move(v));
}

void Graph::check_owned(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) {
    throw std::invalid_argument("variable does not belong to this graph");
  }
}

Var Graph::push(Node node) {
  check_finite(node.value.values_, node.op);
  for (std::uint32_t in : node.inputs) {
    if (nodes_[in].needs_grad) node.needs_grad = true;
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Graph::parameter(std::string name, Tensor value) {
  Node n;
  n.op = Op::kParameter;
  n.value = std::move(value);
  n.needs_grad = true;
  Var v = push(std::move(n));
  parameter_ids_.push_back(v.id);
  parameter_names_.push_back(std::move(name));
  return v;
}

Var Graph::matmul(Var a, Var b) {
  check_owned(a);
  check_owned(b);
  const Shape& sa = value(a).shape();
  const Shape& sb = value(b).shape();
  const bool vec = sa.size() == 1;
  if ((sa.size() != 1 && sa.size() != 2) || sb.size() != 2 ||
      sa.back() != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(sa) +
                     " and " + shape_to_string(sb));
  }
  const std::size_t m = vec ? 1 : sa[0];
  const std::size_t k = sb[0];
  const std::size_t n = sb[1];
  std::vector<double> out(m * n, 0.0);
  gemm(value(a).values_.data(), value(b).values_.data(), out.data(), m, k, n);
  Node node;
  node.op = Op::kMatMul;
  node.inputs = {a.id, b.id};
  node.value = Tensor(vec ? Shape{n} : Shape{m, n}, std::move(out),
                      Tensor::Unchecked{});
  return push(std::move(node));
}

Var Graph::binary(Op op, Var a, Var b) {
  check_owned(a);
  check_owned(b);
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const bool a_big = ta.rank() >= tb.rank();
  const Tensor& big = a_big ? ta : tb;
  const Tensor& small = a_big ? tb : ta;
  if (!is_suffix(small.shape(), big.shape())) {
    throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " +
                     shape_to_string(ta.shape()) + " and " +
                     shape_to_string(tb.shape()));
  }
  const std::size_t n = big.size();
  const std::size_t ns = small.size();
  std::vector<double> out(n);
  const double* pb = big.values_.data();
  const double* ps = small.values_.data();
  if (op == Op::kAdd) {
    for (std::size_t i = 0; i < n; ++i) out[i] = pb[i] + ps[i % ns];
  } else if (op == Op::kMul) {
    for (std::size_t i = 0; i < n; ++i) out[i] = pb[i] * ps[i % ns];
  } else {
    throw std::invalid_argument("binary: unsupported op");
  }
  Node node;
  node.op = op;
  node.inputs = {a.id, b.id};
  node.value = Tensor(big.shape(), std::move(out), Tensor::Unchecked{});
  return push(std::move(node));
}

Var Graph::unary(Op op, Var a, double attr) {
  check_owned(a);
  const Tensor& ta = value(a);
  std::vector<double> out(ta.values_);
  switch (op) {
    case Op::kRelu:
      for (double& x : out) x = x > 0.0 ? x : 0.0;
      break;
    case Op::kLeakyRelu:
      for (double& x : out) x = x > 0.0 ? x : attr * x;
      break;
    case Op::kSigmoid:
      for (double& x : out) x = 1.0 / (1.0 + std::exp(-x));
      break;
    case Op::kTanh:
      for (double& x : out) x = std::tanh(x);
      break;
    case Op::kExp:
      for (double& x : out) x = std::exp(x);
      break;
    case Op::kLog:
      for (double& x : out) x = std::log(x);
      break;
    case Op::kSquare:
      for (double& x : out) x = x * x;
      break;
    case Op::kNegate:
      for (double& x : out) x = -x;
      break;
    case Op::kScale:
      for (double& x : out) x = attr * x;
      break;
    default:
      throw std::invalid_argument("unary: unsupported op");
  }
  Node node;
  node.op = op;
  node.inputs = {a.id};
  node.attr = attr;
  node.value = Tensor(ta.shape(), std::move(out), Tensor::Unchecked{});
  return push(std::move(node));
}

Var Graph::concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  for (Var p : parts) check_owned(p);
  const Shape& first = value(parts[0]).shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) +
                     " out of range for " + shape_to_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (Var p : parts) {
    const Shape& s = value(p).shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat: incompatible shapes " + shape_to_string(first) +
                       " and " + shape_to_string(s));
    }
    out_shape[axis] += s[axis];
  }
  const Blocks blk = blocks_around(out_shape, axis);
  std::vector<double> out;
  out.reserve(num_elements(out_shape));
  for (std::size_t o = 0; o < blk.outer; ++o) {
    for (Var p : parts) {
      const Tensor& t = value(p);
      const std::size_t chunk = t.shape()[axis] * blk.inner;
      const double* src = t.values_.data() + o * chunk;
      out.insert(out.end(), src, src + chunk);
    }
  }
  Node node;
  node.op = Op::kConcat;
  for (Var p : parts) node.inputs.push_back(p.id);
  node.axis = static_cast<int>(axis);
  node.value = Tensor(std::move(out_shape), std::move(out), Tensor::Unchecked{});
  return push(std::move(node));
}

Var Graph::reduce(Op op, Var a, int axis) {
  check_owned(a);
  const Tensor& ta = value(a);
  Node node;
  node.op = op;
  node.inputs = {a.id};
  node.axis = axis;
  if (axis < 0) {
    double acc = 0.0;
    for (double x : ta.values_) acc += x;
    if (op == Op::kMean) acc /= static_cast<double>(ta.size());
    node.value = Tensor({}, {acc}, Tensor::Unchecked{});
    return push(std::move(node));
  }
  const auto ax = static_cast<std::size_t>(axis);
  if (ax >= ta.rank()) {
    throw ShapeError(std::string(op_name(op)) + ": axis " +
                     std::to_string(axis) + " out of range for " +
                     shape_to_string(ta.shape()));
  }
  const Blocks blk = blocks_around(ta.shape(), ax);
  const std::size_t n = ta.shape()[ax];
  Shape out_shape = ta.shape();
  out_shape.erase(out_shape.begin() + axis);
  std::vector<double> out(blk.outer * blk.inner, 0.0);
  for (std::size_t o = 0; o < blk.outer; ++o) {
    for (std::size_t r = 0; r < n; ++r) {
      const double* src = ta.values_.data() + (o * n + r) * blk.inner;
      double* dst = out.data() + o * blk.inner;
      for (std::size_t i = 0; i < blk.inner; ++i) dst[i] += src[i];
    }
  }
  if (op == Op::kMean) {
    for (double& x : out) x /= static_cast<double>(n);
  }
  node.value = Tensor(std::move(out_shape), std::move(out), Tensor::Unchecked{});
  return push(std::move(node));
}

Var Graph::reshape(Var a, Shape shape) {
  check_owned(a);
  const Tensor& ta = value(a);
  if (num_elements(shape) != ta.size()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(ta.shape()) +
                     " as " + shape_to_string(shape));
  }
  Node node;
  node.op = Op::kReshape;
  node.inputs = {a.id};
  node.value = Tensor(std::move(shape), ta.values_);
  return push(std::move(node));
}

Var Graph::slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  check_owned(a);
  const Tensor& ta = value(a);
  if (axis >= ta.rank() || begin >= end || end > ta.shape()[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") on axis " + std::to_string(axis) +
                     " invalid for " + shape_to_string(ta.shape()));
  }
  const Blocks blk = blocks_around(ta.shape(), axis);
  const std::size_t n = ta.shape()[axis];
  Shape out_shape = ta.shape();
  out_shape[axis] = end - begin;
  std::vector<double> out;
  out.reserve(num_elements(out_shape));
  for (std::size_t o = 0; o < blk.outer; ++o) {
    const double* src = ta.values_.data() + (o * n + begin) * blk.inner;
    out.insert(out.end(), src, src + (end - begin) * blk.inner);
  }
  Node node;
  node.op = Op::kSlice;
  node.inputs = {a.id};
  node.axis = static_cast<int>(axis);
  node.begin = begin;
  node.end = end;
  node.value = Tensor(std::move(out_shape), std::move(out), Tensor::Unchecked{});
  return push(std::move(node));
}

Gradients Graph::backward(Var loss) const {
  if (loss.graph != this || loss.id >= nodes_.size()) {
    throw std::invalid_argument("backward: loss does not belong to this graph");
  }
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_to_string(value(loss).shape()));
  }
  std::vector<std::vector<double>> grads(loss.id + 1);
  grads[loss.id].assign(1, 1.0);

  auto grad_of = [&](std::uint32_t id) -> std::vector<double>* {
    if (!nodes_[id].needs_grad) return nullptr;
    auto& g = grads[id];
    if (g.empty()) g.assign(nodes_[id].value.size(), 0.0);
    return &g;
  };

  for (std::int64_t id = loss.id; id >= 0; --id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    const std::vector<double>& g = grads[static_cast<std::size_t>(id)];
    if (g.empty() || !node.needs_grad) continue;
    const std::vector<double>& y = node.value.values_;
    switch (node.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kMatMul: {
        const Tensor& a = nodes_[node.inputs[0]].value;
        const Tensor& b = nodes_[node.inputs[1]].value;
        const std::size_t m = a.rank() == 1 ? 1 : a.shape()[0];
        const std::size_t k = b.shape()[0];
        const std::size_t n = b.shape()[1];
        if (auto* ga = grad_of(node.inputs[0])) {
          gemm_bt(g.data(), b.values_.data(), ga->data(), m, k, n);
        }
        if (auto* gb = grad_of(node.inputs[1])) {
          gemm_at(a.values_.data(), g.data(), gb->data(), m, k, n);
        }
        break;
      }
      case Op::kAdd:
      case Op::kMul: {
        for (int side = 0; side < 2; ++side) {
          auto* gi = grad_of(node.inputs[side]);
          if (!gi) continue;
          const std::size_t ni = gi->size();
          if (node.op == Op::kAdd) {
            for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i % ni] += g[i];
          } else {
            const Tensor& other = nodes_[node.inputs[1 - side]].value;
            const std::size_t no = other.size();
            for (std::size_t i = 0; i < g.size(); ++i) {
              (*gi)[i % ni] += g[i] * other.values_[i % no];
            }
          }
        }
        break;
      }
      case Op::kConcat: {
        const auto axis = static_cast<std::size_t>(node.axis);
        const Blocks blk = blocks_around(node.value.shape(), axis);
        std::size_t offset = 0;
        const std::size_t row = node.value.shape()[axis] * blk.inner;
        for (std::uint32_t in : node.inputs) {
          const std::size_t chunk = nodes_[in].value.shape()[axis] * blk.inner;
          if (auto* gi = grad_of(in)) {
            for (std::size_t o = 0; o < blk.outer; ++o) {
              const double* src = g.data() + o * row + offset;
              double* dst = gi->data() + o * chunk;
              for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
            }
          }
          offset += chunk;
        }
        break;
      }
      case Op::kSum:
      case Op::kMean: {
        auto* gi = grad_of(node.inputs[0]);
        if (!gi) break;
        const Tensor& in = nodes_[node.inputs[0]].value;
        if (node.axis < 0) {
          double s = g[0];
          if (node.op == Op::kMean) s /= static_cast<double>(in.size());
          for (double& x : *gi) x += s;
          break;
        }
        const auto ax = static_cast<std::size_t>(node.axis);
        const Blocks blk = blocks_around(in.shape(), ax);
        const std::size_t n = in.shape()[ax];
        const double k = node.op == Op::kMean ? 1.0 / static_cast<double>(n) : 1.0;
        for (std::size_t o = 0; o < blk.outer; ++o) {
          for (std::size_t r = 0; r < n; ++r) {
            double* dst = gi->data() + (o * n + r) * blk.inner;
            const double* src = g.data() + o * blk.inner;
            for (std::size_t i = 0; i < blk.inner; ++i) dst[i] += k * src[i];
          }
        }
        break;
      }
      case Op::kReshape: {
        if (auto* gi = grad_of(node.inputs[0])) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
        }
        break;
      }
      case Op::kSlice: {
        auto* gi = grad_of(node.inputs[0]);
        if (!gi) break;
        const Tensor& in = nodes_[node.inputs[0]].value;
        const auto axis = static_cast<std::size_t>(node.axis);
        const Blocks blk = blocks_around(in.shape(), axis);
        const std::size_t n = in.shape()[axis];
        const std::size_t len = (node.end - node.begin) * blk.inner;
        for (std::size_t o = 0; o < blk.outer; ++o) {
          double* dst = gi->data() + (o * n + node.begin) * blk.inner;
          const double* src = g.data() + o * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
        }
        break;
      }
      default: {
        auto* gi = grad_of(node.inputs[0]);
        if (!gi) break;
        const std::vector<double>& x = nodes_[node.inputs[0]].value.values_;
        const std::size_t n = g.size();
        double* d = gi->data();
        switch (node.op) {
          case Op::kRelu:
            for (std::size_t i = 0; i < n; ++i) d[i] += x[i] > 0.0 ? g[i] : 0.0;
            break;
          case Op::kLeakyRelu:
            for (std::size_t i = 0; i < n; ++i) {
              d[i] += x[i] > 0.0 ? g[i] : node.attr * g[i];
            }
            break;
          case Op::kSigmoid:
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
          case Op::kTanh:
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
            break;
          case Op::kExp:
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * y[i];
            break;
          case Op::kLog:
            for (std::size_t i = 0; i < n; ++i) d[i] += g[i] / x[i];
            break;
          case Op::kSquare:
            for (std::size_t i = 0; i < n; ++i) d[i] += 2.0 * x[i] * g[i];
            break;
          case Op::kNegate:
            for (std::size_t i = 0; i < n; ++i) d[i] -= g[i];
            break;
          case Op::kScale:
            for (std::size_t i = 0; i < n; ++i) d[i] += node.attr * g[i];
            break;
          default:
            throw std::logic_error("backward: no VJP for " +
                                   std::string(op_name(node.op)));
        }
      }
    }
  }

  Gradients out;
  out.entries_.reserve(parameter_ids_.size());
  for (std::size_t p = 0; p < parameter_ids_.size(); ++p) {
    const std::uint32_t id = parameter_ids_[p];
    const Tensor& v = nodes_[id].value;
    std::vector<double> g = id <= loss.id && !grads[id].empty()
                                ? grads[id]
                                : std::vector<double>(v.size(), 0.0);
    out.entries_.push_back({parameter_names_[p], Tensor(v.shape(), std::move(g))});
  }
  return out;
}

Var matmul(Var a, Var b) { return a.graph->matmul(a, b); }
Var add(Var a, Var b) { return a.graph->binary(Op::kAdd, a, b); }
Var sub(Var a, Var b) { return add(a, negate(b)); }
Var mul(Var a, Var b) { return a.graph->binary(Op::kMul, a, b); }

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  return parts[0].graph->concat(parts, axis);
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var sum(Var a, int axis) { return a.graph->reduce(Op::kSum, a, axis); }
Var mean(Var a, int axis) { return a.graph->reduce(Op::kMean, a, axis); }
Var reshape(Var a, Shape shape) { return a.graph->reshape(a, std::move(shape)); }

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  return a.graph->slice(a, axis, begin, end);
}

Var row(Var a, std::size_t i) {
  Var r = slice(a, 0, i, i + 1);
  Shape s = a.shape();
  s.erase(s.begin());
  return reshape(r, std::move(s));
}

Var relu(Var a) { return a.graph->unary(Op::kRelu, a); }
Var leaky_relu(Var a, double slope) {
  return a.graph->unary(Op::kLeakyRelu, a, slope);
}
Var sigmoid(Var a) { return a.graph->unary(Op::kSigmoid, a); }
Var tanh(Var a) { return a.graph->unary(Op::kTanh, a); }
Var exp(Var a) { return a.graph->unary(Op::kExp, a); }
Var log(Var a) { return a.graph->unary(Op::kLog, a); }
Var square(Var a) { return a.graph->unary(Op::kSquare, a); }
Var negate(Var a) { return a.graph->unary(Op::kNegate, a); }
Var scale(Var a, double factor) { return a.graph->unary(Op::kScale, a, factor); }

}  // namespace xmodal::diff
