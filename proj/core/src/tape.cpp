// SPDX-License-Identifier: Apache-2.0
#include "mesrnn/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "mesrnn/error.hpp"

namespace mesrnn::ad {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;

ConstMatrixMap as_matrix(const Tensor& t) {
  return {t.raw(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

MatrixMap as_matrix(Tensor& t) {
  return {t.raw(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

ConstVectorMap as_vector(const Tensor& t) {
  return {t.raw(), static_cast<Eigen::Index>(t.size())};
}

VectorMap as_vector(Tensor& t) {
  return {t.raw(), static_cast<Eigen::Index>(t.size())};
}

thread_local int g_faulty_op = -1;

double fault_factor(Op op) {
  return g_faulty_op == static_cast<int>(op) ? 1.5 : 1.0;
}

Shape with_cols(const Shape& like, std::size_t cols) {
  Shape out = like;
  out.back() = cols;
  return out;
}

[[noreturn]] void mismatch(std::string_view what, const Tensor& a,
                           const Tensor& b) {
  throw DimensionError(std::string(what) + ": shape " +
                       shape_string(a.shape()) + " does not conform with " +
                       shape_string(b.shape()));
}

void require_same_shape(std::string_view what, const Tensor& a,
                        const Tensor& b) {
  if (a.shape() != b.shape()) mismatch(what, a, b);
}

double sigmoid(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Forward kernels shared by recording and replay.

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor* b) {
  if (w.rank() != 2 || x.cols() != w.cols()) {
    mismatch(b ? "linear" : "matmul", x, w);
  }
  if (b && (b->rank() != 1 || b->size() != w.rows())) {
    mismatch("linear bias", *b, w);
  }
  Tensor out(with_cols(x.shape(), w.rows()));
  auto y = as_matrix(out);
  y.noalias() = as_matrix(x) * as_matrix(w).transpose();
  if (b) y.rowwise() += as_vector(*b).transpose();
  return out;
}

Tensor concat_forward(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ContractError("concat needs at least one operand");
  const Tensor& first = *parts.front();
  std::size_t total = 0;
  for (const Tensor* p : parts) {
    if (p->rank() != first.rank() || p->rows() != first.rows()) {
      mismatch("concat", first, *p);
    }
    total += p->cols();
  }
  Tensor out(with_cols(first.shape(), total));
  const std::size_t rows = first.rows();
  std::size_t offset = 0;
  for (const Tensor* p : parts) {
    const std::size_t w = p->cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(p->raw() + r * w, w, out.raw() + r * total + offset);
    }
    offset += w;
  }
  return out;
}

Tensor slice_forward(const Tensor& x, std::size_t offset, std::size_t width) {
  if (width == 0 || offset + width > x.cols()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " +
                         std::to_string(offset + width) +
                         ") out of range for shape " + shape_string(x.shape()));
  }
  Tensor out(with_cols(x.shape(), width));
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::copy_n(x.raw() + r * cols + offset, width, out.raw() + r * width);
  }
  return out;
}

Tensor rows_forward(const Tensor& x, std::size_t offset, std::size_t count) {
  if (x.rank() != 2 || count == 0 || offset + count > x.rows()) {
    throw DimensionError("rows [" + std::to_string(offset) + ", " +
                         std::to_string(offset + count) +
                         ") out of range for shape " + shape_string(x.shape()));
  }
  const std::size_t cols = x.cols();
  Tensor out({count, cols});
  std::copy_n(x.raw() + offset * cols, count * cols, out.raw());
  return out;
}

Tensor stack_forward(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) {
    throw ContractError("stack_rows needs at least one operand");
  }
  const Tensor& first = *parts.front();
  std::size_t total = 0;
  for (const Tensor* p : parts) {
    if (p->rank() != 2 || p->cols() != first.cols()) {
      mismatch("stack_rows", first, *p);
    }
    total += p->rows();
  }
  Tensor out({total, first.cols()});
  double* dst = out.raw();
  for (const Tensor* p : parts) dst = std::copy_n(p->raw(), p->size(), dst);
  return out;
}

}  // namespace

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kLinear: return "linear";
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kHadamard: return "hadamard";
    case Op::kConcat: return "concat";
    case Op::kSumList: return "sum_list";
    case Op::kSlice: return "slice";
    case Op::kTanh: return "tanh";
    case Op::kSigmoid: return "sigmoid";
    case Op::kScale: return "scale";
    case Op::kMse: return "mse";
    case Op::kRows: return "rows";
    case Op::kStackRows: return "stack_rows";
  }
  return "unknown";
}

Var Tape::push(Node node) {
  node.reaches_parameter = node.op == Op::kParameter;
  for (auto in : node.inputs) {
    node.reaches_parameter = node.reaches_parameter || nodes_[in].reaches_parameter;
  }
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check(Var v) const {
  if (!v.valid() || v.index >= nodes_.size()) {
    throw ContractError("variable does not belong to this tape");
  }
}

const Tape::Node& Tape::node(Var v) const {
  check(v);
  return nodes_[v.index];
}

const Tensor& Tape::value(Var v) const {
  const Node& n = node(v);
  return n.external ? *n.external : n.value;
}

Op Tape::op(Var v) const { return node(v).op; }

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::parameter(std::string name, const Tensor& value) {
  Node n;
  n.op = Op::kParameter;
  n.external = &value;
  n.name = std::move(name);
  return push(std::move(n));
}

Var Tape::linear(Var input, Var weight, Var bias) {
  Node n;
  n.op = Op::kLinear;
  n.inputs = {input.index, weight.index, bias.index};
  n.value = linear_forward(value(input), value(weight), &value(bias));
  return push(std::move(n));
}

Var Tape::matmul(Var input, Var weight) {
  Node n;
  n.op = Op::kMatmul;
  n.inputs = {input.index, weight.index};
  n.value = linear_forward(value(input), value(weight), nullptr);
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape("add", x, y);
  Node n;
  n.op = Op::kAdd;
  n.inputs = {a.index, b.index};
  n.value = x;
  as_vector(n.value) += as_vector(y);
  return push(std::move(n));
}

Var Tape::hadamard(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  require_same_shape("hadamard", x, y);
  Node n;
  n.op = Op::kHadamard;
  n.inputs = {a.index, b.index};
  n.value = x;
  as_vector(n.value).array() *= as_vector(y).array();
  return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  Node n;
  n.op = Op::kConcat;
  std::vector<const Tensor*> values;
  for (Var p : parts) {
    values.push_back(&value(p));
    n.inputs.push_back(p.index);
  }
  n.value = concat_forward(values);
  return push(std::move(n));
}

Var Tape::sum_list(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("sum_list needs at least one operand");
  Node n;
  n.op = Op::kSumList;
  n.value = value(parts.front());
  n.inputs.push_back(parts.front().index);
  for (Var p : parts.subspan(1)) {
    require_same_shape("sum_list", n.value, value(p));
    as_vector(n.value) += as_vector(value(p));
    n.inputs.push_back(p.index);
  }
  return push(std::move(n));
}

Var Tape::slice(Var input, std::size_t offset, std::size_t width) {
  Node n;
  n.op = Op::kSlice;
  n.inputs = {input.index};
  n.offset = offset;
  n.width = width;
  n.value = slice_forward(value(input), offset, width);
  return push(std::move(n));
}

Var Tape::rows(Var input, std::size_t offset, std::size_t count) {
  Node n;
  n.op = Op::kRows;
  n.inputs = {input.index};
  n.offset = offset;
  n.width = count;
  n.value = rows_forward(value(input), offset, count);
  return push(std::move(n));
}

Var Tape::stack_rows(std::span<const Var> parts) {
  Node n;
  n.op = Op::kStackRows;
  std::vector<const Tensor*> values;
  for (Var p : parts) {
    values.push_back(&value(p));
    n.inputs.push_back(p.index);
  }
  n.value = stack_forward(values);
  return push(std::move(n));
}

Var Tape::tanh_map(Var input) {
  Node n;
  n.op = Op::kTanh;
  n.inputs = {input.index};
  n.value = value(input);
  for (double& v : n.value.data()) v = std::tanh(v);
  return push(std::move(n));
}

Var Tape::sigmoid_map(Var input) {
  Node n;
  n.op = Op::kSigmoid;
  n.inputs = {input.index};
  n.value = value(input);
  for (double& v : n.value.data()) v = sigmoid(v);
  return push(std::move(n));
}

Var Tape::scale(Var input, double factor) {
  Node n;
  n.op = Op::kScale;
  n.inputs = {input.index};
  n.factor = factor;
  n.value = value(input);
  as_vector(n.value) *= factor;
  return push(std::move(n));
}

Var Tape::mse(Var pred, Var target) {
  const Tensor& p = value(pred);
  const Tensor& t = value(target);
  require_same_shape("mse", p, t);
  Node n;
  n.op = Op::kMse;
  n.inputs = {pred.index, target.index};
  const double sum = (as_vector(p) - as_vector(t)).squaredNorm();
  n.value = Tensor::scalar(sum / static_cast<double>(p.size()));
  return push(std::move(n));
}

std::vector<Tensor> Tape::adjoints(Var output, const Tensor& seed) const {
  return sweep(output, seed, false);
}

std::vector<Tensor> Tape::sweep(Var output, const Tensor& seed, bool prune) const {
  check(output);
  require_same_shape("backward seed", seed, value(output));

  std::vector<Tensor> adj(output.index + 1);
  adj[output.index] = seed;

  // Allocates the adjoint slot of node `i` on first touch. Under pruning,
  // slots of nodes that cannot reach a parameter go to a scratch tensor.
  Tensor scratch;
  auto slot = [&](std::uint32_t i) -> Tensor& {
    if (prune && !nodes_[i].reaches_parameter) {
      scratch = Tensor::zeros(value(Var{i}).shape());
      return scratch;
    }
    if (adj[i].empty()) adj[i] = Tensor::zeros(value(Var{i}).shape());
    return adj[i];
  };
  auto wanted = [&](std::uint32_t i) {
    return !prune || nodes_[i].reaches_parameter;
  };

  // Weight-gradient terms g^T x deferred per parameter node. A parameter
  // precedes all of its uses, so every term is known once the sweep
  // reaches it.
  struct Term {
    const Tensor* g;
    const Tensor* x;
    double k;
  };
  std::vector<std::vector<Term>> deferred(prune ? adj.size() : 0);
  auto flush = [&](std::uint32_t i) {
    auto& terms = deferred[i];
    if (terms.empty()) return;
    auto dst = as_matrix(slot(i));
    if (terms.size() == 1) {
      dst.noalias() += terms[0].k * (as_matrix(*terms[0].g).transpose() *
                                     as_matrix(*terms[0].x));
    } else {
      std::size_t rows = 0;
      for (const Term& t : terms) rows += t.g->rows();
      RowMatrix gs(rows, dst.rows());
      RowMatrix xs(rows, dst.cols());
      std::size_t r = 0;
      for (const Term& t : terms) {
        const auto n = static_cast<Eigen::Index>(t.g->rows());
        gs.middleRows(r, n) = t.k * as_matrix(*t.g);
        xs.middleRows(r, n) = as_matrix(*t.x);
        r += t.g->rows();
      }
      dst.noalias() += gs.transpose() * xs;
    }
    terms.clear();
    terms.shrink_to_fit();
  };

  for (std::int64_t idx = output.index; idx >= 0; --idx) {
    const auto i = static_cast<std::uint32_t>(idx);
    if (prune && nodes_[i].op == Op::kParameter) flush(i);
    if (adj[i].empty()) continue;
    const Node& n = nodes_[i];
    const Tensor& g = adj[i];
    const double k = fault_factor(n.op);

    switch (n.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kLinear:
      case Op::kMatmul: {
        const Tensor& x = value(Var{n.inputs[0]});
        const Tensor& w = value(Var{n.inputs[1]});
        const auto gm = as_matrix(g);
        if (wanted(n.inputs[0])) {
          as_matrix(slot(n.inputs[0])).noalias() += k * (gm * as_matrix(w));
        }
        if (prune && nodes_[n.inputs[1]].op == Op::kParameter) {
          deferred[n.inputs[1]].push_back({&g, &x, k});
        } else if (wanted(n.inputs[1])) {
          as_matrix(slot(n.inputs[1])).noalias() +=
              k * (gm.transpose() * as_matrix(x));
        }
        if (n.op == Op::kLinear && wanted(n.inputs[2])) {
          as_vector(slot(n.inputs[2])) += k * gm.colwise().sum().transpose();
        }
        break;
      }
      case Op::kAdd:
      case Op::kSumList:
        for (auto in : n.inputs) as_vector(slot(in)) += k * as_vector(g);
        break;
      case Op::kHadamard: {
        const auto a = as_vector(value(Var{n.inputs[0]})).array();
        const auto b = as_vector(value(Var{n.inputs[1]})).array();
        const auto ga = as_vector(g).array();
        as_vector(slot(n.inputs[0])).array() += k * ga * b;
        as_vector(slot(n.inputs[1])).array() += k * ga * a;
        break;
      }
      case Op::kConcat: {
        const std::size_t rows = g.rows();
        const std::size_t total = g.cols();
        std::size_t offset = 0;
        for (auto in : n.inputs) {
          Tensor& dst = slot(in);
          const std::size_t w = dst.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
              dst.at(r, c) += k * g.raw()[r * total + offset + c];
            }
          }
          offset += w;
        }
        break;
      }
      case Op::kSlice: {
        Tensor& dst = slot(n.inputs[0]);
        const std::size_t cols = dst.cols();
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < n.width; ++c) {
            dst.raw()[r * cols + n.offset + c] += k * g.at(r, c);
          }
        }
        break;
      }
      case Op::kRows: {
        Tensor& dst = slot(n.inputs[0]);
        const std::size_t cols = dst.cols();
        for (std::size_t e = 0; e < g.size(); ++e) {
          dst.raw()[n.offset * cols + e] += k * g.raw()[e];
        }
        break;
      }
      case Op::kStackRows: {
        std::size_t offset = 0;
        for (auto in : n.inputs) {
          Tensor& dst = slot(in);
          for (std::size_t e = 0; e < dst.size(); ++e) {
            dst.raw()[e] += k * g.raw()[offset + e];
          }
          offset += dst.size();
        }
        break;
      }
      case Op::kTanh: {
        const auto y = as_vector(n.value).array();
        as_vector(slot(n.inputs[0])).array() +=
            k * as_vector(g).array() * (1.0 - y * y);
        break;
      }
      case Op::kSigmoid: {
        const auto y = as_vector(n.value).array();
        as_vector(slot(n.inputs[0])).array() +=
            k * as_vector(g).array() * y * (1.0 - y);
        break;
      }
      case Op::kScale:
        as_vector(slot(n.inputs[0])) += (k * n.factor) * as_vector(g);
        break;
      case Op::kMse: {
        const auto p = as_vector(value(Var{n.inputs[0]}));
        const auto t = as_vector(value(Var{n.inputs[1]}));
        const double coeff =
            k * 2.0 * g.item() / static_cast<double>(p.size());
        as_vector(slot(n.inputs[0])) += coeff * (p - t);
        as_vector(slot(n.inputs[1])) -= coeff * (p - t);
        break;
      }
    }
  }
  return adj;
}

GradientStore Tape::backward(Var loss) const {
  const Tensor& l = value(loss);
  if (l.size() != 1) {
    throw ContractError("backward needs a scalar loss, got shape " +
                        shape_string(l.shape()));
  }
  auto adj = sweep(loss, Tensor::filled(l.shape(), 1.0), true);

  GradientStore store;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op != Op::kParameter) continue;
    if (i < adj.size() && !adj[i].empty()) {
      store.accumulate(n.name, std::move(adj[i]));
    } else {
      store.accumulate(n.name, Tensor::zeros(n.external->shape()));
    }
  }
  return store;
}

std::vector<Tensor> Tape::replay() const {
  std::vector<Tensor> values(nodes_.size());
  auto in = [&](const Node& n, std::size_t k) -> const Tensor& {
    return values[n.inputs[k]];
  };
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    Tensor& out = values[i];
    switch (n.op) {
      case Op::kConstant:
        out = n.value;
        break;
      case Op::kParameter:
        out = *n.external;
        break;
      case Op::kLinear:
        out = linear_forward(in(n, 0), in(n, 1), &in(n, 2));
        break;
      case Op::kMatmul:
        out = linear_forward(in(n, 0), in(n, 1), nullptr);
        break;
      case Op::kAdd:
      case Op::kSumList:
        out = in(n, 0);
        for (std::size_t k = 1; k < n.inputs.size(); ++k) {
          as_vector(out) += as_vector(in(n, k));
        }
        break;
      case Op::kHadamard:
        out = in(n, 0);
        as_vector(out).array() *= as_vector(in(n, 1)).array();
        break;
      case Op::kConcat: {
        std::vector<const Tensor*> parts;
        for (auto idx : n.inputs) parts.push_back(&values[idx]);
        out = concat_forward(parts);
        break;
      }
      case Op::kSlice:
        out = slice_forward(in(n, 0), n.offset, n.width);
        break;
      case Op::kRows:
        out = rows_forward(in(n, 0), n.offset, n.width);
        break;
      case Op::kStackRows: {
        std::vector<const Tensor*> parts;
        for (auto idx : n.inputs) parts.push_back(&values[idx]);
        out = stack_forward(parts);
        break;
      }
      case Op::kTanh:
        out = in(n, 0);
        for (double& v : out.data()) v = std::tanh(v);
        break;
      case Op::kSigmoid:
        out = in(n, 0);
        for (double& v : out.data()) v = sigmoid(v);
        break;
      case Op::kScale:
        out = in(n, 0);
        as_vector(out) *= n.factor;
        break;
      case Op::kMse: {
        const double sum =
            (as_vector(in(n, 0)) - as_vector(in(n, 1))).squaredNorm();
        out = Tensor::scalar(sum / static_cast<double>(in(n, 0).size()));
        break;
      }
    }
  }
  return values;
}

ScopedAdjointFault::ScopedAdjointFault(Op op) : previous_(g_faulty_op) {
  g_faulty_op = static_cast<int>(op);
}

ScopedAdjointFault::~ScopedAdjointFault() { g_faulty_op = previous_; }

}  // namespace mesrnn::ad
