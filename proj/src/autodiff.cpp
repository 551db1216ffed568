// Copyright 2026 The lapforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lapforge/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

#include "lapforge/error.hpp"

namespace lapforge::ad {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                  static_cast<Eigen::Index>(t.cols()));
}
ConstMap as_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return ConstMap(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
Map as_matrix(std::vector<double>& v, std::size_t rows, std::size_t cols) {
  return Map(v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

Tape& tape_of(Var a) {
  require(a.tape != nullptr, "operation on an unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  require(a.tape != nullptr && a.tape == b.tape, "operands live on different tapes");
  return *a.tape;
}

// Applies f elementwise, recording df(x, y) for the backward pass.
template <typename F, typename DF>
Var unary(Var a, F f, DF df) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  const std::size_t ia = a.id;
  return tape.record(Tensor({x.rows(), x.cols()}, std::move(out)), {a},
                     [ia, df](Tape& t, std::size_t self) {
                       if (!t.needs_grad(Var{&t, ia})) return;
                       const Tensor& xv = t.value_of(ia);
                       const Tensor& yv = t.value_of(self);
                       const auto& g = t.grad_of(self);
                       auto& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(xv[i], yv[i]);
                     });
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected =
      std::accumulate(shape_.begin(), shape_.end(), std::size_t{1}, std::multiplies<>());
  require(expected == data_.size(), "tensor data length does not match shape");
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

const Tensor& Var::value() const {
  require(tape != nullptr, "value of an unbound Var");
  return tape->value(*this);
}

// ---- Tape ------------------------------------------------------------------

void Tape::check_owned(Var v) const {
  require(v.tape == this && v.id < nodes_.size(), "Var does not belong to this tape");
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, grad_enabled_});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor& t) {
  if (auto it = bound_.find(&t); it != bound_.end()) return Var{this, it->second};
  Tensor copy(t.shape(), std::vector<double>(t.data().begin(), t.data().end()));
  nodes_.push_back(Node{std::move(copy), {}, nullptr, &t, grad_enabled_ && t.requires_grad});
  bound_.emplace(&t, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id].value;
}

std::vector<double> Tape::grad(Var v) const {
  check_owned(v);
  const Node& node = nodes_[v.id];
  if (node.grad.empty()) return std::vector<double>(node.value.numel(), 0.0);
  return node.grad;
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.numel(), 0.0);
  return node.grad;
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (Var in : inputs) {
    check_owned(in);
    needs = needs || nodes_[in.id].needs_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(fn) : nullptr, nullptr, needs});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape == nullptr) throw UsageError("backward without a forward pass");
  check_owned(loss);
  if (backward_done_) throw UsageError("backward already ran on this tape");
  if (nodes_[loss.id].value.numel() != 1) throw UsageError("backward root must be a scalar");
  backward_done_ = true;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, id);
    if (node.external != nullptr) {
      auto& ext = node.external->grad();
      if (ext.size() != node.grad.size()) ext.assign(node.grad.size(), 0.0);
      for (std::size_t i = 0; i < ext.size(); ++i) ext[i] += node.grad[i];
    }
  }
}

// ---- Primitives ------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require(x.cols() == y.rows(), "matmul: inner dimensions differ " + shape_str(x) +
                                    " * " + shape_str(y));
  std::vector<double> out(x.rows() * y.cols());
  as_matrix(out, x.rows(), y.cols()).noalias() = as_matrix(x) * as_matrix(y);
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(Tensor({x.rows(), y.cols()}, std::move(out)), {a, b},
                     [ia, ib](Tape& t, std::size_t self) {
                       const Tensor& xv = t.value_of(ia);
                       const Tensor& yv = t.value_of(ib);
                       auto g = as_matrix(t.grad_of(self), xv.rows(), yv.cols());
                       if (t.needs_grad(Var{&t, ia})) {
                         as_matrix(t.grad_buffer(ia), xv.rows(), xv.cols()).noalias() +=
                             g * as_matrix(yv).transpose();
                       }
                       if (t.needs_grad(Var{&t, ib})) {
                         as_matrix(t.grad_buffer(ib), yv.rows(), yv.cols()).noalias() +=
                             as_matrix(xv).transpose() * g;
                       }
                     });
}

namespace {

template <typename F, typename DA, typename DB>
Var binary_elementwise(Var a, Var b, const char* name, F f, DA da, DB db) {
  Tape& tape = tape_of(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_same_shape(x, y, name);
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i], y[i]);
  const std::size_t ia = a.id, ib = b.id;
  return tape.record(Tensor({x.rows(), x.cols()}, std::move(out)), {a, b},
                     [ia, ib, da, db](Tape& t, std::size_t self) {
                       const Tensor& xv = t.value_of(ia);
                       const Tensor& yv = t.value_of(ib);
                       const auto& g = t.grad_of(self);
                       if (t.needs_grad(Var{&t, ia})) {
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(xv[i], yv[i]);
                       }
                       if (t.needs_grad(Var{&t, ib})) {
                         auto& gb = t.grad_buffer(ib);
                         for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(xv[i], yv[i]);
                       }
                     });
}

}  // namespace

Var add(Var a, Var b) {
  return binary_elementwise(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary_elementwise(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary_elementwise(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  for (double x : a.value().data()) {
    if (!(x > 0.0)) throw NumericError("log of non-positive value");
  }
  return unary(a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Var clamp_min(Var a, double floor) {
  return unary(a, [floor](double x) { return x > floor ? x : floor; },
               [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Var clamp_max(Var a, double ceiling) {
  return unary(a, [ceiling](double x) { return x < ceiling ? x : ceiling; },
               [ceiling](double x, double) { return x < ceiling ? 1.0 : 0.0; });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.data()) s += v;
  const std::size_t ia = a.id;
  return tape.record(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    for (double& v : t.grad_buffer(ia)) v += g;
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().numel();
  require(n > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var l2_norm(Var a) {
  Tape& tape = tape_of(a);
  double s = 0.0;
  for (double v : a.value().data()) s += v * v;
  const std::size_t ia = a.id;
  return tape.record(Tensor::scalar(std::sqrt(s)), {a}, [ia](Tape& t, std::size_t self) {
    const double norm = t.value_of(self)[0];
    if (norm == 0.0) return;  // subgradient 0 at the origin
    const double g = t.grad_of(self)[0] / norm;
    const Tensor& x = t.value_of(ia);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * x[i];
  });
}

namespace {

// Column-wise extremum over rows; better(a, b) is true when a should replace b.
template <typename Better>
Var extremum_rows(Var a, Better better) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require(x.rows() > 0, "reduction over zero rows");
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(c);
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) out[j] = x.at(0, j);
  for (std::size_t i = 1; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (better(x.at(i, j), out[j])) {
        out[j] = x.at(i, j);
        arg[j] = i;
      }
    }
  }
  const std::size_t ia = a.id;
  return tape.record(Tensor({1, c}, std::move(out)), {a},
                     [ia, arg = std::move(arg), c](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       auto& ga = t.grad_buffer(ia);
                       for (std::size_t j = 0; j < c; ++j) ga[arg[j] * c + j] += g[j];
                     });
}

}  // namespace

Var max_rows(Var a) {
  return extremum_rows(a, [](double x, double best) { return x > best; });
}

Var min_rows(Var a) {
  return extremum_rows(a, [](double x, double best) { return x < best; });
}

Var mean_rows(Var a) {
  const std::size_t r = a.value().rows();
  require(r > 0, "mean over zero rows");
  return scale(col_sum(a), 1.0 / static_cast<double>(r));
}

Var row_sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += x.at(i, j);
  }
  const std::size_t ia = a.id;
  return tape.record(Tensor({r, 1}, std::move(out)), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i];
    }
  });
}

Var col_sum(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j] += x.at(i, j);
  }
  const std::size_t ia = a.id;
  return tape.record(Tensor({1, c}, std::move(out)), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j];
    }
  });
}

Var row_l2_norm(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i] += x.at(i, j) * x.at(i, j);
    out[i] = std::sqrt(out[i]);
  }
  const std::size_t ia = a.id;
  return tape.record(Tensor({r, 1}, std::move(out)), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const Tensor& norms = t.value_of(self);
    const Tensor& xv = t.value_of(ia);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      if (norms[i] == 0.0) continue;
      const double k = g[i] / norms[i];
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += k * xv.at(i, j);
    }
  });
}

Var col_l2_norm(Var a) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j] += x.at(i, j) * x.at(i, j);
  }
  for (double& v : out) v = std::sqrt(v);
  const std::size_t ia = a.id;
  return tape.record(Tensor({1, c}, std::move(out)), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad_of(self);
    const Tensor& norms = t.value_of(self);
    const Tensor& xv = t.value_of(ia);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        if (norms[j] != 0.0) ga[i * c + j] += g[j] / norms[j] * xv.at(i, j);
      }
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::vector<Var>(parts));
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  Tape& tape = tape_of(parts.front());
  const std::size_t r = parts.front().value().rows();
  std::vector<std::size_t> ids, widths;
  std::size_t total = 0;
  for (Var p : parts) {
    tape_of(parts.front(), p);
    require(p.value().rows() == r, "concat_cols: row counts differ");
    ids.push_back(p.id);
    widths.push_back(p.value().cols());
    total += p.value().cols();
  }
  std::vector<double> out(r * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    const std::size_t w = widths[k];
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(x.data().data() + i * w, w, out.data() + i * total + offset);
    }
    offset += w;
  }
  return tape.record(Tensor({r, total}, std::move(out)), std::span<const Var>(parts),
                     [ids, widths, r, total](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         const std::size_t w = widths[k];
                         if (t.needs_grad(Var{&t, ids[k]})) {
                           auto& gk = t.grad_buffer(ids[k]);
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < w; ++j) {
                               gk[i * w + j] += g[i * total + off + j];
                             }
                           }
                         }
                         off += w;
                       }
                     });
}

Var mul_row_vector(Var a, Var row) {
  Tape& tape = tape_of(a, row);
  const Tensor& x = a.value();
  const Tensor& v = row.value();
  require(v.rows() == 1 && v.cols() == x.cols(),
          "mul_row_vector: expected 1x" + std::to_string(x.cols()) + ", got " + shape_str(v));
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i, j) * v[j];
  }
  const std::size_t ia = a.id, iv = row.id;
  return tape.record(Tensor({r, c}, std::move(out)), {a, row},
                     [ia, iv, r, c](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       const Tensor& xv = t.value_of(ia);
                       const Tensor& vv = t.value_of(iv);
                       if (t.needs_grad(Var{&t, ia})) {
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] * vv[j];
                         }
                       }
                       if (t.needs_grad(Var{&t, iv})) {
                         auto& gv = t.grad_buffer(iv);
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j] * xv.at(i, j);
                         }
                       }
                     });
}

Var mul_col_vector(Var a, Var col) {
  Tape& tape = tape_of(a, col);
  const Tensor& x = a.value();
  const Tensor& w = col.value();
  require(w.cols() == 1 && w.rows() == x.rows(),
          "mul_col_vector: expected " + std::to_string(x.rows()) + "x1, got " + shape_str(w));
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = x.at(i, j) * w[i];
  }
  const std::size_t ia = a.id, iw = col.id;
  return tape.record(Tensor({r, c}, std::move(out)), {a, col},
                     [ia, iw, r, c](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       const Tensor& xv = t.value_of(ia);
                       const Tensor& wv = t.value_of(iw);
                       if (t.needs_grad(Var{&t, ia})) {
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[i * c + j] * wv[i];
                         }
                       }
                       if (t.needs_grad(Var{&t, iw})) {
                         auto& gw = t.grad_buffer(iw);
                         for (std::size_t i = 0; i < r; ++i) {
                           double s = 0.0;
                           for (std::size_t j = 0; j < c; ++j) s += g[i * c + j] * xv.at(i, j);
                           gw[i] += s;
                         }
                       }
                     });
}

Var add_row_vector(Var a, Var row) {
  Tape& tape = tape_of(a, row);
  const Tensor& x = a.value();
  const Tensor& v = row.value();
  require(v.rows() == 1 && v.cols() == x.cols(),
          "add_row_vector: expected 1x" + std::to_string(x.cols()) + ", got " + shape_str(v));
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += v[j];
  }
  const std::size_t ia = a.id, iv = row.id;
  return tape.record(Tensor({r, c}, std::move(out)), {a, row},
                     [ia, iv, r, c](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       if (t.needs_grad(Var{&t, ia})) {
                         auto& ga = t.grad_buffer(ia);
                         for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                       }
                       if (t.needs_grad(Var{&t, iv})) {
                         auto& gv = t.grad_buffer(iv);
                         for (std::size_t i = 0; i < r; ++i) {
                           for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
                         }
                       }
                     });
}

Var gather_rows(Var a, std::span<const int> index) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  const std::size_t c = x.cols();
  std::vector<int> idx(index.begin(), index.end());
  std::vector<double> out(idx.size() * c);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && static_cast<std::size_t>(idx[k]) < x.rows(),
            "gather_rows: index out of range");
    std::copy_n(x.data().data() + static_cast<std::size_t>(idx[k]) * c, c, out.data() + k * c);
  }
  const std::size_t ia = a.id;
  const std::size_t rows_out = idx.size();
  return tape.record(Tensor({rows_out, c}, std::move(out)), {a},
                     [ia, idx = std::move(idx), c](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       auto& ga = t.grad_buffer(ia);
                       for (std::size_t k = 0; k < idx.size(); ++k) {
                         double* dst = ga.data() + static_cast<std::size_t>(idx[k]) * c;
                         const double* src = g.data() + k * c;
                         for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                       }
                     });
}

Var scatter_add_rows(Var a, std::span<const int> index, std::size_t out_rows) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require(index.size() == x.rows(), "scatter_add_rows: index length != rows");
  const std::size_t c = x.cols();
  std::vector<int> idx(index.begin(), index.end());
  std::vector<double> out(out_rows * c, 0.0);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    require(idx[k] >= 0 && static_cast<std::size_t>(idx[k]) < out_rows,
            "scatter_add_rows: index out of range");
    double* dst = out.data() + static_cast<std::size_t>(idx[k]) * c;
    const double* src = x.data().data() + k * c;
    for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
  }
  const std::size_t ia = a.id;
  return tape.record(Tensor({out_rows, c}, std::move(out)), {a},
                     [ia, idx = std::move(idx), c](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       auto& ga = t.grad_buffer(ia);
                       for (std::size_t k = 0; k < idx.size(); ++k) {
                         const double* src = g.data() + static_cast<std::size_t>(idx[k]) * c;
                         double* dst = ga.data() + k * c;
                         for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                       }
                     });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  require(rows * cols == x.numel(), "reshape: element count changes");
  const std::size_t ia = a.id;
  return tape.record(Tensor({rows, cols}, std::vector<double>(x.data().begin(), x.data().end())),
                     {a}, [ia](Tape& t, std::size_t self) {
                       const auto& g = t.grad_of(self);
                       auto& ga = t.grad_buffer(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                     });
}

// ---- Perceptron ------------------------------------------------------------

Perceptron::Perceptron(std::vector<std::size_t> dims, Activation hidden, Activation output,
                       Rng& rng) {
  require(dims.size() >= 2, "perceptron needs at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    require(in > 0 && out > 0, "perceptron dims must be positive");
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(in * out);
    for (double& v : w) v = rng.uniform(-bound, bound);
    DenseLayer layer{Tensor::matrix(in, out, std::move(w)), Tensor::zeros(1, out),
                     l + 2 == dims.size() ? output : hidden};
    layer.weight.requires_grad = true;
    layer.bias.requires_grad = true;
    layers_.push_back(std::move(layer));
  }
}

Perceptron::Perceptron(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "perceptron needs at least one layer");
  check_chain();
}

void Perceptron::check_chain() const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    require(layer.bias.rows() == 1 && layer.bias.cols() == layer.weight.cols(),
            "perceptron bias shape does not match weight");
    if (l > 0) {
      require(layers_[l - 1].weight.cols() == layer.weight.rows(),
              "perceptron layer dimensions do not chain");
    }
  }
}

std::size_t Perceptron::input_dim() const { return layers_.front().weight.rows(); }
std::size_t Perceptron::output_dim() const { return layers_.back().weight.cols(); }

Var Perceptron::forward(Var x) const {
  Tape& tape = tape_of(x);
  require(x.value().cols() == input_dim(),
          "perceptron input has " + std::to_string(x.value().cols()) + " features, expected " +
              std::to_string(input_dim()));
  Var h = x;
  for (DenseLayer& layer : layers_) {
    h = add_row_vector(matmul(h, tape.parameter(layer.weight)), tape.parameter(layer.bias));
    switch (layer.activation) {
      case Activation::kRelu: h = relu(h); break;
      case Activation::kSigmoid: h = sigmoid(h); break;
      case Activation::kIdentity: break;
    }
  }
  return h;
}

Var perceptron_forward(const Perceptron& p, Var x) { return p.forward(x); }

// ---- Rng -------------------------------------------------------------------

Rng::Rng(unsigned long long seed) {
  std::seed_seq seq{static_cast<unsigned>(seed & 0xffffffffULL), static_cast<unsigned>(seed >> 32)};
  engine_.seed(seq);
}

unsigned long long Rng::next_u64() { return engine_(); }

double Rng::uniform() {
  // 53 random bits, shifted by half an ulp so 0 is never produced.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::size_t Rng::below(std::size_t bound) {
  require(bound > 0, "Rng::below(0)");
  // Rejection sampling keeps the draw unbiased.
  const unsigned long long limit = ~0ULL - (~0ULL % bound);
  unsigned long long x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % bound);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw DataError("malformed RNG state");
}

unsigned long long derive_seed(unsigned long long base,
                               std::initializer_list<unsigned long long> stream) {
  // SplitMix64 finalizer folded over the stream coordinates.
  auto mix = [](unsigned long long z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  unsigned long long h = mix(base);
  for (unsigned long long s : stream) h = mix(h ^ mix(s));
  return h;
}

}  // namespace lapforge::ad
