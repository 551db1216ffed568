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

#ifndef LAPFORGE_AUTODIFF_HPP_
#define LAPFORGE_AUTODIFF_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lapforge::ad {

// Dense row-major tensor of doubles. Every primitive below works on rank-2
// tensors (vectors are 1 x k or k x 1, scalars are 1 x 1).
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::size_t rows, std::size_t cols);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor scalar(double v) { return matrix(1, 1, {v}); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }
  std::size_t numel() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  // Parameters set this; the tape then accumulates into grad() on backward.
  bool requires_grad = false;
  // Empty until a backward pass reaches this tensor.
  std::vector<double>& grad() { return grad_; }
  const std::vector<double>& grad() const { return grad_; }
  void zero_grad() { grad_.assign(data_.size(), 0.0); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
};

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Records primitive operations in execution order and replays their
// derivative rules in reverse. One backward pass per tape.
class Tape {
 public:
  Tape() = default;
  // With gradients disabled nothing is differentiable and no backward rules
  // are stored (inference mode).
  explicit Tape(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A value that never receives a gradient.
  Var constant(Tensor value);
  // A differentiable input owned by the tape; read its gradient via grad().
  Var variable(Tensor value);
  // Binds an external tensor. When it requires_grad, backward() adds into its
  // grad() buffer. Binding the same tensor twice returns the same Var.
  Var parameter(Tensor& t);

  const Tensor& value(Var v) const;
  // Gradient of the last backward root with respect to v (zeros if v did not
  // influence it).
  std::vector<double> grad(Var v) const;

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Used by primitive implementations.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
    return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                  std::move(fn));
  }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  std::vector<double>& grad_buffer(std::size_t id);
  const std::vector<double>& grad_of(std::size_t id) const { return nodes_[id].grad; }
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    BackwardFn backward;
    Tensor* external = nullptr;
    bool needs_grad = false;
  };

  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> bound_;
  bool backward_done_ = false;
  bool grad_enabled_ = true;
};

// ---- Primitives ------------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
// Natural log; throws NumericError on a non-positive argument.
Var log(Var a);
// max(a, floor) elementwise; gradient passes only where a > floor.
Var clamp_min(Var a, double floor);
// max(a, ceiling) counterpart.
Var clamp_max(Var a, double ceiling);

// Full reductions to 1 x 1.
Var sum(Var a);
Var mean(Var a);
Var l2_norm(Var a);

// Channel-wise reductions over rows: (r x c) -> (1 x c). Max and min route the
// gradient to the first extremal row.
Var max_rows(Var a);
Var min_rows(Var a);
Var mean_rows(Var a);

// Per-row and per-column sums and 2-norms: (r x c) -> (r x 1) / (1 x c).
Var row_sum(Var a);
Var col_sum(Var a);
Var row_l2_norm(Var a);
Var col_l2_norm(Var a);

// Channel-wise concatenation of equally tall tensors.
Var concat_cols(std::initializer_list<Var> parts);
Var concat_cols(const std::vector<Var>& parts);

// Broadcasting products and bias add.
Var mul_row_vector(Var a, Var row);  // (r x c) * (1 x c)
Var mul_col_vector(Var a, Var col);  // (r x c) * (r x 1)
Var add_row_vector(Var a, Var row);  // (r x c) + (1 x c)

// out[k] = a[index[k]] row-wise.
Var gather_rows(Var a, std::span<const int> index);
// out[index[k]] += a[k], out has out_rows rows.
Var scatter_add_rows(Var a, std::span<const int> index, std::size_t out_rows);

Var reshape(Var a, std::size_t rows, std::size_t cols);

// ---- Perceptron ------------------------------------------------------------

enum class Activation { kRelu, kSigmoid, kIdentity };

struct DenseLayer {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
  Activation activation = Activation::kIdentity;
};

class Rng;

// Stack of affine layers with per-layer activation.
class Perceptron {
 public:
  Perceptron() = default;
  // dims = {in, hidden..., out}. Hidden layers use `hidden`, the last layer
  // uses `output`. Weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out));
  // biases start at zero.
  Perceptron(std::vector<std::size_t> dims, Activation hidden, Activation output,
             Rng& rng);
  explicit Perceptron(std::vector<DenseLayer> layers);

  Var forward(Var x) const;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

 private:
  void check_chain() const;
  // Mutable so const forward() can bind parameters to a tape.
  mutable std::vector<DenseLayer> layers_;
};

Var perceptron_forward(const Perceptron& p, Var x);

// std::mt19937_64 with a portable mapping to doubles (the standard
// distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(unsigned long long seed);
  unsigned long long next_u64();
  // Uniform in the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound).
  std::size_t below(std::size_t bound);

  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// Derives an independent seed for stream `stream` of a base seed.
unsigned long long derive_seed(unsigned long long base,
                               std::initializer_list<unsigned long long> stream);

}  // namespace lapforge::ad

#endif  // LAPFORGE_AUTODIFF_HPP_
