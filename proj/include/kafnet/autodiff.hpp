#pragma once

// Reverse-mode differentiation over rank-2 tensors.
//
// A Tape records every primitive application as an append-only node list.
// Parents always precede children, so backward is a single reverse sweep.
// Tapes are single-threaded; distinct tapes may be used concurrently.

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kafnet/tensor.hpp"

namespace kafnet::ad {

class Tape;

// Lightweight handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// What a primitive's backward closure sees. input_grads[i] is null when
// input i does not require a gradient.
struct BackwardContext {
  const Tensor& grad;
  const Tensor& value;
  std::span<const Tensor* const> inputs;
  std::span<Tensor* const> input_grads;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Named leaf that receives a gradient. Names must be unique per tape.
  Var parameter(const std::string& name, Tensor value);

  // Appends a node. Throws NumericError when value has NaN/Inf.
  Var record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Runs the reverse sweep from a scalar loss. Returns one gradient per
  // registered parameter; parameters the loss does not reach get zeros.
  std::map<std::string, Tensor> backward(Var loss);

  const std::vector<std::pair<std::string, std::size_t>>& parameters() const { return params_; }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, std::size_t>> params_;
};

// ---- primitives -----------------------------------------------------------
// Binary elementwise ops require equal shapes; use broadcast() first.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// a / b elementwise. Where b == 0 the result and both gradients are 0.
Var div_or_zero(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var relu(Var a);
Var sigmoid(Var a);
Var sin(Var a);
Var cos(Var a);
Var exp(Var a);
Var square(Var a);
Var abs(Var a);
Var sum(Var a);
Var mean(Var a);
// Sums over axis 0 (result 1 x cols) or axis 1 (result rows x 1).
Var sum_axis(Var a, int axis);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(Var a, int axis, std::size_t begin, std::size_t end);
// Row-wise normalization to zero mean, unit variance; eps inside the sqrt.
Var layernorm(Var a, double eps = 1e-5);
// Expands a 1 x c, r x 1 or 1 x 1 tensor to rows x cols.
Var broadcast(Var a, std::size_t rows, std::size_t cols);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var gather_rows(Var a, std::vector<std::size_t> indices);
Var softmax_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

// ---- finite-difference verification ----------------------------------------

using ParamMap = std::map<std::string, Tensor>;

// Builds a fresh tape from the given parameters and returns the scalar loss.
using TapeProgram = std::function<Var(Tape&, const ParamMap&)>;

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool pass = false;
};

// Relative error between a tape gradient and a central difference, with
// the denominator floored so that two near-zero values compare as equal.
double gradient_relative_error(double analytic, double numeric, double floor = 1e-4);

// Compares tape gradients against (f(p+h) - f(p-h)) / 2h for every entry
// of every parameter. max_entries_per_param = 0 checks all entries.
GradCheckReport grad_check(const TapeProgram& program, const ParamMap& params, double h, double tol,
                           std::size_t max_entries_per_param = 0);

// Same comparison against caller-supplied gradients (used to validate the
// checker itself with deliberately wrong gradients).
GradCheckReport grad_check_against(const TapeProgram& program, const ParamMap& params,
                                   const std::map<std::string, Tensor>& claimed, double h, double tol,
                                   std::size_t max_entries_per_param = 0);

// Evaluates the program once and returns {loss, gradients}.
std::pair<double, std::map<std::string, Tensor>> value_and_grad(const TapeProgram& program, const ParamMap& params);

}  // namespace kafnet::ad
