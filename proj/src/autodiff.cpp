#include "kafnet/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "kafnet/error.hpp"

namespace kafnet::ad {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant: non-finite value");
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::parameter(const std::string& name, Tensor value) {
  for (const auto& [existing, id] : params_) {
    if (existing == name) throw ValidationError("tape: duplicate parameter '" + name + "'");
  }
  if (!value.all_finite()) throw NumericError("parameter '" + name + "': non-finite value");
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  params_.emplace_back(name, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError(std::string(op) + ": non-finite output");
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape != this) throw ValidationError(std::string(op) + ": input recorded on a different tape");
    node.inputs.push_back(v.id);
    node.requires_grad = node.requires_grad || nodes_[v.id].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

std::map<std::string, Tensor> Tape::backward(Var loss) {
  if (loss.tape != this) throw ValidationError("backward: loss recorded on a different tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ValidationError("backward: loss must be scalar, got shape " + shape_string(nodes_[loss.id].value.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id] = Tensor(nodes_[loss.id].value.shape(), 1.0);

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || !node.backward || grads[id].size() == 0) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t input : node.inputs) {
      in_values.push_back(&nodes_[input].value);
      if (nodes_[input].requires_grad) {
        if (grads[input].size() == 0 && nodes_[input].value.size() != 0) {
          grads[input] = Tensor(nodes_[input].value.shape(), 0.0);
        }
        in_grads.push_back(&grads[input]);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    node.backward(BackwardContext{grads[id], node.value, in_values, in_grads});
  }

  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : params_) {
    if (grads[id].size() == nodes_[id].value.size() && grads[id].shape() == nodes_[id].value.shape()) {
      out.emplace(name, std::move(grads[id]));
    } else {
      out.emplace(name, Tensor(nodes_[id].value.shape(), 0.0));
    }
  }
  return out;
}

namespace {

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                          shape_string(b.shape()));
  }
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw ValidationError(std::string(op) + ": expected rank-2 tensor, got " + shape_string(a.shape()));
}

template <class F, class DF>
Var unary(const char* op, Var a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  return a.tape->record(op, std::move(y), {a}, [df](const BackwardContext& ctx) {
    if (!ctx.input_grads[0]) return;
    Tensor& gx = *ctx.input_grads[0];
    const Tensor& x = *ctx.inputs[0];
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += ctx.grad[i] * df(x[i], ctx.value[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2("matmul", av);
  require_rank2("matmul", bv);
  if (av.cols() != bv.rows()) {
    throw ValidationError("matmul: shape mismatch " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  return a.tape->record("matmul", kafnet::matmul(av, bv), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& A = *ctx.inputs[0];
    const Tensor& B = *ctx.inputs[1];
    const Tensor& G = ctx.grad;
    const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
    const double* pa = A.data().data();
    const double* pb = B.data().data();
    const double* pg = G.data().data();
    if (Tensor* gA = ctx.input_grads[0]) {
      double* out = gA->data().data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double* grow = pg + i * m;
          const double* brow = pb + p * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
          out[i * k + p] += acc;
        }
    }
    if (Tensor* gB = ctx.input_grads[1]) {
      double* out = gB->data().data();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa[i * k + p];
          if (av == 0.0) continue;
          const double* grow = pg + i * m;
          double* orow = out + p * m;
          for (std::size_t j = 0; j < m; ++j) orow[j] += av * grow[j];
        }
    }
  });
}

Var transpose(Var a) {
  require_rank2("transpose", a.value());
  return a.tape->record("transpose", kafnet::transpose(a.value()), {a}, [](const BackwardContext& ctx) {
    if (Tensor* g = ctx.input_grads[0]) *g += kafnet::transpose(ctx.grad);
  });
}

Var add(Var a, Var b) {
  require_same("add", a.value(), b.value());
  Tensor y = a.value();
  y += b.value();
  return a.tape->record("add", std::move(y), {a, b}, [](const BackwardContext& ctx) {
    if (ctx.input_grads[0]) *ctx.input_grads[0] += ctx.grad;
    if (ctx.input_grads[1]) *ctx.input_grads[1] += ctx.grad;
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
  return a.tape->record("sub", std::move(y), {a, b}, [](const BackwardContext& ctx) {
    if (ctx.input_grads[0]) *ctx.input_grads[0] += ctx.grad;
    if (Tensor* g = ctx.input_grads[1])
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= ctx.grad[i];
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  return a.tape->record("mul", std::move(y), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& x = *ctx.inputs[0];
    const Tensor& z = *ctx.inputs[1];
    if (Tensor* g = ctx.input_grads[0])
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.grad[i] * z[i];
    if (Tensor* g = ctx.input_grads[1])
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.grad[i] * x[i];
  });
}

Var div(Var a, Var b) {
  require_same("div", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] / z[i];
  return a.tape->record("div", std::move(y), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& z = *ctx.inputs[1];
    if (Tensor* g = ctx.input_grads[0])
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.grad[i] / z[i];
    if (Tensor* g = ctx.input_grads[1])
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= ctx.grad[i] * ctx.value[i] / z[i];
  });
}

Var div_or_zero(Var a, Var b) {
  require_same("div_or_zero", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = z[i] == 0.0 ? 0.0 : x[i] / z[i];
  return a.tape->record("div_or_zero", std::move(y), {a, b}, [](const BackwardContext& ctx) {
    const Tensor& z = *ctx.inputs[1];
    if (Tensor* g = ctx.input_grads[0])
      for (std::size_t i = 0; i < g->size(); ++i)
        if (z[i] != 0.0) (*g)[i] += ctx.grad[i] / z[i];
    if (Tensor* g = ctx.input_grads[1])
      for (std::size_t i = 0; i < g->size(); ++i)
        if (z[i] != 0.0) (*g)[i] -= ctx.grad[i] * ctx.value[i] / z[i];
  });
}

Var scale(Var a, double s) {
  Tensor y = a.value();
  y *= s;
  return a.tape->record("scale", std::move(y), {a}, [s](const BackwardContext& ctx) {
    if (Tensor* g = ctx.input_grads[0])
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * ctx.grad[i];
  });
}

Var add_scalar(Var a, double s) {
  Tensor y = a.value();
  for (double& v : y.storage()) v += s;
  return a.tape->record("add_scalar", std::move(y), {a}, [](const BackwardContext& ctx) {
    if (ctx.input_grads[0]) *ctx.input_grads[0] += ctx.grad;
  });
}

Var relu(Var a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var sin(Var a) {
  return unary("sin", a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos(Var a) {
  return unary("cos", a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var abs(Var a) {
  return unary("abs", a, [](double x) { return std::abs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.tape->record("sum", Tensor::scalar(total), {a}, [](const BackwardContext& ctx) {
    if (Tensor* g = ctx.input_grads[0]) {
      const double s = ctx.grad[0];
      for (double& v : g->storage()) v += s;
    }
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ValidationError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum_axis(Var a, int axis) {
  const Tensor& x = a.value();
  require_rank2("sum_axis", x);
  const std::size_t r = x.rows(), c = x.cols();
  if (axis != 0 && axis != 1) throw ValidationError("sum_axis: axis must be 0 or 1");
  Tensor y = axis == 0 ? Tensor::matrix(1, c) : Tensor::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) (axis == 0 ? y(0, j) : y(i, 0)) += x(i, j);
  return a.tape->record("sum_axis", std::move(y), {a}, [axis](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    const std::size_t r = g->rows(), c = g->cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*g)(i, j) += axis == 0 ? ctx.grad(0, j) : ctx.grad(i, 0);
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw ValidationError("concat: no inputs");
  if (axis != 0 && axis != 1) throw ValidationError("concat: axis must be 0 or 1");
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    require_rank2("concat", v);
    if (axis == 0) {
      if (rows == 0 && cols == 0) cols = v.cols();
      if (v.cols() != cols) {
        throw ValidationError("concat: column mismatch " + shape_string(parts[0].shape()) + " vs " + shape_string(v.shape()));
      }
      rows += v.rows();
    } else {
      if (rows == 0 && cols == 0) rows = v.rows();
      if (v.rows() != rows) {
        throw ValidationError("concat: row mismatch " + shape_string(parts[0].shape()) + " vs " + shape_string(v.shape()));
      }
      cols += v.cols();
    }
  }
  Tensor y = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (axis == 0) y(offset + i, j) = v(i, j);
        else y(i, offset + j) = v(i, j);
      }
    offset += axis == 0 ? v.rows() : v.cols();
  }
  return parts[0].tape->record("concat", std::move(y), parts, [axis](const BackwardContext& ctx) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ctx.inputs.size(); ++k) {
      const Tensor& v = *ctx.inputs[k];
      if (Tensor* g = ctx.input_grads[k]) {
        for (std::size_t i = 0; i < v.rows(); ++i)
          for (std::size_t j = 0; j < v.cols(); ++j)
            (*g)(i, j) += axis == 0 ? ctx.grad(offset + i, j) : ctx.grad(i, offset + j);
      }
      offset += axis == 0 ? v.rows() : v.cols();
    }
  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_rank2("slice", x);
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if ((axis != 0 && axis != 1) || begin > end || end > extent) {
    throw ValidationError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                          std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  const std::size_t r = axis == 0 ? end - begin : x.rows();
  const std::size_t c = axis == 1 ? end - begin : x.cols();
  Tensor y = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y(i, j) = axis == 0 ? x(begin + i, j) : x(i, begin + j);
  return a.tape->record("slice", std::move(y), {a}, [axis, begin](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    for (std::size_t i = 0; i < ctx.grad.rows(); ++i)
      for (std::size_t j = 0; j < ctx.grad.cols(); ++j) {
        if (axis == 0) (*g)(begin + i, j) += ctx.grad(i, j);
        else (*g)(i, begin + j) += ctx.grad(i, j);
      }
  });
}

Var layernorm(Var a, double eps) {
  const Tensor& x = a.value();
  require_rank2("layernorm", x);
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y = Tensor::matrix(r, c);
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += x(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) y(i, j) = (x(i, j) - mu) * inv_std[i];
  }
  return a.tape->record("layernorm", std::move(y), {a}, [inv_std = std::move(inv_std)](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    const Tensor& y = ctx.value;
    const std::size_t r = y.rows(), c = y.cols();
    const double inv_c = 1.0 / static_cast<double>(c);
    for (std::size_t i = 0; i < r; ++i) {
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        mean_g += ctx.grad(i, j);
        mean_gy += ctx.grad(i, j) * y(i, j);
      }
      mean_g *= inv_c;
      mean_gy *= inv_c;
      for (std::size_t j = 0; j < c; ++j) (*g)(i, j) += inv_std[i] * (ctx.grad(i, j) - mean_g - y(i, j) * mean_gy);
    }
  });
}

Var broadcast(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  require_rank2("broadcast", x);
  const bool row_ok = x.rows() == rows || x.rows() == 1;
  const bool col_ok = x.cols() == cols || x.cols() == 1;
  if (!row_ok || !col_ok) {
    throw ValidationError("broadcast: cannot expand " + shape_string(x.shape()) + " to " +
                          shape_string({rows, cols}));
  }
  const bool rep_r = x.rows() == 1, rep_c = x.cols() == 1;
  Tensor y = Tensor::matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) y(i, j) = x(rep_r ? 0 : i, rep_c ? 0 : j);
  return a.tape->record("broadcast", std::move(y), {a}, [rep_r, rep_c](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    for (std::size_t i = 0; i < ctx.grad.rows(); ++i)
      for (std::size_t j = 0; j < ctx.grad.cols(); ++j) (*g)(rep_r ? 0 : i, rep_c ? 0 : j) += ctx.grad(i, j);
  });
}

Var reshape(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& x = a.value();
  if (rows * cols != x.size()) {
    throw ValidationError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string({rows, cols}));
  }
  Tensor y({rows, cols}, x.storage());
  return a.tape->record("reshape", std::move(y), {a}, [](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += ctx.grad[i];
  });
}

Var gather_rows(Var a, std::vector<std::size_t> indices) {
  const Tensor& x = a.value();
  require_rank2("gather_rows", x);
  const std::size_t c = x.cols();
  Tensor y = Tensor::matrix(indices.size(), c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.rows()) {
      throw ValidationError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                            shape_string(x.shape()));
    }
    for (std::size_t j = 0; j < c; ++j) y(i, j) = x(indices[i], j);
  }
  return a.tape->record("gather_rows", std::move(y), {a}, [indices = std::move(indices)](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    const std::size_t c = g->cols();
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) (*g)(indices[i], j) += ctx.grad(i, j);
  });
}

Var softmax_rows(Var a) {
  const Tensor& x = a.value();
  require_rank2("softmax_rows", x);
  const std::size_t r = x.rows(), c = x.cols();
  Tensor y = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double peak = x(i, 0);
    for (std::size_t j = 1; j < c; ++j) peak = std::max(peak, x(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += (y(i, j) = std::exp(x(i, j) - peak));
    for (std::size_t j = 0; j < c; ++j) y(i, j) /= total;
  }
  return a.tape->record("softmax_rows", std::move(y), {a}, [](const BackwardContext& ctx) {
    Tensor* g = ctx.input_grads[0];
    if (!g) return;
    const Tensor& y = ctx.value;
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += ctx.grad(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) (*g)(i, j) += y(i, j) * (ctx.grad(i, j) - dot);
    }
  });
}

// ---- finite differences -----------------------------------------------------

std::pair<double, std::map<std::string, Tensor>> value_and_grad(const TapeProgram& program, const ParamMap& params) {
  Tape tape;
  Var loss = program(tape, params);
  const double value = loss.value().item();
  return {value, tape.backward(loss)};
}

namespace {
double evaluate(const TapeProgram& program, const ParamMap& params) {
  Tape tape;
  return program(tape, params).value().item();
}
}  // namespace

double gradient_relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check_against(const TapeProgram& program, const ParamMap& params,
                                   const std::map<std::string, Tensor>& claimed, double h, double tol,
                                   std::size_t max_entries_per_param) {
  GradCheckReport report;
  report.pass = true;
  ParamMap work = params;
  for (const auto& [name, tensor] : params) {
    GradCheckEntry entry;
    entry.name = name;
    auto it = claimed.find(name);
    if (it == claimed.end() || it->second.shape() != tensor.shape()) {
      throw ValidationError("grad_check: no gradient of matching shape for '" + name + "'");
    }
    const std::size_t n = tensor.size();
    const std::size_t count = (max_entries_per_param == 0 || max_entries_per_param >= n) ? n : max_entries_per_param;
    for (std::size_t s = 0; s < count; ++s) {
      const std::size_t i = count == n ? s : (s * n) / count;
      const double original = tensor[i];
      work[name][i] = original + h;
      const double up = evaluate(program, work);
      work[name][i] = original - h;
      const double down = evaluate(program, work);
      work[name][i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = it->second[i];
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(analytic - numeric));
      entry.max_rel_error = std::max(entry.max_rel_error, gradient_relative_error(analytic, numeric));
      ++entry.checked;
    }
    entry.pass = entry.max_rel_error < tol;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

GradCheckReport grad_check(const TapeProgram& program, const ParamMap& params, double h, double tol,
                           std::size_t max_entries_per_param) {
  auto [value, grads] = value_and_grad(program, params);
  (void)value;
  return grad_check_against(program, params, grads, h, tol, max_entries_per_param);
}

}  // namespace kafnet::ad
