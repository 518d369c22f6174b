// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/autodiff.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace renuance {

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace renuance

namespace renuance::ad {

Parameter::Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)) {
  grad = Matrix::Zero(value.rows(), value.cols());
}

void Parameter::zero_grad() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = Matrix::Zero(value.rows(), value.cols());
  } else {
    grad.setZero();
  }
}

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant_ref(const Matrix& value) {
  Node& n = nodes_.emplace_back();
  n.ref = &value;
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(Parameter& p) {
  Node& n = nodes_.emplace_back();
  n.ref = &p.value;
  n.needs_grad = record_grad_;
  n.param = &p;
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  if (record_grad_) {
    for (const Var& p : parents) {
      if (p.tape_ != this) throw std::logic_error("autodiff: mixing variables from different tapes");
      needs = needs || nodes_[p.id_].needs_grad;
    }
  }
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.ref ? *n.ref : n.owned;
}

Matrix& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) {
    const Matrix& v = value(id);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw std::logic_error("autodiff: loss belongs to another tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("autodiff: loss must be 1x1");
  if (!nodes_[loss.id_].needs_grad) return;
  grad(loss.id_)(0, 0) += 1.0;
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

void Tape::accumulate_param_grads(double scale) const {
  for (const Node& n : nodes_) {
    if (n.param == nullptr || n.grad.size() == 0) continue;
    if (n.param->grad.rows() != n.param->value.rows() || n.param->grad.cols() != n.param->value.cols()) {
      n.param->grad = Matrix::Zero(n.param->value.rows(), n.param->value.cols());
    }
    n.param->grad.noalias() += scale * n.grad;
  }
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string("autodiff: shape mismatch in ") + op);
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("autodiff: matmul inner dimensions differ");
  Matrix out = a.value() * b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id())) t.grad(a.id()).noalias() += g * b.value().transpose();
    if (t.needs_grad(b.id())) t.grad(b.id()).noalias() += a.value().transpose() * g;
  });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.grad(a.id()) += g.transpose();
  });
}

Var add(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value() + b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id())) t.grad(a.id()) += g;
    if (t.needs_grad(b.id())) t.grad(b.id()) += g;
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value() - b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id())) t.grad(a.id()) += g;
    if (t.needs_grad(b.id())) t.grad(b.id()) -= g;
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a.value(), b.value(), "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id())) t.grad(a.id()) += g.cwiseProduct(b.value());
    if (t.needs_grad(b.id())) t.grad(b.id()) += g.cwiseProduct(a.value());
  });
}

Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  return a.tape()->record(std::move(out), {a}, [a, s](Tape& t, const Matrix& g) {
    t.grad(a.id()) += g * s;
  });
}

Var add_bias(Var a, Var bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw std::invalid_argument("autodiff: bias must be 1 x cols");
  }
  Matrix out = a.value().rowwise() + bias.value().row(0);
  return a.tape()->record(std::move(out), {a, bias}, [a, bias](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id())) t.grad(a.id()) += g;
    if (t.needs_grad(bias.id())) t.grad(bias.id()) += g.colwise().sum();
  });
}

Var concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("autodiff: concat_cols row counts differ");
  const Eigen::Index ca = a.cols();
  const Eigen::Index cb = b.cols();
  Matrix out(a.rows(), ca + cb);
  out.leftCols(ca) = a.value();
  out.rightCols(cb) = b.value();
  return a.tape()->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id())) t.grad(a.id()) += g.leftCols(ca);
    if (t.needs_grad(b.id())) t.grad(b.id()) += g.rightCols(cb);
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("autodiff: concat_rows of nothing");
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("autodiff: concat_rows column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts.front().tape()->record(std::move(out), parts, [keep](Tape& t, const Matrix& g) {
    Eigen::Index r = 0;
    for (const Var& p : keep) {
      if (t.needs_grad(p.id())) t.grad(p.id()) += g.middleRows(r, p.rows());
      r += p.rows();
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::out_of_range("autodiff: slice_rows out of range");
  }
  Matrix out = a.value().middleRows(start, count);
  return a.tape()->record(std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g) {
    t.grad(a.id()).middleRows(start, count) += g;
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::out_of_range("autodiff: slice_cols out of range");
  }
  Matrix out = a.value().middleCols(start, count);
  return a.tape()->record(std::move(out), {a}, [a, start, count](Tape& t, const Matrix& g) {
    t.grad(a.id()).middleCols(start, count) += g;
  });
}

Var gather_rows(Var table, std::span<const int> ids) {
  const Matrix& tv = table.value();
  Matrix out(static_cast<Eigen::Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) throw std::out_of_range("autodiff: gather_rows index out of range");
    out.row(static_cast<Eigen::Index>(i)) = tv.row(ids[i]);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape()->record(std::move(out), {table}, [table, idx](Tape& t, const Matrix& g) {
    Matrix& gt = t.grad(table.id());
    for (std::size_t i = 0; i < idx.size(); ++i) gt.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw std::invalid_argument("autodiff: mean over zero rows");
  const double n = static_cast<double>(a.rows());
  Matrix out = a.value().colwise().sum() / n;
  return a.tape()->record(std::move(out), {a}, [a, n](Tape& t, const Matrix& g) {
    t.grad(a.id()).rowwise() += g.row(0) / n;
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    t.grad(a.id()).array() += g(0, 0);
  });
}

Var unfold_1d(Var x, int kernel, int stride, int padding) {
  const Eigen::Index len = x.rows();
  const Eigen::Index ch = x.cols();
  const Eigen::Index span = len + 2 * padding - kernel;
  if (kernel < 1 || stride < 1 || padding < 0 || span < 0) {
    throw std::invalid_argument("autodiff: invalid unfold geometry");
  }
  const Eigen::Index out_len = span / stride + 1;
  Matrix out = Matrix::Zero(out_len, kernel * ch);
  const Matrix& xv = x.value();
  for (Eigen::Index t = 0; t < out_len; ++t) {
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index src = t * stride + k - padding;
      if (src >= 0 && src < len) out.block(t, k * ch, 1, ch) = xv.row(src);
    }
  }
  return x.tape()->record(std::move(out), {x}, [x, kernel, stride, padding, len, ch, out_len](Tape& t, const Matrix& g) {
    Matrix& gx = t.grad(x.id());
    for (Eigen::Index r = 0; r < out_len; ++r) {
      for (int k = 0; k < kernel; ++k) {
        const Eigen::Index src = r * stride + k - padding;
        if (src >= 0 && src < len) gx.row(src) += g.block(r, k * ch, 1, ch);
      }
    }
  });
}

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

Var gelu(Var a) {
  Matrix out = a.value().unaryExpr([](double x) { return gelu_value(x); });
  return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix d = a.value().unaryExpr([](double x) {
      const double th = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    });
    t.grad(a.id()) += g.cwiseProduct(d);
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  const int self_id = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [a, self_id](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self_id);
    t.grad(a.id()) += g.cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Var sigmoid(Var a) {
  Matrix out = a.value().unaryExpr([](double x) {
    return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
  const int self_id = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [a, self_id](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self_id);
    t.grad(a.id()) += g.cwiseProduct((y.array() * (1.0 - y.array())).matrix());
  });
}

namespace {

Matrix softmax_rows_value(const Matrix& x, bool causal) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::Index n = causal ? std::min<Eigen::Index>(i + 1, x.cols()) : x.cols();
    const double m = x.row(i).head(n).maxCoeff();
    double z = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      y(i, j) = std::exp(x(i, j) - m);
      z += y(i, j);
    }
    for (Eigen::Index j = 0; j < n; ++j) y(i, j) /= z;
    for (Eigen::Index j = n; j < x.cols(); ++j) y(i, j) = 0.0;
  }
  return y;
}

Var softmax_impl(Var a, bool causal) {
  Matrix out = softmax_rows_value(a.value(), causal);
  const int self_id = static_cast<int>(a.tape()->size());
  return a.tape()->record(std::move(out), {a}, [a, self_id](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(self_id);
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    Matrix gx = y.cwiseProduct(g);
    gx -= y.cwiseProduct(dots.replicate(1, y.cols()));
    t.grad(a.id()) += gx;
  });
}

}  // namespace

Var softmax_rows(Var a) { return softmax_impl(a, false); }

Var causal_softmax_rows(Var a) { return softmax_impl(a, true); }

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  const Eigen::Index c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw std::invalid_argument("autodiff: layer norm affine shape mismatch");
  }
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), c);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) {
    const double mu = xv.row(i).mean();
    const double var = (xv.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (xv.row(i).array() - mu) * inv_std(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).matrix();
  out.rowwise() += beta.value().row(0);
  return x.tape()->record(std::move(out), {x, gamma, beta},
                          [x, gamma, beta, xhat, inv_std, c](Tape& t, const Matrix& g) {
    if (t.needs_grad(gamma.id())) t.grad(gamma.id()) += g.cwiseProduct(xhat).colwise().sum();
    if (t.needs_grad(beta.id())) t.grad(beta.id()) += g.colwise().sum();
    if (t.needs_grad(x.id())) {
      const Matrix dxhat = (g.array().rowwise() * gamma.value().row(0).array()).matrix();
      Matrix& gx = t.grad(x.id());
      const double n = static_cast<double>(c);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const double mean_d = dxhat.row(i).sum() / n;
        const double mean_dx = dxhat.row(i).dot(xhat.row(i)) / n;
        gx.row(i).array() += inv_std(i) * (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx);
      }
    }
  });
}

Var softmax_cross_entropy_rows(Var logits, std::span<const int> targets) {
  const Matrix& lv = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != lv.rows()) {
    throw std::invalid_argument("autodiff: one target per logits row required");
  }
  Matrix probs = softmax_rows_value(lv, false);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < lv.rows(); ++i) {
    const int y = targets[i];
    if (y < 0 || y >= lv.cols()) throw std::out_of_range("autodiff: target index out of range");
    const double m = lv.row(i).maxCoeff();
    const double lse = m + std::log((lv.row(i).array() - m).exp().sum());
    loss += lse - lv(i, y);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<int> ys(targets.begin(), targets.end());
  return logits.tape()->record(std::move(out), {logits}, [logits, probs, ys](Tape& t, const Matrix& g) {
    Matrix d = probs;
    for (std::size_t i = 0; i < ys.size(); ++i) d(static_cast<Eigen::Index>(i), ys[i]) -= 1.0;
    t.grad(logits.id()) += g(0, 0) * d;
  });
}

Var kl_divergence_rows(Var logits, const Matrix& teacher_probs) {
  const Matrix& lv = logits.value();
  require_same_shape(lv, teacher_probs, "kl_divergence_rows");
  Matrix probs = softmax_rows_value(lv, false);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < lv.rows(); ++i) {
    const double m = lv.row(i).maxCoeff();
    const double lse = m + std::log((lv.row(i).array() - m).exp().sum());
    for (Eigen::Index v = 0; v < lv.cols(); ++v) {
      const double p = teacher_probs(i, v);
      if (p > 0.0) loss += p * (std::log(p) - (lv(i, v) - lse));
    }
  }
  Matrix out(1, 1);
  out(0, 0) = std::max(0.0, loss);
  return logits.tape()->record(std::move(out), {logits}, [logits, probs, teacher_probs](Tape& t, const Matrix& g) {
    t.grad(logits.id()) += g(0, 0) * (probs - teacher_probs);
  });
}

Var neg_log_pick(Var probs, int index) {
  if (probs.rows() != 1 || index < 0 || index >= probs.cols()) {
    throw std::out_of_range("autodiff: neg_log_pick index out of range");
  }
  Matrix out(1, 1);
  out(0, 0) = -std::log(probs.value()(0, index));
  return probs.tape()->record(std::move(out), {probs}, [probs, index](Tape& t, const Matrix& g) {
    t.grad(probs.id())(0, index) -= g(0, 0) / probs.value()(0, index);
  });
}

Var mean_squared_error(Var pred, const Matrix& target) {
  require_same_shape(pred.value(), target, "mean_squared_error");
  const Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = diff.squaredNorm() / n;
  return pred.tape()->record(std::move(out), {pred}, [pred, diff, n](Tape& t, const Matrix& g) {
    t.grad(pred.id()) += (2.0 * g(0, 0) / n) * diff;
  });
}

}  // namespace renuance::ad
