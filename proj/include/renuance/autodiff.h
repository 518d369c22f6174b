// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape records every operation of one forward pass. Nodes live in a deque so
// references to their values stay valid while the graph grows. Parameters are
// leaves that point at externally owned storage; after backward() their
// gradients stay on the tape until accumulate_param_grads() folds them into
// Parameter::grad. That split lets independent samples run on separate tapes
// and be merged in a fixed order.

#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace renuance {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

bool all_finite(const Matrix& m);

}  // namespace renuance

namespace renuance::ad {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v);
  void zero_grad();
};

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  explicit Tape(bool record_grad = true) : record_grad_(record_grad) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf referencing caller-owned storage; the storage must outlive the tape.
  Var constant_ref(const Matrix& value);
  Var param(Parameter& p);

  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> parents, BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1; loss must be 1x1.
  void backward(Var loss);
  // Adds scale * d(loss)/dp into p.grad for every parameter leaf.
  void accumulate_param_grads(double scale = 1.0) const;

  const Matrix& value(int id) const;
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  Matrix& grad(int id);
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return record_grad_; }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool needs_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
  bool record_grad_;
};

// Linear algebra and shape ops.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// a (T x C) + bias (1 x C) broadcast over rows.
Var add_bias(Var a, Var bias);
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
// Output row i is table row ids[i].
Var gather_rows(Var table, std::span<const int> ids);
Var mean_rows(Var a);
Var sum(Var a);
// im2col for a 1-D convolution over time. Row t of the output holds the
// kernel window starting at t*stride - padding, zero outside the input.
Var unfold_1d(Var x, int kernel, int stride, int padding);

// Pointwise nonlinearities.
Var gelu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);

// Normalizations.
Var softmax_rows(Var a);
// Row i only attends to columns j <= i.
Var causal_softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);

// Losses; all return 1x1.
// Sum over rows of -log softmax(logits_i)[targets_i].
Var softmax_cross_entropy_rows(Var logits, std::span<const int> targets);
// Sum over rows of KL(teacher_i || softmax(logits_i)); teacher rows sum to 1.
Var kl_divergence_rows(Var logits, const Matrix& teacher_probs);
// -log p[0, index] for a probability row vector.
Var neg_log_pick(Var probs, int index);
// Mean of squared differences over all entries.
Var mean_squared_error(Var pred, const Matrix& target);

double gelu_value(double x);

}  // namespace renuance::ad
