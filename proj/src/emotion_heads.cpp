// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/emotion_heads.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace renuance {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m)) throw std::invalid_argument(fmt::format("{}: non-finite input", what));
}

void check_target(int t) {
  if (t < 0 || t >= kNumEmotions) throw std::out_of_range(fmt::format("ce_loss: target index {} not in 0..3", t));
}

}  // namespace

Emotion EmotionPrediction::argmax() const {
  return static_cast<Emotion>(std::max_element(cat_probs.begin(), cat_probs.end()) - cat_probs.begin());
}

EmotionHeads::EmotionHeads(int model_dim, std::uint64_t seed) : model_dim_(model_dim) {
  if (model_dim < 1) throw std::invalid_argument("emotion heads: model_dim must be >= 1");
  Rng rng(seed);
  cls_w_ = ad::Parameter("heads.cat.w", init_fan_in(model_dim, kNumEmotions, model_dim, rng));
  cls_b_ = ad::Parameter("heads.cat.b", Matrix::Zero(1, kNumEmotions));
  reg_w_ = ad::Parameter("heads.dim.w", init_fan_in(model_dim, 3, model_dim, rng));
  reg_b_ = ad::Parameter("heads.dim.b", Matrix::Zero(1, 3));
}

ad::Var EmotionHeads::classify(ad::Tape& tape, ad::Var pooled) {
  if (pooled.rows() != 1 || pooled.cols() != model_dim_) throw std::invalid_argument("classify: pooled must be 1 x M");
  require_finite(pooled.value(), "classify");
  return ad::softmax_rows(ad::add_bias(ad::matmul(pooled, tape.param(cls_w_)), tape.param(cls_b_)));
}

ad::Var EmotionHeads::regress(ad::Tape& tape, ad::Var pooled) {
  if (pooled.rows() != 1 || pooled.cols() != model_dim_) throw std::invalid_argument("regress: pooled must be 1 x M");
  require_finite(pooled.value(), "regress");
  return ad::sigmoid(ad::add_bias(ad::matmul(pooled, tape.param(reg_w_)), tape.param(reg_b_)));
}

EmotionPrediction EmotionHeads::predict(const PooledEmbedding& pooled) {
  EmotionPrediction out;
  out.cat_probs = classify_categorical(pooled, *this);
  out.vad_pred = regress_dimensional(pooled, *this);
  return out;
}

std::vector<ad::Parameter*> EmotionHeads::parameters() { return {&cls_w_, &cls_b_, &reg_w_, &reg_b_}; }

std::vector<const ad::Parameter*> EmotionHeads::parameters() const { return {&cls_w_, &cls_b_, &reg_w_, &reg_b_}; }

ad::Var mean_pool(ad::Var fused) {
  if (fused.rows() < 1) throw std::invalid_argument("mean_pool: empty sequence");
  return ad::mean_rows(fused);
}

PooledEmbedding mean_pool(const FusedEmbeddingSequence& fused) {
  if (fused.frames.rows() < 1) throw std::invalid_argument("mean_pool: empty sequence");
  // Same arithmetic as the tape op so both paths agree bit for bit.
  return PooledEmbedding{fused.frames.colwise().sum() / static_cast<double>(fused.frames.rows())};
}

std::array<double, kNumEmotions> classify_categorical(const PooledEmbedding& pooled, EmotionHeads& heads) {
  ad::Tape tape(false);
  const Matrix row = pooled.vector;
  const Matrix p = heads.classify(tape, tape.constant_ref(row)).value();
  std::array<double, kNumEmotions> out{};
  for (int k = 0; k < kNumEmotions; ++k) out[k] = p(0, k);
  return out;
}

Vad regress_dimensional(const PooledEmbedding& pooled, EmotionHeads& heads) {
  ad::Tape tape(false);
  const Matrix row = pooled.vector;
  const Matrix v = heads.regress(tape, tape.constant_ref(row)).value();
  return Vad{v(0, 0), v(0, 1), v(0, 2)};
}

ad::Var ce_loss(std::span<const ad::Var> probs, std::span<const int> targets) {
  if (probs.empty() || probs.size() != targets.size()) throw std::invalid_argument("ce_loss: batch size mismatch");
  ad::Var total;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    check_target(targets[i]);
    ad::Var term = ad::neg_log_pick(probs[i], targets[i]);
    total = total.valid() ? ad::add(total, term) : term;
  }
  return ad::scale(total, 1.0 / static_cast<double>(probs.size()));
}

ad::Var mse_loss(std::span<const ad::Var> preds, std::span<const Vad> targets) {
  if (preds.empty() || preds.size() != targets.size()) throw std::invalid_argument("mse_loss: batch size mismatch");
  ad::Var total;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ad::Var term = ad::mean_squared_error(preds[i], targets[i].as_row());
    total = total.valid() ? ad::add(total, term) : term;
  }
  return ad::scale(total, 1.0 / static_cast<double>(preds.size()));
}

double ce_loss(std::span<const std::array<double, kNumEmotions>> probs, std::span<const int> targets) {
  if (probs.empty() || probs.size() != targets.size()) throw std::invalid_argument("ce_loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    check_target(targets[i]);
    total += -std::log(probs[i][static_cast<std::size_t>(targets[i])]);
  }
  return total * (1.0 / static_cast<double>(probs.size()));
}

double mse_loss(std::span<const Vad> preds, std::span<const Vad> targets) {
  if (preds.empty() || preds.size() != targets.size()) throw std::invalid_argument("mse_loss: batch size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Matrix d = preds[i].as_row() - targets[i].as_row();
    total += d.squaredNorm() / 3.0;
  }
  return total * (1.0 / static_cast<double>(preds.size()));
}

}  // namespace renuance
