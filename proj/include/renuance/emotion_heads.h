// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Auxiliary heads over the mean-pooled fused embedding: a 4-way categorical
// classifier and a valence/arousal/dominance regressor. Both are single affine
// layers and only take part in training.

#pragma once

#include <array>
#include <span>
#include <vector>

#include "renuance/adapter.h"
#include "renuance/autodiff.h"
#include "renuance/common.h"

namespace renuance {

struct PooledEmbedding {
  RowVector vector;
};

struct EmotionPrediction {
  std::array<double, kNumEmotions> cat_probs{};  // neutral, happy, angry, sad
  Vad vad_pred;

  Emotion argmax() const;
};

class EmotionHeads {
 public:
  EmotionHeads(int model_dim, std::uint64_t seed);
  EmotionHeads(const EmotionHeads&) = delete;
  EmotionHeads& operator=(const EmotionHeads&) = delete;

  int model_dim() const { return model_dim_; }

  // 1 x M pooled row -> 1 x 4 probabilities.
  ad::Var classify(ad::Tape& tape, ad::Var pooled);
  // 1 x M pooled row -> 1 x 3 values in (0,1).
  ad::Var regress(ad::Tape& tape, ad::Var pooled);

  EmotionPrediction predict(const PooledEmbedding& pooled);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  ad::Parameter& cls_weight() { return cls_w_; }
  ad::Parameter& cls_bias() { return cls_b_; }
  ad::Parameter& reg_weight() { return reg_w_; }
  ad::Parameter& reg_bias() { return reg_b_; }

 private:
  int model_dim_;
  ad::Parameter cls_w_, cls_b_, reg_w_, reg_b_;
};

ad::Var mean_pool(ad::Var fused);
PooledEmbedding mean_pool(const FusedEmbeddingSequence& fused);

std::array<double, kNumEmotions> classify_categorical(const PooledEmbedding& pooled, EmotionHeads& heads);
Vad regress_dimensional(const PooledEmbedding& pooled, EmotionHeads& heads);

// Batch means. CE is -log p[target]; MSE averages the 3 dimensions first.
ad::Var ce_loss(std::span<const ad::Var> probs, std::span<const int> targets);
ad::Var mse_loss(std::span<const ad::Var> preds, std::span<const Vad> targets);
double ce_loss(std::span<const std::array<double, kNumEmotions>> probs, std::span<const int> targets);
double mse_loss(std::span<const Vad> preds, std::span<const Vad> targets);

}  // namespace renuance
