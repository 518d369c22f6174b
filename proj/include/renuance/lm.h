// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Small pre-LayerNorm decoder-only transformer that reads embedding sequences,
// so speech frames can be spliced between prompt token embeddings.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "renuance/adapter.h"
#include "renuance/autodiff.h"
#include "renuance/tokenizer.h"

namespace renuance {

struct LMConfig {
  int vocab_size = 512;
  int layers = 2;
  int heads = 4;
  int model_dim = 32;
  int max_positions = 256;

  void validate() const;
};

struct GenerationResult {
  std::string text;
  std::vector<int> token_ids;
  std::vector<double> per_step_logprob;
};

class LanguageModel {
 public:
  LanguageModel(const LMConfig& config, std::uint64_t seed);
  LanguageModel(const LanguageModel&) = delete;
  LanguageModel& operator=(const LanguageModel&) = delete;

  const LMConfig& config() const { return config_; }

  // Token embedding table as a tape leaf (trainable).
  ad::Var embed_table(ad::Tape& tape);
  // L x M input (positions are added inside) -> L x V logits.
  ad::Var forward_logits(ad::Tape& tape, ad::Var input);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  // Direct handle for tests that need to shape the output distribution.
  ad::Parameter& output_weight() { return out_w_; }
  ad::Parameter& output_bias() { return out_b_; }

 private:
  struct Block {
    ad::Parameter ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b;
    ad::Parameter ln2_g, ln2_b, fc_w, fc_b, fc2_w, fc2_b;
  };

  LMConfig config_;
  ad::Parameter tok_emb_, pos_emb_;
  std::vector<Block> blocks_;
  ad::Parameter lnf_g_, lnf_b_, out_w_, out_b_;
};

// [e(tokens before marker)] ++ fused frames ++ [e(tokens after marker)].
// Exactly one Tokenizer::kSpeech marker is required.
ad::Var splice_speech(std::span<const int> prompt_tokens, ad::Var fused, ad::Var embed_table);
// Value-level form for callers without a tape.
Matrix splice_speech(std::span<const int> prompt_tokens, const FusedEmbeddingSequence& fused, const Matrix& embed_table);

// Per-position next-token distributions (rows sum to 1).
Matrix lm_forward(LanguageModel& lm, const Matrix& input);

// Teacher-forced sum over target positions of -log p(y_j | context, y_<j).
// The context must be non-empty and is typically the spliced prompt.
ad::Var sequence_nll(ad::Tape& tape, LanguageModel& lm, ad::Var context, std::span<const int> target);
double sequence_nll(LanguageModel& lm, const Matrix& context, std::span<const int> target);

// Sum over target positions of KL(p_teacher || p_student), where the teacher
// distributions come from the same model run on `teacher_context` (usually the
// text prompt) and are held constant.
ad::Var teacher_kl(ad::Tape& tape, LanguageModel& lm, ad::Var student_context, const Matrix& teacher_context,
                   std::span<const int> target);

// Greedy continuation of `context`; stops after Tokenizer::kEos or max_new tokens.
// The end-of-sequence token is recorded in token_ids but not rendered in text.
GenerationResult generate(LanguageModel& lm, const Matrix& context, int max_new, const Tokenizer* tokenizer = nullptr);

struct SamplingOptions {
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

// Temperature sampling; not used by any evaluation path.
GenerationResult sample(LanguageModel& lm, const Matrix& context, int max_new, const SamplingOptions& options,
                        const Tokenizer* tokenizer = nullptr);

}  // namespace renuance
