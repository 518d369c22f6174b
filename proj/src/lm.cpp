// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/lm.h"

#include <cmath>
#include <functional>
#include <stdexcept>

#include <fmt/format.h>

#include "renuance/common.h"

namespace renuance {

void LMConfig::validate() const {
  if (vocab_size < 1 || layers < 1 || heads < 1 || model_dim < 1 || max_positions < 1) {
    throw std::invalid_argument("lm config: all sizes must be >= 1");
  }
  if (model_dim % heads != 0) throw std::invalid_argument("lm config: heads must divide model_dim");
}

LanguageModel::LanguageModel(const LMConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  Rng rng(seed);
  const int m = config.model_dim;
  const int v = config.vocab_size;
  auto ones = [&](const std::string& name) { return ad::Parameter(name, Matrix::Ones(1, m)); };
  auto zeros = [&](const std::string& name, int cols) { return ad::Parameter(name, Matrix::Zero(1, cols)); };

  tok_emb_ = ad::Parameter("lm.tok_emb", init_fan_in(v, m, m, rng));
  pos_emb_ = ad::Parameter("lm.pos_emb", init_fan_in(config.max_positions, m, m, rng) * 0.5);
  blocks_.reserve(static_cast<std::size_t>(config.layers));
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = fmt::format("lm.block{}.", l);
    Block b;
    b.ln1_g = ones(p + "ln1.g");
    b.ln1_b = zeros(p + "ln1.b", m);
    b.qkv_w = ad::Parameter(p + "attn.qkv.w", init_fan_in(m, 3 * m, m, rng));
    b.qkv_b = zeros(p + "attn.qkv.b", 3 * m);
    b.proj_w = ad::Parameter(p + "attn.proj.w", init_fan_in(m, m, m, rng));
    b.proj_b = zeros(p + "attn.proj.b", m);
    b.ln2_g = ones(p + "ln2.g");
    b.ln2_b = zeros(p + "ln2.b", m);
    b.fc_w = ad::Parameter(p + "mlp.fc.w", init_fan_in(m, 4 * m, m, rng));
    b.fc_b = zeros(p + "mlp.fc.b", 4 * m);
    b.fc2_w = ad::Parameter(p + "mlp.proj.w", init_fan_in(4 * m, m, 4 * m, rng));
    b.fc2_b = zeros(p + "mlp.proj.b", m);
    blocks_.push_back(std::move(b));
  }
  lnf_g_ = ones("lm.ln_f.g");
  lnf_b_ = zeros("lm.ln_f.b", m);
  out_w_ = ad::Parameter("lm.out.w", init_fan_in(m, v, m, rng));
  out_b_ = zeros("lm.out.b", v);
}

ad::Var LanguageModel::embed_table(ad::Tape& tape) { return tape.param(tok_emb_); }

ad::Var LanguageModel::forward_logits(ad::Tape& tape, ad::Var input) {
  const Eigen::Index len = input.rows();
  const int m = config_.model_dim;
  if (input.cols() != m) throw std::invalid_argument(fmt::format("lm: input width {} != model_dim {}", input.cols(), m));
  if (len < 1) throw std::invalid_argument("lm: empty input");
  if (len > config_.max_positions) {
    throw std::invalid_argument(fmt::format("lm: input length {} exceeds max_positions {}", len, config_.max_positions));
  }
  const int heads = config_.heads;
  const int dh = m / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ad::Var x = ad::add(input, ad::slice_rows(tape.param(pos_emb_), 0, len));
  for (Block& b : blocks_) {
    ad::Var h = ad::layer_norm_rows(x, tape.param(b.ln1_g), tape.param(b.ln1_b));
    ad::Var qkv = ad::add_bias(ad::matmul(h, tape.param(b.qkv_w)), tape.param(b.qkv_b));
    std::vector<ad::Var> head_out;
    head_out.reserve(static_cast<std::size_t>(heads));
    for (int hd = 0; hd < heads; ++hd) {
      ad::Var q = ad::slice_cols(qkv, hd * dh, dh);
      ad::Var k = ad::slice_cols(qkv, m + hd * dh, dh);
      ad::Var v = ad::slice_cols(qkv, 2 * m + hd * dh, dh);
      ad::Var att = ad::causal_softmax_rows(ad::scale(ad::matmul(q, ad::transpose(k)), att_scale));
      head_out.push_back(ad::matmul(att, v));
    }
    ad::Var merged = head_out.front();
    for (int hd = 1; hd < heads; ++hd) merged = ad::concat_cols(merged, head_out[hd]);
    x = ad::add(x, ad::add_bias(ad::matmul(merged, tape.param(b.proj_w)), tape.param(b.proj_b)));

    ad::Var h2 = ad::layer_norm_rows(x, tape.param(b.ln2_g), tape.param(b.ln2_b));
    ad::Var mlp = ad::gelu(ad::add_bias(ad::matmul(h2, tape.param(b.fc_w)), tape.param(b.fc_b)));
    x = ad::add(x, ad::add_bias(ad::matmul(mlp, tape.param(b.fc2_w)), tape.param(b.fc2_b)));
  }
  ad::Var hf = ad::layer_norm_rows(x, tape.param(lnf_g_), tape.param(lnf_b_));
  return ad::add_bias(ad::matmul(hf, tape.param(out_w_)), tape.param(out_b_));
}

std::vector<ad::Parameter*> LanguageModel::parameters() {
  std::vector<ad::Parameter*> out{&tok_emb_, &pos_emb_};
  for (Block& b : blocks_) {
    for (ad::Parameter* p : {&b.ln1_g, &b.ln1_b, &b.qkv_w, &b.qkv_b, &b.proj_w, &b.proj_b, &b.ln2_g, &b.ln2_b,
                             &b.fc_w, &b.fc_b, &b.fc2_w, &b.fc2_b}) {
      out.push_back(p);
    }
  }
  for (ad::Parameter* p : {&lnf_g_, &lnf_b_, &out_w_, &out_b_}) out.push_back(p);
  return out;
}

std::vector<const ad::Parameter*> LanguageModel::parameters() const {
  auto mut = const_cast<LanguageModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

namespace {

std::size_t find_single_marker(std::span<const int> tokens) {
  std::size_t pos = tokens.size();
  int count = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == Tokenizer::kSpeech) {
      pos = i;
      ++count;
    }
  }
  if (count != 1) {
    throw std::invalid_argument(fmt::format("splice_speech: prompt must contain exactly one <speech> marker, found {}", count));
  }
  return pos;
}

}  // namespace

ad::Var splice_speech(std::span<const int> prompt_tokens, ad::Var fused, ad::Var embed_table) {
  const std::size_t pos = find_single_marker(prompt_tokens);
  if (fused.cols() != embed_table.cols()) throw std::invalid_argument("splice_speech: fused width != embedding width");
  std::vector<ad::Var> parts;
  if (pos > 0) parts.push_back(ad::gather_rows(embed_table, prompt_tokens.subspan(0, pos)));
  parts.push_back(fused);
  if (pos + 1 < prompt_tokens.size()) parts.push_back(ad::gather_rows(embed_table, prompt_tokens.subspan(pos + 1)));
  return parts.size() == 1 ? fused : ad::concat_rows(parts);
}

Matrix splice_speech(std::span<const int> prompt_tokens, const FusedEmbeddingSequence& fused, const Matrix& embed_table) {
  ad::Tape tape(false);
  return splice_speech(prompt_tokens, tape.constant_ref(fused.frames), tape.constant_ref(embed_table)).value();
}

Matrix lm_forward(LanguageModel& lm, const Matrix& input) {
  ad::Tape tape(false);
  ad::Var probs = ad::softmax_rows(lm.forward_logits(tape, tape.constant_ref(input)));
  return probs.value();
}

ad::Var sequence_nll(ad::Tape& tape, LanguageModel& lm, ad::Var context, std::span<const int> target) {
  if (target.empty()) throw std::invalid_argument("sequence_nll: empty target");
  if (context.rows() < 1) throw std::invalid_argument("sequence_nll: empty context");
  const int vocab = lm.config().vocab_size;
  for (int y : target) {
    if (y < 0 || y >= vocab) throw std::out_of_range(fmt::format("sequence_nll: target token {} outside vocab {}", y, vocab));
  }
  ad::Var input = context;
  if (target.size() > 1) {
    std::vector<ad::Var> parts{context, ad::gather_rows(lm.embed_table(tape), target.first(target.size() - 1))};
    input = ad::concat_rows(parts);
  }
  ad::Var logits = lm.forward_logits(tape, input);
  ad::Var predicting = ad::slice_rows(logits, context.rows() - 1, static_cast<Eigen::Index>(target.size()));
  return ad::softmax_cross_entropy_rows(predicting, target);
}

double sequence_nll(LanguageModel& lm, const Matrix& context, std::span<const int> target) {
  ad::Tape tape(false);
  return sequence_nll(tape, lm, tape.constant_ref(context), target).scalar();
}

namespace {

Matrix teacher_forced_input(LanguageModel& lm, const Matrix& context, std::span<const int> target) {
  if (target.size() <= 1) return context;
  const Matrix& table = lm.parameters().front()->value;
  Matrix input(context.rows() + static_cast<Eigen::Index>(target.size()) - 1, context.cols());
  input.topRows(context.rows()) = context;
  for (std::size_t j = 0; j + 1 < target.size(); ++j) input.row(context.rows() + static_cast<Eigen::Index>(j)) = table.row(target[j]);
  return input;
}

// Chooses the next token from a logits row; returns the chosen id.
using Picker = std::function<Eigen::Index(const RowVector& logits)>;

GenerationResult decode_loop(LanguageModel& lm, const Matrix& context, int max_new, const Tokenizer* tokenizer,
                             const Picker& pick) {
  if (max_new < 1) throw std::invalid_argument("generate: max_new must be >= 1");
  GenerationResult out;
  const Matrix& table = lm.parameters().front()->value;
  Matrix seq = context;
  std::vector<int> text_ids;
  for (int step = 0; step < max_new; ++step) {
    if (seq.rows() > lm.config().max_positions) break;
    ad::Tape tape(false);
    const Matrix logits = lm.forward_logits(tape, tape.constant_ref(seq)).value();
    const RowVector last = logits.row(logits.rows() - 1);
    const Eigen::Index chosen = pick(last);
    const double mx = last.maxCoeff();
    const double lse = mx + std::log((last.array() - mx).exp().sum());
    out.token_ids.push_back(static_cast<int>(chosen));
    out.per_step_logprob.push_back(std::min(0.0, last(chosen) - lse));
    if (chosen == Tokenizer::kEos) break;
    text_ids.push_back(static_cast<int>(chosen));
    seq.conservativeResize(seq.rows() + 1, Eigen::NoChange);
    seq.row(seq.rows() - 1) = table.row(chosen);
  }
  if (tokenizer != nullptr) out.text = tokenizer->decode(text_ids);
  return out;
}

}  // namespace

ad::Var teacher_kl(ad::Tape& tape, LanguageModel& lm, ad::Var student_context, const Matrix& teacher_context,
                   std::span<const int> target) {
  if (target.empty()) throw std::invalid_argument("teacher_kl: empty target");
  const auto n = static_cast<Eigen::Index>(target.size());
  ad::Tape frozen(false);
  const Matrix teacher_input = teacher_forced_input(lm, teacher_context, target);
  const Matrix teacher_logits =
      lm.forward_logits(frozen, frozen.constant_ref(teacher_input)).value().middleRows(teacher_context.rows() - 1, n);
  Matrix teacher_probs = teacher_logits;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = teacher_logits.row(i).maxCoeff();
    teacher_probs.row(i) = (teacher_logits.row(i).array() - mx).exp();
    teacher_probs.row(i) /= teacher_probs.row(i).sum();
  }
  ad::Var input = student_context;
  if (n > 1) {
    std::vector<ad::Var> parts{student_context, ad::gather_rows(lm.embed_table(tape), target.first(target.size() - 1))};
    input = ad::concat_rows(parts);
  }
  ad::Var logits = ad::slice_rows(lm.forward_logits(tape, input), student_context.rows() - 1, n);
  return ad::kl_divergence_rows(logits, teacher_probs);
}

GenerationResult generate(LanguageModel& lm, const Matrix& context, int max_new, const Tokenizer* tokenizer) {
  return decode_loop(lm, context, max_new, tokenizer, [](const RowVector& logits) {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    return best;
  });
}

GenerationResult sample(LanguageModel& lm, const Matrix& context, int max_new, const SamplingOptions& options,
                        const Tokenizer* tokenizer) {
  if (!(options.temperature > 0.0)) throw std::invalid_argument("sample: temperature must be > 0");
  Rng rng(options.seed);
  return decode_loop(lm, context, max_new, tokenizer, [&](const RowVector& logits) {
    const double mx = logits.maxCoeff();
    const Eigen::ArrayXd w = ((logits.array() - mx) / options.temperature).exp().transpose();
    double u = rng.uniform() * w.sum();
    for (Eigen::Index v = 0; v < w.size(); ++v) {
      u -= w(v);
      if (u <= 0.0) return v;
    }
    return w.size() - 1;
  });
}

}  // namespace renuance
