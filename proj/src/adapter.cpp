// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/adapter.h"

#include <stdexcept>

#include <fmt/format.h>

#include "renuance/checkpoint.h"
#include "renuance/common.h"

namespace renuance {

void AdapterConfig::validate() const {
  if (in_dim < 1 || n_conv_layers < 1 || kernel < 1 || stride < 1 || padding < 0 || bottleneck_dim < 1 || out_dim < 1) {
    throw std::invalid_argument("adapter config: all dimensions must be >= 1");
  }
}

EmbeddingSequence concat_embeddings(const EmbeddingSequence& raw, const EmbeddingSequence& emo) {
  if (emo.width() == 0) return raw;
  if (raw.length() != emo.length()) {
    throw std::invalid_argument(fmt::format(
        "concat_embeddings: length mismatch ({} vs {}); align the emotion stream with resample_frames first",
        raw.length(), emo.length()));
  }
  EmbeddingSequence out;
  out.frames.resize(raw.length(), raw.width() + emo.width());
  out.frames.leftCols(raw.width()) = raw.frames;
  out.frames.rightCols(emo.width()) = emo.frames;
  out.frame_rate_hint = raw.frame_rate_hint;
  return out;
}

int adapter_output_length(int input_len, const AdapterConfig& config) {
  if (input_len < 1) throw std::invalid_argument("adapter_output_length: input length must be >= 1");
  int len = input_len;
  for (int l = 0; l < config.n_conv_layers; ++l) {
    const int span = len + 2 * config.padding - config.kernel;
    if (span < 0) throw std::invalid_argument("input too short for adapter");
    len = span / config.stride + 1;
  }
  return len;
}

int adapter_min_input_length(const AdapterConfig& config) {
  int n = 1;
  for (int l = 0; l < config.n_conv_layers; ++l) n *= config.stride;
  return n;
}

ModalityAdapter::ModalityAdapter(const AdapterConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  Rng rng(seed);
  int in = config.in_dim;
  const int m = config.out_dim;
  for (int l = 0; l < config.n_conv_layers; ++l) {
    const int fan_in = config.kernel * in;
    conv_w_.emplace_back(fmt::format("adapter.conv{}.w", l), init_fan_in(fan_in, m, fan_in, rng));
    conv_b_.emplace_back(fmt::format("adapter.conv{}.b", l), Matrix::Zero(1, m));
    in = m;
  }
  down_w_ = ad::Parameter("adapter.bottleneck.down.w", init_fan_in(m, config.bottleneck_dim, m, rng));
  down_b_ = ad::Parameter("adapter.bottleneck.down.b", Matrix::Zero(1, config.bottleneck_dim));
  up_w_ = ad::Parameter("adapter.bottleneck.up.w", init_fan_in(config.bottleneck_dim, m, config.bottleneck_dim, rng));
  up_b_ = ad::Parameter("adapter.bottleneck.up.b", Matrix::Zero(1, m));
}

ad::Var ModalityAdapter::forward(ad::Tape& tape, ad::Var seq) {
  if (seq.cols() != config_.in_dim) {
    throw std::invalid_argument(fmt::format("adapter: input width {} does not match in_dim {}", seq.cols(), config_.in_dim));
  }
  adapter_output_length(static_cast<int>(seq.rows()), config_);
  const int min_len = adapter_min_input_length(config_);
  if (seq.rows() < min_len) {
    throw std::invalid_argument(fmt::format("input too short for adapter: {} frames, need at least {}", seq.rows(), min_len));
  }
  if (!all_finite(seq.value())) throw ValidationError("adapter: NaN in input");

  ad::Var h = seq;
  for (int l = 0; l < config_.n_conv_layers; ++l) {
    ad::Var cols = ad::unfold_1d(h, config_.kernel, config_.stride, config_.padding);
    h = ad::add_bias(ad::matmul(cols, tape.param(conv_w_[l])), tape.param(conv_b_[l]));
    if (l + 1 < config_.n_conv_layers) h = ad::gelu(h);
  }
  ad::Var inner = ad::gelu(ad::add_bias(ad::matmul(h, tape.param(down_w_)), tape.param(down_b_)));
  ad::Var outer = ad::add_bias(ad::matmul(inner, tape.param(up_w_)), tape.param(up_b_));
  return ad::add(h, outer);
}

FusedEmbeddingSequence ModalityAdapter::adapt(const EmbeddingSequence& seq) {
  ad::Tape tape(false);
  FusedEmbeddingSequence out;
  out.frames = forward(tape, tape.constant_ref(seq.frames)).value();
  return out;
}

std::vector<ad::Parameter*> ModalityAdapter::parameters() {
  std::vector<ad::Parameter*> out;
  for (std::size_t l = 0; l < conv_w_.size(); ++l) {
    out.push_back(&conv_w_[l]);
    out.push_back(&conv_b_[l]);
  }
  for (ad::Parameter* p : {&down_w_, &down_b_, &up_w_, &up_b_}) out.push_back(p);
  return out;
}

std::vector<const ad::Parameter*> ModalityAdapter::parameters() const {
  auto mut = const_cast<ModalityAdapter*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

void ModalityAdapter::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["format"] = "renuance-adapter";
  header["version"] = 1;
  header["config"] = {{"in_dim", config_.in_dim},         {"n_conv_layers", config_.n_conv_layers},
                      {"kernel", config_.kernel},         {"stride", config_.stride},
                      {"padding", config_.padding},       {"bottleneck_dim", config_.bottleneck_dim},
                      {"out_dim", config_.out_dim}};
  const auto params = parameters();
  write_checkpoint(path, header, params);
}

void ModalityAdapter::load(const std::filesystem::path& path) {
  const CheckpointData data = read_checkpoint(path);
  if (data.header.value("format", "") != "renuance-adapter") throw ValidationError("not an adapter checkpoint: " + path.string());
  const auto& c = data.header.at("config");
  AdapterConfig stored{c.at("in_dim").get<int>(),  c.at("n_conv_layers").get<int>(), c.at("kernel").get<int>(),
                       c.at("stride").get<int>(),  c.at("padding").get<int>(),       c.at("bottleneck_dim").get<int>(),
                       c.at("out_dim").get<int>()};
  if (stored.in_dim != config_.in_dim || stored.n_conv_layers != config_.n_conv_layers || stored.kernel != config_.kernel ||
      stored.stride != config_.stride || stored.padding != config_.padding ||
      stored.bottleneck_dim != config_.bottleneck_dim || stored.out_dim != config_.out_dim) {
    throw ValidationError("adapter checkpoint config differs from this adapter: " + path.string());
  }
  auto params = parameters();
  assign_sections(data, params);
}

FusedEmbeddingSequence adapt(const EmbeddingSequence& seq, ModalityAdapter& adapter) { return adapter.adapt(seq); }

}  // namespace renuance
