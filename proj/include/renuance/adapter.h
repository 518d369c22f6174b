// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stream fusion and the modality adapter: a strided 1-D conv stack followed by
// a position-wise residual bottleneck feedforward.

#pragma once

#include <filesystem>
#include <vector>

#include "renuance/autodiff.h"
#include "renuance/encoders.h"

namespace renuance {

struct AdapterConfig {
  int in_dim = 48;  // D_raw + D_emo
  int n_conv_layers = 3;
  int kernel = 5;
  int stride = 2;
  int padding = 2;
  int bottleneck_dim = 512;
  int out_dim = 32;  // LM embedding width

  void validate() const;
};

// T_f x M adapter output.
struct FusedEmbeddingSequence {
  Matrix frames;
  Eigen::Index length() const { return frames.rows(); }
};

// Channel order [raw | emo]; lengths must already agree.
EmbeddingSequence concat_embeddings(const EmbeddingSequence& raw, const EmbeddingSequence& emo);

// floor((L + 2*padding - kernel)/stride) + 1, applied n_conv_layers times.
int adapter_output_length(int input_len, const AdapterConfig& config);
// stride^n_conv_layers; shorter inputs are rejected instead of padded.
int adapter_min_input_length(const AdapterConfig& config);

class ModalityAdapter {
 public:
  ModalityAdapter(const AdapterConfig& config, std::uint64_t seed);
  ModalityAdapter(const ModalityAdapter&) = delete;
  ModalityAdapter& operator=(const ModalityAdapter&) = delete;

  const AdapterConfig& config() const { return config_; }

  ad::Var forward(ad::Tape& tape, ad::Var seq);
  FusedEmbeddingSequence adapt(const EmbeddingSequence& seq);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  // Adapter-only checkpoint: JSON header with every AdapterConfig field and a
  // payload checksum, followed by the raw parameter bytes.
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  AdapterConfig config_;
  std::vector<ad::Parameter> conv_w_;
  std::vector<ad::Parameter> conv_b_;
  ad::Parameter down_w_, down_b_, up_w_, up_b_;
};

FusedEmbeddingSequence adapt(const EmbeddingSequence& seq, ModalityAdapter& adapter);

}  // namespace renuance
