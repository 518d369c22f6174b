// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Mono waveform I/O and the fixed (non-trainable) feature front end.

#pragma once

#include <filesystem>
#include <vector>

#include "renuance/autodiff.h"

namespace renuance {

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  int sample_rate = 16000;

  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Reads RIFF/WAVE mono PCM16 or IEEE float32. Multi-channel input is rejected.
Waveform read_wav(const std::filesystem::path& path);
// Writes mono PCM16, clipping to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave);

enum class FeatureKind { kLogMel, kRawWave };

struct FrontEndConfig {
  FeatureKind kind = FeatureKind::kLogMel;
  int sample_rate = 16000;
  int n_fft = 400;
  int hop = 160;
  int n_mels = 80;
  // Per-utterance mean/variance normalization of log-mel channels.
  bool normalize = true;

  // Width of one feature row.
  int feature_dim() const { return kind == FeatureKind::kLogMel ? n_mels : hop; }
  // Frame count is a pure function of the sample count.
  int frame_count(std::size_t n_samples) const;
};

// T x feature_dim matrix. Log-mel uses a Hann window and HTK mel filters;
// raw-wave slices the signal into hop-sized frames, zero-padding the tail.
Matrix extract_features(const Waveform& wave, const FrontEndConfig& config);

}  // namespace renuance
