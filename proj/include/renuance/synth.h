// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic toy corpus: each word becomes a short tone whose pitch comes
// from a hash of the word, and the emotion shifts pitch and loudness.

#pragma once

#include <cstdint>
#include <filesystem>

#include "renuance/manifest.h"

namespace renuance {

struct SynthConfig {
  int per_emotion = 4;
  std::uint64_t seed = 7;
  Dataset dataset = Dataset::kSynthetic;
  int sample_rate = 16000;
  // Fraction of records tagged partition=train (MSP-P only).
  double train_partition = 0.75;
};

Waveform synthesize_utterance(const std::string& transcript, Emotion emotion, int sample_rate, std::uint64_t seed);

// Writes <dir>/audio/<utt_id>.wav for every record and <dir>/manifest.jsonl.
// ESD-style corpora speak each text once per emotion (group_key = text id);
// the others cycle group_key through sessions "1".."5".
DatasetManifest synthesize_corpus(const std::filesystem::path& dir, const SynthConfig& config);

}  // namespace renuance
