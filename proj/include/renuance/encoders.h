// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// The two embedding streams fed to the modality adapter: a trainable speech
// encoder and a frozen emotion encoder with a pooled valence/arousal/dominance
// head.

#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "renuance/audio.h"
#include "renuance/autodiff.h"
#include "renuance/common.h"

namespace renuance {

// Time-major T x D sequence; T >= 1, all entries finite.
struct EmbeddingSequence {
  Matrix frames;
  double frame_rate_hint = 0.0;

  Eigen::Index length() const { return frames.rows(); }
  Eigen::Index width() const { return frames.cols(); }
  void validate() const;
};

// Nearest-floor resampling: output frame i is input frame floor(i*T/target_len).
EmbeddingSequence resample_frames(const EmbeddingSequence& seq, int target_len);
// Row-index form of the same rule, shared with the training path.
std::vector<int> resample_indices(int source_len, int target_len);

// How the emotion stream is put on the speech stream's time axis.
enum class EmotionAlignment { kFramewise, kPooled };

std::string_view emotion_alignment_name(EmotionAlignment a);
EmotionAlignment parse_emotion_alignment(std::string_view s);

// kFramewise: resample_frames. kPooled: the frame mean repeated target_len times.
EmbeddingSequence align_emotion(const EmbeddingSequence& seq, int target_len, EmotionAlignment alignment);

struct SpeechEncoderConfig {
  FrontEndConfig features;
  int layers = 2;
  int hidden_dim = 32;
  bool trainable = true;
};

// Position-wise GELU MLP over front-end features. Holds theta_s.
class SpeechEncoder {
 public:
  SpeechEncoder(const SpeechEncoderConfig& config, std::uint64_t seed);
  SpeechEncoder(const SpeechEncoder&) = delete;
  SpeechEncoder& operator=(const SpeechEncoder&) = delete;

  const SpeechEncoderConfig& config() const { return config_; }

  ad::Var forward(ad::Tape& tape, const Matrix& features);
  EmbeddingSequence encode(const Waveform& audio);

  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

 private:
  SpeechEncoderConfig config_;
  std::vector<ad::Parameter> weights_;
  std::vector<ad::Parameter> biases_;
};

EmbeddingSequence encode_speech(const Waveform& audio, SpeechEncoder& encoder);

struct EmotionEncoderConfig {
  FrontEndConfig features{FeatureKind::kLogMel, 16000, 640, 320, 40, true};
  int conv_kernel = 3;
  int emb_dim = 16;
  std::uint64_t seed = 1234;
};

struct EmotionEncoding {
  EmbeddingSequence frames;
  Vad vad;
};

// Any source of frozen emotion embeddings.
class EmotionBackend {
 public:
  virtual ~EmotionBackend() = default;
  virtual EmotionEncoding encode(const Waveform& audio) const = 0;
  virtual EmotionEncoding encode_file(const std::filesystem::path& path) const;
  virtual int emb_dim() const = 0;
  virtual std::string checksum() const = 0;
};

// Fixed-seed conv + dense stack. Weights never change after construction.
class EmotionEncoder final : public EmotionBackend {
 public:
  explicit EmotionEncoder(const EmotionEncoderConfig& config);

  EmotionEncoding encode(const Waveform& audio) const override;
  int emb_dim() const override { return config_.emb_dim; }
  // SHA-256 over every weight byte in a fixed order.
  std::string checksum() const override;
  const EmotionEncoderConfig& config() const { return config_; }

  // Weight file: JSON header line with config and checksum, then raw doubles.
  void save(const std::filesystem::path& path) const;
  static EmotionEncoder load(const std::filesystem::path& path);

 private:
  EmotionEncoder(const EmotionEncoderConfig& config, std::vector<Matrix> weights);
  EmotionEncoding run(const Matrix& features) const;

  EmotionEncoderConfig config_;
  // conv_w, conv_b, proj_w, proj_b, vad_w, vad_b
  std::vector<Matrix> weights_;
};

// HTTP backend: POST {"audio_path": ...} -> {"frames": [[...]], "vad": [v, a, d]}.
class ExternalEmotionEncoder final : public EmotionBackend {
 public:
  ExternalEmotionEncoder(std::string url, int emb_dim);

  EmotionEncoding encode(const Waveform& audio) const override;
  EmotionEncoding encode_file(const std::filesystem::path& path) const override;
  int emb_dim() const override { return emb_dim_; }
  std::string checksum() const override { return "external:" + url_; }

 private:
  std::string url_;
  int emb_dim_;
};

}  // namespace renuance
