// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Expected-response generation and joint optimization of the speech encoder,
// adapter, language model and auxiliary heads.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "renuance/adapter.h"
#include "renuance/config.h"
#include "renuance/emotion_heads.h"
#include "renuance/encoders.h"
#include "renuance/lm.h"
#include "renuance/manifest.h"
#include "renuance/prompts.h"
#include "renuance/tokenizer.h"

namespace renuance {

// ---------------------------------------------------------------------------
// Modes

enum class TrainMode { kReLlm, kNoDimAux, kNoEmoEnc, kSpeechBaseline, kTextOnly, kTextPlusLabel };

std::string_view train_mode_name(TrainMode mode);
TrainMode parse_train_mode(std::string_view s);

struct ModeTraits {
  bool speech = true;   // fused speech embeddings are spliced into the prompt
  bool emotion = true;  // frozen emotion frames are concatenated to speech frames
  bool ce = true;
  bool mse = true;
};

ModeTraits mode_traits(TrainMode mode);

// ---------------------------------------------------------------------------
// Paired set

struct PairedSample {
  std::string utt_id;
  std::string audio;  // resolved waveform path
  std::string transcript;
  std::optional<Emotion> emotion_cat;
  std::optional<Vad> vad;
  std::string expected_response;

  bool operator==(const PairedSample&) const = default;
};

// JSONL {utt_id, transcript, emotion_cat, vad, expected_response, audio}.
// Audio paths are stored relative to the file's directory when possible.
void write_paired_set(const std::filesystem::path& path, std::span<const PairedSample> samples);
std::vector<PairedSample> load_paired_set(const std::filesystem::path& path);

class ResponseGenerator {
 public:
  virtual ~ResponseGenerator() = default;
  // `prompt` is the fully rendered step-1 prompt; `slots` holds its inputs.
  virtual std::string complete(const std::string& prompt, const PromptSlots& slots) = 0;
};

inline constexpr std::string_view kDefaultFixtureTemplate = "<transcript> That sounds <emo>, can you tell me more?";

// Deterministic stand-in: renders its own template from the prompt slots.
class FixtureResponseGenerator final : public ResponseGenerator {
 public:
  explicit FixtureResponseGenerator(std::string tmpl = std::string(kDefaultFixtureTemplate));
  std::string complete(const std::string& prompt, const PromptSlots& slots) override;

 private:
  std::string template_;
};

// POST {"prompt": ...} -> {"response": ...}.
class ExternalResponseGenerator final : public ResponseGenerator {
 public:
  explicit ExternalResponseGenerator(std::string url);
  std::string complete(const std::string& prompt, const PromptSlots& slots) override;

 private:
  std::string url_;
};

struct ExpectedResponseReport {
  std::vector<PairedSample> samples;
  std::vector<std::string> skipped;  // utt_ids
};

// Records without transcript or emotion are skipped; a generator exception
// skips the record; an empty completion is retried once.
ExpectedResponseReport generate_expected_responses(const DatasetManifest& manifest, ResponseGenerator& generator);

// ---------------------------------------------------------------------------
// Configuration

struct ModelConfig {
  SpeechEncoderConfig speech;
  EmotionEncoderConfig emotion;
  EmotionAlignment emotion_alignment = EmotionAlignment::kFramewise;
  // in_dim and out_dim are derived from the other components.
  AdapterConfig adapter;
  LMConfig lm;
  int vocab_limit = 4096;
  std::uint64_t seed = 17;

  KeyValueConfig to_kv() const;
  static ModelConfig from_kv(const KeyValueConfig& kv);
};

struct TrainConfig {
  TrainMode mode = TrainMode::kReLlm;
  double step_size = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double grad_clip_norm = 1.0;
  int batch_size = 4;
  int max_steps = 2000;
  int log_interval = 10;
  std::uint64_t seed = 0;
  // Distill from the text-prompted model instead of the teacher-forced NLL.
  bool teacher_kl = false;

  void validate() const;
  KeyValueConfig to_kv() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
};

struct LossBreakdown {
  double l_kl = 0.0;
  double l_ce = 0.0;
  double l_mse = 0.0;
  double total = 0.0;

  std::string to_string() const;
};

// ---------------------------------------------------------------------------
// Model bundle

class ReLlmModel {
 public:
  ReLlmModel(const ModelConfig& config, TrainMode mode, Tokenizer tokenizer,
             std::shared_ptr<const EmotionBackend> emotion = nullptr);
  ReLlmModel(const ReLlmModel&) = delete;
  ReLlmModel& operator=(const ReLlmModel&) = delete;

  const ModelConfig& config() const { return config_; }
  TrainMode mode() const { return mode_; }
  ModeTraits traits() const { return mode_traits(mode_); }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const EmotionBackend& emotion_encoder() const { return *emotion_; }

  SpeechEncoder& speech() { return speech_; }
  ModalityAdapter& adapter() { return adapter_; }
  LanguageModel& lm() { return lm_; }
  EmotionHeads& heads() { return heads_; }

  // theta_s, theta_adpt, theta_LM and head parameters; never the emotion encoder.
  std::vector<ad::Parameter*> parameters();
  std::vector<const ad::Parameter*> parameters() const;

  // Speech frames with emotion frames resampled onto them (when the mode uses them).
  EmbeddingSequence fusion_input(const Waveform& wave) const;
  FusedEmbeddingSequence fuse(const Waveform& wave);
  // Prompt embeddings with the fused sequence at the <speech> marker.
  Matrix speech_context(const PromptTemplate& prompt, const FusedEmbeddingSequence& fused);
  // Prompt embeddings with text in place of the marker (text-only modes).
  Matrix text_context(const PromptTemplate& prompt, const std::string& text);

  // Step-2 continuation for one utterance under this model's mode.
  GenerationResult respond(const Waveform& wave, const std::string& transcript, std::optional<Emotion> label,
                           int max_new);

  void save(const std::filesystem::path& path, const TrainConfig& train_config) const;
  static std::unique_ptr<ReLlmModel> load(const std::filesystem::path& path,
                                          std::shared_ptr<const EmotionBackend> emotion = nullptr);

 private:
  ModelConfig config_;
  TrainMode mode_;
  Tokenizer tokenizer_;
  std::shared_ptr<const EmotionBackend> emotion_;
  SpeechEncoder speech_;
  ModalityAdapter adapter_;
  LanguageModel lm_;
  EmotionHeads heads_;
};

// Builds the tokenizer over prompts, transcripts and expected responses.
Tokenizer build_tokenizer(std::span<const PairedSample> samples, int vocab_limit);

// Text given to the model in place of speech by the text-only modes.
std::string text_mode_input(TrainMode mode, const std::string& transcript, std::optional<Emotion> label);

// ---------------------------------------------------------------------------
// Training

// Per-sample inputs that do not depend on trainable parameters.
struct PreparedSample {
  std::string utt_id;
  Matrix speech_features;       // T_raw x feature_dim
  Matrix emotion_frames;        // T_raw x D_emo, empty when unused
  std::vector<int> prompt_tokens;   // contains the <speech> marker in speech modes
  std::vector<int> teacher_tokens;  // text prompt, teacher-KL only
  std::vector<int> target;      // expected response + EOS
  int emotion_index = -1;
  std::optional<Vad> vad;
};

std::vector<PreparedSample> prepare_samples(std::span<const PairedSample> samples, ReLlmModel& model,
                                            const TrainConfig& config);

struct LossVars {
  ad::Var l_kl, l_ce, l_mse, total;
  LossBreakdown values;
};

// Records the batch loss on `tape`. Inactive terms are exactly 0 and absent from the graph.
LossVars record_total_loss(ad::Tape& tape, ReLlmModel& model, std::span<const PreparedSample* const> batch,
                           const TrainConfig& config);
LossBreakdown compute_total_loss(ReLlmModel& model, std::span<const PreparedSample* const> batch,
                                 const TrainConfig& config);

// Adaptive-moment optimizer over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<ad::Parameter*> params, double beta1, double beta2, double epsilon);
  void step(double step_size);
  int steps() const { return t_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<Matrix> m_, v_;
  double beta1_, beta2_, epsilon_;
  int t_ = 0;
};

// Rescales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm);

class Trainer {
 public:
  Trainer(ReLlmModel& model, std::vector<PreparedSample> samples, const TrainConfig& config);

  // One update on the next batch of the seeded epoch order.
  LossBreakdown step();
  // One update on an explicit batch.
  LossBreakdown train_step(std::span<const std::size_t> batch_indices);

  int steps_done() const { return step_; }
  const std::vector<PreparedSample>& samples() const { return samples_; }

 private:
  ReLlmModel& model_;
  std::vector<PreparedSample> samples_;
  TrainConfig config_;
  Adam optimizer_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  int step_ = 0;
};

struct TrainResult {
  std::vector<std::pair<int, LossBreakdown>> log;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
};

// Builds the tokenizer and model, runs max_steps updates and writes
// metrics.csv and checkpoint.bin into out_dir.
TrainResult train(const ModelConfig& model_config, const TrainConfig& config, std::span<const PairedSample> paired,
                  const std::filesystem::path& out_dir, std::shared_ptr<const EmotionBackend> emotion = nullptr);

// Same loop on an existing model; nothing is written.
std::vector<std::pair<int, LossBreakdown>> train_in_memory(ReLlmModel& model, const TrainConfig& config,
                                                           std::span<const PairedSample> paired);

std::string metrics_csv(std::span<const std::pair<int, LossBreakdown>> log);

}  // namespace renuance
