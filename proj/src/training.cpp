// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/training.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "renuance/checkpoint.h"
#include "renuance/http_client.h"

namespace renuance {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kCheckpointFormat = "renuance-model-v1";

std::string feature_kind_name(FeatureKind k) { return k == FeatureKind::kLogMel ? "logmel" : "raw"; }

FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "logmel") return FeatureKind::kLogMel;
  if (s == "raw") return FeatureKind::kRawWave;
  throw ValidationError(fmt::format("config: unknown feature kind '{}'", s));
}

std::string format_double(double x) { return fmt::format("{}", x); }

// Adapter widths follow from the speech encoder, the emotion stream and the LM.
AdapterConfig derived_adapter(const ModelConfig& c, TrainMode mode, int emo_dim) {
  AdapterConfig a = c.adapter;
  a.in_dim = c.speech.hidden_dim + (mode_traits(mode).emotion ? emo_dim : 0);
  a.out_dim = c.lm.model_dim;
  return a;
}

LMConfig derived_lm(const ModelConfig& c, const Tokenizer& tok) {
  LMConfig l = c.lm;
  l.vocab_size = tok.vocab_size();
  return l;
}

std::shared_ptr<const EmotionBackend> default_emotion(const ModelConfig& c, std::shared_ptr<const EmotionBackend> given) {
  if (given) return given;
  return std::make_shared<EmotionEncoder>(c.emotion);
}

std::string rendered_step2() { return render_prompt(continuation_step2(), {}); }

std::string replace_marker(std::string text, const std::string& with) {
  const auto pos = text.find(Tokenizer::kSpeechMarker);
  if (pos == std::string::npos) throw std::invalid_argument("prompt has no <speech> marker");
  text.replace(pos, Tokenizer::kSpeechMarker.size(), with);
  return text;
}

Matrix gather_embeddings(const Matrix& table, std::span<const int> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = table.row(ids[i]);
  return out;
}

ad::Var fold_sum(std::span<const ad::Var> terms) {
  ad::Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
  return total;
}

}  // namespace

// ---------------------------------------------------------------------------
// Modes

std::string_view train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::kReLlm: return "re_llm";
    case TrainMode::kNoDimAux: return "no_dim_aux";
    case TrainMode::kNoEmoEnc: return "no_emo_enc";
    case TrainMode::kSpeechBaseline: return "speech_baseline";
    case TrainMode::kTextOnly: return "text_only";
    case TrainMode::kTextPlusLabel: return "text_plus_label";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view s) {
  for (TrainMode m : {TrainMode::kReLlm, TrainMode::kNoDimAux, TrainMode::kNoEmoEnc, TrainMode::kSpeechBaseline,
                      TrainMode::kTextOnly, TrainMode::kTextPlusLabel}) {
    if (train_mode_name(m) == s) return m;
  }
  throw ValidationError(fmt::format("unknown training mode '{}'", s));
}

ModeTraits mode_traits(TrainMode mode) {
  switch (mode) {
    case TrainMode::kReLlm: return {true, true, true, true};
    case TrainMode::kNoDimAux: return {true, true, true, false};
    case TrainMode::kNoEmoEnc: return {true, false, true, true};
    case TrainMode::kSpeechBaseline: return {true, false, false, false};
    case TrainMode::kTextOnly:
    case TrainMode::kTextPlusLabel: return {false, false, false, false};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Paired set

void write_paired_set(const std::filesystem::path& path, std::span<const PairedSample> samples) {
  const auto base = std::filesystem::absolute(path).parent_path();
  std::string out;
  for (const auto& s : samples) {
    ojson j;
    j["utt_id"] = s.utt_id;
    j["transcript"] = s.transcript;
    j["emotion_cat"] = s.emotion_cat ? ojson(emotion_name(*s.emotion_cat)) : ojson(nullptr);
    j["vad"] = s.vad ? ojson::array({s.vad->valence, s.vad->arousal, s.vad->dominance}) : ojson(nullptr);
    j["expected_response"] = s.expected_response;
    std::string audio = s.audio;
    if (!audio.empty()) {
      const auto rel = std::filesystem::absolute(audio).lexically_relative(base);
      if (!rel.empty()) audio = rel.generic_string();
    }
    j["audio"] = audio;
    out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  }
  write_file(path, out);
}

std::vector<PairedSample> load_paired_set(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError(fmt::format("paired set not found: {}", path.string()));
  const auto base = path.parent_path();
  std::istringstream in(read_file(path));
  std::vector<PairedSample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(fmt::format("{} line {}: malformed JSON: {}", path.filename().string(), line_no, e.what()));
    }
    PairedSample s;
    try {
      s.utt_id = j.at("utt_id").get<std::string>();
      s.transcript = j.value("transcript", "");
      s.expected_response = j.at("expected_response").get<std::string>();
      if (j.contains("emotion_cat") && !j["emotion_cat"].is_null()) {
        s.emotion_cat = parse_emotion(j["emotion_cat"].get<std::string>());
        if (!s.emotion_cat) throw ValidationError("unknown emotion_cat");
      }
      if (j.contains("vad") && !j["vad"].is_null()) {
        const auto& v = j["vad"];
        if (!v.is_array() || v.size() != 3) throw ValidationError("vad must have 3 entries");
        s.vad = Vad{v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
        if (!s.vad->in_unit_cube()) throw ValidationError("vad outside [0,1]");
      }
      const std::string audio = j.value("audio", "");
      if (!audio.empty()) {
        const std::filesystem::path p(audio);
        s.audio = (p.is_absolute() ? p : base / p).string();
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{} line {}: {}", path.filename().string(), line_no, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("{} line {}: {}", path.filename().string(), line_no, e.what()));
    }
    if (s.expected_response.empty()) {
      throw ValidationError(fmt::format("{}: empty expected_response", s.utt_id));
    }
    out.push_back(std::move(s));
  }
  return out;
}

FixtureResponseGenerator::FixtureResponseGenerator(std::string tmpl) : template_(std::move(tmpl)) {}

std::string FixtureResponseGenerator::complete(const std::string&, const PromptSlots& slots) {
  return render_prompt(std::string_view(template_), slots);
}

ExternalResponseGenerator::ExternalResponseGenerator(std::string url) : url_(std::move(url)) {}

std::string ExternalResponseGenerator::complete(const std::string& prompt, const PromptSlots&) {
  const nlohmann::json reply = post_json(url_, {{"prompt", prompt}});
  if (!reply.contains("response") || !reply["response"].is_string()) {
    throw std::runtime_error("response generator reply lacks a 'response' string");
  }
  return reply["response"].get<std::string>();
}

ExpectedResponseReport generate_expected_responses(const DatasetManifest& manifest, ResponseGenerator& generator) {
  ExpectedResponseReport report;
  if (manifest.empty()) spdlog::warn("generate_expected_responses: empty manifest, paired set is empty");
  for (const auto& r : manifest.records) {
    if (!r.emotion_cat || r.transcript.empty()) {
      spdlog::warn("{}: skipped, needs transcript and emotion_cat", r.utt_id);
      report.skipped.push_back(r.utt_id);
      continue;
    }
    const PromptSlots slots{{"emo", std::string(emotion_name(*r.emotion_cat))}, {"transcript", r.transcript}};
    const std::string prompt = render_prompt(continuation_step1(), slots);
    std::string response;
    try {
      response = generator.complete(prompt, slots);
      if (response.empty()) response = generator.complete(prompt, slots);
    } catch (const std::exception& e) {
      spdlog::warn("{}: generator failed: {}", r.utt_id, e.what());
      report.skipped.push_back(r.utt_id);
      continue;
    }
    if (response.empty()) {
      spdlog::warn("{}: generator returned an empty continuation twice", r.utt_id);
      report.skipped.push_back(r.utt_id);
      continue;
    }
    report.samples.push_back(
        PairedSample{r.utt_id, manifest.resolve_audio(r).string(), r.transcript, r.emotion_cat, r.vad, response});
  }
  return report;
}

// ---------------------------------------------------------------------------
// Configuration

KeyValueConfig ModelConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("speech.features", feature_kind_name(speech.features.kind));
  kv.set("speech.n_fft", std::to_string(speech.features.n_fft));
  kv.set("speech.hop", std::to_string(speech.features.hop));
  kv.set("speech.n_mels", std::to_string(speech.features.n_mels));
  kv.set("speech.layers", std::to_string(speech.layers));
  kv.set("speech.hidden_dim", std::to_string(speech.hidden_dim));
  kv.set("emotion.emb_dim", std::to_string(emotion.emb_dim));
  kv.set("emotion.seed", std::to_string(emotion.seed));
  kv.set("emotion.alignment", std::string(emotion_alignment_name(emotion_alignment)));
  kv.set("adapter.n_conv_layers", std::to_string(adapter.n_conv_layers));
  kv.set("adapter.kernel", std::to_string(adapter.kernel));
  kv.set("adapter.stride", std::to_string(adapter.stride));
  kv.set("adapter.padding", std::to_string(adapter.padding));
  kv.set("adapter.bottleneck_dim", std::to_string(adapter.bottleneck_dim));
  kv.set("lm.layers", std::to_string(lm.layers));
  kv.set("lm.heads", std::to_string(lm.heads));
  kv.set("lm.model_dim", std::to_string(lm.model_dim));
  kv.set("lm.max_positions", std::to_string(lm.max_positions));
  kv.set("tokenizer.vocab_limit", std::to_string(vocab_limit));
  kv.set("model.seed", std::to_string(seed));
  return kv;
}

ModelConfig ModelConfig::from_kv(const KeyValueConfig& kv) {
  ModelConfig c;
  c.speech.features.kind = parse_feature_kind(kv.get("speech.features", feature_kind_name(c.speech.features.kind)));
  c.speech.features.n_fft = kv.get_int("speech.n_fft", c.speech.features.n_fft);
  c.speech.features.hop = kv.get_int("speech.hop", c.speech.features.hop);
  c.speech.features.n_mels = kv.get_int("speech.n_mels", c.speech.features.n_mels);
  c.speech.layers = kv.get_int("speech.layers", c.speech.layers);
  c.speech.hidden_dim = kv.get_int("speech.hidden_dim", c.speech.hidden_dim);
  c.emotion.emb_dim = kv.get_int("emotion.emb_dim", c.emotion.emb_dim);
  c.emotion.seed = kv.get_u64("emotion.seed", c.emotion.seed);
  c.emotion_alignment = parse_emotion_alignment(kv.get("emotion.alignment", "framewise"));
  c.adapter.n_conv_layers = kv.get_int("adapter.n_conv_layers", c.adapter.n_conv_layers);
  c.adapter.kernel = kv.get_int("adapter.kernel", c.adapter.kernel);
  c.adapter.stride = kv.get_int("adapter.stride", c.adapter.stride);
  c.adapter.padding = kv.get_int("adapter.padding", c.adapter.padding);
  c.adapter.bottleneck_dim = kv.get_int("adapter.bottleneck_dim", c.adapter.bottleneck_dim);
  c.lm.layers = kv.get_int("lm.layers", c.lm.layers);
  c.lm.heads = kv.get_int("lm.heads", c.lm.heads);
  c.lm.model_dim = kv.get_int("lm.model_dim", c.lm.model_dim);
  c.lm.max_positions = kv.get_int("lm.max_positions", c.lm.max_positions);
  c.vocab_limit = kv.get_int("tokenizer.vocab_limit", c.vocab_limit);
  c.seed = kv.get_u64("model.seed", c.seed);
  return c;
}

void TrainConfig::validate() const {
  if (!(step_size >= 0.0)) throw ValidationError("train.step_size must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("train betas must be in [0,1)");
  if (!(epsilon > 0.0)) throw ValidationError("train.epsilon must be > 0");
  if (!(grad_clip_norm > 0.0)) throw ValidationError("train.grad_clip_norm must be > 0");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (max_steps < 0) throw ValidationError("train.max_steps must be >= 0");
  if (log_interval < 1) throw ValidationError("train.log_interval must be >= 1");
  if (teacher_kl && !mode_traits(mode).speech) throw ValidationError("teacher_kl needs a speech mode");
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("train.mode", std::string(train_mode_name(mode)));
  kv.set("train.step_size", format_double(step_size));
  kv.set("train.beta1", format_double(beta1));
  kv.set("train.beta2", format_double(beta2));
  kv.set("train.epsilon", format_double(epsilon));
  kv.set("train.grad_clip_norm", format_double(grad_clip_norm));
  kv.set("train.batch_size", std::to_string(batch_size));
  kv.set("train.max_steps", std::to_string(max_steps));
  kv.set("train.log_interval", std::to_string(log_interval));
  kv.set("train.seed", std::to_string(seed));
  kv.set("train.teacher_kl", teacher_kl ? "true" : "false");
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  c.mode = parse_train_mode(kv.get("train.mode", std::string(train_mode_name(c.mode))));
  c.step_size = kv.get_double("train.step_size", c.step_size);
  c.beta1 = kv.get_double("train.beta1", c.beta1);
  c.beta2 = kv.get_double("train.beta2", c.beta2);
  c.epsilon = kv.get_double("train.epsilon", c.epsilon);
  c.grad_clip_norm = kv.get_double("train.grad_clip_norm", c.grad_clip_norm);
  c.batch_size = kv.get_int("train.batch_size", c.batch_size);
  c.max_steps = kv.get_int("train.max_steps", c.max_steps);
  c.log_interval = kv.get_int("train.log_interval", c.log_interval);
  c.seed = kv.get_u64("train.seed", c.seed);
  c.teacher_kl = kv.get_bool("train.teacher_kl", c.teacher_kl);
  c.validate();
  return c;
}

std::string LossBreakdown::to_string() const {
  return fmt::format("l_kl={} l_ce={} l_mse={} total={}", l_kl, l_ce, l_mse, total);
}

// ---------------------------------------------------------------------------
// Model bundle

ReLlmModel::ReLlmModel(const ModelConfig& config, TrainMode mode, Tokenizer tokenizer,
                       std::shared_ptr<const EmotionBackend> emotion)
    : config_(config),
      mode_(mode),
      tokenizer_(std::move(tokenizer)),
      emotion_(default_emotion(config, std::move(emotion))),
      speech_(config.speech, config.seed),
      adapter_(derived_adapter(config, mode, emotion_->emb_dim()), config.seed + 1),
      lm_(derived_lm(config, tokenizer_), config.seed + 2),
      heads_(config.lm.model_dim, config.seed + 3) {}

std::vector<ad::Parameter*> ReLlmModel::parameters() {
  std::vector<ad::Parameter*> out = speech_.parameters();
  for (ad::Parameter* p : adapter_.parameters()) out.push_back(p);
  for (ad::Parameter* p : lm_.parameters()) out.push_back(p);
  for (ad::Parameter* p : heads_.parameters()) out.push_back(p);
  return out;
}

std::vector<const ad::Parameter*> ReLlmModel::parameters() const {
  auto mut = const_cast<ReLlmModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

EmbeddingSequence ReLlmModel::fusion_input(const Waveform& wave) const {
  EmbeddingSequence raw = const_cast<SpeechEncoder&>(speech_).encode(wave);
  if (!traits().emotion) return raw;
  const EmbeddingSequence emo =
      align_emotion(emotion_->encode(wave).frames, static_cast<int>(raw.length()), config_.emotion_alignment);
  return concat_embeddings(raw, emo);
}

FusedEmbeddingSequence ReLlmModel::fuse(const Waveform& wave) { return adapter_.adapt(fusion_input(wave)); }

Matrix ReLlmModel::speech_context(const PromptTemplate& prompt, const FusedEmbeddingSequence& fused) {
  const std::vector<int> tokens = tokenizer_.encode(render_prompt(prompt, {}));
  return splice_speech(tokens, fused, lm_.parameters().front()->value);
}

Matrix ReLlmModel::text_context(const PromptTemplate& prompt, const std::string& text) {
  const std::vector<int> tokens = tokenizer_.encode(replace_marker(render_prompt(prompt, {}), text));
  return gather_embeddings(lm_.parameters().front()->value, tokens);
}

GenerationResult ReLlmModel::respond(const Waveform& wave, const std::string& transcript, std::optional<Emotion> label,
                                     int max_new) {
  const Matrix ctx = traits().speech ? speech_context(continuation_step2(), fuse(wave))
                                     : text_context(continuation_step2(), text_mode_input(mode_, transcript, label));
  return generate(lm_, ctx, max_new, &tokenizer_);
}

void ReLlmModel::save(const std::filesystem::path& path, const TrainConfig& train_config) const {
  nlohmann::json header;
  header["format"] = kCheckpointFormat;
  header["mode"] = train_mode_name(mode_);
  header["model_config"] = config_.to_kv().entries();
  header["train_config"] = train_config.to_kv().entries();
  header["tokenizer"] = tokenizer_.pieces();
  header["emotion_encoder"] = {{"checksum", emotion_->checksum()}, {"emb_dim", emotion_->emb_dim()}};
  const auto params = parameters();
  write_checkpoint(path, header, params);
}

std::unique_ptr<ReLlmModel> ReLlmModel::load(const std::filesystem::path& path,
                                             std::shared_ptr<const EmotionBackend> emotion) {
  const CheckpointData data = read_checkpoint(path);
  const auto& h = data.header;
  if (h.value("format", "") != kCheckpointFormat) throw ValidationError(fmt::format("{}: not a model checkpoint", path.string()));
  KeyValueConfig kv;
  for (const auto& [k, v] : h.at("model_config").items()) kv.set(k, v.get<std::string>());
  const ModelConfig config = ModelConfig::from_kv(kv);
  const TrainMode mode = parse_train_mode(h.at("mode").get<std::string>());
  Tokenizer tok(h.at("tokenizer").get<std::vector<std::string>>());
  auto model = std::make_unique<ReLlmModel>(config, mode, std::move(tok), std::move(emotion));
  const std::string expected = h.at("emotion_encoder").at("checksum").get<std::string>();
  if (mode_traits(mode).emotion && model->emotion_encoder().checksum() != expected) {
    throw ValidationError(fmt::format("{}: emotion encoder checksum differs from the one used in training", path.string()));
  }
  const auto params = model->parameters();
  assign_sections(data, params);
  return model;
}

Tokenizer build_tokenizer(std::span<const PairedSample> samples, int vocab_limit) {
  std::vector<std::string> corpus{rendered_step2(), render_prompt(ser_eval(), {})};
  for (const auto& s : samples) {
    corpus.push_back(s.transcript);
    corpus.push_back(s.expected_response);
    if (s.emotion_cat) corpus.push_back(text_mode_input(TrainMode::kTextPlusLabel, s.transcript, s.emotion_cat));
  }
  return Tokenizer::train(corpus, vocab_limit);
}

std::string text_mode_input(TrainMode mode, const std::string& transcript, std::optional<Emotion> label) {
  if (mode != TrainMode::kTextPlusLabel) return transcript;
  if (!label) throw ValidationError("text_plus_label needs an emotion label");
  return fmt::format("<{}> {}", emotion_name(*label), transcript);
}

// ---------------------------------------------------------------------------
// Training

std::vector<PreparedSample> prepare_samples(std::span<const PairedSample> samples, ReLlmModel& model,
                                            const TrainConfig& config) {
  const ModeTraits t = model.traits();
  const Tokenizer& tok = model.tokenizer();
  const std::vector<int> speech_prompt = tok.encode(rendered_step2());
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.expected_response.empty()) throw ValidationError(fmt::format("{}: empty expected_response", s.utt_id));
    PreparedSample p;
    p.utt_id = s.utt_id;
    if (t.speech) {
      const Waveform wave = read_wav(s.audio);
      p.speech_features = extract_features(wave, model.config().speech.features);
      if (t.emotion) {
        const EmbeddingSequence emo = model.emotion_encoder().encode(wave).frames;
        p.emotion_frames =
            align_emotion(emo, static_cast<int>(p.speech_features.rows()), model.config().emotion_alignment).frames;
      }
      p.prompt_tokens = speech_prompt;
      if (config.teacher_kl) p.teacher_tokens = tok.encode(replace_marker(rendered_step2(), s.transcript));
    } else {
      p.prompt_tokens = tok.encode(replace_marker(rendered_step2(), text_mode_input(model.mode(), s.transcript, s.emotion_cat)));
    }
    p.target = tok.encode(s.expected_response);
    p.target.push_back(Tokenizer::kEos);
    if (t.ce) {
      if (!s.emotion_cat) throw ValidationError(fmt::format("{}: missing emotion_cat in {} mode", s.utt_id, train_mode_name(model.mode())));
      p.emotion_index = static_cast<int>(*s.emotion_cat);
    }
    if (t.mse) {
      if (!s.vad) throw ValidationError(fmt::format("{}: missing vad in {} mode", s.utt_id, train_mode_name(model.mode())));
      p.vad = s.vad;
    }
    out.push_back(std::move(p));
  }
  return out;
}

LossVars record_total_loss(ad::Tape& tape, ReLlmModel& model, std::span<const PreparedSample* const> batch,
                           const TrainConfig& config) {
  if (batch.empty()) throw std::invalid_argument("compute_total_loss: empty batch");
  const ModeTraits t = model.traits();
  LanguageModel& lm = model.lm();
  ad::Var embed = lm.embed_table(tape);

  std::vector<ad::Var> nll, probs, vads;
  std::vector<int> cat_targets;
  std::vector<Vad> vad_targets;
  for (const PreparedSample* s : batch) {
    ad::Var ctx;
    ad::Var fused;
    if (t.speech) {
      ad::Var raw = model.speech().forward(tape, s->speech_features);
      ad::Var x = t.emotion ? ad::concat_cols(raw, tape.constant_ref(s->emotion_frames)) : raw;
      fused = model.adapter().forward(tape, x);
      ctx = splice_speech(s->prompt_tokens, fused, embed);
    } else {
      ctx = ad::gather_rows(embed, s->prompt_tokens);
    }
    if (config.teacher_kl) {
      const Matrix teacher_ctx = gather_embeddings(embed.value(), s->teacher_tokens);
      nll.push_back(teacher_kl(tape, lm, ctx, teacher_ctx, s->target));
    } else {
      nll.push_back(sequence_nll(tape, lm, ctx, s->target));
    }
    if (t.ce || t.mse) {
      ad::Var pooled = mean_pool(fused);
      if (t.ce) {
        if (s->emotion_index < 0) throw ValidationError(fmt::format("{}: missing emotion_cat", s->utt_id));
        probs.push_back(model.heads().classify(tape, pooled));
        cat_targets.push_back(s->emotion_index);
      }
      if (t.mse) {
        if (!s->vad) throw ValidationError(fmt::format("{}: missing vad in {} mode", s->utt_id, train_mode_name(model.mode())));
        vads.push_back(model.heads().regress(tape, pooled));
        vad_targets.push_back(*s->vad);
      }
    }
  }

  LossVars out;
  out.l_kl = ad::scale(fold_sum(nll), 1.0 / static_cast<double>(batch.size()));
  out.total = out.l_kl;
  out.values.l_kl = out.l_kl.scalar();
  if (t.ce) {
    out.l_ce = ce_loss(probs, cat_targets);
    out.values.l_ce = out.l_ce.scalar();
    out.total = ad::add(out.total, out.l_ce);
  }
  if (t.mse) {
    out.l_mse = mse_loss(vads, vad_targets);
    out.values.l_mse = out.l_mse.scalar();
    out.total = ad::add(out.total, out.l_mse);
  }
  out.values.total = (out.values.l_kl + out.values.l_ce) + out.values.l_mse;
  return out;
}

LossBreakdown compute_total_loss(ReLlmModel& model, std::span<const PreparedSample* const> batch, const TrainConfig& config) {
  ad::Tape tape(false);
  return record_total_loss(tape, model, batch, config).values;
}

Adam::Adam(std::vector<ad::Parameter*> params, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  for (const ad::Parameter* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step(double step_size) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = *params_[i];
    if (p.grad.size() == 0) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    if (step_size == 0.0) continue;
    p.value.array() -= step_size * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + epsilon_);
  }
}

double clip_global_norm(std::span<ad::Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const ad::Parameter* p : params) {
    if (p->grad.size() != 0) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (ad::Parameter* p : params) {
      if (p->grad.size() != 0) p->grad *= s;
    }
  }
  return norm;
}

Trainer::Trainer(ReLlmModel& model, std::vector<PreparedSample> samples, const TrainConfig& config)
    : model_(model),
      samples_(std::move(samples)),
      config_(config),
      optimizer_(model.parameters(), config.beta1, config.beta2, config.epsilon),
      rng_(config.seed) {
  config.validate();
  if (samples_.empty()) throw ValidationError("training needs a non-empty paired set");
  order_.resize(samples_.size());
}

LossBreakdown Trainer::step() {
  std::vector<std::size_t> batch;
  const auto n = static_cast<std::size_t>(config_.batch_size);
  while (batch.size() < n) {
    if (cursor_ == 0) {
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), rng_);
    }
    batch.push_back(order_[cursor_]);
    cursor_ = (cursor_ + 1) % order_.size();
    if (batch.size() == samples_.size()) break;
  }
  return train_step(batch);
}

LossBreakdown Trainer::train_step(std::span<const std::size_t> batch_indices) {
  const auto params = model_.parameters();
  for (ad::Parameter* p : params) p->zero_grad();
  std::vector<const PreparedSample*> batch;
  for (std::size_t i : batch_indices) batch.push_back(&samples_.at(i));

  ad::Tape tape;
  LossVars loss = record_total_loss(tape, model_, batch, config_);
  tape.backward(loss.total);
  tape.accumulate_param_grads();
  for (const ad::Parameter* p : params) {
    if (!all_finite(p->grad)) {
      throw std::runtime_error(fmt::format("non-finite gradient in {} at step {}: {}", p->name, step_ + 1, loss.values.to_string()));
    }
  }
  clip_global_norm(params, config_.grad_clip_norm);
  optimizer_.step(config_.step_size);
  ++step_;
  return loss.values;
}

std::vector<std::pair<int, LossBreakdown>> train_in_memory(ReLlmModel& model, const TrainConfig& config,
                                                           std::span<const PairedSample> paired) {
  config.validate();
  if (paired.empty()) throw ValidationError("training needs a non-empty paired set");
  if (config.mode != model.mode()) throw std::invalid_argument("train config mode differs from the model mode");
  Trainer trainer(model, prepare_samples(paired, model, config), config);
  std::vector<std::pair<int, LossBreakdown>> log;
  for (int s = 1; s <= config.max_steps; ++s) {
    const LossBreakdown l = trainer.step();
    if (s % config.log_interval == 0) {
      log.emplace_back(s, l);
      spdlog::debug("step {} {}", s, l.to_string());
    }
  }
  return log;
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, std::span<const PairedSample> paired,
                  const std::filesystem::path& out_dir, std::shared_ptr<const EmotionBackend> emotion) {
  config.validate();
  if (paired.empty()) throw ValidationError("training needs a non-empty paired set");
  ReLlmModel model(model_config, config.mode, build_tokenizer(paired, model_config.vocab_limit), std::move(emotion));
  TrainResult result;
  result.log = train_in_memory(model, config, paired);
  result.metrics = out_dir / "metrics.csv";
  result.checkpoint = out_dir / "checkpoint.bin";
  write_file(result.metrics, metrics_csv(result.log));
  model.save(result.checkpoint, config);
  return result;
}

std::string metrics_csv(std::span<const std::pair<int, LossBreakdown>> log) {
  std::string out = "step,l_kl,l_ce,l_mse,total\n";
  for (const auto& [step, l] : log) out += fmt::format("{},{},{},{},{}\n", step, l.l_kl, l.l_ce, l.l_mse, l.total);
  return out;
}

}  // namespace renuance
