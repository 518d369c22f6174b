// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/encoders.h"

#include <cstring>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"
#include "renuance/http_client.h"

namespace renuance {

void EmbeddingSequence::validate() const {
  if (frames.rows() < 1) throw ValidationError("embedding sequence must have at least one frame");
  if (!all_finite(frames)) throw ValidationError("embedding sequence contains non-finite values");
}

std::vector<int> resample_indices(int source_len, int target_len) {
  if (target_len <= 0) throw std::invalid_argument("resample_frames: target_len must be >= 1");
  if (source_len <= 0) throw std::invalid_argument("resample_frames: empty input");
  std::vector<int> idx(static_cast<std::size_t>(target_len));
  for (int i = 0; i < target_len; ++i) {
    idx[i] = static_cast<int>((static_cast<std::int64_t>(i) * source_len) / target_len);
  }
  return idx;
}

EmbeddingSequence resample_frames(const EmbeddingSequence& seq, int target_len) {
  const auto idx = resample_indices(static_cast<int>(seq.length()), target_len);
  EmbeddingSequence out;
  out.frames.resize(target_len, seq.width());
  for (int i = 0; i < target_len; ++i) out.frames.row(i) = seq.frames.row(idx[i]);
  out.frame_rate_hint = seq.length() > 0 ? seq.frame_rate_hint * target_len / static_cast<double>(seq.length()) : 0.0;
  return out;
}

std::string_view emotion_alignment_name(EmotionAlignment a) {
  return a == EmotionAlignment::kPooled ? "pooled" : "framewise";
}

EmotionAlignment parse_emotion_alignment(std::string_view s) {
  if (s == "framewise") return EmotionAlignment::kFramewise;
  if (s == "pooled") return EmotionAlignment::kPooled;
  throw ValidationError(fmt::format("unknown emotion alignment '{}'", s));
}

EmbeddingSequence align_emotion(const EmbeddingSequence& seq, int target_len, EmotionAlignment alignment) {
  if (alignment == EmotionAlignment::kFramewise) return resample_frames(seq, target_len);
  if (target_len <= 0) throw std::invalid_argument("align_emotion: target_len must be >= 1");
  if (seq.length() <= 0) throw std::invalid_argument("align_emotion: empty input");
  EmbeddingSequence out;
  out.frames = seq.frames.colwise().mean().replicate(target_len, 1);
  out.frame_rate_hint = seq.frame_rate_hint * target_len / static_cast<double>(seq.length());
  return out;
}

// ---------------------------------------------------------------------------

SpeechEncoder::SpeechEncoder(const SpeechEncoderConfig& config, std::uint64_t seed) : config_(config) {
  if (config.layers < 1 || config.hidden_dim < 1) throw std::invalid_argument("speech encoder needs layers >= 1 and hidden_dim >= 1");
  Rng rng(seed);
  int in = config.features.feature_dim();
  for (int l = 0; l < config.layers; ++l) {
    weights_.emplace_back(fmt::format("speech.l{}.w", l), init_fan_in(in, config.hidden_dim, in, rng));
    biases_.emplace_back(fmt::format("speech.l{}.b", l), Matrix::Zero(1, config.hidden_dim));
    in = config.hidden_dim;
  }
}

ad::Var SpeechEncoder::forward(ad::Tape& tape, const Matrix& features) {
  if (features.rows() < 1) throw std::invalid_argument("speech encoder: empty feature sequence");
  if (features.cols() != config_.features.feature_dim()) throw std::invalid_argument("speech encoder: feature width mismatch");
  for (const auto& w : weights_) {
    if (!all_finite(w.value)) throw ValidationError("speech encoder: NaN in parameters (" + w.name + ")");
  }
  ad::Var h = tape.constant_ref(features);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    ad::Var w = config_.trainable ? tape.param(weights_[l]) : tape.constant_ref(weights_[l].value);
    ad::Var b = config_.trainable ? tape.param(biases_[l]) : tape.constant_ref(biases_[l].value);
    h = ad::add_bias(ad::matmul(h, w), b);
    h = ad::gelu(h);
  }
  return h;
}

EmbeddingSequence SpeechEncoder::encode(const Waveform& audio) {
  if (audio.samples.empty()) throw std::invalid_argument("encode_speech: empty audio");
  const Matrix feats = extract_features(audio, config_.features);
  ad::Tape tape(false);
  EmbeddingSequence out;
  out.frames = forward(tape, feats).value();
  out.frame_rate_hint = static_cast<double>(config_.features.sample_rate) / config_.features.hop;
  return out;
}

std::vector<ad::Parameter*> SpeechEncoder::parameters() {
  std::vector<ad::Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const ad::Parameter*> SpeechEncoder::parameters() const {
  std::vector<const ad::Parameter*> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

EmbeddingSequence encode_speech(const Waveform& audio, SpeechEncoder& encoder) { return encoder.encode(audio); }

// ---------------------------------------------------------------------------

EmotionEncoding EmotionBackend::encode_file(const std::filesystem::path& path) const { return encode(read_wav(path)); }

namespace {

std::vector<Matrix> make_emotion_weights(const EmotionEncoderConfig& c) {
  Rng rng(c.seed);
  const int f = c.features.feature_dim();
  const int d = c.emb_dim;
  std::vector<Matrix> w;
  w.push_back(init_fan_in(c.conv_kernel * f, d, c.conv_kernel * f, rng));
  w.push_back(init_fan_in(1, d, d, rng));
  w.push_back(init_fan_in(d, d, d, rng));
  w.push_back(init_fan_in(1, d, d, rng));
  w.push_back(init_fan_in(d, 3, d, rng));
  w.push_back(init_fan_in(1, 3, d, rng));
  return w;
}

nlohmann::json emotion_config_json(const EmotionEncoderConfig& c) {
  return {{"kind", c.features.kind == FeatureKind::kLogMel ? "log-mel" : "raw-wave"},
          {"sample_rate", c.features.sample_rate},
          {"n_fft", c.features.n_fft},
          {"hop", c.features.hop},
          {"n_mels", c.features.n_mels},
          {"normalize", c.features.normalize},
          {"conv_kernel", c.conv_kernel},
          {"emb_dim", c.emb_dim},
          {"seed", c.seed}};
}

EmotionEncoderConfig emotion_config_from_json(const nlohmann::json& j) {
  EmotionEncoderConfig c;
  c.features.kind = j.at("kind").get<std::string>() == "raw-wave" ? FeatureKind::kRawWave : FeatureKind::kLogMel;
  c.features.sample_rate = j.at("sample_rate").get<int>();
  c.features.n_fft = j.at("n_fft").get<int>();
  c.features.hop = j.at("hop").get<int>();
  c.features.n_mels = j.at("n_mels").get<int>();
  c.features.normalize = j.at("normalize").get<bool>();
  c.conv_kernel = j.at("conv_kernel").get<int>();
  c.emb_dim = j.at("emb_dim").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

constexpr const char* kEmotionMagic = "renuance-emotion-encoder";

}  // namespace

EmotionEncoder::EmotionEncoder(const EmotionEncoderConfig& config)
    : EmotionEncoder(config, make_emotion_weights(config)) {}

EmotionEncoder::EmotionEncoder(const EmotionEncoderConfig& config, std::vector<Matrix> weights)
    : config_(config), weights_(std::move(weights)) {
  if (config.emb_dim < 1 || config.conv_kernel < 1 || config.conv_kernel % 2 == 0) {
    throw std::invalid_argument("emotion encoder needs emb_dim >= 1 and an odd conv_kernel");
  }
}

EmotionEncoding EmotionEncoder::run(const Matrix& features) const {
  ad::Tape tape(false);
  ad::Var x = tape.constant_ref(features);
  ad::Var h = ad::unfold_1d(x, config_.conv_kernel, 1, config_.conv_kernel / 2);
  h = ad::tanh(ad::add_bias(ad::matmul(h, tape.constant_ref(weights_[0])), tape.constant_ref(weights_[1])));
  // Pre-final layer: this is the framewise embedding handed to fusion.
  h = ad::tanh(ad::add_bias(ad::matmul(h, tape.constant_ref(weights_[2])), tape.constant_ref(weights_[3])));
  ad::Var pooled = ad::mean_rows(h);
  ad::Var vad = ad::sigmoid(ad::add_bias(ad::matmul(pooled, tape.constant_ref(weights_[4])), tape.constant_ref(weights_[5])));
  EmotionEncoding out;
  out.frames.frames = h.value();
  out.frames.frame_rate_hint = static_cast<double>(config_.features.sample_rate) / config_.features.hop;
  const Matrix& v = vad.value();
  out.vad = {v(0, 0), v(0, 1), v(0, 2)};
  return out;
}

EmotionEncoding EmotionEncoder::encode(const Waveform& audio) const {
  if (audio.samples.empty()) throw std::invalid_argument("encode_emotion: empty audio");
  return run(extract_features(audio, config_.features));
}

std::string EmotionEncoder::checksum() const {
  std::string bytes;
  for (const Matrix& w : weights_) bytes += matrix_bytes(w);
  return sha256_hex(bytes);
}

void EmotionEncoder::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["format"] = kEmotionMagic;
  header["version"] = 1;
  header["config"] = emotion_config_json(config_);
  header["shapes"] = nlohmann::json::array();
  std::string payload;
  for (const Matrix& w : weights_) {
    header["shapes"].push_back({w.rows(), w.cols()});
    payload += matrix_bytes(w);
  }
  header["sha256"] = sha256_hex(payload);
  write_file(path, header.dump() + "\n" + payload);
}

EmotionEncoder EmotionEncoder::load(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ValidationError("emotion encoder file has no header: " + path.string());
  const auto header = nlohmann::json::parse(bytes.substr(0, nl));
  if (header.value("format", "") != kEmotionMagic) throw ValidationError("not an emotion encoder file: " + path.string());
  const std::string payload = bytes.substr(nl + 1);
  if (sha256_hex(payload) != header.at("sha256").get<std::string>()) {
    throw ValidationError("emotion encoder checksum mismatch: " + path.string());
  }
  std::vector<Matrix> weights;
  std::size_t off = 0;
  for (const auto& s : header.at("shapes")) {
    Matrix m(s[0].get<Eigen::Index>(), s[1].get<Eigen::Index>());
    const std::size_t n = static_cast<std::size_t>(m.size()) * sizeof(double);
    if (off + n > payload.size()) throw ValidationError("truncated emotion encoder file: " + path.string());
    std::memcpy(m.data(), payload.data() + off, n);
    off += n;
    weights.push_back(std::move(m));
  }
  return EmotionEncoder(emotion_config_from_json(header.at("config")), std::move(weights));
}

// ---------------------------------------------------------------------------

ExternalEmotionEncoder::ExternalEmotionEncoder(std::string url, int emb_dim) : url_(std::move(url)), emb_dim_(emb_dim) {}

EmotionEncoding ExternalEmotionEncoder::encode(const Waveform& audio) const {
  const auto tmp = std::filesystem::temp_directory_path() /
                   fmt::format("renuance-ext-{}.wav", sha256_hex(std::string_view(reinterpret_cast<const char*>(audio.samples.data()), audio.samples.size() * sizeof(double))).substr(0, 16));
  write_wav(tmp, audio);
  auto out = encode_file(tmp);
  std::filesystem::remove(tmp);
  return out;
}

EmotionEncoding ExternalEmotionEncoder::encode_file(const std::filesystem::path& path) const {
  const auto reply = post_json(url_, {{"audio_path", std::filesystem::absolute(path).string()}});
  const auto& frames = reply.at("frames");
  const auto& vad = reply.at("vad");
  if (!frames.is_array() || frames.empty()) throw ValidationError("external emotion encoder returned no frames");
  if (!vad.is_array() || vad.size() != 3) throw ValidationError("external emotion encoder must return 3 VAD values");
  EmotionEncoding out;
  out.frames.frames.resize(static_cast<Eigen::Index>(frames.size()), emb_dim_);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != static_cast<std::size_t>(emb_dim_)) throw ValidationError("external emotion encoder frame width mismatch");
    for (int d = 0; d < emb_dim_; ++d) out.frames.frames(static_cast<Eigen::Index>(t), d) = frames[t][d].get<double>();
  }
  out.frames.validate();
  out.vad = {vad[0].get<double>(), vad[1].get<double>(), vad[2].get<double>()};
  if (!out.vad.in_unit_cube()) throw ValidationError("external emotion encoder VAD outside [0,1]");
  return out;
}

}  // namespace renuance
