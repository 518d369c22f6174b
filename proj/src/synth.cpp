// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/synth.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <string_view>

#include <fmt/format.h>

#include "renuance/audio.h"

namespace renuance {

namespace {

constexpr std::array<std::string_view, 32> kWords = {
    "i",      "lost",  "my",     "keys",   "again", "we",    "won",   "the",   "game",   "why",  "should",
    "buy",    "own",   "today",  "rain",   "train", "was",   "late",  "dinner", "tonight", "she", "called",
    "me",     "back",  "finally", "this",  "is",    "fine",  "they",  "moved", "away",   "you"};

struct EmotionVoice {
  double pitch;
  double amplitude;
  double tremolo_hz;
  Vad vad;
};

EmotionVoice voice(Emotion e) {
  switch (e) {
    case Emotion::kNeutral: return {1.0, 0.30, 0.0, {0.50, 0.40, 0.50}};
    case Emotion::kHappy: return {1.30, 0.50, 30.0, {0.80, 0.70, 0.60}};
    case Emotion::kAngry: return {1.15, 0.70, 55.0, {0.20, 0.85, 0.80}};
    case Emotion::kSad: return {0.80, 0.20, 12.0, {0.20, 0.30, 0.30}};
  }
  return {1.0, 0.3, 0.0, {0.5, 0.5, 0.5}};
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string make_transcript(Rng& rng) {
  const int n = 3 + static_cast<int>(rng.uniform() * 3.0);
  std::string text;
  for (int i = 0; i < n; ++i) {
    const auto w = kWords[static_cast<std::size_t>(rng.uniform() * kWords.size())];
    std::string word(w);
    if (i == 0) word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
    if (i > 0) text.push_back(' ');
    text += word;
  }
  text.push_back('.');
  return text;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

Waveform synthesize_utterance(const std::string& transcript, Emotion emotion, int sample_rate, std::uint64_t seed) {
  const EmotionVoice v = voice(emotion);
  Rng rng(seed);
  const int seg = sample_rate * 80 / 1000;
  const int gap = sample_rate * 20 / 1000;
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(static_cast<std::size_t>(gap), 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (const auto& word : split_words(transcript)) {
    const double base = 180.0 + static_cast<double>(fnv1a(word) % 900);
    const double f0 = base * v.pitch;
    for (int n = 0; n < seg; ++n) {
      const double t = static_cast<double>(n) / sample_rate;
      const double env = std::sin(std::numbers::pi * n / seg);
      const double trem = v.tremolo_hz > 0.0 ? 0.75 + 0.25 * std::sin(two_pi * v.tremolo_hz * t) : 1.0;
      const double s = std::sin(two_pi * f0 * t) + 0.4 * std::sin(two_pi * 2.0 * f0 * t) + 0.2 * std::sin(two_pi * 3.0 * f0 * t);
      w.samples.push_back(v.amplitude * env * trem * s / 1.6 + 0.003 * rng.normal());
    }
  }
  w.samples.insert(w.samples.end(), static_cast<std::size_t>(gap), 0.0);
  return w;
}

DatasetManifest synthesize_corpus(const std::filesystem::path& dir, const SynthConfig& config) {
  if (config.per_emotion < 1) throw std::invalid_argument("synth: per_emotion must be >= 1");
  Rng rng(config.seed);
  DatasetManifest m;
  m.base_dir = dir;
  std::set<std::string> used;
  auto fresh_transcript = [&] {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::string t = make_transcript(rng);
      if (used.insert(t).second) return t;
    }
    throw std::runtime_error("synth: could not draw a distinct transcript");
  };

  const bool parallel = config.dataset == Dataset::kESD;
  std::vector<std::string> shared_texts;
  if (parallel) {
    for (int i = 0; i < config.per_emotion; ++i) shared_texts.push_back(fresh_transcript());
  }
  const auto train_rounds = static_cast<int>(std::llround(config.per_emotion * config.train_partition));
  int index = 0;
  for (int i = 0; i < config.per_emotion; ++i) {
    for (int e = 0; e < kNumEmotions; ++e, ++index) {
      const auto emo = static_cast<Emotion>(e);
      UtteranceRecord r;
      r.utt_id = fmt::format("{}_{:04d}", dataset_name(config.dataset), index);
      r.dataset = config.dataset;
      r.transcript = parallel ? shared_texts[static_cast<std::size_t>(i)] : fresh_transcript();
      r.group_key = parallel ? fmt::format("text{:04d}", i) : std::to_string(1 + index % 5);
      r.speaker_id = fmt::format("spk{}", index % 3);
      r.emotion_cat = emo;
      if (config.dataset != Dataset::kESD) {
        const Vad base = voice(emo).vad;
        r.vad = Vad{clamp01(base.valence + rng.uniform(-0.05, 0.05)), clamp01(base.arousal + rng.uniform(-0.05, 0.05)),
                    clamp01(base.dominance + rng.uniform(-0.05, 0.05))};
        r.vad_source = VadSource::kGold;
      }
      // Whole rounds go to train so every emotion appears on both sides.
      if (config.dataset == Dataset::kMSPP) r.partition = i < train_rounds ? "train" : "test";
      r.audio = fmt::format("audio/{}.wav", r.utt_id);
      write_wav(dir / r.audio, synthesize_utterance(r.transcript, emo, config.sample_rate, config.seed * 1000003ULL + index));
      m.records.push_back(std::move(r));
    }
  }
  validate_manifest(m);
  write_manifest(dir / "manifest.jsonl", m);
  return m;
}

}  // namespace renuance
