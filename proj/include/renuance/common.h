// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "renuance/autodiff.h"

namespace renuance {

// Input that violates a documented contract (bad file content, bad labels).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Four categorical emotions, in head output order.
enum class Emotion { kNeutral = 0, kHappy = 1, kAngry = 2, kSad = 3 };
inline constexpr int kNumEmotions = 4;
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {"neutral", "happy", "angry", "sad"};

std::string_view emotion_name(Emotion e);
std::optional<Emotion> parse_emotion(std::string_view s);

// Valence, arousal, dominance normalized to [0,1].
struct Vad {
  double valence = 0.0;
  double arousal = 0.0;
  double dominance = 0.0;

  bool in_unit_cube() const;
  Matrix as_row() const;
  bool operator==(const Vad&) const = default;
};

// Maps a 1-5 annotation scale onto [0,1] via (x-1)/4.
Vad normalize_vad_five_point(const Vad& v);

// Seeded 64-bit generator with platform-independent real draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();                       // [0,1)
  double uniform(double lo, double hi);   // [lo,hi)
  double normal();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix init_fan_in(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view bytes);
std::string matrix_bytes(const Matrix& m);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace renuance
