// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/common.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace renuance {

std::string_view emotion_name(Emotion e) { return kEmotionNames[static_cast<int>(e)]; }

std::optional<Emotion> parse_emotion(std::string_view s) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (kEmotionNames[i] == s) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

bool Vad::in_unit_cube() const {
  auto ok = [](double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; };
  return ok(valence) && ok(arousal) && ok(dominance);
}

Matrix Vad::as_row() const {
  Matrix m(1, 3);
  m << valence, arousal, dominance;
  return m;
}

Vad normalize_vad_five_point(const Vad& v) {
  return {(v.valence - 1.0) / 4.0, (v.arousal - 1.0) / 4.0, (v.dominance - 1.0) / 4.0};
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // Box-Muller; guard the log against u1 == 0.
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Matrix init_fan_in(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  return sha256_hex(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

std::string matrix_bytes(const Matrix& m) {
  std::string out(static_cast<std::size_t>(m.size()) * sizeof(double), '\0');
  std::memcpy(out.data(), m.data(), out.size());
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace renuance
