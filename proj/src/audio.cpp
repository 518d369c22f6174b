// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/audio.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/FFT>

#include "renuance/common.h"

namespace renuance {

namespace {

std::uint32_t le32(const std::string& b, std::size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24);
}

std::uint16_t le16(const std::string& b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    (static_cast<unsigned char>(b[off + 1]) << 8));
}

void put32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(int n_mels, int n_fft, int sample_rate) {
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_mels + 1));
  }
  Matrix fb = Matrix::Zero(n_bins, n_mels);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / n_fft;
      if (f > lo && f < mid) fb(k, m) = (f - lo) / (mid - lo);
      else if (f >= mid && f < hi) fb(k, m) = (hi - f) / (hi - mid);
    }
  }
  return fb;
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const std::string b = read_file(path);
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw ValidationError("not a RIFF/WAVE file: " + path.string());
  }
  std::size_t off = 12;
  int format = 0, channels = 0, bits = 0;
  int rate = 0;
  const char* data = nullptr;
  std::size_t data_len = 0;
  while (off + 8 <= b.size()) {
    const std::string id = b.substr(off, 4);
    const std::uint32_t len = le32(b, off + 4);
    const std::size_t body = off + 8;
    if (body + len > b.size()) throw ValidationError("truncated WAV chunk in " + path.string());
    if (id == "fmt ") {
      if (len < 16) throw ValidationError("short fmt chunk in " + path.string());
      format = le16(b, body);
      channels = le16(b, body + 2);
      rate = static_cast<int>(le32(b, body + 4));
      bits = le16(b, body + 14);
    } else if (id == "data") {
      data = b.data() + body;
      data_len = len;
    }
    off = body + len + (len & 1u);
  }
  if (data == nullptr || rate <= 0) throw ValidationError("WAV without fmt/data chunk: " + path.string());
  if (channels != 1) throw ValidationError("only mono WAV is supported: " + path.string());
  Waveform w;
  w.sample_rate = rate;
  if (format == 1 && bits == 16) {
    w.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      std::int16_t s;
      std::memcpy(&s, data + 2 * i, 2);
      w.samples[i] = s / 32768.0;
    }
  } else if (format == 3 && bits == 32) {
    w.samples.resize(data_len / 4);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      float s;
      std::memcpy(&s, data + 4 * i, 4);
      w.samples[i] = s;
    }
  } else {
    throw ValidationError("unsupported WAV encoding in " + path.string());
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  std::string b;
  b.reserve(44 + 2 * n);
  b += "RIFF";
  put32(b, 36 + 2 * n);
  b += "WAVEfmt ";
  put32(b, 16);
  put16(b, 1);
  put16(b, 1);
  put32(b, static_cast<std::uint32_t>(wave.sample_rate));
  put32(b, static_cast<std::uint32_t>(wave.sample_rate * 2));
  put16(b, 2);
  put16(b, 16);
  b += "data";
  put32(b, 2 * n);
  for (double s : wave.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    put16(b, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  write_file(path, b);
}

int FrontEndConfig::frame_count(std::size_t n_samples) const {
  if (n_samples == 0) return 0;
  if (kind == FeatureKind::kRawWave) return static_cast<int>((n_samples + hop - 1) / hop);
  if (n_samples <= static_cast<std::size_t>(n_fft)) return 1;
  return 1 + static_cast<int>((n_samples - n_fft) / hop);
}

Matrix extract_features(const Waveform& wave, const FrontEndConfig& config) {
  if (wave.samples.empty()) throw std::invalid_argument("empty audio");
  if (config.hop < 1 || config.n_fft < 2 || config.n_mels < 1) throw std::invalid_argument("invalid front-end config");
  const int frames = config.frame_count(wave.samples.size());
  const auto n = wave.samples.size();

  if (config.kind == FeatureKind::kRawWave) {
    Matrix out = Matrix::Zero(frames, config.hop);
    for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i / config.hop), static_cast<Eigen::Index>(i % config.hop)) = wave.samples[i];
    return out;
  }

  const int n_fft = config.n_fft;
  const int n_bins = n_fft / 2 + 1;
  const Matrix fb = mel_filterbank(config.n_mels, n_fft, config.sample_rate);
  std::vector<double> window(static_cast<std::size_t>(n_fft));
  for (int i = 0; i < n_fft; ++i) window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n_fft);

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<double>> spec;
  Matrix power(1, n_bins);
  Matrix out(frames, config.n_mels);
  for (int t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * config.hop;
    for (int i = 0; i < n_fft; ++i) {
      const std::size_t idx = start + i;
      buf[i] = idx < n ? wave.samples[idx] * window[i] : 0.0;
    }
    fft.fwd(spec, buf);
    for (int k = 0; k < n_bins; ++k) power(0, k) = std::norm(spec[k]);
    const Matrix mel = power * fb;
    for (int m = 0; m < config.n_mels; ++m) out(t, m) = std::log(std::max(mel(0, m), 1e-10));
  }
  if (config.normalize) {
    const RowVector mean = out.colwise().mean();
    out.rowwise() -= mean;
    const RowVector sd = (out.array().square().colwise().mean()).sqrt().matrix();
    for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) /= std::max(sd(c), 1e-3);
  }
  return out;
}

}  // namespace renuance
