// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Word-piece vocabulary with byte fallback. Text is split into pieces (an
// optional leading space plus a run of word characters, or a single other
// character); known pieces map to one id, everything else falls back to one id
// per byte. Encoding is therefore lossless for any input.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace renuance {

class Tokenizer {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kSpeech = 2;
  static constexpr int kNumSpecial = 3;
  static constexpr int kByteBase = kNumSpecial;
  static constexpr int kFirstPiece = kByteBase + 256;
  static constexpr std::string_view kSpeechMarker = "<speech>";

  Tokenizer() = default;
  explicit Tokenizer(std::vector<std::string> pieces);

  // Most frequent pieces first (ties broken lexicographically), capped so the
  // total vocabulary stays <= vocab_limit.
  static Tokenizer train(std::span<const std::string> corpus, int vocab_limit = 4096);

  // The literal "<speech>" becomes the marker id.
  std::vector<int> encode(std::string_view text) const;
  // Special ids other than the marker are dropped; the marker decodes to "<speech>".
  std::string decode(std::span<const int> ids) const;

  int vocab_size() const { return kFirstPiece + static_cast<int>(pieces_.size()); }
  const std::vector<std::string>& pieces() const { return pieces_; }

  static std::vector<std::string> split_pieces(std::string_view text);

 private:
  void encode_plain(std::string_view text, std::vector<int>& out) const;

  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace renuance
