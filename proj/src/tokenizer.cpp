// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/tokenizer.h"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace renuance {

namespace {

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '\'' || c >= 0x80;
}

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

Tokenizer::Tokenizer(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    if (pieces_[i].empty()) throw std::invalid_argument("tokenizer: empty piece");
    if (!index_.emplace(pieces_[i], kFirstPiece + static_cast<int>(i)).second) {
      throw std::invalid_argument("tokenizer: duplicate piece '" + pieces_[i] + "'");
    }
  }
}

std::vector<std::string> Tokenizer::split_pieces(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const std::size_t start = i;
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == ' ' && i + 1 < n && !is_space(static_cast<unsigned char>(text[i + 1]))) ++i;
    if (is_word_byte(static_cast<unsigned char>(text[i]))) {
      while (i < n && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    } else {
      ++i;
    }
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

Tokenizer Tokenizer::train(std::span<const std::string> corpus, int vocab_limit) {
  if (vocab_limit < kFirstPiece) throw std::invalid_argument("tokenizer: vocab_limit below the byte alphabet size");
  std::map<std::string, long> counts;
  for (const std::string& text : corpus) {
    std::string_view rest = text;
    // The speech marker is never a learnable piece.
    std::string cleaned;
    for (std::size_t pos; (pos = rest.find(kSpeechMarker)) != std::string_view::npos;) {
      cleaned.append(rest.substr(0, pos));
      cleaned.push_back('\n');
      rest.remove_prefix(pos + kSpeechMarker.size());
    }
    cleaned.append(rest);
    for (auto& p : split_pieces(cleaned)) {
      if (p.size() > 1) ++counts[p];
    }
  }
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t budget = static_cast<std::size_t>(vocab_limit - kFirstPiece);
  std::vector<std::string> pieces;
  for (std::size_t i = 0; i < ranked.size() && i < budget; ++i) pieces.push_back(ranked[i].first);
  return Tokenizer(std::move(pieces));
}

void Tokenizer::encode_plain(std::string_view text, std::vector<int>& out) const {
  for (const std::string& p : split_pieces(text)) {
    auto it = index_.find(p);
    if (it != index_.end()) {
      out.push_back(it->second);
    } else {
      for (unsigned char b : p) out.push_back(kByteBase + b);
    }
  }
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> out;
  std::size_t pos;
  while ((pos = text.find(kSpeechMarker)) != std::string_view::npos) {
    encode_plain(text.substr(0, pos), out);
    out.push_back(kSpeech);
    text.remove_prefix(pos + kSpeechMarker.size());
  }
  encode_plain(text, out);
  return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kSpeech) {
      out += kSpeechMarker;
    } else if (id >= kByteBase && id < kFirstPiece) {
      out.push_back(static_cast<char>(id - kByteBase));
    } else if (id >= kFirstPiece && id < vocab_size()) {
      out += pieces_[id - kFirstPiece];
    } else if (id < 0 || id >= vocab_size()) {
      throw std::out_of_range("tokenizer: id " + std::to_string(id) + " outside the vocabulary");
    }
  }
  return out;
}

}  // namespace renuance
