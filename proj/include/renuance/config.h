// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Flat key=value configuration. Lines starting with '#' are comments; later
// assignments replace earlier ones. Keys are dotted ("lm.layers").

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace renuance {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const { return values_.contains(key); }
  // Entries of `other` win.
  void merge(const KeyValueConfig& other);

  std::string get(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }
  // Sorted "key=value" lines.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace renuance
