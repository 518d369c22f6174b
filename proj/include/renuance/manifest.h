// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSONL utterance manifests and the corpus-specific split rules.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "renuance/common.h"
#include "renuance/encoders.h"

namespace renuance {

enum class Dataset { kIEM, kESD, kMSPP, kSynthetic };
enum class VadSource { kGold, kPseudo, kAbsent };

std::string_view dataset_name(Dataset d);
Dataset parse_dataset(std::string_view s);
std::string_view vad_source_name(VadSource s);
VadSource parse_vad_source(std::string_view s);

struct UtteranceRecord {
  std::string utt_id;
  Dataset dataset = Dataset::kSynthetic;
  std::string group_key;
  std::string speaker_id;
  std::string transcript;
  std::optional<Emotion> emotion_cat;
  std::optional<Vad> vad;
  VadSource vad_source = VadSource::kAbsent;
  // Waveform or feature path, relative to the manifest directory unless absolute.
  std::string audio;
  // Original corpus partition ("train" / "test"); only MSP-style pools carry it.
  std::optional<std::string> partition;

  bool operator==(const UtteranceRecord&) const = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct DatasetManifest {
  std::vector<UtteranceRecord> records;
  int schema_version = kManifestSchemaVersion;
  std::filesystem::path base_dir;

  std::filesystem::path resolve_audio(const UtteranceRecord& r) const;
  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

struct SplitResult {
  DatasetManifest train;
  DatasetManifest test;
  std::uint64_t seed = 0;
  std::string rule;
  std::vector<std::string> warnings;
};

// Checks per-record invariants plus utt_id uniqueness and a single dataset tag.
void validate_manifest(const DatasetManifest& manifest);

DatasetManifest parse_manifest(std::string_view jsonl, const std::filesystem::path& base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path);
std::string record_to_json_line(const UtteranceRecord& record);
std::string manifest_to_jsonl(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Session "5" is the test side.
SplitResult split_iemocap(const DatasetManifest& manifest);
// Parallel-text groups are stratified by majority emotion and allocated so the
// train side holds round(train_ratio * n_groups) groups.
SplitResult split_esd(const DatasetManifest& manifest, double train_ratio, std::uint64_t seed);
// Uniform sampling without replacement inside each original partition.
SplitResult sample_msp(const DatasetManifest& manifest, std::size_t n_train, std::size_t n_test, std::uint64_t seed);

// Writes train.jsonl, test.jsonl and split.json {seed, rule, counts} into dir.
void write_split(const std::filesystem::path& dir, const SplitResult& split);

struct PseudoLabelResult {
  DatasetManifest manifest;
  int skipped_gold = 0;
  int labeled = 0;
};

// Fills missing vad from the encoder's pooled prediction (vad_source=pseudo).
// Gold labels are left untouched and counted; existing pseudo labels are kept.
PseudoLabelResult generate_pseudo_dimensional_labels(const DatasetManifest& manifest, const EmotionBackend& encoder);

}  // namespace renuance
