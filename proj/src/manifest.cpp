// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/manifest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"

namespace renuance {

namespace {

using ojson = nlohmann::ordered_json;

std::string get_string(const ojson& j, const char* key, bool required, int line) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw ValidationError(fmt::format("line {}: missing field '{}'", line, key));
    return {};
  }
  if (!it->is_string()) throw ValidationError(fmt::format("line {}: field '{}' must be a string", line, key));
  return it->get<std::string>();
}

UtteranceRecord record_from_json(const ojson& j, int line) {
  if (!j.is_object()) throw ValidationError(fmt::format("line {}: expected a JSON object", line));
  if (auto v = j.find("schema_version"); v != j.end() && *v != kManifestSchemaVersion) {
    throw ValidationError(fmt::format("line {}: unsupported schema_version {}", line, v->dump()));
  }
  UtteranceRecord r;
  r.utt_id = get_string(j, "utt_id", true, line);
  try {
    r.dataset = parse_dataset(get_string(j, "dataset", true, line));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(fmt::format("line {}: {}", line, e.what()));
  }
  r.group_key = get_string(j, "group_key", false, line);
  r.speaker_id = get_string(j, "speaker_id", false, line);
  r.transcript = get_string(j, "transcript", false, line);
  if (const std::string emo = get_string(j, "emotion_cat", false, line); !emo.empty()) {
    r.emotion_cat = parse_emotion(emo);
    if (!r.emotion_cat) throw ValidationError(fmt::format("line {}: {}: unknown emotion_cat '{}'", line, r.utt_id, emo));
  }
  if (auto v = j.find("vad"); v != j.end() && !v->is_null()) {
    if (!v->is_array() || v->size() != 3 || !std::all_of(v->begin(), v->end(), [](const ojson& x) { return x.is_number(); })) {
      throw ValidationError(fmt::format("line {}: {}: vad must be an array of 3 numbers", line, r.utt_id));
    }
    r.vad = Vad{(*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>()};
  }
  if (const std::string src = get_string(j, "vad_source", false, line); !src.empty()) {
    try {
      r.vad_source = parse_vad_source(src);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(fmt::format("line {}: {}: {}", line, r.utt_id, e.what()));
    }
  } else {
    r.vad_source = r.vad ? VadSource::kGold : VadSource::kAbsent;
  }
  r.audio = get_string(j, "audio", false, line);
  if (const std::string part = get_string(j, "partition", false, line); !part.empty()) r.partition = part;
  return r;
}

void validate_record(const UtteranceRecord& r) {
  if (r.utt_id.empty()) throw ValidationError("record with empty utt_id");
  if (r.vad) {
    const double comps[3] = {r.vad->valence, r.vad->arousal, r.vad->dominance};
    for (double c : comps) {
      if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
        throw ValidationError(fmt::format("{}: vad component {} outside [0,1]", r.utt_id, c));
      }
    }
    if (r.vad_source == VadSource::kAbsent) throw ValidationError(fmt::format("{}: vad present but vad_source is absent", r.utt_id));
  } else if (r.vad_source != VadSource::kAbsent) {
    throw ValidationError(fmt::format("{}: vad_source {} without vad", r.utt_id, vad_source_name(r.vad_source)));
  }
  if (r.dataset == Dataset::kIEM) {
    static const std::set<std::string> kSessions = {"1", "2", "3", "4", "5"};
    if (!kSessions.contains(r.group_key)) {
      throw ValidationError(fmt::format("{}: IEM session '{}' not in 1..5", r.utt_id, r.group_key));
    }
  }
  if (r.partition && *r.partition != "train" && *r.partition != "test") {
    throw ValidationError(fmt::format("{}: partition '{}' must be train or test", r.utt_id, *r.partition));
  }
}

DatasetManifest derived(const DatasetManifest& src) {
  DatasetManifest out;
  out.schema_version = src.schema_version;
  out.base_dir = src.base_dir;
  return out;
}

void warn_degenerate(SplitResult& s) {
  if (s.train.empty()) s.warnings.push_back(fmt::format("{} split: train side is empty", s.rule));
  if (s.test.empty()) s.warnings.push_back(fmt::format("{} split: test side is empty", s.rule));
  for (const auto& w : s.warnings) spdlog::warn("{}", w);
}

}  // namespace

std::string_view dataset_name(Dataset d) {
  switch (d) {
    case Dataset::kIEM: return "IEM";
    case Dataset::kESD: return "ESD";
    case Dataset::kMSPP: return "MSP-P";
    case Dataset::kSynthetic: return "synthetic";
  }
  return "unknown";
}

Dataset parse_dataset(std::string_view s) {
  if (s == "IEM") return Dataset::kIEM;
  if (s == "ESD") return Dataset::kESD;
  if (s == "MSP-P") return Dataset::kMSPP;
  if (s == "synthetic") return Dataset::kSynthetic;
  throw std::invalid_argument(fmt::format("unknown dataset '{}'", s));
}

std::string_view vad_source_name(VadSource s) {
  switch (s) {
    case VadSource::kGold: return "gold";
    case VadSource::kPseudo: return "pseudo";
    case VadSource::kAbsent: return "absent";
  }
  return "absent";
}

VadSource parse_vad_source(std::string_view s) {
  if (s == "gold") return VadSource::kGold;
  if (s == "pseudo") return VadSource::kPseudo;
  if (s == "absent") return VadSource::kAbsent;
  throw std::invalid_argument(fmt::format("unknown vad_source '{}'", s));
}

std::filesystem::path DatasetManifest::resolve_audio(const UtteranceRecord& r) const {
  std::filesystem::path p(r.audio);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void validate_manifest(const DatasetManifest& manifest) {
  std::set<std::string> seen;
  for (const auto& r : manifest.records) {
    validate_record(r);
    if (!seen.insert(r.utt_id).second) throw ValidationError(fmt::format("duplicate utt_id '{}'", r.utt_id));
    if (r.dataset != manifest.records.front().dataset) {
      throw ValidationError(fmt::format("{}: dataset {} differs from manifest dataset {}", r.utt_id, dataset_name(r.dataset),
                                        dataset_name(manifest.records.front().dataset)));
    }
  }
}

DatasetManifest parse_manifest(std::string_view jsonl, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(fmt::format("line {}: malformed JSON: {}", line_no, e.what()));
    }
    m.records.push_back(record_from_json(j, line_no));
    try {
      validate_record(m.records.back());
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  if (m.records.empty()) throw ValidationError("empty manifest");
  validate_manifest(m);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError(fmt::format("manifest not found: {}", path.string()));
  return parse_manifest(read_file(path), path.parent_path());
}

std::string record_to_json_line(const UtteranceRecord& r) {
  ojson j;
  j["utt_id"] = r.utt_id;
  j["dataset"] = dataset_name(r.dataset);
  j["group_key"] = r.group_key;
  j["speaker_id"] = r.speaker_id;
  j["transcript"] = r.transcript;
  j["emotion_cat"] = r.emotion_cat ? ojson(emotion_name(*r.emotion_cat)) : ojson(nullptr);
  j["vad"] = r.vad ? ojson::array({r.vad->valence, r.vad->arousal, r.vad->dominance}) : ojson(nullptr);
  j["vad_source"] = vad_source_name(r.vad_source);
  j["audio"] = r.audio;
  if (r.partition) j["partition"] = *r.partition;
  return j.dump();
}

std::string manifest_to_jsonl(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    out += record_to_json_line(r);
    out.push_back('\n');
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  write_file(path, manifest_to_jsonl(manifest));
}

SplitResult split_iemocap(const DatasetManifest& manifest) {
  if (manifest.empty()) throw ValidationError("empty manifest");
  SplitResult s{derived(manifest), derived(manifest), 0, "iemocap", {}};
  static const std::set<std::string> kSessions = {"1", "2", "3", "4", "5"};
  for (const auto& r : manifest.records) {
    if (!kSessions.contains(r.group_key)) {
      throw ValidationError(fmt::format("{}: unknown session '{}'", r.utt_id, r.group_key));
    }
    (r.group_key == "5" ? s.test : s.train).records.push_back(r);
  }
  warn_degenerate(s);
  return s;
}

SplitResult split_esd(const DatasetManifest& manifest, double train_ratio, std::uint64_t seed) {
  if (manifest.empty()) throw ValidationError("empty manifest");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("split_esd: train_ratio must be in (0,1)");

  // group -> per-emotion record counts; unlabeled records count toward slot 4.
  std::map<std::string, std::array<int, kNumEmotions + 1>> groups;
  for (const auto& r : manifest.records) {
    auto& c = groups[r.group_key];
    ++c[r.emotion_cat ? static_cast<int>(*r.emotion_cat) : kNumEmotions];
  }
  if (groups.size() < 2) throw ValidationError(fmt::format("split_esd: need at least 2 group keys, found {}", groups.size()));

  std::array<std::vector<std::string>, kNumEmotions + 1> strata;
  for (const auto& [key, counts] : groups) {
    const auto majority = std::max_element(counts.begin(), counts.end()) - counts.begin();
    strata[static_cast<std::size_t>(majority)].push_back(key);
  }

  const std::size_t n = groups.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_ratio * static_cast<double>(n)));
  std::array<std::size_t, kNumEmotions + 1> alloc{};
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < strata.size(); ++k) {
    const double exact = train_ratio * static_cast<double>(strata[k].size());
    alloc[k] = static_cast<std::size_t>(std::floor(exact));
    assigned += alloc[k];
    if (alloc[k] < strata[k].size()) remainders.emplace_back(exact - std::floor(exact), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n_train && i < remainders.size(); ++i, ++assigned) ++alloc[remainders[i].second];

  std::mt19937_64 rng(seed);
  std::set<std::string> train_groups;
  for (std::size_t k = 0; k < strata.size(); ++k) {
    auto keys = strata[k];
    std::shuffle(keys.begin(), keys.end(), rng);
    train_groups.insert(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(alloc[k]));
  }

  SplitResult s{derived(manifest), derived(manifest), seed, "esd", {}};
  for (const auto& r : manifest.records) (train_groups.contains(r.group_key) ? s.train : s.test).records.push_back(r);
  warn_degenerate(s);
  return s;
}

SplitResult sample_msp(const DatasetManifest& manifest, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  if (manifest.empty()) throw ValidationError("empty manifest");
  std::vector<std::size_t> pools[2];
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    const auto& r = manifest.records[i];
    if (!r.partition) throw ValidationError(fmt::format("{}: MSP sampling needs a train/test partition tag", r.utt_id));
    pools[*r.partition == "train" ? 0 : 1].push_back(i);
  }
  const std::size_t want[2] = {n_train, n_test};
  const char* names[2] = {"train", "test"};
  for (int p = 0; p < 2; ++p) {
    if (pools[p].size() < want[p]) {
      throw ValidationError(fmt::format("msp {} pool too small: required {}, available {}", names[p], want[p], pools[p].size()));
    }
  }
  std::mt19937_64 rng(seed);
  SplitResult s{derived(manifest), derived(manifest), seed, "msp", {}};
  DatasetManifest* sides[2] = {&s.train, &s.test};
  for (int p = 0; p < 2; ++p) {
    auto idx = pools[p];
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(want[p]);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) sides[p]->records.push_back(manifest.records[i]);
  }
  warn_degenerate(s);
  return s;
}

void write_split(const std::filesystem::path& dir, const SplitResult& split) {
  write_manifest(dir / "train.jsonl", split.train);
  write_manifest(dir / "test.jsonl", split.test);
  ojson side;
  side["seed"] = split.seed;
  side["rule"] = split.rule;
  side["counts"] = {{"train", split.train.size()}, {"test", split.test.size()}};
  write_file(dir / "split.json", side.dump(2) + "\n");
}

PseudoLabelResult generate_pseudo_dimensional_labels(const DatasetManifest& manifest, const EmotionBackend& encoder) {
  PseudoLabelResult out{manifest, 0, 0};
  for (auto& r : out.manifest.records) {
    if (r.vad_source == VadSource::kGold) {
      spdlog::warn("{}: gold vad present, not overwritten", r.utt_id);
      ++out.skipped_gold;
      continue;
    }
    if (r.vad_source == VadSource::kPseudo && r.vad) continue;
    Vad v;
    try {
      v = encoder.encode_file(manifest.resolve_audio(r)).vad;
    } catch (const std::exception& e) {
      throw ValidationError(fmt::format("{}: emotion encoder failed: {}", r.utt_id, e.what()));
    }
    if (!v.in_unit_cube()) throw ValidationError(fmt::format("{}: encoder vad outside [0,1]", r.utt_id));
    r.vad = v;
    r.vad_source = VadSource::kPseudo;
    ++out.labeled;
  }
  return out;
}

}  // namespace renuance
