// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Empathy scoring, SER accuracy, paired significance tests and the
// table-style reporting arithmetic.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "renuance/common.h"
#include "renuance/manifest.h"

namespace renuance {

class ReLlmModel;

// ---------------------------------------------------------------------------
// Empathy

struct EmpathyScore {
  int er = 0;  // emotional reaction, 0..2
  int ex = 0;  // exploration, 0..2

  bool operator==(const EmpathyScore&) const = default;
};

class EmpathyScorer {
 public:
  virtual ~EmpathyScorer() = default;
  virtual EmpathyScore score(const std::string& id, const std::string& response) = 0;
};

// Keyword rules; a deterministic stand-in for a trained scorer.
EmpathyScore heuristic_stub_scorer(std::string_view response);

class StubEmpathyScorer final : public EmpathyScorer {
 public:
  EmpathyScore score(const std::string& id, const std::string& response) override;
};

// POST {"id", "response_text"} -> {"id", "er", "ex"}.
class ExternalEmpathyScorer final : public EmpathyScorer {
 public:
  explicit ExternalEmpathyScorer(std::string url);
  EmpathyScore score(const std::string& id, const std::string& response) override;

 private:
  std::string url_;
};

struct EmpathyScoring {
  std::vector<std::optional<EmpathyScore>> scores;  // index-aligned with the input
  std::vector<std::string> failures;                // "<id>: <reason>"
};

// `ids` may be empty, in which case positions are used as ids.
EmpathyScoring score_empathy(std::span<const std::string> responses, EmpathyScorer& scorer,
                             std::span<const std::string> ids = {});

struct EmpathyResultRow {
  std::string utt_id;
  std::string response;
  int er = 0;
  int ex = 0;
};

// JSONL {utt_id, response, er, ex}.
void write_empathy_results(const std::filesystem::path& path, std::span<const EmpathyResultRow> rows);
std::vector<EmpathyResultRow> load_empathy_results(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Summaries

struct ScoreSummary {
  double mean = 0.0;
  double std = 0.0;  // sample (n-1) convention, 0 for n = 1
  int n = 0;
};

ScoreSummary summarize(std::span<const double> scores);
ScoreSummary summarize(std::span<const int> scores);

// "1.847(.438)": three decimals, leading zero of a sub-unit std dropped.
std::string format_mean_std(double mean, double std);
std::string format_mean_std(const ScoreSummary& s);

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

enum class WilcoxonMethod { kExact, kNormalApprox };

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  int n_effective = 0;
  double p_two_sided = 1.0;
  WilcoxonMethod method = WilcoxonMethod::kExact;
  bool degenerate = false;  // every difference was zero
};

inline constexpr int kWilcoxonExactMaxN = 20;

// Zero differences are dropped, tied |d| get average ranks. The exact null
// distribution is used up to kWilcoxonExactMaxN nonzero pairs, otherwise the
// tie-corrected normal approximation with continuity correction. `force`
// selects a method regardless of n.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    std::optional<WilcoxonMethod> force = std::nullopt);

std::string_view wilcoxon_method_name(WilcoxonMethod m);

// ---------------------------------------------------------------------------
// SER

enum class SerLabel { kNeutral = 0, kHappy = 1, kAngry = 2, kSad = 3, kSurprise = 4, kUnparsed = 5 };

std::string_view ser_label_name(SerLabel l);

// Earliest of neutral/sad/angry/happy/surprise by offset, case-insensitive.
SerLabel extract_emotion_label(std::string_view text);

// Rows are gold classes; columns are predicted classes and may include extra
// reject columns (surprise, unparsed) to the right.
struct ConfusionMatrix {
  Eigen::MatrixXi counts;
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;

  static ConfusionMatrix emotion_matrix();  // 4 gold x (4 + surprise + unparsed)
  void add(int gold, int predicted);
};

// Mean over gold rows of diagonal / row sum. An empty row is an error unless
// skip_empty_rows, in which case it is left out of the mean.
double unweighted_accuracy(const ConfusionMatrix& cm, bool skip_empty_rows = false);

double relative_improvement(double a, double b);
double absolute_delta_points(double a, double b);

enum class SerMode { kPrompt, kHead };

struct SerPrediction {
  std::string utt_id;
  Emotion gold = Emotion::kNeutral;
  SerLabel predicted = SerLabel::kUnparsed;
  std::string response;  // generated text in prompt mode
};

struct SerReport {
  ConfusionMatrix cm;
  double ua = 0.0;
  std::vector<SerPrediction> predictions;
};

// Classes without gold samples are left out of UA (with a warning).
SerReport evaluate_ser(ReLlmModel& model, const DatasetManifest& test, SerMode mode, int max_new = 24);

struct GeneratedResponse {
  std::string utt_id;
  std::string prompt_name;
  std::string response;
  std::vector<double> logprobs;
};

// Step-2 continuation for every record of the manifest.
std::vector<GeneratedResponse> generate_responses(ReLlmModel& model, const DatasetManifest& manifest, int max_new = 48);
// JSONL {utt_id, prompt_name, response, logprobs}.
void write_generations(const std::filesystem::path& path, std::span<const GeneratedResponse> rows);

// ---------------------------------------------------------------------------
// Report table

struct TableCell {
  double mean = 0.0;
  std::optional<double> std;
};

// Accepts "1.847(.438)", "0.766" and "--" (absent).
std::optional<TableCell> parse_table_cell(std::string_view text);
std::string format_table_cell(const TableCell& c);

// Rows keyed by (metric, dataset); each row maps model id -> cell.
struct ResultTable {
  std::vector<std::string> models;  // column order
  std::vector<std::pair<std::string, std::string>> row_keys;
  std::map<std::pair<std::string, std::string>, std::map<std::string, TableCell>> cells;

  void set(const std::string& metric, const std::string& dataset, const std::string& model, const TableCell& cell);
  // Adds every row and model of `other`; cells of `other` win.
  void merge(const ResultTable& other);
};

// JSON {"models": [...], "rows": [{"metric", "dataset", "cells": {model: text}}]}.
ResultTable load_result_table(const std::filesystem::path& path);
void write_result_table(const std::filesystem::path& path, const ResultTable& table);

// CSV: metric, dataset, one column per model, then rel_pct_vs_<b> and
// delta_pts_vs_<b> for every baseline. Derived cells compare the target's mean
// with the baseline's and are blank when either is missing.
std::string report_table_csv(const ResultTable& table, const std::string& target, std::span<const std::string> baselines);

}  // namespace renuance
