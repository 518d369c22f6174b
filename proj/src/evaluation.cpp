// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/evaluation.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "renuance/http_client.h"
#include "renuance/training.h"

namespace renuance {

namespace {

using ojson = nlohmann::ordered_json;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool contains_any(const std::string& haystack, std::initializer_list<std::string_view> needles) {
  return std::any_of(needles.begin(), needles.end(), [&](std::string_view n) { return haystack.find(n) != std::string::npos; });
}

void check_ordinal(int v, const std::string& id) {
  if (v < 0 || v > 2) throw ValidationError(fmt::format("{}: empathy score {} outside 0..2", id, v));
}

std::string std_text(double std) {
  std::string s = fmt::format("{:.3f}", std);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Empathy

EmpathyScore heuristic_stub_scorer(std::string_view response) {
  const std::string t = lower(response);
  EmpathyScore s;
  const bool question = t.find('?') != std::string::npos;
  if (question && contains_any(t, {"what", "why", "how", "can you", "could you", "tell me"})) {
    s.ex = 2;
  } else if (question) {
    s.ex = 1;
  }
  if (contains_any(t, {"sorry to hear", "i understand", "that sounds"})) {
    s.er = 2;
  } else if (contains_any(t, {"sad", "angry", "happy", "afraid", "anxious", "upset"})) {
    s.er = 1;
  }
  return s;
}

EmpathyScore StubEmpathyScorer::score(const std::string&, const std::string& response) { return heuristic_stub_scorer(response); }

ExternalEmpathyScorer::ExternalEmpathyScorer(std::string url) : url_(std::move(url)) {}

EmpathyScore ExternalEmpathyScorer::score(const std::string& id, const std::string& response) {
  const nlohmann::json reply = post_json(url_, {{"id", id}, {"response_text", response}});
  if (!reply.contains("er") || !reply.contains("ex") || !reply["er"].is_number_integer() || !reply["ex"].is_number_integer()) {
    throw std::runtime_error("scorer reply lacks integer er/ex");
  }
  if (reply.contains("id") && reply["id"] != id) throw std::runtime_error("scorer reply id mismatch");
  EmpathyScore s{reply["er"].get<int>(), reply["ex"].get<int>()};
  check_ordinal(s.er, id);
  check_ordinal(s.ex, id);
  return s;
}

EmpathyScoring score_empathy(std::span<const std::string> responses, EmpathyScorer& scorer, std::span<const std::string> ids) {
  if (!ids.empty() && ids.size() != responses.size()) throw std::invalid_argument("score_empathy: ids and responses differ in length");
  EmpathyScoring out;
  out.scores.reserve(responses.size());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    const std::string id = ids.empty() ? std::to_string(i) : ids[i];
    try {
      const EmpathyScore s = scorer.score(id, responses[i]);
      check_ordinal(s.er, id);
      check_ordinal(s.ex, id);
      out.scores.emplace_back(s);
    } catch (const std::exception& e) {
      out.failures.push_back(fmt::format("{}: {}", id, e.what()));
      out.scores.emplace_back(std::nullopt);
    }
  }
  return out;
}

void write_empathy_results(const std::filesystem::path& path, std::span<const EmpathyResultRow> rows) {
  std::string out;
  for (const auto& r : rows) {
    ojson j;
    j["utt_id"] = r.utt_id;
    j["response"] = r.response;
    j["er"] = r.er;
    j["ex"] = r.ex;
    out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  }
  write_file(path, out);
}

std::vector<EmpathyResultRow> load_empathy_results(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError(fmt::format("results file not found: {}", path.string()));
  std::istringstream in(read_file(path));
  std::vector<EmpathyResultRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const ojson j = ojson::parse(line);
      EmpathyResultRow r{j.at("utt_id").get<std::string>(), j.value("response", ""), j.at("er").get<int>(), j.at("ex").get<int>()};
      check_ordinal(r.er, r.utt_id);
      check_ordinal(r.ex, r.utt_id);
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{} line {}: {}", path.filename().string(), line_no, e.what()));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Summaries

ScoreSummary summarize(std::span<const double> scores) {
  if (scores.empty()) throw std::invalid_argument("summarize: empty score list");
  const auto n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : scores) ss += (x - mean) * (x - mean);
  const double std = scores.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return ScoreSummary{mean, std, static_cast<int>(scores.size())};
}

ScoreSummary summarize(std::span<const int> scores) {
  std::vector<double> d(scores.begin(), scores.end());
  return summarize(std::span<const double>(d));
}

std::string format_mean_std(double mean, double std) { return fmt::format("{:.3f}({})", mean, std_text(std)); }

std::string format_mean_std(const ScoreSummary& s) { return format_mean_std(s.mean, s.std); }

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank

std::string_view wilcoxon_method_name(WilcoxonMethod m) { return m == WilcoxonMethod::kExact ? "exact" : "normal_approx"; }

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, std::optional<WilcoxonMethod> force) {
  if (a.size() != b.size()) throw std::invalid_argument(fmt::format("wilcoxon: length mismatch {} vs {}", a.size(), b.size()));
  if (a.empty()) throw std::invalid_argument("wilcoxon: empty samples");
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  }
  WilcoxonResult r;
  r.n_effective = static_cast<int>(d.size());
  if (d.empty()) {
    r.degenerate = true;
    r.p_two_sided = 1.0;
    r.method = WilcoxonMethod::kExact;
    return r;
  }
  const int n = r.n_effective;

  // Doubled average ranks are integers: a tie block over positions i..j gets i+j.
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return std::abs(d[x]) < std::abs(d[y]); });
  std::vector<int> rank2(d.size());
  std::vector<int> tie_sizes;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = static_cast<int>(i + 1 + j + 1);
    tie_sizes.push_back(static_cast<int>(j - i + 1));
    i = j + 1;
  }
  long w_plus2 = 0;
  long total2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    total2 += rank2[i];
    if (d[i] > 0) w_plus2 += rank2[i];
  }
  r.w_plus = static_cast<double>(w_plus2) / 2.0;
  r.w_minus = static_cast<double>(total2 - w_plus2) / 2.0;

  r.method = force.value_or(n <= kWilcoxonExactMaxN ? WilcoxonMethod::kExact : WilcoxonMethod::kNormalApprox);
  if (r.method == WilcoxonMethod::kExact) {
    if (n > 62) throw std::invalid_argument("wilcoxon: exact distribution limited to 62 nonzero pairs");
    // Number of sign assignments reaching each doubled rank sum.
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(total2) + 1, 0);
    ways[0] = 1;
    long reach = 0;
    for (int r2 : rank2) {
      for (long s = reach; s >= 0; --s) {
        if (ways[static_cast<std::size_t>(s)] != 0) ways[static_cast<std::size_t>(s + r2)] += ways[static_cast<std::size_t>(s)];
      }
      reach += r2;
    }
    std::uint64_t le = 0;
    std::uint64_t ge = 0;
    for (long s = 0; s <= total2; ++s) {
      if (s <= w_plus2) le += ways[static_cast<std::size_t>(s)];
      if (s >= w_plus2) ge += ways[static_cast<std::size_t>(s)];
    }
    const double all = std::ldexp(1.0, n);
    r.p_two_sided = std::min(1.0, 2.0 * std::min(static_cast<double>(le) / all, static_cast<double>(ge) / all));
  } else {
    const double nn = n;
    const double mean = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (int t : tie_sizes) var -= (static_cast<double>(t) * t * t - t) / 48.0;
    if (var <= 0.0) {
      r.p_two_sided = 1.0;
    } else {
      const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
      r.p_two_sided = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// SER

std::string_view ser_label_name(SerLabel l) {
  switch (l) {
    case SerLabel::kNeutral: return "neutral";
    case SerLabel::kHappy: return "happy";
    case SerLabel::kAngry: return "angry";
    case SerLabel::kSad: return "sad";
    case SerLabel::kSurprise: return "surprise";
    case SerLabel::kUnparsed: return "unparsed";
  }
  return "unparsed";
}

SerLabel extract_emotion_label(std::string_view text) {
  const std::string t = lower(text);
  SerLabel best = SerLabel::kUnparsed;
  std::size_t best_pos = std::string::npos;
  for (SerLabel l : {SerLabel::kNeutral, SerLabel::kSad, SerLabel::kAngry, SerLabel::kHappy, SerLabel::kSurprise}) {
    const std::size_t pos = t.find(ser_label_name(l));
    if (pos != std::string::npos && (best_pos == std::string::npos || pos < best_pos)) {
      best = l;
      best_pos = pos;
    }
  }
  return best;
}

ConfusionMatrix ConfusionMatrix::emotion_matrix() {
  ConfusionMatrix cm;
  cm.counts = Eigen::MatrixXi::Zero(kNumEmotions, kNumEmotions + 2);
  for (auto name : kEmotionNames) {
    cm.row_names.emplace_back(name);
    cm.col_names.emplace_back(name);
  }
  cm.col_names.emplace_back("surprise");
  cm.col_names.emplace_back("unparsed");
  return cm;
}

void ConfusionMatrix::add(int gold, int predicted) {
  if (gold < 0 || gold >= counts.rows() || predicted < 0 || predicted >= counts.cols()) {
    throw std::out_of_range("confusion matrix index out of range");
  }
  ++counts(gold, predicted);
}

double unweighted_accuracy(const ConfusionMatrix& cm, bool skip_empty_rows) {
  if (cm.counts.cols() < cm.counts.rows()) throw std::invalid_argument("unweighted_accuracy: fewer columns than gold classes");
  double sum = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < cm.counts.rows(); ++i) {
    const int row = cm.counts.row(i).sum();
    if (row == 0) {
      if (skip_empty_rows) continue;
      const std::string name = i < static_cast<Eigen::Index>(cm.row_names.size()) ? cm.row_names[static_cast<std::size_t>(i)]
                                                                                    : std::to_string(i);
      throw ValidationError(fmt::format("unweighted_accuracy: gold class '{}' has no samples", name));
    }
    sum += static_cast<double>(cm.counts(i, i)) / row;
    ++used;
  }
  if (used == 0) throw ValidationError("unweighted_accuracy: no gold samples");
  return sum / used;
}

double relative_improvement(double a, double b) {
  if (b == 0.0) throw std::invalid_argument("relative_improvement: baseline is zero");
  return 100.0 * (a - b) / b;
}

double absolute_delta_points(double a, double b) { return 100.0 * (a - b); }

SerReport evaluate_ser(ReLlmModel& model, const DatasetManifest& test, SerMode mode, int max_new) {
  if (mode == SerMode::kHead && !model.traits().ce) {
    throw ValidationError(fmt::format("head-based SER needs the categorical head, which {} mode does not train",
                                      train_mode_name(model.mode())));
  }
  SerReport report;
  report.cm = ConfusionMatrix::emotion_matrix();
  for (const auto& r : test.records) {
    if (!r.emotion_cat) throw ValidationError(fmt::format("{}: SER evaluation needs emotion_cat", r.utt_id));
    SerPrediction p;
    p.utt_id = r.utt_id;
    p.gold = *r.emotion_cat;
    const ModeTraits t = model.traits();
    Waveform wave;
    if (t.speech) wave = read_wav(test.resolve_audio(r));
    if (mode == SerMode::kHead) {
      const EmotionPrediction pred = model.heads().predict(mean_pool(model.fuse(wave)));
      p.predicted = static_cast<SerLabel>(pred.argmax());
    } else {
      const Matrix ctx = t.speech ? model.speech_context(ser_eval(), model.fuse(wave))
                                  : model.text_context(ser_eval(), text_mode_input(model.mode(), r.transcript, r.emotion_cat));
      p.response = generate(model.lm(), ctx, max_new, &model.tokenizer()).text;
      p.predicted = extract_emotion_label(p.response);
    }
    report.cm.add(static_cast<int>(p.gold), static_cast<int>(p.predicted));
    report.predictions.push_back(std::move(p));
  }
  for (Eigen::Index i = 0; i < report.cm.counts.rows(); ++i) {
    if (report.cm.counts.row(i).sum() == 0) spdlog::warn("SER: no gold samples for '{}', left out of UA", report.cm.row_names[i]);
  }
  report.ua = unweighted_accuracy(report.cm, true);
  return report;
}

std::vector<GeneratedResponse> generate_responses(ReLlmModel& model, const DatasetManifest& manifest, int max_new) {
  std::vector<GeneratedResponse> out;
  for (const auto& r : manifest.records) {
    Waveform wave;
    if (model.traits().speech) wave = read_wav(manifest.resolve_audio(r));
    const GenerationResult g = model.respond(wave, r.transcript, r.emotion_cat, max_new);
    out.push_back(GeneratedResponse{r.utt_id, std::string(prompt_name_str(PromptName::kContinuationStep2)), g.text,
                                    g.per_step_logprob});
  }
  return out;
}

void write_generations(const std::filesystem::path& path, std::span<const GeneratedResponse> rows) {
  std::string out;
  for (const auto& r : rows) {
    ojson j;
    j["utt_id"] = r.utt_id;
    j["prompt_name"] = r.prompt_name;
    j["response"] = r.response;
    j["logprobs"] = r.logprobs;
    out += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Report table

std::optional<TableCell> parse_table_cell(std::string_view text) {
  std::string t(text);
  t.erase(std::remove_if(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }), t.end());
  if (t.empty() || t == "--" || t == "-") return std::nullopt;
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) throw ValidationError(fmt::format("table cell '{}' is not a number", text));
    return v;
  };
  TableCell c;
  const auto open = t.find('(');
  if (open == std::string::npos) {
    c.mean = number(t);
    return c;
  }
  if (t.back() != ')') throw ValidationError(fmt::format("table cell '{}' lacks a closing parenthesis", text));
  c.mean = number(t.substr(0, open));
  c.std = number(t.substr(open + 1, t.size() - open - 2));
  return c;
}

std::string format_table_cell(const TableCell& c) {
  return c.std ? format_mean_std(c.mean, *c.std) : fmt::format("{:.3f}", c.mean);
}

void ResultTable::set(const std::string& metric, const std::string& dataset, const std::string& model, const TableCell& cell) {
  const auto key = std::make_pair(metric, dataset);
  if (!cells.contains(key)) row_keys.push_back(key);
  cells[key][model] = cell;
  if (std::find(models.begin(), models.end(), model) == models.end()) models.push_back(model);
}

void ResultTable::merge(const ResultTable& other) {
  for (const auto& m : other.models) {
    if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
  }
  for (const auto& key : other.row_keys) {
    for (const auto& [model, cell] : other.cells.at(key)) set(key.first, key.second, model, cell);
  }
}

ResultTable load_result_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError(fmt::format("table file not found: {}", path.string()));
  ojson j;
  try {
    j = ojson::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
  }
  ResultTable t;
  try {
    if (j.contains("models")) t.models = j["models"].get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      const auto metric = row.at("metric").get<std::string>();
      const auto dataset = row.at("dataset").get<std::string>();
      const auto key = std::make_pair(metric, dataset);
      if (!t.cells.contains(key)) {
        t.row_keys.push_back(key);
        t.cells[key];
      }
      for (const auto& [model, value] : row.at("cells").items()) {
        if (value.is_null()) continue;
        std::optional<TableCell> c;
        if (value.is_number()) {
          c = TableCell{value.get<double>(), std::nullopt};
        } else {
          c = parse_table_cell(value.get<std::string>());
        }
        if (c) t.set(metric, dataset, model, *c);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return t;
}

void write_result_table(const std::filesystem::path& path, const ResultTable& table) {
  ojson j;
  j["models"] = table.models;
  j["rows"] = ojson::array();
  for (const auto& key : table.row_keys) {
    ojson row;
    row["metric"] = key.first;
    row["dataset"] = key.second;
    row["cells"] = ojson::object();
    for (const auto& m : table.models) {
      const auto& cells = table.cells.at(key);
      if (auto it = cells.find(m); it != cells.end()) row["cells"][m] = format_table_cell(it->second);
    }
    j["rows"].push_back(row);
  }
  write_file(path, j.dump(2) + "\n");
}

std::string report_table_csv(const ResultTable& table, const std::string& target, std::span<const std::string> baselines) {
  std::string out = "metric,dataset";
  for (const auto& m : table.models) out += ",model_" + m;
  for (const auto& b : baselines) out += ",rel_pct_vs_" + b;
  for (const auto& b : baselines) out += ",delta_pts_vs_" + b;
  out += "\n";
  for (const auto& key : table.row_keys) {
    const auto& cells = table.cells.at(key);
    out += key.first + "," + key.second;
    for (const auto& m : table.models) {
      auto it = cells.find(m);
      out += "," + (it == cells.end() ? std::string("--") : format_table_cell(it->second));
    }
    const auto tgt = cells.find(target);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : baselines) {
        const auto base = cells.find(b);
        out += ",";
        if (tgt == cells.end() || base == cells.end()) continue;
        if (pass == 0) {
          if (base->second.mean != 0.0) out += fmt::format("{:.2f}", relative_improvement(tgt->second.mean, base->second.mean));
        } else {
          out += fmt::format("{:.2f}", absolute_delta_points(tgt->second.mean, base->second.mean));
        }
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace renuance
