// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/cli.h"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "renuance/config.h"
#include "renuance/evaluation.h"
#include "renuance/manifest.h"
#include "renuance/synth.h"
#include "renuance/training.h"

namespace renuance {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  std::string log_level = "info";

  std::string manifest;
  std::string out;
  std::uint64_t seed = 0;

  // data synth
  int per_emotion = 4;
  std::string dataset = "synthetic";
  // data split
  std::string rule;
  double train_ratio = 0.7;
  std::size_t n_train = 4290;
  std::size_t n_test = 1245;
  // data pseudo-dims / external services
  std::string url;
  // gen-expected
  std::string generator = "fixture";
  std::string fixture_template{kDefaultFixtureTemplate};
  // train
  std::string paired;
  std::string mode;
  std::optional<int> max_steps;
  std::optional<double> step_size;
  std::optional<int> batch_size;
  std::optional<int> log_interval;
  std::optional<std::uint64_t> train_seed;
  // eval
  std::string checkpoint;
  std::string scorer = "stub";
  std::string responses;
  std::string model_name;
  std::string ser_mode = "prompt";
  int max_new = 48;
  // stats
  std::string file_a;
  std::string file_b;
  std::string metric = "both";
  // report
  std::vector<std::string> cells;
  std::string target = "6";
  std::string baselines = "1,4,5";
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

// Config file (RENUANCE_CONFIG or --config), then --set overrides.
KeyValueConfig resolve_config(const Options& o) {
  KeyValueConfig kv;
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("RENUANCE_CONFIG"); env != nullptr) path = env;
  }
  if (!path.empty()) kv = KeyValueConfig::load(path);
  for (const auto& ov : o.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError(fmt::format("--set expects key=value, got '{}'", ov));
    kv.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  if (!path.empty()) kv.set("run.config_file", fs::absolute(path).string());
  return kv;
}

fs::path require_out(const Options& o) {
  if (o.out.empty()) throw ValidationError("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

void write_run_config(const fs::path& dir, const std::string& command, KeyValueConfig kv,
                      const std::map<std::string, std::string>& paths) {
  kv.set("run.command", command);
  for (const auto& [k, v] : paths) {
    if (!v.empty()) kv.set("path." + k, fs::absolute(v).lexically_normal().string());
  }
  write_file(dir / fmt::format("run_config.{}.txt", command), kv.to_text());
}

std::string format_p(double p) { return p == std::floor(p) ? fmt::format("{:.1f}", p) : fmt::format("{:.6g}", p); }

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_data_synth(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  SynthConfig c;
  c.per_emotion = o.per_emotion;
  c.seed = o.seed;
  c.dataset = parse_dataset(o.dataset);
  const DatasetManifest m = synthesize_corpus(dir, c);
  KeyValueConfig kv = resolve_config(o);
  kv.set("synth.per_emotion", std::to_string(o.per_emotion));
  kv.set("synth.dataset", o.dataset);
  kv.set("seed", std::to_string(o.seed));
  write_run_config(dir, "data_synth", kv, {{"out", o.out}});
  out << fmt::format("records={} manifest={}\n", m.size(), (dir / "manifest.jsonl").string());
  return 0;
}

int cmd_data_build(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  const DatasetManifest m = load_manifest(o.manifest);
  DatasetManifest copy = m;
  // Audio stays reachable from the new location.
  for (auto& r : copy.records) r.audio = fs::absolute(m.resolve_audio(r)).lexically_normal().string();
  write_manifest(dir / "manifest.jsonl", copy);
  std::map<std::string, int> per_emotion;
  int with_vad = 0;
  for (const auto& r : m.records) {
    ++per_emotion[r.emotion_cat ? std::string(emotion_name(*r.emotion_cat)) : "none"];
    with_vad += r.vad.has_value();
  }
  ojson summary;
  summary["records"] = m.size();
  summary["dataset"] = dataset_name(m.records.front().dataset);
  summary["schema_version"] = m.schema_version;
  summary["emotion_counts"] = per_emotion;
  summary["with_vad"] = with_vad;
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  write_run_config(dir, "data_build", resolve_config(o), {{"manifest", o.manifest}, {"out", o.out}});
  out << fmt::format("records={} dataset={}\n", m.size(), dataset_name(m.records.front().dataset));
  return 0;
}

int cmd_data_split(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  const DatasetManifest m = load_manifest(o.manifest);
  SplitResult s;
  if (o.rule == "iemocap") {
    s = split_iemocap(m);
  } else if (o.rule == "esd") {
    s = split_esd(m, o.train_ratio, o.seed);
  } else {
    s = sample_msp(m, o.n_train, o.n_test, o.seed);
  }
  // Keep audio paths valid relative to the new files.
  for (auto* side : {&s.train, &s.test}) {
    for (auto& r : side->records) r.audio = fs::absolute(m.resolve_audio(r)).lexically_normal().string();
  }
  write_split(dir, s);
  KeyValueConfig kv = resolve_config(o);
  kv.set("split.rule", o.rule);
  kv.set("seed", std::to_string(o.seed));
  write_run_config(dir, "data_split", kv, {{"manifest", o.manifest}, {"out", o.out}});
  out << fmt::format("rule={} train={} test={}\n", s.rule, s.train.size(), s.test.size());
  return 0;
}

int cmd_data_pseudo(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  const DatasetManifest m = load_manifest(o.manifest);
  const KeyValueConfig kv = resolve_config(o);
  std::unique_ptr<EmotionBackend> enc;
  if (o.url.empty()) {
    enc = std::make_unique<EmotionEncoder>(ModelConfig::from_kv(kv).emotion);
  } else {
    enc = std::make_unique<ExternalEmotionEncoder>(o.url, ModelConfig::from_kv(kv).emotion.emb_dim);
  }
  PseudoLabelResult r = generate_pseudo_dimensional_labels(m, *enc);
  for (auto& rec : r.manifest.records) rec.audio = fs::absolute(m.resolve_audio(rec)).lexically_normal().string();
  write_manifest(dir / "manifest.jsonl", r.manifest);
  write_run_config(dir, "data_pseudo_dims", kv, {{"manifest", o.manifest}, {"out", o.out}});
  out << fmt::format("labeled={} skipped_gold={} encoder={}\n", r.labeled, r.skipped_gold, enc->checksum());
  return 0;
}

int cmd_gen_expected(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  const DatasetManifest m = load_manifest(o.manifest);
  std::unique_ptr<ResponseGenerator> gen;
  if (o.generator == "fixture") {
    gen = std::make_unique<FixtureResponseGenerator>(o.fixture_template);
  } else {
    if (o.url.empty()) throw ValidationError("--generator external needs --url");
    gen = std::make_unique<ExternalResponseGenerator>(o.url);
  }
  const ExpectedResponseReport rep = generate_expected_responses(m, *gen);
  write_paired_set(dir / "paired.jsonl", rep.samples);
  KeyValueConfig kv = resolve_config(o);
  kv.set("gen.generator", o.generator);
  if (o.generator == "fixture") kv.set("gen.template", o.fixture_template);
  write_run_config(dir, "gen_expected", kv, {{"manifest", o.manifest}, {"out", o.out}});
  out << fmt::format("paired={} skipped={}\n", rep.samples.size(), rep.skipped.size());
  return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  KeyValueConfig kv = resolve_config(o);
  if (!o.mode.empty()) kv.set("train.mode", o.mode);
  if (o.max_steps) kv.set("train.max_steps", std::to_string(*o.max_steps));
  if (o.step_size) kv.set("train.step_size", fmt::format("{}", *o.step_size));
  if (o.batch_size) kv.set("train.batch_size", std::to_string(*o.batch_size));
  if (o.log_interval) kv.set("train.log_interval", std::to_string(*o.log_interval));
  if (o.train_seed) kv.set("train.seed", std::to_string(*o.train_seed));
  const ModelConfig mc = ModelConfig::from_kv(kv);
  const TrainConfig tc = TrainConfig::from_kv(kv);
  const auto paired = load_paired_set(o.paired);
  if (paired.empty()) throw ValidationError("paired set is empty");
  const TrainResult r = train(mc, tc, paired, dir);
  KeyValueConfig resolved = mc.to_kv();
  resolved.merge(tc.to_kv());
  resolved.merge(kv);
  write_run_config(dir, "train", resolved, {{"paired", o.paired}, {"out", o.out}});
  const LossBreakdown last = r.log.empty() ? LossBreakdown{} : r.log.back().second;
  out << fmt::format("steps={} final {} checkpoint={}\n", tc.max_steps, last.to_string(), r.checkpoint.string());
  return 0;
}

std::string dataset_tag(const DatasetManifest& m) { return std::string(dataset_name(m.records.front().dataset)); }

int cmd_eval_empathy(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  std::string dataset = "synthetic";
  std::string model_name = o.model_name;
  if (!o.responses.empty()) {
    std::istringstream in(read_file(o.responses));
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const ojson j = ojson::parse(line);
      ids.push_back(j.at("utt_id").get<std::string>());
      texts.push_back(j.at("response").get<std::string>());
    }
  } else {
    if (o.checkpoint.empty() || o.manifest.empty()) throw ValidationError("eval empathy needs --responses or --checkpoint with --manifest");
    auto model = ReLlmModel::load(o.checkpoint);
    const DatasetManifest m = load_manifest(o.manifest);
    dataset = dataset_tag(m);
    if (model_name.empty()) model_name = std::string(train_mode_name(model->mode()));
    const auto gens = generate_responses(*model, m, o.max_new);
    write_generations(dir / "generations.jsonl", gens);
    for (const auto& g : gens) {
      ids.push_back(g.utt_id);
      texts.push_back(g.response);
    }
  }
  if (model_name.empty()) model_name = "model";
  std::unique_ptr<EmpathyScorer> scorer;
  if (o.scorer == "stub") {
    scorer = std::make_unique<StubEmpathyScorer>();
  } else {
    if (o.url.empty()) throw ValidationError("--scorer external needs --url");
    scorer = std::make_unique<ExternalEmpathyScorer>(o.url);
  }
  const EmpathyScoring scoring = score_empathy(texts, *scorer, ids);
  std::vector<EmpathyResultRow> rows;
  std::vector<int> er, ex;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!scoring.scores[i]) continue;
    rows.push_back({ids[i], texts[i], scoring.scores[i]->er, scoring.scores[i]->ex});
    er.push_back(scoring.scores[i]->er);
    ex.push_back(scoring.scores[i]->ex);
  }
  for (const auto& f : scoring.failures) spdlog::warn("scorer failure: {}", f);
  write_empathy_results(dir / "results.jsonl", rows);
  ResultTable table;
  if (!rows.empty()) {
    const ScoreSummary ser = summarize(er);
    const ScoreSummary sex = summarize(ex);
    table.set("ER", dataset, model_name, TableCell{ser.mean, ser.std});
    table.set("Ex", dataset, model_name, TableCell{sex.mean, sex.std});
    out << fmt::format("n={} ER={} Ex={} failures={}\n", rows.size(), format_mean_std(ser), format_mean_std(sex),
                       scoring.failures.size());
  } else {
    out << fmt::format("n=0 failures={}\n", scoring.failures.size());
  }
  write_result_table(dir / "cells.json", table);
  KeyValueConfig kv = resolve_config(o);
  kv.set("eval.scorer", o.scorer);
  kv.set("eval.model_name", model_name);
  write_run_config(dir, "eval_empathy", kv,
                   {{"checkpoint", o.checkpoint}, {"manifest", o.manifest}, {"responses", o.responses}, {"out", o.out}});
  return scoring.failures.empty() || !rows.empty() ? 0 : 1;
}

int cmd_eval_ser(const Options& o, std::ostream& out) {
  const fs::path dir = require_out(o);
  auto model = ReLlmModel::load(o.checkpoint);
  const DatasetManifest m = load_manifest(o.manifest);
  const SerMode mode = o.ser_mode == "head" ? SerMode::kHead : SerMode::kPrompt;
  const SerReport rep = evaluate_ser(*model, m, mode, o.max_new);
  std::string preds;
  for (const auto& p : rep.predictions) {
    ojson j;
    j["utt_id"] = p.utt_id;
    j["gold"] = emotion_name(p.gold);
    j["predicted"] = ser_label_name(p.predicted);
    j["response"] = p.response;
    preds += j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  }
  write_file(dir / "predictions.jsonl", preds);
  std::string cm = "gold";
  for (const auto& c : rep.cm.col_names) cm += "," + c;
  cm += "\n";
  for (Eigen::Index i = 0; i < rep.cm.counts.rows(); ++i) {
    cm += rep.cm.row_names[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < rep.cm.counts.cols(); ++j) cm += fmt::format(",{}", rep.cm.counts(i, j));
    cm += "\n";
  }
  write_file(dir / "confusion.csv", cm);
  const std::string model_name = o.model_name.empty() ? std::string(train_mode_name(model->mode())) : o.model_name;
  ResultTable table;
  table.set("UA", dataset_tag(m), model_name, TableCell{rep.ua, std::nullopt});
  write_result_table(dir / "cells.json", table);
  ojson summary;
  summary["mode"] = o.ser_mode;
  summary["ua"] = rep.ua;
  summary["n"] = rep.predictions.size();
  write_file(dir / "ser.json", summary.dump(2) + "\n");
  KeyValueConfig kv = resolve_config(o);
  kv.set("eval.ser_mode", o.ser_mode);
  write_run_config(dir, "eval_ser", kv, {{"checkpoint", o.checkpoint}, {"manifest", o.manifest}, {"out", o.out}});
  out << fmt::format("mode={} n={} UA={:.4f}\n", o.ser_mode, rep.predictions.size(), rep.ua);
  return 0;
}

int cmd_stats_wilcoxon(const Options& o, std::ostream& out) {
  const auto a = load_empathy_results(o.file_a);
  const auto b = load_empathy_results(o.file_b);
  std::map<std::string, const EmpathyResultRow*> by_id;
  for (const auto& r : b) by_id[r.utt_id] = &r;
  std::vector<double> a_er, a_ex, b_er, b_ex;
  for (const auto& r : a) {
    auto it = by_id.find(r.utt_id);
    if (it == by_id.end()) continue;
    a_er.push_back(r.er);
    a_ex.push_back(r.ex);
    b_er.push_back(it->second->er);
    b_ex.push_back(it->second->ex);
  }
  if (a_er.empty()) throw ValidationError("no shared utt_id between the two result files");
  ojson report = ojson::object();
  auto run = [&](const char* name, const std::vector<double>& x, const std::vector<double>& y) {
    const WilcoxonResult w = wilcoxon_signed_rank(x, y);
    out << fmt::format("metric={} n={} n_effective={} w_plus={} w_minus={} p={} method={}{}\n", name, x.size(), w.n_effective,
                       w.w_plus, w.w_minus, format_p(w.p_two_sided), wilcoxon_method_name(w.method),
                       w.degenerate ? " degenerate" : "");
    report[name] = {{"n", x.size()},           {"n_effective", w.n_effective}, {"w_plus", w.w_plus},
                    {"w_minus", w.w_minus},    {"p", w.p_two_sided},          {"method", wilcoxon_method_name(w.method)},
                    {"degenerate", w.degenerate}};
  };
  if (o.metric == "er" || o.metric == "both") run("er", a_er, b_er);
  if (o.metric == "ex" || o.metric == "both") run("ex", a_ex, b_ex);
  if (!o.out.empty()) {
    const fs::path dir = require_out(o);
    write_file(dir / "wilcoxon.json", report.dump(2) + "\n");
    write_run_config(dir, "stats_wilcoxon", resolve_config(o), {{"a", o.file_a}, {"b", o.file_b}, {"out", o.out}});
  }
  return 0;
}

int cmd_report_table(const Options& o, std::ostream& out) {
  if (o.cells.empty()) throw ValidationError("report table needs at least one --cells file");
  ResultTable table;
  for (const auto& c : o.cells) table.merge(load_result_table(c));
  const auto baselines = split_csv(o.baselines);
  const std::string csv = report_table_csv(table, o.target, baselines);
  if (!o.out.empty()) {
    const fs::path dir = require_out(o);
    write_file(dir / "report.csv", csv);
    KeyValueConfig kv = resolve_config(o);
    kv.set("report.target", o.target);
    kv.set("report.baselines", o.baselines);
    std::map<std::string, std::string> paths{{"out", o.out}};
    for (std::size_t i = 0; i < o.cells.size(); ++i) paths["cells" + std::to_string(i)] = o.cells[i];
    write_run_config(dir, "report_table", kv, paths);
  }
  out << csv;
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Speech-conditioned empathetic response pipeline", "renuance"};
  app.require_subcommand(1);
  app.add_option("--config", o.config_path, "key=value config file (default: $RENUANCE_CONFIG)");
  app.add_option("--set", o.overrides, "config override key=value (repeatable; wins over the file)");
  app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error")->capture_default_str();

  auto* data = app.add_subcommand("data", "manifest utilities");
  data->require_subcommand(1);
  auto* synth = data->add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--out", o.out)->required();
  synth->add_option("--per-emotion", o.per_emotion)->capture_default_str();
  synth->add_option("--seed", o.seed)->capture_default_str();
  synth->add_option("--dataset", o.dataset)->check(CLI::IsMember({"synthetic", "IEM", "ESD", "MSP-P"}))->capture_default_str();

  auto* build = data->add_subcommand("build", "load and validate a manifest");
  build->add_option("--manifest", o.manifest)->required();
  build->add_option("--out", o.out)->required();

  auto* split = data->add_subcommand("split", "split a manifest");
  split->add_option("--manifest", o.manifest)->required();
  split->add_option("--rule", o.rule)->required()->check(CLI::IsMember({"iemocap", "esd", "msp"}));
  split->add_option("--seed", o.seed)->capture_default_str();
  split->add_option("--train-ratio", o.train_ratio)->capture_default_str();
  split->add_option("--n-train", o.n_train)->capture_default_str();
  split->add_option("--n-test", o.n_test)->capture_default_str();
  split->add_option("--out", o.out)->required();

  auto* pseudo = data->add_subcommand("pseudo-dims", "fill missing VAD labels from the frozen emotion encoder");
  pseudo->add_option("--manifest", o.manifest)->required();
  pseudo->add_option("--url", o.url, "external emotion encoder endpoint");
  pseudo->add_option("--out", o.out)->required();

  auto* gen = app.add_subcommand("gen-expected", "generate expected responses");
  gen->add_option("--manifest", o.manifest)->required();
  gen->add_option("--generator", o.generator)->check(CLI::IsMember({"fixture", "external"}))->capture_default_str();
  gen->add_option("--template", o.fixture_template, "fixture template")->capture_default_str();
  gen->add_option("--url", o.url, "external generator endpoint");
  gen->add_option("--out", o.out)->required();

  auto* train_cmd = app.add_subcommand("train", "align the speech model on a paired set");
  train_cmd->add_option("--paired", o.paired)->required();
  train_cmd->add_option("--mode", o.mode)
      ->check(CLI::IsMember({"re_llm", "no_dim_aux", "no_emo_enc", "speech_baseline", "text_only", "text_plus_label"}));
  train_cmd->add_option("--steps", o.max_steps);
  train_cmd->add_option("--step-size", o.step_size);
  train_cmd->add_option("--batch-size", o.batch_size);
  train_cmd->add_option("--log-interval", o.log_interval);
  train_cmd->add_option("--seed", o.train_seed);
  train_cmd->add_option("--out", o.out)->required();

  auto* eval = app.add_subcommand("eval", "evaluation");
  eval->require_subcommand(1);
  auto* emp = eval->add_subcommand("empathy", "score responses for emotional reaction and exploration");
  emp->add_option("--checkpoint", o.checkpoint);
  emp->add_option("--manifest", o.manifest);
  emp->add_option("--responses", o.responses, "JSONL with utt_id and response; skips generation");
  emp->add_option("--scorer", o.scorer)->check(CLI::IsMember({"stub", "external"}))->capture_default_str();
  emp->add_option("--url", o.url, "external scorer endpoint");
  emp->add_option("--model-name", o.model_name);
  emp->add_option("--max-new", o.max_new)->capture_default_str();
  emp->add_option("--out", o.out)->required();

  auto* ser = eval->add_subcommand("ser", "speech emotion recognition accuracy");
  ser->add_option("--checkpoint", o.checkpoint)->required();
  ser->add_option("--manifest", o.manifest)->required();
  ser->add_option("--mode", o.ser_mode)->check(CLI::IsMember({"prompt", "head"}))->capture_default_str();
  ser->add_option("--model-name", o.model_name);
  ser->add_option("--max-new", o.max_new)->capture_default_str();
  ser->add_option("--out", o.out)->required();

  auto* stats = app.add_subcommand("stats", "statistics");
  stats->require_subcommand(1);
  auto* wil = stats->add_subcommand("wilcoxon", "paired signed-rank test on two result files");
  wil->add_option("a", o.file_a)->required();
  wil->add_option("b", o.file_b)->required();
  wil->add_option("--metric", o.metric)->check(CLI::IsMember({"er", "ex", "both"}))->capture_default_str();
  wil->add_option("--out", o.out);

  auto* report = app.add_subcommand("report", "reporting");
  report->require_subcommand(1);
  auto* table = report->add_subcommand("table", "table CSV with derived improvement columns");
  table->add_option("--cells", o.cells, "table JSON (repeatable)")->required();
  table->add_option("--target", o.target)->capture_default_str();
  table->add_option("--baselines", o.baselines)->capture_default_str();
  table->add_option("--out", o.out);

  std::vector<std::string> argv_store = args;
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("renuance", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::from_str(o.log_level));
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);

  int code = 0;
  try {
    if (synth->parsed()) code = cmd_data_synth(o, out);
    else if (build->parsed()) code = cmd_data_build(o, out);
    else if (split->parsed()) code = cmd_data_split(o, out);
    else if (pseudo->parsed()) code = cmd_data_pseudo(o, out);
    else if (gen->parsed()) code = cmd_gen_expected(o, out);
    else if (train_cmd->parsed()) code = cmd_train(o, out);
    else if (emp->parsed()) code = cmd_eval_empathy(o, out);
    else if (ser->parsed()) code = cmd_eval_ser(o, out);
    else if (wil->parsed()) code = cmd_stats_wilcoxon(o, out);
    else if (table->parsed()) code = cmd_report_table(o, out);
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    code = 1;
  }
  spdlog::set_default_logger(previous);
  return code;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace renuance
