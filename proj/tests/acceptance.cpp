// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Every check compares against an oracle in support.h or a value computed here,
// never against the code path it exercises.

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fixtures.h"
#include "json.hpp"
#include "pipeline_fixture.h"
#include "renuance/cli.h"
#include "renuance/evaluation.h"
#include "renuance/manifest.h"
#include "support.h"

#if !defined(RENUANCE_FIXTURE_DIR) || !defined(RENUANCE_TOOL_PATH)
#error "RENUANCE_FIXTURE_DIR and RENUANCE_TOOL_PATH are set by the build"
#endif

namespace renuance {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::TempDir;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// --- 1 ---------------------------------------------------------------------

Outcome adapter_length_law() {
  AdapterConfig c;
  c.in_dim = 5;
  c.out_dim = 4;
  c.bottleneck_dim = 3;
  ModalityAdapter adapter(c, 1);
  auto formula = [&](int t) {
    for (int l = 0; l < c.n_conv_layers; ++l) t = testing::conv_out_len(t, c.kernel, c.stride, c.padding);
    return t;
  };
  auto check = [&](int t, int expect) {
    EmbeddingSequence s;
    s.frames = Matrix::Ones(t, c.in_dim);
    return adapter_output_length(t, c) == expect && adapter.adapt(s).length() == expect;
  };
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> len(8, 512);
  int random_ok = 0, multiple_ok = 0, multiples = 0;
  for (int i = 0; i < 200; ++i) {
    const int t = len(rng);
    random_ok += check(t, formula(t));
  }
  for (int t = 8; t <= 512; t += 8) {
    ++multiples;
    multiple_ok += check(t, t / 8);
  }
  return {random_ok == 200 && multiple_ok == multiples,
          fmt::format("random T {}/200 match per-layer formula, T%8==0 {}/{} give T/8", random_ok, multiple_ok, multiples)};
}

// --- 2 ---------------------------------------------------------------------

Outcome gradient_suite() {
  std::map<std::string, double> err;
  Rng rng(21);
  {
    LanguageModel lm(LMConfig{32, 1, 2, 8, 32}, 3);
    const Matrix ctx = random_matrix(4, 8, rng);
    const std::vector<int> target{5, 17, 1};
    err["kl_nll"] = testing::gradient_check(lm.parameters(), [&](ad::Tape& t) {
      return sequence_nll(t, lm, t.constant(ctx), target);
    });
    ad::Parameter student("student", random_matrix(3, 8, rng));
    const Matrix teacher = random_matrix(5, 8, rng);
    err["kl_teacher"] = testing::gradient_check({&student}, [&](ad::Tape& t) {
      return teacher_kl(t, lm, t.param(student), teacher, target);
    });
  }
  {
    EmotionHeads heads(6, 2);
    ad::Parameter fused("fused", random_matrix(5, 6, rng));
    auto params = heads.parameters();
    params.push_back(&fused);
    const std::vector<int> cats{1, 3};
    const std::vector<Vad> vads{{0.2, 0.9, 0.4}, {0.7, 0.1, 0.5}};
    err["ce"] = testing::gradient_check(params, [&](ad::Tape& t) {
      const std::vector<ad::Var> probs{heads.classify(t, mean_pool(t.param(fused))),
                                       heads.classify(t, mean_pool(ad::scale(t.param(fused), 0.5)))};
      return ce_loss(probs, cats);
    });
    err["mse"] = testing::gradient_check(params, [&](ad::Tape& t) {
      const std::vector<ad::Var> preds{heads.regress(t, mean_pool(t.param(fused))),
                                       heads.regress(t, mean_pool(ad::scale(t.param(fused), 0.5)))};
      return mse_loss(preds, vads);
    });
  }
  SpeechEncoderConfig sc;
  sc.features.kind = FeatureKind::kRawWave;
  sc.features.hop = 6;
  sc.hidden_dim = 5;
  SpeechEncoder enc(sc, 11);
  AdapterConfig ac;
  ac.in_dim = 5;
  ac.out_dim = 8;
  ac.bottleneck_dim = 3;
  ModalityAdapter adapter(ac, 2);
  const Matrix x = random_matrix(16, 6, rng);
  {
    const Matrix w = random_matrix(16, 5, rng);
    err["speech_encoder"] = testing::gradient_check(enc.parameters(), [&](ad::Tape& t) {
      return ad::sum(ad::mul(enc.forward(t, x), t.constant(w)));
    });
    const Matrix w2 = random_matrix(adapter_output_length(16, ac), 8, rng);
    const Matrix xa = random_matrix(16, 5, rng);
    err["adapter"] = testing::gradient_check(adapter.parameters(), [&](ad::Tape& t) {
      return ad::sum(ad::mul(adapter.forward(t, t.constant(xa)), t.constant(w2)));
    });
  }
  {
    // Whole speech path: encoder -> adapter -> splice -> teacher-forced NLL.
    LanguageModel lm(LMConfig{32, 1, 2, 8, 32}, 5);
    const std::vector<int> prompt{7, Tokenizer::kSpeech, 9}, target{12, 1};
    std::vector<ad::Parameter*> all = enc.parameters();
    for (auto* p : adapter.parameters()) all.push_back(p);
    for (auto* p : lm.parameters()) all.push_back(p);
    err["speech_path_nll"] = testing::gradient_check(all, [&](ad::Tape& t) {
      ad::Var fused = adapter.forward(t, enc.forward(t, x));
      return sequence_nll(t, lm, splice_speech(prompt, fused, lm.embed_table(t)), target);
    });
  }
  bool ok = true;
  std::string detail;
  for (const auto& [name, e] : err) {
    ok = ok && e <= 1e-4;
    detail += fmt::format("{}{}={:.2e}", detail.empty() ? "" : " ", name, e);
  }
  return {ok, "max rel err " + detail};
}

// --- 3 ---------------------------------------------------------------------

Outcome loss_composition(const std::vector<PairedSample>& paired) {
  const std::vector<TrainMode> modes{TrainMode::kReLlm,          TrainMode::kNoDimAux, TrainMode::kNoEmoEnc,
                                     TrainMode::kSpeechBaseline, TrainMode::kTextOnly, TrainMode::kTextPlusLabel};
  const ModelConfig mc;
  const Tokenizer tok = build_tokenizer(paired, mc.vocab_limit);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> pick(0, paired.size() - 1);
  std::uniform_int_distribution<int> size(1, 4);
  int exact = 0, ablation_ok = 0, tape_ok = 0;
  for (int b = 0; b < 50; ++b) {
    const TrainMode mode = modes[static_cast<std::size_t>(b) % modes.size()];
    ReLlmModel model(mc, mode, tok);
    const TrainConfig cfg = testing::overfit_config(mode);
    const auto prepared = prepare_samples(paired, model, cfg);
    std::vector<const PreparedSample*> batch;
    std::vector<const PairedSample*> raw;
    for (int i = size(rng); i > 0; --i) {
      const std::size_t k = pick(rng);
      batch.push_back(&prepared[k]);
      raw.push_back(&paired[k]);
    }
    const LossBreakdown l = compute_total_loss(model, batch, cfg);
    const auto r = testing::recompute_loss(model, raw);
    exact += l.l_kl == r.kl && l.l_ce == r.ce && l.l_mse == r.mse && l.total == (r.kl + r.ce) + r.mse;
    const ModeTraits t = mode_traits(mode);
    ablation_ok += (l.l_ce == 0.0) == !t.ce && (l.l_mse == 0.0) == !t.mse && l.l_kl > 0.0;
    ad::Tape tape(false);
    tape_ok += record_total_loss(tape, model, batch, cfg).total.scalar() == l.total;
  }
  return {exact == 50 && ablation_ok == 50 && tape_ok == 50,
          fmt::format("exact recompute {}/50, ablated terms zero {}/50, tape total equal {}/50", exact, ablation_ok, tape_ok)};
}

// --- 4 ---------------------------------------------------------------------

Outcome frozen_encoder(const std::vector<PairedSample>& paired) {
  const ModelConfig mc;
  auto enc = std::make_shared<EmotionEncoder>(mc.emotion);
  const std::string before = enc->checksum();
  ReLlmModel model(mc, TrainMode::kReLlm, build_tokenizer(paired, mc.vocab_limit), enc);
  TrainConfig cfg = testing::overfit_config();
  cfg.max_steps = 500;
  const auto log = train_in_memory(model, cfg, paired);
  const std::string after = enc->checksum();
  return {before == after && log.back().first == 500,
          fmt::format("{} steps, checksum {} -> {}", log.back().first, before.substr(0, 16), after.substr(0, 16))};
}

// --- 5 ---------------------------------------------------------------------

Outcome overfit(const std::vector<PairedSample>& paired) {
  const ModelConfig mc;
  ReLlmModel model(mc, TrainMode::kReLlm, build_tokenizer(paired, mc.vocab_limit));
  const TrainConfig cfg = testing::overfit_config();
  const auto log = train_in_memory(model, cfg, paired);
  const auto prepared = prepare_samples(paired, model, cfg);
  std::vector<const PreparedSample*> all;
  for (const auto& p : prepared) all.push_back(&p);
  const LossBreakdown full = compute_total_loss(model, all, cfg);
  int correct = 0, verbatim = 0;
  std::vector<Vad> preds, golds;
  for (const auto& s : paired) {
    const Waveform w = read_wav(s.audio);
    const PooledEmbedding pooled = mean_pool(model.fuse(w));
    const auto probs = classify_categorical(pooled, model.heads());
    const auto arg = std::max_element(probs.begin(), probs.end()) - probs.begin();
    correct += arg == static_cast<long>(*s.emotion_cat);
    preds.push_back(regress_dimensional(pooled, model.heads()));
    golds.push_back(*s.vad);
    verbatim += model.respond(w, s.transcript, s.emotion_cat, 48).text == s.expected_response;
  }
  double se = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    se += std::pow(preds[i].valence - golds[i].valence, 2) + std::pow(preds[i].arousal - golds[i].arousal, 2) +
          std::pow(preds[i].dominance - golds[i].dominance, 2);
  }
  const double mse = se / (3.0 * static_cast<double>(preds.size()));
  const double acc = correct / static_cast<double>(paired.size());
  const bool ok = full.total < 0.1 && acc == 1.0 && mse < 0.01 && verbatim >= 14;
  return {ok, fmt::format("{} steps, full-set total {:.4f} (last batch {:.4f}), argmax acc {:.3f}, mse {:.2e}, verbatim {}/{}",
                          log.back().first, full.total, log.back().second.total, acc, mse, verbatim, paired.size())};
}

// --- 6 ---------------------------------------------------------------------

Outcome wilcoxon_correctness() {
  std::mt19937_64 rng(606);
  std::vector<double> a, b;
  int exact_ok = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n_nonzero = 1 + trial % 12;
    testing::ordinal_pairs(rng, n_nonzero + trial % 4, n_nonzero, a, b);
    const auto oracle = testing::enumerate_wilcoxon(a, b);
    const WilcoxonResult r = wilcoxon_signed_rank(a, b);
    exact_ok += r.n_effective == oracle.n_effective && r.w_plus == oracle.w_plus && r.p_two_sided == oracle.p;
  }
  double worst_ordinal = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    testing::ordinal_pairs(rng, 20 + trial % 5, 20, a, b);
    const auto oracle = testing::enumerate_wilcoxon(a, b);
    const WilcoxonResult r = wilcoxon_signed_rank(a, b, WilcoxonMethod::kNormalApprox);
    worst_ordinal = std::max(worst_ordinal, std::fabs(r.p_two_sided - oracle.p));
  }
  double worst_continuous = 0.0;
  std::normal_distribution<double> g(0.3, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(20), zero(20, 0.0);
    for (double& v : x) v = g(rng);
    const auto oracle = testing::enumerate_wilcoxon(x, zero);
    const WilcoxonResult r = wilcoxon_signed_rank(x, zero, WilcoxonMethod::kNormalApprox);
    worst_continuous = std::max(worst_continuous, std::fabs(r.p_two_sided - oracle.p));
  }
  return {exact_ok == 200 && worst_ordinal <= 0.02,
          fmt::format("exact vs enumeration {}/200; n_eff=20 approx max |dp| ordinal {:.4f} (limit 0.02), "
                      "continuous {:.4f}",
                      exact_ok, worst_ordinal, worst_continuous)};
}

// --- 7 ---------------------------------------------------------------------

Outcome table_arithmetic() {
  std::ostringstream out, err;
  const std::vector<std::string> args{"renuance", "report", "table",     "--cells", std::string(RENUANCE_FIXTURE_DIR) + "/reference_cells.json",
                                      "--target", "6",      "--baselines", "1,4,5"};
  if (cli_dispatch(args, out, err) != 0) return {false, "report table failed: " + err.str()};
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream h(line);
    std::string f;
    while (std::getline(h, f, ',')) header.push_back(f);
  }
  std::map<std::pair<std::string, std::string>, std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream s(line);
    std::string x;
    while (std::getline(s, x, ',')) f.push_back(x);
    f.resize(header.size());
    for (std::size_t i = 2; i < header.size(); ++i) rows[{f[0], f[1]}][header[i]] = f[i];
  }
  struct Expect {
    const char* metric;
    const char* dataset;
    const char* column;
    double value;
  };
  const std::vector<Expect> expected{
      {"ER", "ESD", "rel_pct_vs_1", 14.79},   {"ER", "ESD", "rel_pct_vs_5", 6.76},   {"Ex", "IEM", "rel_pct_vs_1", 35.42},
      {"Ex", "IEM", "rel_pct_vs_4", 3.91},    {"Ex", "ESD", "rel_pct_vs_1", 139.28}, {"Ex", "ESD", "rel_pct_vs_5", 9.83},
      {"Ex", "MSP-P", "rel_pct_vs_1", 60.95}, {"Ex", "MSP-P", "rel_pct_vs_5", 22.64}, {"UA", "IEM", "delta_pts_vs_4", 5.4},
      {"UA", "ESD", "delta_pts_vs_4", 2.3},   {"UA", "MSP-P", "delta_pts_vs_4", 6.9}};
  int ok = 0;
  double worst = 0.0;
  std::string misses;
  for (const auto& e : expected) {
    const auto row = rows.find({e.metric, e.dataset});
    if (row == rows.end() || row->second[e.column].empty()) {
      misses += fmt::format(" {}/{}/{}:missing", e.metric, e.dataset, e.column);
      continue;
    }
    const double got = std::stod(row->second[e.column]);
    worst = std::max(worst, std::fabs(got - e.value));
    if (std::fabs(got - e.value) <= 0.05) {
      ++ok;
    } else {
      misses += fmt::format(" {}/{}/{}:{}", e.metric, e.dataset, e.column, got);
    }
  }
  return {ok == static_cast<int>(expected.size()),
          fmt::format("{}/{} headline numbers within 0.05, max |diff| {:.3f}{}", ok, expected.size(), worst, misses)};
}

// --- 8 ---------------------------------------------------------------------

Outcome split_rules() {
  const DatasetManifest iem = testing::iemocap_fixture();
  const SplitResult si = split_iemocap(iem);
  std::set<std::string> want_test, got_test;
  for (const auto& r : iem.records) {
    if (r.group_key == "5") want_test.insert(r.utt_id);
  }
  for (const auto& r : si.test.records) got_test.insert(r.utt_id);
  const bool iem_ok = want_test == got_test && si.train.size() + si.test.size() == iem.size() &&
                      split_iemocap(iem).train.records == si.train.records;

  const DatasetManifest esd = testing::esd_fixture(350);
  const SplitResult se = split_esd(esd, 0.7, 42);
  std::set<std::string> tr, te;
  for (const auto& r : se.train.records) tr.insert(r.group_key);
  for (const auto& r : se.test.records) te.insert(r.group_key);
  bool straddle = false;
  for (const auto& g : tr) straddle = straddle || te.contains(g);
  const SplitResult se2 = split_esd(esd, 0.7, 42);
  const bool esd_ok = tr.size() == 245 && te.size() == 105 && !straddle && se2.train.records == se.train.records &&
                      se2.test.records == se.test.records;

  const DatasetManifest msp = testing::msp_fixture(6000, 2000);
  const SplitResult sm = sample_msp(msp, 4290, 1245, 7);
  std::set<std::string> ids;
  for (const auto& r : sm.train.records) ids.insert(r.utt_id);
  bool overlap = false;
  for (const auto& r : sm.test.records) overlap = overlap || ids.contains(r.utt_id);
  const SplitResult sm2 = sample_msp(msp, 4290, 1245, 7);
  const bool msp_ok = sm.train.size() == 4290 && sm.test.size() == 1245 && ids.size() == 4290 && !overlap &&
                      sm2.train.records == sm.train.records && sm2.test.records == sm.test.records;
  return {iem_ok && esd_ok && msp_ok,
          fmt::format("IEM test = session 5 ({} records) {}; ESD groups {}/{} straddle={} {}; MSP {}/{} {}", got_test.size(),
                      iem_ok ? "ok" : "BAD", tr.size(), te.size(), straddle, esd_ok ? "ok" : "BAD", sm.train.size(),
                      sm.test.size(), msp_ok ? "ok" : "BAD")};
}

// --- 9 ---------------------------------------------------------------------

Outcome lm_invariants() {
  LanguageModel lm(LMConfig{32, 2, 2, 16, 64}, 9);
  Rng rng(99);
  std::mt19937_64 pick(1);
  int causal_ok = 0;
  double worst_leak = 0.0, worst_norm = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int len = std::uniform_int_distribution<int>(2, 40)(pick);
    const int j = std::uniform_int_distribution<int>(0, len - 2)(pick);
    Matrix x = random_matrix(len, 16, rng);
    const Matrix before = lm_forward(lm, x);
    x.row(j + 1) += random_matrix(1, 16, rng);
    const Matrix after = lm_forward(lm, x);
    const double leak = (before.topRows(j + 1) - after.topRows(j + 1)).cwiseAbs().maxCoeff();
    worst_leak = std::max(worst_leak, leak);
    causal_ok += leak == 0.0 && (before.row(j + 1) - after.row(j + 1)).cwiseAbs().maxCoeff() > 0.0;
    for (const Matrix* p : {&before, &after}) {
      for (Eigen::Index i = 0; i < p->rows(); ++i) {
        worst_norm = std::max(worst_norm, std::fabs(p->row(i).sum() - 1.0));
        if (p->row(i).minCoeff() < 0.0) worst_norm = 1.0;
      }
    }
  }
  return {causal_ok == 100 && worst_norm <= 1e-6,
          fmt::format("causal {}/100 (max leak {:.1e}), max |row sum - 1| {:.1e}", causal_ok, worst_leak, worst_norm)};
}

// --- 10 --------------------------------------------------------------------

struct Smoke {
  fs::path root;
  std::vector<std::string> problems;

  int run(const std::string& tag, const std::string& args) {
    const fs::path log = root / ("log." + tag + ".txt");
    const std::string cmd = fmt::format("'{}' {} > '{}' 2>&1", RENUANCE_TOOL_PATH, args, log.string());
    const int status = std::system(cmd.c_str());
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    if (code != 0) problems.push_back(fmt::format("{} exit {}: {}", tag, code, read_file(log)));
    return code;
  }
  std::string p(const std::string& rel) const { return "'" + (root / rel).string() + "'"; }
  void require(bool cond, const std::string& what) {
    if (!cond) problems.push_back(what);
  }
  std::vector<json> jsonl(const std::string& rel, const std::vector<std::string>& keys) {
    std::vector<json> rows;
    std::istringstream in(read_file(root / rel));
    std::string line;
    while (std::getline(in, line)) {
      const json j = json::parse(line);
      for (const auto& k : keys) require(j.contains(k), rel + " row lacks " + k);
      rows.push_back(j);
    }
    require(!rows.empty(), rel + " is empty");
    return rows;
  }
  void run_config(const std::string& dir, const std::string& command) {
    const fs::path f = root / dir / ("run_config." + command + ".txt");
    require(fs::exists(f) && read_file(f).find("run.command=" + command) != std::string::npos, f.string() + " missing");
  }
};

Outcome end_to_end_smoke() {
  TempDir dir("accept_smoke");
  Smoke s{dir.path(), {}};
  if (s.run("synth", "data synth --out " + s.p("corpus")) != 0) return {false, s.problems.front()};
  s.run("build", "data build --manifest " + s.p("corpus/manifest.jsonl") + " --out " + s.p("built"));
  s.run("gen", "gen-expected --manifest " + s.p("built/manifest.jsonl") + " --generator fixture --out " + s.p("gen"));
  for (const char* mode : {"re_llm", "speech_baseline"}) {
    s.run(fmt::format("train_{}", mode), fmt::format("train --paired {} --mode {} --steps 500 --log-interval 50 --out {}",
                                                     s.p("gen/paired.jsonl"), mode, s.p(fmt::format("train_{}", mode))));
    s.run(fmt::format("emp_{}", mode), fmt::format("eval empathy --checkpoint {} --manifest {} --scorer stub --out {}",
                                                   s.p(fmt::format("train_{}/checkpoint.bin", mode)),
                                                   s.p("built/manifest.jsonl"), s.p(fmt::format("emp_{}", mode))));
  }
  s.run("ser", "eval ser --mode head --checkpoint " + s.p("train_re_llm/checkpoint.bin") + " --manifest " +
                   s.p("built/manifest.jsonl") + " --out " + s.p("ser"));
  s.run("wilcoxon", "stats wilcoxon " + s.p("emp_re_llm/results.jsonl") + " " + s.p("emp_speech_baseline/results.jsonl") +
                        " --out " + s.p("stats"));
  s.run("report", "report table --cells " + s.p("emp_re_llm/cells.json") + " --cells " + s.p("emp_speech_baseline/cells.json") +
                      " --cells " + s.p("ser/cells.json") + " --target re_llm --baselines speech_baseline --out " + s.p("report"));
  if (!s.problems.empty()) return {false, s.problems.front()};

  try {
    const DatasetManifest built = load_manifest(s.root / "built/manifest.jsonl");
    s.require(json::parse(read_file(s.root / "built/summary.json")).at("records") == built.size(), "summary.json count");
    s.run_config("built", "data_build");
    const auto paired = s.jsonl("gen/paired.jsonl", {"utt_id", "transcript", "emotion_cat", "vad", "expected_response", "audio"});
    s.require(load_paired_set(s.root / "gen/paired.jsonl").size() == built.size(), "paired.jsonl size");
    s.run_config("gen", "gen_expected");
    for (const char* mode : {"re_llm", "speech_baseline"}) {
      const std::string t = fmt::format("train_{}", mode);
      std::istringstream csv(read_file(s.root / t / "metrics.csv"));
      std::string line, last;
      std::getline(csv, line);
      s.require(line == "step,l_kl,l_ce,l_mse,total", t + " metrics header");
      int rows = 0;
      while (std::getline(csv, line)) {
        ++rows;
        last = line;
        s.require(std::count(line.begin(), line.end(), ',') == 4, t + " metrics row width");
      }
      s.require(rows == 10 && last.rfind("500,", 0) == 0, t + " metrics rows");
      s.require(std::string(train_mode_name(ReLlmModel::load(s.root / t / "checkpoint.bin")->mode())) == mode, t + " checkpoint");
      s.run_config(t, "train");
      const std::string e = fmt::format("emp_{}", mode);
      s.jsonl(e + "/generations.jsonl", {"utt_id", "prompt_name", "response", "logprobs"});
      for (const auto& r : s.jsonl(e + "/results.jsonl", {"utt_id", "response", "er", "ex"})) {
        s.require(r["er"].is_number_integer() && r["er"] >= 0 && r["er"] <= 2 && r["ex"] >= 0 && r["ex"] <= 2, e + " score range");
      }
      const ResultTable cells = load_result_table(s.root / e / "cells.json");
      s.require(cells.cells.size() == 2, e + " cells rows");
      s.run_config(e, "eval_empathy");
    }
    s.jsonl("ser/predictions.jsonl", {"utt_id", "gold", "predicted", "response"});
    const std::string cm = read_file(s.root / "ser/confusion.csv");
    s.require(cm.rfind("gold,", 0) == 0 && std::count(cm.begin(), cm.end(), '\n') == 5, "confusion.csv shape");
    const json ser = json::parse(read_file(s.root / "ser/ser.json"));
    s.require(ser.at("mode") == "head" && ser.at("n") == built.size() && ser.at("ua").is_number(), "ser.json");
    s.run_config("ser", "eval_ser");
    const json w = json::parse(read_file(s.root / "stats/wilcoxon.json"));
    for (const char* m : {"er", "ex"}) {
      s.require(w.contains(m) && w[m].at("p").get<double>() >= 0.0 && w[m].at("p").get<double>() <= 1.0, "wilcoxon.json " + std::string(m));
    }
    const std::string report = read_file(s.root / "report/report.csv");
    s.require(report.rfind("metric,dataset,", 0) == 0 && report.find("rel_pct_vs_speech_baseline") != std::string::npos &&
                  report.find("UA,synthetic") != std::string::npos,
              "report.csv layout");
    s.require(read_file(s.root / "log.report.txt") == report, "report stdout differs from report.csv");
  } catch (const std::exception& e) {
    s.problems.push_back(std::string("schema: ") + e.what());
  }
  return {s.problems.empty(), s.problems.empty() ? "10 commands exit 0, every output parsed and schema-checked"
                                                 : s.problems.front()};
}

}  // namespace
}  // namespace renuance

int main() {
  using namespace renuance;
  spdlog::set_level(spdlog::level::err);
  TempDir dir("accept");
  const std::vector<PairedSample> paired = testing::synthetic_paired_set(dir.path() / "corpus");

  struct Criterion {
    const char* title;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"adapter length law", 5, adapter_length_law},
      {"gradient suite", 60, gradient_suite},
      {"loss composition", 30, [&] { return loss_composition(paired); }},
      {"frozen emotion encoder", 300, [&] { return frozen_encoder(paired); }},
      {"overfit oracle", 600, [&] { return overfit(paired); }},
      {"wilcoxon correctness", 60, wilcoxon_correctness},
      {"table arithmetic", 1, table_arithmetic},
      {"split determinism", 5, split_rules},
      {"lm invariants", 30, lm_invariants},
      {"end-to-end smoke", 900, end_to_end_smoke},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > criteria[i].budget_s) {
      o.pass = false;
      o.detail += fmt::format("; over budget {:.0f} s", criteria[i].budget_s);
    }
    failed += !o.pass;
    std::cout << fmt::format("AC{} {} {}: {} ({:.2f} s)", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].title, o.detail, secs)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - static_cast<std::size_t>(failed), criteria.size())
            << std::endl;
  return failed == 0 ? 0 : 1;
}
