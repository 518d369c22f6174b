// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <numeric>

#include "pipeline_fixture.h"
#include "renuance/training.h"
#include "support.h"

namespace renuance {
namespace {

using testing::TempDir;

class TrainingTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("train");
    paired_ = new std::vector<PairedSample>(testing::synthetic_paired_set(dir_->path() / "corpus"));
  }
  static void TearDownTestSuite() {
    delete paired_;
    delete dir_;
  }

  static std::unique_ptr<ReLlmModel> make_model(TrainMode mode, std::shared_ptr<const EmotionBackend> emo = nullptr) {
    const ModelConfig mc;
    return std::make_unique<ReLlmModel>(mc, mode, build_tokenizer(*paired_, mc.vocab_limit), std::move(emo));
  }

  static TrainConfig short_config(TrainMode mode, int steps) {
    TrainConfig c = testing::overfit_config(mode);
    c.max_steps = steps;
    c.log_interval = 1;
    return c;
  }

  static std::vector<Matrix> snapshot(const ReLlmModel& m) {
    std::vector<Matrix> out;
    for (const auto* p : m.parameters()) out.push_back(p->value);
    return out;
  }

  static TempDir* dir_;
  static std::vector<PairedSample>* paired_;
};

TempDir* TrainingTest::dir_ = nullptr;
std::vector<PairedSample>* TrainingTest::paired_ = nullptr;

TEST(Modes, TraitsTable) {
  auto t = mode_traits(TrainMode::kReLlm);
  EXPECT_TRUE(t.speech && t.emotion && t.ce && t.mse);
  t = mode_traits(TrainMode::kNoDimAux);
  EXPECT_TRUE(t.speech && t.emotion && t.ce && !t.mse);
  t = mode_traits(TrainMode::kNoEmoEnc);
  EXPECT_TRUE(t.speech && !t.emotion && t.ce && t.mse);
  t = mode_traits(TrainMode::kSpeechBaseline);
  EXPECT_TRUE(t.speech && !t.emotion && !t.ce && !t.mse);
  for (auto m : {TrainMode::kTextOnly, TrainMode::kTextPlusLabel}) {
    t = mode_traits(m);
    EXPECT_FALSE(t.speech || t.emotion || t.ce || t.mse);
  }
  for (auto m : {TrainMode::kReLlm, TrainMode::kNoDimAux, TrainMode::kNoEmoEnc, TrainMode::kSpeechBaseline, TrainMode::kTextOnly,
                 TrainMode::kTextPlusLabel}) {
    EXPECT_EQ(parse_train_mode(train_mode_name(m)), m);
  }
  EXPECT_ANY_THROW(parse_train_mode("bogus"));
}

TEST(Modes, TextModeInputs) {
  EXPECT_EQ(text_mode_input(TrainMode::kTextOnly, "I lost it.", Emotion::kSad), "I lost it.");
  EXPECT_EQ(text_mode_input(TrainMode::kTextPlusLabel, "I lost it.", Emotion::kSad), "<sad> I lost it.");
}

TEST(Configs, RoundTripThroughKeyValues) {
  TrainConfig t;
  t.mode = TrainMode::kNoEmoEnc;
  t.step_size = 3e-4;
  t.teacher_kl = true;
  const TrainConfig back = TrainConfig::from_kv(t.to_kv());
  EXPECT_EQ(back.mode, t.mode);
  EXPECT_EQ(back.step_size, t.step_size);
  EXPECT_EQ(back.teacher_kl, true);
  EXPECT_EQ(back.max_steps, 2000);
  ModelConfig m;
  m.lm.layers = 3;
  m.speech.features.kind = FeatureKind::kRawWave;
  EXPECT_EQ(ModelConfig::from_kv(m.to_kv()).to_kv().entries(), m.to_kv().entries());
  TrainConfig bad;
  bad.batch_size = 0;
  EXPECT_ANY_THROW(bad.validate());
  bad = TrainConfig{};
  bad.step_size = -1.0;
  EXPECT_ANY_THROW(bad.validate());
}

TEST(Configs, DefaultsMatchDocumentedValues) {
  const TrainConfig t;
  EXPECT_EQ(t.step_size, 1e-4);
  EXPECT_EQ(t.beta1, 0.9);
  EXPECT_EQ(t.beta2, 0.999);
  EXPECT_EQ(t.epsilon, 1e-8);
  EXPECT_EQ(t.grad_clip_norm, 1.0);
  EXPECT_EQ(t.batch_size, 4);
  EXPECT_EQ(t.max_steps, 2000);
}

// --- expected responses ----------------------------------------------------

class ScriptedGenerator final : public ResponseGenerator {
 public:
  std::string complete(const std::string& prompt, const PromptSlots& slots) override {
    prompts.push_back(prompt);
    ++calls;
    if (slots.at("transcript").find("Throw") != std::string::npos) throw std::runtime_error("down");
    if (calls == 1) return "";  // first call empty, retried
    return "ok " + slots.at("emo");
  }
  int calls = 0;
  std::vector<std::string> prompts;
};

TEST(ExpectedResponses, FixtureTemplateAndSkips) {
  DatasetManifest m;
  m.base_dir = "/data";
  for (int i = 0; i < 3; ++i) {
    UtteranceRecord r;
    r.utt_id = "u" + std::to_string(i);
    r.transcript = i == 2 ? "Throw now." : "We won.";
    r.emotion_cat = i == 1 ? std::nullopt : std::optional<Emotion>(Emotion::kHappy);
    r.audio = r.utt_id + ".wav";
    m.records.push_back(r);
  }
  FixtureResponseGenerator fixture;
  const auto fx = generate_expected_responses(m, fixture);
  ASSERT_EQ(fx.samples.size(), 2u);
  EXPECT_EQ(fx.samples[0].expected_response, "We won. That sounds happy, can you tell me more?");
  EXPECT_EQ(fx.skipped, std::vector<std::string>{"u1"});

  ScriptedGenerator scripted;
  const auto sc = generate_expected_responses(m, scripted);
  ASSERT_EQ(sc.samples.size(), 1u);
  EXPECT_EQ(sc.samples[0].expected_response, "ok happy");
  EXPECT_EQ(sc.skipped.size(), 2u);
  EXPECT_NE(scripted.prompts[0].find("reflects a happy emotion"), std::string::npos);
}

TEST_F(TrainingTest, PairedSetRoundTrip) {
  const auto path = dir_->path() / "paired.jsonl";
  write_paired_set(path, *paired_);
  const auto back = load_paired_set(path);
  ASSERT_EQ(back.size(), paired_->size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].expected_response, (*paired_)[i].expected_response);
    EXPECT_EQ(std::filesystem::canonical(back[i].audio), std::filesystem::canonical((*paired_)[i].audio));
  }
}

// --- loss ------------------------------------------------------------------

TEST_F(TrainingTest, TotalIsSumOfIndependentTermsAndAblationsZeroTerms) {
  for (TrainMode mode : {TrainMode::kReLlm, TrainMode::kNoDimAux, TrainMode::kNoEmoEnc, TrainMode::kSpeechBaseline,
                         TrainMode::kTextOnly, TrainMode::kTextPlusLabel}) {
    auto model = make_model(mode);
    const TrainConfig cfg = short_config(mode, 1);
    const auto prepared = prepare_samples(*paired_, *model, cfg);
    std::vector<const PreparedSample*> batch{&prepared[0], &prepared[5], &prepared[10]};
    std::vector<const PairedSample*> raw{&(*paired_)[0], &(*paired_)[5], &(*paired_)[10]};
    const LossBreakdown l = compute_total_loss(*model, batch, cfg);
    const auto r = testing::recompute_loss(*model, raw);
    EXPECT_EQ(l.l_kl, r.kl) << train_mode_name(mode);
    EXPECT_EQ(l.l_ce, r.ce) << train_mode_name(mode);
    EXPECT_EQ(l.l_mse, r.mse) << train_mode_name(mode);
    EXPECT_EQ(l.total, (r.kl + r.ce) + r.mse) << train_mode_name(mode);
    const ModeTraits t = mode_traits(mode);
    EXPECT_EQ(l.l_ce == 0.0, !t.ce);
    EXPECT_EQ(l.l_mse == 0.0, !t.mse);
    EXPECT_GT(l.l_kl, 0.0);
  }
}

TEST_F(TrainingTest, PooledEmotionAlignmentKeepsExactComposition) {
  ModelConfig mc;
  mc.emotion_alignment = EmotionAlignment::kPooled;
  EXPECT_EQ(ModelConfig::from_kv(mc.to_kv()).emotion_alignment, EmotionAlignment::kPooled);
  ReLlmModel model(mc, TrainMode::kReLlm, build_tokenizer(*paired_, mc.vocab_limit));
  const TrainConfig cfg = short_config(TrainMode::kReLlm, 1);
  const auto prepared = prepare_samples(*paired_, model, cfg);
  const Matrix& emo = prepared[2].emotion_frames;
  EXPECT_EQ((emo.rowwise() - emo.row(0)).cwiseAbs().maxCoeff(), 0.0);
  std::vector<const PreparedSample*> batch{&prepared[2], &prepared[7]};
  const LossBreakdown l = compute_total_loss(model, batch, cfg);
  const auto r = testing::recompute_loss(model, {&(*paired_)[2], &(*paired_)[7]});
  EXPECT_EQ(l.l_kl, r.kl);
  EXPECT_EQ(l.l_ce, r.ce);
  EXPECT_EQ(l.l_mse, r.mse);
}

TEST_F(TrainingTest, NoEmotionModeNeedsNoEncoder) {
  auto with = make_model(TrainMode::kReLlm);
  auto without = make_model(TrainMode::kNoEmoEnc);
  EXPECT_EQ(with->adapter().config().in_dim, with->config().speech.hidden_dim + with->emotion_encoder().emb_dim());
  EXPECT_EQ(without->adapter().config().in_dim, without->config().speech.hidden_dim);
}

TEST_F(TrainingTest, LossGradientsMatchFiniteDifferences) {
  // Toy widths keep the finite-difference sweep short.
  ModelConfig mc;
  mc.speech.hidden_dim = 6;
  mc.speech.layers = 1;
  mc.emotion.emb_dim = 4;
  mc.adapter.bottleneck_dim = 5;
  mc.lm.model_dim = 8;
  mc.lm.heads = 2;
  mc.lm.layers = 1;
  mc.vocab_limit = 300;
  ReLlmModel model(mc, TrainMode::kReLlm, build_tokenizer(*paired_, mc.vocab_limit));
  TrainConfig cfg = short_config(TrainMode::kReLlm, 1);
  std::vector<PairedSample> one{(*paired_)[3]};
  one[0].expected_response = "Fine.";
  const auto prepared = prepare_samples(one, model, cfg);
  std::vector<const PreparedSample*> batch{&prepared[0]};
  std::vector<ad::Parameter*> probe;
  for (auto* p : model.heads().parameters()) probe.push_back(p);
  for (auto* p : model.adapter().parameters()) probe.push_back(p);
  const double err = testing::gradient_check(probe, [&](ad::Tape& t) { return record_total_loss(t, model, batch, cfg).total; });
  EXPECT_LT(err, 1e-4);
}

// --- optimizer -------------------------------------------------------------

TEST(Optimizer, ClipGlobalNorm) {
  ad::Parameter a("a", Matrix::Zero(1, 2)), b("b", Matrix::Zero(1, 1));
  a.grad = (Matrix(1, 2) << 3.0, 0.0).finished();
  b.grad = (Matrix(1, 1) << 4.0).finished();
  std::vector<ad::Parameter*> ps{&a, &b};
  EXPECT_DOUBLE_EQ(clip_global_norm(ps, 1.0), 5.0);
  EXPECT_NEAR(std::sqrt(a.grad.squaredNorm() + b.grad.squaredNorm()), 1.0, 1e-12);
  EXPECT_NEAR(a.grad(0, 0), 0.6, 1e-12);
}

TEST(Optimizer, AdamFirstStepMovesBySignTimesStepSize) {
  ad::Parameter p("p", (Matrix(1, 2) << 1.0, 1.0).finished());
  p.grad = (Matrix(1, 2) << 0.5, -2.0).finished();
  Adam adam({&p}, 0.9, 0.999, 1e-8);
  adam.step(0.1);
  EXPECT_NEAR(p.value(0, 0), 0.9, 1e-6);
  EXPECT_NEAR(p.value(0, 1), 1.1, 1e-6);
}

TEST_F(TrainingTest, ZeroStepSizeLeavesParametersUnchanged) {
  auto model = make_model(TrainMode::kReLlm);
  const auto before = snapshot(*model);
  TrainConfig cfg = short_config(TrainMode::kReLlm, 3);
  cfg.step_size = 0.0;
  train_in_memory(*model, cfg, *paired_);
  EXPECT_EQ(snapshot(*model), before);
}

TEST_F(TrainingTest, SeededRunsAreIdentical) {
  auto a = make_model(TrainMode::kReLlm);
  auto b = make_model(TrainMode::kReLlm);
  const TrainConfig cfg = short_config(TrainMode::kReLlm, 6);
  const auto la = train_in_memory(*a, cfg, *paired_);
  const auto lb = train_in_memory(*b, cfg, *paired_);
  ASSERT_EQ(la.size(), lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) EXPECT_EQ(la[i].second.total, lb[i].second.total);
  EXPECT_EQ(snapshot(*a), snapshot(*b));
}

TEST_F(TrainingTest, NonFiniteGradientAbortsWithLossDump) {
  auto model = make_model(TrainMode::kReLlm);
  model->heads().cls_bias().value(0, 0) = std::nan("");
  try {
    train_in_memory(*model, short_config(TrainMode::kReLlm, 1), *paired_);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("l_kl="), std::string::npos) << e.what();
  }
}

TEST_F(TrainingTest, SmoothedLossDecreases) {
  auto model = make_model(TrainMode::kReLlm);
  TrainConfig cfg = short_config(TrainMode::kReLlm, 120);
  const auto log = train_in_memory(*model, cfg, *paired_);
  auto window_mean = [&](std::size_t from) {
    double s = 0.0;
    for (std::size_t i = from; i < from + 20; ++i) s += log[i].second.total;
    return s / 20.0;
  };
  double previous = window_mean(0);
  for (std::size_t from = 20; from + 20 <= log.size(); from += 20) {
    const double now = window_mean(from);
    EXPECT_LE(now, previous) << "window at " << from;
    previous = now;
  }
}

TEST_F(TrainingTest, ShortOverfitRun) {
  auto model = make_model(TrainMode::kReLlm);
  TrainConfig cfg = short_config(TrainMode::kReLlm, 200);
  cfg.step_size = 3e-3;
  cfg.log_interval = 200;
  const auto log = train_in_memory(*model, cfg, *paired_);
  EXPECT_LT(log.back().second.total, 0.1);
  int verbatim = 0;
  for (const auto& p : *paired_) {
    verbatim += model->respond(read_wav(p.audio), p.transcript, p.emotion_cat, 48).text == p.expected_response;
  }
  EXPECT_GE(verbatim, 14);
}

TEST_F(TrainingTest, EmotionEncoderStaysFrozen) {
  auto enc = std::make_shared<EmotionEncoder>(ModelConfig{}.emotion);
  const std::string before = enc->checksum();
  auto model = make_model(TrainMode::kReLlm, enc);
  train_in_memory(*model, short_config(TrainMode::kReLlm, 20), *paired_);
  EXPECT_EQ(enc->checksum(), before);
  for (const auto* p : model->parameters()) EXPECT_EQ(p->name.rfind("emotion", 0), std::string::npos) << p->name;
}

TEST_F(TrainingTest, CheckpointRoundTripAndBitIdenticalRerun) {
  TrainConfig cfg = short_config(TrainMode::kReLlm, 8);
  cfg.log_interval = 4;
  const auto out_a = dir_->path() / "run_a";
  const auto out_b = dir_->path() / "run_b";
  std::filesystem::create_directories(out_a);
  std::filesystem::create_directories(out_b);
  const TrainResult a = train(ModelConfig{}, cfg, *paired_, out_a);
  const TrainResult b = train(ModelConfig{}, cfg, *paired_, out_b);
  EXPECT_EQ(read_file(a.checkpoint), read_file(b.checkpoint));
  EXPECT_EQ(read_file(a.metrics), read_file(b.metrics));
  const std::string csv = read_file(a.metrics);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2);

  auto loaded = ReLlmModel::load(a.checkpoint);
  EXPECT_EQ(loaded->mode(), TrainMode::kReLlm);
  auto fresh = make_model(TrainMode::kReLlm);
  train_in_memory(*fresh, cfg, *paired_);
  EXPECT_EQ(snapshot(*loaded), snapshot(*fresh));
  const auto& p = (*paired_)[2];
  const Waveform w = read_wav(p.audio);
  EXPECT_EQ(loaded->respond(w, p.transcript, p.emotion_cat, 12).token_ids, fresh->respond(w, p.transcript, p.emotion_cat, 12).token_ids);

  EmotionEncoderConfig other;
  other.seed += 99;
  EXPECT_THROW(ReLlmModel::load(a.checkpoint, std::make_shared<EmotionEncoder>(other)), ValidationError);
}

}  // namespace
}  // namespace renuance
