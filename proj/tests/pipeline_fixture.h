// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic paired set plus an independent value-level recomputation of the
// training loss terms.

#pragma once

#include <filesystem>
#include <vector>

#include "renuance/audio.h"
#include "renuance/synth.h"
#include "renuance/training.h"

namespace renuance::testing {

// 16 utterances (4 per emotion) with fixture-template expected responses.
inline std::vector<PairedSample> synthetic_paired_set(const std::filesystem::path& dir, int per_emotion = 4) {
  SynthConfig c;
  c.per_emotion = per_emotion;
  const DatasetManifest m = synthesize_corpus(dir, c);
  FixtureResponseGenerator gen;
  return generate_expected_responses(m, gen).samples;
}

// Pinned overfit settings; the library default step size does not converge in 2000 steps.
inline TrainConfig overfit_config(TrainMode mode = TrainMode::kReLlm) {
  TrainConfig c;
  c.mode = mode;
  c.step_size = 1e-3;
  c.batch_size = 4;
  c.max_steps = 2000;
  c.log_interval = 100;
  c.seed = 0;
  return c;
}

struct RecomputedLoss {
  double kl = 0.0;
  double ce = 0.0;
  double mse = 0.0;
};

// Each term from the public value-level APIs: raw samples, the prompt text and
// no tape. Batch means are taken as sum * (1/B).
inline RecomputedLoss recompute_loss(ReLlmModel& model, const std::vector<const PairedSample*>& batch) {
  const ModeTraits t = model.traits();
  const Tokenizer& tok = model.tokenizer();
  RecomputedLoss out;
  double nll_sum = 0.0;
  std::vector<std::array<double, kNumEmotions>> probs;
  std::vector<int> cats;
  std::vector<Vad> preds, golds;
  for (const PairedSample* s : batch) {
    std::vector<int> target = tok.encode(s->expected_response);
    target.push_back(Tokenizer::kEos);
    Matrix ctx;
    if (t.speech) {
      const Waveform w = read_wav(s->audio);
      const FusedEmbeddingSequence fused = model.fuse(w);
      ctx = model.speech_context(continuation_step2(), fused);
      const PooledEmbedding pooled = mean_pool(fused);
      if (t.ce) {
        probs.push_back(classify_categorical(pooled, model.heads()));
        cats.push_back(static_cast<int>(*s->emotion_cat));
      }
      if (t.mse) {
        preds.push_back(regress_dimensional(pooled, model.heads()));
        golds.push_back(*s->vad);
      }
    } else {
      ctx = model.text_context(continuation_step2(), text_mode_input(model.mode(), s->transcript, s->emotion_cat));
    }
    nll_sum += sequence_nll(model.lm(), ctx, target);
  }
  out.kl = nll_sum * (1.0 / static_cast<double>(batch.size()));
  if (t.ce) out.ce = ce_loss(probs, cats);
  if (t.mse) out.mse = mse_loss(preds, golds);
  return out;
}

}  // namespace renuance::testing
