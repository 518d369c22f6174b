// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0
//
// In-memory manifests for split tests. No audio files are referenced.

#pragma once

#include <string>

#include <fmt/format.h>

#include "renuance/manifest.h"

namespace renuance::testing {

inline UtteranceRecord bare_record(Dataset d, const std::string& id, const std::string& group, Emotion e) {
  UtteranceRecord r;
  r.utt_id = id;
  r.dataset = d;
  r.group_key = group;
  r.speaker_id = "spk";
  r.transcript = "text " + id;
  r.emotion_cat = e;
  r.audio = "audio/" + id + ".wav";
  return r;
}

// 5 sessions, `per_session` utterances each, emotions cycling.
inline DatasetManifest iemocap_fixture(int per_session = 12) {
  DatasetManifest m;
  for (int s = 1; s <= 5; ++s) {
    for (int i = 0; i < per_session; ++i) {
      UtteranceRecord r = bare_record(Dataset::kIEM, fmt::format("Ses0{}_{:03d}", s, i), std::to_string(s),
                                      static_cast<Emotion>(i % kNumEmotions));
      r.vad = Vad{0.5, 0.25, 0.75};
      r.vad_source = VadSource::kGold;
      m.records.push_back(r);
    }
  }
  return m;
}

// `groups` parallel-text groups with one utterance per emotion and speaker.
inline DatasetManifest esd_fixture(int groups = 350, int speakers = 2) {
  DatasetManifest m;
  for (int g = 0; g < groups; ++g) {
    for (int s = 0; s < speakers; ++s) {
      for (int e = 0; e < kNumEmotions; ++e) {
        UtteranceRecord r = bare_record(Dataset::kESD, fmt::format("esd_{:04d}_{}_{}", g, s, e), fmt::format("text{:04d}", g),
                                        static_cast<Emotion>(e));
        r.speaker_id = fmt::format("spk{}", s);
        m.records.push_back(r);
      }
    }
  }
  return m;
}

inline DatasetManifest msp_fixture(int n_train_pool, int n_test_pool) {
  DatasetManifest m;
  for (int i = 0; i < n_train_pool + n_test_pool; ++i) {
    UtteranceRecord r = bare_record(Dataset::kMSPP, fmt::format("msp_{:05d}", i), fmt::format("pod{}", i % 97),
                                    static_cast<Emotion>(i % kNumEmotions));
    r.partition = i < n_train_pool ? "train" : "test";
    m.records.push_back(r);
  }
  return m;
}

}  // namespace renuance::testing
