// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#include "renuance/prompts.h"

#include <stdexcept>

namespace renuance {

std::string_view prompt_name_str(PromptName name) {
  switch (name) {
    case PromptName::kContinuationStep1: return "continuation_step1";
    case PromptName::kContinuationStep2: return "continuation_step2";
    case PromptName::kSerEval: return "ser_eval";
  }
  return "unknown";
}

const PromptTemplate& continuation_step1() {
  static const PromptTemplate t{PromptName::kContinuationStep1,
                                "Continue the following sentence that reflects a <emo> emotion tone in a coherent "
                                "style:<transcript>"};
  return t;
}

const PromptTemplate& continuation_step2() {
  static const PromptTemplate t{PromptName::kContinuationStep2,
                                "Continue the following sentence that reflects a tone in a coherent style: <speech>"};
  return t;
}

const PromptTemplate& ser_eval() {
  static const PromptTemplate t{PromptName::kSerEval,
                                "Please identify the emotion tone of the sentence provided below. Select from the "
                                "following options: neutral, sad, angry, happy, or surprise.\nSentence: <speech>"};
  return t;
}

std::string render_prompt(std::string_view text, const PromptSlots& slots) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '<') {
      const auto close = text.find('>', i + 1);
      if (close != std::string_view::npos) {
        const std::string_view name = text.substr(i + 1, close - i - 1);
        const bool is_slot = !name.empty() && name.find_first_of(" <\n") == std::string_view::npos;
        if (is_slot && name != "speech") {
          auto it = slots.find(std::string(name));
          if (it == slots.end()) throw std::invalid_argument("<" + std::string(name) + "> unbound");
          out += it->second;
          i = close + 1;
          continue;
        }
        if (is_slot) {
          out += text.substr(i, close - i + 1);
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

std::string render_prompt(const PromptTemplate& tmpl, const PromptSlots& slots) {
  return render_prompt(tmpl.text, slots);
}

}  // namespace renuance
