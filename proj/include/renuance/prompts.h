// Copyright 2026 The renuance Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>

namespace renuance {

enum class PromptName { kContinuationStep1, kContinuationStep2, kSerEval };

struct PromptTemplate {
  PromptName name;
  std::string text;
};

std::string_view prompt_name_str(PromptName name);

// Text-conditioned continuation used to produce expected responses.
const PromptTemplate& continuation_step1();
// Speech-conditioned continuation used for alignment.
const PromptTemplate& continuation_step2();
// Categorical emotion question over speech.
const PromptTemplate& ser_eval();

using PromptSlots = std::map<std::string, std::string>;

// Substitutes every "<slot>" that appears in the template. Keys are given
// without brackets ("emo", "transcript"). "<speech>" is always left in place
// as a positional marker. Throws std::invalid_argument("<x> unbound") when a
// slot in the template has no value.
std::string render_prompt(const PromptTemplate& tmpl, const PromptSlots& slots);
std::string render_prompt(std::string_view text, const PromptSlots& slots);

}  // namespace renuance
