#pragma once

#include "slotkit/backend.hpp"
#include "slotkit/core.hpp"
#include "slotkit/outparse.hpp"
#include "slotkit/promptgen.hpp"

namespace slotkit {

struct ExtractResult {
  ParseOutcome outcome;
  double latency_s = 0.0;  // backend call only; prompt build and parsing excluded
  size_t dropped_turns = 0;
};

// One full slot-filling request: render the prompt within budget, call the
// backend, parse and validate the generation.
inline ExtractResult extract(const SlotLibrary& library, const Conversation& conversation,
                             Backend& backend, const TokenBudget& budget = {},
                             const TokenCounter& counter = whitespace_counter(),
                             double fuzzy_threshold = kDefaultFuzzyThreshold) {
  RenderedPrompt rendered = render_prompt(library, conversation, budget, counter);
  CompletionRequest req;
  req.prompt = rendered.prompt;
  req.max_new_tokens = budget.max_output_tokens;
  Completion completion = backend.complete(req);
  RawGeneration raw = parse_generation(completion.text, library);
  ExtractResult result;
  result.outcome = validate_and_normalize(raw, library, conversation, fuzzy_threshold);
  result.latency_s = completion.latency_s;
  result.dropped_turns = rendered.dropped_turns;
  return result;
}

}  // namespace slotkit
