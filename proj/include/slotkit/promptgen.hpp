#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slotkit/core.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

// Prompt layout, fixed:
//
//   Find all the slots and their values from conversation. \n
//   \n
//   <slot library>\n
//   Slot-<n>: <description>\n            (categorical slots end with an
//   ...                                   `Allowed values ("a", "b")` clause)
//   \n
//   <conversation>\n
//   [USER] <text>\n
//   [SYSTEM] <text>\n
//   ...
//   [USER] <text>                        (no trailing newline)
//
// The trailing space after the instruction sentence is deliberate. Turn text
// may contain newlines; a turn still counts as one unit for truncation.

inline constexpr std::string_view kPromptInstruction =
    "Find all the slots and their values from conversation. ";
inline constexpr std::string_view kSlotLibraryTag = "<slot library>";
inline constexpr std::string_view kConversationTag = "<conversation>";

struct TokenBudget {
  size_t max_prompt_tokens = 1200;
  size_t max_output_tokens = 270;
};

// Pluggable counting strategy. Deployments register a model-exact tokenizer
// here; the default is whitespace word count, which keeps budgets enforceable
// without tying the toolkit to any one model.
struct TokenCounter {
  std::string name;
  std::function<size_t(std::string_view)> count;
};

inline TokenCounter whitespace_counter() {
  return {"whitespace", [](std::string_view s) { return text::count_words(s); }};
}

inline TokenCounter character_counter() {
  return {"chars", [](std::string_view s) { return s.size(); }};
}

inline std::optional<TokenCounter> counter_by_name(std::string_view name) {
  if (name == "whitespace") return whitespace_counter();
  if (name == "chars") return character_counter();
  return std::nullopt;
}

// Extracts the items of a trailing `Allowed values ("a", "b")` clause from a
// slot description. No clause -> nullopt. A clause that opens but cannot be
// read back to a balanced close at the end of the string is malformed.
inline std::optional<std::vector<std::string>> parse_allowed_values(std::string_view description) {
  static constexpr std::string_view kOpen = "Allowed values (";
  size_t pos = description.rfind(kOpen);
  if (pos == std::string_view::npos) return std::nullopt;

  size_t i = pos + kOpen.size();
  std::vector<std::string> items;
  auto fail = [&]() -> std::optional<std::vector<std::string>> {
    throw Error(ErrorKind::MalformedClause,
                "unbalanced Allowed values clause in description: " + std::string(description));
  };

  while (true) {
    while (i < description.size() && description[i] == ' ') ++i;
    if (i >= description.size() || description[i] != '"') return fail();
    ++i;
    size_t start = i;
    while (i < description.size() && description[i] != '"') ++i;
    if (i >= description.size()) return fail();
    items.emplace_back(description.substr(start, i - start));
    ++i;  // closing quote
    while (i < description.size() && description[i] == ' ') ++i;
    if (i < description.size() && description[i] == ',') {
      ++i;
      continue;
    }
    if (i < description.size() && description[i] == ')') {
      ++i;
      break;
    }
    return fail();
  }
  if (!text::trim(description.substr(i)).empty()) return fail();
  if (items.empty()) return fail();
  return items;
}

inline bool description_has_allowed_clause(std::string_view description) {
  if (description.find("Allowed values (") == std::string_view::npos) return false;
  try {
    return parse_allowed_values(description).has_value();
  } catch (const Error&) {
    return false;
  }
}

inline std::string render_slot_line(const SlotSpec& slot) {
  std::string line = slot.id;
  line += ": ";
  line += slot.description;
  if (slot.allowed_values && !description_has_allowed_clause(slot.description)) {
    line += ". Allowed values (";
    for (size_t i = 0; i < slot.allowed_values->size(); ++i) {
      if (i) line += ", ";
      line += '"';
      line += (*slot.allowed_values)[i];
      line += '"';
    }
    line += ')';
  }
  return line;
}

struct RenderedPrompt {
  std::string prompt;
  size_t dropped_turns = 0;
};

namespace detail {

inline std::string compose_prompt(const SlotLibrary& library, const Conversation& conversation,
                                  size_t first_turn) {
  std::string out;
  out += kPromptInstruction;
  out += "\n\n";
  out += kSlotLibraryTag;
  out += '\n';
  for (const auto& slot : library.slots) {
    out += render_slot_line(slot);
    out += '\n';
  }
  out += '\n';
  out += kConversationTag;
  for (size_t i = first_turn; i < conversation.turns.size(); ++i) {
    out += '\n';
    out += '[';
    out += role_name(conversation.turns[i].role);
    out += "] ";
    out += conversation.turns[i].text;
  }
  return out;
}

}  // namespace detail

// Renders the prompt, removing whole turns oldest-first until the counter
// says it fits the budget. The final turn, the instruction, and the slot
// library are never removed.
inline RenderedPrompt render_prompt(const SlotLibrary& library, const Conversation& conversation,
                                    const TokenBudget& budget = {},
                                    const TokenCounter& counter = whitespace_counter()) {
  if (conversation.empty())
    throw Error(ErrorKind::InvalidRecord, "render_prompt: conversation is empty");
  if (library.empty())
    throw Error(ErrorKind::InvalidRecord, "render_prompt: slot library is empty");

  size_t n = conversation.turns.size();
  for (size_t dropped = 0; dropped < n; ++dropped) {
    std::string prompt = detail::compose_prompt(library, conversation, dropped);
    if (counter.count(prompt) <= budget.max_prompt_tokens) return {std::move(prompt), dropped};
  }
  throw Error(ErrorKind::BudgetImpossible,
              "render_prompt: instruction, slot library and latest turn alone exceed " +
                  std::to_string(budget.max_prompt_tokens) + " " + counter.name + " tokens");
}

// Gold/model output block: one `'<id>': '<value>',` line per filled slot in
// library order, trailing comma on all but the last line. Single quotes in a
// value are doubled. An empty state renders as the empty string. `validate`
// can be turned off to render states that are flagged but deliberately kept.
inline std::string render_output(const BeliefState& state, const SlotLibrary& library,
                                 bool validate = true) {
  if (validate) {
    auto violations = validate_state(state, library);
    if (!violations.empty())
      throw Error(ErrorKind::InvalidRecord,
                  "render_output: state violates " +
                      std::string(state_rule_name(violations[0].rule)) + " for " +
                      violations[0].slot_id);
  }

  std::vector<std::pair<std::string_view, std::string_view>> lines;
  for (const auto& slot : library.slots) {
    if (const std::string* value = state.get(slot.id)) lines.emplace_back(slot.id, *value);
  }
  std::string out;
  for (size_t i = 0; i < lines.size(); ++i) {
    out += '\'';
    out += lines[i].first;
    out += "': '";
    for (char c : lines[i].second) {
      out += c;
      if (c == '\'') out += '\'';
    }
    out += '\'';
    if (i + 1 < lines.size()) out += ",\n";
  }
  return out;
}

}  // namespace slotkit
