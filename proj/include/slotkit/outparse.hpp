#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slotkit/core.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

enum class WarningReason {
  DroppedNotSubstring,
  MappedToAllowedValue,
  DroppedNoAllowedMatch,
  UnknownSlotId,
  UnparseableLine,
  DuplicateSlotKeptLast,
};

constexpr std::string_view warning_reason_name(WarningReason r) {
  switch (r) {
    case WarningReason::DroppedNotSubstring: return "DroppedNotSubstring";
    case WarningReason::MappedToAllowedValue: return "MappedToAllowedValue";
    case WarningReason::DroppedNoAllowedMatch: return "DroppedNoAllowedMatch";
    case WarningReason::UnknownSlotId: return "UnknownSlotId";
    case WarningReason::UnparseableLine: return "UnparseableLine";
    case WarningReason::DuplicateSlotKeptLast: return "DuplicateSlotKeptLast";
  }
  return "Unknown";
}

// `where` is the slot id, or "line <n>" for line-level warnings.
struct ParseWarning {
  std::string where;
  WarningReason reason;

  friend bool operator==(const ParseWarning&, const ParseWarning&) = default;
};

struct RawGeneration {
  std::map<std::string, std::string> values;
  std::vector<ParseWarning> warnings;
};

struct ParseOutcome {
  BeliefState state;
  std::vector<ParseWarning> warnings;

  size_t count(WarningReason r) const {
    size_t n = 0;
    for (const auto& w : warnings) {
      if (w.reason == r) ++n;
    }
    return n;
  }
};

namespace detail {

// Reads a quoted token starting at s[i] (single or double quote). Single
// quotes escape by doubling (''), double quotes by backslash. Returns the
// unescaped content and leaves i one past the closing quote.
inline std::optional<std::string> read_quoted(std::string_view s, size_t& i) {
  char q = s[i];
  ++i;
  std::string out;
  while (i < s.size()) {
    char c = s[i];
    if (q == '\'' && c == '\'') {
      if (i + 1 < s.size() && s[i + 1] == '\'') {
        out += '\'';
        i += 2;
        continue;
      }
      ++i;
      return out;
    }
    if (q == '"' && c == '"') {
      ++i;
      return out;
    }
    if (q == '"' && c == '\\' && i + 1 < s.size()) {
      char n = s[i + 1];
      if (n == '"' || n == '\\') {
        out += n;
        i += 2;
        continue;
      }
      if (n == 'n') {
        out += '\n';
        i += 2;
        continue;
      }
    }
    out += c;
    ++i;
  }
  return std::nullopt;  // unterminated
}

// One quasi-dict line: quoted or bare Slot-id key, colon, quoted or bare
// value, optional trailing comma.
inline std::optional<std::pair<std::string, std::string>> parse_kv_line(std::string_view line) {
  std::string_view s = text::trim(line);
  if (s.empty()) return std::nullopt;
  size_t i = 0;

  std::string key;
  if (s[i] == '\'' || s[i] == '"') {
    auto k = read_quoted(s, i);
    if (!k) return std::nullopt;
    key = *k;
  } else {
    size_t start = i;
    while (i < s.size() && s[i] != ':') ++i;
    if (i >= s.size()) return std::nullopt;
    key = std::string(text::trim(s.substr(start, i - start)));
    if (!valid_slot_id(key)) return std::nullopt;  // bare keys only for slot ids
  }

  while (i < s.size() && s[i] == ' ') ++i;
  if (i >= s.size() || s[i] != ':') return std::nullopt;
  ++i;
  while (i < s.size() && s[i] == ' ') ++i;
  if (i >= s.size()) return std::nullopt;

  std::string value;
  if (s[i] == '\'' || s[i] == '"') {
    auto v = read_quoted(s, i);
    if (!v) return std::nullopt;
    value = *v;
    std::string_view rest = text::trim(s.substr(i));
    if (!rest.empty() && rest != ",") return std::nullopt;
  } else {
    std::string_view rest = text::trim(s.substr(i));
    if (!rest.empty() && rest.back() == ',') rest = text::trim(rest.substr(0, rest.size() - 1));
    if (rest.empty()) return std::nullopt;
    value = std::string(rest);
  }
  return std::make_pair(std::move(key), std::move(value));
}

inline std::string json_scalar_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

}  // namespace detail

// Lenient parse of a raw model generation into slot-id -> value pairs. Total
// over arbitrary text: accepts the quasi-dict line format (single- or
// double-quoted, optional trailing comma), bare `Slot-<n>: value` lines, and
// whole-text JSON objects. Junk lines are skipped with UnparseableLine
// warnings; on duplicate ids the last occurrence wins.
inline RawGeneration parse_generation(const std::string& generation, const SlotLibrary& library) {
  (void)library;  // parsing is library-independent; filtering happens in validation
  RawGeneration out;

  auto put = [&out](std::string key, std::string value) {
    if (out.values.count(key))
      out.warnings.push_back({key, WarningReason::DuplicateSlotKeptLast});
    out.values[key] = std::move(value);
  };

  // Whole text as a JSON object first.
  {
    nlohmann::json j = nlohmann::json::parse(generation, nullptr, false);
    if (j.is_object()) {
      for (const auto& [key, value] : j.items()) {
        if (value.is_object() || value.is_array()) {
          out.warnings.push_back({key, WarningReason::UnparseableLine});
          continue;
        }
        put(key, detail::json_scalar_to_string(value));
      }
      return out;
    }
  }

  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= generation.size()) {
    size_t eol = generation.find('\n', pos);
    std::string_view line(generation.data() + pos,
                          (eol == std::string::npos ? generation.size() : eol) - pos);
    ++line_no;
    pos = (eol == std::string::npos) ? generation.size() + 1 : eol + 1;

    std::string_view trimmed = text::trim(line);
    if (trimmed.empty() || trimmed == "{" || trimmed == "}") continue;
    if (auto kv = detail::parse_kv_line(trimmed)) {
      put(std::move(kv->first), std::move(kv->second));
    } else {
      out.warnings.push_back({"line " + std::to_string(line_no), WarningReason::UnparseableLine});
    }
  }
  return out;
}

inline constexpr double kDefaultFuzzyThreshold = 0.8;

// Enforces the post-processing constraints on a raw parse: unknown ids are
// dropped; non-categorical values must be substrings of the conversation
// (case-sensitive, after trimming the candidate's outer whitespace);
// categorical values map to an allowed value by exact match, case-insensitive
// match, then normalized edit similarity >= threshold (ties broken by allowed
// order), else they are dropped. Total: never throws.
inline ParseOutcome validate_and_normalize(const RawGeneration& raw, const SlotLibrary& library,
                                           const Conversation& conversation,
                                           double fuzzy_threshold = kDefaultFuzzyThreshold) {
  ParseOutcome out;
  out.warnings = raw.warnings;
  const std::string haystack = conversation.joined_text();

  for (const auto& [id, raw_value] : raw.values) {
    const SlotSpec* spec = library.find(id);
    if (!spec) {
      out.warnings.push_back({id, WarningReason::UnknownSlotId});
      continue;
    }
    std::string value(text::trim(raw_value));

    if (!spec->allowed_values) {
      if (value.empty() || haystack.find(value) == std::string::npos) {
        out.warnings.push_back({id, WarningReason::DroppedNotSubstring});
        continue;
      }
      out.state.values[id] = std::move(value);
      continue;
    }

    const auto& allowed = *spec->allowed_values;
    bool done = false;
    for (const auto& a : allowed) {
      if (a == value) {
        out.state.values[id] = a;
        done = true;
        break;
      }
    }
    if (done) continue;
    for (const auto& a : allowed) {
      if (text::iequals(a, value)) {
        out.state.values[id] = a;
        out.warnings.push_back({id, WarningReason::MappedToAllowedValue});
        done = true;
        break;
      }
    }
    if (done) continue;
    double best = -1.0;
    const std::string* best_value = nullptr;
    if (!value.empty()) {
      for (const auto& a : allowed) {
        double sim = text::normalized_similarity(a, value);
        if (sim > best) {
          best = sim;
          best_value = &a;
        }
      }
    }
    if (best_value && best >= fuzzy_threshold) {
      out.state.values[id] = *best_value;
      out.warnings.push_back({id, WarningReason::MappedToAllowedValue});
    } else {
      out.warnings.push_back({id, WarningReason::DroppedNoAllowedMatch});
    }
  }
  return out;
}

inline ParseOutcome validate_and_normalize(const std::map<std::string, std::string>& raw,
                                           const SlotLibrary& library,
                                           const Conversation& conversation,
                                           double fuzzy_threshold = kDefaultFuzzyThreshold) {
  return validate_and_normalize(RawGeneration{raw, {}}, library, conversation, fuzzy_threshold);
}

}  // namespace slotkit
