#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slotkit/errors.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

// One slot's identity. `name` is bookkeeping only (dataset provenance,
// augmentation heuristics) and is never rendered into a prompt.
struct SlotSpec {
  std::string id;           // "Slot-<digits>"
  std::string name;         // source dataset slot name; may be empty
  std::string description;  // natural-language description, single line
  std::optional<std::vector<std::string>> allowed_values;  // present <=> categorical

  bool categorical() const { return allowed_values.has_value(); }

  friend bool operator==(const SlotSpec&, const SlotSpec&) = default;
};

inline bool valid_slot_id(std::string_view id) {
  if (id.size() < 6 || id.substr(0, 5) != "Slot-") return false;
  for (char c : id.substr(5)) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

inline std::string make_slot_id(int n) { return "Slot-" + std::to_string(n); }

// Ordered slot set provided with each prompt; order is the rendering order.
struct SlotLibrary {
  std::vector<SlotSpec> slots;

  const SlotSpec* find(std::string_view id) const {
    for (const auto& s : slots) {
      if (s.id == id) return &s;
    }
    return nullptr;
  }
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  size_t size() const { return slots.size(); }
  bool empty() const { return slots.empty(); }

  friend bool operator==(const SlotLibrary&, const SlotLibrary&) = default;
};

// Library-level invariant check: unique well-formed ids, non-empty single-line
// descriptions, >=2 distinct allowed values when categorical.
struct LibraryViolation {
  std::string slot_id;
  std::string rule;
};

inline std::vector<LibraryViolation> validate_library(const SlotLibrary& library) {
  std::vector<LibraryViolation> out;
  std::map<std::string, int> seen;
  for (const auto& s : library.slots) {
    if (!valid_slot_id(s.id)) out.push_back({s.id, "MalformedId"});
    if (++seen[s.id] == 2) out.push_back({s.id, "DuplicateId"});
    if (text::trim(s.description).empty()) out.push_back({s.id, "EmptyDescription"});
    if (s.description.find('\n') != std::string::npos)
      out.push_back({s.id, "DescriptionHasNewline"});
    if (s.allowed_values) {
      std::map<std::string, int> distinct;
      for (const auto& v : *s.allowed_values) {
        if (v.empty()) {
          out.push_back({s.id, "EmptyAllowedValue"});
          break;
        }
        distinct[v] = 1;
      }
      if (distinct.size() < 2) out.push_back({s.id, "TooFewAllowedValues"});
    }
  }
  return out;
}

enum class Role { User, System };

constexpr std::string_view role_name(Role r) { return r == Role::User ? "USER" : "SYSTEM"; }

inline std::optional<Role> role_from_name(std::string_view s) {
  if (s == "USER") return Role::User;
  if (s == "SYSTEM") return Role::System;
  return std::nullopt;
}

struct Turn {
  Role role = Role::User;
  std::string text;  // may contain newlines

  friend bool operator==(const Turn&, const Turn&) = default;
};

inline Turn user_turn(std::string text) { return Turn{Role::User, std::move(text)}; }
inline Turn system_turn(std::string text) { return Turn{Role::System, std::move(text)}; }

struct Conversation {
  std::vector<Turn> turns;

  bool empty() const { return turns.empty(); }
  size_t size() const { return turns.size(); }

  // Turn texts joined with newlines; the substring check for non-categorical
  // values runs against this so values never span a turn boundary.
  std::string joined_text() const {
    std::string out;
    for (size_t i = 0; i < turns.size(); ++i) {
      if (i) out += '\n';
      out += turns[i].text;
    }
    return out;
  }

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

// The belief state B_t: slot-id -> extracted value. A slot with no value is
// simply absent (none is represented by key absence, not a sentinel).
struct BeliefState {
  std::map<std::string, std::string> values;

  bool has(std::string_view id) const { return values.count(std::string(id)) > 0; }
  const std::string* get(std::string_view id) const {
    auto it = values.find(std::string(id));
    return it == values.end() ? nullptr : &it->second;
  }
  void set(std::string id, std::string value) { values[std::move(id)] = std::move(value); }
  size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }

  friend bool operator==(const BeliefState&, const BeliefState&) = default;
};

enum class UpdateMode { Replace, Merge };

constexpr std::string_view update_mode_name(UpdateMode m) {
  return m == UpdateMode::Replace ? "replace" : "merge";
}

inline std::optional<UpdateMode> update_mode_from_name(std::string_view s) {
  if (s == "replace" || s == "REPLACE") return UpdateMode::Replace;
  if (s == "merge" || s == "MERGE") return UpdateMode::Merge;
  return std::nullopt;
}

// Tracking update at turn t. Replace is the default: prompts carry the full
// conversation each turn, so the model re-derives every value and the fresh
// extraction simply wins (which also lets a model retract a slot to none).
// Merge overlays the extraction onto the prior state for delta-emitting
// backends. When `library` is given, any key outside it is treated as
// evidence the states belong to different libraries.
inline BeliefState belief_update(const BeliefState& prev, const BeliefState& extracted,
                                 UpdateMode mode, const SlotLibrary* library = nullptr) {
  if (library) {
    for (const auto* state : {&prev, &extracted}) {
      for (const auto& [id, value] : state->values) {
        (void)value;
        if (!library->contains(id))
          throw Error(ErrorKind::MixedLibrary,
                      "belief_update: state key " + id + " is not in the governing library");
      }
    }
  }
  if (mode == UpdateMode::Replace) return extracted;
  BeliefState out = prev;
  for (const auto& [id, value] : extracted.values) out.values[id] = value;
  return out;
}

enum class StateRule { UnknownSlot, NotInAllowedValues, EmptyValue };

constexpr std::string_view state_rule_name(StateRule r) {
  switch (r) {
    case StateRule::UnknownSlot: return "UnknownSlot";
    case StateRule::NotInAllowedValues: return "NotInAllowedValues";
    case StateRule::EmptyValue: return "EmptyValue";
  }
  return "Unknown";
}

struct StateViolation {
  std::string slot_id;
  StateRule rule;

  friend bool operator==(const StateViolation&, const StateViolation&) = default;
};

// Total check of the BeliefState invariants against a library; empty result
// means the state is valid.
inline std::vector<StateViolation> validate_state(const BeliefState& state,
                                                  const SlotLibrary& library) {
  std::vector<StateViolation> out;
  for (const auto& [id, value] : state.values) {
    const SlotSpec* spec = library.find(id);
    if (!spec) {
      out.push_back({id, StateRule::UnknownSlot});
      continue;
    }
    if (value.empty()) {
      out.push_back({id, StateRule::EmptyValue});
      continue;
    }
    if (spec->allowed_values) {
      bool found = false;
      for (const auto& allowed : *spec->allowed_values) {
        if (allowed == value) {
          found = true;
          break;
        }
      }
      if (!found) out.push_back({id, StateRule::NotInAllowedValues});
    }
  }
  return out;
}

enum class Category {
  Sgd,
  MultiSlot,
  LongValue,
  Categorical,
  NameSplit,
  IdData,
  Address,
  Relation,
  Realistic,
};

constexpr std::string_view category_tag(Category c) {
  switch (c) {
    case Category::Sgd: return "SGD";
    case Category::MultiSlot: return "MULTI_SLOT";
    case Category::LongValue: return "LONG_VALUE";
    case Category::Categorical: return "CATEGORICAL";
    case Category::NameSplit: return "NAME_SPLIT";
    case Category::IdData: return "ID_DATA";
    case Category::Address: return "ADDRESS";
    case Category::Relation: return "RELATION";
    case Category::Realistic: return "REALISTIC";
  }
  return "SGD";
}

// Row label used in report tables.
constexpr std::string_view category_display_name(Category c) {
  switch (c) {
    case Category::Sgd: return "SGD";
    case Category::MultiSlot: return "Multiple Slots in Single Turn";
    case Category::LongValue: return "Long Slot Values";
    case Category::Categorical: return "Categorical Slots";
    case Category::NameSplit: return "Name Splitting";
    case Category::IdData: return "ID data";
    case Category::Address: return "Address Parsing";
    case Category::Relation: return "Relation";
    case Category::Realistic: return "Realistic Benchmark";
  }
  return "SGD";
}

inline std::optional<Category> category_from_tag(std::string_view s) {
  for (Category c : {Category::Sgd, Category::MultiSlot, Category::LongValue,
                     Category::Categorical, Category::NameSplit, Category::IdData,
                     Category::Address, Category::Relation, Category::Realistic}) {
    if (category_tag(c) == s) return c;
  }
  return std::nullopt;
}

enum class Split { Train, Val, Test };

constexpr std::string_view split_tag(Split s) {
  switch (s) {
    case Split::Train: return "TRAIN";
    case Split::Val: return "VAL";
    case Split::Test: return "TEST";
  }
  return "TRAIN";
}

inline std::optional<Split> split_from_tag(std::string_view s) {
  if (s == "TRAIN") return Split::Train;
  if (s == "VAL") return Split::Val;
  if (s == "TEST") return Split::Test;
  return std::nullopt;
}

// One fine-tuning / evaluation example. `state` keeps every acceptable value
// alternative per slot (first entry is the gold rendering); `dialogue_id`
// records provenance so dataset splitting can keep a dialogue in one split.
struct PromptRecord {
  std::string prompt;
  std::string gold_output;
  std::map<std::string, std::vector<std::string>> state;
  SlotLibrary library;
  Conversation conversation;
  Category category = Category::Sgd;
  Split split = Split::Train;
  std::string dialogue_id;

  // Gold state as a BeliefState: the first alternative of each slot.
  BeliefState gold_state() const {
    BeliefState b;
    for (const auto& [id, alts] : state) {
      if (!alts.empty()) b.values[id] = alts.front();
    }
    return b;
  }

  friend bool operator==(const PromptRecord&, const PromptRecord&) = default;
};

}  // namespace slotkit
