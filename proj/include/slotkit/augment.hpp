#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "slotkit/backend.hpp"
#include "slotkit/core.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/promptgen.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

struct PipelineConfig {
  std::uint64_t seed = 0;
  size_t limit = 0;        // 0 = no cap (generators and sampling pipelines)
  double probability = 1.0;  // id_injection selection rate
  std::string data_dir = "data";  // root for banks/ and lexicons/
  TokenBudget budget{};
  Backend* paraphrase = nullptr;  // multi_slot; template fallback when unset
  // Pins the ids of newly created slots, keyed by role ("<slot>.first",
  // "relation", "id", template roles); used to reproduce published examples.
  std::map<std::string, int> fixed_ids;
  // Pins generated id strings (same purpose).
  std::optional<std::string> fixed_id_value;
};

struct NameParts {
  std::optional<std::string> prefix, first, middle, last;

  std::string joined() const {
    std::string out;
    for (const auto* p : {&prefix, &first, &middle, &last}) {
      if (!*p) continue;
      if (!out.empty()) out += ' ';
      out += **p;
    }
    return out;
  }

  friend bool operator==(const NameParts&, const NameParts&) = default;
};

struct AddressParts {
  std::optional<std::string> house_number, street, city, state_district;

  friend bool operator==(const AddressParts&, const AddressParts&) = default;
};

inline const std::set<std::string>& default_honorifics() {
  static const std::set<std::string> k{"dr", "mr", "mrs", "ms", "prof"};
  return k;
}

// Positional name rule: a leading token ending in '.' or found in the
// honorific lexicon is the prefix; then first token -> first, final token ->
// last, anything between joins into middle; a single remaining token is just
// the first name. Returns nothing when the parts cannot reconstruct the
// original (e.g. doubled spaces).
inline std::optional<NameParts> parse_name_parts(
    const std::string& name, const std::set<std::string>& honorifics = default_honorifics()) {
  std::vector<std::string_view> tokens = text::split_words(name);
  if (tokens.empty()) return std::nullopt;

  NameParts p;
  size_t i = 0;
  if (tokens.size() >= 2) {
    std::string head = text::to_lower(tokens[0]);
    if (!head.empty() && head.back() == '.') head.pop_back();
    if (tokens[0].back() == '.' || honorifics.count(head)) {
      p.prefix = std::string(tokens[0]);
      i = 1;
    }
  }
  size_t rest = tokens.size() - i;
  if (rest == 1) {
    p.first = std::string(tokens[i]);
  } else {
    p.first = std::string(tokens[i]);
    p.last = std::string(tokens.back());
    if (rest > 2) {
      std::string middle;
      for (size_t k = i + 1; k + 1 < tokens.size(); ++k) {
        if (!middle.empty()) middle += ' ';
        middle += std::string(tokens[k]);
      }
      p.middle = middle;
    }
  }
  if (p.joined() != name) return std::nullopt;
  return p;
}

// Positional address rule: maximal leading digit-run -> house number; tokens
// through the last street-type keyword -> street; next token -> city; the
// rest -> state/district. No street keyword means the address is not
// splittable under this rule.
inline std::optional<AddressParts> parse_address_parts(const std::string& address) {
  static const std::set<std::string> kStreetWords{"road",      "street", "st",   "ave",
                                                  "avenue",    "boulevard", "blvd", "lane",
                                                  "drive",     "way"};
  std::vector<std::string_view> tokens = text::split_words(address);
  if (tokens.empty()) return std::nullopt;

  auto all_digits = [](std::string_view t) {
    if (t.empty()) return false;
    for (char c : t)
      if (c < '0' || c > '9') return false;
    return true;
  };
  auto is_street_word = [&](std::string_view t) {
    std::string w = text::to_lower(t);
    while (!w.empty() && (w.back() == '.' || w.back() == ',')) w.pop_back();
    return kStreetWords.count(w) > 0;
  };
  auto join = [](const std::vector<std::string_view>& ts, size_t from, size_t to) {
    std::string out;
    for (size_t k = from; k < to; ++k) {
      if (!out.empty()) out += ' ';
      out += std::string(ts[k]);
    }
    return out;
  };

  size_t i = 0;
  while (i < tokens.size() && all_digits(tokens[i])) ++i;

  size_t street_end = 0;  // one past the last street keyword
  for (size_t k = i; k < tokens.size(); ++k)
    if (is_street_word(tokens[k])) street_end = k + 1;
  if (street_end <= i) return std::nullopt;  // no street keyword after the number

  AddressParts p;
  if (i > 0) p.house_number = join(tokens, 0, i);
  p.street = join(tokens, i, street_end);
  if (street_end < tokens.size()) p.city = std::string(tokens[street_end]);
  if (street_end + 1 < tokens.size()) p.state_district = join(tokens, street_end + 1, tokens.size());

  // The rule only defines gold where joins are literal substrings.
  for (const auto* part : {&p.house_number, &p.street, &p.city, &p.state_district}) {
    if (*part && address.find(**part) == std::string::npos) return std::nullopt;
  }
  return p;
}

inline std::vector<std::string> read_bank(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open bank: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!text::trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) throw Error(ErrorKind::EmptyBank, "no entries in " + path);
  return lines;
}

namespace detail {

inline std::mt19937_64 record_rng(const PipelineConfig& config, std::string_view pipeline,
                                  size_t index) {
  std::uint64_t salt = text::fnv1a64(pipeline);
  return std::mt19937_64(text::mix64(text::mix64(config.seed ^ salt) ^ (index + 1)));
}

inline double unit_real(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline std::set<std::string> library_ids(const SlotLibrary& library) {
  std::set<std::string> out;
  for (const auto& slot : library.slots) out.insert(slot.id);
  return out;
}

inline std::string pick_id(const PipelineConfig& config, const std::string& role,
                           std::mt19937_64& rng, std::set<std::string>& used) {
  auto it = config.fixed_ids.find(role);
  if (it != config.fixed_ids.end()) {
    std::string id = make_slot_id(it->second);
    if (!used.insert(id).second)
      throw Error(ErrorKind::Config, "fixed id already in use: " + id + " (" + role + ")");
    return id;
  }
  for (int tries = 0; tries < 10000; ++tries) {
    std::string id = make_slot_id(int(rng() % 1000));
    if (used.insert(id).second) return id;
  }
  throw Error(ErrorKind::IdSpaceExhausted, "no free slot id below 1000");
}

inline std::string generate_id_value(std::mt19937_64& rng) {
  static constexpr std::string_view kDigits = "0123456789";
  static constexpr std::string_view kLetters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  static constexpr std::string_view kMixed =
      "0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  std::string_view alphabet;
  switch (rng() % 3) {
    case 0: alphabet = kDigits; break;
    case 1: alphabet = kLetters; break;
    default: alphabet = kMixed; break;
  }
  size_t len = 6 + size_t(rng() % 5);
  std::string out;
  for (size_t i = 0; i < len; ++i) out += alphabet[size_t(rng() % alphabet.size())];
  return out;
}

inline void refresh(PromptRecord& r, const TokenBudget& budget) {
  r.prompt = render_prompt(r.library, r.conversation, budget).prompt;
  r.gold_output = render_output(r.gold_state(), r.library, /*validate=*/false);
}

inline std::string join_naturally(const std::vector<std::string>& parts) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

inline std::string substitute(std::string text, std::string_view key, const std::string& value) {
  size_t at;
  std::string token = "{" + std::string(key) + "}";
  while ((at = text.find(token)) != std::string::npos) text.replace(at, token.size(), value);
  return text;
}

}  // namespace detail

// Collapses a dialogue whose system side confirmed >= 3 values into a single
// user turn stating all of them, mirroring how users dump every detail in
// one breath. The paraphrase backend may restyle the turn but every value
// must survive verbatim, else the deterministic template is used.
inline std::vector<PromptRecord> multi_slot(const std::vector<PromptRecord>& records,
                                            const PipelineConfig& config = {}) {
  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (size_t index = 0; index < records.size(); ++index) {
    const PromptRecord& record = records[index];
    BeliefState gold = record.gold_state();

    // Last system turn that restates at least 3 gold values.
    std::vector<std::string> confirmed_ids;
    for (auto turn = record.conversation.turns.rbegin(); turn != record.conversation.turns.rend();
         ++turn) {
      if (turn->role != Role::System) continue;
      std::vector<std::string> ids;
      for (const auto& slot : record.library.slots) {
        const std::string* value = gold.get(slot.id);
        if (value && !value->empty() && turn->text.find(*value) != std::string::npos)
          ids.push_back(slot.id);
      }
      if (ids.size() >= 3) {
        confirmed_ids = std::move(ids);
        break;
      }
    }
    if (confirmed_ids.empty()) {
      out.push_back(record);
      continue;
    }

    std::vector<std::string> parts;
    for (const auto& id : confirmed_ids)
      parts.push_back(record.library.find(id)->description + " " + *gold.get(id));
    std::string sentence = "I need " + detail::join_naturally(parts) + ".";

    if (config.paraphrase) {
      std::string ask = "Rewrite the following as one natural user request, keeping every "
                        "value exactly as written:\n" + sentence;
      try {
        CompletionRequest req;
        req.prompt = ask;
        std::string candidate = config.paraphrase->complete(req).text;
        bool ok = !text::trim(candidate).empty();
        for (const auto& id : confirmed_ids)
          ok = ok && candidate.find(*gold.get(id)) != std::string::npos;
        if (ok) sentence = std::string(text::trim(candidate));
      } catch (const Error&) {
        // fall back to the template
      }
    }

    PromptRecord r;
    r.library = record.library;
    r.conversation.turns = {user_turn(sentence)};
    for (const auto& id : confirmed_ids) {
      auto it = record.state.find(id);
      r.state[id] = (it != record.state.end()) ? it->second
                                               : std::vector<std::string>{*gold.get(id)};
    }
    r.category = Category::MultiSlot;
    r.split = record.split;
    r.dialogue_id = record.dialogue_id;
    detail::refresh(r, config.budget);
    out.push_back(std::move(r));
  }
  return out;
}

struct LongValueTemplate {
  std::string name;
  std::string bank_file;
  std::string id_role;
  std::string id_description;
  std::string value_role;
  std::string value_description;
  std::string user_line;    // {id} and {value} placeholders
  std::string system_line;  // {id} placeholder
};

inline std::vector<LongValueTemplate> long_value_templates() {
  return {
      {"order_cancellation", "cancellation_reasons.txt", "order_id", "id of an order",
       "cancellation_reason", "cancellation reason",
       "I want to cancel my order {id} as {value}",
       "sure, cancelled your order with ID {id}."},
      {"insurance_claim", "claim_descriptions.txt", "policy_id", "id of the insurance policy",
       "claim_description", "description of the claim",
       "I want to file a claim on my policy {id}. {value}",
       "Thank you, I have registered a claim on policy {id}."},
      {"tech_support", "issue_descriptions.txt", "ticket_id", "id of the support ticket",
       "issue_description", "description of the problem",
       "I need help with ticket {id}. {value}",
       "Got it, an agent will follow up on ticket {id}."},
      {"booking_preference", "preferences.txt", "booking_id", "id of the booking",
       "preference", "preference for the booking",
       "For my booking {id} please note that {value}",
       "Noted your preference for booking {id}."},
  };
}

// Generates scenario conversations around long free-text values read from
// the bank files; the bank entry lands verbatim in a user turn.
inline std::vector<PromptRecord> long_values(const PipelineConfig& config = {}) {
  auto templates = long_value_templates();
  std::vector<std::pair<size_t, size_t>> pairs;  // (template index, bank index)
  std::vector<std::vector<std::string>> banks;
  for (size_t t = 0; t < templates.size(); ++t) {
    banks.push_back(read_bank(config.data_dir + "/banks/" + templates[t].bank_file));
    for (size_t b = 0; b < banks.back().size(); ++b) pairs.emplace_back(t, b);
  }

  std::vector<size_t> chosen(pairs.size());
  for (size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  if (config.limit > 0 && config.limit < pairs.size()) {
    std::mt19937_64 rng(text::mix64(config.seed ^ text::fnv1a64("long_values/sample")));
    for (size_t i = 0; i < config.limit; ++i) {
      size_t j = i + size_t(rng() % (chosen.size() - i));
      std::swap(chosen[i], chosen[j]);
    }
    chosen.resize(config.limit);
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<PromptRecord> out;
  out.reserve(chosen.size());
  for (size_t pick : chosen) {
    const auto& [t, b] = pairs[pick];
    const LongValueTemplate& tpl = templates[t];
    const std::string& value = banks[t][b];
    std::mt19937_64 rng = detail::record_rng(config, "long_values", pick);

    std::string id_value = config.fixed_id_value.value_or(detail::generate_id_value(rng));
    std::set<std::string> used;
    std::string id_slot = detail::pick_id(config, tpl.id_role, rng, used);
    std::string value_slot = detail::pick_id(config, tpl.value_role, rng, used);

    PromptRecord r;
    r.library.slots.push_back({id_slot, tpl.id_role, tpl.id_description, std::nullopt});
    r.library.slots.push_back({value_slot, tpl.value_role, tpl.value_description, std::nullopt});
    std::string user = detail::substitute(tpl.user_line, "id", id_value);
    user = detail::substitute(user, "value", value);
    r.conversation.turns = {user_turn(user),
                            system_turn(detail::substitute(tpl.system_line, "id", id_value))};
    r.state[id_slot] = {id_value};
    r.state[value_slot] = {value};
    r.category = Category::LongValue;
    r.dialogue_id = tpl.name + "_" + std::to_string(b);
    detail::refresh(r, config.budget);
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline bool is_boolean_allowed(const std::vector<std::string>& allowed) {
  if (allowed.size() != 2) return false;
  std::set<std::string> values;
  for (const auto& v : allowed) values.insert(text::to_lower(text::trim(v)));
  return values == std::set<std::string>{"false", "true"} ||
         values == std::set<std::string>{"no", "yes"};
}

inline bool is_truthy(const std::string& value) {
  std::string v = text::to_lower(text::trim(value));
  return v == "true" || v == "yes";
}

}  // namespace detail

inline constexpr std::string_view kConfirmDescription =
    "Please confirm. Allowed values (\"Yes, go ahead\",\"No\")";

// Rewrites a boolean slot into an explicit confirmation exchange: the system
// restates what it heard and asks, the user answers, and the gold value
// becomes "Yes, go ahead"/"No".
inline std::vector<PromptRecord> categorical_confirm(const std::vector<PromptRecord>& records,
                                                     const PipelineConfig& config = {}) {
  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (const PromptRecord& record : records) {
    size_t target = record.library.slots.size();
    for (size_t i = 0; i < record.library.slots.size(); ++i) {
      const SlotSpec& slot = record.library.slots[i];
      if (slot.allowed_values && detail::is_boolean_allowed(*slot.allowed_values) &&
          record.state.count(slot.id) && !record.state.at(slot.id).empty()) {
        target = i;
        break;
      }
    }
    if (target == record.library.slots.size()) {
      out.push_back(record);
      continue;
    }

    PromptRecord r = record;
    SlotSpec& confirm = r.library.slots[target];
    confirm.description = std::string(kConfirmDescription);
    confirm.allowed_values = std::vector<std::string>{"Yes, go ahead", "No"};

    bool truthy = detail::is_truthy(record.state.at(confirm.id).front());
    r.state[confirm.id] = {truthy ? "Yes, go ahead" : "No"};

    std::vector<std::string> parts;
    BeliefState gold = r.gold_state();
    for (const auto& slot : r.library.slots) {
      if (slot.id == confirm.id) continue;
      if (const std::string* value = gold.get(slot.id))
        parts.push_back(slot.description + " " + *value);
    }
    std::string ask = parts.empty()
                          ? "Please confirm. Allowed values (\"Yes, go ahead\",\"No\")."
                          : "Please confirm: " + detail::join_naturally(parts) +
                                ". Allowed values (\"Yes, go ahead\",\"No\").";
    r.conversation.turns.push_back(system_turn(ask));
    r.conversation.turns.push_back(user_turn(truthy ? "Yes." : "No."));
    r.category = Category::Categorical;
    detail::refresh(r, config.budget);
    out.push_back(std::move(r));
  }
  return out;
}

namespace detail {

inline bool is_name_slot(const SlotSpec& slot) {
  std::string name = text::to_lower(slot.name.empty() ? slot.description : slot.name);
  if (name.find("name") == std::string::npos) return false;
  for (std::string_view part : {".prefix", ".first", ".middle", ".last"}) {
    const std::string& n = slot.name;
    if (n.size() > part.size() && std::string_view(n).substr(n.size() - part.size()) == part)
      return false;  // already a split product
  }
  return true;
}

}  // namespace detail

// Replaces each name slot with prefix/first/middle/last slots and derives
// the part gold values positionally from the original name.
inline std::vector<PromptRecord> name_split(const std::vector<PromptRecord>& records,
                                            const PipelineConfig& config = {}) {
  std::set<std::string> honorifics = default_honorifics();
  {
    std::ifstream in(config.data_dir + "/lexicons/honorifics.txt");
    if (in) {
      honorifics.clear();
      std::string line;
      while (std::getline(in, line)) {
        std::string w = text::to_lower(text::trim(line));
        if (!w.empty() && w.back() == '.') w.pop_back();
        if (!w.empty()) honorifics.insert(w);
      }
      if (honorifics.empty()) honorifics = default_honorifics();
    }
  }

  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (size_t index = 0; index < records.size(); ++index) {
    const PromptRecord& record = records[index];
    std::mt19937_64 rng = detail::record_rng(config, "name_split", index);
    std::set<std::string> used = detail::library_ids(record.library);

    PromptRecord r = record;
    bool changed = false;
    for (size_t i = 0; i < r.library.slots.size(); ++i) {
      const SlotSpec slot = r.library.slots[i];
      if (!detail::is_name_slot(slot)) continue;
      auto it = r.state.find(slot.id);
      if (it == r.state.end() || it->second.empty()) continue;
      auto parts = parse_name_parts(it->second.front(), honorifics);
      if (!parts) continue;

      std::string base_role = slot.name.empty() ? slot.id : slot.name;
      struct Part {
        const char* role;
        const char* word;
        const std::optional<std::string>* value;
      };
      const Part kParts[] = {{".prefix", "Prefix", &parts->prefix},
                             {".first", "First", &parts->first},
                             {".middle", "Middle", &parts->middle},
                             {".last", "Last", &parts->last}};

      used.erase(slot.id);
      r.state.erase(slot.id);
      std::vector<SlotSpec> part_specs;
      for (const Part& part : kParts) {
        SlotSpec spec;
        spec.id = detail::pick_id(config, base_role + part.role, rng, used);
        spec.name = base_role + part.role;
        spec.description = std::string(part.word) + " " + slot.description;
        if (*part.value) r.state[spec.id] = {**part.value};
        part_specs.push_back(std::move(spec));
      }
      r.library.slots.erase(r.library.slots.begin() + i);
      r.library.slots.insert(r.library.slots.begin() + i, part_specs.begin(), part_specs.end());
      i += part_specs.size() - 1;
      changed = true;
    }
    if (changed) {
      r.category = Category::NameSplit;
      detail::refresh(r, config.budget);
    }
    out.push_back(std::move(r));
  }
  return out;
}

// Plants an identifier exchange right after the opening user turn: the
// system asks for an id, the user answers with a generated digits/letters/
// mixed value, and the gold state gains the pair.
inline std::vector<PromptRecord> id_injection(const std::vector<PromptRecord>& records,
                                              const PipelineConfig& config = {}) {
  std::vector<std::string> descriptions = read_bank(config.data_dir + "/lexicons/id_descriptions.txt");
  std::vector<std::string> probes = read_bank(config.data_dir + "/lexicons/id_probes.txt");

  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (size_t index = 0; index < records.size(); ++index) {
    const PromptRecord& record = records[index];
    std::mt19937_64 rng = detail::record_rng(config, "id_injection", index);
    if (detail::unit_real(rng) >= config.probability) {
      out.push_back(record);
      continue;
    }
    size_t first_user = record.conversation.turns.size();
    for (size_t i = 0; i < record.conversation.turns.size(); ++i) {
      if (record.conversation.turns[i].role == Role::User) {
        first_user = i;
        break;
      }
    }
    if (first_user == record.conversation.turns.size()) {
      out.push_back(record);
      continue;
    }

    PromptRecord r = record;
    std::set<std::string> used = detail::library_ids(r.library);
    std::string id = detail::pick_id(config, "id", rng, used);
    const std::string& description = descriptions[size_t(rng() % descriptions.size())];
    const std::string& probe = probes[size_t(rng() % probes.size())];
    std::string value = config.fixed_id_value.value_or(detail::generate_id_value(rng));

    r.library.slots.push_back({id, "injected_id", description, std::nullopt});
    r.conversation.turns.insert(r.conversation.turns.begin() + long(first_user) + 1,
                                {system_turn(probe), user_turn(value)});
    r.state[id] = {value};
    r.category = Category::IdData;
    detail::refresh(r, config.budget);
    out.push_back(std::move(r));
  }
  return out;
}

// Replaces each address slot with house-number/street/city/state-district
// slots. Records whose only address value the positional rule cannot split
// are dropped with an UnsplittableAddress warning; records without address
// values pass through unchanged.
inline std::vector<PromptRecord> address_split(const std::vector<PromptRecord>& records,
                                               const PipelineConfig& config = {},
                                               std::vector<std::string>* warnings = nullptr) {
  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (size_t index = 0; index < records.size(); ++index) {
    const PromptRecord& record = records[index];
    std::mt19937_64 rng = detail::record_rng(config, "address_split", index);
    std::set<std::string> used = detail::library_ids(record.library);

    PromptRecord r = record;
    bool changed = false;
    bool had_address_value = false;
    for (size_t i = 0; i < r.library.slots.size(); ++i) {
      const SlotSpec slot = r.library.slots[i];
      std::string name = text::to_lower(slot.name.empty() ? slot.description : slot.name);
      if (name.find("address") == std::string::npos) continue;
      auto it = r.state.find(slot.id);
      if (it == r.state.end() || it->second.empty()) continue;
      had_address_value = true;
      auto parts = parse_address_parts(it->second.front());
      if (!parts) {
        if (warnings)
          warnings->push_back("UnsplittableAddress: record " + std::to_string(index) + " slot " +
                              slot.id + " value \"" + it->second.front() + "\"");
        continue;
      }

      std::string base_role = slot.name.empty() ? slot.id : slot.name;
      struct Part {
        const char* role;
        const char* description;
        const std::optional<std::string>* value;
      };
      const Part kParts[] = {
          {".house_number", "house-number", &parts->house_number},
          {".street", "street name", &parts->street},
          {".city", "name of the city/town/village", &parts->city},
          {".state_district", "state-district", &parts->state_district},
      };

      used.erase(slot.id);
      r.state.erase(slot.id);
      std::vector<SlotSpec> part_specs;
      for (const Part& part : kParts) {
        SlotSpec spec;
        spec.id = detail::pick_id(config, base_role + part.role, rng, used);
        spec.name = base_role + part.role;
        spec.description = part.description;
        if (*part.value) r.state[spec.id] = {**part.value};
        part_specs.push_back(std::move(spec));
      }
      r.library.slots.erase(r.library.slots.begin() + i);
      r.library.slots.insert(r.library.slots.begin() + i, part_specs.begin(), part_specs.end());
      i += part_specs.size() - 1;
      changed = true;
    }
    if (had_address_value && !changed) continue;  // nothing splittable: drop
    if (changed) {
      r.category = Category::Address;
      detail::refresh(r, config.budget);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline const std::vector<std::string>& default_relations() {
  static const std::vector<std::string> k{
      "brother", "sister", "mother",      "father",      "wife",  "husband", "son",
      "daughter", "friend", "cousin",     "aunt",        "uncle", "grandmother",
      "grandfather"};
  return k;
}

// Adds a "relationship with receiver" slot; the gold value is the leftmost
// `my <relation-word>` possessive found in a user turn, if any.
inline std::vector<PromptRecord> relation_injection(const std::vector<PromptRecord>& records,
                                                    const PipelineConfig& config = {}) {
  std::set<std::string> lexicon;
  {
    std::ifstream in(config.data_dir + "/lexicons/relations.txt");
    if (in) {
      std::string line;
      while (std::getline(in, line)) {
        std::string w = text::to_lower(text::trim(line));
        if (!w.empty()) lexicon.insert(w);
      }
    }
    if (lexicon.empty())
      lexicon.insert(default_relations().begin(), default_relations().end());
  }

  auto find_relation = [&lexicon](const std::string& turn_text) -> std::optional<std::string> {
    std::string low = text::to_lower(turn_text);
    size_t search = 0;
    while (true) {
      size_t at = low.find("my ", search);
      if (at == std::string::npos) return std::nullopt;
      bool boundary = at == 0 || !std::isalnum(static_cast<unsigned char>(low[at - 1]));
      if (boundary) {
        size_t ws = at + 3;
        size_t we = ws;
        while (we < low.size() && std::isalpha(static_cast<unsigned char>(low[we]))) ++we;
        if (we > ws && lexicon.count(low.substr(ws, we - ws)))
          return turn_text.substr(ws, we - ws);
      }
      search = at + 1;
    }
  };

  std::vector<PromptRecord> out;
  out.reserve(records.size());
  for (size_t index = 0; index < records.size(); ++index) {
    const PromptRecord& record = records[index];
    std::mt19937_64 rng = detail::record_rng(config, "relation_injection", index);
    std::set<std::string> used = detail::library_ids(record.library);

    PromptRecord r = record;
    std::string id = detail::pick_id(config, "relation", rng, used);
    r.library.slots.push_back(
        {id, "relationship_with_receiver", "relationship with receiver", std::nullopt});
    for (const auto& turn : r.conversation.turns) {
      if (turn.role != Role::User) continue;
      if (auto relation = find_relation(turn.text)) {
        r.state[id] = {*relation};
        break;
      }
    }
    r.category = Category::Relation;
    detail::refresh(r, config.budget);
    out.push_back(std::move(r));
  }
  return out;
}

// Partition by source dialogue so no dialogue straddles splits. Records
// without a dialogue id form singleton groups.
inline std::vector<PromptRecord> split_dataset(const std::vector<PromptRecord>& records,
                                               const std::array<double, 3>& ratios,
                                               std::uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0 || std::abs(sum - 1.0) > 1e-9)
    throw Error(ErrorKind::Config, "split ratios must be non-negative and sum to 1");

  std::vector<std::string> group_of(records.size());
  std::set<std::string> distinct;
  for (size_t i = 0; i < records.size(); ++i) {
    group_of[i] = records[i].dialogue_id.empty() ? "#" + std::to_string(i)
                                                 : records[i].dialogue_id;
    distinct.insert(group_of[i]);
  }
  std::vector<std::string> groups(distinct.begin(), distinct.end());
  std::mt19937_64 rng(text::mix64(seed ^ text::fnv1a64("split_dataset")));
  for (size_t i = groups.size(); i > 1; --i)
    std::swap(groups[i - 1], groups[size_t(rng() % i)]);

  size_t n = groups.size();
  size_t b1 = size_t(std::llround(ratios[0] * double(n)));
  size_t b2 = size_t(std::llround((ratios[0] + ratios[1]) * double(n)));
  if (b1 > n) b1 = n;
  if (b2 < b1) b2 = b1;
  if (b2 > n) b2 = n;

  std::map<std::string, Split> assignment;
  for (size_t i = 0; i < n; ++i)
    assignment[groups[i]] = (i < b1) ? Split::Train : (i < b2) ? Split::Val : Split::Test;

  std::vector<PromptRecord> out = records;
  for (size_t i = 0; i < out.size(); ++i) out[i].split = assignment.at(group_of[i]);
  return out;
}

// CLI-facing names.
inline std::vector<PromptRecord> run_pipeline(const std::string& name,
                                              const std::vector<PromptRecord>& input,
                                              const PipelineConfig& config,
                                              std::vector<std::string>* warnings = nullptr) {
  if (name == "multi-slot") return multi_slot(input, config);
  if (name == "long-value") return long_values(config);
  if (name == "categorical") return categorical_confirm(input, config);
  if (name == "name-split") return name_split(input, config);
  if (name == "id-data") return id_injection(input, config);
  if (name == "address") return address_split(input, config, warnings);
  if (name == "relation") return relation_injection(input, config);
  throw Error(ErrorKind::Config, "unknown pipeline: " + name);
}

}  // namespace slotkit
