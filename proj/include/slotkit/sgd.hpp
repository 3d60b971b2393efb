#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "slotkit/core.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/jsonl.hpp"
#include "slotkit/promptgen.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

struct SgdSlot {
  std::string name;
  std::string description;
  bool is_categorical = false;
  std::vector<std::string> possible_values;
};

struct SgdSchema {
  std::string service_name;
  std::vector<SgdSlot> slots;
};

struct SgdFrame {
  std::string service;
  std::map<std::string, std::vector<std::string>> slot_values;
};

struct SgdTurn {
  Role speaker = Role::User;
  std::string utterance;
  std::vector<SgdFrame> frames;
};

struct SgdDialogue {
  std::string dialogue_id;
  std::vector<std::string> services;
  std::vector<SgdTurn> turns;
};

struct SgdCorpus {
  std::vector<SgdSchema> schemas;
  std::vector<SgdDialogue> dialogues;
};

namespace detail {

inline nlohmann::json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedJson, path + ": " + e.what());
  }
}

}  // namespace detail

// Reads the public SGD layout: one schema.json plus dialogues_*.json files.
// Dialogue files are processed in name order so the record order is stable.
inline SgdCorpus load_sgd(const std::string& directory) {
  namespace fs = std::filesystem;
  fs::path dir(directory);
  if (!fs::is_directory(dir))
    throw Error(ErrorKind::Io, "not a directory: " + directory);
  fs::path schema_path = dir / "schema.json";
  if (!fs::exists(schema_path))
    throw Error(ErrorKind::MissingSchema, "no schema.json in " + directory);

  SgdCorpus corpus;
  nlohmann::json schema_json = detail::parse_json_file(schema_path.string());
  if (!schema_json.is_array())
    throw Error(ErrorKind::MalformedJson, schema_path.string() + ": expected an array");
  std::set<std::string> known_services;
  for (const auto& s : schema_json) {
    SgdSchema schema;
    schema.service_name = s.at("service_name").get<std::string>();
    for (const auto& slot : s.value("slots", nlohmann::json::array())) {
      SgdSlot out;
      out.name = slot.at("name").get<std::string>();
      out.description = slot.value("description", std::string());
      out.is_categorical = slot.value("is_categorical", false);
      for (const auto& v : slot.value("possible_values", nlohmann::json::array()))
        out.possible_values.push_back(v.get<std::string>());
      schema.slots.push_back(std::move(out));
    }
    known_services.insert(schema.service_name);
    corpus.schemas.push_back(std::move(schema));
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("dialogues_", 0) == 0 && name.size() > 5 &&
        name.substr(name.size() - 5) == ".json")
      files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  for (const auto& file : files) {
    nlohmann::json dialogues_json = detail::parse_json_file(file.string());
    if (!dialogues_json.is_array())
      throw Error(ErrorKind::MalformedJson, file.string() + ": expected an array");
    size_t index = 0;
    for (const auto& d : dialogues_json) {
      SgdDialogue dialogue;
      try {
        dialogue.dialogue_id = d.at("dialogue_id").get<std::string>();
        for (const auto& s : d.at("services")) dialogue.services.push_back(s.get<std::string>());
        for (const auto& t : d.at("turns")) {
          SgdTurn turn;
          auto role = role_from_name(t.at("speaker").get<std::string>());
          if (!role) throw Error(ErrorKind::MalformedJson,
                                 "unknown speaker: " + t.at("speaker").get<std::string>());
          turn.speaker = *role;
          turn.utterance = t.at("utterance").get<std::string>();
          for (const auto& f : t.value("frames", nlohmann::json::array())) {
            SgdFrame frame;
            frame.service = f.at("service").get<std::string>();
            if (f.contains("state") && f["state"].contains("slot_values")) {
              for (const auto& [name, values] : f["state"]["slot_values"].items()) {
                std::vector<std::string> alts;
                for (const auto& v : values) alts.push_back(v.get<std::string>());
                frame.slot_values[name] = std::move(alts);
              }
            }
            turn.frames.push_back(std::move(frame));
          }
          dialogue.turns.push_back(std::move(turn));
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedJson,
                    file.string() + ": dialogue " + std::to_string(index) + ": " + e.what());
      }
      for (const auto& service : dialogue.services) {
        if (!known_services.count(service))
          throw Error(ErrorKind::UnknownService,
                      "dialogue " + dialogue.dialogue_id + " references unknown service " +
                          service);
      }
      for (const auto& turn : dialogue.turns) {
        for (const auto& frame : turn.frames) {
          if (!known_services.count(frame.service))
            throw Error(ErrorKind::UnknownService,
                        "dialogue " + dialogue.dialogue_id + " frame references unknown service " +
                            frame.service);
        }
      }
      corpus.dialogues.push_back(std::move(dialogue));
      ++index;
    }
  }
  return corpus;
}

// Maps dataset slot names to fresh numeric ids. Keys are "<service>/<slot>".
class IdAssigner {
 public:
  virtual ~IdAssigner() = default;
  virtual std::map<std::string, int> assign(const std::vector<std::string>& keys) = 0;
};

class RandomIdAssigner : public IdAssigner {
 public:
  explicit RandomIdAssigner(std::uint64_t seed, int id_space = 1000)
      : seed_(seed), id_space_(id_space) {}

  std::map<std::string, int> assign(const std::vector<std::string>& keys) override {
    if (keys.size() > size_t(id_space_))
      throw Error(ErrorKind::IdSpaceExhausted,
                  std::to_string(keys.size()) + " slots but only " + std::to_string(id_space_) +
                      " ids");
    std::vector<int> pool(id_space_);
    for (int i = 0; i < id_space_; ++i) pool[i] = i;
    std::mt19937_64 rng(seed_);
    // Partial Fisher-Yates: the first keys.size() entries become the draw.
    for (size_t i = 0; i < keys.size(); ++i) {
      size_t j = i + size_t(rng() % std::uint64_t(id_space_ - int(i)));
      std::swap(pool[i], pool[j]);
    }
    std::map<std::string, int> out;
    for (size_t i = 0; i < keys.size(); ++i) out[keys[i]] = pool[i];
    return out;
  }

 private:
  std::uint64_t seed_;
  int id_space_;
};

// Pinned assignment for reproducing published examples in tests.
class FixedIdAssigner : public IdAssigner {
 public:
  explicit FixedIdAssigner(std::map<std::string, int> ids) : ids_(std::move(ids)) {}

  std::map<std::string, int> assign(const std::vector<std::string>& keys) override {
    std::map<std::string, int> out;
    std::set<int> used;
    for (const auto& key : keys) {
      auto it = ids_.find(key);
      if (it == ids_.end())
        throw Error(ErrorKind::Config, "no fixed id for slot: " + key);
      if (!used.insert(it->second).second)
        throw Error(ErrorKind::Config, "fixed id used twice: " + std::to_string(it->second));
      out[key] = it->second;
    }
    return out;
  }

 private:
  std::map<std::string, int> ids_;
};

struct SlotOrigin {
  std::string service;
  std::string slot;

  friend bool operator==(const SlotOrigin&, const SlotOrigin&) = default;
};

struct IngestFlag {
  std::string dialogue_id;
  size_t turn_index = 0;
  std::string slot_id;  // empty for record-level flags
  std::string reason;   // value_not_substring | value_not_allowed | output_over_budget | prompt_over_budget
};

struct IngestOptions {
  TokenBudget budget{};
  TokenCounter counter = whitespace_counter();
};

struct IngestResult {
  std::vector<PromptRecord> records;
  std::map<std::string, SlotOrigin> slot_map;  // Slot-<n> -> origin
  std::vector<IngestFlag> flags;
};

// One record per user turn: the conversation so far plus the cumulative
// dialogue state. Values that violate the substring/allowed constraints in
// the raw corpus are flagged, never dropped.
inline IngestResult to_records(const std::vector<SgdDialogue>& dialogues,
                               const std::vector<SgdSchema>& schemas, IdAssigner& assigner,
                               const IngestOptions& options = {}) {
  std::vector<std::string> keys;
  for (const auto& schema : schemas)
    for (const auto& slot : schema.slots) keys.push_back(schema.service_name + "/" + slot.name);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::map<std::string, int> ids = assigner.assign(keys);

  IngestResult result;
  for (const auto& key : keys) {
    size_t cut = key.find('/');
    result.slot_map[make_slot_id(ids.at(key))] =
        SlotOrigin{key.substr(0, cut), key.substr(cut + 1)};
  }

  for (const auto& dialogue : dialogues) {
    SlotLibrary library;
    for (const auto& schema : schemas) {
      if (std::find(dialogue.services.begin(), dialogue.services.end(), schema.service_name) ==
          dialogue.services.end())
        continue;
      for (const auto& slot : schema.slots) {
        SlotSpec spec;
        spec.id = make_slot_id(ids.at(schema.service_name + "/" + slot.name));
        spec.name = slot.name;
        spec.description = slot.description;
        if (slot.is_categorical) spec.allowed_values = slot.possible_values;
        library.slots.push_back(std::move(spec));
      }
    }

    Conversation conversation;
    // (service, slot name) -> alternatives; a frame replaces its service's part.
    std::map<std::string, std::map<std::string, std::vector<std::string>>> running;
    for (size_t t = 0; t < dialogue.turns.size(); ++t) {
      const SgdTurn& turn = dialogue.turns[t];
      conversation.turns.push_back({turn.speaker, turn.utterance});
      if (turn.speaker != Role::User) continue;

      for (const auto& frame : turn.frames) {
        if (frame.slot_values.empty() && !running.count(frame.service)) continue;
        running[frame.service] = frame.slot_values;
      }

      PromptRecord record;
      record.library = library;
      record.conversation = conversation;
      record.category = Category::Sgd;
      record.dialogue_id = dialogue.dialogue_id;
      for (const auto& [service, values] : running)
        for (const auto& [name, alts] : values)
          record.state[make_slot_id(ids.at(service + "/" + name))] = alts;

      const std::string joined = conversation.joined_text();
      for (const auto& [id, alts] : record.state) {
        if (alts.empty()) continue;
        const SlotSpec* spec = library.find(id);
        if (!spec) continue;
        if (spec->allowed_values) {
          if (std::find(spec->allowed_values->begin(), spec->allowed_values->end(), alts.front()) ==
              spec->allowed_values->end())
            result.flags.push_back({dialogue.dialogue_id, t, id, "value_not_allowed"});
        } else if (joined.find(alts.front()) == std::string::npos) {
          result.flags.push_back({dialogue.dialogue_id, t, id, "value_not_substring"});
        }
      }

      try {
        record.prompt =
            render_prompt(library, conversation, options.budget, options.counter).prompt;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::BudgetImpossible) throw;
        result.flags.push_back({dialogue.dialogue_id, t, "", "prompt_over_budget"});
        continue;
      }
      record.gold_output = render_output(record.gold_state(), library, /*validate=*/false);
      if (options.counter.count(record.gold_output) > options.budget.max_output_tokens)
        result.flags.push_back({dialogue.dialogue_id, t, "", "output_over_budget"});
      result.records.push_back(std::move(record));
    }
  }
  return result;
}

inline IngestResult ingest_sgd(const std::string& directory, std::uint64_t seed,
                               const IngestOptions& options = {}) {
  SgdCorpus corpus = load_sgd(directory);
  RandomIdAssigner assigner(seed);
  return to_records(corpus.dialogues, corpus.schemas, assigner, options);
}

inline void write_slot_map(const std::map<std::string, SlotOrigin>& slot_map,
                           const std::string& path) {
  ojson j = ojson::object();
  // Numeric order reads better than lexicographic "Slot-10" < "Slot-2".
  std::vector<std::pair<int, const std::string*>> order;
  for (const auto& [id, origin] : slot_map) {
    (void)origin;
    order.emplace_back(std::stoi(id.substr(5)), &id);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [n, id] : order) {
    (void)n;
    const SlotOrigin& origin = slot_map.at(*id);
    j[*id] = {{"service", origin.service}, {"slot", origin.slot}};
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

}  // namespace slotkit
