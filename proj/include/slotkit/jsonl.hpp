#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "slotkit/core.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

// ordered_json keeps fields in insertion order, so a dataset written twice
// from the same records is byte-identical.
using ojson = nlohmann::ordered_json;

inline ojson library_to_json(const SlotLibrary& library) {
  ojson out = ojson::array();
  for (const auto& slot : library.slots) {
    ojson e;
    e["id"] = slot.id;
    e["description"] = slot.description;
    if (slot.allowed_values)
      e["allowed_values"] = *slot.allowed_values;
    else
      e["allowed_values"] = nullptr;
    if (!slot.name.empty()) e["name"] = slot.name;
    out.push_back(std::move(e));
  }
  return out;
}

// `where` prefixes error messages so callers get a usable field path
// ("library[2].id" rather than just "id").
inline SlotLibrary library_from_json(const ojson& j, const std::string& where = "library") {
  auto fail = [](const std::string& what) { return Error(ErrorKind::InvalidRecord, what); };
  if (!j.is_array()) throw fail(where + " must be an array");
  SlotLibrary library;
  for (size_t i = 0; i < j.size(); ++i) {
    const ojson& e = j[i];
    std::string at = where + "[" + std::to_string(i) + "]";
    if (!e.is_object()) throw fail(at + " must be an object");
    if (!e.contains("id") || !e["id"].is_string()) throw fail(at + ".id missing or not a string");
    if (!e.contains("description") || !e["description"].is_string())
      throw fail(at + ".description missing or not a string");
    SlotSpec slot;
    slot.id = e["id"].get<std::string>();
    slot.description = e["description"].get<std::string>();
    if (e.contains("allowed_values") && !e["allowed_values"].is_null()) {
      if (!e["allowed_values"].is_array())
        throw fail(at + ".allowed_values must be an array or null");
      std::vector<std::string> values;
      for (const auto& v : e["allowed_values"]) {
        if (!v.is_string()) throw fail(at + ".allowed_values entries must be strings");
        values.push_back(v.get<std::string>());
      }
      slot.allowed_values = std::move(values);
    }
    if (e.contains("name") && e["name"].is_string()) slot.name = e["name"].get<std::string>();
    library.slots.push_back(std::move(slot));
  }
  return library;
}

inline ojson conversation_to_json(const Conversation& conversation) {
  ojson out = ojson::array();
  for (const auto& turn : conversation.turns) {
    ojson t;
    t["role"] = std::string(role_name(turn.role));
    t["text"] = turn.text;
    out.push_back(std::move(t));
  }
  return out;
}

inline Conversation conversation_from_json(const ojson& j,
                                           const std::string& where = "conversation") {
  auto fail = [](const std::string& what) { return Error(ErrorKind::InvalidRecord, what); };
  if (!j.is_array()) throw fail(where + " must be an array");
  Conversation conversation;
  for (size_t i = 0; i < j.size(); ++i) {
    const ojson& t = j[i];
    std::string at = where + "[" + std::to_string(i) + "]";
    if (!t.is_object()) throw fail(at + " must be an object");
    if (!t.contains("role") || !t["role"].is_string())
      throw fail(at + ".role missing or not a string");
    if (!t.contains("text") || !t["text"].is_string())
      throw fail(at + ".text missing or not a string");
    auto role = role_from_name(t["role"].get<std::string>());
    if (!role) throw fail(at + ".role unknown: " + t["role"].get<std::string>());
    conversation.turns.push_back({*role, t["text"].get<std::string>()});
  }
  return conversation;
}

inline ojson record_to_json(const PromptRecord& r) {
  ojson j;
  j["prompt"] = r.prompt;
  j["output"] = r.gold_output;
  ojson state = ojson::object();
  for (const auto& [id, alts] : r.state) state[id] = alts;
  j["state"] = std::move(state);
  j["library"] = library_to_json(r.library);
  j["conversation"] = conversation_to_json(r.conversation);
  j["category"] = std::string(category_tag(r.category));
  j["split"] = std::string(split_tag(r.split));
  if (!r.dialogue_id.empty()) j["dialogue_id"] = r.dialogue_id;
  return j;
}

inline PromptRecord record_from_json(const ojson& j) {
  auto fail = [](const std::string& what) -> Error {
    return Error(ErrorKind::InvalidRecord, what);
  };
  if (!j.is_object()) throw fail("record is not a JSON object");
  for (const char* field : {"prompt", "output", "state", "library", "conversation",
                            "category", "split"}) {
    if (!j.contains(field)) throw fail(std::string("missing field: ") + field);
  }

  PromptRecord r;
  if (!j["prompt"].is_string() || !j["output"].is_string())
    throw fail("prompt and output must be strings");
  r.prompt = j["prompt"].get<std::string>();
  r.gold_output = j["output"].get<std::string>();

  if (!j["state"].is_object()) throw fail("state must be an object");
  for (const auto& [id, alts] : j["state"].items()) {
    if (alts.is_string()) {
      r.state[id] = {alts.get<std::string>()};
    } else if (alts.is_array()) {
      std::vector<std::string> values;
      for (const auto& v : alts) {
        if (!v.is_string()) throw fail("state values must be strings: " + id);
        values.push_back(v.get<std::string>());
      }
      r.state[id] = std::move(values);
    } else {
      throw fail("state values must be string arrays: " + id);
    }
  }

  r.library = library_from_json(j["library"]);
  r.conversation = conversation_from_json(j["conversation"]);

  auto category = category_from_tag(j["category"].get<std::string>());
  if (!category) throw fail("unknown category: " + j["category"].get<std::string>());
  r.category = *category;
  auto split = split_from_tag(j["split"].get<std::string>());
  if (!split) throw fail("unknown split: " + j["split"].get<std::string>());
  r.split = *split;
  if (j.contains("dialogue_id") && j["dialogue_id"].is_string())
    r.dialogue_id = j["dialogue_id"].get<std::string>();
  return r;
}

inline void write_jsonl(const std::vector<PromptRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot open for writing: " + path);
  for (const auto& r : records) {
    out << record_to_json(r).dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path);
}

inline std::vector<PromptRecord> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open for reading: " + path);
  std::vector<PromptRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    ojson j = ojson::parse(line, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorKind::MalformedLine,
                  path + ": line " + std::to_string(line_no) + ": not valid JSON");
    try {
      records.push_back(record_from_json(j));
    } catch (const Error& e) {
      throw Error(ErrorKind::MalformedLine,
                  path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace slotkit
