#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "slotkit/core.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/extract.hpp"
#include "slotkit/jsonl.hpp"

namespace slotkit {

struct Session {
  std::string id;
  SlotLibrary library;
  Conversation conversation;
  BeliefState state;
  UpdateMode mode = UpdateMode::Replace;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
};

inline ojson session_to_json(const Session& s) {
  ojson j;
  j["id"] = s.id;
  j["mode"] = std::string(update_mode_name(s.mode));
  j["created_ms"] = s.created_ms;
  j["updated_ms"] = s.updated_ms;
  j["library"] = library_to_json(s.library);
  j["conversation"] = conversation_to_json(s.conversation);
  ojson state = ojson::object();
  for (const auto& [id, value] : s.state.values) state[id] = value;
  j["state"] = std::move(state);
  return j;
}

inline Session session_from_json(const ojson& j) {
  auto fail = [](const std::string& what) { return Error(ErrorKind::InvalidRecord, what); };
  if (!j.is_object()) throw fail("session is not a JSON object");
  for (const char* field : {"id", "mode", "library", "conversation", "state"})
    if (!j.contains(field)) throw fail(std::string("missing field: ") + field);

  Session s;
  s.id = j["id"].get<std::string>();
  auto mode = update_mode_from_name(j["mode"].get<std::string>());
  if (!mode) throw fail("unknown mode: " + j["mode"].get<std::string>());
  s.mode = *mode;
  s.created_ms = j.value("created_ms", std::int64_t(0));
  s.updated_ms = j.value("updated_ms", std::int64_t(0));
  s.library = library_from_json(j["library"]);
  s.conversation = conversation_from_json(j["conversation"]);
  if (!j["state"].is_object()) throw fail("state must be an object");
  for (const auto& [id, value] : j["state"].items()) {
    if (!value.is_string()) throw fail("state values must be strings: " + id);
    s.state.values[id] = value.get<std::string>();
  }
  return s;
}

class SessionStore {
 public:
  virtual ~SessionStore() = default;
  virtual void put(const Session& session) = 0;
  virtual std::optional<Session> get(const std::string& id) = 0;
  virtual bool remove(const std::string& id) = 0;
  virtual std::vector<std::string> ids() = 0;
};

class MemoryStore : public SessionStore {
 public:
  void put(const Session& session) override {
    std::lock_guard<std::mutex> lock(mutex_);
    sessions_[session.id] = session;
  }

  std::optional<Session> get(const std::string& id) override {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return std::nullopt;
    return it->second;
  }

  bool remove(const std::string& id) override {
    std::lock_guard<std::mutex> lock(mutex_);
    return sessions_.erase(id) > 0;
  }

  std::vector<std::string> ids() override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
  }

 private:
  std::mutex mutex_;
  std::map<std::string, Session> sessions_;
};

// One JSON file per session under `directory`; writes go through a temp file
// and rename so a crash mid-write never corrupts an existing session.
class FileStore : public SessionStore {
 public:
  explicit FileStore(std::string directory) : directory_(std::move(directory)) {
    std::error_code ec;
    std::filesystem::create_directories(directory_, ec);
    if (ec && !std::filesystem::is_directory(directory_))
      throw Error(ErrorKind::Io, "cannot create session store directory: " + directory_);
  }

  void put(const Session& session) override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::filesystem::path final_path = path_for(session.id);
    std::filesystem::path tmp_path = final_path;
    tmp_path += ".tmp";
    {
      std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
      if (!out) throw Error(ErrorKind::Io, "cannot write session file: " + tmp_path.string());
      out << session_to_json(session).dump(2) << '\n';
      if (!out.good()) throw Error(ErrorKind::Io, "write failed: " + tmp_path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp_path, final_path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot finalize session file: " + ec.message());
  }

  std::optional<Session> get(const std::string& id) override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::ifstream in(path_for(id), std::ios::binary);
    if (!in) return std::nullopt;
    ojson j = ojson::parse(in, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorKind::Io, "corrupt session file for " + id);
    return session_from_json(j);
  }

  bool remove(const std::string& id) override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::error_code ec;
    return std::filesystem::remove(path_for(id), ec) && !ec;
  }

  std::vector<std::string> ids() override {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::string> out;
    for (const auto& entry : std::filesystem::directory_iterator(directory_)) {
      if (entry.path().extension() == ".json") out.push_back(entry.path().stem().string());
    }
    return out;
  }

 private:
  std::filesystem::path path_for(const std::string& id) const {
    // Ids are generated hex, but guard against hostile input anyway.
    for (char c : id) {
      bool ok = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                c == '-' || c == '_';
      if (!ok) throw Error(ErrorKind::SessionNotFound, "invalid session id: " + id);
    }
    return std::filesystem::path(directory_) / (id + ".json");
  }

  std::string directory_;
  std::mutex mutex_;
};

struct TurnResult {
  Session session;  // post-turn snapshot
  ParseOutcome outcome;
  // Slots added or changed this turn, and ids that disappeared (possible
  // under REPLACE when the model stops emitting a slot).
  std::map<std::string, std::string> changed;
  std::vector<std::string> removed;
  double latency_s = 0.0;
  size_t dropped_turns = 0;
};

class SessionManager {
 public:
  SessionManager(std::shared_ptr<Backend> backend, std::shared_ptr<SessionStore> store,
                 TokenBudget budget = {}, TokenCounter counter = whitespace_counter())
      : backend_(std::move(backend)),
        store_(std::move(store)),
        budget_(budget),
        counter_(std::move(counter)),
        rng_(std::random_device{}()) {}

  Session create(const SlotLibrary& library, UpdateMode mode = UpdateMode::Replace) {
    auto violations = validate_library(library);
    if (!violations.empty())
      throw Error(ErrorKind::InvalidRecord, "library: " + violations.front().rule + " on slot \"" +
                                                violations.front().slot_id + "\"");
    Session s;
    s.id = fresh_id();
    s.library = library;
    s.mode = mode;
    s.created_ms = s.updated_ms = now_ms();
    store_->put(s);
    return s;
  }

  Session get(const std::string& id) {
    auto s = store_->get(id);
    if (!s) throw Error(ErrorKind::SessionNotFound, "no such session: " + id);
    return *s;
  }

  bool remove(const std::string& id) {
    std::lock_guard<std::mutex> lock(session_mutex(id));
    return store_->remove(id);
  }

  std::vector<std::string> ids() { return store_->ids(); }

  // Appends the optional system turn then the user turn, re-extracts over
  // the whole history, folds the result into the belief state, and persists.
  // Any failure (backend, store) leaves the stored session untouched.
  TurnResult track_turn(const std::string& id, const std::string& user_text,
                        const std::string& system_text = "") {
    std::lock_guard<std::mutex> lock(session_mutex(id));
    Session session = get(id);

    Conversation next = session.conversation;
    if (!system_text.empty()) next.turns.push_back(system_turn(system_text));
    next.turns.push_back(user_turn(user_text));

    ExtractResult extracted =
        extract(session.library, next, *backend_, budget_, counter_);
    BeliefState before = session.state;
    session.state = belief_update(session.state, extracted.outcome.state, session.mode,
                                  &session.library);
    session.conversation = std::move(next);
    session.updated_ms = now_ms();
    store_->put(session);

    TurnResult result;
    result.outcome = std::move(extracted.outcome);
    result.latency_s = extracted.latency_s;
    result.dropped_turns = extracted.dropped_turns;
    for (const auto& [slot, value] : session.state.values) {
      const std::string* old = before.get(slot);
      if (!old || *old != value) result.changed[slot] = value;
    }
    for (const auto& [slot, _] : before.values)
      if (!session.state.has(slot)) result.removed.push_back(slot);
    result.session = std::move(session);
    return result;
  }

 private:
  static std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  }

  std::string fresh_id() {
    std::lock_guard<std::mutex> lock(manager_mutex_);
    static const char* hex = "0123456789abcdef";
    std::string id(16, '0');
    for (char& c : id) c = hex[rng_() % 16];
    return id;
  }

  std::mutex& session_mutex(const std::string& id) {
    std::lock_guard<std::mutex> lock(manager_mutex_);
    auto& slot = mutexes_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<SessionStore> store_;
  TokenBudget budget_;
  TokenCounter counter_;
  std::mutex manager_mutex_;
  std::map<std::string, std::unique_ptr<std::mutex>> mutexes_;
  std::mt19937_64 rng_;
};

}  // namespace slotkit
