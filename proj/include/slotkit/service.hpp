#pragma once

#include <memory>
#include <string>
#include <utility>

#include <httplib.h>

#include "slotkit/backend.hpp"
#include "slotkit/config.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/extract.hpp"
#include "slotkit/jsonl.hpp"
#include "slotkit/session.hpp"

namespace slotkit {

namespace detail {

inline ojson warnings_to_json(const std::vector<ParseWarning>& warnings) {
  ojson out = ojson::array();
  for (const auto& w : warnings) {
    ojson e;
    e["where"] = w.where;
    e["reason"] = std::string(warning_reason_name(w.reason));
    out.push_back(std::move(e));
  }
  return out;
}

inline ojson state_to_json(const BeliefState& state) {
  ojson out = ojson::object();
  for (const auto& [id, value] : state.values) out[id] = value;
  return out;
}

}  // namespace detail

// JSON-over-HTTP front end. Stateless extraction plus CRUD'd sessions; all
// errors come back as {"error": {"kind", "message", "field"?}}.
class Service {
 public:
  Service(std::shared_ptr<Backend> backend, std::shared_ptr<SessionManager> sessions,
          BackendConfig config = {})
      : backend_(std::move(backend)), sessions_(std::move(sessions)), config_(std::move(config)) {
    install_routes();
  }

  httplib::Server& server() { return server_; }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any(const std::string& host) { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }

 private:
  static void send_error(httplib::Response& res, int status, std::string_view kind,
                         const std::string& message, const std::string& field = "") {
    ojson body;
    body["error"]["kind"] = std::string(kind);
    body["error"]["message"] = message;
    if (!field.empty()) body["error"]["field"] = field;
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_json(httplib::Response& res, const ojson& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // 404/502 get dedicated mappings; InvalidRecord outside body parsing means
  // the request was well-formed but semantically unusable (422).
  static void send_mapped(httplib::Response& res, const Error& e) {
    if (e.kind() == ErrorKind::SessionNotFound)
      send_error(res, 404, e.kind_name(), e.what());
    else if (is_backend_error(e.kind()))
      send_error(res, 502, e.kind_name(), e.what());
    else if (e.kind() == ErrorKind::InvalidRecord || e.kind() == ErrorKind::BudgetImpossible)
      send_error(res, 422, e.kind_name(), e.what());
    else
      send_error(res, 500, e.kind_name(), e.what());
  }

  static ojson parse_body(const httplib::Request& req) {
    ojson body = ojson::parse(req.body, nullptr, false);
    if (body.is_discarded()) throw Error(ErrorKind::MalformedJson, "request body is not valid JSON");
    if (!body.is_object()) throw Error(ErrorKind::MalformedJson, "request body must be a JSON object");
    return body;
  }

  void install_routes() {
    server_.Post("/v1/extract", [this](const httplib::Request& req, httplib::Response& res) {
      SlotLibrary library;
      Conversation conversation;
      try {
        ojson body = parse_body(req);
        if (!body.contains("library"))
          return send_error(res, 400, "MalformedJson", "missing field", "library");
        if (!body.contains("conversation"))
          return send_error(res, 400, "MalformedJson", "missing field", "conversation");
        library = library_from_json(body["library"]);
        conversation = conversation_from_json(body["conversation"]);
      } catch (const Error& e) {
        std::string field = std::string(e.what()).rfind("conversation", 0) == 0 ? "conversation"
                            : std::string(e.what()).rfind("library", 0) == 0  ? "library"
                                                                              : "";
        return send_error(res, 400, e.kind_name(), e.what(), field);
      }

      auto violations = validate_library(library);
      if (!violations.empty())
        return send_error(res, 422, "InvalidRecord",
                          violations.front().rule + " on slot \"" + violations.front().slot_id +
                              "\"",
                          "library");
      if (conversation.empty())
        return send_error(res, 400, "InvalidRecord", "conversation must be non-empty",
                          "conversation");
      if (library.empty())
        return send_error(res, 422, "InvalidRecord", "library must be non-empty", "library");

      try {
        ExtractResult result = extract(library, conversation, *backend_);
        ojson body;
        body["values"] = detail::state_to_json(result.outcome.state);
        body["warnings"] = detail::warnings_to_json(result.outcome.warnings);
        body["latency_s"] = result.latency_s;
        send_json(res, body);
      } catch (const Error& e) {
        send_mapped(res, e);
      }
    });

    server_.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      SlotLibrary library;
      UpdateMode mode = UpdateMode::Replace;
      try {
        ojson body = parse_body(req);
        if (!body.contains("library"))
          return send_error(res, 400, "MalformedJson", "missing field", "library");
        library = library_from_json(body["library"]);
        if (body.contains("mode")) {
          if (!body["mode"].is_string())
            return send_error(res, 400, "MalformedJson", "mode must be a string", "mode");
          auto m = update_mode_from_name(body["mode"].get<std::string>());
          if (!m)
            return send_error(res, 400, "MalformedJson",
                              "mode must be \"replace\" or \"merge\"", "mode");
          mode = *m;
        }
      } catch (const Error& e) {
        return send_error(res, 400, e.kind_name(), e.what(),
                          std::string(e.what()).rfind("library", 0) == 0 ? "library" : "");
      }

      auto violations = validate_library(library);
      if (!violations.empty())
        return send_error(res, 422, "InvalidRecord",
                          violations.front().rule + " on slot \"" + violations.front().slot_id +
                              "\"",
                          "library");
      if (library.empty())
        return send_error(res, 422, "InvalidRecord", "library must be non-empty", "library");

      try {
        Session session = sessions_->create(library, mode);
        ojson body;
        body["session_id"] = session.id;
        send_json(res, body, 201);
      } catch (const Error& e) {
        send_mapped(res, e);
      }
    });

    server_.Post(R"(/v1/sessions/([0-9a-zA-Z_\-]+)/turns)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   std::string id = req.matches[1];
                   std::string user_text, system_text;
                   try {
                     ojson body = parse_body(req);
                     if (!body.contains("user_text") || !body["user_text"].is_string())
                       return send_error(res, 400, "MalformedJson",
                                         "user_text missing or not a string", "user_text");
                     user_text = body["user_text"].get<std::string>();
                     if (body.contains("system_text")) {
                       if (!body["system_text"].is_string())
                         return send_error(res, 400, "MalformedJson",
                                           "system_text must be a string", "system_text");
                       system_text = body["system_text"].get<std::string>();
                     }
                   } catch (const Error& e) {
                     return send_error(res, 400, e.kind_name(), e.what());
                   }

                   try {
                     TurnResult turn = sessions_->track_turn(id, user_text, system_text);
                     ojson body;
                     body["session_id"] = id;
                     body["state"] = detail::state_to_json(turn.session.state);
                     ojson changed = ojson::object();
                     for (const auto& [slot, value] : turn.changed) changed[slot] = value;
                     body["changed"] = std::move(changed);
                     body["removed"] = turn.removed;
                     body["warnings"] = detail::warnings_to_json(turn.outcome.warnings);
                     body["latency_s"] = turn.latency_s;
                     send_json(res, body);
                   } catch (const Error& e) {
                     send_mapped(res, e);
                   }
                 });

    server_.Get(R"(/v1/sessions/([0-9a-zA-Z_\-]+)/state)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  try {
                    Session session = sessions_->get(req.matches[1]);
                    ojson body;
                    body["session_id"] = session.id;
                    body["state"] = detail::state_to_json(session.state);
                    body["mode"] = std::string(update_mode_name(session.mode));
                    body["turns"] = session.conversation.size();
                    body["updated_ms"] = session.updated_ms;
                    send_json(res, body);
                  } catch (const Error& e) {
                    send_mapped(res, e);
                  }
                });

    server_.Delete(R"(/v1/sessions/([0-9a-zA-Z_\-]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
                     try {
                       if (!sessions_->remove(req.matches[1]))
                         return send_error(res, 404, "SessionNotFound",
                                           "no such session: " + std::string(req.matches[1]));
                       ojson body;
                       body["deleted"] = true;
                       send_json(res, body);
                     } catch (const Error& e) {
                       send_mapped(res, e);
                     }
                   });

    server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      ojson body;
      // Only a configured remote endpoint is worth probing; an in-process
      // backend (or a default config wrapping one) is reachable by definition.
      if (config_.kind != BackendKind::Http || config_.endpoint.empty()) {
        body["status"] = "ok";
        return send_json(res, body);
      }
      // Remote backend: any HTTP response from the host counts as reachable.
      try {
        auto [host, path] = detail::split_url(config_.endpoint);
        (void)path;
        httplib::Client probe(host);
        probe.set_connection_timeout(2, 0);
        probe.set_read_timeout(2, 0);
        if (auto probe_res = probe.Get("/")) {
          body["status"] = "ok";
          return send_json(res, body);
        }
      } catch (const std::exception&) {
      }
      body["status"] = "unreachable";
      send_json(res, body, 503);
    });
  }

  httplib::Server server_;
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<SessionManager> sessions_;
  BackendConfig config_;
};

}  // namespace slotkit
