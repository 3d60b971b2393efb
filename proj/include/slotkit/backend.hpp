#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "slotkit/core.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/outparse.hpp"
#include "slotkit/text.hpp"

namespace slotkit {

struct CompletionRequest {
  std::string prompt;
  size_t max_new_tokens = 270;
  std::vector<std::string> stop_sequences;
  double temperature = 0.0;
};

struct Completion {
  std::string text;
  double latency_s = 0.0;
};

// Text-completion interface. Implementations only produce text; timing and
// stop-sequence truncation are handled here so every backend reports latency
// the same way. complete() must be safe to call concurrently.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;

  Completion complete(const CompletionRequest& req) {
    if (req.max_new_tokens < 1) throw Error(ErrorKind::Config, "max_new_tokens must be >= 1");
    auto t0 = std::chrono::steady_clock::now();
    std::string text = generate(req);
    auto t1 = std::chrono::steady_clock::now();
    size_t cut = std::string::npos;
    for (const auto& stop : req.stop_sequences) {
      if (stop.empty()) continue;
      size_t at = text.find(stop);
      if (at < cut) cut = at;
    }
    if (cut != std::string::npos) text.resize(cut);
    return {std::move(text), std::chrono::duration<double>(t1 - t0).count()};
  }

 protected:
  virtual std::string generate(const CompletionRequest& req) = 0;
};

// Adapts a plain function; handy in tests.
class FunctionBackend : public Backend {
 public:
  explicit FunctionBackend(std::function<std::string(const CompletionRequest&)> fn,
                           std::string name = "function")
      : fn_(std::move(fn)), name_(std::move(name)) {}
  std::string name() const override { return name_; }

 protected:
  std::string generate(const CompletionRequest& req) override { return fn_(req); }

 private:
  std::function<std::string(const CompletionRequest&)> fn_;
  std::string name_;
};

// Answers each prompt with a canned output, indexed by the exact prompt
// string. Closing the loop with gold outputs makes end-to-end tests exact.
class OracleBackend : public Backend {
 public:
  OracleBackend() = default;
  explicit OracleBackend(std::map<std::string, std::string> answers)
      : answers_(std::move(answers)) {}

  void add(std::string prompt, std::string output) {
    answers_[std::move(prompt)] = std::move(output);
  }
  size_t size() const { return answers_.size(); }
  std::string name() const override { return "oracle"; }

 protected:
  std::string generate(const CompletionRequest& req) override {
    auto it = answers_.find(req.prompt);
    if (it == answers_.end())
      throw Error(ErrorKind::Backend, "oracle has no answer for this prompt");
    return it->second;
  }

 private:
  std::map<std::string, std::string> answers_;
};

// Wraps another backend and deletes min(drop_k, n) of the generated slot
// pairs. The RNG is reseeded per call from (seed, prompt) so the corruption
// of a given prompt does not depend on call order.
class CorruptBackend : public Backend {
 public:
  CorruptBackend(std::shared_ptr<Backend> inner, size_t drop_k, std::uint64_t seed)
      : inner_(std::move(inner)), drop_k_(drop_k), seed_(seed) {}

  std::string name() const override { return "corrupt(" + inner_->name() + ")"; }

 protected:
  std::string generate(const CompletionRequest& req) override {
    std::string text = inner_->complete(req).text;
    if (drop_k_ == 0) return text;

    // Pairs in original order; std::map would reorder them.
    std::vector<std::pair<std::string, std::string>> pairs;
    size_t pos = 0;
    while (pos <= text.size()) {
      size_t eol = text.find('\n', pos);
      std::string_view line(text.data() + pos,
                            (eol == std::string::npos ? text.size() : eol) - pos);
      pos = (eol == std::string::npos) ? text.size() + 1 : eol + 1;
      if (auto kv = detail::parse_kv_line(line)) pairs.push_back(std::move(*kv));
    }
    if (pairs.empty()) return "";

    std::mt19937_64 rng(seed_ ^ text::fnv1a64(req.prompt));
    std::vector<size_t> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[rng() % (i + 1)]);

    std::vector<bool> dropped(pairs.size(), false);
    for (size_t i = 0; i < std::min(drop_k_, pairs.size()); ++i) dropped[order[i]] = true;

    auto escape = [](const std::string& s) {
      std::string out;
      for (char c : s) {
        out += c;
        if (c == '\'') out += '\'';
      }
      return out;
    };
    std::string out;
    bool first = true;
    for (size_t i = 0; i < pairs.size(); ++i) {
      if (dropped[i]) continue;
      if (!first) out += ",\n";
      first = false;
      out += '\'' + escape(pairs[i].first) + "': '" + escape(pairs[i].second) + '\'';
    }
    return out;
  }

 private:
  std::shared_ptr<Backend> inner_;
  size_t drop_k_;
  std::uint64_t seed_;
};

// Sleeps then answers with a fixed text; exercises the latency accounting.
class MockDelayBackend : public Backend {
 public:
  explicit MockDelayBackend(double delay_s, std::string text = "")
      : delay_s_(delay_s), text_(std::move(text)) {}
  std::string name() const override { return "mock_delay"; }

 protected:
  std::string generate(const CompletionRequest&) override {
    std::this_thread::sleep_for(std::chrono::duration<double>(delay_s_));
    return text_;
  }

 private:
  double delay_s_;
  std::string text_;
};

enum class BackendKind { Http, Oracle, Corrupt, MockDelay };

inline std::string_view backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::Http: return "http";
    case BackendKind::Oracle: return "oracle";
    case BackendKind::Corrupt: return "corrupt";
    case BackendKind::MockDelay: return "mock_delay";
  }
  return "unknown";
}

inline BackendKind backend_kind_from_name(std::string_view name) {
  if (name == "http") return BackendKind::Http;
  if (name == "oracle") return BackendKind::Oracle;
  if (name == "corrupt") return BackendKind::Corrupt;
  if (name == "mock_delay") return BackendKind::MockDelay;
  throw Error(ErrorKind::Config, "unknown backend kind: " + std::string(name));
}

// One HTTP client covers OpenAI-style, PaLM-style, and local servers: the
// request body is a JSON template plus dotted field paths telling us where
// to write the prompt and read the generation. Secrets come from the
// environment by variable name and are never stored or logged.
struct BackendConfig {
  BackendKind kind = BackendKind::Http;
  std::string endpoint;
  std::string auth_env;
  std::string auth_header = "Authorization";
  std::string auth_prefix = "Bearer ";
  double timeout_s = 30.0;
  int max_retries = 2;
  double backoff_s = 0.5;
  std::string request_template = "{}";
  std::string prompt_path = "prompt";
  std::string max_tokens_path = "max_tokens";
  std::string temperature_path;
  std::string stop_path;
  std::string response_path = "text";
  std::map<std::string, std::string> headers;

  std::string dataset;  // oracle / corrupt: JSONL file to index
  size_t drop_k = 1;    // corrupt
  std::uint64_t seed = 0;
  double delay_s = 0.05;  // mock_delay
  std::string mock_text;  // mock_delay canned answer
};

namespace detail {

struct RetryableError : Error {
  using Error::Error;
};

// Dotted path into JSON: "choices.0.text" walks object keys, and all-digit
// segments index arrays.
inline std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (pos <= path.size()) {
    size_t dot = path.find('.', pos);
    if (dot == std::string::npos) {
      out.push_back(path.substr(pos));
      break;
    }
    out.push_back(path.substr(pos, dot - pos));
    pos = dot + 1;
  }
  return out;
}

inline bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return true;
}

inline const nlohmann::json* get_json_path(const nlohmann::json& root, const std::string& path) {
  const nlohmann::json* cur = &root;
  for (const auto& seg : split_path(path)) {
    if (cur->is_array() && all_digits(seg)) {
      size_t idx = std::stoul(seg);
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else if (cur->is_object() && cur->contains(seg)) {
      cur = &(*cur)[seg];
    } else {
      return nullptr;
    }
  }
  return cur;
}

inline void set_json_path(nlohmann::json& root, const std::string& path,
                          nlohmann::json value) {
  nlohmann::json* cur = &root;
  auto segs = split_path(path);
  for (size_t i = 0; i < segs.size(); ++i) {
    bool last = (i + 1 == segs.size());
    const auto& seg = segs[i];
    if (all_digits(seg) && (cur->is_array() || cur->is_null())) {
      size_t idx = std::stoul(seg);
      if (cur->is_null()) *cur = nlohmann::json::array();
      while (cur->size() <= idx) cur->push_back(nullptr);
      if (last) {
        (*cur)[idx] = std::move(value);
        return;
      }
      cur = &(*cur)[idx];
    } else {
      if (cur->is_null()) *cur = nlohmann::json::object();
      if (!cur->is_object())
        throw Error(ErrorKind::Config, "field path collides with non-object: " + path);
      if (last) {
        (*cur)[seg] = std::move(value);
        return;
      }
      cur = &(*cur)[seg];
    }
  }
}

inline std::pair<std::string, std::string> split_url(const std::string& url) {
  size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorKind::Config, "endpoint must be a full http(s) URL: " + url);
  size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace detail

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(BackendConfig config) : cfg_(std::move(config)) {
    if (cfg_.endpoint.empty())
      throw Error(ErrorKind::Config, "http backend requires an endpoint");
    auto [base, path] = detail::split_url(cfg_.endpoint);
    base_ = base;
    path_ = path;
    if (base_.rfind("https://", 0) == 0)
      throw Error(ErrorKind::Config, "https endpoints are not supported in this build");
    template_ = nlohmann::json::parse(cfg_.request_template, nullptr, false);
    if (template_.is_discarded())
      throw Error(ErrorKind::Config, "request_template is not valid JSON");
  }

  std::string name() const override { return "http"; }

  // Every line emitted through the sink has the auth secret blanked first.
  void set_log_sink(std::function<void(const std::string&)> sink) {
    log_sink_ = std::move(sink);
  }

 protected:
  std::string generate(const CompletionRequest& req) override {
    std::string secret;
    if (!cfg_.auth_env.empty()) {
      const char* v = std::getenv(cfg_.auth_env.c_str());
      if (!v || !*v)
        throw Error(ErrorKind::AuthMissing,
                    "environment variable not set: " + cfg_.auth_env);
      secret = v;
    }

    nlohmann::json body = template_;
    detail::set_json_path(body, cfg_.prompt_path, req.prompt);
    if (!cfg_.max_tokens_path.empty())
      detail::set_json_path(body, cfg_.max_tokens_path, req.max_new_tokens);
    if (!cfg_.temperature_path.empty())
      detail::set_json_path(body, cfg_.temperature_path, req.temperature);
    if (!cfg_.stop_path.empty() && !req.stop_sequences.empty())
      detail::set_json_path(body, cfg_.stop_path, req.stop_sequences);
    const std::string payload = body.dump();

    // Only deterministic requests are retried; a sampled completion is not
    // idempotent.
    int attempts = 1 + (req.temperature == 0.0 ? std::max(cfg_.max_retries, 0) : 0);
    double backoff = cfg_.backoff_s;
    for (int attempt = 1;; ++attempt) {
      try {
        return attempt_once(payload, secret);
      } catch (const detail::RetryableError& e) {
        if (attempt >= attempts) throw Error(e.kind(), e.what());
        log(secret, std::string("retrying after error: ") + e.what());
        std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        backoff *= 2;
      }
    }
  }

 private:
  std::string attempt_once(const std::string& payload, const std::string& secret) {
    httplib::Client cli(base_);
    cli.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    cli.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    cli.set_write_timeout(std::chrono::duration<double>(cfg_.timeout_s));

    httplib::Headers headers;
    for (const auto& [k, v] : cfg_.headers) headers.emplace(k, v);
    if (!secret.empty()) headers.emplace(cfg_.auth_header, cfg_.auth_prefix + secret);

    auto res = cli.Post(path_, headers, payload, "application/json");
    if (!res) {
      auto err = res.error();
      std::string what = "http request failed: " + httplib::to_string(err);
      log(secret, what);
      bool timeout = err == httplib::Error::ConnectionTimeout ||
                     err == httplib::Error::Read || err == httplib::Error::Write;
      throw detail::RetryableError(timeout ? ErrorKind::Timeout : ErrorKind::Backend, what);
    }
    log(secret, "POST " + cfg_.endpoint + " -> " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300) {
      std::string excerpt = res->body.substr(0, 200);
      std::string what = "http status " + std::to_string(res->status) + ": " + excerpt;
      if (res->status == 429 || res->status >= 500)
        throw detail::RetryableError(ErrorKind::HttpStatus, scrub(what, secret));
      throw Error(ErrorKind::HttpStatus, scrub(what, secret));
    }

    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded())
      throw Error(ErrorKind::MalformedResponse, "response body is not JSON");
    const nlohmann::json* field = detail::get_json_path(j, cfg_.response_path);
    if (!field)
      throw Error(ErrorKind::MalformedResponse,
                  "response field path not found: " + cfg_.response_path);
    if (field->is_string()) return field->get<std::string>();
    throw Error(ErrorKind::MalformedResponse,
                "response field is not a string: " + cfg_.response_path);
  }

  static std::string scrub(std::string line, const std::string& secret) {
    if (secret.empty()) return line;
    size_t at;
    while ((at = line.find(secret)) != std::string::npos) line.replace(at, secret.size(), "***");
    return line;
  }

  void log(const std::string& secret, const std::string& line) {
    if (log_sink_) log_sink_(scrub(line, secret));
  }

  BackendConfig cfg_;
  std::string base_;
  std::string path_;
  nlohmann::json template_;
  std::function<void(const std::string&)> log_sink_;
};

}  // namespace slotkit
