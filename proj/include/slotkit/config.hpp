#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "slotkit/backend.hpp"
#include "slotkit/errors.hpp"
#include "slotkit/jsonl.hpp"
#include "slotkit/text.hpp"

namespace slotkit {
namespace detail {

using ConfigValue = std::variant<std::string, long long, double, bool>;

// The subset of TOML we accept: [section] / [section.sub] headers, `key =
// value` with basic strings, integers, floats and booleans, and # comments.
// That covers every shipped preset; anything fancier should move to JSON.
inline std::map<std::string, ConfigValue> parse_toml_subset(const std::string& content,
                                                            const std::string& origin) {
  std::map<std::string, ConfigValue> out;
  std::istringstream in(content);
  std::string line, section;
  size_t lineno = 0;

  auto fail = [&](const std::string& message) -> Error {
    return Error(ErrorKind::Config,
                 origin + ": line " + std::to_string(lineno) + ": " + message);
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = text::trim(line);
    if (s.empty() || s.front() == '#') continue;

    if (s.front() == '[') {
      if (s.back() != ']') throw fail("unterminated section header");
      section = std::string(text::trim(s.substr(1, s.size() - 2)));
      if (section.empty()) throw fail("empty section name");
      continue;
    }

    size_t eq = s.find('=');
    if (eq == std::string_view::npos) throw fail("expected key = value");
    std::string key = std::string(text::trim(s.substr(0, eq)));
    std::string_view raw = text::trim(s.substr(eq + 1));
    if (key.empty()) throw fail("empty key");
    if (raw.empty()) throw fail("missing value for " + key);

    std::string full_key = section.empty() ? key : section + "." + key;
    if (raw.front() == '"') {
      std::string value;
      bool closed = false;
      size_t i = 1;
      for (; i < raw.size(); ++i) {
        char c = raw[i];
        if (c == '\\') {
          if (i + 1 >= raw.size()) throw fail("dangling escape");
          char e = raw[++i];
          switch (e) {
            case 'n': value += '\n'; break;
            case 't': value += '\t'; break;
            case 'r': value += '\r'; break;
            case '"': value += '"'; break;
            case '\\': value += '\\'; break;
            default: throw fail(std::string("unsupported escape \\") + e);
          }
        } else if (c == '"') {
          closed = true;
          ++i;
          break;
        } else {
          value += c;
        }
      }
      if (!closed) throw fail("unterminated string");
      std::string_view rest = text::trim(raw.substr(i));
      if (!rest.empty() && rest.front() != '#') throw fail("trailing characters after string");
      out[full_key] = value;
    } else {
      // Strip a trailing comment from non-string values.
      size_t hash = raw.find('#');
      std::string token = std::string(text::trim(raw.substr(0, hash)));
      if (token == "true" || token == "false") {
        out[full_key] = (token == "true");
      } else {
        bool floaty = token.find('.') != std::string::npos ||
                      token.find('e') != std::string::npos ||
                      token.find('E') != std::string::npos;
        try {
          size_t used = 0;
          if (floaty) {
            double v = std::stod(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            out[full_key] = v;
          } else {
            long long v = std::stoll(token, &used);
            if (used != token.size()) throw std::invalid_argument(token);
            out[full_key] = v;
          }
        } catch (const std::exception&) {
          throw fail("cannot parse value for " + key + ": " + token);
        }
      }
    }
  }
  return out;
}

// Flattens the `backend` object (or a flat object) of a JSON config file
// into the same key space the TOML parser produces.
inline std::map<std::string, ConfigValue> flatten_json_config(const nlohmann::json& root,
                                                              const std::string& origin) {
  if (!root.is_object()) throw Error(ErrorKind::Config, origin + ": top level must be an object");
  std::map<std::string, ConfigValue> out;
  auto add = [&](const std::string& key, const nlohmann::json& v) {
    if (v.is_string())
      out[key] = v.get<std::string>();
    else if (v.is_boolean())
      out[key] = v.get<bool>();
    else if (v.is_number_integer() || v.is_number_unsigned())
      out[key] = v.get<long long>();
    else if (v.is_number_float())
      out[key] = v.get<double>();
    else
      throw Error(ErrorKind::Config, origin + ": unsupported value type for " + key);
  };
  for (const auto& [key, value] : root.items()) {
    if (value.is_object()) {
      for (const auto& [k2, v2] : value.items()) {
        if (v2.is_object()) {
          for (const auto& [k3, v3] : v2.items()) add(key + "." + k2 + "." + k3, v3);
        } else {
          add(key + "." + k2, v2);
        }
      }
    } else {
      add(key, value);
    }
  }
  return out;
}

inline std::string config_string(const ConfigValue& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw Error(ErrorKind::Config, "expected string for " + key);
}

inline double config_number(const ConfigValue& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<long long>(&v)) return double(*i);
  throw Error(ErrorKind::Config, "expected number for " + key);
}

inline long long config_integer(const ConfigValue& v, const std::string& key) {
  if (const auto* i = std::get_if<long long>(&v)) return *i;
  throw Error(ErrorKind::Config, "expected integer for " + key);
}

}  // namespace detail

inline BackendConfig backend_config_from_values(
    const std::map<std::string, detail::ConfigValue>& values) {
  BackendConfig config;
  for (const auto& [full_key, value] : values) {
    // Accept both `[backend]`-section keys and flat files.
    std::string key = full_key;
    if (key.rfind("backend.", 0) == 0) key = key.substr(8);
    else if (key.find('.') != std::string::npos)
      continue;  // some other section; not ours

    if (key.rfind("headers.", 0) == 0) {
      config.headers[key.substr(8)] = detail::config_string(value, full_key);
    } else if (key == "kind") {
      config.kind = backend_kind_from_name(detail::config_string(value, full_key));
    } else if (key == "endpoint") {
      config.endpoint = detail::config_string(value, full_key);
    } else if (key == "auth_env") {
      config.auth_env = detail::config_string(value, full_key);
    } else if (key == "auth_header") {
      config.auth_header = detail::config_string(value, full_key);
    } else if (key == "auth_prefix") {
      config.auth_prefix = detail::config_string(value, full_key);
    } else if (key == "timeout_s") {
      config.timeout_s = detail::config_number(value, full_key);
    } else if (key == "max_retries") {
      config.max_retries = int(detail::config_integer(value, full_key));
    } else if (key == "backoff_s") {
      config.backoff_s = detail::config_number(value, full_key);
    } else if (key == "request_template") {
      config.request_template = detail::config_string(value, full_key);
    } else if (key == "prompt_path") {
      config.prompt_path = detail::config_string(value, full_key);
    } else if (key == "max_tokens_path") {
      config.max_tokens_path = detail::config_string(value, full_key);
    } else if (key == "temperature_path") {
      config.temperature_path = detail::config_string(value, full_key);
    } else if (key == "stop_path") {
      config.stop_path = detail::config_string(value, full_key);
    } else if (key == "response_path") {
      config.response_path = detail::config_string(value, full_key);
    } else if (key == "dataset") {
      config.dataset = detail::config_string(value, full_key);
    } else if (key == "drop_k") {
      config.drop_k = size_t(detail::config_integer(value, full_key));
    } else if (key == "seed") {
      config.seed = std::uint64_t(detail::config_integer(value, full_key));
    } else if (key == "delay_s") {
      config.delay_s = detail::config_number(value, full_key);
    } else if (key == "mock_text") {
      config.mock_text = detail::config_string(value, full_key);
    } else {
      throw Error(ErrorKind::Config, "unknown backend config key: " + full_key);
    }
  }
  return config;
}

inline BackendConfig backend_config_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open config: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string content = buffer.str();

  std::map<std::string, detail::ConfigValue> values;
  std::filesystem::path p(path);
  if (p.extension() == ".json") {
    nlohmann::json root = nlohmann::json::parse(content, nullptr, false);
    if (root.is_discarded()) throw Error(ErrorKind::Config, path + ": invalid JSON");
    values = detail::flatten_json_config(root, path);
  } else {
    values = detail::parse_toml_subset(content, path);
  }
  BackendConfig config = backend_config_from_values(values);

  // Dataset paths in a config file are relative to the file, so presets can
  // sit next to the data they reference.
  if (!config.dataset.empty()) {
    std::filesystem::path d(config.dataset);
    if (d.is_relative()) config.dataset = (p.parent_path() / d).string();
  }
  return config;
}

inline std::shared_ptr<Backend> make_backend(const BackendConfig& config) {
  switch (config.kind) {
    case BackendKind::Http:
      return std::make_shared<HttpBackend>(config);
    case BackendKind::MockDelay:
      return std::make_shared<MockDelayBackend>(config.delay_s, config.mock_text);
    case BackendKind::Oracle:
    case BackendKind::Corrupt: {
      if (config.dataset.empty())
        throw Error(ErrorKind::Config, "oracle/corrupt backend needs a dataset");
      auto oracle = std::make_shared<OracleBackend>();
      for (const PromptRecord& record : read_jsonl(config.dataset))
        oracle->add(record.prompt, record.gold_output);
      if (config.kind == BackendKind::Oracle) return oracle;
      return std::make_shared<CorruptBackend>(oracle, config.drop_k, config.seed);
    }
  }
  throw Error(ErrorKind::Config, "unhandled backend kind");
}

}  // namespace slotkit
