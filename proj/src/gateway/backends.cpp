#include <cstdlib>
#include <fstream>
#include <regex>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "wrangle/errors.hpp"
#include "wrangle/gateway.hpp"

namespace wrangle {

using nlohmann::json;

std::vector<ReplayRecord> load_replay_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read replay fixture '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed replay fixture '" + path.string() + "': " + e.what());
  }
  if (!doc.is_array()) throw ConfigError("replay fixture must be a JSON array");
  std::vector<ReplayRecord> records;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("response") || !item["response"].is_string()) {
      throw ConfigError("replay fixture record without a string 'response'");
    }
    ReplayRecord rec;
    rec.response = item["response"].get<std::string>();
    if (item.contains("digest") && !item["digest"].is_null()) {
      rec.digest = item["digest"].get<std::string>();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void save_replay_fixture(const std::vector<ReplayRecord>& records,
                         const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& r : records) {
    json item;
    if (r.digest) item["digest"] = *r.digest;
    item["response"] = r.response;
    doc.push_back(std::move(item));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write replay fixture '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

ReplayBackend::ReplayBackend(std::vector<ReplayRecord> records)
    : records_(std::move(records)), consumed_(records_.size(), false) {}

std::string ReplayBackend::complete(const CompletionRequest& /*request*/, const std::string& digest) {
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!consumed_[i] && records_[i].digest == digest) {
      consumed_[i] = true;
      return records_[i].response;
    }
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (!consumed_[i] && !records_[i].digest) {
      consumed_[i] = true;
      return records_[i].response;
    }
  }
  throw Error("replay fixture exhausted");
}

std::size_t ReplayBackend::remaining() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(std::count(consumed_.begin(), consumed_.end(), false));
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scripted rules '" + path.string() + "'");
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed scripted rules '" + path.string() + "': " + e.what());
  }
  auto backend = std::make_unique<ScriptedBackend>();
  if (doc.is_object()) {
    for (const auto& [pattern, response] : doc.items()) {
      if (!response.is_string()) throw ConfigError("scripted rule '" + pattern + "' is not a string");
      backend->add_rule(pattern, {response.get<std::string>()});
    }
    return backend;
  }
  if (!doc.is_array()) throw ConfigError("scripted rules must be a JSON object or array");
  for (const auto& rule : doc) {
    if (!rule.is_object() || !rule.contains("contains")) {
      throw ConfigError("scripted rule needs a 'contains' pattern");
    }
    std::vector<std::string> responses;
    if (rule.contains("responses")) {
      responses = rule["responses"].get<std::vector<std::string>>();
    } else if (rule.contains("response")) {
      responses.push_back(rule["response"].get<std::string>());
    }
    if (responses.empty()) throw ConfigError("scripted rule without a response");
    backend->add_rule(rule["contains"].get<std::string>(), std::move(responses));
  }
  return backend;
}

void ScriptedBackend::add_rule(std::string contains, std::vector<std::string> responses) {
  if (responses.empty()) throw ConfigError("scripted rule without a response");
  std::lock_guard lock(mutex_);
  rules_.push_back(Rule{std::move(contains), std::move(responses), 0});
}

void ScriptedBackend::add_responder(Responder responder) {
  std::lock_guard lock(mutex_);
  responders_.push_back(std::move(responder));
}

std::string ScriptedBackend::complete(const CompletionRequest& request, const std::string& /*digest*/) {
  std::lock_guard lock(mutex_);
  for (auto& rule : rules_) {
    if (request.prompt.find(rule.contains) == std::string::npos) continue;
    const std::size_t i = std::min(rule.served, rule.responses.size() - 1);
    ++rule.served;
    return rule.responses[i];
  }
  for (const auto& responder : responders_) {
    if (auto response = responder(request.prompt)) return *response;
  }
  throw Error("no scripted rule matches the prompt");
}

HttpBackend::HttpBackend(HttpSettings settings) : settings_(std::move(settings)) {
  if (settings_.endpoint.empty()) throw ConfigError("http backend: model.endpoint is not set");
  if (settings_.model.empty()) throw ConfigError("http backend: model.name is not set");
  if (settings_.credential_env.empty()) {
    throw ConfigError("http backend: model.credential_env is not set");
  }
  const char* credential = std::getenv(settings_.credential_env.c_str());
  if (credential == nullptr || *credential == '\0') {
    throw ConfigError("http backend: environment variable " + settings_.credential_env +
                      " is not set");
  }
  credential_ = credential;

  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(settings_.endpoint, m, url)) {
    throw ConfigError("http backend: malformed endpoint '" + settings_.endpoint + "'");
  }
  base_url_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
}

std::string HttpBackend::complete(const CompletionRequest& request, const std::string& /*digest*/) {
  httplib::Client client(base_url_);
  const auto timeout = static_cast<time_t>(settings_.timeout.count());
  client.set_connection_timeout(timeout, 0);
  client.set_read_timeout(timeout, 0);
  client.set_write_timeout(timeout, 0);

  const json body{{"model", settings_.model},
                  {"prompt", request.prompt},
                  {"max_tokens", request.max_output_tokens},
                  {"temperature", request.temperature}};
  const httplib::Headers headers{{"Authorization", "Bearer " + credential_}};
  auto result = client.Post(path_, headers, body.dump(), "application/json");
  if (!result) throw TransportError("http backend: " + httplib::to_string(result.error()));
  if (result->status == 429 || result->status >= 500) {
    throw TransportError("http backend: status " + std::to_string(result->status));
  }
  if (result->status != 200) {
    throw Error("http backend: status " + std::to_string(result->status) + ": " + result->body);
  }
  try {
    const auto doc = json::parse(result->body);
    return doc.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("http backend: malformed response: ") + e.what());
  }
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "http") return BackendKind::Http;
  if (text == "replay") return BackendKind::Replay;
  if (text == "scripted") return BackendKind::Scripted;
  throw ConfigError("unknown backend kind '" + std::string(text) + "' (http|replay|scripted)");
}

std::unique_ptr<Backend> configure_backend(BackendKind kind, const BackendSettings& settings) {
  switch (kind) {
    case BackendKind::Http:
      return std::make_unique<HttpBackend>(settings.http);
    case BackendKind::Replay:
      if (settings.fixture.empty()) throw ConfigError("replay backend needs a fixture path");
      return std::make_unique<ReplayBackend>(load_replay_fixture(settings.fixture));
    case BackendKind::Scripted:
      if (settings.rules.empty()) throw ConfigError("scripted backend needs a rules file");
      return ScriptedBackend::from_file(settings.rules);
  }
  throw ConfigError("unknown backend kind");
}

}  // namespace wrangle
