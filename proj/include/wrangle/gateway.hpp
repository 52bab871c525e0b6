#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace wrangle {

struct CompletionRequest {
  std::string prompt;
  int max_output_tokens = 1024;
  double temperature = 0.2;
  std::string tag;  // fold/iteration/method, for audit
};

/// Hex SHA-256 of the prompt text.
std::string request_digest(std::string_view prompt);
std::string sha256_hex(std::string_view data);

/// A completion provider. Implementations throw TransportError for failures
/// worth retrying and any other wrangle::Error for permanent ones.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const CompletionRequest& request, const std::string& digest) = 0;
  virtual std::string_view kind() const = 0;
};

struct ReplayRecord {
  std::optional<std::string> digest;
  std::string response;
};

std::vector<ReplayRecord> load_replay_fixture(const std::filesystem::path& path);
void save_replay_fixture(const std::vector<ReplayRecord>& records, const std::filesystem::path& path);

/// Serves recorded responses. A record whose digest matches the request is
/// preferred; otherwise the next undigested record in order is served.
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::vector<ReplayRecord> records);
  std::string complete(const CompletionRequest& request, const std::string& digest) override;
  std::string_view kind() const override { return "replay"; }
  std::size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  std::vector<ReplayRecord> records_;
  std::vector<bool> consumed_;
};

/// Canned responses chosen by prompt substring. Rules are tried in order; a
/// rule with several responses serves them in sequence and then repeats the
/// last one. Responders are consulted after the rules.
class ScriptedBackend final : public Backend {
 public:
  using Responder = std::function<std::optional<std::string>(std::string_view prompt)>;

  ScriptedBackend() = default;
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  void add_rule(std::string contains, std::vector<std::string> responses);
  void add_responder(Responder responder);

  std::string complete(const CompletionRequest& request, const std::string& digest) override;
  std::string_view kind() const override { return "scripted"; }

 private:
  struct Rule {
    std::string contains;
    std::vector<std::string> responses;
    std::size_t served = 0;
  };
  std::mutex mutex_;
  std::vector<Rule> rules_;
  std::vector<Responder> responders_;
};

struct HttpSettings {
  std::string endpoint;        // e.g. http://localhost:8080/v1/complete
  std::string model;
  std::string credential_env;  // name of the environment variable holding the key
  std::chrono::seconds timeout{120};
};

/// JSON POST {model, prompt, max_tokens, temperature} -> {text}.
class HttpBackend final : public Backend {
 public:
  /// Throws ConfigError when the endpoint, model or credential is missing.
  explicit HttpBackend(HttpSettings settings);
  std::string complete(const CompletionRequest& request, const std::string& digest) override;
  std::string_view kind() const override { return "http"; }

 private:
  HttpSettings settings_;
  std::string credential_;
  std::string base_url_;
  std::string path_;
};

enum class BackendKind { Http, Replay, Scripted };

struct BackendSettings {
  std::filesystem::path fixture;  // replay
  std::filesystem::path rules;    // scripted
  HttpSettings http;
};

BackendKind parse_backend_kind(std::string_view text);
std::unique_ptr<Backend> configure_backend(BackendKind kind, const BackendSettings& settings);

struct TranscriptEntry {
  std::string tag;
  std::string request_digest;
  std::string response_digest;  // empty when the call failed
  std::chrono::microseconds latency{0};
  bool truncated = false;
  std::string error;
};

/// Exact, thread-safe call accounting.
class CallLedger {
 public:
  void record(TranscriptEntry entry);
  std::size_t total_calls() const;
  std::map<std::string, std::size_t> per_tag() const;
  std::vector<TranscriptEntry> transcript() const;

 private:
  mutable std::mutex mutex_;
  std::size_t total_ = 0;
  std::map<std::string, std::size_t> per_tag_;
  std::vector<TranscriptEntry> transcript_;
};

struct GatewayOptions {
  int retries = 2;
  std::chrono::milliseconds initial_backoff{200};
  std::size_t max_response_bytes = 64 * 1024;
  std::ptrdiff_t max_in_flight = 4;
};

class ModelGateway {
 public:
  explicit ModelGateway(std::unique_ptr<Backend> backend, GatewayOptions options = {});

  /// One ledger entry per call, whether it succeeds or not. Throws
  /// BackendError (carrying the request tag) once retries are exhausted.
  std::string complete(const CompletionRequest& request);

  const CallLedger& ledger() const noexcept { return ledger_; }
  Backend& backend() noexcept { return *backend_; }

  /// Keep (digest, response) pairs so a live run can be replayed later.
  void enable_recording() { recording_ = true; }
  std::vector<ReplayRecord> recorded() const;

 private:
  static constexpr std::ptrdiff_t kMaxInFlight = 256;

  std::unique_ptr<Backend> backend_;
  GatewayOptions options_;
  CallLedger ledger_;
  std::counting_semaphore<kMaxInFlight> in_flight_;
  bool recording_ = false;
  mutable std::mutex record_mutex_;
  std::vector<ReplayRecord> recorded_;
};

}  // namespace wrangle
