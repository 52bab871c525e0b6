#include "wrangle/gateway.hpp"

#include <algorithm>
#include <array>
#include <thread>

#include <openssl/evp.h>

#include "wrangle/errors.hpp"

namespace wrangle {

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string request_digest(std::string_view prompt) { return sha256_hex(prompt); }

void CallLedger::record(TranscriptEntry entry) {
  std::lock_guard lock(mutex_);
  ++total_;
  ++per_tag_[entry.tag];
  transcript_.push_back(std::move(entry));
}

std::size_t CallLedger::total_calls() const {
  std::lock_guard lock(mutex_);
  return total_;
}

std::map<std::string, std::size_t> CallLedger::per_tag() const {
  std::lock_guard lock(mutex_);
  return per_tag_;
}

std::vector<TranscriptEntry> CallLedger::transcript() const {
  std::lock_guard lock(mutex_);
  return transcript_;
}

ModelGateway::ModelGateway(std::unique_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      options_(options),
      in_flight_(std::clamp<std::ptrdiff_t>(options.max_in_flight, 1, kMaxInFlight)) {
  if (!backend_) throw ConfigError("model gateway needs a backend");
}

std::string ModelGateway::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw ConfigError("completion request with an empty prompt");
  const std::string digest = request_digest(request.prompt);

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<kMaxInFlight>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};

  TranscriptEntry entry;
  entry.tag = request.tag;
  entry.request_digest = digest;
  const auto started = std::chrono::steady_clock::now();
  auto finish = [&] {
    entry.latency = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::steady_clock::now() - started);
    ledger_.record(entry);
  };

  auto backoff = options_.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      std::string response = backend_->complete(request, digest);
      if (response.size() > options_.max_response_bytes) {
        response.resize(options_.max_response_bytes);
        entry.truncated = true;
      }
      entry.response_digest = sha256_hex(response);
      finish();
      if (recording_) {
        std::lock_guard lock(record_mutex_);
        recorded_.push_back(ReplayRecord{digest, response});
      }
      return response;
    } catch (const TransportError& e) {
      if (attempt < options_.retries) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
        continue;
      }
      entry.error = e.what();
    } catch (const std::exception& e) {
      entry.error = e.what();
    }
    finish();
    throw BackendError(request.tag, "completion failed [" + request.tag + "]: " + entry.error);
  }
}

std::vector<ReplayRecord> ModelGateway::recorded() const {
  std::lock_guard lock(record_mutex_);
  return recorded_;
}

}  // namespace wrangle
