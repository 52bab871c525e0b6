#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wrangle/table.hpp"

namespace wrangle {

inline constexpr int kProtocolVersion = 1;

/// Column name -> cell; NULL cells travel as JSON null.
using RowMap = std::map<std::string, Cell>;

struct RowMessage {
  std::uint64_t id = 0;
  RowMap row;
};

/// Exactly one of value / error is set.
struct ResultMessage {
  std::uint64_t id = 0;
  std::optional<std::string> value;
  std::optional<std::string> error;

  bool ok() const noexcept { return value.has_value(); }
};

// Protocol v1 wire format: one JSON object per line.
std::string encode_row(const RowMessage& message);
RowMessage decode_row(std::string_view line);
std::string encode_result(const ResultMessage& message);
/// Throws ProtocolError unless the line is {"id":n,"value":s} or {"id":n,"error":s}.
ResultMessage decode_result(std::string_view line);
std::string encode_ready(int protocol = kProtocolVersion);
/// Returns the protocol version of a ready line; throws ProtocolError when the
/// line is not a ready message.
int decode_ready(std::string_view line);

/// Builds the rows a snippet sees: one RowMessage per index with ids 0..n-1.
/// When mask_column is set that cell is sent as NULL.
std::vector<RowMessage> make_row_messages(const Table& table, std::span<const std::size_t> rows,
                                          std::optional<std::string_view> mask_column);

/// Runs snippet sessions. Implementations answer every input id exactly once,
/// in input order, or throw SandboxError for the whole session.
class SnippetExecutor {
 public:
  virtual ~SnippetExecutor() = default;
  virtual std::vector<ResultMessage> run_session(const std::string& source,
                                                 std::span<const RowMessage> rows) = 0;
};

/// In-process executor for tests and offline runs. Snippet behaviour is looked
/// up by source substring; every message still goes through the v1 wire
/// encoding. A source matching no registered behaviour fails to load.
class StubExecutor final : public SnippetExecutor {
 public:
  /// Returns the value, or std::nullopt for the missing-value sentinel
  /// (reported as "Unknown"). Exceptions become per-row error results.
  using RowFunction = std::function<std::optional<std::string>(const RowMap& row)>;

  void add_behavior(std::string source_marker, RowFunction fn);
  std::vector<ResultMessage> run_session(const std::string& source,
                                         std::span<const RowMessage> rows) override;
  std::size_t sessions() const noexcept { return sessions_.load(); }

 private:
  std::vector<std::pair<std::string, RowFunction>> behaviors_;
  std::atomic<std::size_t> sessions_{0};
};

struct SubprocessOptions {
  std::vector<std::string> command;  // runner argv prefix, e.g. {"python3", "runner.py"}
  std::chrono::milliseconds batch_timeout{5000};  // per 1000 rows
  std::chrono::milliseconds handshake_timeout{3000};
};

/// Launches one runner process per session and speaks protocol v1 over its
/// stdin/stdout. The snippet is passed via `--snippet-file <path>`.
class SubprocessExecutor final : public SnippetExecutor {
 public:
  explicit SubprocessExecutor(SubprocessOptions options);
  std::vector<ResultMessage> run_session(const std::string& source,
                                         std::span<const RowMessage> rows) override;

 private:
  SubprocessOptions options_;
};

}  // namespace wrangle
