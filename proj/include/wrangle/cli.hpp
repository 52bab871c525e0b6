#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wrangle/gateway.hpp"
#include "wrangle/orchestrator.hpp"
#include "wrangle/sandbox.hpp"
#include "wrangle/task.hpp"

namespace wrangle {

inline constexpr int kExitOk = 0;
inline constexpr int kExitTaskFailed = 1;
inline constexpr int kExitConfig = 64;

/// Dotted key -> scalar text. Arrays are kept as their JSON text.
using ConfigMap = std::map<std::string, std::string>;

/// Reads a JSON object and flattens nested objects into dotted keys.
/// Throws ConfigError on unreadable or malformed files.
ConfigMap load_config_file(const std::filesystem::path& path);

/// Every key a config file may carry.
const std::vector<std::string>& known_config_keys();

struct JobConfig {
  std::filesystem::path data;
  std::optional<std::filesystem::path> annotations;
  std::optional<std::filesystem::path> kb_dir;
  std::optional<std::filesystem::path> truth;
  TaskSpec spec;
  std::string mode = "codegen";  // codegen | row_wise_baseline
  BackendKind backend = BackendKind::Replay;
  BackendSettings backend_settings;
  std::optional<std::filesystem::path> record_fixture;
  GatewayOptions gateway;
  PipelineOptions pipeline;
  SubprocessOptions sandbox;
  std::filesystem::path output_table = "output.csv";
  std::filesystem::path output_report = "report.json";
};

/// Validates and converts a merged config. Throws ConfigError.
JobConfig resolve_job(const ConfigMap& config);

int cmd_run(const JobConfig& job, std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& a, const std::filesystem::path& b, std::ostream& out,
             std::ostream& err);
int cmd_kb_ingest(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);
int cmd_kb_list(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

inline constexpr std::string_view kSignatureCache = "signatures.json";

/// Entry point behind the `wrangle` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wrangle
