#include "wrangle/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wrangle/errors.hpp"
#include "wrangle/kb.hpp"

namespace wrangle {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void flatten(const ojson& node, const std::string& prefix, ConfigMap& out) {
  for (const auto& [key, value] : node.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten(value, name, out);
    } else if (value.is_string()) {
      out[name] = value.get<std::string>();
    } else if (!value.is_null()) {
      out[name] = value.dump();
    }
  }
}

class Reader {
 public:
  explicit Reader(const ConfigMap& config) : config_(config) {}

  std::optional<std::string> text(const std::string& key) const {
    const auto it = config_.find(key);
    if (it == config_.end()) return std::nullopt;
    return it->second;
  }
  std::string text_or(const std::string& key, std::string fallback) const {
    return text(key).value_or(std::move(fallback));
  }
  template <typename T>
  void number(const std::string& key, T& into) const {
    const auto value = text(key);
    if (!value) return;
    std::istringstream is(*value);
    T parsed{};
    is >> parsed;
    if (!is || !is.eof()) throw ConfigError(key + ": '" + *value + "' is not a valid number");
    into = parsed;
  }

 private:
  const ConfigMap& config_;
};

fs::path existing_path(const std::string& key, const std::string& value) {
  fs::path p(value);
  if (!fs::exists(p)) throw ConfigError(key + ": path '" + value + "' does not exist");
  return p;
}

std::vector<std::string> parse_command(const std::string& text) {
  std::vector<std::string> argv;
  const std::string t = trim(text);
  if (!t.empty() && t.front() == '[') {
    try {
      argv = nlohmann::json::parse(t).get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("sandbox.command: expected a list of strings");
    }
  } else {
    std::istringstream is(t);
    for (std::string word; is >> word;) argv.push_back(word);
  }
  if (argv.empty()) throw ConfigError("sandbox.command is empty");
  return argv;
}

bool on_path(const std::string& program) {
  if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0;
  const char* path = std::getenv("PATH");
  if (path == nullptr) return false;
  std::istringstream dirs(path);
  for (std::string dir; std::getline(dirs, dir, ':');) {
    if (dir.empty()) dir = ".";
    if (::access((fs::path(dir) / program).c_str(), X_OK) == 0) return true;
  }
  return false;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

ConfigMap load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  ojson doc;
  try {
    doc = ojson::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed config file '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
  ConfigMap out;
  flatten(doc, "", out);
  return out;
}

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "task.kind", "task.target", "task.k_folds", "task.max_iterations", "task.accuracy_gate",
      "task.n_example_rows", "task.fewshot_count", "task.seed",
      "data.path", "data.annotations",
      "kb.dir", "kb.similarity_threshold", "kb.reference_rows",
      "model.backend", "model.endpoint", "model.name", "model.credential_env", "model.timeout_s",
      "model.retries", "model.backoff_ms", "model.max_response_bytes", "model.max_in_flight",
      "model.max_output_tokens", "model.codegen_temperature", "model.rowwise_temperature",
      "model.record_fixture",
      "relevance.cumulative_share", "relevance.max_selected", "relevance.rounds",
      "relevance.max_depth", "relevance.learning_rate", "relevance.min_samples_leaf",
      "prompt.max_tokens",
      "sandbox.command", "sandbox.batch_timeout_ms", "sandbox.handshake_timeout_ms",
      "sandbox.max_parallel",
      "run.mode", "output.table", "output.report", "eval.truth"};
  return keys;
}

JobConfig resolve_job(const ConfigMap& config) {
  const auto& known = known_config_keys();
  for (const auto& [key, value] : config) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  const Reader r(config);
  JobConfig job;

  const auto kind = r.text("task.kind");
  if (!kind) throw ConfigError("task kind is required (--task or task.kind)");
  job.spec.kind = parse_task_kind(*kind);
  job.spec.target = r.text_or("task.target", "");
  if (job.spec.target.empty()) throw ConfigError("target column is required (--target or task.target)");
  r.number("task.k_folds", job.spec.k_folds);
  r.number("task.max_iterations", job.spec.max_iterations);
  r.number("task.accuracy_gate", job.spec.accuracy_gate);
  r.number("task.n_example_rows", job.spec.n_example_rows);
  r.number("task.fewshot_count", job.spec.fewshot_count);
  r.number("task.seed", job.spec.seed);
  job.spec.validate();

  const auto data = r.text("data.path");
  if (!data) throw ConfigError("dataset is required (--data or data.path)");
  job.data = existing_path("data.path", *data);
  if (auto a = r.text("data.annotations")) job.annotations = existing_path("data.annotations", *a);
  if (job.spec.kind == TaskKind::Detect && !job.annotations) {
    throw ConfigError("detection needs --annotations (data.annotations)");
  }
  if (auto kb = r.text("kb.dir")) job.kb_dir = existing_path("kb.dir", *kb);
  if (auto truth = r.text("eval.truth")) job.truth = existing_path("eval.truth", *truth);

  job.mode = r.text_or("run.mode", "codegen");
  if (job.mode != "codegen" && job.mode != "row_wise_baseline") {
    throw ConfigError("run.mode must be codegen or row_wise_baseline, got '" + job.mode + "'");
  }

  const std::string backend = r.text_or("model.backend", "");
  if (backend.empty()) throw ConfigError("model backend is required (--backend or model.backend)");
  const auto colon = backend.find(':');
  job.backend = parse_backend_kind(backend.substr(0, colon));
  const std::string backend_arg = colon == std::string::npos ? "" : backend.substr(colon + 1);
  if (job.backend == BackendKind::Replay) {
    if (backend_arg.empty()) throw ConfigError("replay backend needs a fixture: replay:<path>");
    job.backend_settings.fixture = existing_path("model.backend", backend_arg);
  } else if (job.backend == BackendKind::Scripted) {
    if (backend_arg.empty()) throw ConfigError("scripted backend needs a rules file: scripted:<path>");
    job.backend_settings.rules = existing_path("model.backend", backend_arg);
  }
  auto& http = job.backend_settings.http;
  http.endpoint = r.text_or("model.endpoint", "");
  http.model = r.text_or("model.name", "");
  http.credential_env = r.text_or("model.credential_env", "");
  long timeout_s = http.timeout.count();
  r.number("model.timeout_s", timeout_s);
  http.timeout = std::chrono::seconds(timeout_s);
  if (auto rec = r.text("model.record_fixture")) job.record_fixture = fs::path(*rec);

  r.number("model.retries", job.gateway.retries);
  long backoff = job.gateway.initial_backoff.count();
  r.number("model.backoff_ms", backoff);
  job.gateway.initial_backoff = std::chrono::milliseconds(backoff);
  r.number("model.max_response_bytes", job.gateway.max_response_bytes);
  r.number("model.max_in_flight", job.gateway.max_in_flight);
  if (job.gateway.retries < 0) throw ConfigError("model.retries must be >= 0");
  if (job.gateway.max_in_flight < 1 || job.gateway.max_in_flight > 256) {
    throw ConfigError("model.max_in_flight must be in [1, 256]");
  }

  auto& p = job.pipeline;
  r.number("kb.similarity_threshold", p.similarity_threshold);
  if (!(p.similarity_threshold >= 0.0 && p.similarity_threshold <= 1.0)) {
    throw ConfigError("kb.similarity_threshold must be in [0, 1]");
  }
  r.number("kb.reference_rows", p.reference_rows);
  r.number("prompt.max_tokens", p.max_prompt_tokens);
  r.number("model.max_output_tokens", p.max_output_tokens);
  r.number("model.codegen_temperature", p.codegen_temperature);
  r.number("model.rowwise_temperature", p.rowwise_temperature);
  r.number("relevance.cumulative_share", p.relevance.cumulative_share);
  r.number("relevance.max_selected", p.relevance.max_selected);
  r.number("relevance.rounds", p.relevance.boost.rounds);
  r.number("relevance.max_depth", p.relevance.boost.max_depth);
  r.number("relevance.learning_rate", p.relevance.boost.learning_rate);
  r.number("relevance.min_samples_leaf", p.relevance.boost.min_samples_leaf);
  r.number("sandbox.max_parallel", p.max_parallel_sessions);

  job.sandbox.command = parse_command(r.text_or("sandbox.command", "wrangle-runner"));
  long batch = job.sandbox.batch_timeout.count();
  long handshake = job.sandbox.handshake_timeout.count();
  r.number("sandbox.batch_timeout_ms", batch);
  r.number("sandbox.handshake_timeout_ms", handshake);
  if (batch <= 0 || handshake <= 0) throw ConfigError("sandbox timeouts must be positive");
  job.sandbox.batch_timeout = std::chrono::milliseconds(batch);
  job.sandbox.handshake_timeout = std::chrono::milliseconds(handshake);

  job.output_table = r.text_or("output.table", job.output_table.string());
  job.output_report = r.text_or("output.report", job.output_report.string());
  return job;
}

int cmd_run(const JobConfig& job, std::ostream& out, std::ostream& err) {
  if (job.mode == "codegen" && !on_path(job.sandbox.command.front())) {
    err << "error: sandbox runner '" << job.sandbox.command.front() << "' not found\n";
    return kExitConfig;
  }
  std::unique_ptr<Backend> backend;
  try {
    backend = configure_backend(job.backend, job.backend_settings);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const Table d = load_table(job.data);
    std::optional<Table> annotations;
    if (job.annotations) annotations = load_table(*job.annotations);
    KnowledgeBase kb;
    if (job.kb_dir) kb = ingest_kb(*job.kb_dir);

    ModelGateway gateway(std::move(backend), job.gateway);
    if (job.record_fixture) gateway.enable_recording();

    TaskOutcome outcome;
    if (job.mode == "codegen") {
      SubprocessExecutor executor(job.sandbox);
      outcome = run_task(d, job.spec, kb, annotations, gateway, executor, job.pipeline);
    } else {
      outcome = run_baseline(d, job.spec, annotations, gateway, job.pipeline);
    }
    if (outcome.output && job.truth) {
      score_against_truth(outcome.report, d, *outcome.output, load_table(*job.truth), job.spec);
    }
    if (outcome.output) write_table(*outcome.output, job.output_table);
    write_text(job.output_report, report_to_json(outcome.report));
    if (job.record_fixture) save_replay_fixture(gateway.recorded(), *job.record_fixture);

    const WrangleReport& rep = outcome.report;
    out << "status=" << rep.status;
    if (rep.method_used) out << " method=" << to_string(*rep.method_used);
    out << " llm_calls=" << rep.llm_calls << " cells_changed=" << rep.cells_changed;
    if (rep.accuracy) out << " accuracy=" << *rep.accuracy;
    out << "\n";
    for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
    if (rep.status != "ok") {
      err << "error: " << rep.failure_reason << "\n";
      return kExitTaskFailed;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitTaskFailed;
  }
}

int cmd_eval(const fs::path& a, const fs::path& b, std::ostream& out, std::ostream& err) {
  try {
    const WrangleReport ra = report_from_json(read_text(a));
    const WrangleReport rb = report_from_json(read_text(b));
    out << format_comparison(ra, rb);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitTaskFailed;
  }
}

int cmd_kb_ingest(const fs::path& dir, std::ostream& out, std::ostream& err) {
  KnowledgeBase kb;
  try {
    kb = ingest_kb(dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  ojson cache;
  cache["entries"] = ojson::array();
  for (const auto& entry : kb.entries) {
    ojson signatures = ojson::array();
    for (const auto& s : entry.column_signatures) signatures.push_back(s.values);
    cache["entries"].push_back({{"id", entry.id},
                                {"description", entry.description},
                                {"columns", entry.table.columns()},
                                {"rows", entry.table.row_count()},
                                {"signatures", std::move(signatures)}});
  }
  cache["warnings"] = kb.warnings;
  try {
    write_text(dir / kSignatureCache, cache.dump() + "\n");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitTaskFailed;
  }
  for (const auto& w : kb.warnings) err << "warning: " << w << "\n";
  out << kb.entries.size() << " entries, " << kb.warnings.size() << " warnings\n";
  return kExitOk;
}

int cmd_kb_list(const fs::path& dir, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(dir)) {
    err << "error: '" << dir.string() << "' is not a directory\n";
    return kExitConfig;
  }
  const fs::path cache_path = dir / kSignatureCache;
  if (!fs::exists(cache_path)) {
    out << "0 entries\n";
    return kExitOk;
  }
  try {
    const auto cache = ojson::parse(read_text(cache_path));
    const auto& entries = cache.at("entries");
    for (const auto& e : entries) {
      out << e.at("id").get<std::string>() << "\tcolumns=" << e.at("columns").size()
          << "\trows=" << e.at("rows").get<std::size_t>();
      const auto description = e.value("description", std::string());
      if (!description.empty()) out << "\t" << description;
      out << "\n";
    }
    out << entries.size() << " entries\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: signature cache is unreadable: " << e.what() << "\n";
    return kExitTaskFailed;
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"LLM-assisted data wrangling: imputation, error detection and correction", "wrangle"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one wrangling task");
  std::string config_path;
  run->add_option("--config", config_path, "JSON config file (flags override it)");
  struct FlagKey {
    const char* flag;
    const char* key;
    const char* help;
  };
  static constexpr FlagKey kFlags[] = {
      {"--task", "task.kind", "impute | detect | correct"},
      {"--target", "task.target", "Target column"},
      {"--data", "data.path", "Input CSV"},
      {"--annotations", "data.annotations", "Annotations CSV (row_id,label) for detect"},
      {"--kb", "kb.dir", "Knowledge-base directory"},
      {"--backend", "model.backend", "replay:<file> | scripted:<file> | http"},
      {"--mode", "run.mode", "codegen | row_wise_baseline"},
      {"--out", "output.table", "Output CSV path"},
      {"--report", "output.report", "Report JSON path"},
      {"--seed", "task.seed", "Random seed"},
      {"--k-folds", "task.k_folds", "Number of folds"},
      {"--max-iterations", "task.max_iterations", "Iterations per method leg"},
      {"--threshold", "kb.similarity_threshold", "KB similarity threshold"},
      {"--truth", "eval.truth", "Clean copy of the input, for scoring"},
  };
  std::map<std::string, std::string> flag_values;
  std::vector<std::pair<CLI::Option*, const char*>> flag_options;
  for (const auto& f : kFlags) {
    flag_options.emplace_back(run->add_option(f.flag, flag_values[f.key], f.help), f.key);
  }

  auto* eval = app.add_subcommand("eval", "Compare two run reports");
  std::string report_a;
  std::string report_b;
  eval->add_option("report_a", report_a, "First report")->required();
  eval->add_option("report_b", report_b, "Second report")->required();

  auto* kb = app.add_subcommand("kb", "Knowledge-base maintenance");
  kb->require_subcommand(1);
  std::string kb_dir;
  auto* ingest = kb->add_subcommand("ingest", "Validate and signature a KB directory");
  ingest->add_option("dir", kb_dir, "KB directory")->required();
  auto* list = kb->add_subcommand("list", "List cached KB entries");
  list->add_option("dir", kb_dir, "KB directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream os;
    app.exit(e, os, os);
    err << os.str();
    return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
  }

  if (*eval) return cmd_eval(report_a, report_b, out, err);
  if (*ingest) return cmd_kb_ingest(kb_dir, out, err);
  if (*list) return cmd_kb_list(kb_dir, out, err);

  try {
    ConfigMap config;
    if (!config_path.empty()) config = load_config_file(config_path);
    for (const auto& [option, key] : flag_options) {
      if (option->count() > 0) config[key] = flag_values[key];
    }
    const JobConfig job = resolve_job(config);
    return cmd_run(job, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace wrangle
