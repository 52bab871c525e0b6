#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wrangle/errors.hpp"
#include "wrangle/orchestrator.hpp"

namespace wrangle {

using ojson = nlohmann::ordered_json;

namespace {

Method parse_method(std::string_view text) {
  for (Method m : {Method::RowAlone, Method::FewShot, Method::MemoryDependent, Method::RowWiseBaseline}) {
    if (to_string(m) == text) return m;
  }
  throw DataError("unknown method '" + std::string(text) + "' in report");
}

template <typename T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

std::optional<double> optional_double(const ojson& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

std::string_view display_task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::Impute:
      return "Imputation";
    case TaskKind::Detect:
      return "Error Detection";
    case TaskKind::Correct:
      return "Error Correction";
  }
  return "";
}

}  // namespace

std::string report_to_json(const WrangleReport& r) {
  ojson doc;
  doc["report_version"] = r.report_version;
  doc["task_kind"] = std::string(to_string(r.task_kind));
  doc["dataset"] = r.dataset;
  doc["target"] = r.target;
  doc["mode"] = r.mode;
  doc["status"] = r.status;
  doc["failure_reason"] = r.failure_reason.empty() ? ojson(nullptr) : ojson(r.failure_reason);
  doc["method_used"] = r.method_used ? ojson(std::string(to_string(*r.method_used))) : ojson(nullptr);
  doc["selected_columns"] = r.selected_columns;
  ojson ranking = ojson::array();
  for (const auto& [column, share] : r.relevance_ranking) {
    ranking.push_back({{"column", column}, {"share", share}});
  }
  doc["relevance_ranking"] = std::move(ranking);
  doc["kb_match"] = r.kb_match ? ojson{{"id", r.kb_match->first}, {"score", r.kb_match->second}}
                               : ojson(nullptr);
  ojson snippets = ojson::array();
  for (const auto& s : r.snippets) {
    snippets.push_back({{"fold_id", s.fold_id},
                        {"iteration", s.iteration},
                        {"method", std::string(to_string(s.method))},
                        {"validation_accuracy", optional_json(s.validation_accuracy)},
                        {"ground_truth_accuracy", optional_json(s.ground_truth_accuracy)},
                        {"applied", s.applied}});
  }
  doc["snippets"] = std::move(snippets);
  ojson attempts = ojson::array();
  for (const auto& a : r.attempts) {
    attempts.push_back({{"fold_id", a.fold_id},
                        {"iteration", a.iteration},
                        {"method", std::string(to_string(a.method))},
                        {"outcome", a.outcome},
                        {"accuracy", optional_json(a.accuracy)},
                        {"detail", a.detail}});
  }
  doc["attempts"] = std::move(attempts);
  doc["accuracy"] = optional_json(r.accuracy);
  doc["llm_calls"] = r.llm_calls;
  doc["query_rows"] = r.query_rows;
  doc["cells_changed"] = r.cells_changed;
  doc["abstention_rate"] = r.abstention_rate;
  doc["seed"] = r.seed;
  doc["k_folds"] = r.k_folds;
  doc["max_iterations"] = r.max_iterations;
  doc["accuracy_gate"] = r.accuracy_gate;
  doc["warnings"] = r.warnings;
  return doc.dump(2) + "\n";
}

WrangleReport report_from_json(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  WrangleReport r;
  try {
    r.report_version = doc.at("report_version").get<int>();
    if (r.report_version != kReportVersion) {
      throw DataError("unsupported report_version " + std::to_string(r.report_version));
    }
    r.task_kind = parse_task_kind(doc.at("task_kind").get<std::string>());
    r.dataset = doc.at("dataset").get<std::string>();
    r.target = doc.at("target").get<std::string>();
    r.mode = doc.at("mode").get<std::string>();
    r.status = doc.at("status").get<std::string>();
    if (!doc.at("failure_reason").is_null()) r.failure_reason = doc["failure_reason"].get<std::string>();
    if (!doc.at("method_used").is_null()) r.method_used = parse_method(doc["method_used"].get<std::string>());
    r.selected_columns = doc.at("selected_columns").get<std::vector<std::string>>();
    for (const auto& item : doc.at("relevance_ranking")) {
      r.relevance_ranking.emplace_back(item.at("column").get<std::string>(), item.at("share").get<double>());
    }
    if (!doc.at("kb_match").is_null()) {
      r.kb_match = std::make_pair(doc["kb_match"].at("id").get<std::string>(),
                                  doc["kb_match"].at("score").get<double>());
    }
    for (const auto& item : doc.at("snippets")) {
      SnippetRecord s;
      s.fold_id = item.at("fold_id").get<int>();
      s.iteration = item.at("iteration").get<int>();
      s.method = parse_method(item.at("method").get<std::string>());
      s.validation_accuracy = optional_double(item.at("validation_accuracy"));
      s.ground_truth_accuracy = optional_double(item.at("ground_truth_accuracy"));
      s.applied = item.at("applied").get<bool>();
      r.snippets.push_back(s);
    }
    for (const auto& item : doc.at("attempts")) {
      AttemptRecord a;
      a.fold_id = item.at("fold_id").get<int>();
      a.iteration = item.at("iteration").get<int>();
      a.method = parse_method(item.at("method").get<std::string>());
      a.outcome = item.at("outcome").get<std::string>();
      a.accuracy = optional_double(item.at("accuracy"));
      a.detail = item.at("detail").get<std::string>();
      r.attempts.push_back(std::move(a));
    }
    r.accuracy = optional_double(doc.at("accuracy"));
    r.llm_calls = doc.at("llm_calls").get<std::size_t>();
    r.query_rows = doc.at("query_rows").get<std::size_t>();
    r.cells_changed = doc.at("cells_changed").get<std::size_t>();
    r.abstention_rate = doc.at("abstention_rate").get<double>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.k_folds = doc.at("k_folds").get<int>();
    r.max_iterations = doc.at("max_iterations").get<int>();
    r.accuracy_gate = doc.at("accuracy_gate").get<double>();
    r.warnings = doc.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string format_cell(const WrangleReport& report) {
  std::ostringstream os;
  if (report.accuracy) {
    os << std::fixed << std::setprecision(2) << *report.accuracy;
  } else {
    os << "n/a";
  }
  os << " (#" << report.llm_calls << ")";
  return os.str();
}

std::string format_comparison(const WrangleReport& a, const WrangleReport& b) {
  if (a.task_kind != b.task_kind || a.dataset != b.dataset || a.target != b.target) {
    throw DataError("reports describe different runs: " + std::string(to_string(a.task_kind)) + " on " +
                    a.dataset + "." + a.target + " vs " + std::string(to_string(b.task_kind)) + " on " +
                    b.dataset + "." + b.target);
  }
  const std::string head_a = a.mode == "codegen" ? "code-gen" : "row-wise";
  const std::string head_b = b.mode == "codegen" ? "code-gen" : "row-wise";
  std::ostringstream os;
  os << "Task | Dataset | " << head_a << " | " << head_b << "\n";
  os << display_task_name(a.task_kind) << " | " << a.dataset << " | " << format_cell(a) << " | "
     << format_cell(b) << "\n";
  return os.str();
}

}  // namespace wrangle
