#include <algorithm>
#include <future>
#include <numeric>
#include <random>

#include "wrangle/errors.hpp"
#include "wrangle/orchestrator.hpp"

namespace wrangle {
namespace {

template <typename F>
void parallel_for(std::size_t n, std::size_t width, F&& fn) {
  width = std::max<std::size_t>(width, 1);
  for (std::size_t start = 0; start < n; start += width) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = start; i < std::min(n, start + width); ++i) {
      batch.push_back(std::async(std::launch::async, fn, i));
    }
    for (auto& f : batch) f.get();
  }
}

void check_inputs(const Table& d, const TaskSpec& spec, const std::optional<Table>& annotations) {
  spec.validate();
  if (!d.has_column(spec.target)) {
    throw DataError("target column '" + spec.target + "' not found in " + d.name());
  }
  if (spec.kind == TaskKind::Detect && !annotations) {
    throw ConfigError("detection needs an annotations table");
  }
}

WrangleReport new_report(const Table& d, const TaskSpec& spec) {
  WrangleReport report;
  report.task_kind = spec.kind;
  report.dataset = d.name();
  report.target = spec.target;
  report.seed = spec.seed;
  report.k_folds = spec.k_folds;
  report.max_iterations = spec.max_iterations;
  report.accuracy_gate = spec.accuracy_gate;
  return report;
}

std::string sample_reference(const Table& table, std::size_t max_rows, std::uint64_t seed) {
  std::vector<std::size_t> rows(table.row_count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  if (rows.size() > max_rows) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < max_rows; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (rows.size() - i));
      std::swap(rows[i], rows[j]);
    }
    rows.resize(max_rows);
    std::sort(rows.begin(), rows.end());
  }
  return format_rows(table, rows, true);
}

// Writes per-query-row values into the output table. Returns the number of
// cells that changed (or, for detect, were labelled).
std::size_t apply_values(const Table& d, const TaskSpec& spec, std::span<const std::size_t> queries,
                         const std::map<std::size_t, std::string>& values, Table& output) {
  std::size_t changed = 0;
  if (spec.kind == TaskKind::Detect) {
    std::vector<Cell> labels(d.row_count());
    for (const auto& [q, value] : values) {
      labels[queries[q]] = value;
      ++changed;
    }
    output = d.with_column_appended(detect_column_name(spec.target), std::move(labels));
    return changed;
  }
  auto column = d.column_values(spec.target);
  for (const auto& [q, value] : values) {
    auto& cell = column[queries[q]];
    if (spec.kind == TaskKind::Impute) {
      if (cell) continue;
      cell = value;
      ++changed;
    } else if (cell && normalize_value(*cell) != normalize_value(value)) {
      cell = value;
      ++changed;
    }
  }
  output = d.with_column_replaced(spec.target, std::move(column));
  return changed;
}

// Input-table row behind each row of G.
std::vector<std::size_t> ground_truth_sources(const Table& d, const TaskSpec& spec,
                                              const std::optional<Table>& annotations) {
  std::vector<std::size_t> out;
  if (spec.kind != TaskKind::Detect) {
    const std::size_t target = d.column_index(spec.target);
    for (std::size_t r = 0; r < d.row_count(); ++r) {
      if (d.cell(r, target)) out.push_back(r);
    }
    return out;
  }
  const std::size_t id_col = annotations->column_index(kAnnotationRowColumn);
  for (std::size_t a = 0; a < annotations->row_count(); ++a) {
    out.push_back(static_cast<std::size_t>(std::stoull(trim(*annotations->cell(a, id_col)))));
  }
  return out;
}

std::optional<std::string> parse_rowwise_answer(std::string_view response, TaskKind kind) {
  std::string text = trim(response);
  const auto nl = text.find('\n');
  if (nl != std::string::npos) text = trim(text.substr(0, nl));
  while (text.size() >= 2 && (text.front() == '"' || text.front() == '\'' || text.front() == '`') &&
         text.back() == text.front()) {
    text = trim(text.substr(1, text.size() - 2));
  }
  ResultMessage as_result;
  as_result.value = text;
  auto value = canonical_output(as_result, kind);
  if (is_abstention(value)) return std::nullopt;
  return value;
}

}  // namespace

std::string detect_column_name(std::string_view target) {
  return std::string(target) + "_is_error";
}

std::vector<std::size_t> query_rows(const Table& d, const TaskSpec& spec) {
  const std::size_t target = d.column_index(spec.target);
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < d.row_count(); ++r) {
    const bool null = !d.cell(r, target).has_value();
    if (spec.kind == TaskKind::Detect || (spec.kind == TaskKind::Impute) == null) out.push_back(r);
  }
  return out;
}

TaskOutcome run_task(const Table& d, const TaskSpec& spec, const KnowledgeBase& kb,
                     const std::optional<Table>& annotations, ModelGateway& gateway,
                     SnippetExecutor& executor, const PipelineOptions& options) {
  check_inputs(d, spec, annotations);
  const std::size_t calls_before = gateway.ledger().total_calls();
  TaskOutcome outcome;
  WrangleReport& report = outcome.report;
  report = new_report(d, spec);
  report.warnings = kb.warnings;
  auto finish_failed = [&](std::string reason) {
    report.status = "failed";
    report.failure_reason = std::move(reason);
    report.llm_calls = gateway.ledger().total_calls() - calls_before;
    return std::move(outcome);
  };

  const RelevanceResult relevance = select_relevant_columns(d, spec.target, options.relevance);
  report.selected_columns = relevance.selected;
  report.relevance_ranking = relevance.ranked;
  std::vector<std::string> keep;
  for (const auto& c : d.columns()) {
    if (c == spec.target ||
        std::find(relevance.selected.begin(), relevance.selected.end(), c) != relevance.selected.end()) {
      keep.push_back(c);
    }
  }
  const Table d_tilde = d.select_columns(keep);

  const RouteDecision route = route_workflow(d_tilde, kb, options.similarity_threshold);
  std::optional<std::string> reference;
  if (route.match) {
    report.kb_match = std::make_pair(route.match->entry_id, route.match->score);
    const auto entry = std::find_if(kb.entries.begin(), kb.entries.end(),
                                    [&](const KbEntry& e) { return e.id == route.match->entry_id; });
    reference = sample_reference(entry->table, options.reference_rows, derive_seed(spec.seed, 0xfeed));
  }

  const Table g = ground_truth(d_tilde, spec, annotations);
  if (g.row_count() < static_cast<std::size_t>(spec.k_folds)) {
    return finish_failed("ground truth has " + std::to_string(g.row_count()) +
                         " rows, fewer than k_folds");
  }
  const FoldPlan plan = make_folds(g, spec.k_folds, spec.seed);
  const auto g_signatures = row_signatures(g);

  FoldEnvironment env{spec, options, gateway, executor, route, reference};
  std::vector<Snippet> best;
  for (int fold = 0; fold < spec.k_folds; ++fold) {
    const auto train_rows = plan.training_rows(fold);
    const auto holdout_rows = plan.holdout_rows(fold);
    std::vector<SignatureVector> train_sigs;
    train_sigs.reserve(train_rows.size());
    for (std::size_t r : train_rows) train_sigs.push_back(g_signatures[r]);
    FoldResult fr = run_fold(fold, g.select_rows(train_rows), g.select_rows(holdout_rows), env, train_sigs);
    report.attempts.insert(report.attempts.end(), fr.attempts.begin(), fr.attempts.end());
    if (fr.best) best.push_back(std::move(*fr.best));
  }
  if (best.empty()) return finish_failed("no fold produced a validated snippet");

  // Score every surviving snippet on all of G; Row-alone snippets must clear
  // the gate there before they touch the data.
  std::vector<ValidationOutcome> on_g(best.size());
  parallel_for(best.size(), options.max_parallel_sessions,
               [&](std::size_t i) { on_g[i] = validate_snippet(best[i], g, spec, executor); });
  std::vector<std::size_t> applied;
  for (std::size_t i = 0; i < best.size(); ++i) {
    SnippetRecord rec;
    rec.fold_id = best[i].fold_id;
    rec.iteration = best[i].iteration;
    rec.method = best[i].method;
    rec.validation_accuracy = best[i].validation_accuracy;
    rec.ground_truth_accuracy = on_g[i].accuracy;
    if (best[i].method == Method::RowAlone) {
      rec.applied = on_g[i].accuracy && *on_g[i].accuracy >= spec.accuracy_gate;
    } else {
      rec.applied = best[i].validation_accuracy.value_or(0.0) > 0.0;
    }
    if (!on_g[i].failure.empty()) {
      report.warnings.push_back("fold " + std::to_string(best[i].fold_id) +
                                " snippet failed on ground truth: " + on_g[i].failure);
    }
    if (rec.applied) applied.push_back(i);
    report.snippets.push_back(rec);
  }
  if (applied.empty()) return finish_failed("no snippet passed the application gate");

  if (route.memory_dependent()) {
    report.method_used = Method::MemoryDependent;
  } else {
    const bool any_fewshot = std::any_of(applied.begin(), applied.end(), [&](std::size_t i) {
      return best[i].method == Method::FewShot;
    });
    report.method_used = any_fewshot ? Method::FewShot : Method::RowAlone;
  }

  const auto queries = query_rows(d, spec);
  report.query_rows = queries.size();
  std::vector<SnippetVotes> votes(applied.size());
  std::vector<std::string> failures(applied.size());
  if (!queries.empty()) {
    const auto messages = snippet_inputs(d_tilde, queries, spec);
    parallel_for(applied.size(), options.max_parallel_sessions, [&](std::size_t i) {
      const Snippet& s = best[applied[i]];
      votes[i].fold_id = s.fold_id;
      votes[i].validation_accuracy = s.validation_accuracy.value_or(0.0);
      votes[i].values.assign(queries.size(), std::nullopt);
      try {
        const auto results = executor.run_session(s.source, messages);
        if (results.size() != queries.size()) {
          failures[i] = "result count mismatch";
          return;
        }
        for (std::size_t q = 0; q < results.size(); ++q) {
          votes[i].values[q] = canonical_output(results[q], spec.kind);
        }
      } catch (const SandboxError& e) {
        failures[i] = e.what();
      }
    });
  }
  for (std::size_t i = 0; i < applied.size(); ++i) {
    if (!failures[i].empty()) {
      report.warnings.push_back("fold " + std::to_string(votes[i].fold_id) +
                                " snippet failed on the dataset: " + failures[i]);
    }
  }

  std::map<std::size_t, std::string> values;
  std::size_t abstained = 0;
  if (!queries.empty()) {
    ConsensusResult cr = consensus(votes);
    for (auto& [q, rc] : cr.per_row) values.emplace(q, std::move(rc.value));
    abstained = cr.abstained.size();
  }
  Table output = d;
  report.cells_changed = apply_values(d, spec, queries, values, output);
  report.abstention_rate =
      queries.empty() ? 0.0 : static_cast<double>(abstained) / static_cast<double>(queries.size());
  report.llm_calls = gateway.ledger().total_calls() - calls_before;
  outcome.output = std::move(output);
  return outcome;
}

TaskOutcome run_baseline(const Table& d, const TaskSpec& spec,
                         const std::optional<Table>& annotations, ModelGateway& gateway,
                         const PipelineOptions& options) {
  check_inputs(d, spec, annotations);
  const std::size_t calls_before = gateway.ledger().total_calls();
  TaskOutcome outcome;
  WrangleReport& report = outcome.report;
  report = new_report(d, spec);
  report.mode = "row_wise_baseline";
  report.method_used = Method::RowWiseBaseline;

  const Table g = ground_truth(d, spec, annotations);
  const auto g_sources = ground_truth_sources(d, spec, annotations);
  const auto g_signatures = row_signatures(g);
  const auto queries = query_rows(d, spec);
  report.query_rows = queries.size();

  std::map<std::size_t, std::string> values;
  std::size_t failed = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const std::size_t row = queries[q];
    const std::size_t idx[] = {row};
    const auto query_sig = default_embedder().embed_text(format_rows(d, idx, false));
    std::optional<std::size_t> self;
    if (const auto it = std::find(g_sources.begin(), g_sources.end(), row); it != g_sources.end()) {
      self = static_cast<std::size_t>(it - g_sources.begin());
    }
    const auto similar = nearest_rows(g_signatures, query_sig, spec.fewshot_count, self);
    const PromptBundle bundle =
        build_rowwise_prompt(spec, format_rows(d, idx, true), format_rows(g, similar, true));

    CompletionRequest request;
    request.prompt = bundle.render();
    request.max_output_tokens = options.max_output_tokens;
    request.temperature = options.rowwise_temperature;
    request.tag = "row=" + std::to_string(row);
    try {
      if (auto value = parse_rowwise_answer(gateway.complete(request), spec.kind)) {
        values.emplace(q, std::move(*value));
      }
    } catch (const BackendError&) {
      ++failed;
    }
  }
  if (failed > 0) report.warnings.push_back(std::to_string(failed) + " row calls failed");

  Table output = d;
  report.cells_changed = apply_values(d, spec, queries, values, output);
  report.abstention_rate =
      queries.empty() ? 0.0
                      : static_cast<double>(queries.size() - values.size()) /
                            static_cast<double>(queries.size());
  report.llm_calls = gateway.ledger().total_calls() - calls_before;
  outcome.output = std::move(output);
  return outcome;
}

void score_against_truth(WrangleReport& report, const Table& input, const Table& output,
                         const Table& truth, const TaskSpec& spec) {
  if (truth.row_count() != input.row_count()) {
    throw DataError("truth table has " + std::to_string(truth.row_count()) + " rows, input has " +
                    std::to_string(input.row_count()));
  }
  const std::size_t in_col = input.column_index(spec.target);
  const std::size_t truth_col = truth.column_index(spec.target);
  std::vector<std::optional<std::string>> predicted;
  std::vector<std::optional<std::string>> expected;
  if (spec.kind == TaskKind::Detect) {
    const std::size_t out_col = output.column_index(detect_column_name(spec.target));
    for (std::size_t r = 0; r < input.row_count(); ++r) {
      const auto& dirty = input.cell(r, in_col);
      const auto& clean = truth.cell(r, truth_col);
      const bool same = dirty.has_value() == clean.has_value() &&
                        (!dirty || normalize_value(*dirty) == normalize_value(*clean));
      predicted.push_back(output.cell(r, out_col));
      expected.emplace_back(same ? "No" : "Yes");
    }
  } else {
    const std::size_t out_col = output.column_index(spec.target);
    for (std::size_t r = 0; r < input.row_count(); ++r) {
      const bool null = !input.cell(r, in_col).has_value();
      if ((spec.kind == TaskKind::Impute) != null) continue;
      predicted.push_back(output.cell(r, out_col));
      expected.push_back(truth.cell(r, truth_col));
    }
  }
  if (predicted.empty()) {
    report.accuracy.reset();
    return;
  }
  report.accuracy = compute_accuracy(predicted, expected);
}

}  // namespace wrangle
