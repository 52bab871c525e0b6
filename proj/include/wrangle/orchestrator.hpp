#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wrangle/gateway.hpp"
#include "wrangle/kb.hpp"
#include "wrangle/prompt.hpp"
#include "wrangle/relevance.hpp"
#include "wrangle/sandbox.hpp"
#include "wrangle/table.hpp"
#include "wrangle/task.hpp"

namespace wrangle {

// ---- safety ---------------------------------------------------------------

struct SafetyVerdict {
  bool passed = true;
  std::string reason;  // first offending token when rejected
};

/// Conservative token-level denylist scan of snippet source.
SafetyVerdict safety_scan(std::string_view source);

// ---- sampling ---------------------------------------------------------------

struct KMeansModel {
  int k = 0;
  std::vector<SignatureVector> centroids;
  std::vector<int> assignment;          // point -> cluster
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per Lloyd iteration
};

/// k-means++ seeding followed by Lloyd iterations; stops when the inertia
/// improvement drops to `tolerance` or below.
KMeansModel kmeans(std::span<const SignatureVector> points, int k, std::uint64_t seed,
                   int max_iterations = 50, double tolerance = 1e-6);

/// Signature of every row's serialized form (cells joined by ';').
std::vector<SignatureVector> row_signatures(const Table& table,
                                            const Embedder& embedder = default_embedder());

/// Nearest actual row to each k-means centroid, deduplicated, ascending.
/// All rows when count >= row count.
std::vector<std::size_t> select_diverse_samples(std::span<const SignatureVector> rows, int count,
                                                std::uint64_t seed);
std::vector<std::size_t> select_diverse_samples(const Table& g, int count, std::uint64_t seed);

/// Top `count` rows by cosine to `query`, ties to the smaller index.
/// `exclude` is skipped.
std::vector<std::size_t> nearest_rows(std::span<const SignatureVector> rows,
                                      const SignatureVector& query, int count,
                                      std::optional<std::size_t> exclude);
/// Rows of G most similar to row r (r itself excluded).
std::vector<std::size_t> select_fewshot_examples(std::span<const SignatureVector> rows,
                                                 std::size_t r, int count);
std::vector<std::size_t> select_fewshot_examples(const Table& g, std::size_t r, int count);

// ---- consensus --------------------------------------------------------------

/// One snippet's output over the query rows. std::nullopt marks a failed row;
/// "Unknown" (any case) and empty values are abstentions.
struct SnippetVotes {
  int fold_id = 0;
  double validation_accuracy = 0.0;
  std::vector<std::optional<std::string>> values;
};

struct RowConsensus {
  std::string value;
  int votes = 0;
  std::vector<int> contributing_snippets;  // fold ids that voted for value
};

struct ConsensusResult {
  std::map<std::size_t, RowConsensus> per_row;
  std::set<std::size_t> abstained;
};

bool is_abstention(const std::optional<std::string>& value);

/// Per-row plurality over non-abstaining values. A tie goes to the value of
/// the highest-accuracy snippet among the tied values, then the lowest fold id.
ConsensusResult consensus(std::span<const SnippetVotes> outputs);

// ---- validation and the fold loop -------------------------------------------

/// Fraction of positions whose normalized values are equal. A NULL prediction
/// never matches. Throws DataError on a length mismatch or empty input.
double compute_accuracy(std::span<const std::optional<std::string>> predicted,
                        std::span<const std::optional<std::string>> truth);

struct RouteDecision {
  std::optional<KbMatch> match;
  bool memory_dependent() const noexcept { return match.has_value(); }
};

RouteDecision route_workflow(const Table& d_tilde, const KnowledgeBase& kb, double threshold);

/// Rows handed to a snippet: detect drops the label column; impute and correct
/// send the target as NULL.
std::vector<RowMessage> snippet_inputs(const Table& table, std::span<const std::size_t> rows,
                                       const TaskSpec& spec);

/// Canonical form of a snippet output: trimmed, and for detect mapped onto
/// Yes/No with anything else treated as "Unknown". Failed rows stay nullopt.
std::optional<std::string> canonical_output(const ResultMessage& result, TaskKind kind);

struct ValidationOutcome {
  std::optional<double> accuracy;  // unset when the session could not run
  std::string failure;
  std::vector<std::optional<std::string>> outputs;
};

/// Runs the snippet over every row of `holdout` and scores it against the
/// target (impute/correct) or label (detect) column.
ValidationOutcome validate_snippet(const Snippet& snippet, const Table& holdout,
                                   const TaskSpec& spec, SnippetExecutor& executor);

struct PipelineOptions {
  RelevanceParams relevance;
  double similarity_threshold = kDefaultSimilarityThreshold;
  std::size_t reference_rows = 50;
  std::size_t max_prompt_tokens = 8000;
  double codegen_temperature = 0.2;
  double rowwise_temperature = 0.0;
  int max_output_tokens = 1024;
  std::size_t max_parallel_sessions = 4;
};

/// What happened to one generation attempt.
struct AttemptRecord {
  int fold_id = 0;
  int iteration = 0;
  Method method = Method::RowAlone;
  std::string outcome;  // validated | unparseable | unsafe | backend_error | sandbox_error
  std::optional<double> accuracy;
  std::string detail;
};

struct FoldEnvironment {
  const TaskSpec& spec;
  const PipelineOptions& options;
  ModelGateway& gateway;
  SnippetExecutor& executor;
  const RouteDecision& route;
  std::optional<std::string> reference_sample;  // memory-dependent only
};

struct FoldResult {
  std::optional<Snippet> best;
  std::vector<AttemptRecord> attempts;
};

/// Iterative generation for one fold. `train_signatures` may be empty, in
/// which case they are computed from g_train.
FoldResult run_fold(int fold_id, const Table& g_train, const Table& g_holdout,
                    FoldEnvironment& env, std::span<const SignatureVector> train_signatures = {});

/// Deterministic per-call seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// ---- tasks and reports ------------------------------------------------------

inline constexpr int kReportVersion = 1;

struct SnippetRecord {
  int fold_id = 0;
  int iteration = 0;
  Method method = Method::RowAlone;
  std::optional<double> validation_accuracy;
  std::optional<double> ground_truth_accuracy;
  bool applied = false;
};

struct WrangleReport {
  int report_version = kReportVersion;
  TaskKind task_kind = TaskKind::Impute;
  std::string dataset;
  std::string target;
  std::string mode = "codegen";  // codegen | row_wise_baseline
  std::string status = "ok";     // ok | failed
  std::string failure_reason;
  std::optional<Method> method_used;
  std::vector<std::string> selected_columns;
  std::vector<std::pair<std::string, double>> relevance_ranking;
  std::optional<std::pair<std::string, double>> kb_match;
  std::vector<SnippetRecord> snippets;
  std::vector<AttemptRecord> attempts;
  std::optional<double> accuracy;
  std::size_t llm_calls = 0;
  std::size_t query_rows = 0;
  std::size_t cells_changed = 0;
  double abstention_rate = 0.0;
  std::uint64_t seed = 0;
  int k_folds = 0;
  int max_iterations = 0;
  double accuracy_gate = 0.0;
  std::vector<std::string> warnings;
};

struct TaskOutcome {
  std::optional<Table> output;  // unset when the task failed
  WrangleReport report;
};

/// Column that detection writes its Yes/No labels into.
std::string detect_column_name(std::string_view target);

/// Rows a task writes to: NULL targets (impute), non-NULL targets (correct),
/// every row (detect).
std::vector<std::size_t> query_rows(const Table& d, const TaskSpec& spec);

TaskOutcome run_task(const Table& d, const TaskSpec& spec, const KnowledgeBase& kb,
                     const std::optional<Table>& annotations, ModelGateway& gateway,
                     SnippetExecutor& executor, const PipelineOptions& options = {});

/// One model call per query row.
TaskOutcome run_baseline(const Table& d, const TaskSpec& spec,
                         const std::optional<Table>& annotations, ModelGateway& gateway,
                         const PipelineOptions& options = {});

/// Sets report.accuracy by comparing the output against a clean copy of the
/// input. Impute scores the originally NULL target cells, correct the
/// originally non-NULL ones, detect the Yes/No labels implied by the diff
/// between input and truth. Abstentions count as wrong.
void score_against_truth(WrangleReport& report, const Table& input, const Table& output,
                         const Table& truth, const TaskSpec& spec);

std::string report_to_json(const WrangleReport& report);
WrangleReport report_from_json(std::string_view text);

/// "0.99 (#20)"; "n/a" accuracy when unset.
std::string format_cell(const WrangleReport& report);
/// Two-report comparison row; throws DataError unless both describe the same
/// dataset, target and task.
std::string format_comparison(const WrangleReport& a, const WrangleReport& b);

}  // namespace wrangle
