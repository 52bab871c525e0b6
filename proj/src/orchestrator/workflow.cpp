#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "wrangle/errors.hpp"
#include "wrangle/orchestrator.hpp"

namespace wrangle {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string attempt_tag(int fold_id, int iteration, Method method) {
  std::ostringstream os;
  os << "fold=" << fold_id << "/iter=" << iteration << "/" << to_string(method);
  return os.str();
}

std::vector<std::size_t> example_indices(Method leg, std::span<const SignatureVector> sigs,
                                         const TaskSpec& spec, std::uint64_t seed) {
  const std::size_t n = sigs.size();
  if (n == 0) return {};
  std::mt19937_64 rng(seed);
  switch (leg) {
    case Method::RowAlone:
      return select_diverse_samples(sigs, spec.n_example_rows, seed);
    case Method::FewShot: {
      const std::size_t r = static_cast<std::size_t>(rng() % n);
      std::vector<std::size_t> out{r};
      const auto similar = select_fewshot_examples(sigs, r, spec.fewshot_count);
      out.insert(out.end(), similar.begin(), similar.end());
      return out;
    }
    case Method::MemoryDependent:
    case Method::RowWiseBaseline: {
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), std::size_t{0});
      // Partial Fisher-Yates with the portable engine output.
      const std::size_t take = std::min<std::size_t>(n, static_cast<std::size_t>(spec.n_example_rows));
      for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
        std::swap(all[i], all[j]);
      }
      all.resize(take);
      std::sort(all.begin(), all.end());
      return all;
    }
  }
  return {};
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  return splitmix64(h ^ c);
}

RouteDecision route_workflow(const Table& d_tilde, const KnowledgeBase& kb, double threshold) {
  return RouteDecision{retrieve_reference(d_tilde, kb, threshold)};
}

std::vector<RowMessage> snippet_inputs(const Table& table, std::span<const std::size_t> rows,
                                       const TaskSpec& spec) {
  if (spec.kind == TaskKind::Detect) {
    if (!table.has_column(kLabelColumn)) return make_row_messages(table, rows, std::nullopt);
    std::vector<std::string> keep;
    for (const auto& c : table.columns()) {
      if (c != kLabelColumn) keep.push_back(c);
    }
    return make_row_messages(table.select_columns(keep), rows, std::nullopt);
  }
  return make_row_messages(table, rows, spec.target);
}

std::optional<std::string> canonical_output(const ResultMessage& result, TaskKind kind) {
  if (!result.ok()) return std::nullopt;
  std::string value = trim(*result.value);
  if (kind == TaskKind::Detect) {
    const std::string norm = normalize_value(value);
    if (norm == "yes") return std::string("Yes");
    if (norm == "no") return std::string("No");
    return std::string(kUnknown);
  }
  return value;
}

ValidationOutcome validate_snippet(const Snippet& snippet, const Table& holdout,
                                   const TaskSpec& spec, SnippetExecutor& executor) {
  ValidationOutcome out;
  if (holdout.row_count() == 0) {
    out.failure = "no rows to validate on";
    return out;
  }
  std::vector<std::size_t> rows(holdout.row_count());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const auto messages = snippet_inputs(holdout, rows, spec);

  std::vector<ResultMessage> results;
  try {
    results = executor.run_session(snippet.source, messages);
  } catch (const SandboxError& e) {
    out.failure = e.what();
    return out;
  }
  if (results.size() != rows.size()) {
    out.failure = "executor returned " + std::to_string(results.size()) + " results for " +
                  std::to_string(rows.size()) + " rows";
    return out;
  }

  const std::string truth_column = spec.kind == TaskKind::Detect ? std::string(kLabelColumn) : spec.target;
  const auto truth = holdout.column_values(truth_column);
  std::vector<std::optional<std::string>> scored;
  out.outputs.reserve(results.size());
  for (const auto& r : results) {
    auto value = canonical_output(r, spec.kind);
    scored.push_back(is_abstention(value) ? std::nullopt : value);
    out.outputs.push_back(std::move(value));
  }
  out.accuracy = compute_accuracy(scored, truth);
  return out;
}

FoldResult run_fold(int fold_id, const Table& g_train, const Table& g_holdout, FoldEnvironment& env,
                    std::span<const SignatureVector> train_signatures) {
  const TaskSpec& spec = env.spec;
  std::vector<SignatureVector> computed;
  if (train_signatures.empty() && g_train.row_count() > 0) {
    computed = row_signatures(g_train);
    train_signatures = computed;
  }
  if (train_signatures.size() != g_train.row_count()) {
    throw DataError("run_fold: signature count does not match training rows");
  }

  const std::vector<Method> legs = env.route.memory_dependent()
                                       ? std::vector<Method>{Method::MemoryDependent}
                                       : std::vector<Method>{Method::RowAlone, Method::FewShot};
  FoldResult result;
  int iteration = 0;
  for (const Method leg : legs) {
    for (int j = 0; j < spec.max_iterations; ++j) {
      ++iteration;
      AttemptRecord attempt;
      attempt.fold_id = fold_id;
      attempt.iteration = iteration;
      attempt.method = leg;

      const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(fold_id),
                                             static_cast<std::uint64_t>(iteration),
                                             static_cast<std::uint64_t>(leg));
      auto examples = example_indices(leg, train_signatures, spec, seed);
      const Snippet* best_code = result.best ? &*result.best : nullptr;
      PromptBundle bundle;
      // Halve the example rows until the prompt fits the budget.
      while (true) {
        bundle = build_prompt(spec, format_rows(g_train, examples, true), best_code,
                              env.reference_sample, iteration, leg);
        if (bundle.token_estimate <= env.options.max_prompt_tokens || examples.size() <= 1) break;
        examples.resize((examples.size() + 1) / 2);
        attempt.detail = "examples trimmed to " + std::to_string(examples.size()) + " rows";
      }

      CompletionRequest request;
      request.prompt = bundle.render();
      request.max_output_tokens = env.options.max_output_tokens;
      request.temperature = env.options.codegen_temperature;
      request.tag = attempt_tag(fold_id, iteration, leg);

      std::string response;
      try {
        response = env.gateway.complete(request);
      } catch (const BackendError& e) {
        attempt.outcome = "backend_error";
        attempt.detail = e.what();
        result.attempts.push_back(std::move(attempt));
        continue;
      }
      auto code = parse_code(response);
      if (!code) {
        attempt.outcome = "unparseable";
        result.attempts.push_back(std::move(attempt));
        continue;
      }
      const SafetyVerdict verdict = safety_scan(*code);
      if (!verdict.passed) {
        attempt.outcome = "unsafe";
        attempt.detail = verdict.reason;
        result.attempts.push_back(std::move(attempt));
        continue;
      }

      Snippet snippet;
      snippet.source = std::move(*code);
      snippet.fold_id = fold_id;
      snippet.iteration = iteration;
      snippet.method = leg;
      const ValidationOutcome validation = validate_snippet(snippet, g_holdout, spec, env.executor);
      if (!validation.accuracy) {
        attempt.outcome = "sandbox_error";
        attempt.detail = validation.failure;
        result.attempts.push_back(std::move(attempt));
        continue;
      }
      snippet.validation_accuracy = validation.accuracy;
      attempt.outcome = "validated";
      attempt.accuracy = validation.accuracy;
      result.attempts.push_back(std::move(attempt));

      if (!result.best || *snippet.validation_accuracy > *result.best->validation_accuracy) {
        result.best = std::move(snippet);
      }
      if (*result.best->validation_accuracy >= spec.accuracy_gate) return result;
    }
  }
  return result;
}

}  // namespace wrangle
