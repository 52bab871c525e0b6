#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace wrangle {

enum class TaskKind { Impute, Detect, Correct };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

/// How a snippet was produced. RowWiseBaseline only appears in reports.
enum class Method { RowAlone, FewShot, MemoryDependent, RowWiseBaseline };

std::string_view to_string(Method method);

struct TaskSpec {
  TaskKind kind = TaskKind::Impute;
  std::string target;
  int k_folds = 5;
  int max_iterations = 3;  // per method leg
  double accuracy_gate = 0.9;
  int n_example_rows = 10;
  int fewshot_count = 5;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a knob is out of range.
  void validate() const;
};

/// Model abstention sentinel returned by snippets.
inline constexpr std::string_view kUnknown = "Unknown";

}  // namespace wrangle
