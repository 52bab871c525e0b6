#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wrangle/table.hpp"
#include "wrangle/task.hpp"

namespace wrangle {

enum class SectionLabel { TaskDescription, FunctionBehavior, ExampleData, ExampleCode, ReferenceTable };

std::string_view to_string(SectionLabel label);

struct PromptBundle {
  TaskKind task_kind = TaskKind::Impute;
  std::vector<std::pair<SectionLabel, std::string>> sections;
  std::size_t token_estimate = 0;

  bool has(SectionLabel label) const;
  const std::string* section(SectionLabel label) const;
  /// Sections as "<Label>:\n<text>" blocks separated by blank lines.
  std::string render() const;
};

/// ceil(characters / 4).
std::size_t estimate_tokens(std::string_view text);

inline constexpr std::string_view kEntryPoint = "transform";

struct Snippet {
  std::string source;
  int fold_id = -1;
  int iteration = 1;
  Method method = Method::RowAlone;
  std::optional<double> validation_accuracy;
};

/// Code-generation prompt. ExampleCode is added when iteration > 1 and
/// best_code is given; ReferenceTable when reference_sample is given.
/// `method` only selects the wording that introduces the example rows.
PromptBundle build_prompt(const TaskSpec& spec, const std::string& example_rows,
                          const Snippet* best_code,
                          const std::optional<std::string>& reference_sample, int iteration,
                          Method method = Method::RowAlone);

/// Row-wise baseline prompt for one query row. `row` is the query row
/// serialized with its header (see format_rows).
PromptBundle build_rowwise_prompt(const TaskSpec& spec, const std::string& row,
                                  const std::string& fewshot_rows);

/// First fenced block that defines `transform`, else the unfenced text from
/// the first `def transform(` line to the end. std::nullopt when neither.
std::optional<std::string> parse_code(std::string_view response);

/// Named template text; throws std::out_of_range for unknown names.
const std::string& prompt_template(std::string_view name);
/// Replaces every {{key}} with its value; unknown placeholders are left as is.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

}  // namespace wrangle
