#include "wrangle/prompt.hpp"

#include <algorithm>
#include <regex>
#include <stdexcept>

namespace wrangle {
namespace detail {
// Generated from resources/prompts at configure time.
const std::map<std::string, std::string, std::less<>>& template_registry();
}  // namespace detail

const std::string& prompt_template(std::string_view name) {
  const auto& registry = detail::template_registry();
  auto it = registry.find(name);
  if (it == registry.end()) throw std::out_of_range("no prompt template '" + std::string(name) + "'");
  return it->second;
}

namespace {

constexpr SectionLabel kOrder[] = {SectionLabel::TaskDescription, SectionLabel::FunctionBehavior,
                                   SectionLabel::ExampleData, SectionLabel::ExampleCode,
                                   SectionLabel::ReferenceTable};

void finish(PromptBundle& bundle) {
  std::stable_sort(bundle.sections.begin(), bundle.sections.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  bundle.token_estimate = estimate_tokens(bundle.render());
}

std::string codegen_template(TaskKind kind) {
  switch (kind) {
    case TaskKind::Impute: return "codegen_task_impute";
    case TaskKind::Detect: return "codegen_task_detect";
    case TaskKind::Correct: return "codegen_task_correct";
  }
  return "codegen_task_impute";
}

std::string rowwise_template(TaskKind kind) {
  switch (kind) {
    case TaskKind::Impute: return "rowwise_task_impute";
    case TaskKind::Detect: return "rowwise_task_detect";
    case TaskKind::Correct: return "rowwise_task_correct";
  }
  return "rowwise_task_impute";
}

}  // namespace

std::string_view to_string(SectionLabel label) {
  switch (label) {
    case SectionLabel::TaskDescription: return "Task Description";
    case SectionLabel::FunctionBehavior: return "Function Behavior";
    case SectionLabel::ExampleData: return "Example Data";
    case SectionLabel::ExampleCode: return "Example Code";
    case SectionLabel::ReferenceTable: return "Reference Table";
  }
  return "";
}

bool PromptBundle::has(SectionLabel label) const { return section(label) != nullptr; }

const std::string* PromptBundle::section(SectionLabel label) const {
  for (const auto& [l, text] : sections) {
    if (l == label) return &text;
  }
  return nullptr;
}

std::string PromptBundle::render() const {
  std::string out;
  for (const auto& label : kOrder) {
    const std::string* text = section(label);
    if (!text) continue;
    if (!out.empty()) out += "\n\n";
    out += to_string(label);
    out += ":\n";
    out += *text;
  }
  return out;
}

std::size_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const std::size_t close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string key(text.substr(open + 2, close - open - 2));
    if (auto it = values.find(key); it != values.end()) {
      out += it->second;
    } else {
      out.append(text.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

PromptBundle build_prompt(const TaskSpec& spec, const std::string& example_rows,
                          const Snippet* best_code,
                          const std::optional<std::string>& reference_sample, int iteration,
                          Method method) {
  const std::map<std::string, std::string> vars{{"target", spec.target}};
  PromptBundle bundle;
  bundle.task_kind = spec.kind;
  bundle.sections.emplace_back(SectionLabel::TaskDescription,
                               render_template(prompt_template(codegen_template(spec.kind)), vars));
  bundle.sections.emplace_back(
      SectionLabel::FunctionBehavior,
      render_template(prompt_template(spec.kind == TaskKind::Detect ? "codegen_behavior_detect"
                                                                    : "codegen_behavior"),
                      vars));

  std::string data_template = "example_data";
  if (method == Method::RowAlone) data_template = "example_data_row_alone";
  if (method == Method::FewShot) data_template = "example_data_few_shot";
  bundle.sections.emplace_back(SectionLabel::ExampleData,
                               render_template(prompt_template(data_template), {{"rows", example_rows}}));

  if (iteration > 1 && best_code != nullptr) {
    bundle.sections.emplace_back(
        SectionLabel::ExampleCode,
        render_template(prompt_template("example_code"), {{"code", best_code->source}}));
  }
  if (reference_sample) {
    bundle.sections.emplace_back(
        SectionLabel::ReferenceTable,
        render_template(prompt_template("reference_table"), {{"reference", *reference_sample}}));
  }
  finish(bundle);
  return bundle;
}

PromptBundle build_rowwise_prompt(const TaskSpec& spec, const std::string& row,
                                  const std::string& fewshot_rows) {
  PromptBundle bundle;
  bundle.task_kind = spec.kind;
  bundle.sections.emplace_back(
      SectionLabel::TaskDescription,
      render_template(prompt_template(rowwise_template(spec.kind)),
                      {{"target", spec.target}, {"row", row}}));
  bundle.sections.emplace_back(
      SectionLabel::FunctionBehavior,
      render_template(prompt_template(spec.kind == TaskKind::Detect ? "rowwise_behavior_detect"
                                                                    : "rowwise_behavior"),
                      {{"target", spec.target}}));
  if (!fewshot_rows.empty()) {
    bundle.sections.emplace_back(
        SectionLabel::ExampleData,
        render_template(prompt_template("rowwise_examples"), {{"rows", fewshot_rows}}));
  }
  finish(bundle);
  return bundle;
}

std::optional<std::string> parse_code(std::string_view response) {
  static const std::regex defines_transform(R"((^|\n)[ \t]*def[ \t]+transform[ \t]*\()");

  // Fenced blocks: an opening ``` line (optionally with a language tag) up to
  // the next line that starts with ```.
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = response.find("```", pos);
    if (open == std::string_view::npos) break;
    if (open != 0 && response[open - 1] != '\n') {
      pos = open + 3;
      continue;
    }
    const std::size_t body = response.find('\n', open);
    if (body == std::string_view::npos) break;
    std::size_t close = body;
    bool closed = false;
    while (true) {
      close = response.find("```", close + 1);
      if (close == std::string_view::npos) break;
      if (response[close - 1] == '\n') {
        closed = true;
        break;
      }
    }
    if (!closed) break;
    // Content excludes the newline that precedes the closing fence.
    const std::size_t begin = body + 1;
    const std::size_t end = close > begin ? close - 1 : begin;
    const std::string block(response.substr(begin, end - begin));
    if (std::regex_search(block, defines_transform)) return block;
    pos = close + 3;
  }

  std::match_results<std::string_view::const_iterator> m;
  if (std::regex_search(response.begin(), response.end(), m, defines_transform)) {
    std::size_t start = static_cast<std::size_t>(m.position(0));
    if (response[start] == '\n') ++start;
    return std::string(response.substr(start));
  }
  return std::nullopt;
}

}  // namespace wrangle
