#include "wrangle/table.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>
#include <utility>

#include "wrangle/errors.hpp"

namespace wrangle {

Table::Table(std::string name, std::vector<std::string> columns, std::vector<Record> rows)
    : name_(std::move(name)), columns_(std::move(columns)), rows_(std::move(rows)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& column : columns_) {
    if (column.empty()) throw DataError("table '" + name_ + "': empty column name");
    if (!seen.insert(column).second) {
      throw DataError("table '" + name_ + "': duplicate column name '" + column + "'");
    }
  }
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != columns_.size()) {
      throw DataError("table '" + name_ + "': row " + std::to_string(r) + " has " +
                      std::to_string(rows_[r].size()) + " cells, expected " +
                      std::to_string(columns_.size()));
    }
  }
}

std::optional<std::size_t> Table::find_column(std::string_view column) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == column) return i;
  }
  return std::nullopt;
}

std::size_t Table::column_index(std::string_view column) const {
  if (auto idx = find_column(column)) return *idx;
  throw DataError("table '" + name_ + "': no column named '" + std::string(column) + "'");
}

std::vector<Cell> Table::column_values(std::string_view column) const {
  const std::size_t c = column_index(column);
  std::vector<Cell> out;
  out.reserve(rows_.size());
  for (const auto& row : rows_) out.push_back(row[c]);
  return out;
}

Table Table::select_rows(std::span<const std::size_t> indices) const {
  std::vector<Record> rows;
  rows.reserve(indices.size());
  for (std::size_t i : indices) rows.push_back(rows_.at(i));
  return Table(name_, columns_, std::move(rows));
}

Table Table::select_columns(std::span<const std::string> names) const {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) idx.push_back(column_index(n));
  std::vector<Record> rows;
  rows.reserve(rows_.size());
  for (const auto& row : rows_) {
    Record out;
    out.reserve(idx.size());
    for (std::size_t c : idx) out.push_back(row[c]);
    rows.push_back(std::move(out));
  }
  return Table(name_, std::vector<std::string>(names.begin(), names.end()), std::move(rows));
}

Table Table::with_column_replaced(std::string_view column, std::vector<Cell> values) const {
  const std::size_t c = column_index(column);
  if (values.size() != rows_.size()) {
    throw DataError("replacement column '" + std::string(column) + "' has wrong length");
  }
  auto rows = rows_;
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r][c] = std::move(values[r]);
  return Table(name_, columns_, std::move(rows));
}

Table Table::with_column_appended(std::string column, std::vector<Cell> values) const {
  if (values.size() != rows_.size()) {
    throw DataError("appended column '" + column + "' has wrong length");
  }
  auto columns = columns_;
  columns.push_back(std::move(column));
  auto rows = rows_;
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r].push_back(std::move(values[r]));
  return Table(name_, std::move(columns), std::move(rows));
}

Table Table::renamed(std::string name) const { return Table(std::move(name), columns_, rows_); }

std::string trim(std::string_view text) {
  auto is_space = [](unsigned char ch) { return std::isspace(ch) != 0; };
  std::size_t b = 0;
  std::size_t e = text.size();
  while (b < e && is_space(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(text[e - 1]))) --e;
  return std::string(text.substr(b, e - b));
}

std::string normalize_value(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char ch : text) {
    const auto uch = static_cast<unsigned char>(ch);
    if (std::isspace(uch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(uch)));
  }
  return out;
}

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Impute: return "impute";
    case TaskKind::Detect: return "detect";
    case TaskKind::Correct: return "correct";
  }
  return "impute";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "impute") return TaskKind::Impute;
  if (text == "detect") return TaskKind::Detect;
  if (text == "correct") return TaskKind::Correct;
  throw ConfigError("unknown task kind '" + std::string(text) + "' (impute|detect|correct)");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::RowAlone: return "row_alone";
    case Method::FewShot: return "few_shot";
    case Method::MemoryDependent: return "memory_dependent";
    case Method::RowWiseBaseline: return "row_wise_baseline";
  }
  return "row_alone";
}

void TaskSpec::validate() const {
  if (target.empty()) throw ConfigError("task target column is empty");
  if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(accuracy_gate > 0.0 && accuracy_gate <= 1.0)) {
    throw ConfigError("accuracy_gate must lie in (0, 1]");
  }
  if (n_example_rows < 1) throw ConfigError("n_example_rows must be >= 1");
  if (fewshot_count < 1) throw ConfigError("fewshot_count must be >= 1");
}

}  // namespace wrangle
