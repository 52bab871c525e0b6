#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wrangle/task.hpp"

namespace wrangle {

/// A nullable cell. NULL is std::nullopt; the empty string is a real value.
using Cell = std::optional<std::string>;
using Record = std::vector<Cell>;

/// Immutable, column-named grid of nullable string cells.
///
/// Every row has exactly columns().size() cells and column names are unique
/// and non-empty; the constructor throws DataError otherwise. Derived tables
/// are built through the with_* / select_* helpers, which never touch *this.
class Table {
 public:
  Table() = default;
  Table(std::string name, std::vector<std::string> columns, std::vector<Record> rows);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<Record>& rows() const noexcept { return rows_; }
  std::size_t row_count() const noexcept { return rows_.size(); }
  std::size_t column_count() const noexcept { return columns_.size(); }

  std::optional<std::size_t> find_column(std::string_view column) const;
  /// Throws DataError for an unknown column.
  std::size_t column_index(std::string_view column) const;
  bool has_column(std::string_view column) const { return find_column(column).has_value(); }

  const Cell& cell(std::size_t row, std::size_t col) const { return rows_.at(row).at(col); }
  const Cell& cell(std::size_t row, std::string_view column) const {
    return cell(row, column_index(column));
  }
  std::vector<Cell> column_values(std::string_view column) const;

  Table select_rows(std::span<const std::size_t> indices) const;
  Table select_columns(std::span<const std::string> names) const;
  Table with_column_replaced(std::string_view column, std::vector<Cell> values) const;
  Table with_column_appended(std::string column, std::vector<Cell> values) const;
  Table renamed(std::string name) const;

  friend bool operator==(const Table&, const Table&) = default;

 private:
  std::string name_;
  std::vector<std::string> columns_;
  std::vector<Record> rows_;
};

std::set<std::string> default_null_tokens();

struct CsvOptions {
  /// Auto-detected among ',', ';' and '\t' from the header line when unset.
  std::optional<char> delimiter;
  std::set<std::string> null_tokens = default_null_tokens();
};

/// Loads a CSV file with a header row. Unquoted cells whose trimmed text is a
/// null token become NULL; quoted cells are always literal values.
Table load_table(const std::filesystem::path& path, const CsvOptions& options = {});
Table parse_table(std::string_view text, std::string name, const CsvOptions& options = {});

/// Serializes with RFC-4180 quoting. Non-null cells that would read back as
/// NULL are quoted so that parse_table(to_csv(t)) == t.
std::string to_csv(const Table& table, char delimiter = ',');
void write_table(const Table& table, const std::filesystem::path& path, char delimiter = ',');

/// Splits CSV text into records of raw fields (no null-token handling).
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text, char delimiter);

char detect_delimiter(std::string_view first_line);

enum class ColumnKind { Numeric, Categorical, Text, Datetime };
std::string_view to_string(ColumnKind kind);

struct ColumnProfile {
  std::string name;
  ColumnKind inferred_kind = ColumnKind::Text;
  double null_fraction = 0.0;
  std::size_t distinct_count = 0;
};

std::vector<ColumnProfile> profile_columns(const Table& table);

/// Parses a trimmed decimal number; std::nullopt when the text is not one.
std::optional<double> parse_number(std::string_view text);
/// ISO-8601 date/datetime as seconds since epoch, or HH:MM[:SS] as minutes
/// since midnight.
std::optional<double> parse_datetime(std::string_view text);

/// Name of the label column that ground_truth adds for detection tasks.
inline constexpr std::string_view kLabelColumn = "label";
/// Columns of an annotations table for detection tasks.
inline constexpr std::string_view kAnnotationRowColumn = "row_id";

/// Builds the ground-truth table G.
///
/// Impute/correct: the rows whose target cell is non-NULL. Detect: one row per
/// annotation (columns row_id, label in {Yes, No}) holding the referenced
/// input row plus a trailing `label` column.
Table ground_truth(const Table& table, const TaskSpec& spec,
                   const std::optional<Table>& annotations);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;  // row index -> fold id

  std::vector<std::size_t> holdout_rows(int fold) const;
  std::vector<std::size_t> training_rows(int fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

FoldPlan make_folds(const Table& g, int k, std::uint64_t seed);

/// Prompt serialization: one line per row, cells joined by ';', NULL as empty,
/// cells containing ';', '"' or a newline wrapped in double quotes.
std::string format_rows(const Table& table, std::span<const std::size_t> row_indices,
                        bool include_header);

/// Whitespace-trimmed copy.
std::string trim(std::string_view text);
/// Trim, ASCII case-fold, and collapse internal whitespace runs to one space.
std::string normalize_value(std::string_view text);

}  // namespace wrangle
