#include <fstream>
#include <sstream>

#include "wrangle/errors.hpp"
#include "wrangle/table.hpp"

namespace wrangle {
namespace {

struct Field {
  std::string text;
  bool quoted = false;
};

struct RawRecord {
  std::vector<Field> fields;
  std::size_t line = 0;  // 1-based physical line where the record starts
};

// RFC-4180 record splitter. Accepts LF and CRLF line endings; a quote only
// opens a quoted field at the start of the field.
std::vector<RawRecord> split_records(std::string_view text, char delimiter) {
  std::vector<RawRecord> records;
  RawRecord current;
  Field field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  current.line = 1;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field = Field{};
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = RawRecord{};
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.text.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      in_quotes = true;
      field.quoted = true;
      field_started = true;
    } else if (ch == delimiter) {
      end_field();
    } else if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      continue;
    } else if (ch == '\n') {
      end_record();
      ++line;
      current.line = line;
    } else {
      field.text.push_back(ch);
      field_started = true;
    }
  }
  if (in_quotes) {
    throw DataError("unterminated quoted field starting near line " + std::to_string(current.line));
  }
  if (field_started || !current.fields.empty() || !field.text.empty()) end_record();
  return records;
}

bool is_blank(const RawRecord& rec) {
  return rec.fields.size() == 1 && !rec.fields[0].quoted && trim(rec.fields[0].text).empty();
}

}  // namespace

std::set<std::string> default_null_tokens() { return {"", "NA", "N/A", "null", "NaN"}; }

char detect_delimiter(std::string_view first_line) {
  std::size_t counts[3] = {0, 0, 0};
  constexpr char candidates[3] = {',', ';', '\t'};
  bool in_quotes = false;
  for (char ch : first_line) {
    if (ch == '"') in_quotes = !in_quotes;
    if (in_quotes) continue;
    for (int c = 0; c < 3; ++c) {
      if (ch == candidates[c]) ++counts[c];
    }
  }
  int best = 0;
  for (int c = 1; c < 3; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return candidates[best];
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text, char delimiter) {
  std::vector<std::vector<std::string>> out;
  for (auto& rec : split_records(text, delimiter)) {
    std::vector<std::string> fields;
    fields.reserve(rec.fields.size());
    for (auto& f : rec.fields) fields.push_back(std::move(f.text));
    out.push_back(std::move(fields));
  }
  return out;
}

Table parse_table(std::string_view text, std::string name, const CsvOptions& options) {
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
  const char delimiter =
      options.delimiter.value_or(detect_delimiter(text.substr(0, text.find('\n'))));
  auto records = split_records(text, delimiter);
  if (records.empty()) throw DataError(name + ": missing header row");
  // Trailing blank lines are padding, except in a single-column table where a
  // blank line is a NULL cell.
  if (records.front().fields.size() > 1) {
    while (records.size() > 1 && is_blank(records.back())) records.pop_back();
  }

  std::vector<std::string> columns;
  for (const auto& f : records.front().fields) columns.push_back(trim(f.text));

  std::vector<Record> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != columns.size()) {
      throw DataError(name + ": line " + std::to_string(rec.line) + " has " +
                      std::to_string(rec.fields.size()) + " cells, header has " +
                      std::to_string(columns.size()));
    }
    Record row;
    row.reserve(columns.size());
    for (const auto& f : rec.fields) {
      if (!f.quoted && options.null_tokens.contains(trim(f.text))) {
        row.emplace_back(std::nullopt);
      } else {
        row.emplace_back(f.text);
      }
    }
    rows.push_back(std::move(row));
  }
  return Table(std::move(name), std::move(columns), std::move(rows));
}

Table load_table(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw DataError("read error on '" + path.string() + "'");
  return parse_table(buffer.str(), path.stem().string(), options);
}

namespace {

bool needs_quotes(std::string_view cell, char delimiter) {
  if (cell.find_first_of("\"\r\n") != std::string_view::npos) return true;
  if (cell.find(delimiter) != std::string_view::npos) return true;
  return false;
}

void append_quoted(std::string& out, std::string_view cell) {
  out.push_back('"');
  for (char ch : cell) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
}

}  // namespace

std::string to_csv(const Table& table, char delimiter) {
  const auto null_tokens = default_null_tokens();
  std::string out;
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    if (c > 0) out.push_back(delimiter);
    const auto& name = table.columns()[c];
    if (needs_quotes(name, delimiter)) {
      append_quoted(out, name);
    } else {
      out += name;
    }
  }
  out.push_back('\n');
  for (const auto& row : table.rows()) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out.push_back(delimiter);
      if (!row[c]) continue;
      const std::string& cell = *row[c];
      if (needs_quotes(cell, delimiter) || null_tokens.contains(trim(cell))) {
        append_quoted(out, cell);
      } else {
        out += cell;
      }
    }
    out.push_back('\n');
  }
  return out;
}

void write_table(const Table& table, const std::filesystem::path& path, char delimiter) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << to_csv(table, delimiter);
  if (!out) throw DataError("write error on '" + path.string() + "'");
}

std::string format_rows(const Table& table, std::span<const std::size_t> row_indices,
                        bool include_header) {
  auto append_cell = [](std::string& out, std::string_view cell) {
    if (cell.find_first_of(";\"\n") != std::string_view::npos) {
      append_quoted(out, cell);
    } else {
      out += cell;
    }
  };
  std::string out;
  bool first_line = true;
  auto start_line = [&] {
    if (!first_line) out.push_back('\n');
    first_line = false;
  };
  if (include_header) {
    start_line();
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      if (c > 0) out.push_back(';');
      append_cell(out, table.columns()[c]);
    }
  }
  for (std::size_t r : row_indices) {
    start_line();
    const auto& row = table.rows().at(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out.push_back(';');
      if (row[c]) append_cell(out, *row[c]);
    }
  }
  return out;
}

}  // namespace wrangle
