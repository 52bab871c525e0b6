#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "wrangle/errors.hpp"
#include "wrangle/table.hpp"

namespace wrangle {
namespace {

constexpr double kKindThreshold = 0.95;

bool parse_uint(std::string_view text, int& out) {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

bool all_digits(std::string_view text) {
  return !text.empty() &&
         std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// "HH:MM" or "HH:MM:SS"; returns seconds since midnight.
std::optional<int> parse_clock(std::string_view text) {
  if (text.size() != 5 && text.size() < 8) return std::nullopt;
  if (text[2] != ':') return std::nullopt;
  int h = 0;
  int m = 0;
  int s = 0;
  if (!all_digits(text.substr(0, 2)) || !all_digits(text.substr(3, 2))) return std::nullopt;
  parse_uint(text.substr(0, 2), h);
  parse_uint(text.substr(3, 2), m);
  std::string_view rest = text.substr(5);
  if (!rest.empty()) {
    if (rest[0] != ':' || !all_digits(rest.substr(1, 2))) return std::nullopt;
    parse_uint(rest.substr(1, 2), s);
    rest.remove_prefix(3);
    if (!rest.empty()) {
      // fractional seconds
      if (rest[0] != '.' || !all_digits(rest.substr(1))) return std::nullopt;
    }
  }
  if (h > 24 || m > 59 || s > 60 || (h == 24 && (m != 0 || s != 0))) return std::nullopt;
  return h * 3600 + m * 60 + s;
}

}  // namespace

std::optional<double> parse_number(std::string_view text) {
  std::string t = trim(text);
  std::string_view v = t;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  if (v.empty()) return std::nullopt;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    return std::nullopt;
  }
  return out;
}

std::optional<double> parse_datetime(std::string_view text) {
  std::string t = trim(text);
  std::string_view v = t;
  if (auto clock = parse_clock(v)) return *clock / 60.0;

  if (v.size() < 10 || v[4] != '-' || v[7] != '-') return std::nullopt;
  int y = 0;
  int mo = 0;
  int d = 0;
  if (!all_digits(v.substr(0, 4)) || !all_digits(v.substr(5, 2)) || !all_digits(v.substr(8, 2))) {
    return std::nullopt;
  }
  parse_uint(v.substr(0, 4), y);
  parse_uint(v.substr(5, 2), mo);
  parse_uint(v.substr(8, 2), d);
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  double seconds = static_cast<double>(
      std::chrono::sys_seconds{std::chrono::sys_days{ymd}}.time_since_epoch().count());
  v.remove_prefix(10);
  if (v.empty()) return seconds;
  if (v[0] != 'T' && v[0] != ' ') return std::nullopt;
  v.remove_prefix(1);

  double offset = 0.0;
  if (!v.empty() && v.back() == 'Z') {
    v.remove_suffix(1);
  } else if (v.size() > 6 && (v[v.size() - 6] == '+' || v[v.size() - 6] == '-')) {
    auto tz = parse_clock(v.substr(v.size() - 5));
    if (!tz) return std::nullopt;
    offset = (v[v.size() - 6] == '+' ? 1.0 : -1.0) * *tz;
    v.remove_suffix(6);
  }
  auto clock = parse_clock(v);
  if (!clock) return std::nullopt;
  return seconds + *clock - offset;
}

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric: return "numeric";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Text: return "text";
    case ColumnKind::Datetime: return "datetime";
  }
  return "text";
}

std::vector<ColumnProfile> profile_columns(const Table& table) {
  if (table.row_count() == 0) {
    throw DataError("cannot profile empty table '" + table.name() + "'");
  }
  const std::size_t rows = table.row_count();
  const double categorical_cap = std::max(20.0, 0.05 * static_cast<double>(rows));
  std::vector<ColumnProfile> out;
  out.reserve(table.column_count());
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    std::size_t nulls = 0;
    std::size_t numeric = 0;
    std::size_t datetime = 0;
    std::unordered_set<std::string_view> distinct;
    for (const auto& row : table.rows()) {
      const auto& cell = row[c];
      if (!cell) {
        ++nulls;
        continue;
      }
      distinct.insert(*cell);
      if (parse_number(*cell)) {
        ++numeric;
      } else if (parse_datetime(*cell)) {
        ++datetime;
      }
    }
    const std::size_t present = rows - nulls;
    ColumnProfile p;
    p.name = table.columns()[c];
    p.null_fraction = static_cast<double>(nulls) / static_cast<double>(rows);
    p.distinct_count = distinct.size();
    const double n = static_cast<double>(present);
    if (present > 0 && static_cast<double>(numeric) >= kKindThreshold * n) {
      p.inferred_kind = ColumnKind::Numeric;
    } else if (present > 0 && static_cast<double>(datetime) >= kKindThreshold * n) {
      p.inferred_kind = ColumnKind::Datetime;
    } else if (static_cast<double>(p.distinct_count) <= categorical_cap) {
      p.inferred_kind = ColumnKind::Categorical;
    } else {
      p.inferred_kind = ColumnKind::Text;
    }
    out.push_back(std::move(p));
  }
  return out;
}

Table ground_truth(const Table& table, const TaskSpec& spec,
                   const std::optional<Table>& annotations) {
  const std::size_t target = table.column_index(spec.target);
  if (spec.kind != TaskKind::Detect) {
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < table.row_count(); ++r) {
      if (table.cell(r, target)) keep.push_back(r);
    }
    if (keep.empty()) {
      throw DataError("ground truth is empty: target '" + spec.target + "' is entirely NULL");
    }
    return table.select_rows(keep).renamed(table.name() + ".ground_truth");
  }

  if (!annotations) throw DataError("detection task requires an annotations table");
  if (table.has_column(kLabelColumn)) {
    throw DataError("input table already has a column named '" + std::string(kLabelColumn) + "'");
  }
  const std::size_t id_col = annotations->column_index(kAnnotationRowColumn);
  const std::size_t label_col = annotations->column_index(kLabelColumn);
  std::vector<Record> rows;
  std::unordered_set<std::size_t> seen;
  for (std::size_t a = 0; a < annotations->row_count(); ++a) {
    const auto& id_cell = annotations->cell(a, id_col);
    const auto& label_cell = annotations->cell(a, label_col);
    const auto line = std::to_string(a + 2);
    int id = -1;
    if (!id_cell || !parse_uint(trim(*id_cell), id) || id < 0 ||
        static_cast<std::size_t>(id) >= table.row_count()) {
      throw DataError("annotation line " + line + ": row_id out of range");
    }
    const std::string label = label_cell ? trim(*label_cell) : std::string();
    if (label != "Yes" && label != "No") {
      throw DataError("annotation line " + line + ": label '" + label +
                      "' is not one of Yes/No");
    }
    if (!seen.insert(static_cast<std::size_t>(id)).second) {
      throw DataError("annotation line " + line + ": duplicate row_id " + std::to_string(id));
    }
    Record row = table.rows()[static_cast<std::size_t>(id)];
    row.emplace_back(label);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("ground truth is empty: no annotations");
  auto columns = table.columns();
  columns.emplace_back(kLabelColumn);
  return Table(table.name() + ".ground_truth", std::move(columns), std::move(rows));
}

FoldPlan make_folds(const Table& g, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  if (g.row_count() < static_cast<std::size_t>(k)) {
    throw DataError("cannot split " + std::to_string(g.row_count()) + " rows into " +
                    std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(g.row_count());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(g.row_count(), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    plan.assignments[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  return plan;
}

std::vector<std::size_t> FoldPlan::holdout_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < assignments.size(); ++r) {
    if (assignments[r] == fold) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::training_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < assignments.size(); ++r) {
    if (assignments[r] != fold) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(std::max(k, 0)), 0);
  for (int f : assignments) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

}  // namespace wrangle
