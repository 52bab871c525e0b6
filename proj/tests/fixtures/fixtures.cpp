#include "fixtures.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace wrangle::fixtures {
namespace {

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<std::size_t> sample_rows(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) std::swap(all[i], all[i + pick(rng, n - i)]);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

std::string padded(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

const std::array<std::pair<const char*, const char*>, 10> kCountries = {{
    {"Germany", "DE"},
    {"France", "FR"},
    {"Spain", "ES"},
    {"Italy", "IT"},
    {"Japan", "JP"},
    {"Brazil", "BR"},
    {"Canada", "CA"},
    {"India", "IN"},
    {"Kenya", "KE"},
    {"Norway", "NO"},
}};

const std::array<std::pair<const char*, const char*>, 24> kCities = {{
    {"Austin", "Texas"},        {"Dallas", "Texas"},         {"Houston", "Texas"},
    {"San Diego", "California"}, {"Fresno", "California"},    {"Oakland", "California"},
    {"Buffalo", "New York"},    {"Albany", "New York"},      {"Rochester", "New York"},
    {"Tampa", "Florida"},       {"Orlando", "Florida"},      {"Miami", "Florida"},
    {"Boise", "Idaho"},         {"Spokane", "Washington"},   {"Tacoma", "Washington"},
    {"Eugene", "Oregon"},       {"Salem", "Oregon"},         {"Reno", "Nevada"},
    {"Tucson", "Arizona"},      {"Mesa", "Arizona"},         {"Toledo", "Ohio"},
    {"Akron", "Ohio"},          {"Madison", "Wisconsin"},    {"Provo", "Utah"},
}};

const std::string& cell_of(const RowMap& row, const std::string& column) {
  const auto it = row.find(column);
  if (it == row.end() || !it->second) throw std::runtime_error("missing column " + column);
  return *it->second;
}

}  // namespace

const std::string kOpen24Snippet =
    "def transform(row):\n"
    "    # rule: open-24h\n"
    "    if row.get(\"Opening Time\") == \"00:00\" and row.get(\"Closing Time\") == \"00:00\":\n"
    "        return \"True\"\n"
    "    return \"False\"";

const std::string kOpen24Response = as_reply(kOpen24Snippet);

const std::string kCountryCodeSnippet =
    "CODES = {\"Germany\": \"DE\", \"France\": \"FR\", \"Spain\": \"ES\", \"Italy\": \"IT\",\n"
    "         \"Japan\": \"JP\", \"Brazil\": \"BR\", \"Canada\": \"CA\", \"India\": \"IN\",\n"
    "         \"Kenya\": \"KE\", \"Norway\": \"NO\"}\n"
    "\n"
    "def transform(row):\n"
    "    # rule: country-code\n"
    "    return CODES.get(row.get(\"Country\"), \"Unknown\")";

const std::string kCityStateSnippet = [] {
  std::string s = "STATES = {\n";
  for (const auto& [city, state] : kCities) {
    s += "    \"" + std::string(city) + "\": \"" + state + "\",\n";
  }
  s +=
      "}\n"
      "\n"
      "def transform(row):\n"
      "    # rule: city-state\n"
      "    return STATES.get(row.get(\"City\"), \"Unknown\")";
  return s;
}();

std::string as_reply(std::string_view source) {
  return "Here is the function:\n```python\n" + std::string(source) + "\n```\n";
}

StoresFixture stores_fixture(std::size_t rows, std::size_t nulls, std::uint64_t seed) {
  static const std::array<const char*, 8> cities = {"Lyon", "Porto", "Graz", "Turin",
                                                    "Ghent", "Malmo", "Split", "Brno"};
  static const std::array<const char*, 5> early = {"06:00", "07:00", "08:00", "09:00", "10:00"};
  static const std::array<const char*, 7> late = {"17:00", "18:00", "19:00", "20:00",
                                                  "21:00", "22:00", "23:00"};
  static const std::array<const char*, 3> afternoon = {"14:00", "15:00", "16:00"};
  std::mt19937_64 rng(seed);
  std::vector<Record> records;
  for (std::size_t r = 0; r < rows; ++r) {
    const double u = unit(rng);
    std::string open;
    std::string close;
    if (u < 0.25) {
      open = "00:00";
      close = "00:00";
    } else if (u < 0.40) {
      open = "00:00";
      close = afternoon[pick(rng, afternoon.size())];
    } else if (u < 0.55) {
      open = early[pick(rng, early.size())];
      close = "00:00";
    } else {
      open = early[pick(rng, early.size())];
      close = late[pick(rng, late.size())];
    }
    const std::string flag = open == "00:00" && close == "00:00" ? "True" : "False";
    records.push_back(Record{"S" + padded(r + 1, 4), std::string(cities[pick(rng, cities.size())]),
                             open, close, flag});
  }
  std::vector<std::string> columns{"Store ID", "City", "Opening Time", "Closing Time",
                                   std::string(kStoresTarget)};
  StoresFixture f{Table("stores", columns, records), Table("stores", columns, records), {}};
  f.masked_rows = sample_rows(rng, rows, nulls);
  for (std::size_t r : f.masked_rows) records[r][4] = std::nullopt;
  f.data = Table("stores", columns, std::move(records));
  return f;
}

std::string open24_rule(const RowMap& row) {
  return cell_of(row, "Opening Time") == "00:00" && cell_of(row, "Closing Time") == "00:00" ? "True"
                                                                                            : "False";
}

Table label_copy_fixture(std::size_t rows, std::size_t features, std::size_t copy_index,
                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> columns;
  std::vector<std::size_t> cardinality;
  for (std::size_t f = 0; f < features; ++f) {
    columns.push_back("f" + padded(f, 2));
    cardinality.push_back(3 + pick(rng, 6));
  }
  columns.emplace_back("target");
  std::vector<Record> records;
  records.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    Record rec;
    for (std::size_t f = 0; f < features; ++f) {
      rec.emplace_back("v" + std::to_string(pick(rng, cardinality[f])));
    }
    rec.push_back(rec[copy_index]);
    records.push_back(std::move(rec));
  }
  return Table("label_copy", std::move(columns), std::move(records));
}

Table three_pattern_fixture(std::size_t copies) {
  static const std::array<Record, 3> patterns = {{
      {"alice.smith@example.com", "email", "contact address"},
      {"+1 (555) 010-9988", "phone", "call between 9 and 5"},
      {"2021-03-04T10:15:00", "timestamp", "recorded at"},
  }};
  std::vector<Record> records;
  for (std::size_t c = 0; c < copies; ++c) {
    for (const auto& p : patterns) records.push_back(p);
  }
  return Table("three_patterns", {"value", "kind", "note"}, std::move(records));
}

int pattern_of(const Table& table, std::size_t row) {
  const auto& kind = *table.cell(row, "kind");
  if (kind == "email") return 0;
  if (kind == "phone") return 1;
  if (kind == "timestamp") return 2;
  return -1;
}

CorruptionFixture corruption_fixture(std::size_t rows, std::size_t corrupted, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Record> clean;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& [country, code] = kCountries[pick(rng, kCountries.size())];
    const std::size_t cents = 500 + pick(rng, 99500);
    clean.push_back(Record{"O" + padded(r + 1, 5), std::string(country),
                           std::to_string(cents / 100) + "." + padded(cents % 100, 2),
                           std::string(code)});
  }
  std::vector<std::string> columns{"Order ID", "Country", "Amount", std::string(kCorruptionTarget)};
  CorruptionFixture f{Table("orders", columns, clean), Table("orders", columns, clean), {}};
  f.corrupted_rows = sample_rows(rng, rows, corrupted);
  auto dirty = clean;
  for (std::size_t r : f.corrupted_rows) {
    const std::string& right = *dirty[r][3];
    std::string wrong = right;
    while (wrong == right) wrong = kCountries[pick(rng, kCountries.size())].second;
    dirty[r][3] = wrong;
  }
  f.dirty = Table("orders", columns, std::move(dirty));
  return f;
}

std::optional<std::string> country_code_rule(const RowMap& row) {
  const auto& country = cell_of(row, "Country");
  for (const auto& [name, code] : kCountries) {
    if (country == name) return std::string(code);
  }
  return std::nullopt;
}

Table city_state_reference() {
  std::vector<Record> records;
  for (const auto& [city, state] : kCities) records.push_back(Record{std::string(city), std::string(state)});
  return Table("city_state", {"City", "State"}, std::move(records));
}

Table customers_fixture(std::size_t rows, std::size_t nulls, std::uint64_t seed) {
  static const std::array<const char*, 3> segments = {"retail", "wholesale", "online"};
  std::mt19937_64 rng(seed);
  std::vector<Record> records;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& [city, state] = kCities[r < kCities.size() ? r : pick(rng, kCities.size())];
    records.push_back(Record{"C" + padded(r + 1, 4), std::string(segments[pick(rng, segments.size())]),
                             std::string(city), std::string(state)});
  }
  for (std::size_t r : sample_rows(rng, rows, nulls)) records[r][3] = std::nullopt;
  return Table("customers", {"Customer", "Segment", "City", "State"}, std::move(records));
}

std::optional<std::string> city_state_rule(const RowMap& row) {
  const auto& city = cell_of(row, "City");
  for (const auto& [name, state] : kCities) {
    if (city == name) return std::string(state);
  }
  return std::nullopt;
}

void register_behaviors(StubExecutor& executor) {
  executor.add_behavior("rule: open-24h", [](const RowMap& row) { return std::optional(open24_rule(row)); });
  executor.add_behavior("rule: country-code", country_code_rule);
  executor.add_behavior("rule: city-state", city_state_rule);
}

std::optional<RowMap> rowwise_query(std::string_view prompt) {
  const std::string_view marker = "Task Description:\n";
  const auto start = prompt.find(marker);
  if (start == std::string_view::npos) return std::nullopt;
  std::istringstream lines(std::string(prompt.substr(start + marker.size())));
  std::string instruction;
  std::string header;
  std::string row;
  if (!std::getline(lines, instruction) || !std::getline(lines, header) || !std::getline(lines, row)) {
    return std::nullopt;
  }
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ';')) out.push_back(cell);
    if (!line.empty() && line.back() == ';') out.emplace_back();
    return out;
  };
  const auto names = split(header);
  const auto cells = split(row);
  if (names.size() != cells.size()) return std::nullopt;
  RowMap out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    out.emplace(names[i], cells[i].empty() ? Cell{} : Cell{cells[i]});
  }
  return out;
}

}  // namespace wrangle::fixtures
