#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "wrangle/errors.hpp"
#include "wrangle/table.hpp"

using namespace wrangle;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("wrangle_test_" + name);
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

Table small_table() {
  return Table("t", {"a", "b"}, {{"1", "x"}, {"2", std::nullopt}, {"3", "z"}});
}

}  // namespace

TEST_SUITE("table") {
  TEST_CASE("constructor enforces the shape invariants") {
    CHECK_THROWS_AS(Table("t", {"a", "a"}, {}), DataError);
    CHECK_THROWS_AS(Table("t", {"a", ""}, {}), DataError);
    CHECK_THROWS_AS(Table("t", {"a", "b"}, {{"1"}}), DataError);
    const Table t = small_table();
    CHECK(t.row_count() == 3);
    CHECK(t.column_index("b") == 1);
    CHECK_THROWS_AS(t.column_index("missing"), DataError);
  }

  TEST_CASE("derived tables leave the source untouched") {
    const Table t = small_table();
    const Table copy = t;
    const std::size_t rows[] = {2, 0};
    const Table picked = t.select_rows(rows);
    CHECK(picked.row_count() == 2);
    CHECK(*picked.cell(0, "a") == "3");
    const Table replaced = t.with_column_replaced("b", {"p", "q", "r"});
    CHECK(*replaced.cell(1, "b") == "q");
    const Table appended = t.with_column_appended("c", {std::nullopt, "k", std::nullopt});
    CHECK(appended.column_count() == 3);
    CHECK(t == copy);
    CHECK_THROWS_AS(t.with_column_appended("a", {"1", "2", "3"}), DataError);
  }
}

TEST_SUITE("csv") {
  TEST_CASE("semicolon file with an empty cell reads it as NULL") {
    const Table t = parse_table("a;b\n1;\n2;x", "t");
    CHECK(t.row_count() == 2);
    CHECK_FALSE(t.cell(0, "b").has_value());
    CHECK(*t.cell(1, "b") == "x");
  }

  TEST_CASE("duplicate header is rejected") {
    CHECK_THROWS_AS(parse_table("a,a\n1,2\n", "t"), DataError);
  }

  TEST_CASE("null tokens match after trimming, case-sensitively") {
    const Table t = parse_table("v\n NA \nna\nN/A\nnull\nNaN\n\" \"\n\"NA\"\nx\n", "t");
    REQUIRE(t.row_count() == 8);
    CHECK_FALSE(t.cell(0, 0).has_value());
    CHECK(*t.cell(1, 0) == "na");
    CHECK_FALSE(t.cell(2, 0).has_value());
    CHECK_FALSE(t.cell(3, 0).has_value());
    CHECK_FALSE(t.cell(4, 0).has_value());
    CHECK(*t.cell(5, 0) == " ");  // quoted cells are literal
    CHECK(*t.cell(6, 0) == "NA");
    CHECK(*t.cell(7, 0) == "x");
  }

  TEST_CASE("\"Unknown\" is an ordinary value on load") {
    const Table t = parse_table("v\nUnknown\n", "t");
    CHECK(*t.cell(0, 0) == "Unknown");
  }

  TEST_CASE("RFC 4180 quoting: embedded delimiter, quote and newline") {
    const Table t = parse_table("a,b\n\"x,y\",\"say \"\"hi\"\"\"\n\"line1\nline2\",z\n", "t");
    REQUIRE(t.row_count() == 2);
    CHECK(*t.cell(0, "a") == "x,y");
    CHECK(*t.cell(0, "b") == "say \"hi\"");
    CHECK(*t.cell(1, "a") == "line1\nline2");
  }

  TEST_CASE("CRLF line endings") {
    const Table t = parse_table("a,b\r\n1,2\r\n3,4\r\n", "t");
    CHECK(t.row_count() == 2);
    CHECK(*t.cell(1, "b") == "4");
  }

  TEST_CASE("ragged row names its 1-based line") {
    try {
      parse_table("a,b\n1,2\n3\n", "t");
      FAIL("expected a DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }

  TEST_CASE("delimiter detection by first-line majority") {
    CHECK(detect_delimiter("a,b,c") == ',');
    CHECK(detect_delimiter("a;b;c") == ';');
    CHECK(detect_delimiter("a\tb\tc") == '\t');
    CHECK(detect_delimiter("a;b,c;d") == ';');
    CHECK(detect_delimiter("single") == ',');
    CHECK(detect_delimiter("a,b;c") == ',');  // tie
  }

  TEST_CASE("unreadable file is an error") {
    CHECK_THROWS_AS(load_table("/nonexistent/definitely/missing.csv"), DataError);
  }

  TEST_CASE("1000-row stores file: row count agrees with an independent line count") {
    const auto f = fixtures::stores_fixture();
    const auto path = temp_file("stores.csv", to_csv(f.data));
    std::ifstream in(path);
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);) ++lines;
    const Table loaded = load_table(path);
    CHECK(lines == 1001);
    CHECK(loaded.row_count() == lines - 1);
    CHECK(loaded.name() == "wrangle_test_stores");
    CHECK(profile_columns(loaded).size() == 5);
    std::filesystem::remove(path);
  }

  TEST_CASE("round trip: parse(to_csv(t)) == t for random tables") {
    const std::vector<std::string> pieces = {"a", "", " ", "NA", "null", "x,y", "q\"t", "l1\nl2",
                                             "semi;colon", "tab\there", "Unknown", "  pad  "};
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      std::mt19937_64 rng(seed);
      const std::size_t cols = 1 + rng() % 5;
      const std::size_t rows = rng() % 20;
      std::vector<std::string> names;
      for (std::size_t c = 0; c < cols; ++c) names.push_back("c" + std::to_string(c));
      std::vector<Record> records;
      for (std::size_t r = 0; r < rows; ++r) {
        Record rec;
        for (std::size_t c = 0; c < cols; ++c) {
          const auto k = rng() % (pieces.size() + 1);
          rec.push_back(k == pieces.size() ? Cell{} : Cell{pieces[k]});
        }
        records.push_back(std::move(rec));
      }
      const Table t("rt", names, records);
      for (char delim : {',', ';', '\t'}) {
        CsvOptions opts;
        opts.delimiter = delim;
        CHECK(parse_table(to_csv(t, delim), "rt", opts) == t);
      }
      const auto path = temp_file("rt.csv", "");
      write_table(t, path);
      CHECK(load_table(path).rows() == t.rows());
      std::filesystem::remove(path);
    }
  }
}

TEST_SUITE("profile") {
  TEST_CASE("numeric column") {
    const Table t("t", {"n"}, {{"1"}, {"2"}, {"3"}});
    const auto p = profile_columns(t).front();
    CHECK(p.inferred_kind == ColumnKind::Numeric);
    CHECK(p.null_fraction == 0.0);
    CHECK(p.distinct_count == 3);
  }

  TEST_CASE("HH:MM column with a NULL") {
    const Table t("t", {"time"}, {{"00:00"}, {"09:30"}, {std::nullopt}});
    const auto p = profile_columns(t).front();
    CHECK(p.inferred_kind == ColumnKind::Datetime);
    CHECK(p.null_fraction == 1.0 / 3.0);
  }

  TEST_CASE("1000 distinct UUID-like strings are text") {
    std::mt19937_64 rng(1);
    std::vector<Record> rows;
    std::set<std::string> seen;
    const char* hex = "0123456789abcdef";
    while (rows.size() < 1000) {
      std::string id;
      for (int i = 0; i < 32; ++i) {
        if (i == 8 || i == 12 || i == 16 || i == 20) id += '-';
        id += hex[rng() % 16];
      }
      if (seen.insert(id).second) rows.push_back({id});
    }
    const auto p = profile_columns(Table("t", {"uuid"}, rows)).front();
    CHECK(p.distinct_count == 1000);
    CHECK(p.inferred_kind == ColumnKind::Text);
  }

  TEST_CASE("low-cardinality strings are categorical") {
    std::vector<Record> rows;
    for (int i = 0; i < 100; ++i) rows.push_back({i % 3 == 0 ? "red" : "blue"});
    CHECK(profile_columns(Table("t", {"c"}, rows)).front().inferred_kind == ColumnKind::Categorical);
  }

  TEST_CASE("empty table is an error") {
    CHECK_THROWS_AS(profile_columns(Table("t", {"a"}, {})), DataError);
  }

  TEST_CASE("profiles ignore row order") {
    const auto f = fixtures::stores_fixture(300, 20, 3);
    std::vector<std::size_t> order(f.data.row_count());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(9);
    std::shuffle(order.begin(), order.end(), rng);
    const auto a = profile_columns(f.data);
    const auto b = profile_columns(f.data.select_rows(order));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].inferred_kind == b[i].inferred_kind);
      CHECK(a[i].null_fraction == b[i].null_fraction);
      CHECK(a[i].distinct_count == b[i].distinct_count);
    }
  }

  TEST_CASE("value parsers") {
    CHECK(parse_number(" 3.5 ") == 3.5);
    CHECK(parse_number("-1e3") == -1000.0);
    CHECK_FALSE(parse_number("12abc").has_value());
    CHECK(parse_datetime("09:30") == 570.0);
    CHECK(parse_datetime("1970-01-02") == 86400.0);
    CHECK(parse_datetime("1970-01-01T00:01:00") == 60.0);
    CHECK_FALSE(parse_datetime("25:99").has_value());
  }
}

TEST_SUITE("ground_truth") {
  TEST_CASE("impute keeps the non-NULL target rows") {
    const auto f = fixtures::stores_fixture(1000, 50);
    TaskSpec spec;
    spec.target = std::string(fixtures::kStoresTarget);
    CHECK(ground_truth(f.data, spec, std::nullopt).row_count() == 950);
    spec.kind = TaskKind::Correct;
    CHECK(ground_truth(f.data, spec, std::nullopt).row_count() == 950);
  }

  TEST_CASE("all-NULL target gives an empty G, which is an error") {
    TaskSpec spec;
    spec.target = "b";
    CHECK_THROWS_AS(ground_truth(Table("t", {"a", "b"}, {{"1", std::nullopt}}), spec, std::nullopt),
                    DataError);
  }

  TEST_CASE("detect joins 40 annotations to their rows") {
    const auto f = fixtures::stores_fixture(100, 0);
    std::vector<Record> ann;
    for (int i = 0; i < 40; ++i) ann.push_back({std::to_string(i * 2), i < 22 ? "Yes" : "No"});
    TaskSpec spec;
    spec.kind = TaskKind::Detect;
    spec.target = std::string(fixtures::kStoresTarget);
    const Table g = ground_truth(f.data, spec, Table("ann", {"row_id", "label"}, ann));
    REQUIRE(g.row_count() == 40);
    CHECK(g.columns().back() == "label");
    std::size_t yes = 0;
    for (const auto& c : g.column_values("label")) yes += *c == "Yes";
    CHECK(yes == 22);
    CHECK(*g.cell(5, "Store ID") == *f.data.cell(10, "Store ID"));
  }

  TEST_CASE("detect contract violations") {
    const Table t("t", {"a"}, {{"1"}, {"2"}});
    TaskSpec spec;
    spec.kind = TaskKind::Detect;
    spec.target = "a";
    CHECK_THROWS_AS(ground_truth(t, spec, std::nullopt), DataError);
    CHECK_THROWS_AS(ground_truth(t, spec, Table("ann", {"row_id", "label"}, {{"0", "maybe"}})), DataError);
    CHECK_THROWS_AS(ground_truth(t, spec, Table("ann", {"row_id", "label"}, {{"5", "Yes"}})), DataError);
    CHECK_THROWS_AS(ground_truth(t, spec, Table("ann", {"row_id", "label"}, {{"0", "Yes"}, {"0", "No"}})),
                    DataError);
  }
}

TEST_SUITE("folds") {
  Table rows_table(std::size_t n) {
    std::vector<Record> rows(n, Record{"x"});
    return Table("g", {"a"}, rows);
  }

  TEST_CASE("10 rows into 5 folds of 2") {
    const auto plan = make_folds(rows_table(10), 5, 7);
    CHECK(plan.fold_sizes() == std::vector<std::size_t>{2, 2, 2, 2, 2});
  }

  TEST_CASE("11 rows into folds of sizes {3,2,2,2,2}") {
    auto sizes = make_folds(rows_table(11), 5, 7).fold_sizes();
    std::sort(sizes.rbegin(), sizes.rend());
    CHECK(sizes == std::vector<std::size_t>{3, 2, 2, 2, 2});
  }

  TEST_CASE("deterministic per seed") {
    CHECK(make_folds(rows_table(37), 4, 99).assignments == make_folds(rows_table(37), 4, 99).assignments);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(make_folds(rows_table(10), 1, 0), ConfigError);
    CHECK_THROWS_AS(make_folds(rows_table(3), 5, 0), DataError);
  }

  TEST_CASE("property: exact partition with near-equal fold sizes") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      std::mt19937_64 rng(seed);
      const int k = 2 + static_cast<int>(rng() % 9);
      const std::size_t n = static_cast<std::size_t>(k) + rng() % 200;
      const auto plan = make_folds(rows_table(n), k, seed);
      std::vector<std::size_t> all;
      for (int f = 0; f < k; ++f) {
        const auto hold = plan.holdout_rows(f);
        const auto train = plan.training_rows(f);
        CHECK(hold.size() + train.size() == n);
        all.insert(all.end(), hold.begin(), hold.end());
        const double ideal = static_cast<double>(n) / k;
        CHECK(std::abs(static_cast<double>(hold.size()) - ideal) < 1.0);
      }
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expect(n);
      std::iota(expect.begin(), expect.end(), std::size_t{0});
      CHECK(all == expect);
    }
  }
}

TEST_SUITE("format_rows") {
  TEST_CASE("semicolons, NULL as empty, no trailing newline") {
    const Table t("t", {"h1", "h2"}, {{"a", "b"}, {"c", std::nullopt}});
    const std::size_t idx[] = {0, 1};
    CHECK(format_rows(t, idx, false) == "a;b\nc;");
    CHECK(format_rows(t, idx, true) == "h1;h2\na;b\nc;");
  }

  TEST_CASE("header only for an empty selection") {
    const Table t("t", {"h1", "h2"}, {{"a", "b"}});
    CHECK(format_rows(t, std::span<const std::size_t>{}, true) == "h1;h2");
  }

  TEST_CASE("quoted cells survive a parse of the formatted text") {
    const Table t("t", {"x", "y"}, {{"p;q", "say \"hi\""}, {"multi\nline", "plain"}});
    const std::size_t idx[] = {0, 1};
    const std::string text = format_rows(t, idx, true);
    CsvOptions opts;
    opts.delimiter = ';';
    CHECK(parse_table(text, "t", opts).rows() == t.rows());
  }

  TEST_CASE("property: line count is rows plus header") {
    const auto f = fixtures::stores_fixture(200, 10, 4);
    for (std::size_t n : {0, 1, 7, 200}) {
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (bool header : {false, true}) {
        const std::string text = format_rows(f.data, idx, header);
        const std::size_t lines = text.empty() ? 0 : 1 + std::count(text.begin(), text.end(), '\n');
        CHECK(lines == n + (header ? 1 : 0));
      }
    }
  }

  TEST_CASE("normalize_value") {
    CHECK(normalize_value("  Ab \t  C ") == "ab c");
    CHECK(normalize_value("ab ") == normalize_value("AB"));
  }
}
