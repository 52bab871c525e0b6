#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "wrangle/errors.hpp"
#include "wrangle/kb.hpp"

using namespace wrangle;
namespace fs = std::filesystem;

namespace {

// Reference embedding written from the description alone: padded character
// trigrams, FNV-1a hashed, sign from the top bit, L2-normalized.
std::uint64_t ref_fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<double> ref_embed(const std::string& name, std::vector<std::string> samples,
                              std::size_t dims = kSignatureDims) {
  std::map<std::uint64_t, double> tf;
  auto add = [&](const std::string& text) {
    const std::string p = "\x02" + text + "\x03";
    for (std::size_t i = 0; i + 3 <= p.size(); ++i) tf[ref_fnv(p.substr(i, 3))] += 1;
  };
  std::string lower = name;
  for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (!lower.empty()) add(lower);
  std::sort(samples.begin(), samples.end());
  samples.erase(std::unique(samples.begin(), samples.end()), samples.end());
  std::sort(samples.begin(), samples.end(),
            [](const auto& a, const auto& b) { return std::pair(ref_fnv(a), a) < std::pair(ref_fnv(b), b); });
  if (samples.size() > 20) samples.resize(20);
  for (const auto& s : samples) add(s);
  std::vector<double> v(dims, 0.0);
  for (const auto& [h, n] : tf) v[h % dims] += ((h >> 63) ? -1.0 : 1.0) * n;
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm > 0) {
    for (double& x : v) x /= std::sqrt(norm);
  }
  return v;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("wrangle_kb_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

Table prices_table() {
  std::vector<Record> recs;
  for (int i = 0; i < 40; ++i) {
    recs.push_back({"SKU-" + std::to_string(1000 + i), std::to_string(3 + i * 7 % 50) + ".99"});
  }
  return Table("prices", {"Product", "Price"}, recs);
}

Table random_table(std::mt19937_64& rng, std::size_t cols, std::size_t rows) {
  static const char* alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  auto word = [&](std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % 36]);
    return s;
  };
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cols; ++c) names.push_back(word(6) + std::to_string(c));
  std::vector<Record> recs;
  for (std::size_t r = 0; r < rows; ++r) {
    Record rec;
    for (std::size_t c = 0; c < cols; ++c) rec.emplace_back(word(4 + rng() % 8));
    recs.push_back(std::move(rec));
  }
  return Table("rand", names, recs);
}

}  // namespace

TEST_SUITE("embedding") {
  TEST_CASE("FNV-1a published vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
  }

  TEST_CASE("signatures match the reference embedding") {
    const std::vector<std::pair<std::string, std::vector<std::string>>> cases = {
        {"City", {"Boston", "Austin", "Denver", "Boston"}},
        {"", {"x"}},
        {"Amount", {}},
        {"Zip Code", [] {
           std::vector<std::string> v;
           for (int i = 0; i < 60; ++i) v.push_back(std::to_string(10000 + i * 37));
           return v;
         }()},
    };
    for (const auto& [name, samples] : cases) {
      const auto sig = embed_column(name, samples);
      const auto ref = ref_embed(name, samples);
      REQUIRE(sig.dims() == ref.size());
      for (std::size_t i = 0; i < ref.size(); ++i) CHECK(sig.values[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("city names versus prices") {
    const std::vector<std::string> cities = {"Paris", "Lyon", "Marseille", "Toulouse", "Nice",
                                             "Nantes", "Strasbourg", "Bordeaux", "Lille", "Rennes"};
    const std::vector<std::string> prices = {"3.50", "12.00", "0.99", "149.95", "7.25",
                                             "18.40", "2.10", "64.00", "5.55", "23.75"};
    CHECK(cosine(embed_column("city", cities), embed_column("price", prices)) < 0.3);
    const std::vector<std::string> two = {"Paris", "Lyon"};
    CHECK(cosine(embed_column("city", two), embed_column("city", two)) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("empty input gives the zero vector") {
    const auto sig = embed_column("", {});
    CHECK(sig.is_zero());
    CHECK(cosine(sig, sig) == 0.0);
    CHECK(default_embedder().embed_text("").is_zero());
  }

  TEST_CASE("embedding is deterministic and order independent") {
    std::vector<std::string> s = {"red", "green", "blue", "cyan", "magenta"};
    const auto a = embed_column("Color", s);
    std::reverse(s.begin(), s.end());
    CHECK(embed_column("Color", s) == a);
    CHECK(embed_column("COLOR", s) == a);
    CHECK(cosine(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("cosine of mismatched dimensions is zero") {
    const TrigramEmbedder small(16);
    CHECK(cosine(small.embed_text("abc"), default_embedder().embed_text("abc")) == 0.0);
  }
}

TEST_SUITE("kb") {
  TEST_CASE("ingest reads every csv with descriptions from the manifest") {
    const auto dir = fresh_dir("three");
    write(dir / "cities.csv", "City,State\nBoston,MA\nAustin,TX\n");
    write(dir / "prices.csv", "Product,Price\nA,1\nB,2\n");
    write(dir / "codes.csv", "Country,Code\nFrance,FR\n");
    write(dir / "manifest.json", R"({"cities": "US cities"})");
    write(dir / "notes.txt", "ignored");
    const auto kb = ingest_kb(dir);
    REQUIRE(kb.entries.size() == 3);
    CHECK(kb.entries[0].id == "cities");
    CHECK(kb.entries[0].description == "US cities");
    CHECK(kb.entries[1].id == "codes");
    CHECK(kb.entries[2].id == "prices");
    CHECK(kb.warnings.empty());
    for (const auto& e : kb.entries) CHECK(e.column_signatures.size() == e.table.column_count());
  }

  TEST_CASE("empty directory gives an empty knowledge base") {
    const auto kb = ingest_kb(fresh_dir("empty"));
    CHECK(kb.empty());
    CHECK(kb.warnings.empty());
  }

  TEST_CASE("malformed files are skipped with a warning") {
    const auto dir = fresh_dir("malformed");
    write(dir / "a.csv", "x,y\n1,2\n");
    write(dir / "b.csv", "x,y\n1,2\n");
    write(dir / "broken.csv", "x,y\n1,2,3\n4\n");
    const auto kb = ingest_kb(dir);
    CHECK(kb.entries.size() == 2);
    REQUIRE(kb.warnings.size() == 1);
    CHECK(kb.warnings[0].find("broken.csv") != std::string::npos);
  }

  TEST_CASE("missing directory is an error") {
    CHECK_THROWS_AS(ingest_kb(fs::temp_directory_path() / "wrangle_kb_does_not_exist"),
                    DataError);
  }

  TEST_CASE("a verbatim copy scores at least 0.99 and self-scores 1") {
    const Table c = fixtures::customers_fixture();
    KnowledgeBase kb;
    kb.entries.push_back(make_kb_entry("copy", c));
    const auto m = best_reference(c, kb);
    REQUIRE(m);
    CHECK(m->score >= 0.99);
    CHECK(std::abs(m->score - 1.0) <= 1e-6);
    for (const auto& col : c.columns()) CHECK(m->column_alignment.at(col) == col);
  }

  TEST_CASE("city lookup versus an unrelated price table") {
    const Table cities = fixtures::city_state_reference();
    KnowledgeBase kb;
    kb.entries.push_back(make_kb_entry("prices", prices_table()));
    const auto m = best_reference(cities, kb);
    REQUIRE(m);
    CHECK(m->score < kDefaultSimilarityThreshold);
    CHECK_FALSE(retrieve_reference(cities, kb, kDefaultSimilarityThreshold));
  }

  TEST_CASE("random unrelated tables stay below the threshold") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      KnowledgeBase kb;
      kb.entries.push_back(make_kb_entry("r", random_table(rng, 3, 30)));
      const auto q = random_table(rng, 2, 30);
      CHECK_FALSE(retrieve_reference(q, kb, kDefaultSimilarityThreshold));
    }
  }

  TEST_CASE("threshold is strict and validated") {
    const Table c = fixtures::city_state_reference();
    KnowledgeBase kb;
    kb.entries.push_back(make_kb_entry("self", c));
    const auto best = best_reference(c, kb);
    REQUIRE(best);
    CHECK_FALSE(retrieve_reference(c, kb, best->score));
    CHECK(retrieve_reference(c, kb, std::nextafter(best->score, 0.0)));
    CHECK_THROWS_AS(retrieve_reference(c, kb, 1.5), ConfigError);
    CHECK_THROWS_AS(retrieve_reference(c, kb, -0.1), ConfigError);
    CHECK_FALSE(retrieve_reference(c, KnowledgeBase{}, 0.0));
  }

  TEST_CASE("ties go to the smaller id") {
    const Table c = fixtures::city_state_reference();
    KnowledgeBase kb;
    kb.entries.push_back(make_kb_entry("b", c));
    kb.entries.push_back(make_kb_entry("a", c));
    const auto m = best_reference(c, kb);
    REQUIRE(m);
    CHECK(m->entry_id == "a");
  }

  TEST_CASE("scores ignore column and row order") {
    const Table c = fixtures::customers_fixture();
    const Table ref = fixtures::city_state_reference();
    KnowledgeBase kb;
    kb.entries.push_back(make_kb_entry("ref", ref));
    const std::vector<std::string> cols = {"City", "State"};
    const Table q = c.select_columns(cols);
    const double base = best_reference(q, kb)->score;

    const std::vector<std::string> swapped = {"State", "City"};
    CHECK(std::abs(best_reference(c.select_columns(swapped), kb)->score - base) <= 1e-12);

    std::vector<std::size_t> perm(q.row_count());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
    CHECK(std::abs(best_reference(q.select_rows(perm), kb)->score - base) <= 1e-12);

    KnowledgeBase shuffled;
    shuffled.entries.push_back(make_kb_entry("ref", ref.select_columns(swapped)));
    CHECK(std::abs(best_reference(q, shuffled)->score - base) <= 1e-12);
  }
}
