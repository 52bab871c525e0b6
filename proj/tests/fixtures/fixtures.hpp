#pragma once

// Deterministic synthetic datasets with known generating rules, plus the
// snippet sources and stub behaviours that implement those rules.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wrangle/sandbox.hpp"
#include "wrangle/table.hpp"

namespace wrangle::fixtures {

// Stores with an "Open 24h" flag that is "True" exactly when both opening and
// closing time are 00:00. Some non-24h stores open or close at midnight, so
// both time columns are needed.
struct StoresFixture {
  Table data;   // target NULL on the masked rows
  Table truth;  // complete
  std::vector<std::size_t> masked_rows;
};
inline constexpr std::string_view kStoresTarget = "Open 24h";
StoresFixture stores_fixture(std::size_t rows = 1000, std::size_t nulls = 50, std::uint64_t seed = 7);
std::string open24_rule(const RowMap& row);
extern const std::string kOpen24Snippet;
extern const std::string kOpen24Response;  // model-style reply wrapping the snippet

// `features` categorical columns f00..; the target "label" copies column
// `copy_index`, the others are independent noise.
Table label_copy_fixture(std::size_t rows, std::size_t features, std::size_t copy_index,
                         std::uint64_t seed);

// Three row patterns (email / phone / date shaped), each repeated `copies`
// times. pattern_of reports which pattern a row came from.
Table three_pattern_fixture(std::size_t copies = 100);
int pattern_of(const Table& table, std::size_t row);

// Orders with a "Country Code" derived from "Country"; `corrupted` codes are
// replaced by wrong ones in the dirty copy.
struct CorruptionFixture {
  Table dirty;
  Table clean;
  std::vector<std::size_t> corrupted_rows;
};
inline constexpr std::string_view kCorruptionTarget = "Country Code";
CorruptionFixture corruption_fixture(std::size_t rows = 1000, std::size_t corrupted = 30,
                                     std::uint64_t seed = 11);
std::optional<std::string> country_code_rule(const RowMap& row);
extern const std::string kCountryCodeSnippet;

// Customer table whose "State" follows from "City", and a KB table holding
// the city -> state mapping.
Table city_state_reference();
Table customers_fixture(std::size_t rows = 200, std::size_t nulls = 20, std::uint64_t seed = 5);
std::optional<std::string> city_state_rule(const RowMap& row);
extern const std::string kCityStateSnippet;

// Wraps source in a fenced python block the way a model reply would.
std::string as_reply(std::string_view source);

// Registers a stub behaviour for every snippet above.
void register_behaviors(StubExecutor& executor);

// Cells of the row shown in a row-wise prompt, keyed by column.
std::optional<RowMap> rowwise_query(std::string_view prompt);

}  // namespace wrangle::fixtures
