#include <algorithm>
#include <unordered_map>

#include "wrangle/errors.hpp"
#include "wrangle/relevance.hpp"

namespace wrangle {
namespace {

const ColumnProfile& profile_for(const std::vector<ColumnProfile>& profiles,
                                 const std::string& column) {
  for (const auto& p : profiles) {
    if (p.name == column) return p;
  }
  throw DataError("no column profile for feature '" + column + "'");
}

std::vector<double> quantile_edges(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<double> distinct;
  for (double v : values) {
    if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
  }
  std::vector<double> edges;
  if (distinct.size() <= static_cast<std::size_t>(kMaxValueBins)) {
    // One bin per distinct value; edges sit at midpoints.
    for (std::size_t i = 1; i < distinct.size(); ++i) {
      edges.push_back(distinct[i - 1] + (distinct[i] - distinct[i - 1]) / 2.0);
    }
    return edges;
  }
  const std::size_t n = values.size();
  for (int i = 1; i < kMaxValueBins; ++i) {
    const double edge = values[(static_cast<std::size_t>(i) * n) / kMaxValueBins];
    if (edges.empty() || edge > edges.back()) edges.push_back(edge);
  }
  return edges;
}

}  // namespace

BinnedMatrix bin_features(const Table& table, const std::vector<std::string>& feature_cols,
                          const std::vector<ColumnProfile>& profiles) {
  if (feature_cols.empty()) throw DataError("bin_features: no usable feature columns");
  BinnedMatrix m;
  m.n_rows = table.row_count();
  for (const auto& column : feature_cols) {
    const std::size_t c = table.column_index(column);
    const ColumnProfile& profile = profile_for(profiles, column);
    std::vector<std::uint8_t> bins(m.n_rows, kNullBin);

    const bool ordered =
        profile.inferred_kind == ColumnKind::Numeric || profile.inferred_kind == ColumnKind::Datetime;
    if (ordered) {
      auto parse = profile.inferred_kind == ColumnKind::Numeric ? parse_number : parse_datetime;
      std::vector<std::optional<double>> parsed(m.n_rows);
      std::vector<double> present;
      for (std::size_t r = 0; r < m.n_rows; ++r) {
        if (const auto& cell = table.cell(r, c)) {
          parsed[r] = parse(*cell);
          if (parsed[r]) present.push_back(*parsed[r]);
        }
      }
      auto edges = quantile_edges(std::move(present));
      for (std::size_t r = 0; r < m.n_rows; ++r) {
        if (!parsed[r]) continue;
        auto it = std::upper_bound(edges.begin(), edges.end(), *parsed[r]);
        bins[r] = static_cast<std::uint8_t>(it - edges.begin());
      }
      m.bin_edges.push_back(std::move(edges));
      m.category_maps.emplace_back();
    } else {
      std::unordered_map<std::string, std::size_t> counts;
      for (std::size_t r = 0; r < m.n_rows; ++r) {
        if (const auto& cell = table.cell(r, c)) ++counts[*cell];
      }
      std::vector<std::pair<std::string, std::size_t>> by_freq(counts.begin(), counts.end());
      std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
      });
      std::map<std::string, std::uint8_t> mapping;
      for (std::size_t i = 0; i < by_freq.size() && i < static_cast<std::size_t>(kMaxCategoryBins);
           ++i) {
        mapping.emplace(by_freq[i].first, static_cast<std::uint8_t>(i));
      }
      for (std::size_t r = 0; r < m.n_rows; ++r) {
        const auto& cell = table.cell(r, c);
        if (!cell) continue;
        auto it = mapping.find(*cell);
        bins[r] = it == mapping.end() ? kOverflowBin : it->second;
      }
      m.bin_edges.emplace_back();
      m.category_maps.push_back(std::move(mapping));
    }
    m.feature_names.push_back(column);
    m.categorical.push_back(!ordered);
    m.bins.push_back(std::move(bins));
  }
  return m;
}

}  // namespace wrangle
