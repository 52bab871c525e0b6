#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "wrangle/errors.hpp"
#include "wrangle/relevance.hpp"

namespace wrangle {
namespace {

inline constexpr std::string_view kOtherLabel = "\x1fother";

// Keeps the (cap - 1) most frequent labels and folds the rest into one class.
std::vector<std::string> cap_labels(std::vector<std::string> labels, std::size_t cap) {
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& l : labels) ++counts[l];
  if (counts.size() <= cap) return labels;
  std::vector<std::pair<std::string, std::size_t>> by_freq(counts.begin(), counts.end());
  std::sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::unordered_map<std::string, bool> keep;
  for (std::size_t i = 0; i + 1 < cap && i < by_freq.size(); ++i) keep[by_freq[i].first] = true;
  for (auto& l : labels) {
    if (!keep.contains(l)) l = std::string(kOtherLabel);
  }
  return labels;
}

}  // namespace

RelevanceResult select_relevant_columns(const Table& table, const std::string& target,
                                        const RelevanceParams& params) {
  const std::size_t target_col = table.column_index(target);
  std::vector<std::string> features;
  for (const auto& c : table.columns()) {
    if (c != target) features.push_back(c);
  }
  if (features.empty()) throw DataError("relevance: table has no column besides the target");

  std::vector<std::size_t> labelled;
  std::vector<std::string> labels;
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    if (const auto& cell = table.cell(r, target_col)) {
      labelled.push_back(r);
      labels.push_back(*cell);
    }
  }
  if (labelled.empty()) throw DataError("relevance: target '" + target + "' is entirely NULL");

  const Table training = table.select_rows(labelled);
  const auto profiles = profile_columns(training);
  labels = cap_labels(std::move(labels), params.max_target_classes);

  RelevanceResult result;
  result.target = target;
  std::vector<double> gains(features.size(), 0.0);

  const bool multi_class =
      std::any_of(labels.begin(), labels.end(), [&](const auto& l) { return l != labels.front(); });
  if (multi_class) {
    BoostParams boost = params.boost;
    // Small ground truths cannot honour the default leaf size.
    const int max_leaf = std::max(1, static_cast<int>(labelled.size() / 4));
    boost.min_samples_leaf = std::min(boost.min_samples_leaf, max_leaf);
    const BinnedMatrix x = bin_features(training, features, profiles);
    const BoostModel model = fit_gbdt(x, labels, boost);
    gains = model.gain_per_feature;
  }
  const double total = std::accumulate(gains.begin(), gains.end(), 0.0);

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  if (total > 0.0) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });
  } else {
    auto distinct = [&](std::size_t f) {
      for (const auto& p : profiles) {
        if (p.name == features[f]) return p.distinct_count;
      }
      return std::size_t{0};
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return distinct(a) > distinct(b); });
  }

  for (std::size_t f : order) {
    result.ranked.emplace_back(features[f], total > 0.0 ? gains[f] / total : 0.0);
  }

  if (total > 0.0) {
    double cumulative = 0.0;
    for (const auto& [column, share] : result.ranked) {
      if (result.selected.size() >= params.max_selected) break;
      result.selected.push_back(column);
      cumulative += share;
      if (cumulative >= params.cumulative_share - 1e-12) break;
    }
  } else {
    for (const auto& entry : result.ranked) {
      if (result.selected.size() >= params.max_selected) break;
      result.selected.push_back(entry.first);
    }
  }
  return result;
}

}  // namespace wrangle
