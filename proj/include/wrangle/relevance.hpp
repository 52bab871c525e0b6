#pragma once

#include <bitset>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wrangle/table.hpp"

namespace wrangle {

inline constexpr std::uint8_t kNullBin = 255;
inline constexpr std::uint8_t kOverflowBin = 254;
inline constexpr int kMaxValueBins = 255;       // bins 0..254 for values
inline constexpr int kMaxCategoryBins = 254;    // plus the overflow bin

/// Features quantized to one byte per cell, stored feature-major.
struct BinnedMatrix {
  std::size_t n_rows = 0;
  std::vector<std::string> feature_names;
  std::vector<bool> categorical;                    // per feature
  std::vector<std::vector<std::uint8_t>> bins;      // [feature][row]
  std::vector<std::vector<double>> bin_edges;       // numeric features only
  std::vector<std::map<std::string, std::uint8_t>> category_maps;  // categorical only

  std::size_t n_features() const noexcept { return bins.size(); }
};

/// Numeric/datetime columns are quantile-binned into at most 255 bins;
/// categorical/text columns map their 254 most frequent values to bins in
/// frequency order (ties by value) and everything else to the overflow bin.
/// NULL and unparseable cells land in kNullBin. Throws DataError when
/// feature_cols is empty.
BinnedMatrix bin_features(const Table& table, const std::vector<std::string>& feature_cols,
                          const std::vector<ColumnProfile>& profiles);

struct BoostParams {
  int rounds = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  int min_samples_leaf = 20;
  // Categories seen fewer times never enter the left side of a split, so
  // identifier-like columns cannot be memorized one value at a time.
  int min_category_count = 5;
  // Training has no stochastic step; the seed is carried for reproducible
  // records only.
  std::uint64_t seed = 0;
};

struct TreeNode {
  bool is_leaf = true;
  double value = 0.0;  // leaf output, already scaled by the learning rate
  int feature = -1;
  bool categorical = false;
  std::uint8_t threshold = 0;          // numeric: go left when bin <= threshold
  std::bitset<256> left_categories;    // categorical: go left when bit is set
  int left = -1;
  int right = -1;
  double gain = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const BinnedMatrix& x, std::size_t row) const;
  int depth() const;
};

struct BoostModel {
  std::vector<std::string> classes;
  std::vector<double> base_scores;               // per class
  std::vector<std::vector<RegressionTree>> trees;  // [round][class]
  double learning_rate = 0.1;
  std::vector<double> gain_per_feature;
  /// Raw scores accumulated during fitting, [class][row].
  std::vector<std::vector<double>> training_scores;

  std::vector<std::vector<double>> raw_scores(const BinnedMatrix& x) const;
  std::vector<std::string> predict(const BinnedMatrix& x) const;
  double total_gain() const;
};

/// One-vs-rest logistic boosting on histogram splits (gain with lambda = 1).
/// Throws DataError for a single-class target or too few rows.
BoostModel fit_gbdt(const BinnedMatrix& x, const std::vector<std::string>& y,
                    const BoostParams& params);

struct RelevanceParams {
  BoostParams boost;
  double cumulative_share = 0.90;
  std::size_t max_selected = 8;
  std::size_t max_target_classes = 64;
};

struct RelevanceResult {
  std::string target;
  std::vector<std::pair<std::string, double>> ranked;  // descending share
  std::vector<std::string> selected;
};

RelevanceResult select_relevant_columns(const Table& table, const std::string& target,
                                        const RelevanceParams& params = {});

}  // namespace wrangle
