#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>

#include "wrangle/errors.hpp"
#include "wrangle/relevance.hpp"

namespace wrangle {
namespace {

constexpr double kLambda = 1.0;
constexpr double kHessianFloor = 1e-16;

// Gradient statistics are accumulated in fixed point so that histogram sums
// are exact and independent of row order. |g| <= 1 and h <= 1/4, so 2^40
// leaves ample headroom in 64 bits for millions of rows.
constexpr double kFixedScale = 1099511627776.0;  // 2^40

struct BinStats {
  std::int64_t g = 0;
  std::int64_t h = 0;
  std::int64_t count = 0;

  BinStats& operator+=(const BinStats& o) {
    g += o.g;
    h += o.h;
    count += o.count;
    return *this;
  }
  BinStats& operator-=(const BinStats& o) {
    g -= o.g;
    h -= o.h;
    count -= o.count;
    return *this;
  }
};

BinStats operator-(BinStats a, const BinStats& b) { return a -= b; }

double as_real(std::int64_t fixed) { return static_cast<double>(fixed) / kFixedScale; }

double leaf_objective(const BinStats& s) {
  const double g = as_real(s.g);
  return g * g / (as_real(s.h) + kLambda);
}

using Histogram = std::vector<std::array<BinStats, 256>>;  // [feature][bin]

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  bool categorical = false;
  std::uint8_t threshold = 0;
  std::bitset<256> left_categories;
};

class TreeBuilder {
 public:
  TreeBuilder(const BinnedMatrix& x, const std::vector<std::int64_t>& g,
              const std::vector<std::int64_t>& h, const BoostParams& params)
      : x_(x), g_(g), h_(h), params_(params) {}

  // Builds one tree and writes each row's leaf value into `leaf_values`.
  RegressionTree build(std::vector<std::size_t> rows, std::vector<double>& leaf_values,
                       std::vector<double>& gain_per_feature) {
    tree_ = RegressionTree{};
    leaf_values_ = &leaf_values;
    gain_per_feature_ = &gain_per_feature;
    Histogram hist = histogram(rows);
    BinStats total = totals(hist, rows);
    tree_.nodes.emplace_back();
    grow(0, std::move(rows), std::move(hist), total, 0);
    return std::move(tree_);
  }

 private:
  Histogram histogram(const std::vector<std::size_t>& rows) const {
    Histogram hist(x_.n_features());
    for (std::size_t f = 0; f < x_.n_features(); ++f) {
      auto& hf = hist[f];
      const auto& bins = x_.bins[f];
      for (std::size_t r : rows) {
        auto& b = hf[bins[r]];
        b.g += g_[r];
        b.h += h_[r];
        ++b.count;
      }
    }
    return hist;
  }

  BinStats totals(const Histogram& hist, const std::vector<std::size_t>& rows) const {
    BinStats t;
    if (hist.empty()) {
      for (std::size_t r : rows) {
        t.g += g_[r];
        t.h += h_[r];
        ++t.count;
      }
      return t;
    }
    for (const auto& b : hist.front()) t += b;
    return t;
  }

  // Ties go to the earlier candidate in scan order.
  SplitCandidate find_split(const Histogram& hist, const BinStats& total) const {
    SplitCandidate best;
    const double parent = leaf_objective(total);
    const auto min_leaf = static_cast<std::int64_t>(params_.min_samples_leaf);
    const auto min_category = std::max<std::int64_t>(1, params_.min_category_count);
    for (std::size_t f = 0; f < hist.size(); ++f) {
      const auto& hf = hist[f];
      const int feature = static_cast<int>(f);
      if (!x_.categorical[f]) {
        BinStats left;
        for (int t = 0; t < 255; ++t) {
          left += hf[static_cast<std::size_t>(t)];
          if (left.count < min_leaf) continue;
          const BinStats right = total - left;
          if (right.count < min_leaf) break;
          if (hf[static_cast<std::size_t>(t)].count == 0 && t > 0) continue;
          const double gain = leaf_objective(left) + leaf_objective(right) - parent;
          if (gain > best.gain && gain > 0.0) {
            best.gain = gain;
            best.feature = feature;
            best.categorical = false;
            best.threshold = static_cast<std::uint8_t>(t);
          }
        }
        continue;
      }
      // Categories ordered by gradient ratio give the optimal binary partition
      // among prefix splits.
      std::vector<int> present;
      for (int b = 0; b < 256; ++b) {
        if (hf[static_cast<std::size_t>(b)].count >= min_category) present.push_back(b);
      }
      if (present.empty()) continue;
      std::vector<double> ratio(256, 0.0);
      for (int b : present) {
        const auto& s = hf[static_cast<std::size_t>(b)];
        ratio[static_cast<std::size_t>(b)] = as_real(s.g) / (as_real(s.h) + kLambda);
      }
      std::sort(present.begin(), present.end(), [&](int a, int b) {
        const double ra = ratio[static_cast<std::size_t>(a)];
        const double rb = ratio[static_cast<std::size_t>(b)];
        return ra != rb ? ra < rb : a < b;
      });
      BinStats left;
      for (std::size_t i = 0; i < present.size(); ++i) {
        left += hf[static_cast<std::size_t>(present[i])];
        if (left.count < min_leaf) continue;
        const BinStats right = total - left;
        if (right.count < min_leaf) break;
        const double gain = leaf_objective(left) + leaf_objective(right) - parent;
        if (gain > best.gain && gain > 0.0) {
          best.gain = gain;
          best.feature = feature;
          best.categorical = true;
          best.left_categories.reset();
          for (std::size_t j = 0; j <= i; ++j) {
            best.left_categories.set(static_cast<std::size_t>(present[j]));
          }
        }
      }
    }
    return best;
  }

  bool goes_left(const TreeNode& node, std::size_t row) const {
    const std::uint8_t bin = x_.bins[static_cast<std::size_t>(node.feature)][row];
    return node.categorical ? node.left_categories.test(bin) : bin <= node.threshold;
  }

  void make_leaf(int index, const std::vector<std::size_t>& rows, const BinStats& total) {
    auto& node = tree_.nodes[static_cast<std::size_t>(index)];
    node.is_leaf = true;
    node.value = -params_.learning_rate * as_real(total.g) / (as_real(total.h) + kLambda);
    for (std::size_t r : rows) (*leaf_values_)[r] = node.value;
  }

  void grow(int index, std::vector<std::size_t> rows, Histogram hist, const BinStats& total,
            int depth) {
    const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
    if (depth >= params_.max_depth || rows.size() < 2 * min_leaf) {
      make_leaf(index, rows, total);
      return;
    }
    const SplitCandidate split = find_split(hist, total);
    if (split.feature < 0) {
      make_leaf(index, rows, total);
      return;
    }
    {
      auto& node = tree_.nodes[static_cast<std::size_t>(index)];
      node.is_leaf = false;
      node.feature = split.feature;
      node.categorical = split.categorical;
      node.threshold = split.threshold;
      node.left_categories = split.left_categories;
      node.gain = split.gain;
    }
    (*gain_per_feature_)[static_cast<std::size_t>(split.feature)] += split.gain;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    const TreeNode node = tree_.nodes[static_cast<std::size_t>(index)];
    for (std::size_t r : rows) (goes_left(node, r) ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    // Build the smaller child's histogram directly, derive the other by subtraction.
    const bool left_small = left_rows.size() <= right_rows.size();
    Histogram small = histogram(left_small ? left_rows : right_rows);
    Histogram large = std::move(hist);
    for (std::size_t f = 0; f < large.size(); ++f) {
      for (std::size_t b = 0; b < 256; ++b) large[f][b] -= small[f][b];
    }
    Histogram left_hist = left_small ? std::move(small) : std::move(large);
    Histogram right_hist = left_small ? std::move(large) : std::move(small);
    const BinStats left_total = totals(left_hist, left_rows);
    const BinStats right_total = totals(right_hist, right_rows);

    const int left_index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const int right_index = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[static_cast<std::size_t>(index)].left = left_index;
    tree_.nodes[static_cast<std::size_t>(index)].right = right_index;

    grow(left_index, std::move(left_rows), std::move(left_hist), left_total, depth + 1);
    grow(right_index, std::move(right_rows), std::move(right_hist), right_total, depth + 1);
  }

  const BinnedMatrix& x_;
  const std::vector<std::int64_t>& g_;
  const std::vector<std::int64_t>& h_;
  const BoostParams& params_;
  RegressionTree tree_;
  std::vector<double>* leaf_values_ = nullptr;
  std::vector<double>* gain_per_feature_ = nullptr;
};

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

}  // namespace

double RegressionTree::predict(const BinnedMatrix& x, std::size_t row) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf) {
    const auto& n = nodes[i];
    const std::uint8_t bin = x.bins[static_cast<std::size_t>(n.feature)][row];
    const bool left = n.categorical ? n.left_categories.test(bin) : bin <= n.threshold;
    i = static_cast<std::size_t>(left ? n.left : n.right);
  }
  return nodes[i].value;
}

int RegressionTree::depth() const {
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int deepest = 0;
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    const auto& n = nodes[static_cast<std::size_t>(i)];
    if (!n.is_leaf) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

std::vector<std::vector<double>> BoostModel::raw_scores(const BinnedMatrix& x) const {
  std::vector<std::vector<double>> scores(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) {
    scores[c].assign(x.n_rows, base_scores[c]);
  }
  for (const auto& round : trees) {
    for (std::size_t c = 0; c < round.size(); ++c) {
      for (std::size_t r = 0; r < x.n_rows; ++r) scores[c][r] += round[c].predict(x, r);
    }
  }
  return scores;
}

std::vector<std::string> BoostModel::predict(const BinnedMatrix& x) const {
  const auto scores = raw_scores(x);
  std::vector<std::string> out(x.n_rows);
  for (std::size_t r = 0; r < x.n_rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes.size(); ++c) {
      if (scores[c][r] > scores[best][r]) best = c;
    }
    out[r] = classes[best];
  }
  return out;
}

double BoostModel::total_gain() const {
  return std::accumulate(gain_per_feature.begin(), gain_per_feature.end(), 0.0);
}

BoostModel fit_gbdt(const BinnedMatrix& x, const std::vector<std::string>& y,
                    const BoostParams& params) {
  if (y.size() != x.n_rows) throw DataError("fit_gbdt: label count does not match row count");
  if (params.min_samples_leaf < 1 || params.max_depth < 1 || params.rounds < 0) {
    throw ConfigError("fit_gbdt: invalid boosting parameters");
  }
  if (x.n_rows < 2 * static_cast<std::size_t>(params.min_samples_leaf)) {
    throw DataError("fit_gbdt: need at least 2*min_samples_leaf rows");
  }
  const std::set<std::string> distinct(y.begin(), y.end());
  if (distinct.size() < 2) throw DataError("fit_gbdt: target has a single class");

  BoostModel model;
  model.classes.assign(distinct.begin(), distinct.end());
  model.learning_rate = params.learning_rate;
  model.gain_per_feature.assign(x.n_features(), 0.0);

  const std::size_t n = x.n_rows;
  const std::size_t k = model.classes.size();
  std::vector<std::vector<std::uint8_t>> is_class(k, std::vector<std::uint8_t>(n, 0));
  for (std::size_t r = 0; r < n; ++r) {
    const auto it = std::lower_bound(model.classes.begin(), model.classes.end(), y[r]);
    is_class[static_cast<std::size_t>(it - model.classes.begin())][r] = 1;
  }
  model.training_scores.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double positives =
        static_cast<double>(std::count(is_class[c].begin(), is_class[c].end(), 1));
    const double p = std::clamp(positives / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
    model.base_scores.push_back(std::log(p / (1.0 - p)));
    model.training_scores[c].assign(n, model.base_scores[c]);
  }

  std::vector<std::size_t> all_rows(n);
  std::iota(all_rows.begin(), all_rows.end(), 0);
  std::vector<std::int64_t> g(n);
  std::vector<std::int64_t> h(n);
  std::vector<double> leaf_values(n);
  TreeBuilder builder(x, g, h, params);

  for (int round = 0; round < params.rounds; ++round) {
    std::vector<RegressionTree> round_trees;
    round_trees.reserve(k);
    for (std::size_t c = 0; c < k; ++c) {
      auto& scores = model.training_scores[c];
      for (std::size_t r = 0; r < n; ++r) {
        const double p = sigmoid(scores[r]);
        g[r] = std::llround((p - is_class[c][r]) * kFixedScale);
        h[r] = std::llround(std::max(p * (1.0 - p), kHessianFloor) * kFixedScale);
      }
      round_trees.push_back(builder.build(all_rows, leaf_values, model.gain_per_feature));
      for (std::size_t r = 0; r < n; ++r) scores[r] += leaf_values[r];
    }
    model.trees.push_back(std::move(round_trees));
  }
  return model;
}

}  // namespace wrangle
