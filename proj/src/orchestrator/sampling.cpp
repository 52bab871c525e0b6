#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "wrangle/errors.hpp"
#include "wrangle/orchestrator.hpp"

namespace wrangle {
namespace {

// Portable uniform [0,1) from a 64-bit engine (the std distributions are not
// required to be identical across standard libraries).
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::vector<double>> plus_plus_init(std::span<const SignatureVector> points, int k,
                                                std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<std::vector<double>> centers;
  centers.push_back(points[static_cast<std::size_t>(rng() % n)].values);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(points[i].values, centers[0]);

  while (static_cast<int>(centers.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total <= 0.0) break;  // fewer distinct points than k
    const double pick = unit(rng) * total;
    double running = 0.0;
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      running += d2[i];
      if (d2[i] > 0.0 && running > pick) {
        chosen = i;
        break;
      }
    }
    while (d2[chosen] <= 0.0) --chosen;  // rounding at the tail
    centers.push_back(points[chosen].values);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i].values, centers.back()));
    }
  }
  return centers;
}

double assign(std::span<const SignatureVector> points, const std::vector<std::vector<double>>& centers,
              std::vector<int>& assignment) {
  double inertia = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = squared_distance(points[i].values, centers[c]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    assignment[i] = arg;
    inertia += best;
  }
  return inertia;
}

}  // namespace

KMeansModel kmeans(std::span<const SignatureVector> points, int k, std::uint64_t seed,
                   int max_iterations, double tolerance) {
  if (k < 1) throw ConfigError("kmeans: k must be at least 1");
  KMeansModel model;
  if (points.empty()) return model;
  const std::size_t dims = points.front().dims();
  for (const auto& p : points) {
    if (p.dims() != dims) throw DataError("kmeans: points differ in dimension");
  }

  std::mt19937_64 rng(seed);
  auto centers = plus_plus_init(points, std::min<int>(k, static_cast<int>(points.size())), rng);
  model.assignment.assign(points.size(), 0);

  double inertia = assign(points, centers, model.assignment);
  model.inertia_history.push_back(inertia);
  for (int iter = 1; iter < max_iterations; ++iter) {
    std::vector<std::vector<double>> sums(centers.size(), std::vector<double>(dims, 0.0));
    std::vector<std::size_t> counts(centers.size(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto c = static_cast<std::size_t>(model.assignment[i]);
      ++counts[c];
      for (std::size_t d = 0; d < dims; ++d) sums[c][d] += points[i].values[d];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t d = 0; d < dims; ++d) {
        centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
      }
    }
    const double next = assign(points, centers, model.assignment);
    model.inertia_history.push_back(next);
    const double improvement = inertia - next;
    inertia = next;
    if (improvement <= tolerance) break;
  }

  model.k = static_cast<int>(centers.size());
  model.inertia = inertia;
  model.centroids.reserve(centers.size());
  for (auto& c : centers) model.centroids.push_back(SignatureVector{std::move(c)});
  return model;
}

std::vector<SignatureVector> row_signatures(const Table& table, const Embedder& embedder) {
  std::vector<SignatureVector> out;
  out.reserve(table.row_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    const std::size_t idx[] = {r};
    out.push_back(embedder.embed_text(format_rows(table, idx, false)));
  }
  return out;
}

std::vector<std::size_t> select_diverse_samples(std::span<const SignatureVector> rows, int count,
                                                std::uint64_t seed) {
  if (count < 1) throw ConfigError("select_diverse_samples: count must be at least 1");
  std::vector<std::size_t> out;
  if (rows.size() <= static_cast<std::size_t>(count)) {
    out.resize(rows.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
    return out;
  }
  const KMeansModel model = kmeans(rows, count, seed);
  std::vector<bool> populated(model.centroids.size(), false);
  for (int a : model.assignment) populated[static_cast<std::size_t>(a)] = true;
  for (std::size_t c = 0; c < model.centroids.size(); ++c) {
    if (!populated[c]) continue;
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double d = squared_distance(rows[i].values, model.centroids[c].values);
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    out.push_back(arg);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> select_diverse_samples(const Table& g, int count, std::uint64_t seed) {
  const auto sigs = row_signatures(g);
  return select_diverse_samples(sigs, count, seed);
}

std::vector<std::size_t> nearest_rows(std::span<const SignatureVector> rows,
                                      const SignatureVector& query, int count,
                                      std::optional<std::size_t> exclude) {
  if (count < 1) throw ConfigError("nearest_rows: count must be at least 1");
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (exclude && *exclude == i) continue;
    scored.emplace_back(cosine(rows[i], query), i);
  }
  const auto take = std::min(scored.size(), static_cast<std::size_t>(count));
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
  return out;
}

std::vector<std::size_t> select_fewshot_examples(std::span<const SignatureVector> rows,
                                                 std::size_t r, int count) {
  if (r >= rows.size()) throw DataError("select_fewshot_examples: row index out of range");
  return nearest_rows(rows, rows[r], count, r);
}

std::vector<std::size_t> select_fewshot_examples(const Table& g, std::size_t r, int count) {
  const auto sigs = row_signatures(g);
  return select_fewshot_examples(sigs, r, count);
}

}  // namespace wrangle
