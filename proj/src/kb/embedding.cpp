#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "wrangle/kb.hpp"

namespace wrangle {
namespace {

constexpr char kBegin = '\x02';
constexpr char kEnd = '\x03';

void add_trigrams(std::string_view text, std::unordered_map<std::uint64_t, double>& tf) {
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back(kBegin);
  padded.append(text);
  padded.push_back(kEnd);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    tf[fnv1a64(std::string_view(padded).substr(i, 3))] += 1.0;
  }
}

SignatureVector to_signature(const std::unordered_map<std::uint64_t, double>& tf,
                             std::size_t dims) {
  SignatureVector sig;
  sig.values.assign(dims, 0.0);
  // Iterate in hash order so the floating-point sums are reproducible.
  std::vector<std::pair<std::uint64_t, double>> terms(tf.begin(), tf.end());
  std::sort(terms.begin(), terms.end());
  for (const auto& [hash, count] : terms) {
    const double sign = (hash >> 63) != 0 ? -1.0 : 1.0;
    sig.values[hash % dims] += sign * count;
  }
  double norm = 0.0;
  for (double v : sig.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : sig.values) v /= norm;
  }
  return sig;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (char ch : text) {
    hash ^= static_cast<unsigned char>(ch);
    hash *= 1099511628211ull;
  }
  return hash;
}

bool SignatureVector::is_zero() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return v == 0.0; });
}

double cosine(const SignatureVector& a, const SignatureVector& b) {
  if (a.dims() != b.dims()) return 0.0;
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.dims(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

SignatureVector TrigramEmbedder::embed_column(std::string_view name,
                                              std::span<const std::string> samples) const {
  std::unordered_map<std::uint64_t, double> tf;
  std::string lowered(name);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (!lowered.empty()) add_trigrams(lowered, tf);

  std::vector<std::pair<std::uint64_t, std::string_view>> distinct;
  std::unordered_set<std::string_view> seen;
  for (const auto& s : samples) {
    if (seen.insert(s).second) distinct.emplace_back(fnv1a64(s), s);
  }
  std::sort(distinct.begin(), distinct.end());
  if (distinct.size() > kSignatureSamples) distinct.resize(kSignatureSamples);
  for (const auto& [hash, value] : distinct) add_trigrams(value, tf);
  return to_signature(tf, dims_);
}

SignatureVector TrigramEmbedder::embed_text(std::string_view text) const {
  std::unordered_map<std::uint64_t, double> tf;
  if (!text.empty()) add_trigrams(text, tf);
  return to_signature(tf, dims_);
}

const Embedder& default_embedder() {
  static const TrigramEmbedder embedder;
  return embedder;
}

SignatureVector embed_column(std::string_view name, std::span<const std::string> sample_values) {
  return default_embedder().embed_column(name, sample_values);
}

std::vector<std::string> distinct_values(const Table& table, std::size_t column) {
  std::vector<std::string> out;
  std::unordered_set<std::string_view> seen;
  for (const auto& row : table.rows()) {
    if (row[column] && seen.insert(*row[column]).second) out.push_back(*row[column]);
  }
  return out;
}

}  // namespace wrangle
