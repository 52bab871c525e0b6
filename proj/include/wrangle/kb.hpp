#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wrangle/table.hpp"

namespace wrangle {

inline constexpr std::size_t kSignatureDims = 512;
inline constexpr std::size_t kSignatureSamples = 20;

/// L2-normalized hashed trigram vector (all zeros for empty input).
struct SignatureVector {
  std::vector<double> values;

  std::size_t dims() const noexcept { return values.size(); }
  bool is_zero() const;
  friend bool operator==(const SignatureVector&, const SignatureVector&) = default;
};

double cosine(const SignatureVector& a, const SignatureVector& b);

/// Stable 64-bit FNV-1a, used for feature hashing and sample selection.
std::uint64_t fnv1a64(std::string_view text);

/// Anything that can turn (name, sample values) into a signature. The default
/// is the hashing trigram embedder; remote embedders plug in here.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual SignatureVector embed_column(std::string_view name,
                                       std::span<const std::string> samples) const = 0;
  virtual SignatureVector embed_text(std::string_view text) const = 0;
};

/// Character trigrams of the lowercased name and up to 20 distinct samples,
/// hashed into `dims` buckets with a hash-derived sign, raw term frequency,
/// L2-normalized. Samples are deduplicated and the 20 with the smallest hash
/// are kept, so the result does not depend on sample order.
class TrigramEmbedder final : public Embedder {
 public:
  explicit TrigramEmbedder(std::size_t dims = kSignatureDims) : dims_(dims) {}
  SignatureVector embed_column(std::string_view name,
                               std::span<const std::string> samples) const override;
  SignatureVector embed_text(std::string_view text) const override;

 private:
  std::size_t dims_;
};

const Embedder& default_embedder();

SignatureVector embed_column(std::string_view name, std::span<const std::string> sample_values);

/// Distinct non-null values of one column.
std::vector<std::string> distinct_values(const Table& table, std::size_t column);

struct KbEntry {
  std::string id;
  std::string description;
  Table table;
  std::vector<SignatureVector> column_signatures;  // parallel to table.columns()
  std::chrono::system_clock::time_point ingested_at;
};

struct KnowledgeBase {
  std::vector<KbEntry> entries;  // sorted by id
  std::vector<std::string> warnings;

  bool empty() const noexcept { return entries.empty(); }
};

std::vector<SignatureVector> column_signatures(const Table& table,
                                               const Embedder& embedder = default_embedder());

KbEntry make_kb_entry(std::string id, Table table, const Embedder& embedder = default_embedder());

/// One entry per `<id>.csv` in `dir`; `manifest.json` ({id: description}) is
/// optional. Unreadable or malformed files are skipped with a warning.
KnowledgeBase ingest_kb(const std::filesystem::path& dir,
                        const Embedder& embedder = default_embedder());

struct KbMatch {
  std::string entry_id;
  double score = 0.0;
  std::map<std::string, std::string> column_alignment;  // query column -> entry column
};

/// Mean over query columns of the best cosine against the entry's columns.
KbMatch score_entry(const std::vector<std::string>& query_columns,
                    const std::vector<SignatureVector>& query_signatures, const KbEntry& entry);

/// Best-scoring entry regardless of threshold (ties to the smaller id).
std::optional<KbMatch> best_reference(const Table& d_tilde, const KnowledgeBase& kb,
                                      const Embedder& embedder = default_embedder());

/// Best-scoring entry (ties to the smaller id) if its score strictly exceeds
/// `threshold`.
std::optional<KbMatch> retrieve_reference(const Table& d_tilde, const KnowledgeBase& kb,
                                          double threshold,
                                          const Embedder& embedder = default_embedder());

inline constexpr double kDefaultSimilarityThreshold = 0.75;

}  // namespace wrangle
