#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "wrangle/errors.hpp"
#include "wrangle/kb.hpp"

namespace wrangle {

std::vector<SignatureVector> column_signatures(const Table& table, const Embedder& embedder) {
  std::vector<SignatureVector> out;
  out.reserve(table.column_count());
  for (std::size_t c = 0; c < table.column_count(); ++c) {
    const auto samples = distinct_values(table, c);
    out.push_back(embedder.embed_column(table.columns()[c], samples));
  }
  return out;
}

KbEntry make_kb_entry(std::string id, Table table, const Embedder& embedder) {
  KbEntry entry;
  entry.id = std::move(id);
  entry.column_signatures = column_signatures(table, embedder);
  entry.table = std::move(table);
  entry.ingested_at = std::chrono::system_clock::now();
  return entry;
}

KnowledgeBase ingest_kb(const std::filesystem::path& dir, const Embedder& embedder) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw DataError("knowledge base directory '" + dir.string() + "' is not readable");
  }
  KnowledgeBase kb;

  std::map<std::string, std::string> descriptions;
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest, ec)) {
    try {
      std::ifstream in(manifest);
      const auto doc = nlohmann::json::parse(in);
      for (const auto& [id, desc] : doc.items()) {
        descriptions[id] = desc.is_string() ? desc.get<std::string>() : desc.dump();
      }
    } catch (const std::exception& e) {
      kb.warnings.push_back("manifest.json ignored: " + std::string(e.what()));
    }
  }

  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(dir, ec)) {
    if (item.path().extension() == ".csv") files.push_back(item.path());
  }
  if (ec) throw DataError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(files.begin(), files.end());

  for (const auto& file : files) {
    try {
      Table table = load_table(file);
      if (table.row_count() == 0) throw DataError("no data rows");
      const std::string id = file.stem().string();
      KbEntry entry = make_kb_entry(id, std::move(table), embedder);
      if (auto it = descriptions.find(id); it != descriptions.end()) entry.description = it->second;
      kb.entries.push_back(std::move(entry));
    } catch (const std::exception& e) {
      kb.warnings.push_back("skipped " + file.filename().string() + ": " + e.what());
    }
  }
  return kb;
}

KbMatch score_entry(const std::vector<std::string>& query_columns,
                    const std::vector<SignatureVector>& query_signatures, const KbEntry& entry) {
  KbMatch match;
  match.entry_id = entry.id;
  if (query_signatures.empty() || entry.column_signatures.empty()) {
    match.score = 0.0;
    return match;
  }
  double sum = 0.0;
  for (std::size_t q = 0; q < query_signatures.size(); ++q) {
    double best = -1.0;
    std::size_t best_col = 0;
    for (std::size_t c = 0; c < entry.column_signatures.size(); ++c) {
      const double s = cosine(query_signatures[q], entry.column_signatures[c]);
      // Ties go to the lexicographically smaller column name so the alignment
      // does not depend on entry column order.
      if (s > best || (s == best && entry.table.columns()[c] < entry.table.columns()[best_col])) {
        best = s;
        best_col = c;
      }
    }
    sum += best;
    match.column_alignment[query_columns[q]] = entry.table.columns()[best_col];
  }
  match.score = std::clamp(sum / static_cast<double>(query_signatures.size()), -1.0, 1.0);
  return match;
}

std::optional<KbMatch> best_reference(const Table& d_tilde, const KnowledgeBase& kb,
                                      const Embedder& embedder) {
  const auto query = column_signatures(d_tilde, embedder);
  std::optional<KbMatch> best;
  for (const auto& entry : kb.entries) {
    KbMatch m = score_entry(d_tilde.columns(), query, entry);
    if (!best || m.score > best->score || (m.score == best->score && m.entry_id < best->entry_id)) {
      best = std::move(m);
    }
  }
  return best;
}

std::optional<KbMatch> retrieve_reference(const Table& d_tilde, const KnowledgeBase& kb,
                                          double threshold, const Embedder& embedder) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("similarity threshold must lie in [0, 1]");
  }
  auto best = best_reference(d_tilde, kb, embedder);
  if (best && best->score > threshold) return best;
  return std::nullopt;
}

}  // namespace wrangle
