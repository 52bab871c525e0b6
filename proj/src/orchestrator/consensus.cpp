#include <algorithm>
#include <numeric>

#include "wrangle/errors.hpp"
#include "wrangle/orchestrator.hpp"

namespace wrangle {

bool is_abstention(const std::optional<std::string>& value) {
  if (!value) return true;
  const std::string v = normalize_value(*value);
  return v.empty() || v == "unknown";
}

ConsensusResult consensus(std::span<const SnippetVotes> outputs) {
  ConsensusResult result;
  if (outputs.empty()) return result;
  const std::size_t rows = outputs.front().values.size();
  for (const auto& s : outputs) {
    if (s.values.size() != rows) throw DataError("consensus: snippets disagree on row count");
  }

  // Snippet precedence for ties: accuracy desc, then fold id asc.
  std::vector<std::size_t> rank(outputs.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    if (outputs[a].validation_accuracy != outputs[b].validation_accuracy) {
      return outputs[a].validation_accuracy > outputs[b].validation_accuracy;
    }
    return outputs[a].fold_id < outputs[b].fold_id;
  });

  std::vector<std::pair<std::string, int>> tally;
  for (std::size_t r = 0; r < rows; ++r) {
    tally.clear();
    for (const auto& s : outputs) {
      const auto& v = s.values[r];
      if (is_abstention(v)) continue;
      auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& t) { return t.first == *v; });
      if (it == tally.end()) {
        tally.emplace_back(*v, 1);
      } else {
        ++it->second;
      }
    }
    if (tally.empty()) {
      result.abstained.insert(r);
      continue;
    }
    int top = 0;
    for (const auto& t : tally) top = std::max(top, t.second);

    const std::string* winner = nullptr;
    for (std::size_t idx : rank) {
      const auto& v = outputs[idx].values[r];
      if (is_abstention(v)) continue;
      const auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& t) { return t.first == *v; });
      if (it->second == top) {
        winner = &it->first;
        break;
      }
    }

    RowConsensus rc;
    rc.value = *winner;
    rc.votes = top;
    for (const auto& s : outputs) {
      if (!is_abstention(s.values[r]) && *s.values[r] == rc.value) {
        rc.contributing_snippets.push_back(s.fold_id);
      }
    }
    result.per_row.emplace(r, std::move(rc));
  }
  return result;
}

double compute_accuracy(std::span<const std::optional<std::string>> predicted,
                        std::span<const std::optional<std::string>> truth) {
  if (predicted.size() != truth.size()) {
    throw DataError("compute_accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(truth.size()) + " truth values");
  }
  if (predicted.empty()) throw DataError("compute_accuracy: no values to compare");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] && truth[i] && normalize_value(*predicted[i]) == normalize_value(*truth[i])) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

}  // namespace wrangle
