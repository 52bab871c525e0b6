#include "wrangle/errors.hpp"
#include "wrangle/sandbox.hpp"
#include "wrangle/task.hpp"

namespace wrangle {

void StubExecutor::add_behavior(std::string source_marker, RowFunction fn) {
  behaviors_.emplace_back(std::move(source_marker), std::move(fn));
}

std::vector<ResultMessage> StubExecutor::run_session(const std::string& source,
                                                     std::span<const RowMessage> rows) {
  ++sessions_;
  const RowFunction* fn = nullptr;
  for (const auto& [marker, behavior] : behaviors_) {
    if (source.find(marker) != std::string::npos) {
      fn = &behavior;
      break;
    }
  }
  if (fn == nullptr) throw SnippetLoadError("stub executor: no behaviour registered for snippet");

  std::vector<ResultMessage> out;
  out.reserve(rows.size());
  for (const auto& message : rows) {
    const RowMessage received = decode_row(encode_row(message));
    ResultMessage result;
    result.id = received.id;
    try {
      auto value = (*fn)(received.row);
      result.value = value ? std::move(*value) : std::string(kUnknown);
    } catch (const std::exception& e) {
      result.error = e.what();
    }
    out.push_back(decode_result(encode_result(result)));
  }
  return out;
}

}  // namespace wrangle
