#include <nlohmann/json.hpp>

#include "wrangle/errors.hpp"
#include "wrangle/sandbox.hpp"

namespace wrangle {

using nlohmann::json;

namespace {

json parse_line(std::string_view line) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ProtocolError("malformed protocol line: " + std::string(e.what()));
  }
}

}  // namespace

std::string encode_row(const RowMessage& message) {
  json row = json::object();
  for (const auto& [column, cell] : message.row) {
    row[column] = cell ? json(*cell) : json(nullptr);
  }
  return json{{"id", message.id}, {"row", std::move(row)}}.dump();
}

RowMessage decode_row(std::string_view line) {
  const json doc = parse_line(line);
  if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_number_unsigned() ||
      !doc.contains("row") || !doc["row"].is_object()) {
    throw ProtocolError("row message needs an unsigned id and a row object");
  }
  RowMessage out;
  out.id = doc["id"].get<std::uint64_t>();
  for (const auto& [column, cell] : doc["row"].items()) {
    if (cell.is_null()) {
      out.row.emplace(column, std::nullopt);
    } else if (cell.is_string()) {
      out.row.emplace(column, cell.get<std::string>());
    } else {
      throw ProtocolError("row cell '" + column + "' is neither a string nor null");
    }
  }
  return out;
}

std::string encode_result(const ResultMessage& message) {
  json doc{{"id", message.id}};
  if (message.value) {
    doc["value"] = *message.value;
  } else {
    doc["error"] = message.error.value_or("no value");
  }
  return doc.dump();
}

ResultMessage decode_result(std::string_view line) {
  const json doc = parse_line(line);
  if (!doc.is_object() || !doc.contains("id") || !doc["id"].is_number_unsigned()) {
    throw ProtocolError("result message needs an unsigned id");
  }
  const bool has_value = doc.contains("value");
  const bool has_error = doc.contains("error");
  if (has_value == has_error) throw ProtocolError("result must carry exactly one of value/error");
  ResultMessage out;
  out.id = doc["id"].get<std::uint64_t>();
  const json& payload = has_value ? doc["value"] : doc["error"];
  if (!payload.is_string()) throw ProtocolError("result payload must be a string");
  (has_value ? out.value : out.error) = payload.get<std::string>();
  return out;
}

std::string encode_ready(int protocol) {
  return json{{"ready", true}, {"protocol", protocol}}.dump();
}

int decode_ready(std::string_view line) {
  const json doc = parse_line(line);
  if (!doc.is_object() || doc.value("ready", false) != true || !doc.contains("protocol") ||
      !doc["protocol"].is_number_integer()) {
    throw ProtocolError("expected a ready line, got: " + std::string(line.substr(0, 200)));
  }
  return doc["protocol"].get<int>();
}

std::vector<RowMessage> make_row_messages(const Table& table, std::span<const std::size_t> rows,
                                          std::optional<std::string_view> mask_column) {
  std::optional<std::size_t> mask;
  if (mask_column) mask = table.column_index(*mask_column);
  std::vector<RowMessage> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    RowMessage msg;
    msg.id = i;
    const auto& record = table.rows().at(rows[i]);
    for (std::size_t c = 0; c < table.column_count(); ++c) {
      msg.row.emplace(table.columns()[c], mask == c ? Cell{} : record[c]);
    }
    out.push_back(std::move(msg));
  }
  return out;
}

}  // namespace wrangle
