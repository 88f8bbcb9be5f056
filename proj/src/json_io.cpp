#include "tracebench/json_io.hpp"

namespace tracebench {

nlohmann::json to_json(const ColumnMeta& c) { return {{"name", c.name}, {"dtype", to_string(c.dtype)}}; }

nlohmann::json to_json(const TableMeta& meta) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : meta.columns) cols.push_back(to_json(c));
  nlohmann::json j = {{"name", meta.name}, {"columns", cols}, {"origin", to_string(meta.origin)}};
  j["row_count"] = meta.row_count ? nlohmann::json(*meta.row_count) : nlohmann::json(nullptr);
  return j;
}

TableMeta table_meta_from_json(const nlohmann::json& j) {
  TableMeta m;
  m.name = j.at("name").get<std::string>();
  for (const auto& c : j.at("columns")) {
    m.columns.push_back({c.at("name").get<std::string>(), dtype_from_string(c.at("dtype").get<std::string>())});
  }
  if (j.contains("row_count") && !j["row_count"].is_null()) m.row_count = j["row_count"].get<std::int64_t>();
  if (j.contains("origin")) m.origin = origin_from_string(j["origin"].get<std::string>());
  return m;
}

nlohmann::json value_to_json(const Value& v) {
  if (v.is_null()) return nullptr;
  if (v.is_int()) return v.as_int();
  if (v.is_float()) return v.as_float();
  return v.as_text();
}

Value value_from_json(const nlohmann::json& j) {
  if (j.is_null()) return Value::null();
  if (j.is_number_integer()) return Value(j.get<std::int64_t>());
  if (j.is_number()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  if (j.is_boolean()) return Value(static_cast<std::int64_t>(j.get<bool>()));
  throw DataError("cannot convert JSON " + j.dump() + " to a cell value");
}

}  // namespace tracebench
