#pragma once

#include <json.hpp>

#include "tracebench/value.hpp"

namespace tracebench {

nlohmann::json to_json(const ColumnMeta& c);
nlohmann::json to_json(const TableMeta& meta);
TableMeta table_meta_from_json(const nlohmann::json& j);

nlohmann::json value_to_json(const Value& v);
Value value_from_json(const nlohmann::json& j);

}  // namespace tracebench
