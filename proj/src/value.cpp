#include "tracebench/value.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <set>

namespace tracebench {

std::string_view to_string(DType t) {
  switch (t) {
    case DType::int64:
      return "int64";
    case DType::float64:
      return "float64";
    case DType::text:
      return "text";
  }
  return "text";
}

DType dtype_from_string(std::string_view s) {
  if (s == "int64") return DType::int64;
  if (s == "float64") return DType::float64;
  if (s == "text") return DType::text;
  throw DataError("unknown dtype '" + std::string(s) + "'");
}

std::string_view to_string(TableOrigin o) {
  switch (o) {
    case TableOrigin::imported:
      return "imported";
    case TableOrigin::query_result:
      return "query_result";
    case TableOrigin::transferred:
      return "transferred";
  }
  return "imported";
}

TableOrigin origin_from_string(std::string_view s) {
  if (s == "imported") return TableOrigin::imported;
  if (s == "query_result") return TableOrigin::query_result;
  if (s == "transferred") return TableOrigin::transferred;
  throw DataError("unknown table origin '" + std::string(s) + "'");
}

DType Value::dtype() const {
  switch (data_.index()) {
    case 1:
      return DType::int64;
    case 2:
      return DType::float64;
    case 3:
      return DType::text;
    default:
      throw DataError("null value has no dtype");
  }
}

double Value::to_double() const {
  if (is_int()) return static_cast<double>(as_int());
  if (is_float()) return as_float();
  throw DataError(is_null() ? "null is not numeric" : "text value '" + as_text() + "' is not numeric");
}

std::strong_ordering total_order(const Value& a, const Value& b) {
  if (a.raw().index() != b.raw().index()) return a.raw().index() <=> b.raw().index();
  switch (a.raw().index()) {
    case 0:
      return std::strong_ordering::equal;
    case 1:
      return a.as_int() <=> b.as_int();
    case 2: {
      // NaN never reaches storage, so a strong order on finite doubles is safe.
      const double x = a.as_float(), y = b.as_float();
      if (x < y) return std::strong_ordering::less;
      if (x > y) return std::strong_ordering::greater;
      return std::strong_ordering::equal;
    }
    default:
      return a.as_text().compare(b.as_text()) <=> 0;
  }
}

namespace {

std::partial_ordering compare_int_double(std::int64_t i, double d) {
  constexpr double kExact = 9007199254740992.0;  // 2^53
  if (std::isnan(d)) return std::partial_ordering::unordered;
  if (std::fabs(d) < kExact && i > -static_cast<std::int64_t>(kExact) &&
      i < static_cast<std::int64_t>(kExact)) {
    return static_cast<double>(i) <=> d;
  }
  // Outside the exactly representable range compare through long double.
  return static_cast<long double>(i) <=> static_cast<long double>(d);
}

}  // namespace

std::partial_ordering compare_values(const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return std::partial_ordering::unordered;
  if (a.is_text() != b.is_text()) {
    throw DataError("cannot compare text with a number");
  }
  if (a.is_text()) return a.as_text().compare(b.as_text()) <=> 0;
  if (a.is_int() && b.is_int()) return a.as_int() <=> b.as_int();
  if (a.is_float() && b.is_float()) return a.as_float() <=> b.as_float();
  if (a.is_int()) return compare_int_double(a.as_int(), b.as_float());
  return 0 <=> compare_int_double(b.as_int(), a.as_float());
}

std::string format_double(double d) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), d);
  std::string s(buf.data(), end);
  if (std::isfinite(d) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

std::string format_value(const Value& v) {
  switch (v.raw().index()) {
    case 0:
      return {};
    case 1:
      return std::to_string(v.as_int());
    case 2:
      return format_double(v.as_float());
    default:
      return v.as_text();
  }
}

std::optional<std::size_t> TableMeta::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return std::nullopt;
}

void TableMeta::check() const {
  if (!is_valid_table_name(name)) throw DataError("invalid table name '" + name + "'");
  if (columns.empty()) throw DataError("table '" + name + "' has no columns");
  std::set<std::string> seen;
  for (const auto& c : columns) {
    if (c.name.empty()) throw DataError("table '" + name + "' has an empty column name");
    if (!seen.insert(c.name).second) {
      throw DataError("table '" + name + "' has duplicate column '" + c.name + "'");
    }
  }
  if (row_count && *row_count < 0) throw DataError("negative row count");
}

bool is_valid_table_name(std::string_view name) {
  if (name.empty() || name.size() > 128) return false;
  const auto alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  if (!alpha(name[0])) return false;
  for (char c : name) {
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  }
  // Reserved for internal bookkeeping tables.
  return name.rfind("_tb_", 0) != 0;
}

std::string default_column_name(std::size_t zero_based_index) {
  return "V" + std::to_string(zero_based_index + 1);
}

void check_row(const std::vector<ColumnMeta>& columns, const Row& row) {
  if (row.size() != columns.size()) {
    throw DataError("row has " + std::to_string(row.size()) + " cells, schema has " +
                    std::to_string(columns.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!row[i].is_null() && row[i].dtype() != columns[i].dtype) {
      throw DataError("column '" + columns[i].name + "' expects " + std::string(to_string(columns[i].dtype)) +
                      ", got " + std::string(to_string(row[i].dtype())));
    }
  }
}

}  // namespace tracebench
