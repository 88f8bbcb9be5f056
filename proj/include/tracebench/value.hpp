// Typed scalar cells, column and table metadata shared by every backend.
#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tracebench {

enum class DType : std::uint8_t { int64, float64, text };

std::string_view to_string(DType t);
DType dtype_from_string(std::string_view s);

// Raised for schema or type violations detected while handling data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Value {
 public:
  using Storage = std::variant<std::monostate, std::int64_t, double, std::string>;

  Value() = default;
  Value(std::int64_t v) : data_(v) {}
  Value(int v) : data_(static_cast<std::int64_t>(v)) {}
  Value(double v) : data_(v) {}
  Value(std::string v) : data_(std::move(v)) {}
  Value(const char* v) : data_(std::string(v)) {}

  static Value null() { return Value(); }

  bool is_null() const { return data_.index() == 0; }
  bool is_int() const { return data_.index() == 1; }
  bool is_float() const { return data_.index() == 2; }
  bool is_text() const { return data_.index() == 3; }
  bool is_numeric() const { return is_int() || is_float(); }

  // dtype of a non-null value.
  DType dtype() const;

  std::int64_t as_int() const { return std::get<std::int64_t>(data_); }
  double as_float() const { return std::get<double>(data_); }
  const std::string& as_text() const { return std::get<std::string>(data_); }
  // Numeric value widened to double; throws DataError for text/null.
  double to_double() const;

  const Storage& raw() const { return data_; }

  // Exact structural equality: dtype and value (null == null).
  friend bool operator==(const Value& a, const Value& b) = default;

 private:
  Storage data_;
};

// Total order used for sorting and shuffle keys: null first, then by dtype
// tag, then by value. Use compare_same_type() where mixing dtypes is an error.
std::strong_ordering total_order(const Value& a, const Value& b);

// Ordering between two non-null values of compatible dtype (numeric vs numeric
// or text vs text). Throws DataError on text/numeric mixes.
std::partial_ordering compare_values(const Value& a, const Value& b);

// Formats a cell the way the CSV writer does (null -> empty, floats always
// carry a decimal point or exponent so they re-import as float64).
std::string format_value(const Value& v);
std::string format_double(double d);

using Row = std::vector<Value>;

struct ColumnMeta {
  std::string name;
  DType dtype = DType::text;

  friend bool operator==(const ColumnMeta&, const ColumnMeta&) = default;
};

enum class TableOrigin : std::uint8_t { imported, query_result, transferred };

std::string_view to_string(TableOrigin o);
TableOrigin origin_from_string(std::string_view s);

struct TableMeta {
  std::string name;
  std::vector<ColumnMeta> columns;
  std::optional<std::int64_t> row_count;
  TableOrigin origin = TableOrigin::imported;

  std::optional<std::size_t> column_index(std::string_view column) const;
  // Throws DataError unless the metadata is well-formed.
  void check() const;
};

// Table names double as file names and SQL identifiers.
bool is_valid_table_name(std::string_view name);

std::string default_column_name(std::size_t zero_based_index);

// A fully materialized table; used for query results, tests and transfers of
// modest size.
struct Table {
  TableMeta meta;
  std::vector<Row> rows;
};

// Checks that every cell matches its column dtype (or is null).
void check_row(const std::vector<ColumnMeta>& columns, const Row& row);

}  // namespace tracebench
