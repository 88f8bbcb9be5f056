// SQL subset: SELECT [DISTINCT] items FROM table [WHERE pred] [GROUP BY cols]
//
//   item: * | column [AS alias] | COUNT(column | *) [AS alias]
//   pred: column op literal | literal op column | pred AND pred | pred OR pred
//         | NOT pred | ( pred ),   op in < <= > >= = != <>
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tracebench/value.hpp"

namespace tracebench::query {

struct SourcePos {
  int line = 1;
  int column = 1;
};

enum class ErrorKind : std::uint8_t { syntax, unsupported, validation };

class QueryError : public std::runtime_error {
 public:
  QueryError(ErrorKind kind, SourcePos pos, const std::string& message)
      : std::runtime_error("line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) + ": " +
                           message),
        kind_(kind),
        pos_(pos),
        message_(message) {}
  ErrorKind kind() const { return kind_; }
  SourcePos pos() const { return pos_; }
  const std::string& message() const { return message_; }

 private:
  ErrorKind kind_;
  SourcePos pos_;
  std::string message_;
};

struct ColumnRef {
  std::string name;
  SourcePos pos;
  std::size_t index = 0;  // resolved by validate()
};

struct ProjItem {
  enum class Kind : std::uint8_t { column, count, count_star, star };
  Kind kind = Kind::column;
  ColumnRef column;  // unused for count_star and star
  std::optional<std::string> alias;
  SourcePos pos;
};

enum class CmpOp : std::uint8_t { lt, le, gt, ge, eq, ne };

std::string_view to_string(CmpOp op);
// The operator with its operands swapped: a < b  <=>  b > a.
CmpOp mirror(CmpOp op);

struct Predicate {
  enum class Kind : std::uint8_t { compare, and_, or_, not_ };
  Kind kind = Kind::compare;
  // compare: column op literal (literal-first input is normalized).
  ColumnRef column;
  CmpOp op = CmpOp::eq;
  Value literal;
  SourcePos pos;
  std::vector<Predicate> children;
};

struct QueryAst {
  bool distinct = false;
  std::vector<ProjItem> projections;
  std::string source;
  SourcePos source_pos;
  std::optional<Predicate> predicate;
  std::vector<ColumnRef> group_by;
  std::string text;
};

QueryAst parse_query(std::string_view text);

// A query whose column references are resolved against a source schema.
struct CheckedQuery {
  QueryAst ast;  // star expanded; every ColumnRef::index set
  TableMeta source;
  std::vector<ColumnMeta> output;
  bool grouped() const { return !ast.group_by.empty(); }
};

CheckedQuery validate(const QueryAst& ast, const TableMeta& schema);

// Three-valued evaluation of a predicate against a source row.
std::optional<bool> eval_predicate(const Predicate& p, const Row& row);

// Canonical SQL text of a query (used in plan descriptions).
std::string to_sql(const QueryAst& ast);
std::string to_sql(const Predicate& p);
std::string literal_sql(const Value& v);

}  // namespace tracebench::query
