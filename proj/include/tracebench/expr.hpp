// A small sandboxed expression language over records.
//
//   expr:   literals (42, 0.5, 'text', true, null), names, t[[k]] (1-based
//           field k of the current record, or t[["name"]]), arithmetic
//           (+ - * / % ^), comparisons (< <= > >= == = !=), logic
//           (and/&&/&, or/||/|, not/!) and function calls.
//   stmt:   expr | emit(a, ...) | let name = expr | if (c) stmt [else stmt]
//           | { stmt; ... }. Statements are separated by ';' or newlines.
//
// Comparisons and arithmetic propagate null; and/or/not use three-valued
// logic. Bare names resolve to variables first (x, key, row, let-bound),
// then to columns of the current record.
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tracebench/value.hpp"

namespace tracebench::expr {

class ExprError : public std::runtime_error {
 public:
  ExprError(const std::string& message, int line, int column)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
        message_(message),
        line_(line),
        column_(column) {}
  const std::string& message() const { return message_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  std::string message_;
  int line_;
  int column_;
};

struct Node;

// Evaluation environment. All pointers are borrowed for the duration of a call.
struct Context {
  const Row* record = nullptr;
  const std::vector<ColumnMeta>* columns = nullptr;
  // Records of the current group (reduce stage); enables count()/sum(e)/...
  std::span<const Row> group;
  bool in_group = false;
  std::vector<std::pair<std::string, Value>> vars;
  std::function<void(std::span<const Value>)> emit;

  void set(std::string name, Value v);
  const Value* lookup(std::string_view name) const;
};

class Program {
 public:
  Program();
  ~Program();
  Program(Program&&) noexcept;
  Program& operator=(Program&&) noexcept;

  // One or more statements.
  static Program parse(std::string_view text);
  // Exactly one expression.
  static Program parse_expression(std::string_view text);

  // Runs all statements; returns the value of the last expression statement
  // (null if none). Context variables set by let persist in ctx.
  Value run(Context& ctx) const;

  const std::string& source() const { return source_; }
  bool uses_emit() const;

 private:
  std::vector<std::unique_ptr<Node>> statements_;
  std::string source_;
};

// Three-valued truth: nullopt for null; numeric nonzero is true; text throws.
std::optional<bool> truth(const Value& v);

}  // namespace tracebench::expr
