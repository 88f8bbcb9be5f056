#include "tracebench/expr.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <optional>

namespace tracebench::expr {

namespace {

enum class Tok {
  number_int,
  number_float,
  string,
  ident,
  op,  // punctuation and operators, text in Token::text
  separator,  // ';' or newline at nesting depth 0
  end,
};

struct Token {
  Tok kind = Tok::end;
  std::string text;
  std::int64_t ival = 0;
  double fval = 0;
  int line = 1;
  int column = 1;
};

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9') || c == '.'; }
bool digit(char c) { return c >= '0' && c <= '9'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  int depth = 0;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    Token t;
    t.line = line;
    t.column = col;
    if (c == '\n' || c == ';') {
      if (c == ';' || depth == 0) {
        t.kind = Tok::separator;
        t.text = std::string(1, c);
        if (out.empty() || out.back().kind != Tok::separator) out.push_back(t);
      }
      advance(1);
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      advance(1);
      continue;
    }
    if (c == '#') {  // comment to end of line
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (digit(c) || (c == '.' && i + 1 < src.size() && digit(src[i + 1]))) {
      std::size_t j = i;
      bool is_float = false;
      while (j < src.size() && digit(src[j])) ++j;
      if (j < src.size() && src[j] == '.') {
        is_float = true;
        ++j;
        while (j < src.size() && digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && digit(src[k])) {
          is_float = true;
          j = k;
          while (j < src.size() && digit(src[j])) ++j;
        }
      }
      t.text = std::string(src.substr(i, j - i));
      if (is_float) {
        t.kind = Tok::number_float;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.fval);
      } else {
        t.kind = Tok::number_int;
        auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.ival);
        if (ec != std::errc()) {
          t.kind = Tok::number_float;
          std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.fval);
        }
      }
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (c == '\'' || c == '"') {
      std::string s;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < src.size()) {
        if (src[j] == '\\' && j + 1 < src.size()) {
          const char e = src[j + 1];
          s += e == 'n' ? '\n' : e == 't' ? '\t' : e;
          j += 2;
        } else if (src[j] == c) {
          if (j + 1 < src.size() && src[j + 1] == c) {
            s += c;
            j += 2;
          } else {
            closed = true;
            ++j;
            break;
          }
        } else {
          s += src[j++];
        }
      }
      if (!closed) throw ExprError("unterminated string literal", line, col);
      t.kind = Tok::string;
      t.text = std::move(s);
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      t.kind = Tok::ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
      out.push_back(std::move(t));
      continue;
    }
    static constexpr std::string_view two[] = {"<=", ">=", "==", "!=", "&&", "||", "<>"};
    std::string_view op;
    for (auto candidate : two) {
      if (src.substr(i, 2) == candidate) op = candidate;
    }
    if (op.empty()) {
      static constexpr std::string_view one = "+-*/%^<>=!&|()[]{},";
      if (one.find(c) == std::string_view::npos) {
        throw ExprError(std::string("unexpected character '") + c + "'", line, col);
      }
      op = src.substr(i, 1);
    }
    if (op == "(" || op == "[" || op == "{") ++depth;
    if (op == ")" || op == "]" || op == "}") depth = std::max(0, depth - 1);
    t.kind = Tok::op;
    t.text = op == "<>" ? "!=" : std::string(op);
    advance(op.size());
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

}  // namespace

enum class NodeKind { literal, name, field, unary, binary, call, let, if_stmt, block };

struct Node {
  NodeKind kind = NodeKind::literal;
  std::string text;  // operator, function or variable name
  Value literal;
  std::vector<std::unique_ptr<Node>> kids;
  int line = 1;
  int column = 1;
};

namespace {

using NodePtr = std::unique_ptr<Node>;

NodePtr make(NodeKind kind, const Token& at) {
  auto n = std::make_unique<Node>();
  n->kind = kind;
  n->line = at.line;
  n->column = at.column;
  return n;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<NodePtr> statements() {
    std::vector<NodePtr> out;
    skip_separators();
    while (peek().kind != Tok::end) {
      out.push_back(statement());
      if (peek().kind != Tok::end && peek().kind != Tok::separator) {
        fail("expected end of statement, found '" + describe(peek()) + "'");
      }
      skip_separators();
    }
    return out;
  }

  NodePtr single_expression() {
    skip_separators();
    if (peek().kind == Tok::end) fail("empty expression");
    NodePtr e = expression();
    skip_separators();
    if (peek().kind != Tok::end) fail("unexpected '" + describe(peek()) + "' after expression");
    return e;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  static std::string describe(const Token& t) {
    if (t.kind == Tok::end) return "end of input";
    if (t.kind == Tok::separator) return t.text == "\n" ? "newline" : ";";
    return t.text;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ExprError(msg, peek().line, peek().column); }

  bool is_op(std::string_view op, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::op && peek(ahead).text == op;
  }
  bool is_keyword(std::string_view kw) const { return peek().kind == Tok::ident && lower(peek().text) == kw; }

  void expect_op(std::string_view op) {
    if (!is_op(op)) fail("expected '" + std::string(op) + "', found '" + describe(peek()) + "'");
    take();
  }

  void skip_separators() {
    while (peek().kind == Tok::separator) take();
  }

  void skip_newlines() {
    while (peek().kind == Tok::separator && peek().text == "\n") take();
  }

  NodePtr statement() {
    if (is_op("{")) {
      auto block = make(NodeKind::block, take());
      skip_separators();
      while (!is_op("}")) {
        if (peek().kind == Tok::end) fail("unterminated block");
        block->kids.push_back(statement());
        skip_separators();
      }
      take();
      return block;
    }
    if (is_keyword("let")) {
      auto n = make(NodeKind::let, take());
      if (peek().kind != Tok::ident) fail("expected a variable name after let");
      n->text = take().text;
      expect_op("=");
      n->kids.push_back(expression());
      return n;
    }
    if (is_keyword("if")) {
      auto n = make(NodeKind::if_stmt, take());
      expect_op("(");
      n->kids.push_back(expression());
      expect_op(")");
      skip_newlines();
      n->kids.push_back(statement());
      // else may follow on the next line
      std::size_t save = pos_;
      skip_newlines();
      if (is_keyword("else")) {
        take();
        skip_newlines();
        n->kids.push_back(statement());
      } else {
        pos_ = save;
      }
      return n;
    }
    return expression();
  }

  NodePtr expression() { return parse_or(); }

  NodePtr binary(NodePtr lhs, const Token& at, std::string op, NodePtr rhs) {
    auto n = make(NodeKind::binary, at);
    n->text = std::move(op);
    n->kids.push_back(std::move(lhs));
    n->kids.push_back(std::move(rhs));
    return n;
  }

  NodePtr parse_or() {
    NodePtr lhs = parse_and();
    while (is_op("||") || is_op("|") || is_keyword("or")) {
      const Token at = take();
      lhs = binary(std::move(lhs), at, "or", parse_and());
    }
    return lhs;
  }

  NodePtr parse_and() {
    NodePtr lhs = parse_not();
    while (is_op("&&") || is_op("&") || is_keyword("and")) {
      const Token at = take();
      lhs = binary(std::move(lhs), at, "and", parse_not());
    }
    return lhs;
  }

  NodePtr parse_not() {
    if (is_op("!") || is_keyword("not")) {
      auto n = make(NodeKind::unary, take());
      n->text = "not";
      n->kids.push_back(parse_not());
      return n;
    }
    return parse_cmp();
  }

  NodePtr parse_cmp() {
    NodePtr lhs = parse_add();
    static constexpr std::string_view ops[] = {"<", "<=", ">", ">=", "==", "=", "!="};
    for (auto op : ops) {
      if (is_op(op)) {
        const Token at = take();
        std::string name = op == "=" ? "==" : std::string(op);
        return binary(std::move(lhs), at, name, parse_add());
      }
    }
    return lhs;
  }

  NodePtr parse_add() {
    NodePtr lhs = parse_mul();
    while (is_op("+") || is_op("-")) {
      const Token at = take();
      lhs = binary(std::move(lhs), at, at.text, parse_mul());
    }
    return lhs;
  }

  NodePtr parse_mul() {
    NodePtr lhs = parse_unary();
    while (is_op("*") || is_op("/") || is_op("%")) {
      const Token at = take();
      lhs = binary(std::move(lhs), at, at.text, parse_unary());
    }
    return lhs;
  }

  NodePtr parse_unary() {
    if (is_op("-") || is_op("+")) {
      const Token at = take();
      NodePtr operand = parse_unary();
      if (at.text == "+") return operand;
      auto n = make(NodeKind::unary, at);
      n->text = "neg";
      n->kids.push_back(std::move(operand));
      return n;
    }
    return parse_pow();
  }

  NodePtr parse_pow() {
    NodePtr base = parse_postfix();
    if (is_op("^")) {
      const Token at = take();
      return binary(std::move(base), at, "^", parse_unary());
    }
    return base;
  }

  NodePtr parse_postfix() {
    NodePtr e = primary();
    while (is_op("[")) {
      if (e->kind != NodeKind::name || e->text != "t") fail("indexing is only supported on the record t");
      const Token at = take();
      const bool doubled = is_op("[");
      if (doubled) take();
      auto n = make(NodeKind::field, at);
      n->kids.push_back(expression());
      expect_op("]");
      if (doubled) expect_op("]");
      e = std::move(n);
    }
    return e;
  }

  NodePtr primary() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::number_int: {
        auto n = make(NodeKind::literal, take());
        n->literal = Value(t.ival);
        return n;
      }
      case Tok::number_float: {
        auto n = make(NodeKind::literal, take());
        n->literal = Value(t.fval);
        return n;
      }
      case Tok::string: {
        auto n = make(NodeKind::literal, take());
        n->literal = Value(t.text);
        return n;
      }
      case Tok::ident: {
        const std::string kw = lower(t.text);
        if (kw == "true" || kw == "false") {
          auto n = make(NodeKind::literal, take());
          n->literal = Value(static_cast<std::int64_t>(kw == "true"));
          return n;
        }
        if (kw == "null" || kw == "na") {
          take();
          return make(NodeKind::literal, t);
        }
        if (kw == "and" || kw == "or" || kw == "not" || kw == "if" || kw == "else" || kw == "let") {
          fail("unexpected keyword '" + t.text + "'");
        }
        const Token at = take();
        if (is_op("(")) {
          take();
          auto n = make(NodeKind::call, at);
          n->text = at.text;
          skip_newlines();
          if (!is_op(")")) {
            for (;;) {
              n->kids.push_back(expression());
              if (is_op(",")) {
                take();
                continue;
              }
              break;
            }
          }
          expect_op(")");
          return n;
        }
        auto n = make(NodeKind::name, at);
        n->text = at.text;
        return n;
      }
      case Tok::op:
        if (t.text == "(") {
          take();
          NodePtr e = expression();
          expect_op(")");
          return e;
        }
        fail("unexpected '" + t.text + "'");
      default:
        fail("unexpected " + describe(t));
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation

[[noreturn]] void fail_at(const Node& n, const std::string& msg) { throw ExprError(msg, n.line, n.column); }

Value eval(const Node& n, Context& ctx);

double num(const Node& at, const Value& v) {
  if (v.is_int()) return static_cast<double>(v.as_int());
  if (v.is_float()) return v.as_float();
  fail_at(at, "expected a number, got '" + v.as_text() + "'");
}

Value float_result(const Node& at, double d) {
  if (std::isnan(d)) fail_at(at, "result is not a number");
  return Value(d);
}

const Row& current_record(const Node& at, const Context& ctx) {
  if (!ctx.record) fail_at(at, "no current record");
  return *ctx.record;
}

Value field_by_name(const Node& at, const Context& ctx, std::string_view name) {
  const Row& r = current_record(at, ctx);
  if (ctx.columns) {
    for (std::size_t i = 0; i < ctx.columns->size(); ++i) {
      if ((*ctx.columns)[i].name == name && i < r.size()) return r[i];
    }
  }
  fail_at(at, "unknown name '" + std::string(name) + "'");
}

Value arith(const Node& n, const std::string& op, const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return Value::null();
  if (a.is_text() || b.is_text()) fail_at(n, "operator " + op + " needs numbers");
  if (op == "^") return float_result(n, std::pow(num(n, a), num(n, b)));
  if (op == "/") {
    const double d = num(n, b);
    if (d == 0) return Value::null();
    return float_result(n, num(n, a) / d);
  }
  if (a.is_int() && b.is_int()) {
    const std::int64_t x = a.as_int(), y = b.as_int();
    std::int64_t r = 0;
    bool overflow = false;
    if (op == "+") {
      overflow = __builtin_add_overflow(x, y, &r);
    } else if (op == "-") {
      overflow = __builtin_sub_overflow(x, y, &r);
    } else if (op == "*") {
      overflow = __builtin_mul_overflow(x, y, &r);
    } else if (op == "%") {
      if (y == 0) return Value::null();
      r = x % y;
      if (r != 0 && ((r < 0) != (y < 0))) r += y;  // sign follows the divisor
    }
    if (overflow) fail_at(n, "integer overflow in " + op);
    return Value(r);
  }
  const double x = num(n, a), y = num(n, b);
  if (op == "+") return float_result(n, x + y);
  if (op == "-") return float_result(n, x - y);
  if (op == "*") return float_result(n, x * y);
  if (y == 0) return Value::null();
  double r = std::fmod(x, y);
  if (r != 0 && ((r < 0) != (y < 0))) r += y;
  return float_result(n, r);
}

Value compare(const Node& n, const std::string& op, const Value& a, const Value& b) {
  if (a.is_null() || b.is_null()) return Value::null();
  std::partial_ordering ord = std::partial_ordering::unordered;
  try {
    ord = compare_values(a, b);
  } catch (const DataError& e) {
    fail_at(n, e.what());
  }
  bool r = false;
  if (op == "<") r = ord < 0;
  if (op == "<=") r = ord <= 0;
  if (op == ">") r = ord > 0;
  if (op == ">=") r = ord >= 0;
  if (op == "==") r = ord == 0;
  if (op == "!=") r = ord != 0;
  return Value(static_cast<std::int64_t>(r));
}

std::optional<bool> truth_at(const Node& n, const Value& v) {
  try {
    return truth(v);
  } catch (const ExprError&) {
    fail_at(n, "expected a boolean, got text '" + v.as_text() + "'");
  }
}

Value boolean(bool b) { return Value(static_cast<std::int64_t>(b)); }

std::string to_text(const Value& v) { return v.is_text() ? v.as_text() : format_value(v); }

Value aggregate(const Node& n, const std::string& name, Context& ctx) {
  const Row* saved = ctx.record;
  Value acc;
  std::int64_t count = 0;
  double sum = 0;
  bool all_int = true;
  std::int64_t isum = 0;
  for (const Row& r : ctx.group) {
    ctx.record = &r;
    Value v = eval(*n.kids[0], ctx);
    if (v.is_null()) continue;
    if (name == "sum" || name == "mean") {
      if (v.is_text()) fail_at(n, name + "() needs numbers");
      sum += num(n, v);
      if (v.is_int() && all_int && !__builtin_add_overflow(isum, v.as_int(), &isum)) {
      } else {
        all_int = false;
      }
    } else if (acc.is_null()) {
      acc = v;
    } else {
      std::partial_ordering ord = std::partial_ordering::unordered;
      try {
        ord = compare_values(v, acc);
      } catch (const DataError& e) {
        fail_at(n, e.what());
      }
      if ((name == "min" && ord < 0) || (name == "max" && ord > 0)) acc = v;
    }
    ++count;
  }
  ctx.record = saved;
  if (name == "count") return Value(count);
  if (name == "sum") return count == 0 ? Value::null() : all_int ? Value(isum) : Value(sum);
  if (name == "mean") return count == 0 ? Value::null() : Value(sum / static_cast<double>(count));
  return acc;
}

Value call(const Node& n, Context& ctx) {
  const std::string name = lower(n.text);
  const auto argc = n.kids.size();

  if (name == "emit") {
    if (!ctx.emit) fail_at(n, "emit() is not available here");
    std::vector<Value> args;
    args.reserve(argc);
    for (const auto& k : n.kids) args.push_back(eval(*k, ctx));
    ctx.emit(args);
    return Value::null();
  }
  if (name == "count" && ctx.in_group) {
    if (argc == 0) return Value(static_cast<std::int64_t>(ctx.group.size()));
    if (argc == 1) return aggregate(n, "count", ctx);
  }
  if (ctx.in_group && argc == 1 && (name == "sum" || name == "mean" || name == "min" || name == "max")) {
    return aggregate(n, name, ctx);
  }
  if (name == "ifelse") {
    if (argc != 3) fail_at(n, "ifelse() takes 3 arguments");
    auto c = truth_at(n, eval(*n.kids[0], ctx));
    if (!c) return Value::null();
    return eval(*n.kids[*c ? 1 : 2], ctx);
  }

  std::vector<Value> args;
  args.reserve(argc);
  for (const auto& k : n.kids) args.push_back(eval(*k, ctx));
  auto want = [&](std::size_t lo, std::size_t hi) {
    if (argc < lo || argc > hi) {
      fail_at(n, n.text + "() takes " + (lo == hi ? std::to_string(lo) : std::to_string(lo) + "-" + std::to_string(hi)) +
                     " arguments, got " + std::to_string(argc));
    }
  };
  auto any_null = [&] { return std::any_of(args.begin(), args.end(), [](const Value& v) { return v.is_null(); }); };

  if (name == "is_null" || name == "is.na" || name == "is.null") {
    want(1, 1);
    return boolean(args[0].is_null());
  }
  if (name == "coalesce") {
    for (auto& a : args) {
      if (!a.is_null()) return a;
    }
    return Value::null();
  }

  using UnaryFn = double (*)(double);
  static const std::pair<std::string_view, UnaryFn> unary[] = {
      {"sqrt", [](double x) { return std::sqrt(x); }},  {"exp", [](double x) { return std::exp(x); }},
      {"log10", [](double x) { return std::log10(x); }}, {"log2", [](double x) { return std::log2(x); }},
      {"sin", [](double x) { return std::sin(x); }},    {"cos", [](double x) { return std::cos(x); }},
  };
  for (const auto& [fname, fn] : unary) {
    if (name == fname) {
      want(1, 1);
      if (any_null()) return Value::null();
      return float_result(n, fn(num(n, args[0])));
    }
  }
  if (name == "log") {
    want(1, 2);
    if (any_null()) return Value::null();
    const double x = std::log(num(n, args[0]));
    return float_result(n, argc == 2 ? x / std::log(num(n, args[1])) : x);
  }
  if (name == "abs") {
    want(1, 1);
    if (any_null()) return Value::null();
    if (args[0].is_int()) return Value(args[0].as_int() < 0 ? -args[0].as_int() : args[0].as_int());
    return Value(std::fabs(num(n, args[0])));
  }
  if (name == "floor" || name == "ceil" || name == "ceiling" || name == "round" || name == "trunc") {
    want(1, 2);
    if (any_null()) return Value::null();
    if (args[0].is_int() && argc == 1) return args[0];
    double x = num(n, args[0]);
    const double scale = argc == 2 ? std::pow(10.0, num(n, args[1])) : 1.0;
    x *= scale;
    x = name == "floor" ? std::floor(x) : name == "round" ? std::round(x) : name == "trunc" ? std::trunc(x) : std::ceil(x);
    x /= scale;
    if (argc == 1 && std::fabs(x) < 9.2e18) return Value(static_cast<std::int64_t>(x));
    return float_result(n, x);
  }
  if (name == "pow") {
    want(2, 2);
    return arith(n, "^", args[0], args[1]);
  }
  if (name == "min" || name == "max" || name == "pmin" || name == "pmax") {
    if (argc == 0) fail_at(n, n.text + "() needs arguments");
    if (any_null()) return Value::null();
    Value best = args[0];
    for (std::size_t i = 1; i < argc; ++i) {
      std::partial_ordering ord = std::partial_ordering::unordered;
      try {
        ord = compare_values(args[i], best);
      } catch (const DataError& e) {
        fail_at(n, e.what());
      }
      const bool is_min = name == "min" || name == "pmin";
      if ((is_min && ord < 0) || (!is_min && ord > 0)) best = args[i];
    }
    return best;
  }
  if (name == "as_number" || name == "as.numeric" || name == "as_float") {
    want(1, 1);
    if (args[0].is_null()) return Value::null();
    if (args[0].is_numeric()) return Value(num(n, args[0]));
    double d = 0;
    const std::string& s = args[0].as_text();
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec != std::errc() || p != s.data() + s.size()) return Value::null();
    return Value(d);
  }
  if (name == "as_int" || name == "as.integer") {
    want(1, 1);
    if (args[0].is_null()) return Value::null();
    if (args[0].is_int()) return args[0];
    if (args[0].is_float()) return Value(static_cast<std::int64_t>(std::trunc(args[0].as_float())));
    std::int64_t v = 0;
    const std::string& s = args[0].as_text();
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return Value::null();
    return Value(v);
  }
  if (name == "as_text" || name == "as.character") {
    want(1, 1);
    if (args[0].is_null()) return Value::null();
    return Value(to_text(args[0]));
  }
  if (name == "nchar" || name == "len") {
    want(1, 1);
    if (any_null()) return Value::null();
    return Value(static_cast<std::int64_t>(to_text(args[0]).size()));
  }
  if (name == "toupper" || name == "tolower") {
    want(1, 1);
    if (any_null()) return Value::null();
    std::string s = to_text(args[0]);
    for (auto& c : s) c = static_cast<char>(name == "toupper" ? std::toupper(c) : std::tolower(c));
    return Value(std::move(s));
  }
  if (name == "substr") {
    want(2, 3);
    if (any_null()) return Value::null();
    const std::string s = to_text(args[0]);
    const auto start = static_cast<std::int64_t>(num(n, args[1]));
    const std::int64_t len = argc == 3 ? static_cast<std::int64_t>(num(n, args[2])) : static_cast<std::int64_t>(s.size());
    const std::int64_t from = std::max<std::int64_t>(start, 1) - 1;
    if (from >= static_cast<std::int64_t>(s.size()) || len <= 0) return Value(std::string());
    return Value(s.substr(static_cast<std::size_t>(from), static_cast<std::size_t>(len)));
  }
  if (name == "concat" || name == "paste0" || name == "paste") {
    if (any_null()) return Value::null();
    std::string out;
    for (std::size_t i = 0; i < argc; ++i) {
      if (i && name == "paste") out += ' ';
      out += to_text(args[i]);
    }
    return Value(std::move(out));
  }
  if (name == "contains" || name == "startswith" || name == "endswith") {
    want(2, 2);
    if (any_null()) return Value::null();
    const std::string s = to_text(args[0]), sub = to_text(args[1]);
    bool r = false;
    if (name == "contains") r = s.find(sub) != std::string::npos;
    if (name == "startswith") r = s.rfind(sub, 0) == 0;
    if (name == "endswith") r = s.size() >= sub.size() && s.compare(s.size() - sub.size(), sub.size(), sub) == 0;
    return boolean(r);
  }
  if (name == "count" || name == "sum" || name == "mean") {
    fail_at(n, n.text + "() is only available in a reduce function");
  }
  fail_at(n, "unknown function '" + n.text + "'");
}

Value eval(const Node& n, Context& ctx) {
  switch (n.kind) {
    case NodeKind::literal:
      return n.literal;
    case NodeKind::name: {
      if (const Value* v = ctx.lookup(n.text)) return *v;
      return field_by_name(n, ctx, n.text);
    }
    case NodeKind::field: {
      const Row& r = current_record(n, ctx);
      const Value key = eval(*n.kids[0], ctx);
      if (key.is_text()) return field_by_name(n, ctx, key.as_text());
      if (!key.is_numeric()) fail_at(n, "field index is null");
      const double k = num(n, key);
      if (k != std::floor(k) || k < 1 || k > static_cast<double>(r.size())) {
        fail_at(n, "field index " + format_value(key) + " out of range 1.." + std::to_string(r.size()));
      }
      return r[static_cast<std::size_t>(k) - 1];
    }
    case NodeKind::unary: {
      const Value v = eval(*n.kids[0], ctx);
      if (n.text == "not") {
        auto b = truth_at(n, v);
        return b ? boolean(!*b) : Value::null();
      }
      if (v.is_null()) return v;
      if (v.is_int()) {
        if (v.as_int() == std::numeric_limits<std::int64_t>::min()) fail_at(n, "integer overflow in negation");
        return Value(-v.as_int());
      }
      return Value(-num(n, v));
    }
    case NodeKind::binary: {
      const std::string& op = n.text;
      if (op == "and" || op == "or") {
        const bool is_and = op == "and";
        auto a = truth_at(n, eval(*n.kids[0], ctx));
        if (a && *a != is_and) return boolean(*a);  // short circuit: false and / true or
        auto b = truth_at(n, eval(*n.kids[1], ctx));
        if (b && *b != is_and) return boolean(*b);
        if (!a || !b) return Value::null();
        return boolean(is_and);
      }
      const Value a = eval(*n.kids[0], ctx);
      const Value b = eval(*n.kids[1], ctx);
      if (op == "<" || op == "<=" || op == ">" || op == ">=" || op == "==" || op == "!=") return compare(n, op, a, b);
      return arith(n, op, a, b);
    }
    case NodeKind::call:
      return call(n, ctx);
    case NodeKind::let:
      ctx.set(n.text, eval(*n.kids[0], ctx));
      return Value::null();
    case NodeKind::if_stmt: {
      auto c = truth_at(n, eval(*n.kids[0], ctx));
      if (c && *c) return eval(*n.kids[1], ctx);
      if (n.kids.size() > 2) return eval(*n.kids[2], ctx);
      return Value::null();
    }
    case NodeKind::block: {
      Value last;
      for (const auto& k : n.kids) last = eval(*k, ctx);
      return last;
    }
  }
  return Value::null();
}

bool mentions_emit(const Node& n) {
  if (n.kind == NodeKind::call && lower(n.text) == "emit") return true;
  return std::any_of(n.kids.begin(), n.kids.end(), [](const auto& k) { return mentions_emit(*k); });
}

}  // namespace

void Context::set(std::string name, Value v) {
  for (auto& [k, val] : vars) {
    if (k == name) {
      val = std::move(v);
      return;
    }
  }
  vars.emplace_back(std::move(name), std::move(v));
}

const Value* Context::lookup(std::string_view name) const {
  for (const auto& [k, val] : vars) {
    if (k == name) return &val;
  }
  return nullptr;
}

std::optional<bool> truth(const Value& v) {
  if (v.is_null()) return std::nullopt;
  if (v.is_int()) return v.as_int() != 0;
  if (v.is_float()) return v.as_float() != 0;
  throw ExprError("expected a boolean, got text '" + v.as_text() + "'", 0, 0);
}

Program::Program() = default;
Program::~Program() = default;
Program::Program(Program&&) noexcept = default;
Program& Program::operator=(Program&&) noexcept = default;

Program Program::parse(std::string_view text) {
  Program p;
  p.source_ = std::string(text);
  Parser parser(tokenize(text));
  p.statements_ = parser.statements();
  return p;
}

Program Program::parse_expression(std::string_view text) {
  Program p;
  p.source_ = std::string(text);
  Parser parser(tokenize(text));
  p.statements_.push_back(parser.single_expression());
  return p;
}

Value Program::run(Context& ctx) const {
  Value last;
  for (const auto& s : statements_) {
    Value v = eval(*s, ctx);
    if (s->kind != NodeKind::let) last = std::move(v);
  }
  return last;
}

bool Program::uses_emit() const {
  return std::any_of(statements_.begin(), statements_.end(), [](const auto& s) { return mentions_emit(*s); });
}

}  // namespace tracebench::expr
