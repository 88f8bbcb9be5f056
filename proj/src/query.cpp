#include "tracebench/query.hpp"

#include <charconv>
#include <limits>
#include <set>
#include <sstream>

#include "tracebench/sql_names.hpp"

namespace tracebench::query {

std::string_view to_string(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
    case CmpOp::eq: return "=";
    case CmpOp::ne: return "!=";
  }
  return "?";
}

CmpOp mirror(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return CmpOp::gt;
    case CmpOp::le: return CmpOp::ge;
    case CmpOp::gt: return CmpOp::lt;
    case CmpOp::ge: return CmpOp::le;
    default: return op;
  }
}

namespace {

enum class Tok : std::uint8_t { ident, quoted_ident, integer, decimal, string, symbol, end };

struct Token {
  Tok kind = Tok::end;
  std::string text;
  Value value;
  SourcePos pos;
};

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return out;
}

[[noreturn]] void syntax(SourcePos pos, const std::string& msg) { throw QueryError(ErrorKind::syntax, pos, msg); }
[[noreturn]] void unsupported(SourcePos pos, const std::string& what) {
  throw QueryError(ErrorKind::unsupported, pos, what + " is not supported");
}

std::vector<Token> lex(std::string_view s) {
  std::vector<Token> out;
  SourcePos pos;
  std::size_t i = 0;
  auto bump = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      if (s[i] == '\n') {
        ++pos.line;
        pos.column = 1;
      } else {
        ++pos.column;
      }
    }
  };
  const auto ident_start = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  const auto digit = [](char c) { return c >= '0' && c <= '9'; };
  while (i < s.size()) {
    const char c = s[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      bump(1);
      continue;
    }
    if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {  // line comment
      while (i < s.size() && s[i] != '\n') bump(1);
      continue;
    }
    Token t;
    t.pos = pos;
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < s.size() && (ident_start(s[j]) || digit(s[j]))) ++j;
      t.kind = Tok::ident;
      t.text = std::string(s.substr(i, j - i));
      bump(j - i);
    } else if (digit(c) || (c == '.' && i + 1 < s.size() && digit(s[i + 1]))) {
      std::size_t j = i;
      bool dec = false;
      while (j < s.size() && digit(s[j])) ++j;
      if (j < s.size() && s[j] == '.') {
        dec = true;
        ++j;
        while (j < s.size() && digit(s[j])) ++j;
      }
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && digit(s[k])) {
          dec = true;
          j = k;
          while (j < s.size() && digit(s[j])) ++j;
        }
      }
      if (j < s.size() && (ident_start(s[j]))) syntax(pos, "malformed number");
      t.text = std::string(s.substr(i, j - i));
      std::int64_t iv = 0;
      auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), iv);
      if (!dec && ec == std::errc() && p == t.text.data() + t.text.size()) {
        t.kind = Tok::integer;
        t.value = Value(iv);
      } else {
        double dv = 0;
        std::from_chars(t.text.data(), t.text.data() + t.text.size(), dv);
        t.kind = Tok::decimal;
        t.value = Value(dv);
      }
      bump(j - i);
    } else if (c == '\'' || c == '"') {
      std::string text;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < s.size()) {
        if (s[j] == c) {
          if (j + 1 < s.size() && s[j + 1] == c) {
            text += c;
            j += 2;
            continue;
          }
          closed = true;
          ++j;
          break;
        }
        text += s[j++];
      }
      if (!closed) syntax(pos, c == '\'' ? "unterminated string literal" : "unterminated quoted identifier");
      t.kind = c == '\'' ? Tok::string : Tok::quoted_ident;
      if (t.kind == Tok::quoted_ident && text.empty()) syntax(pos, "empty quoted identifier");
      t.text = text;
      t.value = Value(std::move(text));
      bump(j - i);
    } else {
      static constexpr std::string_view two[] = {"<=", ">=", "!=", "<>", "==", "||"};
      std::string_view sym;
      for (auto cand : two) {
        if (s.substr(i, 2) == cand) sym = cand;
      }
      if (sym.empty()) {
        static constexpr std::string_view one = "*,()<>=;.+-/%";
        if (one.find(c) == std::string_view::npos) syntax(pos, std::string("unexpected character '") + c + "'");
        sym = s.substr(i, 1);
      }
      t.kind = Tok::symbol;
      t.text = std::string(sym);
      bump(sym.size());
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.pos = pos;
  out.push_back(end);
  return out;
}

const std::set<std::string, std::less<>>& reserved() {
  static const std::set<std::string, std::less<>> words = {
      "SELECT", "DISTINCT", "FROM", "WHERE", "GROUP", "BY",     "AS",     "AND",    "OR",     "NOT",
      "JOIN",   "INNER",    "LEFT", "RIGHT", "FULL",  "OUTER",  "CROSS",  "NATURAL", "ON",    "USING",
      "ORDER",  "HAVING",   "LIMIT", "OFFSET", "UNION", "INTERSECT", "EXCEPT", "NULL", "IS",  "IN",
      "LIKE",   "BETWEEN",  "CASE", "WHEN",  "ALL",   "EXISTS", "INSERT", "UPDATE", "DELETE", "WITH"};
  return words;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

  QueryAst parse() {
    QueryAst q;
    if (is_kw("WITH")) unsupported(peek().pos, "WITH (common table expressions)");
    if (is_kw("INSERT") || is_kw("UPDATE") || is_kw("DELETE")) unsupported(peek().pos, upper(peek().text));
    expect_kw("SELECT");
    if (is_kw("DISTINCT")) {
      take();
      q.distinct = true;
    } else if (is_kw("ALL")) {
      take();
    }
    q.projections.push_back(projection());
    while (is_sym(",")) {
      take();
      q.projections.push_back(projection());
    }
    if (!is_kw("FROM")) {
      if (is_sym("+") || is_sym("-") || is_sym("/") || is_sym("%") || is_sym("||") || is_sym("*")) {
        unsupported(peek().pos, "arithmetic in projections");
      }
      syntax(peek().pos, "expected FROM, found " + describe(peek()));
    }
    take();
    if (is_sym("(")) unsupported(peek().pos, "subqueries");
    q.source_pos = peek().pos;
    q.source = name("table name");
    if (is_sym(".")) unsupported(peek().pos, "qualified table names");
    if (is_sym(",")) unsupported(peek().pos, "multiple tables in FROM (joins)");
    for (auto kw : {"JOIN", "INNER", "LEFT", "RIGHT", "FULL", "CROSS", "NATURAL"}) {
      if (is_kw(kw)) unsupported(peek().pos, "JOIN");
    }
    if (is_kw("AS") || (peek().kind == Tok::ident && !reserved().contains(upper(peek().text)))) {
      unsupported(peek().pos, "table aliases");
    }
    if (is_kw("WHERE")) {
      take();
      q.predicate = predicate();
    }
    if (is_kw("GROUP")) {
      take();
      expect_kw("BY");
      q.group_by.push_back(column_ref());
      while (is_sym(",")) {
        take();
        q.group_by.push_back(column_ref());
      }
    }
    trailing();
    return q;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return t_[std::min(p_ + k, t_.size() - 1)]; }
  const Token& take() { return t_[std::min(p_++, t_.size() - 1)]; }
  bool is_kw(std::string_view kw, std::size_t k = 0) const {
    return peek(k).kind == Tok::ident && upper(peek(k).text) == kw;
  }
  bool is_sym(std::string_view s, std::size_t k = 0) const { return peek(k).kind == Tok::symbol && peek(k).text == s; }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::end: return "end of query";
      case Tok::string: return "string '" + t.text + "'";
      case Tok::quoted_ident: return "\"" + t.text + "\"";
      default: return "'" + t.text + "'";
    }
  }

  void expect_kw(std::string_view kw) {
    if (!is_kw(kw)) syntax(peek().pos, "expected " + std::string(kw) + ", found " + describe(peek()));
    take();
  }
  void expect_sym(std::string_view s) {
    if (!is_sym(s)) syntax(peek().pos, "expected '" + std::string(s) + "', found " + describe(peek()));
    take();
  }

  std::string name(const char* what) {
    const Token& t = peek();
    if (t.kind == Tok::quoted_ident) return take().text;
    if (t.kind == Tok::ident) {
      if (reserved().contains(upper(t.text))) syntax(t.pos, "expected " + std::string(what) + ", found keyword " + upper(t.text));
      return take().text;
    }
    syntax(t.pos, "expected " + std::string(what) + ", found " + describe(t));
  }

  ColumnRef column_ref() {
    ColumnRef c;
    c.pos = peek().pos;
    if (peek().kind == Tok::ident && is_sym("(", 1)) unsupported(c.pos, "function call " + upper(peek().text));
    c.name = name("column name");
    if (is_sym(".")) unsupported(peek().pos, "qualified column names");
    return c;
  }

  ProjItem projection() {
    ProjItem item;
    item.pos = peek().pos;
    if (is_sym("*")) {
      take();
      item.kind = ProjItem::Kind::star;
      if (is_kw("AS")) syntax(peek().pos, "* cannot have an alias");
      return item;
    }
    if (peek().kind == Tok::ident && is_sym("(", 1)) {
      const std::string fn = upper(peek().text);
      if (fn != "COUNT") {
        if (fn == "SUM" || fn == "AVG" || fn == "MIN" || fn == "MAX") unsupported(item.pos, "aggregate " + fn);
        unsupported(item.pos, "function " + fn);
      }
      take();
      take();
      if (is_kw("DISTINCT")) unsupported(peek().pos, "COUNT(DISTINCT ...)");
      if (is_sym("*")) {
        take();
        item.kind = ProjItem::Kind::count_star;
      } else {
        item.kind = ProjItem::Kind::count;
        item.column = column_ref();
      }
      expect_sym(")");
    } else {
      if (peek().kind == Tok::integer || peek().kind == Tok::decimal || peek().kind == Tok::string) {
        unsupported(item.pos, "literal values in projections");
      }
      if (is_sym("(")) {
        if (is_kw("SELECT", 1)) unsupported(item.pos, "subqueries");
        unsupported(item.pos, "expressions in projections");
      }
      item.column = column_ref();
    }
    if (is_kw("AS")) {
      take();
      item.alias = name("alias");
    } else if (peek().kind == Tok::quoted_ident || (peek().kind == Tok::ident && !reserved().contains(upper(peek().text)))) {
      item.alias = take().text;  // implicit alias
    }
    return item;
  }

  Predicate predicate() { return disjunction(); }

  Predicate combine(Predicate::Kind kind, Predicate lhs, Predicate rhs, SourcePos pos) {
    Predicate p;
    p.kind = kind;
    p.pos = pos;
    p.children.push_back(std::move(lhs));
    p.children.push_back(std::move(rhs));
    return p;
  }

  Predicate disjunction() {
    Predicate lhs = conjunction();
    while (is_kw("OR")) {
      const SourcePos pos = take().pos;
      lhs = combine(Predicate::Kind::or_, std::move(lhs), conjunction(), pos);
    }
    return lhs;
  }

  Predicate conjunction() {
    Predicate lhs = negation();
    while (is_kw("AND")) {
      const SourcePos pos = take().pos;
      lhs = combine(Predicate::Kind::and_, std::move(lhs), negation(), pos);
    }
    return lhs;
  }

  Predicate negation() {
    if (is_kw("NOT")) {
      Predicate p;
      p.kind = Predicate::Kind::not_;
      p.pos = take().pos;
      p.children.push_back(negation());
      return p;
    }
    if (is_sym("(")) {
      if (is_kw("SELECT", 1)) unsupported(peek().pos, "subqueries");
      take();
      Predicate p = predicate();
      expect_sym(")");
      return p;
    }
    return comparison();
  }

  bool literal_ahead() const {
    const Token& t = peek();
    if (t.kind == Tok::integer || t.kind == Tok::decimal || t.kind == Tok::string) return true;
    return (is_sym("-") || is_sym("+")) && (peek(1).kind == Tok::integer || peek(1).kind == Tok::decimal);
  }

  Value literal() {
    const SourcePos pos = peek().pos;
    bool negate = false;
    if (is_sym("-") || is_sym("+")) negate = take().text == "-";
    const Token& t = take();
    if (!negate) return t.value;
    if (t.kind == Tok::integer) {
      if (t.value.as_int() == std::numeric_limits<std::int64_t>::min()) syntax(pos, "integer literal out of range");
      return Value(-t.value.as_int());
    }
    return Value(-t.value.as_float());
  }

  std::optional<CmpOp> cmp_op() {
    if (peek().kind != Tok::symbol) return std::nullopt;
    const std::string& s = peek().text;
    std::optional<CmpOp> op;
    if (s == "<") op = CmpOp::lt;
    if (s == "<=") op = CmpOp::le;
    if (s == ">") op = CmpOp::gt;
    if (s == ">=") op = CmpOp::ge;
    if (s == "=" || s == "==") op = CmpOp::eq;
    if (s == "!=" || s == "<>") op = CmpOp::ne;
    if (op) take();
    return op;
  }

  void reject_in_comparison() {
    for (auto kw : {"IS", "IN", "LIKE", "BETWEEN"}) {
      if (is_kw(kw)) unsupported(peek().pos, kw);
      if (is_kw("NOT") && is_kw(kw, 1)) unsupported(peek().pos, std::string("NOT ") + kw);
    }
    if (is_sym("+") || is_sym("-") || is_sym("*") || is_sym("/") || is_sym("%")) {
      unsupported(peek().pos, "arithmetic in conditions");
    }
  }

  Predicate comparison() {
    Predicate p;
    p.kind = Predicate::Kind::compare;
    p.pos = peek().pos;
    if (is_kw("NULL")) unsupported(peek().pos, "NULL literals");
    if (literal_ahead()) {
      p.literal = literal();
      reject_in_comparison();
      auto op = cmp_op();
      if (!op) syntax(peek().pos, "expected a comparison operator, found " + describe(peek()));
      if (literal_ahead()) unsupported(peek().pos, "comparison between two literals");
      if (is_kw("NULL")) unsupported(peek().pos, "NULL literals");
      if (is_sym("(")) unsupported(peek().pos, "subqueries");
      p.column = column_ref();
      p.op = mirror(*op);
      return p;
    }
    if (peek().kind != Tok::ident && peek().kind != Tok::quoted_ident) {
      syntax(peek().pos, "expected a condition, found " + describe(peek()));
    }
    p.column = column_ref();
    reject_in_comparison();
    auto op = cmp_op();
    if (!op) syntax(peek().pos, "expected a comparison operator, found " + describe(peek()));
    p.op = *op;
    if (is_kw("NULL")) unsupported(peek().pos, "NULL literals");
    if (is_sym("(")) unsupported(peek().pos, "subqueries");
    if (!literal_ahead()) {
      if (peek().kind == Tok::ident || peek().kind == Tok::quoted_ident) {
        unsupported(peek().pos, "comparison between two columns");
      }
      syntax(peek().pos, "expected a literal, found " + describe(peek()));
    }
    p.literal = literal();
    if (is_sym("+") || is_sym("-") || is_sym("*") || is_sym("/") || is_sym("%")) {
      unsupported(peek().pos, "arithmetic in conditions");
    }
    return p;
  }

  void trailing() {
    if (is_sym(";")) take();
    const Token& t = peek();
    if (t.kind == Tok::end) return;
    const std::string kw = t.kind == Tok::ident ? upper(t.text) : "";
    if (kw == "ORDER") unsupported(t.pos, "ORDER BY");
    if (kw == "HAVING") unsupported(t.pos, "HAVING");
    if (kw == "LIMIT" || kw == "OFFSET") unsupported(t.pos, kw);
    if (kw == "UNION" || kw == "INTERSECT" || kw == "EXCEPT") unsupported(t.pos, kw);
    if (kw == "WHERE") syntax(t.pos, "WHERE must come before GROUP BY");
    if (kw == "JOIN") unsupported(t.pos, "JOIN");
    syntax(t.pos, "unexpected " + describe(t) + " after end of query");
  }

  std::vector<Token> t_;
  std::size_t p_ = 0;
};

[[noreturn]] void invalid(SourcePos pos, const std::string& msg) { throw QueryError(ErrorKind::validation, pos, msg); }

void resolve(ColumnRef& ref, const TableMeta& schema) {
  auto idx = schema.column_index(ref.name);
  if (!idx) invalid(ref.pos, "unknown column '" + ref.name + "' in table '" + schema.name + "'");
  ref.index = *idx;
}

void resolve(Predicate& p, const TableMeta& schema) {
  if (p.kind != Predicate::Kind::compare) {
    for (auto& c : p.children) resolve(c, schema);
    return;
  }
  resolve(p.column, schema);
  const DType col = schema.columns[p.column.index].dtype;
  const bool lit_text = p.literal.is_text();
  if ((col == DType::text) != lit_text) {
    invalid(p.pos, "type mismatch: column '" + p.column.name + "' is " + std::string(to_string(col)) +
                       " but is compared with " + (lit_text ? "text " + literal_sql(p.literal) : "number " + literal_sql(p.literal)));
  }
}

}  // namespace

QueryAst parse_query(std::string_view text) {
  QueryAst q = Parser(lex(text)).parse();
  q.text = std::string(text);
  return q;
}

CheckedQuery validate(const QueryAst& ast, const TableMeta& schema) {
  CheckedQuery out;
  out.source = schema;
  out.ast = ast;
  out.ast.projections.clear();
  for (const auto& item : ast.projections) {
    if (item.kind != ProjItem::Kind::star) {
      out.ast.projections.push_back(item);
      continue;
    }
    for (const auto& c : schema.columns) {
      ProjItem p;
      p.kind = ProjItem::Kind::column;
      p.column.name = c.name;
      p.column.pos = item.pos;
      p.pos = item.pos;
      out.ast.projections.push_back(std::move(p));
    }
  }
  auto& q = out.ast;
  for (auto& g : q.group_by) resolve(g, schema);
  if (q.predicate) resolve(*q.predicate, schema);
  std::set<std::string, std::less<>> names;
  for (auto& item : q.projections) {
    ColumnMeta col;
    switch (item.kind) {
      case ProjItem::Kind::column:
        resolve(item.column, schema);
        if (!q.group_by.empty()) {
          bool grouped = false;
          for (const auto& g : q.group_by) grouped = grouped || g.index == item.column.index;
          if (!grouped) {
            invalid(item.column.pos, "column '" + item.column.name + "' must appear in GROUP BY or inside COUNT");
          }
        }
        col = {item.alias.value_or(item.column.name), schema.columns[item.column.index].dtype};
        break;
      case ProjItem::Kind::count:
        resolve(item.column, schema);
        [[fallthrough]];
      case ProjItem::Kind::count_star:
        if (q.group_by.empty()) invalid(item.pos, "COUNT requires GROUP BY");
        col = {item.alias.value_or(item.kind == ProjItem::Kind::count ? "COUNT(" + item.column.name + ")" : "COUNT(*)"),
               DType::int64};
        break;
      case ProjItem::Kind::star:
        break;
    }
    if (!names.insert(col.name).second) invalid(item.pos, "duplicate output column '" + col.name + "'");
    out.output.push_back(std::move(col));
  }
  return out;
}

std::optional<bool> eval_predicate(const Predicate& p, const Row& row) {
  switch (p.kind) {
    case Predicate::Kind::compare: {
      const Value& v = row[p.column.index];
      if (v.is_null()) return std::nullopt;
      const auto ord = compare_values(v, p.literal);
      switch (p.op) {
        case CmpOp::lt: return ord < 0;
        case CmpOp::le: return ord <= 0;
        case CmpOp::gt: return ord > 0;
        case CmpOp::ge: return ord >= 0;
        case CmpOp::eq: return ord == 0;
        case CmpOp::ne: return ord != 0;
      }
      return std::nullopt;
    }
    case Predicate::Kind::not_: {
      auto v = eval_predicate(p.children[0], row);
      if (!v) return std::nullopt;
      return !*v;
    }
    case Predicate::Kind::and_: {
      auto a = eval_predicate(p.children[0], row);
      if (a && !*a) return false;
      auto b = eval_predicate(p.children[1], row);
      if (b && !*b) return false;
      if (!a || !b) return std::nullopt;
      return true;
    }
    case Predicate::Kind::or_: {
      auto a = eval_predicate(p.children[0], row);
      if (a && *a) return true;
      auto b = eval_predicate(p.children[1], row);
      if (b && *b) return true;
      if (!a || !b) return std::nullopt;
      return false;
    }
  }
  return std::nullopt;
}

std::string literal_sql(const Value& v) {
  if (v.is_text()) return quote_literal(v.as_text());
  if (v.is_null()) return "NULL";
  return format_value(v);
}

std::string to_sql(const Predicate& p) {
  switch (p.kind) {
    case Predicate::Kind::compare:
      return quote_identifier(p.column.name) + " " + std::string(to_string(p.op)) + " " + literal_sql(p.literal);
    case Predicate::Kind::not_:
      return "NOT (" + to_sql(p.children[0]) + ")";
    case Predicate::Kind::and_:
      return "(" + to_sql(p.children[0]) + ") AND (" + to_sql(p.children[1]) + ")";
    case Predicate::Kind::or_:
      return "(" + to_sql(p.children[0]) + ") OR (" + to_sql(p.children[1]) + ")";
  }
  return {};
}

std::string to_sql(const QueryAst& ast) {
  std::string out = ast.distinct ? "SELECT DISTINCT " : "SELECT ";
  for (std::size_t i = 0; i < ast.projections.size(); ++i) {
    const auto& item = ast.projections[i];
    if (i) out += ", ";
    switch (item.kind) {
      case ProjItem::Kind::star: out += "*"; break;
      case ProjItem::Kind::column: out += quote_identifier(item.column.name); break;
      case ProjItem::Kind::count: out += "COUNT(" + quote_identifier(item.column.name) + ")"; break;
      case ProjItem::Kind::count_star: out += "COUNT(*)"; break;
    }
    if (item.alias) out += " AS " + quote_identifier(*item.alias);
  }
  out += " FROM " + quote_identifier(ast.source);
  if (ast.predicate) out += " WHERE " + to_sql(*ast.predicate);
  if (!ast.group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < ast.group_by.size(); ++i) {
      if (i) out += ", ";
      out += quote_identifier(ast.group_by[i].name);
    }
  }
  return out;
}

}  // namespace tracebench::query
