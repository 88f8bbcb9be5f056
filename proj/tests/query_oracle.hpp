// Brute-force reference for the SQL subset. Queries are generated as plain
// structs, rendered to SQL text for the engine, and evaluated here directly,
// so the oracle shares neither the parser nor the predicate evaluator.
#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "support.hpp"

namespace tbtest {

using tracebench::ColumnMeta;
using tracebench::DType;
using tracebench::Table;

struct OCompare {
  std::size_t column = 0;
  std::string op;  // < <= > >= = != <>
  Value literal;
  bool literal_first = false;
};

struct OPred {
  enum Kind { cmp, and_, or_, not_ } kind = cmp;
  OCompare c;
  std::vector<OPred> kids;
};

struct OItem {
  enum Kind { column, count, count_star } kind = column;
  std::size_t col = 0;
  std::optional<std::string> alias;
};

struct OQuery {
  bool distinct = false;
  bool star = false;
  std::vector<OItem> items;
  std::optional<OPred> where;
  std::vector<std::size_t> group_by;
};

// Three-valued result: -1 unknown, 0 false, 1 true.
inline int o_compare(const Value& v, const OCompare& c) {
  if (v.is_null()) return -1;
  int ord;
  if (v.is_text()) {
    ord = v.as_text() < c.literal.as_text() ? -1 : (v.as_text() == c.literal.as_text() ? 0 : 1);
  } else {
    const long double a = v.is_int() ? static_cast<long double>(v.as_int()) : v.as_float();
    const long double b = c.literal.is_int() ? static_cast<long double>(c.literal.as_int()) : c.literal.as_float();
    ord = a < b ? -1 : (a == b ? 0 : 1);
  }
  // literal op column means column (mirror op) literal.
  std::string op = c.op;
  if (c.literal_first) {
    if (op == "<") op = ">";
    else if (op == ">") op = "<";
    else if (op == "<=") op = ">=";
    else if (op == ">=") op = "<=";
  }
  if (op == "<") return ord < 0;
  if (op == "<=") return ord <= 0;
  if (op == ">") return ord > 0;
  if (op == ">=") return ord >= 0;
  if (op == "=") return ord == 0;
  return ord != 0;
}

inline int o_eval(const OPred& p, const Row& r) {
  switch (p.kind) {
    case OPred::cmp: return o_compare(r[p.c.column], p.c);
    case OPred::not_: {
      const int v = o_eval(p.kids[0], r);
      return v < 0 ? -1 : !v;
    }
    case OPred::and_: {
      const int a = o_eval(p.kids[0], r), b = o_eval(p.kids[1], r);
      if (a == 0 || b == 0) return 0;
      return (a < 0 || b < 0) ? -1 : 1;
    }
    case OPred::or_: {
      const int a = o_eval(p.kids[0], r), b = o_eval(p.kids[1], r);
      if (a == 1 || b == 1) return 1;
      return (a < 0 || b < 0) ? -1 : 0;
    }
  }
  return -1;
}

inline std::vector<Row> oracle(const OQuery& q, const Table& t) {
  std::vector<const Row*> kept;
  for (const auto& r : t.rows) {
    if (!q.where || o_eval(*q.where, r) == 1) kept.push_back(&r);
  }
  std::vector<Row> out;
  if (q.group_by.empty()) {
    for (const Row* r : kept) {
      if (q.star) {
        out.push_back(*r);
        continue;
      }
      Row o;
      for (const auto& it : q.items) o.push_back((*r)[it.col]);
      out.push_back(std::move(o));
    }
  } else {
    // Linear scan grouping by key equality; slow and obviously right.
    std::vector<Row> keys;
    std::vector<std::vector<const Row*>> members;
    for (const Row* r : kept) {
      Row k;
      for (auto g : q.group_by) k.push_back((*r)[g]);
      std::size_t i = 0;
      while (i < keys.size() && !(keys[i] == k)) ++i;
      if (i == keys.size()) {
        keys.push_back(k);
        members.emplace_back();
      }
      members[i].push_back(r);
    }
    for (std::size_t i = 0; i < keys.size(); ++i) {
      Row o;
      for (const auto& it : q.items) {
        if (it.kind == OItem::column) {
          o.push_back((*members[i][0])[it.col]);
        } else {
          std::int64_t n = 0;
          for (const Row* r : members[i]) n += (it.kind == OItem::count_star || !(*r)[it.col].is_null()) ? 1 : 0;
          o.push_back(Value(n));
        }
      }
      out.push_back(std::move(o));
    }
  }
  if (q.distinct) {
    std::vector<Row> uniq;
    for (auto& r : out) {
      bool seen = false;
      for (const auto& u : uniq) seen = seen || u == r;
      if (!seen) uniq.push_back(std::move(r));
    }
    out = std::move(uniq);
  }
  return out;
}

inline std::string literal_text(const Value& v) {
  if (v.is_text()) {
    std::string s = "'";
    for (char c : v.as_text()) s += c == '\'' ? std::string("''") : std::string(1, c);
    return s + "'";
  }
  return tracebench::format_value(v);
}

inline std::string render_pred(const OPred& p, const std::vector<ColumnMeta>& cols) {
  switch (p.kind) {
    case OPred::cmp:
      return p.c.literal_first ? literal_text(p.c.literal) + " " + p.c.op + " " + cols[p.c.column].name
                               : cols[p.c.column].name + " " + p.c.op + " " + literal_text(p.c.literal);
    case OPred::not_: return "NOT (" + render_pred(p.kids[0], cols) + ")";
    case OPred::and_: return "(" + render_pred(p.kids[0], cols) + ") AND (" + render_pred(p.kids[1], cols) + ")";
    case OPred::or_: return "(" + render_pred(p.kids[0], cols) + ") or " + render_pred(p.kids[1], cols);
  }
  return {};
}

inline std::string render_sql(const OQuery& q, const std::string& table, const std::vector<ColumnMeta>& cols) {
  std::string s = q.distinct ? "SELECT DISTINCT " : "select ";
  if (q.star) {
    s += "*";
  } else {
    for (std::size_t i = 0; i < q.items.size(); ++i) {
      const auto& it = q.items[i];
      if (i) s += ", ";
      if (it.kind == OItem::column) s += cols[it.col].name;
      if (it.kind == OItem::count) s += "COUNT(" + cols[it.col].name + ")";
      if (it.kind == OItem::count_star) s += "count(*)";
      if (it.alias) s += " AS " + *it.alias;
    }
  }
  s += " FROM " + table;
  if (q.where) s += " WHERE " + render_pred(*q.where, cols);
  if (!q.group_by.empty()) {
    s += " GROUP BY ";
    for (std::size_t i = 0; i < q.group_by.size(); ++i) s += (i ? ", " : "") + cols[q.group_by[i]].name;
  }
  return s;
}

// Small value domains so that equality, grouping and DISTINCT have work.
inline Table random_table(std::mt19937_64& rng, const std::string& name) {
  Table t;
  t.meta.name = name;
  const std::size_t ncols = 1 + rng() % 6;
  const std::size_t nrows = rng() % 1001;
  const bool named = rng() % 3 == 0;
  for (std::size_t c = 0; c < ncols; ++c) {
    const DType d = std::array{DType::int64, DType::int64, DType::float64, DType::text}[rng() % 4];
    t.meta.columns.push_back({named ? "c" + std::to_string(c) + "_x" : "V" + std::to_string(c + 1), d});
  }
  std::vector<int> domain(ncols), nullpct(ncols);
  for (std::size_t c = 0; c < ncols; ++c) {
    domain[c] = std::array{2, 5, 20, 200}[rng() % 4];
    nullpct[c] = std::array{0, 0, 5, 30}[rng() % 4];
  }
  for (std::size_t r = 0; r < nrows; ++r) {
    Row row;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (static_cast<int>(rng() % 100) < nullpct[c]) {
        row.push_back(Value::null());
        continue;
      }
      const std::int64_t k = static_cast<std::int64_t>(rng() % domain[c]) - domain[c] / 4;
      switch (t.meta.columns[c].dtype) {
        case DType::int64: row.push_back(Value(k)); break;
        case DType::float64: row.push_back(Value(static_cast<double>(k) * 0.25)); break;
        case DType::text: row.push_back(Value(std::string(k % 3 == 0 ? "a'" : "s") + std::to_string(k))); break;
      }
    }
    t.rows.push_back(std::move(row));
  }
  t.meta.row_count = static_cast<std::int64_t>(nrows);
  return t;
}

inline Value random_literal(std::mt19937_64& rng, DType d) {
  const std::int64_t k = static_cast<std::int64_t>(rng() % 60) - 15;
  switch (d) {
    case DType::int64:
      // Sometimes a decimal literal against an integer column.
      return rng() % 4 == 0 ? Value(static_cast<double>(k) + 0.5) : Value(k);
    case DType::float64: return rng() % 2 ? Value(static_cast<double>(k) * 0.25) : Value(k);
    case DType::text: return Value(std::string(k % 3 == 0 ? "a'" : "s") + std::to_string(k));
  }
  return {};
}

inline OPred random_pred(std::mt19937_64& rng, const std::vector<ColumnMeta>& cols, int depth) {
  OPred p;
  const auto pick = rng() % 10;
  if (depth > 0 && pick < 2) {
    p.kind = OPred::and_;
  } else if (depth > 0 && pick < 4) {
    p.kind = OPred::or_;
  } else if (depth > 0 && pick < 5) {
    p.kind = OPred::not_;
  }
  if (p.kind == OPred::cmp) {
    p.c.column = rng() % cols.size();
    p.c.op = std::array{"<", "<=", ">", ">=", "=", "!=", "<>"}[rng() % 7];
    p.c.literal = random_literal(rng, cols[p.c.column].dtype);
    p.c.literal_first = rng() % 5 == 0;
    return p;
  }
  p.kids.push_back(random_pred(rng, cols, depth - 1));
  if (p.kind != OPred::not_) p.kids.push_back(random_pred(rng, cols, depth - 1));
  return p;
}

inline OQuery random_query(std::mt19937_64& rng, const std::vector<ColumnMeta>& cols) {
  OQuery q;
  q.distinct = rng() % 3 == 0;
  if (rng() % 3 != 0) q.where = random_pred(rng, cols, 2);
  std::set<std::string> names;
  auto unique_alias = [&](const std::string& base) {
    std::string a = base;
    for (int i = 2; names.count(a); ++i) a = base + "_" + std::to_string(i);
    names.insert(a);
    return a;
  };
  if (rng() % 2 == 0) {
    // Grouped: key columns (each at most once) then counts.
    std::vector<std::size_t> idx(cols.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t k = 1 + rng() % std::min<std::size_t>(2, cols.size());
    q.group_by.assign(idx.begin(), idx.begin() + static_cast<long>(k));
    for (auto g : q.group_by) {
      if (rng() % 4 == 0) continue;  // key not projected
      OItem it{OItem::column, g, std::nullopt};
      if (rng() % 2 || names.count(cols[g].name)) it.alias = unique_alias("V" + std::to_string(names.size() + 1));
      else names.insert(cols[g].name);
      q.items.push_back(it);
    }
    const std::size_t counts = (q.items.empty() ? 1 : 0) + rng() % 2;
    for (std::size_t i = 0; i < counts; ++i) {
      OItem it;
      it.kind = rng() % 3 == 0 ? OItem::count_star : OItem::count;
      it.col = rng() % cols.size();
      it.alias = unique_alias("n");
      q.items.push_back(it);
    }
    if (q.items.empty()) q.items.push_back({OItem::count_star, 0, unique_alias("n")});
  } else if (rng() % 5 == 0) {
    q.star = true;
  } else {
    const std::size_t n = 1 + rng() % cols.size();
    for (std::size_t i = 0; i < n; ++i) {
      OItem it{OItem::column, static_cast<std::size_t>(rng() % cols.size()), std::nullopt};
      if (names.count(cols[it.col].name) || rng() % 3 == 0) {
        it.alias = unique_alias("a" + std::to_string(i));
      } else {
        names.insert(cols[it.col].name);
      }
      q.items.push_back(it);
    }
  }
  return q;
}

}  // namespace tbtest
