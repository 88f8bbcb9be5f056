#include <doctest.h>

#include "query_oracle.hpp"
#include "tracebench/backends.hpp"
#include "tracebench/mapreduce.hpp"
#include "tracebench/plan.hpp"
#include "tracebench/query.hpp"

using namespace tracebench;
using namespace tracebench::query;
using tbtest::TempDir;

namespace {

TableMeta schema(std::vector<ColumnMeta> cols, std::string name = "t") {
  TableMeta m;
  m.name = std::move(name);
  m.columns = std::move(cols);
  return m;
}

QueryError error_of(const std::string& sql, const TableMeta* s = nullptr) {
  try {
    auto ast = parse_query(sql);
    if (s) validate(ast, *s);
  } catch (const QueryError& e) {
    return e;
  }
  FAIL("expected a query error for: " << sql);
  return QueryError(ErrorKind::syntax, {}, "");
}

TableMeta task_events_schema() {
  std::vector<ColumnMeta> cols;
  for (int i = 1; i <= 13; ++i) cols.push_back({"V" + std::to_string(i), i == 7 ? DType::text : DType::int64});
  return schema(cols, "task_events");
}

}  // namespace

TEST_CASE("parse the distinct projection query") {
  const auto q = parse_query("SELECT DISTINCT V3 AS V1,V4 AS V2 FROM task_events");
  CHECK(q.distinct);
  REQUIRE(q.projections.size() == 2);
  CHECK(q.projections[0].column.name == "V3");
  CHECK(q.projections[0].alias == "V1");
  CHECK(q.projections[1].column.name == "V4");
  CHECK(q.projections[1].alias == "V2");
  CHECK(q.source == "task_events");
  CHECK_FALSE(q.predicate);
}

TEST_CASE("parse the grouped count query") {
  const auto q = parse_query("SELECT V1 AS V1, COUNT(V2) AS V2 FROM job_task_id GROUP BY V1");
  REQUIRE(q.group_by.size() == 1);
  CHECK(q.group_by[0].name == "V1");
  REQUIRE(q.projections.size() == 2);
  CHECK(q.projections[1].kind == ProjItem::Kind::count);
  CHECK(q.projections[1].column.name == "V2");
}

TEST_CASE("keywords are case-insensitive, names are not") {
  const auto q = parse_query("select distinct V1 from T where not (V1 < 3 or v2 >= 'x') group by V1");
  CHECK(q.distinct);
  CHECK(q.source == "T");
  CHECK(q.predicate->kind == Predicate::Kind::not_);
  const auto s = schema({{"V1", DType::int64}, {"V2", DType::text}});
  CHECK(error_of("SELECT v1 FROM t", &s).kind() == ErrorKind::validation);
}

TEST_CASE("out-of-grammar constructs are unsupported errors with positions") {
  auto e = error_of("SELECT V1 FROM t ORDER BY V1");
  CHECK(e.kind() == ErrorKind::unsupported);
  CHECK(e.pos().line == 1);
  CHECK(e.pos().column == 18);
  CHECK(error_of("SELECT V1 FROM a JOIN b").kind() == ErrorKind::unsupported);
  CHECK(error_of("SELECT V1 FROM t GROUP BY V1 HAVING COUNT(*) > 1").kind() == ErrorKind::unsupported);
  CHECK(error_of("SELECT SUM(V1) FROM t GROUP BY V2").kind() == ErrorKind::unsupported);
  CHECK(error_of("SELECT V1 FROM (SELECT V1 FROM t)").kind() == ErrorKind::unsupported);
  CHECK(error_of("SELECT V1 + 1 FROM t").kind() != ErrorKind::validation);

  auto multi = error_of("SELECT V1\nFROM t\nWHERE V1 <");
  CHECK(multi.kind() == ErrorKind::syntax);
  CHECK(multi.pos().line == 3);
  CHECK(error_of("SELECT FROM t").kind() == ErrorKind::syntax);
  CHECK(error_of("SELECT V1 FROM t WHERE V1 = 'open").kind() == ErrorKind::syntax);
}

TEST_CASE("validation: unknown columns, type mismatches, grouping rules") {
  const auto s = schema({{"V1", DType::int64}, {"V2", DType::int64}, {"V3", DType::text}, {"V4", DType::float64}});
  auto e = error_of("SELECT V9 FROM t", &s);
  CHECK(e.kind() == ErrorKind::validation);
  CHECK(e.pos().column == 8);
  CHECK(error_of("SELECT V1 FROM t WHERE V1 < 'abc'", &s).kind() == ErrorKind::validation);
  CHECK(error_of("SELECT V1 FROM t WHERE V3 = 1", &s).kind() == ErrorKind::validation);
  CHECK(error_of("SELECT V2, COUNT(V1) FROM t GROUP BY V1", &s).kind() == ErrorKind::validation);
  CHECK(error_of("SELECT COUNT(V1) FROM t", &s).kind() == ErrorKind::validation);
  CHECK(error_of("SELECT V1, V1 FROM t", &s).kind() == ErrorKind::validation);

  const auto ok = validate(parse_query("SELECT V4 AS x, V1 FROM t WHERE 2 < V1 AND V4 >= -1.5"), s);
  CHECK(ok.output == std::vector<ColumnMeta>{{"x", DType::float64}, {"V1", DType::int64}});
  // literal-first comparisons are normalized to column op literal
  CHECK(ok.ast.predicate->children[0].op == CmpOp::gt);
  const auto star = validate(parse_query("SELECT * FROM t"), s);
  CHECK(star.output.size() == 4);
}

TEST_CASE("the example trace queries validate against a task_events schema") {
  const auto te = task_events_schema();
  const auto q1 = validate(parse_query("SELECT DISTINCT V3 AS V1,V4 AS V2 FROM task_events"), te);
  CHECK(q1.output.size() == 2);
  const auto mid = schema({{"V1", DType::int64}, {"V2", DType::int64}}, "job_task_id");
  const auto q2 = validate(parse_query("SELECT V1 AS V1, COUNT(V2) AS V2 FROM job_task_id GROUP BY V1"), mid);
  CHECK(q2.grouped());
  CHECK(q2.output[1].dtype == DType::int64);
}

TEST_CASE("planner: stage order and map-reduce translation") {
  const auto s = schema({{"V1", DType::int64}, {"V2", DType::int64}});
  const auto grouped = validate(parse_query("SELECT DISTINCT V1, COUNT(V2) AS n FROM t WHERE V2 > 0 GROUP BY V1"), s);
  const auto rel = plan_query(grouped, BackendKind::relational);
  REQUIRE(rel.stages.size() == 4);
  CHECK(rel.stages[0].kind == StageKind::filter);
  CHECK(rel.stages[1].kind == StageKind::group_count);
  CHECK(rel.stages[2].kind == StageKind::project);
  CHECK(rel.stages[3].kind == StageKind::distinct);

  const auto part = plan_query(grouped, BackendKind::partitioned);
  REQUIRE_FALSE(part.jobs.empty());
  CHECK(part.group_key == std::vector<std::string>{"V1"});
  CHECK(part.describe().find("job 1") != std::string::npos);

  const auto plain = validate(parse_query("SELECT V2 FROM t"), s);
  const auto rel2 = plan_query(plain, BackendKind::relational);
  for (const auto& st : rel2.stages) CHECK(st.kind != StageKind::group_count);
}

TEST_CASE("visitor walks stages in canonical order") {
  struct Recorder : PlanVisitor {
    std::vector<std::string> seen;
    void source(const CheckedQuery&) override { seen.push_back("source"); }
    void filter(const Predicate&) override { seen.push_back("filter"); }
    void group_count(const std::vector<ColumnRef>&, const std::vector<ProjItem>&) override {
      seen.push_back("group");
    }
    void project(const std::vector<ProjItem>&) override { seen.push_back("project"); }
    void distinct() override { seen.push_back("distinct"); }
  } r;
  const auto s = schema({{"V1", DType::int64}, {"V2", DType::int64}});
  walk(validate(parse_query("SELECT DISTINCT V1 FROM t WHERE V1 = 1"), s), r);
  CHECK(r.seen == std::vector<std::string>{"source", "filter", "project", "distinct"});
}

TEST_CASE("three-valued predicates: null never satisfies") {
  const auto s = schema({{"V1", DType::int64}});
  const auto q = validate(parse_query("SELECT V1 FROM t WHERE NOT (V1 < 3)"), s);
  CHECK_FALSE(eval_predicate(*q.ast.predicate, {Value::null()}).has_value());
  CHECK(eval_predicate(*q.ast.predicate, {Value(5)}) == true);
  const auto o = validate(parse_query("SELECT V1 FROM t WHERE V1 < 3 OR V1 > 0"), s);
  CHECK_FALSE(eval_predicate(*o.ast.predicate, {Value::null()}).has_value());
}

namespace {

std::vector<Row> run_on(BackendKind kind, const Table& t, const std::string& sql, unsigned workers,
                        std::size_t partition_rows = 64) {
  TempDir d("q");
  std::unique_ptr<Storage> s;
  if (kind == BackendKind::partitioned) {
    s = PartitionedStorage::create(d / "s", partition_rows);
  } else {
    s = create_storage(kind, d / "s");
  }
  write_table(*s, t.meta.name, t.meta.columns, t.rows, TableOrigin::imported);
  execute_query(*s, parse_query(sql), "out", ExecOptions{workers});
  CHECK(s->table("out").origin == TableOrigin::query_result);
  return s->read_table("out").rows;
}

}  // namespace

TEST_CASE("execution examples on both backends") {
  Table pairs{schema({{"V1", DType::text}, {"V2", DType::int64}}), {}};
  pairs.rows = {{Value("a"), Value(1)}, {Value("a"), Value(1)}, {Value("b"), Value(2)}};
  Table jobs{schema({{"V1", DType::text}, {"V2", DType::text}}), {}};
  jobs.rows = {{Value("J1"), Value("T1")}, {Value("J1"), Value("T2")}, {Value("J2"), Value("T1")}};
  Table ids{schema({{"V1", DType::int64}}), {}};
  ids.rows = {{Value(5)}, {Value(10999)}, {Value(11000)}};

  for (auto kind : {BackendKind::relational, BackendKind::partitioned}) {
    CAPTURE(to_string(kind));
    CHECK(run_on(kind, pairs, "SELECT DISTINCT V1, V2 FROM t", 1).size() == 2);
    CHECK(tbtest::sorted(run_on(kind, jobs, "SELECT V1, COUNT(V2) AS V2 FROM t GROUP BY V1", 2)) ==
          std::vector<Row>{{Value("J1"), Value(2)}, {Value("J2"), Value(1)}});
    CHECK(tbtest::sorted(run_on(kind, ids, "SELECT V1 FROM t WHERE V1 < 11000", 1)) ==
          std::vector<Row>{{Value(5)}, {Value(10999)}});
    CHECK(run_on(kind, ids, "SELECT V1 FROM t WHERE V1 > 99999", 1).empty());
    CHECK(run_on(kind, ids, "SELECT * FROM t", 1) == ids.rows);
  }
}

TEST_CASE("filter-only plan with no matches keeps the schema") {
  TempDir d;
  for (auto kind : {BackendKind::relational, BackendKind::partitioned}) {
    auto s = create_storage(kind, d / std::string(to_string(kind)));
    write_table(*s, "t", {{"V1", DType::int64}, {"V2", DType::text}}, {{Value(1), Value("x")}}, TableOrigin::imported);
    const auto m = execute_query(*s, parse_query("SELECT V2 FROM t WHERE V1 > 5"), "out");
    CHECK(m.row_count == 0);
    CHECK(m.columns == std::vector<ColumnMeta>{{"V2", DType::text}});
    CHECK_THROWS_AS(execute_query(*s, parse_query("SELECT V2 FROM t"), "out"), NameCollisionError);
    CHECK_THROWS_AS(execute_query(*s, parse_query("SELECT V2 FROM nope"), "x"), NotFoundError);
  }
}

TEST_CASE("property: groups emptied by the predicate are dropped") {
  Table t{schema({{"V1", DType::int64}, {"V2", DType::int64}}), {}};
  for (int i = 0; i < 30; ++i) t.rows.push_back({Value(i % 5), Value(i)});
  for (auto kind : {BackendKind::relational, BackendKind::partitioned}) {
    const auto out = run_on(kind, t, "SELECT V1, COUNT(*) AS n FROM t WHERE V2 >= 27 GROUP BY V1", 4);
    CHECK(tbtest::sorted(out) ==
          std::vector<Row>{{Value(2), Value(1)}, {Value(3), Value(1)}, {Value(4), Value(1)}});
  }
}

TEST_CASE("property: randomized queries agree with the brute-force oracle") {
  std::mt19937_64 rng(20240611);
  for (int iter = 0; iter < 60; ++iter) {
    const Table t = tbtest::random_table(rng, "r");
    const auto q = tbtest::random_query(rng, t.meta.columns);
    const std::string sql = tbtest::render_sql(q, "r", t.meta.columns);
    CAPTURE(sql);
    const auto expect = tbtest::sorted(tbtest::oracle(q, t));
    CHECK(tbtest::sorted(run_on(BackendKind::relational, t, sql, 1)) == expect);
    CHECK(tbtest::sorted(run_on(BackendKind::partitioned, t, sql, 1, 37)) == expect);
    CHECK(tbtest::sorted(run_on(BackendKind::partitioned, t, sql, 8, 37)) == expect);
  }
}

TEST_CASE("a partitioned plan also runs on relational storage") {
  Table t{schema({{"V1", DType::int64}, {"V2", DType::int64}}), {}};
  for (int i = 0; i < 100; ++i) t.rows.push_back({Value(i % 7), Value(i % 3)});
  TempDir d;
  auto s = create_storage(BackendKind::relational, d / "s");
  write_table(*s, "t", t.meta.columns, t.rows, TableOrigin::imported);
  const auto q = validate(parse_query("SELECT V1, COUNT(V2) AS c FROM t WHERE V2 <> 1 GROUP BY V1"), s->table("t"));
  execute_plan(*s, q, plan_query(q, BackendKind::partitioned), "a");
  execute_plan(*s, q, plan_query(q, BackendKind::relational), "b");
  CHECK(tbtest::sorted(s->read_table("a").rows) == tbtest::sorted(s->read_table("b").rows));
  auto p = create_storage(BackendKind::partitioned, d / "p");
  write_table(*p, "t", t.meta.columns, t.rows, TableOrigin::imported);
  CHECK_THROWS(execute_plan(*p, q, plan_query(q, BackendKind::relational), "c"));
}

TEST_CASE("to_sql round trips through the parser") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Table t = tbtest::random_table(rng, "r");
    const auto q = tbtest::random_query(rng, t.meta.columns);
    const auto ast = parse_query(tbtest::render_sql(q, "r", t.meta.columns));
    CHECK(to_sql(parse_query(to_sql(ast))) == to_sql(ast));
  }
}
