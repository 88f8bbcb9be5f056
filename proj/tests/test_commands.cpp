#include <doctest.h>

#include <thread>

#include "support.hpp"
#include "tracebench/command_format.hpp"
#include "tracebench/commands.hpp"

using namespace tracebench;
using tbtest::TempDir;

#ifndef TRACEBENCH_FIXTURES
#define TRACEBENCH_FIXTURES "tests/fixtures"
#endif

namespace {

const std::vector<std::string> kTable1 = {"get_column",
                                          "apply_1Col",
                                          "aggregate",
                                          "difference_between_rows",
                                          "filter",
                                          "exponential_distribution",
                                          "lognormal_distribution",
                                          "polynomial_regression",
                                          "ecdf",
                                          "spline"};

fs::path fixture() { return fs::path(TRACEBENCH_FIXTURES) / "table1.cmd"; }

struct Store {
  TempDir dir;
  std::unique_ptr<Storage> s = create_storage(BackendKind::partitioned, dir / "s");
  Store() {
    write_table(*s, "t", {{"V1", DType::int64}, {"V2", DType::int64}, {"V3", DType::text}},
                {{Value(5), Value(1), Value("a")},
                 {Value(10999), Value(2), Value("a")},
                 {Value(11000), Value(3), Value("b")},
                 {Value(25000), Value(4), Value("b")}},
                TableOrigin::imported);
  }
};

CommandSpec spec_named(const std::vector<CommandSpec>& specs, const std::string& name) {
  for (const auto& s : specs) {
    if (s.name == name) return s;
  }
  FAIL("no command " << name);
  return {};
}

}  // namespace

TEST_CASE("the Table 1 fixture parses to ten specs") {
  const auto specs = load_command_file(fixture());
  REQUIRE(specs.size() == 10);
  for (std::size_t i = 0; i < specs.size(); ++i) CHECK(specs[i].name == kTable1[i]);
  const auto g = spec_named(specs, "get_column");
  CHECK(g.param_count == 1);
  CHECK(g.param_descriptions == std::vector<std::string>{"column number"});
  CHECK(spec_named(specs, "aggregate").param_count == 3);
  CHECK(spec_named(specs, "spline").param_count == 2);
}

TEST_CASE("property: serialization round trips") {
  const auto specs = load_command_file(fixture());
  const std::string text = serialize_commands(specs);
  CHECK(parse_command_file(text) == specs);
  CHECK(serialize_commands(parse_command_file(text)) == text);

  std::mt19937_64 rng(4);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<CommandSpec> random;
    for (int c = 0, n = 1 + static_cast<int>(rng() % 5); c < n; ++c) {
      CommandSpec s;
      s.name = "cmd_" + std::to_string(iter) + "_" + std::to_string(c);
      s.param_count = rng() % 4;
      for (std::size_t k = 0; k < s.param_count; ++k) s.param_descriptions.push_back("param " + std::to_string(k));
      for (int line = 0, m = 1 + static_cast<int>(rng() % 3); line < m; ++line) {
        if (line) s.template_text += "\n";
        s.template_text += "op(" + std::to_string(rng() % 100);
        if (s.param_count) s.template_text += ", $PAR" + std::to_string(1 + rng() % s.param_count) + "$";
        s.template_text += ")";
      }
      random.push_back(std::move(s));
    }
    CHECK(parse_command_file(serialize_commands(random)) == random);
  }
}

TEST_CASE("format errors") {
  CHECK_THROWS_AS(parse_command_file("bad\n1\ncolumn\nx($PAR2$)\n"), CommandFormatError);
  CHECK_THROWS_AS(parse_command_file("bad\nx\nx($PAR1$)\n"), CommandFormatError);
  CHECK_THROWS_AS(parse_command_file("bad\n2\nonly one\n"), CommandFormatError);
  CHECK_THROWS_AS(parse_command_file("a\n0\nx()\n\na\n0\ny()\n"), CommandFormatError);  // duplicate
  CHECK_THROWS_AS(parse_command_file("has space\n0\nx()\n"), CommandFormatError);
  try {
    parse_command_file("ok\n0\nx()\n\nbad\n1\ndesc\nx($PAR3$)\n", "f.cmd");
    FAIL("expected an error");
  } catch (const CommandFormatError& e) {
    CHECK(e.line() == 8);
    CHECK(std::string(e.what()).rfind("f.cmd:8:", 0) == 0);
  }
}

TEST_CASE("a blank line ends a command, so code may contain name-like lines") {
  const auto specs = parse_command_file("two_steps\n0\nget_column(1)\nfilter\n\n\nnext\n0\necdf(1)\n");
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].template_text == "get_column(1)\nfilter");
  CHECK(specs[1].name == "next");
}

TEST_CASE("placeholder substitution is literal, total and position-exact") {
  CHECK(substitute_params("hist(x, $PAR1$)", {"0.06"}) == "hist(x, 0.06)");
  CHECK(substitute_params("$PAR1$ + $PAR1$", {"A"}) == "A + A");
  CHECK(substitute_params("$PAR1$$PAR2$", {"$PAR2$", "z"}) == "$PAR2$z");  // no rescan
  CHECK(substitute_params("$PAR10$", {"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}) == "j");
  CHECK(substitute_params("cost $5 and $PAR$", {}) == "cost $5 and $PAR$");
  CHECK_THROWS_AS(substitute_params("$PAR2$", {"a"}), std::out_of_range);
  CHECK(placeholder_indices("$PAR2$ $PAR1$ $PAR2$") == std::vector<std::size_t>{2, 1, 2});

  const auto lh = parse_command_file("log_histogram\n3\ncolumn\nstep\naxis\nlog_histogram($PAR1$, $PAR2$, $PAR3$)\n");
  const auto inv = instantiate(lh[0], {"1", "0.06", "xy"});
  CHECK(inv.rendered == "log_histogram(1, 0.06, xy)");
  CHECK_THROWS_AS(instantiate(lh[0], {"1", "0.06"}), CommandArityError);
}

TEST_CASE("registry reload discovers a new command without code changes") {
  TempDir d;
  const fs::path file = d / "cmds.cmd";
  fs::copy_file(fixture(), file);
  CommandRegistry reg(file);
  const auto before = reg.snapshot();
  CHECK(before->size() == 10);
  CHECK_FALSE(reg.find("count_rows"));

  std::ofstream(file, std::ios::app) << "\ncount_rows\n1\ncolumn to group by\naggregate($PAR1$, \"\", count)\n";
  reg.reload();
  CHECK(reg.snapshot()->size() == 11);
  REQUIRE(reg.find("count_rows"));
  CHECK(before->size() == 10);  // old snapshots are unchanged

  std::ofstream(file, std::ios::app) << "\nbroken\nnot a number\n";
  CHECK_THROWS_AS(reg.reload(), CommandFormatError);
  CHECK(reg.snapshot()->size() == 11);

  CHECK_THROWS(CommandRegistry(d / "missing.cmd"));
}

TEST_CASE("registry readers stay consistent during reloads") {
  TempDir d;
  const fs::path file = d / "cmds.cmd";
  fs::copy_file(fixture(), file);
  CommandRegistry reg(file);
  std::atomic<bool> stop{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!stop) {
      const auto snap = reg.snapshot();
      if (snap->size() != 10 || (*snap)[0].name != "get_column") ++bad;
    }
  });
  for (int i = 0; i < 200; ++i) reg.reload();
  stop = true;
  reader.join();
  CHECK(bad == 0);
}

TEST_CASE("router: get_column on column 2 of a 3-column table") {
  Store st;
  const auto specs = load_command_file(fixture());
  const auto r = run_invocation(*st.s, "t", instantiate(spec_named(specs, "get_column"), {"2"}));
  REQUIRE(r.table);
  CHECK(r.table->meta.columns.size() == 1);
  CHECK(r.table->meta.columns[0].name == "V2");
  CHECK(r.table->rows.size() == 4);
}

TEST_CASE("router: a script override replaces the rendered text") {
  Store st;
  const auto specs = load_command_file(fixture());
  const auto inv = instantiate(spec_named(specs, "filter"), {"t[[1]] < 11000"});
  const auto plain = run_invocation(*st.s, "t", inv);
  const auto edited = run_invocation(*st.s, "t", inv, std::string("filter(t[[1]] < 26000)"));
  CHECK(plain.table->rows.size() == 2);
  CHECK(edited.table->rows.size() == 4);
  CHECK(edited.script == "filter(t[[1]] < 26000)");
  CHECK(plain.script == "filter(t[[1]] < 11000)");
}

TEST_CASE("router: every Table 1 command runs") {
  Store st;
  const auto specs = load_command_file(fixture());
  auto run = [&](const std::string& name, std::vector<std::string> args) {
    return run_invocation(*st.s, "t", instantiate(spec_named(specs, name), std::move(args)));
  };
  CHECK(run("apply_1Col", {"2", "x*2"}).table->rows[3][0] == Value(8));
  const auto agg = run("aggregate", {"3", "t[[2]] > 1", "count"});
  CHECK(agg.table->rows == std::vector<Row>{{Value("a"), Value(1)}, {Value("b"), Value(2)}});
  CHECK(run("difference_between_rows", {"1"}).table->rows.size() == 3);
  CHECK(run("exponential_distribution", {"2"}).fit);
  CHECK(run("lognormal_distribution", {"2"}).plots.size() == 4);
  const auto poly = run("polynomial_regression", {"2", "1"});
  REQUIRE(poly.polyfit);
  CHECK(poly.polyfit->coefficients[1] == doctest::Approx(1.0));
  CHECK(run("ecdf", {"2"}).plots.size() == 1);
  CHECK(run("spline", {"1", "2"}).fit);
}

TEST_CASE("router: multi-step scripts, map-reduce and storing results") {
  Store st;
  RunOptions opts;
  opts.output = "small_jobs";
  const auto r = run_script(*st.s, "t", "filter(t[[1]] < 11000)\nget_column(2)", opts);
  REQUIRE(r.stored);
  CHECK(st.s->read_table("small_jobs").rows == std::vector<Row>{{Value(1)}, {Value(2)}});

  const auto mr = run_script(*st.s, "t", "mapreduce(group_by_column(3), count)");
  CHECK(mr.table->rows == std::vector<Row>{{Value("a"), Value(2)}, {Value("b"), Value(2)}});

  const auto hist = run_script(*st.s, "t", "filter(t[[1]] < 30000); log_histogram(1, 0.5, xy)");
  REQUIRE(hist.plots.size() == 1);
  CHECK(hist.plots[0].x_scale == AxisScale::log);
  CHECK(hist.plots[0].y_scale == AxisScale::log);
}

TEST_CASE("router errors name the failing step and carry the script") {
  Store st;
  try {
    run_script(*st.s, "t", "get_column(2)\nfilter(t[[9]] > 1)");
    FAIL("expected failure");
  } catch (const CommandExecutionError& e) {
    CHECK(std::string(e.what()).find("step 2 (filter)") != std::string::npos);
    CHECK(e.script() == "get_column(2)\nfilter(t[[9]] > 1)");
  }
  CHECK_THROWS_AS(run_script(*st.s, "t", "no_such_op(1)"), CommandExecutionError);
  CHECK_THROWS_AS(run_script(*st.s, "t", "fit_exponential(2); get_column(1)"), CommandExecutionError);
  CHECK_THROWS_AS(run_script(*st.s, "t", "get_column(7)"), CommandExecutionError);
  CHECK_THROWS(run_script(*st.s, "missing", "get_column(1)"));
}
