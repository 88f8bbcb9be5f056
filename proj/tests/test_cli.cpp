#include <doctest.h>

#include <sys/wait.h>

#include <json.hpp>

#include "support.hpp"
#include "tracebench/service.hpp"

using namespace tracebench;
using nlohmann::json;
using tbtest::TempDir;

#ifndef TRACEBENCH_CLI
#define TRACEBENCH_CLI "tracebench"
#endif
#ifndef TRACEBENCH_FIXTURES
#define TRACEBENCH_FIXTURES "tests/fixtures"
#endif

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

struct Cli {
  TempDir dir;
  fs::path home = dir / "home";

  Run operator()(const std::vector<std::string>& args) const {
    std::string cmd = quote(TRACEBENCH_CLI) + " --home " + quote(home.string()) + " --commands " +
                      quote(std::string(TRACEBENCH_FIXTURES) + "/table1.cmd");
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " >" + quote((dir / "out").string()) + " 2>" + quote((dir / "err").string());
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, tbtest::read_file(dir / "out"), tbtest::read_file(dir / "err")};
  }
  json ok(const std::vector<std::string>& args) const {
    const Run r = (*this)(args);
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return json::parse(r.out);
  }
};

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  Cli cli;
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"query", "--storage", "s"}).code == 2);  // missing --sql
  CHECK(cli({"fit", "--storage", "s", "--table", "t", "--column", "1", "--family", "weibull"}).code == 2);
}

TEST_CASE("runtime errors exit 1 with a JSON error on stderr") {
  Cli cli;
  const Run r = cli({"query", "--storage", "missing", "--sql", "SELECT V1 FROM t", "--dest", "x"});
  CHECK(r.code == 1);
  const auto e = json::parse(r.err);
  CHECK(e.at("schema") == kApiSchema);
  CHECK(e.at("error").at("status") == 404);
}

TEST_CASE("pipeline through the CLI matches the service") {
  Cli cli;
  tbtest::write_task_events(cli.dir / "events.csv", 2000, 3);
  cli.ok({"storage", "create", "s"});
  cli.ok({"import", "--storage", "s", "--file", (cli.dir / "events.csv").string(), "--table", "task_events"});
  const auto q1 = cli.ok({"query", "--storage", "s", "--sql", "SELECT DISTINCT V3 AS V1,V4 AS V2 FROM task_events",
                          "--dest", "job_task_id"});
  const auto q2 = cli.ok({"query", "--storage", "s", "--sql",
                          "SELECT V1 AS V1, COUNT(V2) AS V2 FROM job_task_id GROUP BY V1", "--dest", "tasks_per_job"});
  const auto rows = cli.ok({"storage", "rows", "s", "tasks_per_job", "--limit", "100000"});

  // Same steps through the service API against a second storage.
  ServiceOptions o;
  o.home = cli.home;
  Service svc(o);
  svc.create_storage("s2", "partitioned");
  svc.import_csv("s2", (cli.dir / "events.csv").string(), "task_events", false);
  const auto s1 = svc.query("s2", "SELECT DISTINCT V3 AS V1,V4 AS V2 FROM task_events", "job_task_id");
  const auto s2 = svc.query("s2", "SELECT V1 AS V1, COUNT(V2) AS V2 FROM job_task_id GROUP BY V1", "tasks_per_job");
  CHECK(q1.at("plan") == s1.at("plan"));
  CHECK(q2.at("table") == s2.at("table"));
  CHECK(rows.at("rows") == svc.table_rows("s2", "tasks_per_job", 0, 100000).at("rows"));

  const auto fit = cli.ok({"fit", "--storage", "s", "--table", "tasks_per_job", "--column", "2", "--family", "lognormal",
                           "--plots", (cli.dir / "plots").string()});
  CHECK(fit.at("fit") == svc.fit("s2", "tasks_per_job", 2, "lognormal").at("fit"));
  CHECK(fs::exists(cli.dir / "plots" / "qq.json"));
  cli.ok({"render", (cli.dir / "plots" / "qq.json").string(), (cli.dir / "qq.svg").string()});
  CHECK(tbtest::read_file(cli.dir / "qq.svg").find("<svg") != std::string::npos);

  const auto listed = cli.ok({"command", "list"});
  CHECK(listed.at("commands").size() == 10);
  const auto ran = cli.ok({"command", "run", "--storage", "s", "--table", "tasks_per_job", "get_column", "2"});
  CHECK(ran.at("rendered") == "get_column(2)");
}

TEST_CASE("simulate and compare through the CLI") {
  Cli cli;
  const std::string wl = std::string(TRACEBENCH_FIXTURES) + "/workload.json";
  const auto a = cli.ok({"simulate", "--config", wl, "--horizon", "20000", "--seed", "4", "--out", (cli.dir / "a").string()});
  CHECK(fs::exists(cli.dir / "a" / "metrics" / "running.csv"));
  CHECK_FALSE(fs::exists(cli.dir / "a.partial"));
  const auto b = cli.ok({"simulate", "--trace", (cli.dir / "a" / "trace").string(), "--horizon", "20000", "--out",
                         (cli.dir / "b").string()});
  CHECK(a.at("counters") == b.at("counters"));
  for (const char* m : {"running", "completed", "waiting", "evicted"}) {
    CHECK(tbtest::read_file(cli.dir / "a" / "metrics" / (std::string(m) + ".csv")) ==
          tbtest::read_file(cli.dir / "b" / "metrics" / (std::string(m) + ".csv")));
  }
  const auto cmp = cli.ok({"compare", "--real", (cli.dir / "a" / "metrics" / "running.csv").string(), "--sim",
                           (cli.dir / "b" / "metrics" / "running.csv").string(), "--alpha", "1", "--plot",
                           (cli.dir / "plot.json").string()});
  CHECK(cmp.at("raw").at("rmse") == 0.0);
  CHECK(cmp.at("raw").at("pearson_r") == 1.0);
  CHECK(fs::exists(cli.dir / "plot.json"));
}
