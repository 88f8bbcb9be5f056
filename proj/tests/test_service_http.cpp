#include <doctest.h>

#include <httplib.h>

#include <thread>

#include "support.hpp"
#include "tracebench/http.hpp"
#include "tracebench/service.hpp"
#include "tracebench/validation.hpp"

using namespace tracebench;
using nlohmann::json;
using tbtest::TempDir;

#ifndef TRACEBENCH_FIXTURES
#define TRACEBENCH_FIXTURES "tests/fixtures"
#endif

namespace {

const std::string kFixtures = TRACEBENCH_FIXTURES;

// A service on a free port, served from a background thread.
struct Served {
  TempDir dir;
  Service svc;
  HttpServer http{svc};
  int port = 0;
  std::thread thread;
  std::unique_ptr<httplib::Client> http_client;

  explicit Served(unsigned sim_workers = 2) : svc(options(dir, sim_workers)) {
    port = http.bind("127.0.0.1", 0);
    thread = std::thread([this] { http.serve(); });
    http_client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client().set_read_timeout(30, 0);
    for (int i = 0; i < 500; ++i) {
      if (auto r = client().Get("/health"); r && r->status == 200) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    FAIL("server did not come up");
  }
  ~Served() {
    http.stop();
    thread.join();
  }

  httplib::Client& client() { return *http_client; }

  static ServiceOptions options(const TempDir& d, unsigned sim_workers) {
    ServiceOptions o;
    o.home = d / "home";
    o.commands_file = kFixtures + "/table1.cmd";
    o.sim_workers = sim_workers;
    o.query_workers = 2;
    o.sim_output_root = d / "sims";
    fs::create_directories(o.home);
    return o;
  }

  std::pair<int, json> get(const std::string& path) {
    auto r = client().Get(path);
    REQUIRE(r);
    return {r->status, json::parse(r->body)};
  }
  std::pair<int, json> post(const std::string& path, const json& body) {
    auto r = client().Post(path, body.dump(), "application/json");
    REQUIRE(r);
    return {r->status, json::parse(r->body)};
  }

  // Storage "s" with a task_events table.
  void seed_data(std::size_t rows = 3000) {
    tbtest::write_task_events(dir / "events.csv", rows, 5);
    REQUIRE(post("/storages", {{"id", "s"}}).first == 201);
    REQUIRE(post("/storages/s/import", {{"file", (dir / "events.csv").string()}, {"table", "task_events"}}).first == 201);
  }
};

json long_sim_body() {
  return {{"workload_file", kFixtures + "/workload.json"}, {"horizon", 1e7}, {"machines", 50}, {"seed", 3}, {"max_tasks", 300000}};
}

json short_sim_body(std::uint64_t seed = 3) {
  return {{"workload_file", kFixtures + "/workload.json"}, {"horizon", 20000}, {"seed", seed}, {"dt", 300}};
}

json wait_for(Served& s, const std::string& id, std::function<bool(const std::string&)> pred) {
  for (int i = 0; i < 3000; ++i) {
    const auto [code, j] = s.get("/simulations/" + id);
    REQUIRE(code == 200);
    if (pred(j.at("status").get<std::string>())) return j;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  FAIL("simulation " << id << " never reached the expected state");
  return {};
}

}  // namespace

TEST_CASE("health, schema tags and unknown routes") {
  Served s;
  const auto [code, j] = s.get("/health");
  CHECK(code == 200);
  CHECK(j.at("schema") == kApiSchema);
  const auto [c404, e] = s.get("/no/such/route");
  CHECK(c404 == 404);
  CHECK(e.at("schema") == kApiSchema);
  CHECK(e.at("error").at("status") == 404);
}

TEST_CASE("storage lifecycle and status codes") {
  Served s;
  auto [c, j] = s.post("/storages", {{"id", "s"}, {"backend", "relational"}});
  CHECK(c == 201);
  CHECK(j.at("backend") == "relational");
  CHECK(j.at("schema") == kApiSchema);
  CHECK(s.post("/storages", {{"id", "s"}}).first == 409);
  CHECK(s.post("/storages", {{"id", "bad name!"}}).first == 400);
  CHECK(s.post("/storages", {{"id", "p"}, {"backend", "hbase"}}).first == 400);
  CHECK(s.get("/storages/nope").first == 404);
  CHECK(s.get("/storages").second.at("storages").size() == 1);
  CHECK(s.post("/storages/s/import", {{"file", "/nonexistent.csv"}, {"table", "t"}}).first >= 400);
  const auto bad = s.client().Post("/storages", "{not json", "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).at("error").at("code") == "bad_json");
}

TEST_CASE("POST /query runs the job/task pipeline and stores its results") {
  Served s;
  s.seed_data();
  auto [c1, q1] = s.post("/query", {{"storage", "s"},
                                    {"sql", "SELECT DISTINCT V3 AS V1,V4 AS V2 FROM task_events"},
                                    {"dest", "job_task_id"}});
  REQUIRE(c1 == 201);
  CHECK(q1.at("schema") == kApiSchema);
  CHECK(q1.at("table").at("name") == "job_task_id");
  auto [c2, q2] = s.post("/query", {{"storage", "s"},
                                    {"sql", "SELECT V1 AS V1, COUNT(V2) AS V2 FROM job_task_id GROUP BY V1"},
                                    {"dest", "tasks_per_job"}});
  REQUIRE(c2 == 201);
  const auto rows = s.get("/storages/s/tables/tasks_per_job/rows?limit=5").second.at("rows");
  CHECK(rows.size() == 5);
  CHECK(rows[0][1].get<std::int64_t>() >= 1);
  CHECK(s.get("/storages/s/tables").second.at("tables").size() == 3);

  const auto [ce, plan] = s.post("/query", {{"storage", "s"}, {"sql", "SELECT V1 FROM task_events"}, {"explain", true}});
  CHECK(ce == 200);
  CHECK_FALSE(plan.contains("table"));
  CHECK(plan.at("plan").get<std::string>().find("plan") != std::string::npos);

  const auto [cerr, err] = s.post("/query", {{"storage", "s"}, {"sql", "SELECT V1 FROM task_events ORDER BY V1"}, {"dest", "x"}});
  CHECK(cerr == 400);
  CHECK(err.at("error").at("code") == "query_unsupported");
  CHECK(err.at("error").at("detail").at("column") == 28);
  CHECK(s.post("/query", {{"storage", "s"}, {"sql", "SELECT V99 FROM task_events"}, {"dest", "x"}}).first == 400);
  CHECK(s.post("/query", {{"storage", "s"}, {"sql", "SELECT V1 FROM missing"}, {"dest", "x"}}).first == 404);
  CHECK(s.post("/query", {{"storage", "s"}, {"sql", "SELECT V1 FROM task_events"}, {"dest", "task_events"}}).first == 409);
}

TEST_CASE("commands: list, run, fit, plots and reload") {
  Served s;
  s.seed_data();
  const auto cmds = s.get("/commands").second.at("commands");
  CHECK(cmds.size() == 10);
  CHECK(cmds[0].at("name") == "get_column");

  auto [c, r] = s.post("/commands/run", {{"storage", "s"}, {"table", "task_events"}, {"command", "filter"}, {"args", {"t[[3]] < 6100"}}, {"output", "early"}});
  REQUIRE(c == 200);
  CHECK(r.at("rendered") == "filter(t[[3]] < 6100)");
  CHECK(s.get("/storages/s/tables/early/rows").first == 200);

  auto [cf, fit] = s.post("/fit", {{"storage", "s"}, {"table", "task_events"}, {"column", 10}, {"family", "spline"}, {"intervals", 10}});
  REQUIRE(cf == 200);
  REQUIRE(fit.at("plot_ids").size() >= 1);
  const std::string pid = fit.at("plot_ids")[0];
  const auto [cp, plot] = s.get("/plots/" + pid);
  CHECK(cp == 200);
  CHECK(plot.at("plot").at("kind") == "spline_cdf");
  auto svg = s.client().Get(("/plots/" + pid + "?format=svg").c_str());
  REQUIRE(svg);
  CHECK(svg->get_header_value("Content-Type") == "image/svg+xml");
  CHECK(svg->body.find("<svg") != std::string::npos);
  CHECK(s.get("/plots/p999").first == 404);

  CHECK(s.post("/commands/run", {{"storage", "s"}, {"table", "task_events"}, {"command", "nope"}}).first == 404);
  CHECK(s.post("/commands/run", {{"storage", "s"}, {"table", "task_events"}, {"command", "filter"}}).first == 400);
  const auto [cx, ex] = s.post("/commands/run", {{"storage", "s"}, {"table", "task_events"}, {"script", "get_column(2)\nfilter(t[[9]] > 1)"}});
  CHECK(cx == 400);
  CHECK(ex.at("error").at("code") == "command_failed");
  CHECK(s.post("/fit", {{"storage", "s"}, {"table", "task_events"}, {"column", 7}, {"family", "exponential"}}).first == 400);

  const auto [cr, reload] = s.post("/commands/reload", json::object());
  CHECK(cr == 200);
  CHECK(reload.at("schema") == kApiSchema);
}

TEST_CASE("simulations go queued, running, done and expose metrics") {
  Served s(1);
  const std::string blocker = s.post("/simulations", long_sim_body()).second.at("id");
  wait_for(s, blocker, [](const std::string& st) { return st == "running"; });
  const auto [c, sub] = s.post("/simulations", short_sim_body());
  CHECK(c == 202);
  const std::string id = sub.at("id");
  CHECK(sub.at("status") == "queued");
  CHECK(s.get("/simulations/" + id).second.at("status") == "queued");
  CHECK(s.get("/simulations/" + id + "/metrics").first == 400);  // not done yet

  CHECK(s.post("/simulations/" + blocker + "/cancel", json::object()).first == 200);
  const auto stopped = wait_for(s, blocker, [](const std::string& st) { return st != "running"; });
  CHECK_MESSAGE(stopped.at("status") == "cancelled", stopped.dump());
  CHECK_FALSE(fs::exists(s.dir / "sims" / blocker));
  CHECK_FALSE(fs::exists(s.dir / "sims" / (blocker + ".partial")));

  const auto done = wait_for(s, id, [](const std::string& st) { return st == "done" || st == "failed"; });
  REQUIRE(done.at("status") == "done");
  CHECK(done.at("counters").at("submitted").get<std::int64_t>() > 0);
  CHECK(fs::exists(s.dir / "sims" / id / "metrics" / "running.csv"));
  CHECK_FALSE(fs::exists(s.dir / "sims" / (id + ".partial")));

  const auto [cm, m] = s.get("/simulations/" + id + "/metrics?metric=waiting&alpha=0.5");
  REQUIRE(cm == 200);
  CHECK(m.at("t").size() == m.at("v").size());
  CHECK(m.at("smoothed").size() == m.at("v").size());
  CHECK(m.at("dt") == 300.0);
  CHECK(s.get("/simulations/" + id + "/metrics?metric=throughput").first == 404);
  CHECK(s.get("/simulations/s999").first == 404);

  // The stored metrics are the ones served, and they compare equal to themselves.
  const auto running = read_series_csv(s.dir / "sims" / id / "metrics" / "running.csv");
  const auto [cc, cmp] = s.post("/compare", {{"real", (s.dir / "sims" / id / "metrics" / "running.csv").string()},
                                             {"sim", {{"t", running.t}, {"v", running.v}, {"dt", running.dt}}},
                                             {"alpha", 1.0}});
  REQUIRE(cc == 200);
  CHECK(cmp.at("raw").at("rmse") == 0.0);
  CHECK(s.get("/plots/" + cmp.at("plot_id").get<std::string>()).second.at("plot").at("kind") == "timeseries");
}

TEST_CASE("cancelling a queued simulation and bad simulation requests") {
  Served s(1);
  const std::string a = s.post("/simulations", long_sim_body()).second.at("id");
  const std::string b = s.post("/simulations", long_sim_body()).second.at("id");
  CHECK(s.post("/simulations/" + b + "/cancel", json::object()).second.at("status") == "cancelled");
  s.post("/simulations/" + a + "/cancel", json::object());
  wait_for(s, a, [](const std::string& st) { return st == "cancelled"; });
  CHECK(s.post("/simulations", {{"horizon", 10}}).first == 400);
  CHECK(s.post("/simulations", {{"workload_file", kFixtures + "/workload.json"}, {"horizon", -1}}).first == 400);
  CHECK(s.post("/simulations", {{"workload", {{"schema", "x"}}}}).first == 400);
}

TEST_CASE("service results equal a direct library run") {
  ServiceOptions o;
  TempDir d;
  o.home = d / "home";
  o.sim_workers = 1;
  Service svc(o);
  const auto id = svc.submit_simulation(sim_config_from_json(short_sim_body(8)));
  CHECK(svc.wait_simulation(id).at("status") == "done");
  const auto direct = simulate(sim_config_from_json(short_sim_body(8)));
  CHECK(svc.simulation_result(id)->log == direct.log);
}

TEST_CASE("error classification") {
  CHECK(classify_error(NotFoundError("x")).status == 404);
  CHECK(classify_error(NameCollisionError("x")).status == 409);
  CHECK(classify_error(BadRequest("x")).status == 400);
  CHECK(classify_error(SimError("x")).status == 400);
  CHECK(classify_error(std::runtime_error("x")).status == 500);
  const auto j = error_json(classify_error(NotFoundError("gone")));
  CHECK(j.at("error").at("message") == "gone");
  CHECK(parse_bind_address(":8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
  CHECK(parse_bind_address("0.0.0.0:1") == std::pair<std::string, int>{"0.0.0.0", 1});
  CHECK_THROWS(parse_bind_address("host:port"));
}
