#include <doctest.h>

#include <numeric>

#include "sim_support.hpp"
#include "support.hpp"

using namespace tracebench;
using tbtest::InvariantChecker;
using tbtest::TraceBuilder;
using tbtest::times_of;

#ifndef TRACEBENCH_FIXTURES
#define TRACEBENCH_FIXTURES "tests/fixtures"
#endif

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::optional<std::int64_t> machine_of(const Simulator& sim, std::int64_t task) {
  for (const auto& t : sim.tasks()) {
    if (t.spec.id == task && t.machine) return sim.machines()[*t.machine].spec.id;
  }
  return std::nullopt;
}

SimConfig fixture_config(std::uint64_t seed, double horizon = 20000) {
  SimConfig c;
  c.workload = load_workload(std::string(TRACEBENCH_FIXTURES) + "/workload.json");
  c.seed = seed;
  c.horizon = horizon;
  c.initial_machines = 10;
  return c;
}

}  // namespace

TEST_CASE("placement: a task that fits is placed") {
  Simulator sim(TraceBuilder().machine(1, 1.0, 0.5).task(7, 0, 0.5, 0.4, 1, kInf).config(10));
  sim.run();
  CHECK(machine_of(sim, 7) == 1);
  CHECK(sim.counters().running == 1);
}

TEST_CASE("placement: the memory cap leaves a large task waiting") {
  Simulator sim(TraceBuilder().machine(1, 1.0, 0.5).task(7, 0, 0.1, 0.6, 1, kInf).config(10));
  sim.run();
  CHECK_FALSE(machine_of(sim, 7));
  CHECK(sim.queue().size() == 1);
}

TEST_CASE("placement: first fit over machines in id order") {
  Simulator sim(TraceBuilder()
                    .machine(2, 1, 1)
                    .machine(1, 1, 1)
                    .task(10, 0, 1, 0.5, 1, kInf)
                    .task(11, 1, 0.5, 0.5, 1, kInf)
                    .config(10));
  sim.run();
  CHECK(machine_of(sim, 10) == 1);
  CHECK(machine_of(sim, 11) == 2);
}

TEST_CASE("eviction: higher priority displaces lower") {
  std::vector<std::size_t> evicted;
  Simulator sim(TraceBuilder().machine(1, 1, 1).task(1, 0, 1, 0.5, 2, 100).task(2, 50, 1, 0.5, 5, 10).config(500));
  sim.on_evict = [&](const Simulator& s, std::size_t, const std::vector<std::size_t>& ev) {
    evicted = ev;
    REQUIRE(ev.size() == 1);
    CHECK(s.tasks()[ev[0]].status == TaskStatus::waiting);
    CHECK(s.tasks()[ev[0]].remaining == 100);  // progress is lost
    CHECK(s.tasks()[ev[0]].evictions == 1);
  };
  sim.run();
  CHECK(evicted.size() == 1);
  CHECK(times_of(sim.log(), EventKind::task_evict, 1) == std::vector<double>{50});
  CHECK(times_of(sim.log(), EventKind::task_finish, 2) == std::vector<double>{60});
  CHECK(times_of(sim.log(), EventKind::task_schedule, 1) == std::vector<double>{0, 60});
  CHECK(times_of(sim.log(), EventKind::task_finish, 1) == std::vector<double>{160});
  CHECK(sim.metrics().at("evicted").v.back() == 1);
}

TEST_CASE("eviction: equal priorities never evict") {
  Simulator sim(TraceBuilder().machine(1, 1, 1).task(1, 0, 1, 0.5, 3, 100).task(2, 50, 1, 0.5, 3, 10).config(500));
  sim.run();
  CHECK(times_of(sim.log(), EventKind::task_evict, 1).empty());
  CHECK(times_of(sim.log(), EventKind::task_schedule, 2) == std::vector<double>{100});
}

TEST_CASE("property: eviction sets are strictly lower, sufficient, minimal and follow the victim order") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 1);
  int evicting_cases = 0;
  for (int iter = 0; iter < 2000; ++iter) {
    TraceBuilder b;
    b.machine(1, 1, 1);
    const std::size_t k = 1 + rng() % 4;
    for (std::size_t i = 0; i < k; ++i) b.task(static_cast<std::int64_t>(i), static_cast<double>(i), 0.25 * u(rng), 0.25 * u(rng), rng() % 4, kInf);
    const double cpu = 0.3 + 0.7 * u(rng), ram = u(rng);
    const std::int64_t prio = rng() % 5;
    b.task(99, 10, cpu, ram, prio, kInf);
    const auto running = b.trace.tasks;

    std::optional<std::vector<std::int64_t>> chosen;
    Simulator sim(b.config(20));
    sim.on_evict = [&](const Simulator& s, std::size_t, const std::vector<std::size_t>& ev) {
      chosen.emplace();
      for (std::size_t e : ev) chosen->push_back(s.tasks()[e].spec.id);
    };
    sim.run();

    // Brute force over subsets of the k running tasks.
    const auto fits = [&](unsigned mask) {
      double c = cpu, r = ram;
      for (std::size_t i = 0; i < k; ++i) {
        if (!(mask >> i & 1)) {
          c += running[i].cpu;
          r += running[i].ram;
        }
      }
      return c <= 1 && r <= 1;
    };
    unsigned lower = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (running[i].priority < prio) lower |= 1u << i;
    }
    const bool fits_free = fits(0);
    bool any = false;
    for (unsigned mask = 1; mask < (1u << k); ++mask) any |= (mask & ~lower) == 0 && fits(mask);

    if (fits_free || !any) {
      CHECK_FALSE(chosen);
      CHECK((machine_of(sim, 99).has_value()) == fits_free);
      continue;
    }
    REQUIRE(chosen);
    ++evicting_cases;
    unsigned mask = 0;
    for (auto id : *chosen) mask |= 1u << id;
    CHECK((mask & ~lower) == 0);
    CHECK(fits(mask));
    for (std::size_t i = 0; i < k; ++i) {
      if (mask >> i & 1) CHECK_FALSE(fits(mask & ~(1u << i)));  // nothing removable
    }
    // Every victim belongs to the greedy prefix: lowest priority first, then latest start.
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < k; ++i) {
      if (lower >> i & 1) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
      return running[a].priority != running[c].priority ? running[a].priority < running[c].priority : a > c;
    });
    unsigned prefix = 0;
    for (std::size_t i : order) {
      prefix |= 1u << i;
      if (fits(prefix)) break;
    }
    CHECK((mask & ~prefix) == 0);
    CHECK(machine_of(sim, 99) == 1);
  }
  CHECK(evicting_cases > 100);
}

TEST_CASE("completion, dispatch delay and sampled metrics") {
  auto cfg = TraceBuilder().machine(1, 1, 1).task(1, 0, 0.5, 0.5, 1, 10).config(20, 1);
  {
    const auto r = simulate(cfg);
    const auto& done = r.metrics.at("completed");
    CHECK(done.v[9] == 0);
    CHECK(done.v[10] == 1);
    CHECK(r.metrics.at("running").v[5] == 1);
    CHECK(r.metrics.at("running").v[10] == 0);
    CHECK(done.size() == 21);
    CHECK(done.t[20] == 20);
  }
  cfg.network_delay = 2;
  CHECK(times_of(simulate(cfg).log, EventKind::task_finish, 1) == std::vector<double>{12});
}

TEST_CASE("machine failure requeues without counting evictions") {
  const auto r = simulate(TraceBuilder()
                              .machine(1, 1, 1)
                              .machine(2, 1, 1)
                              .task(1, 0, 0.5, 0.5, 1, 10)
                              .event(5, EventKind::machine_failure, 1)
                              .config(30));
  CHECK(times_of(r.log, EventKind::task_requeue, 1) == std::vector<double>{5});
  CHECK(times_of(r.log, EventKind::task_finish, 1) == std::vector<double>{15});
  CHECK(r.counters.failure_requeued == 1);
  CHECK(r.counters.evicted == 0);
  CHECK(r.metrics.at("evicted").v.back() == 0);
}

TEST_CASE("a job kill removes its waiting and running tasks") {
  TraceBuilder b;
  b.machine(1, 1, 1);
  b.trace.tasks = {{1, 100, 1, 0.5, 1, kInf}, {2, 100, 1, 0.5, 1, kInf}};
  b.event(0, EventKind::job_arrival, 100).event(7, EventKind::job_kill, 100);
  const auto r = simulate(b.config(10));
  CHECK(r.counters.killed == 2);
  CHECK(r.counters.running == 0);
  CHECK(r.metrics.at("waiting").v[6] == 1);
  CHECK(r.metrics.at("waiting").v[7] == 0);
}

TEST_CASE("configuration errors") {
  auto cfg = TraceBuilder().machine(1, 1, 1).config(10);
  cfg.horizon = 0;
  CHECK_THROWS_AS(Simulator{cfg}, SimError);
  cfg.horizon = -5;
  CHECK_THROWS_AS(Simulator{cfg}, SimError);
  SimConfig synth;
  CHECK_THROWS_AS(Simulator{synth}, SimError);
  TraceBuilder bad;
  bad.machine(1, 1, 1).event(3, EventKind::job_kill, 42);
  CHECK_THROWS_AS(Simulator{bad.config(10)}, SimError);
  auto loop = TraceBuilder().machine(1, 1, 1).task(1, 0, 1, 1, 1, 1).task(2, 0, 1, 1, 1, 1).task(3, 0, 1, 1, 1, 1).config(10);
  loop.max_events = 3;
  CHECK_THROWS_AS(simulate(loop), SimError);
}

TEST_CASE("synthetic initialization") {
  auto cfg = fixture_config(3);
  Simulator sim(cfg);
  const auto adds = std::count_if(sim.trace().events.begin(), sim.trace().events.end(),
                                  [](const TraceEvent& e) { return e.kind == EventKind::machine_add && e.time == 0; });
  CHECK(adds == 10);
  CHECK(sim.pending_events() >= 11);
  sim.run();
  CHECK(std::count_if(sim.machines().begin(), sim.machines().end(), [](const auto& m) { return m.up; }) >= 1);
}

TEST_CASE("trace-driven events are processed in timestamp order") {
  const auto r = simulate(fixture_config(5));
  std::vector<TraceEvent> exo;
  for (const auto& row : r.log.rows) {
    if (is_exogenous(row.kind)) exo.push_back({row.time, row.kind, 0});
  }
  REQUIRE(exo.size() == r.trace.events.size());
  for (std::size_t i = 0; i < exo.size(); ++i) {
    CHECK(exo[i].time == r.trace.events[i].time);
    CHECK(exo[i].kind == r.trace.events[i].kind);
  }
  CHECK(std::is_sorted(r.log.rows.begin(), r.log.rows.end(),
                       [](const LogRow& a, const LogRow& b) { return a.time < b.time; }));
}

TEST_CASE("determinism: same config and seed give a bit-identical log") {
  const auto a = simulate(fixture_config(11));
  const auto b = simulate(fixture_config(11));
  CHECK(a.log == b.log);
  CHECK(event_log_csv(a.log) == event_log_csv(b.log));
  CHECK(a.metrics.series == b.metrics.series);
  CHECK_FALSE(simulate(fixture_config(12)).log == a.log);
}

TEST_CASE("replaying the event log reproduces every metric series") {
  tbtest::TempDir d;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto a = simulate(fixture_config(seed));
    SimConfig replay;
    replay.mode = SimMode::trace_driven;
    replay.trace = trace_from_log(a.log, a.trace.tasks, a.trace.machines);
    replay.horizon = a.log.horizon;
    const auto b = simulate(replay);
    for (const auto& m : kMetricNames) CHECK(b.metrics.at(m) == a.metrics.at(m));
    CHECK(b.log == a.log);

    write_trace_dir(d / "trace", a.trace, &a.log);
    replay.trace = read_trace_dir(d / "trace");
    for (const auto& m : kMetricNames) CHECK(simulate(replay).metrics.at(m) == a.metrics.at(m));
  }
  const auto a = simulate(fixture_config(9));
  CHECK(parse_event_log_csv(event_log_csv(a.log), a.log.horizon) == a.log);
}

TEST_CASE("property: conservation, capacity and strictness on random configs") {
  std::mt19937_64 rng(1234);
  std::uint64_t evictions = 0;
  for (int iter = 0; iter < 15; ++iter) {
    const SimConfig cfg = tbtest::random_sim_config(rng);
    Simulator sim(cfg);
    InvariantChecker chk;
    chk.attach(sim);
    sim.run();
    chk.check_metrics(sim.metrics());
    CHECK_MESSAGE(chk.violation.empty(), "config " << iter << ": " << chk.violation);
    CHECK(chk.checked == sim.counters().events);
    evictions += chk.evictions;
  }
  CHECK(evictions > 0);
}

TEST_CASE("Little's law: time-average running matches arrival rate times mean duration") {
  WorkloadConfig w;
  for (const auto& s : WorkloadConfig::slot_names()) w.samplers.emplace(s, Exponential{1});
  w.samplers["job_interarrival"] = Exponential{0.1};
  w.samplers["duration_normal_end"] = Exponential{0.2};
  w.samplers["tasks_per_job"] = Empirical{{1}};
  w.samplers["cpu_per_task"] = Empirical{{0.01}};
  w.samplers["ram_per_task"] = Empirical{{0.01}};
  w.samplers["machine_cpu"] = Empirical{{1}};
  w.samplers["machine_ram"] = Empirical{{1}};
  w.samplers["machine_failure_interarrival"] = Exponential{1e-12};
  SimConfig c;
  c.workload = w;
  c.initial_machines = 20;
  c.horizon = 1e5;
  c.dt = 1;
  c.seed = 2024;
  const auto r = simulate(c);
  const auto& run = r.metrics.at("running").v;
  const double avg = std::accumulate(run.begin(), run.end(), 0.0) / static_cast<double>(run.size());
  CHECK(avg >= 0.5 * 0.95);
  CHECK(avg <= 0.5 * 1.05);
  CHECK(r.metrics.at("waiting").v.back() == 0);
}
