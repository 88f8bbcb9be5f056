// Hand-built traces, random workloads and invariant checkers for simulator tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "tracebench/sim.hpp"

namespace tbtest {

using namespace tracebench;

struct TraceBuilder {
  Trace trace;

  TraceBuilder& machine(std::int64_t id, double cpu, double ram_effective, double at = 0) {
    trace.machines.push_back({id, cpu, ram_effective * 2, ram_effective});
    trace.events.push_back({at, EventKind::machine_add, id});
    return *this;
  }
  // One job holding one task with the same id.
  TraceBuilder& task(std::int64_t id, double at, double cpu, double ram, std::int64_t prio, double duration) {
    trace.tasks.push_back({id, id, cpu, ram, prio, duration});
    trace.events.push_back({at, EventKind::job_arrival, id});
    return *this;
  }
  TraceBuilder& event(double at, EventKind kind, std::int64_t id) {
    trace.events.push_back({at, kind, id});
    return *this;
  }
  SimConfig config(double horizon, double dt = 1) {
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const TraceEvent& a, const TraceEvent& b) { return a.time < b.time; });
    SimConfig c;
    c.mode = SimMode::trace_driven;
    c.trace = trace;
    c.horizon = horizon;
    c.dt = dt;
    return c;
  }
};

inline std::vector<double> times_of(const EventLog& log, EventKind kind, std::int64_t task) {
  std::vector<double> out;
  for (const auto& r : log.rows) {
    if (r.kind == kind && r.task_id == task) out.push_back(r.time);
  }
  return out;
}

// A random but well-formed workload. Sizes stay small enough that a config
// runs in well under a second.
inline WorkloadConfig random_workload(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  WorkloadConfig w;
  w.seed = rng();
  w.memory_cap_fraction = 0.3 + 0.7 * u(rng);
  w.kill_probability = 0.3 * u(rng);
  auto& s = w.samplers;
  s["cpu_per_task"] = LogNormal{std::log(0.02 + 0.2 * u(rng)), 0.2 + u(rng)};
  std::vector<double> ram = {0.01, 0.02, 0.05, 0.1, 0.3 * u(rng) + 0.01};
  std::sort(ram.begin(), ram.end());
  s["ram_per_task"] = Empirical{ram};
  s["task_priority"] = Empirical{{0, 1, 2, 4, 9, 11}};
  s["duration_normal_end"] = LogNormal{std::log(30 + 300 * u(rng)), 0.5 + u(rng)};
  s["duration_killed"] = Exponential{1.0 / (50 + 500 * u(rng))};
  s["tasks_per_job"] = LogNormal{u(rng) * 2, 0.3 + u(rng)};
  s["job_interarrival"] = Exponential{0.02 + 0.2 * u(rng)};
  s["machine_failure_interarrival"] = Exponential{1.0 / (500 + 5000 * u(rng))};
  s["machine_cpu"] = Empirical{{0.25, 0.5, 1}};
  s["machine_ram"] = Empirical{{0.25, 0.5, 0.75, 1}};
  if (rng() % 2) s["machine_downtime"] = Exponential{1.0 / (100 + 1000 * u(rng))};
  return w;
}

inline SimConfig random_sim_config(std::mt19937_64& rng) {
  SimConfig c;
  c.workload = random_workload(rng);
  c.seed = rng();
  c.initial_machines = 1 + rng() % 50;
  c.horizon = 2000 + static_cast<double>(rng() % 20000);
  c.dt = 10 + static_cast<double>(rng() % 300);
  c.max_tasks = 1 + rng() % 5000;
  if (rng() % 3 == 0) c.network_delay = static_cast<double>(rng() % 5);
  return c;
}

// Checks conservation, capacity, state consistency and eviction strictness
// after every event. Returns an empty string or the first violation.
class InvariantChecker {
 public:
  static constexpr double kTol = 1e-9;

  void attach(Simulator& sim) {
    sim.on_event = [this](const Simulator& s) { check(s); };
    sim.on_evict = [this](const Simulator& s, std::size_t task, const std::vector<std::size_t>& ev) {
      ++evictions;
      for (std::size_t e : ev) {
        if (!(s.tasks()[task].spec.priority > s.tasks()[e].spec.priority)) fail("eviction by a task that is not strictly more important");
      }
    };
  }

  void check(const Simulator& s) {
    if (!violation.empty()) return;
    const auto& c = s.counters();
    std::int64_t running = 0, waiting = 0, completed = 0, killed = 0;
    for (const auto& t : s.tasks()) {
      switch (t.status) {
        case TaskStatus::running:
          ++running;
          if (!t.machine) fail("running task without a machine");
          break;
        case TaskStatus::waiting:
          ++waiting;
          if (t.machine) fail("waiting task with a machine");
          break;
        case TaskStatus::completed: ++completed; break;
        case TaskStatus::killed: ++killed; break;
        case TaskStatus::pending: break;
      }
      if (!(t.remaining >= 0 && t.remaining <= t.spec.duration)) fail("remaining outside [0, duration]");
    }
    if (waiting != static_cast<std::int64_t>(s.queue().size())) fail("queue size differs from waiting tasks");
    if (running != c.running || completed != c.completed || killed != c.killed) fail("counters differ from task states");
    if (c.submitted != running + waiting + completed + killed) fail("conservation");
    for (const auto& m : s.machines()) {
      double cpu = 0, ram = 0;
      for (std::size_t r : m.running) {
        cpu += s.tasks()[r].spec.cpu;
        ram += s.tasks()[r].spec.ram;
        if (s.tasks()[r].machine != static_cast<std::size_t>(&m - s.machines().data())) fail("task listed on wrong machine");
      }
      if (!m.up && !m.running.empty()) fail("tasks on a down machine");
      if (cpu > m.spec.cpu + kTol || ram > m.spec.ram_effective + kTol) {
        std::ostringstream os;
        os << "capacity exceeded on machine " << m.spec.id << ": cpu " << cpu << "/" << m.spec.cpu << " ram " << ram
           << "/" << m.spec.ram_effective;
        fail(os.str());
      }
    }
    ++checked;
  }

  // Conservation on the sampled metric series.
  void check_metrics(const MetricsBundle& m) {
    const auto& sub = m.at("submitted").v;
    for (std::size_t i = 0; i < sub.size(); ++i) {
      const double sum = m.at("running").v[i] + m.at("waiting").v[i] + m.at("completed").v[i] + m.at("killed").v[i];
      if (sub[i] != sum) fail("sampled conservation at t=" + std::to_string(m.at("submitted").t[i]));
    }
  }

  std::string violation;
  std::uint64_t checked = 0;
  std::uint64_t evictions = 0;

 private:
  void fail(const std::string& what) {
    if (violation.empty()) violation = what;
  }
};

}  // namespace tbtest
