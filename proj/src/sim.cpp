#include "tracebench/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace tracebench {

namespace {

constexpr std::pair<EventKind, std::string_view> kKinds[] = {
    {EventKind::job_arrival, "job_arrival"},       {EventKind::task_finish, "task_finish"},
    {EventKind::job_kill, "job_kill"},             {EventKind::machine_add, "machine_add"},
    {EventKind::machine_remove, "machine_remove"}, {EventKind::machine_failure, "machine_failure"},
    {EventKind::task_submit, "task_submit"},       {EventKind::task_schedule, "task_schedule"},
    {EventKind::task_evict, "task_evict"},         {EventKind::task_requeue, "task_requeue"},
    {EventKind::task_kill, "task_kill"},
};

std::string fmt(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(std::string_view s, const std::string& where) {
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw SimError(where + ": bad number '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_i64(std::string_view s, const std::string& where) {
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw SimError(where + ": bad integer '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto c = line.find(',', start);
    out.push_back(line.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
    if (c == std::string_view::npos) break;
    start = c + 1;
  }
  return out;
}

// Calls fn(fields, line_number) for each data line after checking the header.
template <class Fn>
void for_each_csv_row(std::string_view text, std::string_view header, const std::string& origin, Fn fn) {
  std::size_t pos = 0, line_no = 0;
  bool seen_header = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!seen_header) {
      if (line != header) throw SimError(origin + ": expected header '" + std::string(header) + "'");
      seen_header = true;
      continue;
    }
    fn(split(line), origin + ":" + std::to_string(line_no));
  }
  if (!seen_header) throw SimError(origin + ": missing header");
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw SimError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw SimError("cannot write " + p.string());
  out << text;
  if (!out) throw SimError("write failed: " + p.string());
}

}  // namespace

std::string_view to_string(EventKind k) {
  for (auto [kind, name] : kKinds) {
    if (kind == k) return name;
  }
  return "?";
}

EventKind event_kind_from_string(std::string_view s) {
  for (auto [kind, name] : kKinds) {
    if (name == s) return kind;
  }
  throw SimError("unknown event kind '" + std::string(s) + "'");
}

bool is_exogenous(EventKind k) {
  return k == EventKind::job_arrival || k == EventKind::job_kill || k == EventKind::machine_add ||
         k == EventKind::machine_remove || k == EventKind::machine_failure;
}

std::string event_log_csv(const EventLog& log) {
  std::string out = "time,seq,kind,job_id,task_id,machine_id\n";
  const auto id = [](std::int64_t v) { return v < 0 ? std::string() : std::to_string(v); };
  for (const auto& r : log.rows) {
    out += fmt(r.time);
    out += ',';
    out += std::to_string(r.seq);
    out += ',';
    out += to_string(r.kind);
    out += ',';
    out += id(r.job_id);
    out += ',';
    out += id(r.task_id);
    out += ',';
    out += id(r.machine_id);
    out += '\n';
  }
  return out;
}

EventLog parse_event_log_csv(std::string_view text, double horizon) {
  EventLog log;
  log.horizon = horizon;
  for_each_csv_row(text, "time,seq,kind,job_id,task_id,machine_id", "events.csv",
                   [&](const std::vector<std::string_view>& f, const std::string& where) {
                     if (f.size() != 6) throw SimError(where + ": expected 6 fields");
                     const auto id = [&](std::string_view s) { return s.empty() ? -1 : parse_i64(s, where); };
                     log.rows.push_back({parse_double(f[0], where), parse_i64(f[1], where),
                                         event_kind_from_string(f[2]), id(f[3]), id(f[4]), id(f[5])});
                   });
  return log;
}

void Trace::check() const {
  std::set<std::int64_t> task_ids, job_ids, machine_ids;
  for (const auto& t : tasks) {
    if (!task_ids.insert(t.id).second) throw SimError("duplicate task id " + std::to_string(t.id));
    job_ids.insert(t.job_id);
    if (!(t.cpu >= 0) || !(t.ram >= 0) || !std::isfinite(t.cpu) || !std::isfinite(t.ram)) {
      throw SimError("task " + std::to_string(t.id) + " has invalid resource requests");
    }
    if (!(t.duration > 0)) throw SimError("task " + std::to_string(t.id) + " has nonpositive duration");
  }
  for (const auto& m : machines) {
    if (!machine_ids.insert(m.id).second) throw SimError("duplicate machine id " + std::to_string(m.id));
    if (!(m.cpu >= 0) || !(m.ram_effective >= 0) || !std::isfinite(m.cpu) || !std::isfinite(m.ram_effective)) {
      throw SimError("machine " + std::to_string(m.id) + " has invalid capacity");
    }
  }
  std::set<std::int64_t> arrived;
  double last = 0;
  for (const auto& e : events) {
    if (!is_exogenous(e.kind)) throw SimError(std::string("trace event of kind ") + std::string(to_string(e.kind)));
    if (!std::isfinite(e.time) || e.time < last) throw SimError("trace events must have nondecreasing finite times");
    last = e.time;
    if (e.kind == EventKind::job_arrival) {
      if (!arrived.insert(e.id).second) throw SimError("job " + std::to_string(e.id) + " arrives twice");
    } else if (e.kind == EventKind::job_kill) {
      if (!arrived.count(e.id)) throw SimError("job " + std::to_string(e.id) + " is killed before it arrives");
    } else if (!machine_ids.count(e.id)) {
      throw SimError("event references unknown machine " + std::to_string(e.id));
    }
  }
}

Trace generate_trace(const WorkloadConfig& w, const SyntheticParams& p) {
  w.check();
  Trace tr;
  RngStream mcpu(p.seed, "machine_cpu"), mram(p.seed, "machine_ram");
  for (std::size_t i = 0; i < p.initial_machines; ++i) {
    TraceMachine m;
    m.id = static_cast<std::int64_t>(i);
    m.cpu = std::max(0.0, draw(w.at("machine_cpu"), mcpu));
    m.ram_installed = std::max(0.0, draw(w.at("machine_ram"), mram));
    m.ram_effective = w.memory_cap_fraction * m.ram_installed;
    tr.machines.push_back(m);
    tr.events.push_back({0.0, EventKind::machine_add, m.id});
  }

  RngStream arrivals(p.seed, "job_interarrival"), sizes(p.seed, "tasks_per_job"), cpu(p.seed, "cpu_per_task"),
      ram(p.seed, "ram_per_task"), prio(p.seed, "task_priority"), dur(p.seed, "duration_normal_end"),
      kdur(p.seed, "duration_killed"), end_type(p.seed, "job_end_type");
  double t = 0;
  std::int64_t job = 0, task = 0;
  std::size_t total = 0;
  while (total < p.max_tasks) {
    t += draw(w.at("job_interarrival"), arrivals);
    if (!(t <= p.horizon)) break;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(to_count(draw(w.at("tasks_per_job"), sizes))),
                                         p.max_tasks - total);
    const bool killed = end_type.uniform() < w.kill_probability;
    for (std::size_t k = 0; k < n; ++k) {
      TraceTask tt;
      tt.id = task++;
      tt.job_id = job;
      tt.cpu = std::max(0.0, draw(w.at("cpu_per_task"), cpu));
      tt.ram = std::max(0.0, draw(w.at("ram_per_task"), ram));
      tt.priority = to_count(draw(w.at("task_priority"), prio));
      tt.duration = std::numeric_limits<double>::infinity();
      if (!killed) {
        // Guard against zero-length draws so every task occupies its machine.
        tt.duration = std::max(draw(w.at("duration_normal_end"), dur), 1e-9);
      }
      tr.tasks.push_back(tt);
    }
    total += n;
    tr.events.push_back({t, EventKind::job_arrival, job});
    if (killed) {
      const double kill_at = t + std::max(draw(w.at("duration_killed"), kdur), 0.0);
      if (kill_at <= p.horizon) tr.events.push_back({kill_at, EventKind::job_kill, job});
    }
    ++job;
  }

  // Failures hit a uniformly chosen up machine; with machine_downtime set the
  // machine rejoins after a downtime draw, otherwise it stays down.
  RngStream fail(p.seed, "machine_failure_interarrival"), target(p.seed, "failure_target"),
      down(p.seed, "machine_downtime");
  const auto downtime = w.samplers.find("machine_downtime");
  std::vector<bool> up(tr.machines.size(), true);
  std::multimap<double, std::size_t> repairs;
  t = 0;
  while (!tr.machines.empty()) {
    t += draw(w.at("machine_failure_interarrival"), fail);
    if (!(t <= p.horizon)) break;
    while (!repairs.empty() && repairs.begin()->first <= t) {
      up[repairs.begin()->second] = true;
      repairs.erase(repairs.begin());
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < up.size(); ++i) {
      if (up[i]) candidates.push_back(i);
    }
    const double u = target.uniform();
    if (candidates.empty()) continue;
    const std::size_t m = candidates[std::min(candidates.size() - 1, static_cast<std::size_t>(u * candidates.size()))];
    up[m] = false;
    tr.events.push_back({t, EventKind::machine_failure, tr.machines[m].id});
    if (downtime != w.samplers.end()) {
      const double back = t + std::max(draw(downtime->second, down), 0.0);
      repairs.emplace(back, m);
      if (back <= p.horizon) tr.events.push_back({back, EventKind::machine_add, tr.machines[m].id});
    }
  }
  std::stable_sort(tr.events.begin(), tr.events.end(),
                   [](const TraceEvent& a, const TraceEvent& b) { return a.time < b.time; });
  return tr;
}

Trace trace_from_log(const EventLog& log, std::vector<TraceTask> tasks, std::vector<TraceMachine> machines) {
  Trace tr{std::move(tasks), std::move(machines), {}};
  for (const auto& r : log.rows) {
    if (!is_exogenous(r.kind)) continue;
    const bool job_event = r.kind == EventKind::job_arrival || r.kind == EventKind::job_kill;
    tr.events.push_back({r.time, r.kind, job_event ? r.job_id : r.machine_id});
  }
  tr.check();
  return tr;
}

void write_trace_dir(const fs::path& dir, const Trace& trace, const EventLog* log) {
  fs::create_directories(dir);
  std::string tasks = "task_id,job_id,cpu,ram,priority,duration\n";
  for (const auto& t : trace.tasks) {
    tasks += std::to_string(t.id) + "," + std::to_string(t.job_id) + "," + fmt(t.cpu) + "," + fmt(t.ram) + "," +
             std::to_string(t.priority) + "," + fmt(t.duration) + "\n";
  }
  std::string machines = "machine_id,cpu,ram_installed,ram_effective\n";
  for (const auto& m : trace.machines) {
    machines += std::to_string(m.id) + "," + fmt(m.cpu) + "," + fmt(m.ram_installed) + "," + fmt(m.ram_effective) + "\n";
  }
  EventLog exo;
  if (!log) {
    for (const auto& e : trace.events) {
      const bool job_event = e.kind == EventKind::job_arrival || e.kind == EventKind::job_kill;
      exo.rows.push_back({e.time, static_cast<std::int64_t>(exo.rows.size()), e.kind, job_event ? e.id : -1, -1,
                          job_event ? -1 : e.id});
    }
    log = &exo;
  }
  write_file(dir / "tasks.csv", tasks);
  write_file(dir / "machines.csv", machines);
  write_file(dir / "events.csv", event_log_csv(*log));
}

Trace read_trace_dir(const fs::path& dir) {
  std::vector<TraceTask> tasks;
  for_each_csv_row(read_file(dir / "tasks.csv"), "task_id,job_id,cpu,ram,priority,duration", (dir / "tasks.csv").string(),
                   [&](const std::vector<std::string_view>& f, const std::string& where) {
                     if (f.size() != 6) throw SimError(where + ": expected 6 fields");
                     tasks.push_back({parse_i64(f[0], where), parse_i64(f[1], where), parse_double(f[2], where),
                                      parse_double(f[3], where), parse_i64(f[4], where), parse_double(f[5], where)});
                   });
  std::vector<TraceMachine> machines;
  for_each_csv_row(read_file(dir / "machines.csv"), "machine_id,cpu,ram_installed,ram_effective",
                   (dir / "machines.csv").string(),
                   [&](const std::vector<std::string_view>& f, const std::string& where) {
                     if (f.size() != 4) throw SimError(where + ": expected 4 fields");
                     machines.push_back({parse_i64(f[0], where), parse_double(f[1], where), parse_double(f[2], where),
                                         parse_double(f[3], where)});
                   });
  const EventLog log = parse_event_log_csv(read_file(dir / "events.csv"), 0);
  return trace_from_log(log, std::move(tasks), std::move(machines));
}

void SimConfig::check() const {
  if (!(horizon > 0) || !std::isfinite(horizon)) throw SimError("horizon must be positive");
  if (!(dt > 0) || !std::isfinite(dt)) throw SimError("sampling interval dt must be positive");
  if (!(network_delay >= 0) || !std::isfinite(network_delay)) throw SimError("network delay must be nonnegative");
  if (mode == SimMode::synthetic && !workload) throw SimError("synthetic mode requires a workload config");
  if (mode == SimMode::trace_driven && !trace) throw SimError("trace-driven mode requires a trace");
}

const TimeSeries& MetricsBundle::at(const std::string& metric) const {
  const auto it = series.find(metric);
  if (it == series.end()) throw SimError("unknown metric '" + metric + "'");
  return it->second;
}

void write_metrics_dir(const fs::path& dir, const MetricsBundle& m) {
  fs::create_directories(dir);
  for (const auto& [name, s] : m.series) {
    std::string out = "t,value\n";
    for (std::size_t i = 0; i < s.size(); ++i) out += fmt(s.t[i]) + "," + fmt(s.v[i]) + "\n";
    write_file(dir / (name + ".csv"), out);
  }
}

// ---------------------------------------------------------------------------

Simulator::Simulator(SimConfig config) : config_(std::move(config)) {
  config_.check();
  if (config_.mode == SimMode::synthetic) {
    trace_ = generate_trace(*config_.workload,
                            {config_.initial_machines, config_.horizon, config_.seed, config_.max_tasks});
  } else {
    trace_ = *config_.trace;
  }
  trace_.check();

  std::vector<TraceMachine> ms = trace_.machines;
  std::sort(ms.begin(), ms.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (auto& m : ms) {
    machine_index_[m.id] = machines_.size();
    machines_.push_back({m, false, 0, 0, {}});
  }
  const auto job_of = [&](std::int64_t id) {
    auto [it, inserted] = job_index_.try_emplace(id, job_ids_.size());
    if (inserted) {
      job_ids_.push_back(id);
      job_tasks_.emplace_back();
    }
    return it->second;
  };
  for (const auto& t : trace_.tasks) {
    const std::size_t j = job_of(t.job_id);
    job_tasks_[j].push_back(tasks_.size());
    tasks_.push_back({t, j, TaskStatus::pending, std::nullopt, 0, t.duration, 0, 0, {}});
  }
  for (const auto& e : trace_.events) {
    const bool job_event = e.kind == EventKind::job_arrival || e.kind == EventKind::job_kill;
    push(e.time, e.kind, job_event ? job_of(e.id) : machine_index_.at(e.id));
  }

  metrics_.dt = config_.dt;
  for (const char* name : {"running", "completed", "waiting", "evicted", "submitted", "killed", "failure_requeued"}) {
    metrics_.series[name].dt = config_.dt;
  }
  log_.horizon = config_.horizon;
}

void Simulator::push(double time, EventKind kind, std::size_t index, std::uint32_t version) {
  heap_.push_back({time, next_seq_++, kind, index, version});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

void Simulator::log(EventKind kind, std::int64_t job, std::int64_t task, std::int64_t machine) {
  log_.rows.push_back({now_, static_cast<std::int64_t>(log_.rows.size()), kind, job, task, machine});
}

void Simulator::run(const std::atomic<bool>* cancel) {
  const auto samples = static_cast<std::size_t>(std::floor(config_.horizon / config_.dt + 1e-9)) + 1;
  std::size_t k = 0;
  while (!heap_.empty()) {
    const QEvent e = heap_.front();
    if (e.time > config_.horizon) break;
    while (k < samples && static_cast<double>(k) * config_.dt < e.time) sample(k++);
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    heap_.pop_back();
    now_ = e.time;
    handle(e);
    if (++counters_.events > config_.max_events) {
      throw SimError("event limit of " + std::to_string(config_.max_events) + " reached at t=" + fmt(now_) + " with " +
                     std::to_string(queue_.size()) + " waiting tasks; raise max_events or shorten the horizon");
    }
    if (cancel && (counters_.events & 1023) == 0 && cancel->load(std::memory_order_relaxed)) throw SimCancelled();
    if (on_event) on_event(*this);
  }
  while (k < samples) sample(k++);
}

void Simulator::sample(std::size_t k) {
  const double t = static_cast<double>(k) * config_.dt;
  const auto put = [&](const char* name, double v) {
    auto& s = metrics_.series[name];
    s.t.push_back(t);
    s.v.push_back(v);
  };
  put("running", static_cast<double>(counters_.running));
  put("completed", static_cast<double>(counters_.completed));
  put("waiting", static_cast<double>(queue_.size()));
  put("evicted", static_cast<double>(counters_.evicted));
  put("submitted", static_cast<double>(counters_.submitted));
  put("killed", static_cast<double>(counters_.killed));
  put("failure_requeued", static_cast<double>(counters_.failure_requeued));
}

void Simulator::enqueue(std::size_t t) {
  queue_.push_back(t);
  tasks_[t].queue_pos = std::prev(queue_.end());
  tasks_[t].status = TaskStatus::waiting;
  tasks_[t].machine.reset();
  tasks_[t].remaining = tasks_[t].spec.duration;
}

void Simulator::handle(const QEvent& e) {
  switch (e.kind) {
    case EventKind::job_arrival: {
      log(e.kind, job_ids_[e.index], -1, -1);
      auto first = queue_.end();
      for (std::size_t t : job_tasks_[e.index]) {
        if (tasks_[t].status != TaskStatus::pending) continue;
        enqueue(t);
        ++counters_.submitted;
        log(EventKind::task_submit, job_ids_[e.index], tasks_[t].spec.id, -1);
        if (first == queue_.end()) first = tasks_[t].queue_pos;
      }
      if (first != queue_.end()) schedule_from(first);
      break;
    }
    case EventKind::task_finish: {
      Task& t = tasks_[e.index];
      if (t.status != TaskStatus::running || t.version != e.version) return;  // superseded by evict/requeue/kill
      log(e.kind, t.spec.job_id, t.spec.id, machines_[*t.machine].spec.id);
      detach(e.index);
      t.status = TaskStatus::completed;
      t.remaining = 0;
      ++counters_.completed;
      schedule_from(queue_.begin());
      break;
    }
    case EventKind::job_kill: {
      log(e.kind, job_ids_[e.index], -1, -1);
      bool freed = false;
      for (std::size_t ti : job_tasks_[e.index]) {
        Task& t = tasks_[ti];
        if (t.status == TaskStatus::waiting) {
          queue_.erase(t.queue_pos);
          log(EventKind::task_kill, t.spec.job_id, t.spec.id, -1);
        } else if (t.status == TaskStatus::running) {
          log(EventKind::task_kill, t.spec.job_id, t.spec.id, machines_[*t.machine].spec.id);
          detach(ti);
          freed = true;
        } else {
          continue;
        }
        t.status = TaskStatus::killed;
        ++counters_.killed;
      }
      if (freed) schedule_from(queue_.begin());
      break;
    }
    case EventKind::machine_add: {
      Machine& m = machines_[e.index];
      log(e.kind, -1, -1, m.spec.id);
      if (!m.up) {
        m.up = true;
        schedule_from(queue_.begin());
      }
      break;
    }
    case EventKind::machine_remove:
    case EventKind::machine_failure: {
      Machine& m = machines_[e.index];
      log(e.kind, -1, -1, m.spec.id);
      if (!m.up) break;
      m.up = false;
      auto first = queue_.end();
      const std::vector<std::size_t> victims = m.running;
      for (std::size_t ti : victims) {
        log(EventKind::task_requeue, tasks_[ti].spec.job_id, tasks_[ti].spec.id, m.spec.id);
        detach(ti);
        enqueue(ti);
        ++counters_.failure_requeued;
        if (first == queue_.end()) first = tasks_[ti].queue_pos;
      }
      if (first != queue_.end()) schedule_from(first);
      break;
    }
    default:
      throw SimError("unexpected queued event kind");
  }
}

// FIFO passes over the queue, including tasks appended during a pass
// (evicted tasks). When scheduling ends every waiting task is infeasible, so
// events that free nothing (arrivals, requeues) start at their own tasks.
// An eviction can free more than it takes, hence the full rescan after one.
void Simulator::schedule_from(std::list<std::size_t>::iterator start) {
  // Requests known to fail since the last eviction. Placing a task without
  // eviction never makes another request feasible, so a request that is at
  // least as large and at most as important fails too.
  struct Failed {
    double cpu, ram;
    std::int64_t prio;
  };
  std::vector<Failed> failed;
  for (bool again = true; again; start = queue_.begin()) {
    again = false;
    failed.clear();
    for (auto it = start; it != queue_.end();) {
      const std::size_t ti = *it;
      const TraceTask& s = tasks_[ti].spec;
      const bool hopeless = std::any_of(failed.begin(), failed.end(), [&](const Failed& f) {
        return s.cpu >= f.cpu && s.ram >= f.ram && s.priority <= f.prio;
      });
      if (!hopeless) {
        if (place_first_fit(ti)) {
          it = queue_.erase(it);
          continue;
        }
        if (place_by_eviction(ti)) {
          failed.clear();
          again = true;
          it = queue_.erase(it);
          continue;
        }
        std::erase_if(failed,
                      [&](const Failed& f) { return f.cpu >= s.cpu && f.ram >= s.ram && f.prio <= s.priority; });
        if (failed.size() < 32) failed.push_back({s.cpu, s.ram, s.priority});
      }
      ++it;
    }
  }
}

bool Simulator::fits_without(const Machine& m, const std::vector<std::size_t>& removed, const Task& t) const {
  if (removed.empty()) return m.cpu_used + t.spec.cpu <= m.spec.cpu && m.ram_used + t.spec.ram <= m.spec.ram_effective;
  // Same summation order as detach() so that the decision matches the state
  // after the removal bit for bit.
  double cpu = 0, ram = 0;
  for (std::size_t r : m.running) {
    if (std::find(removed.begin(), removed.end(), r) != removed.end()) continue;
    cpu += tasks_[r].spec.cpu;
    ram += tasks_[r].spec.ram;
  }
  return cpu + t.spec.cpu <= m.spec.cpu && ram + t.spec.ram <= m.spec.ram_effective;
}

bool Simulator::place_first_fit(std::size_t ti) {
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    if (machines_[mi].up && fits_without(machines_[mi], {}, tasks_[ti])) {
      place(ti, mi);
      return true;
    }
  }
  return false;
}

bool Simulator::place_by_eviction(std::size_t ti) {
  const Task& t = tasks_[ti];
  for (std::size_t mi = 0; mi < machines_.size(); ++mi) {
    Machine& m = machines_[mi];
    if (!m.up || t.spec.cpu > m.spec.cpu || t.spec.ram > m.spec.ram_effective) continue;
    std::vector<std::size_t> cand;
    for (std::size_t r : m.running) {
      if (tasks_[r].spec.priority < t.spec.priority) cand.push_back(r);
    }
    if (cand.empty() || !fits_without(m, cand, t)) continue;
    // Lowest priority first, then most recently started.
    std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
      const Task &x = tasks_[a], &y = tasks_[b];
      if (x.spec.priority != y.spec.priority) return x.spec.priority < y.spec.priority;
      if (x.start != y.start) return x.start > y.start;
      return x.spec.id > y.spec.id;
    });
    std::vector<std::size_t> chosen;
    for (std::size_t c : cand) {
      chosen.push_back(c);
      if (fits_without(m, chosen, t)) break;
    }
    // Drop members that turn out unnecessary, most important first.
    for (std::size_t i = chosen.size(); i-- > 0;) {
      std::vector<std::size_t> trial = chosen;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
      if (fits_without(m, trial, t)) chosen = std::move(trial);
    }
    for (std::size_t c : chosen) {
      log(EventKind::task_evict, tasks_[c].spec.job_id, tasks_[c].spec.id, m.spec.id);
      detach(c);
      enqueue(c);
      ++tasks_[c].evictions;
      ++counters_.evicted;
    }
    place(ti, mi);
    if (on_evict) on_evict(*this, ti, chosen);
    return true;
  }
  return false;
}

void Simulator::place(std::size_t ti, std::size_t mi) {
  Task& t = tasks_[ti];
  Machine& m = machines_[mi];
  m.running.push_back(ti);
  m.cpu_used += t.spec.cpu;
  m.ram_used += t.spec.ram;
  t.status = TaskStatus::running;
  t.machine = mi;
  t.start = now_;
  ++t.version;
  ++counters_.running;
  log(EventKind::task_schedule, t.spec.job_id, t.spec.id, m.spec.id);
  if (std::isfinite(t.remaining)) push(now_ + config_.network_delay + t.remaining, EventKind::task_finish, ti, t.version);
}

void Simulator::detach(std::size_t ti) {
  Task& t = tasks_[ti];
  Machine& m = machines_[*t.machine];
  m.running.erase(std::find(m.running.begin(), m.running.end(), ti));
  m.cpu_used = m.ram_used = 0;
  for (std::size_t r : m.running) {
    m.cpu_used += tasks_[r].spec.cpu;
    m.ram_used += tasks_[r].spec.ram;
  }
  t.machine.reset();
  ++t.version;
  --counters_.running;
}

SimResult simulate(const SimConfig& config, const std::atomic<bool>* cancel) {
  Simulator sim(config);
  sim.run(cancel);
  return {sim.trace(), sim.log(), sim.metrics(), sim.counters()};
}

}  // namespace tracebench
