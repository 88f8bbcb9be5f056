// Discrete-event simulator of a batch cluster.
//
// Every run replays a Trace: the exogenous events (job arrivals and kills,
// machine additions, removals and failures) plus the task and machine
// attributes. Synthetic mode first generates a trace from a WorkloadConfig;
// trace-driven mode loads one. Scheduling, eviction and completion are
// endogenous and fully determined by the trace, so replaying a run's own
// event log reproduces it exactly.
#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <list>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tracebench/storage.hpp"
#include "tracebench/timeseries.hpp"
#include "tracebench/workload.hpp"

namespace tracebench {

class SimError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimCancelled : public SimError {
 public:
  SimCancelled() : SimError("simulation cancelled") {}
};

enum class EventKind : std::uint8_t {
  job_arrival,
  task_finish,
  job_kill,
  machine_add,
  machine_remove,
  machine_failure,
  // Task state transitions; logged so that metrics can be rebuilt from the log.
  task_submit,
  task_schedule,
  task_evict,
  task_requeue,  // machine failure or removal sent the task back to the queue
  task_kill,
};

std::string_view to_string(EventKind k);
EventKind event_kind_from_string(std::string_view s);
bool is_exogenous(EventKind k);

struct LogRow {
  double time = 0;
  std::int64_t seq = 0;
  EventKind kind = EventKind::job_arrival;
  std::int64_t job_id = -1;  // -1 = not applicable
  std::int64_t task_id = -1;
  std::int64_t machine_id = -1;

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

struct EventLog {
  double horizon = 0;
  std::vector<LogRow> rows;

  friend bool operator==(const EventLog&, const EventLog&) = default;
};

// CSV with header time,seq,kind,job_id,task_id,machine_id; -1 ids are empty.
std::string event_log_csv(const EventLog& log);
EventLog parse_event_log_csv(std::string_view text, double horizon);

struct TraceTask {
  std::int64_t id = 0;
  std::int64_t job_id = 0;
  double cpu = 0;
  double ram = 0;
  std::int64_t priority = 1;  // larger is more important
  double duration = 0;        // +inf: runs until its job is killed
};

struct TraceMachine {
  std::int64_t id = 0;
  double cpu = 1;
  double ram_installed = 1;
  double ram_effective = 0.5;
};

struct TraceEvent {
  double time = 0;
  EventKind kind = EventKind::job_arrival;
  std::int64_t id = 0;  // job id for job events, machine id otherwise
};

struct Trace {
  std::vector<TraceTask> tasks;
  std::vector<TraceMachine> machines;
  std::vector<TraceEvent> events;  // exogenous only, in processing order

  void check() const;
};

struct SyntheticParams {
  std::size_t initial_machines = 10;
  double horizon = 86400;
  std::uint64_t seed = 1;
  std::size_t max_tasks = std::numeric_limits<std::size_t>::max();
};

Trace generate_trace(const WorkloadConfig& workload, const SyntheticParams& params);
// Exogenous rows of the log, with the attributes of its tasks and machines.
Trace trace_from_log(const EventLog& log, std::vector<TraceTask> tasks, std::vector<TraceMachine> machines);

// Directory layout: events.csv (event log or exogenous events), tasks.csv,
// machines.csv.
void write_trace_dir(const fs::path& dir, const Trace& trace, const EventLog* log = nullptr);
Trace read_trace_dir(const fs::path& dir);

enum class SimMode : std::uint8_t { synthetic, trace_driven };

struct SimConfig {
  SimMode mode = SimMode::synthetic;
  std::optional<WorkloadConfig> workload;
  std::optional<Trace> trace;
  std::size_t initial_machines = 10;
  double horizon = 86400;
  std::uint64_t seed = 1;
  double dt = 300;
  // Constant dispatch latency: a placed task holds its resources for
  // network_delay + remaining seconds.
  double network_delay = 0;
  std::size_t max_tasks = std::numeric_limits<std::size_t>::max();
  std::size_t max_events = 200'000'000;

  void check() const;
};

inline const std::vector<std::string> kMetricNames = {"running", "completed", "waiting", "evicted"};

struct MetricsBundle {
  double dt = 300;
  // running, completed, waiting, evicted, plus submitted, killed and
  // failure_requeued for bookkeeping.
  std::map<std::string, TimeSeries> series;

  const TimeSeries& at(const std::string& metric) const;
};

// One <metric>.csv (t,value) per series.
void write_metrics_dir(const fs::path& dir, const MetricsBundle& m);

enum class TaskStatus : std::uint8_t { pending, waiting, running, completed, killed };

class Simulator {
 public:
  struct Task {
    TraceTask spec;
    std::size_t job = 0;
    TaskStatus status = TaskStatus::pending;
    std::optional<std::size_t> machine;
    double start = 0;
    double remaining = 0;
    std::uint32_t version = 0;
    std::int32_t evictions = 0;
    std::list<std::size_t>::iterator queue_pos;
  };
  struct Machine {
    TraceMachine spec;
    bool up = false;
    double cpu_used = 0;
    double ram_used = 0;
    std::vector<std::size_t> running;  // task indices, placement order
  };
  struct Counters {
    std::int64_t submitted = 0, running = 0, completed = 0, killed = 0, evicted = 0, failure_requeued = 0;
    std::uint64_t events = 0;
  };

  // Called after every processed event.
  std::function<void(const Simulator&)> on_event;
  // Called when a task is placed by evicting others.
  std::function<void(const Simulator&, std::size_t task, const std::vector<std::size_t>& evicted)> on_evict;

  explicit Simulator(SimConfig config);

  // Runs to the horizon; cancel is polled periodically.
  void run(const std::atomic<bool>* cancel = nullptr);

  const SimConfig& config() const { return config_; }
  const Trace& trace() const { return trace_; }
  const EventLog& log() const { return log_; }
  const MetricsBundle& metrics() const { return metrics_; }
  const Counters& counters() const { return counters_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  const std::vector<Machine>& machines() const { return machines_; }
  const std::list<std::size_t>& queue() const { return queue_; }
  std::size_t pending_events() const { return heap_.size(); }

 private:
  struct QEvent {
    double time;
    std::uint64_t seq;
    EventKind kind;
    std::size_t index;
    std::uint32_t version;
  };
  struct Later {
    bool operator()(const QEvent& a, const QEvent& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void push(double time, EventKind kind, std::size_t index, std::uint32_t version = 0);
  void handle(const QEvent& e);
  void log(EventKind kind, std::int64_t job, std::int64_t task, std::int64_t machine);
  void enqueue(std::size_t task);
  void schedule_from(std::list<std::size_t>::iterator start);
  bool place_first_fit(std::size_t task);
  bool place_by_eviction(std::size_t task);
  bool fits_without(const Machine& m, const std::vector<std::size_t>& removed, const Task& t) const;
  void place(std::size_t task, std::size_t machine);
  void detach(std::size_t task);
  void sample(std::size_t k);

  SimConfig config_;
  Trace trace_;
  std::vector<Task> tasks_;
  std::vector<Machine> machines_;
  std::vector<std::vector<std::size_t>> job_tasks_;
  std::vector<std::int64_t> job_ids_;
  std::unordered_map<std::int64_t, std::size_t> job_index_, machine_index_;
  std::list<std::size_t> queue_;
  std::vector<QEvent> heap_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0;
  EventLog log_;
  MetricsBundle metrics_;
  Counters counters_;
};

struct SimResult {
  Trace trace;
  EventLog log;
  MetricsBundle metrics;
  Simulator::Counters counters;
};

SimResult simulate(const SimConfig& config, const std::atomic<bool>* cancel = nullptr);

}  // namespace tracebench
