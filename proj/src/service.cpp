#include "tracebench/service.hpp"

#include <cstdlib>

#include "tracebench/csv.hpp"
#include "tracebench/expr.hpp"
#include "tracebench/json_io.hpp"
#include "tracebench/plan.hpp"
#include "tracebench/query.hpp"
#include "tracebench/stats.hpp"
#include "tracebench/validation.hpp"
#include "tracebench/workload.hpp"

namespace tracebench {

using query::ErrorKind;
using query::QueryError;

namespace {

std::string_view kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::syntax: return "syntax";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::validation: return "validation";
  }
  return "?";
}

nlohmann::json with_schema(nlohmann::json j) {
  j["schema"] = kApiSchema;
  return j;
}

}  // namespace

ErrorInfo classify_error(const std::exception& e) {
  ErrorInfo info{500, "internal", e.what(), nlohmann::json::object()};
  if (dynamic_cast<const NotFoundError*>(&e)) {
    info.status = 404, info.code = "not_found";
  } else if (dynamic_cast<const NameCollisionError*>(&e)) {
    info.status = 409, info.code = "name_collision";
  } else if (const auto* q = dynamic_cast<const QueryError*>(&e)) {
    info.status = 400, info.code = "query_" + std::string(kind_name(q->kind()));
    info.detail = {{"line", q->pos().line}, {"column", q->pos().column}};
  } else if (const auto* c = dynamic_cast<const CommandExecutionError*>(&e)) {
    info.status = 400, info.code = "command_failed";
    info.detail = {{"script", c->script()}};
  } else if (const auto* x = dynamic_cast<const expr::ExprError*>(&e)) {
    info.status = 400, info.code = "expression";
    info.detail = {{"line", x->line()}, {"column", x->column()}};
  } else if (dynamic_cast<const SimCancelled*>(&e)) {
    info.status = 409, info.code = "cancelled";
  } else if (dynamic_cast<const CommandFormatError*>(&e) || dynamic_cast<const CommandArityError*>(&e)) {
    info.status = 400, info.code = "command";
  } else if (dynamic_cast<const AnalysisError*>(&e) || dynamic_cast<const FitError*>(&e)) {
    info.status = 400, info.code = "analysis";
  } else if (dynamic_cast<const WorkloadError*>(&e) || dynamic_cast<const SimError*>(&e)) {
    info.status = 400, info.code = "simulation";
  } else if (dynamic_cast<const ValidationError*>(&e)) {
    info.status = 400, info.code = "validation";
  } else if (const auto* csv = dynamic_cast<const CsvError*>(&e)) {
    info.status = 400, info.code = "csv";
    info.detail = {{"line", csv->line()}};
  } else if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const MapReduceError*>(&e)) {
    info.status = 400, info.code = "data";
  } else if (dynamic_cast<const nlohmann::json::exception*>(&e)) {
    info.status = 400, info.code = "bad_json";
  } else if (dynamic_cast<const StorageError*>(&e)) {
    info.status = 400, info.code = "storage";
  } else if (dynamic_cast<const std::invalid_argument*>(&e) || dynamic_cast<const std::out_of_range*>(&e) ||
             dynamic_cast<const std::domain_error*>(&e)) {
    info.status = 400, info.code = "bad_request";
  }
  return info;
}

nlohmann::json error_json(const ErrorInfo& e) {
  nlohmann::json err{{"status", e.status}, {"code", e.code}, {"message", e.message}};
  if (!e.detail.empty()) err["detail"] = e.detail;
  return {{"schema", kApiSchema}, {"error", err}};
}

fs::path default_home() {
  if (const char* h = std::getenv("TRACEBENCH_HOME"); h && *h) return h;
  if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".tracebench";
  return ".tracebench";
}

fs::path resolve_storage_path(const fs::path& home, const std::string& ref) {
  if (ref.empty()) throw BadRequest("storage reference is empty");
  if (ref.find('/') != std::string::npos || ref.find('\\') != std::string::npos || ref == "." || ref == "..") {
    return fs::path(ref);
  }
  if (!is_valid_table_name(ref)) throw BadRequest("invalid storage name '" + ref + "'");
  return home / ref;
}

SimConfig sim_config_from_json(const nlohmann::json& body) {
  if (!body.is_object()) throw BadRequest("simulation request must be a JSON object");
  SimConfig c;
  const int sources = body.contains("workload") + body.contains("workload_file") + body.contains("trace_dir");
  if (sources != 1) throw BadRequest("give exactly one of workload, workload_file or trace_dir");
  if (body.contains("workload")) {
    c.workload = workload_from_json(body.at("workload"));
  } else if (body.contains("workload_file")) {
    c.workload = load_workload(body.at("workload_file").get<std::string>());
  } else {
    c.mode = SimMode::trace_driven;
    c.trace = read_trace_dir(body.at("trace_dir").get<std::string>());
  }
  c.horizon = body.value("horizon", c.horizon);
  c.seed = c.workload ? c.workload->seed : c.seed;
  if (body.contains("seed")) c.seed = body.at("seed").get<std::uint64_t>();
  c.initial_machines = body.value("machines", c.initial_machines);
  c.dt = body.value("dt", c.dt);
  c.network_delay = body.value("network_delay", c.network_delay);
  if (body.contains("max_tasks")) c.max_tasks = body.at("max_tasks").get<std::size_t>();
  c.check();
  return c;
}

// ---------------------------------------------------------------------------

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  commands_ = options_.commands_file.empty() ? std::make_unique<CommandRegistry>()
                                             : std::make_unique<CommandRegistry>(options_.commands_file);
  for (const auto& f : options_.udf_files) udfs_.load_file(f);
  unsigned n = options_.sim_workers ? options_.sim_workers : std::max(1u, std::thread::hardware_concurrency());
  for (unsigned i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard lock(jobs_mutex_);
    stopping_ = true;
    for (auto& [id, j] : jobs_) j->cancel = true;
  }
  jobs_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

nlohmann::json Service::list_storages() {
  nlohmann::json list = nlohmann::json::array();
  std::error_code ec;
  if (fs::is_directory(options_.home, ec)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(options_.home, ec)) {
      if (entry.is_directory() && storage_exists(entry.path())) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
      try {
        list.push_back(describe_storage(d.filename().string()));
      } catch (const std::exception& e) {
        list.push_back({{"id", d.filename().string()}, {"path", d.string()}, {"error", e.what()}});
      }
    }
  }
  return with_schema({{"home", options_.home.string()}, {"storages", list}});
}

nlohmann::json Service::create_storage(const std::string& ref, const std::string& backend) {
  const fs::path root = resolve_storage_path(options_.home, ref);
  if (storage_exists(root)) throw NameCollisionError("storage '" + ref + "' already exists at " + root.string());
  const BackendKind kind = backend_from_string(backend);
  std::shared_ptr<Storage> s = tracebench::create_storage(kind, root);
  {
    std::lock_guard lock(storages_mutex_);
    storages_[fs::weakly_canonical(root).string()] = s;
  }
  return describe_storage(ref);
}

std::shared_ptr<Storage> Service::storage(const std::string& ref) {
  const fs::path root = resolve_storage_path(options_.home, ref);
  const std::string key = fs::weakly_canonical(root).string();
  std::lock_guard lock(storages_mutex_);
  if (auto it = storages_.find(key); it != storages_.end()) return it->second;
  if (!storage_exists(root)) throw NotFoundError("no storage '" + ref + "' (looked in " + root.string() + ")");
  std::shared_ptr<Storage> s = open_storage(root);
  storages_[key] = s;
  return s;
}

nlohmann::json Service::describe_storage(const std::string& ref) {
  auto s = storage(ref);
  return with_schema({{"id", s->id()},
                      {"path", s->root().string()},
                      {"backend", to_string(s->kind())},
                      {"tables", s->list_tables().size()}});
}

nlohmann::json Service::list_tables(const std::string& ref) {
  auto s = storage(ref);
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : s->list_tables()) tables.push_back(to_json(t));
  return with_schema({{"storage", s->id()}, {"backend", to_string(s->kind())}, {"tables", tables}});
}

nlohmann::json Service::table_rows(const std::string& ref, const std::string& table, std::size_t offset,
                                   std::size_t limit) {
  auto s = storage(ref);
  const TableMeta meta = s->table(table);
  nlohmann::json rows = nlohmann::json::array();
  std::size_t seen = 0;
  s->scan(table, 4096, [&](std::span<const Row> batch) {
    for (const auto& r : batch) {
      if (seen >= offset && rows.size() < limit) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& v : r) row.push_back(value_to_json(v));
        rows.push_back(std::move(row));
      }
      ++seen;
    }
  });
  return with_schema({{"table", to_json(meta)}, {"offset", offset}, {"limit", limit}, {"rows", rows}});
}

nlohmann::json Service::import_csv(const std::string& ref, const std::string& file, const std::string& table,
                                   bool header) {
  auto s = storage(ref);
  return with_schema({{"table", to_json(tracebench::import_csv(*s, file, table, header))}});
}

nlohmann::json Service::transfer(const std::string& src, const std::string& table, const std::string& dst) {
  auto a = storage(src);
  auto b = storage(dst);
  if (a == b) throw BadRequest("source and destination storage are the same");
  return with_schema({{"table", to_json(transfer_table(*a, table, *b))}, {"storage", b->id()}});
}

nlohmann::json Service::export_csv(const std::string& ref, const std::string& table, const std::string& file) {
  auto s = storage(ref);
  tracebench::export_csv(*s, table, file);
  return with_schema({{"table", table}, {"file", file}});
}

nlohmann::json Service::query(const std::string& ref, const std::string& sql, const std::string& dest,
                              std::optional<unsigned> workers, bool explain_only) {
  auto s = storage(ref);
  const query::QueryAst ast = query::parse_query(sql);
  const query::CheckedQuery q = query::validate(ast, s->table(ast.source));
  const query::ExecutionPlan plan = query::plan_query(q, s->kind());
  nlohmann::json out{{"plan", plan.describe()}, {"backend", to_string(s->kind())}};
  if (!explain_only) {
    if (dest.empty()) throw BadRequest("a destination table name is required");
    query::ExecOptions opts;
    opts.workers = workers.value_or(options_.query_workers);
    out["table"] = to_json(query::execute_plan(*s, q, plan, dest, opts));
  }
  return with_schema(out);
}

nlohmann::json Service::list_commands() {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : *commands_->snapshot()) list.push_back(to_json(c));
  nlohmann::json udfs = nlohmann::json::array();
  for (const auto& u : udfs_.list()) {
    udfs.push_back({{"name", u.name},
                    {"stage", to_string(u.stage)},
                    {"param_count", u.param_descriptions.size()},
                    {"params", u.param_descriptions},
                    {"builtin", u.builtin}});
  }
  return with_schema({{"file", commands_->file().string()}, {"commands", list}, {"udfs", udfs}});
}

nlohmann::json Service::reload_commands() {
  if (commands_->file().empty()) throw BadRequest("no command file configured");
  commands_->reload();
  return list_commands();
}

nlohmann::json Service::result_json(const CommandResult& r) {
  nlohmann::json j = to_json(r);
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& p : r.plots) ids.push_back(add_plot(p));
  j["plot_ids"] = ids;
  return with_schema(j);
}

nlohmann::json Service::run_command(const std::string& ref, const std::string& table, const std::string& name,
                                    const std::vector<std::string>& args,
                                    const std::optional<std::string>& script_override,
                                    const std::optional<std::string>& output) {
  const auto spec = commands_->find(name);
  if (!spec) throw NotFoundError("no command '" + name + "'");
  const CommandInvocation inv = instantiate(*spec, args);
  auto s = storage(ref);
  s->table(table);  // 404 before the command runs
  RunOptions opts;
  opts.udfs = &udfs_;
  opts.workers = options_.query_workers ? options_.query_workers : query::default_workers();
  opts.output = output;
  auto j = result_json(run_invocation(*s, table, inv, script_override, opts));
  j["rendered"] = inv.rendered;
  return j;
}

nlohmann::json Service::run_script(const std::string& ref, const std::string& table, const std::string& script,
                                   const std::optional<std::string>& output) {
  auto s = storage(ref);
  s->table(table);
  RunOptions opts;
  opts.udfs = &udfs_;
  opts.workers = options_.query_workers ? options_.query_workers : query::default_workers();
  opts.output = output;
  return result_json(tracebench::run_script(*s, table, script, opts));
}

nlohmann::json Service::fit(const std::string& ref, const std::string& table, std::size_t column,
                            const std::string& family, std::size_t intervals) {
  std::string script;
  const std::string col = std::to_string(column);
  if (family == "exponential") {
    script = "fit_exponential(" + col + ")";
  } else if (family == "lognormal") {
    script = "fit_lognormal(" + col + ")";
  } else if (family == "spline") {
    script = "spline_cdf(" + col + ", " + std::to_string(intervals) + ")";
  } else if (family == "ecdf") {
    script = "ecdf(" + col + ")";
  } else {
    throw BadRequest("unknown family '" + family + "' (expected exponential, lognormal, spline or ecdf)");
  }
  return run_script(ref, table, script, std::nullopt);
}

std::string Service::add_plot(PlotSpec spec) {
  spec.check();
  std::lock_guard lock(plots_mutex_);
  std::string id = "p" + std::to_string(next_plot_++);
  plots_.emplace(id, std::move(spec));
  return id;
}

std::optional<PlotSpec> Service::plot(const std::string& id) const {
  std::lock_guard lock(plots_mutex_);
  auto it = plots_.find(id);
  if (it == plots_.end()) return std::nullopt;
  return it->second;
}

// ---- simulations ------------------------------------------------------------

std::string Service::submit_simulation(SimConfig config) {
  config.check();
  auto j = std::make_shared<SimJob>();
  j->config = std::move(config);
  {
    std::lock_guard lock(jobs_mutex_);
    if (stopping_) throw std::runtime_error("service is shutting down");
    j->id = "s" + std::to_string(next_job_++);
    if (!options_.sim_output_root.empty()) j->output_dir = options_.sim_output_root / j->id;
    jobs_[j->id] = j;
    pending_.push_back(j);
  }
  jobs_cv_.notify_one();
  return j->id;
}

void Service::worker_loop() {
  while (true) {
    std::shared_ptr<SimJob> j;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
      if (stopping_) return;
      j = pending_.front();
      pending_.pop_front();
      if (j->cancel) {
        j->status = "cancelled";
        jobs_cv_.notify_all();
        continue;
      }
      j->status = "running";
    }
    std::string status = "done", error;
    std::shared_ptr<const SimResult> result;
    try {
      auto r = std::make_shared<SimResult>(simulate(j->config, &j->cancel));
      if (!j->output_dir.empty()) {
        // Write next to the final location and rename, so a cancelled or
        // failed run never leaves partial files behind.
        const fs::path tmp = j->output_dir.string() + ".partial";
        fs::remove_all(tmp);
        write_metrics_dir(tmp / "metrics", r->metrics);
        write_trace_dir(tmp / "trace", r->trace, &r->log);
        if (j->cancel) throw SimCancelled();
        fs::remove_all(j->output_dir);
        fs::rename(tmp, j->output_dir);
      }
      result = std::move(r);
    } catch (const SimCancelled&) {
      status = "cancelled";
      std::error_code ec;
      fs::remove_all(j->output_dir.string() + ".partial", ec);
    } catch (const std::exception& e) {
      status = "failed";
      error = e.what();
    }
    {
      std::lock_guard lock(jobs_mutex_);
      j->result = std::move(result);
      j->status = status;
      j->error = error;
    }
    jobs_cv_.notify_all();
  }
}

std::shared_ptr<Service::SimJob> Service::job(const std::string& id) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw NotFoundError("no simulation '" + id + "'");
  return it->second;
}

nlohmann::json Service::job_json(const SimJob& j) const {
  nlohmann::json out{{"id", j.id},
                     {"status", j.status},
                     {"mode", j.config.mode == SimMode::synthetic ? "synthetic" : "trace_driven"},
                     {"horizon", j.config.horizon},
                     {"seed", j.config.seed},
                     {"dt", j.config.dt}};
  if (!j.error.empty()) out["error"] = j.error;
  if (j.result) {
    const auto& c = j.result->counters;
    out["counters"] = {{"submitted", c.submitted}, {"running", c.running},   {"completed", c.completed},
                       {"killed", c.killed},       {"evicted", c.evicted},   {"failure_requeued", c.failure_requeued},
                       {"events", c.events},       {"log_rows", j.result->log.rows.size()}};
    if (!j.output_dir.empty()) out["output_dir"] = j.output_dir.string();
  }
  return with_schema(out);
}

nlohmann::json Service::simulation_status(const std::string& id) const {
  auto j = job(id);
  std::lock_guard lock(jobs_mutex_);
  return job_json(*j);
}

nlohmann::json Service::wait_simulation(const std::string& id) {
  auto j = job(id);
  std::unique_lock lock(jobs_mutex_);
  jobs_cv_.wait(lock, [&] { return j->status != "queued" && j->status != "running"; });
  return job_json(*j);
}

nlohmann::json Service::cancel_simulation(const std::string& id) {
  auto j = job(id);
  std::lock_guard lock(jobs_mutex_);
  if (j->status == "queued" || j->status == "running") j->cancel = true;
  if (j->status == "queued") {
    std::erase(pending_, j);
    j->status = "cancelled";
    jobs_cv_.notify_all();
  }
  return job_json(*j);
}

std::shared_ptr<const SimResult> Service::simulation_result(const std::string& id) const {
  auto j = job(id);
  std::lock_guard lock(jobs_mutex_);
  if (j->status != "done") throw BadRequest("simulation '" + id + "' is " + j->status + ", not done");
  return j->result;
}

nlohmann::json Service::simulation_metrics(const std::string& id, const std::string& metric,
                                           std::optional<double> alpha) {
  auto r = simulation_result(id);
  const auto it = r->metrics.series.find(metric);
  if (it == r->metrics.series.end()) throw NotFoundError("no metric '" + metric + "'");
  nlohmann::json out{{"simulation", id}, {"metric", metric}, {"dt", it->second.dt}, {"t", it->second.t},
                     {"v", it->second.v}};
  PlotSpec p;
  p.kind = PlotKind::timeseries;
  p.title = "Number of tasks " + metric;
  p.x_label = "time (s)";
  p.y_label = metric;
  p.series.push_back({"simulation", "data", "line", it->second.t, it->second.v});
  if (alpha) {
    const TimeSeries s = exp_smooth(it->second, *alpha);
    out["alpha"] = *alpha;
    out["smoothed"] = s.v;
    p.series.push_back({"smoothed", "fit", "line", s.t, s.v});
  }
  out["plot_id"] = add_plot(std::move(p));
  return with_schema(out);
}

nlohmann::json Service::compare(const TimeSeries& real, const TimeSeries& sim, const std::string& metric,
                                double alpha) {
  const TimeSeries a = exp_smooth(real, alpha), b = exp_smooth(sim, alpha);
  const ComparisonReport raw = compare_series(real, sim);
  const ComparisonReport smooth = compare_series(a, b);
  PlotSpec p = timeseries_plot(metric, a, b);
  p.meta["alpha"] = alpha;
  nlohmann::json out{{"metric", metric}, {"alpha", alpha}, {"raw", to_json(raw)}, {"smoothed", to_json(smooth)},
                     {"plot", to_json(p)}};
  out["plot_id"] = add_plot(std::move(p));
  return with_schema(out);
}

}  // namespace tracebench
