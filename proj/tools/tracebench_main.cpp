// tracebench command line. Results go to stdout as JSON; failures go to
// stderr as a JSON error document. Exit 0 on success, 1 on a failed
// operation, 2 on a usage error.
#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "tracebench/http.hpp"
#include "tracebench/plotspec.hpp"
#include "tracebench/service.hpp"
#include "tracebench/sim.hpp"
#include "tracebench/validation.hpp"
#include "tracebench/workload.hpp"

#ifndef TRACEBENCH_COMMANDS_DIR
#define TRACEBENCH_COMMANDS_DIR "commands"
#endif

using namespace tracebench;
using Json = nlohmann::json;

namespace {

HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

fs::path default_commands_file() {
  if (const char* c = std::getenv("TRACEBENCH_COMMANDS"); c && *c) return c;
  return fs::path(TRACEBENCH_COMMANDS_DIR) / "default.cmd";
}

// A metric CSV (t,value) or a trace directory whose events.csv is a full log.
TimeSeries load_series(const fs::path& p, const std::string& metric, double dt, std::optional<double> horizon) {
  if (!fs::is_directory(p)) return read_series_csv(p);
  std::ifstream in(p / "events.csv", std::ios::binary);
  if (!in) throw std::runtime_error("no events.csv in " + p.string());
  const std::string text((std::istreambuf_iterator<char>(in)), {});
  EventLog log = parse_event_log_csv(text, 0);
  log.horizon = horizon ? *horizon : (log.rows.empty() ? 0 : log.rows.back().time);
  return extract_metric_series(log, metric, dt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tracebench: cluster trace storage, analysis and simulation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  ServiceOptions opts;
  std::string home, commands_file;
  std::vector<std::string> udf_files;
  unsigned workers = 0;
  app.add_option("--home", home, "Storage root (default TRACEBENCH_HOME or ~/.tracebench)");
  app.add_option("--commands", commands_file, "Command file");
  app.add_option("--udfs", udf_files, "UDF files");
  app.add_option("--workers", workers, "Worker threads for queries and map-reduce (0 = all cores)");

  std::string storage, table, dest, sql, backend = "partitioned", file, family = "exponential", name, script;
  std::string other_storage, override_script, output;
  std::vector<std::string> args;
  bool header = false, explain = false;
  std::size_t column = 1, intervals = 20, offset = 0, limit = 20;

  // storage
  auto* st = app.add_subcommand("storage", "Create, open, list and copy storages");
  st->require_subcommand(1);
  auto* st_create = st->add_subcommand("create", "Create a storage");
  st_create->add_option("id", storage, "Name or path")->required();
  st_create->add_option("--backend", backend, "relational or partitioned")->check(CLI::IsMember({"relational", "partitioned"}));
  auto* st_open = st->add_subcommand("open", "Describe an existing storage");
  st_open->add_option("id", storage)->required();
  auto* st_list = st->add_subcommand("list", "List storages under the home directory");
  auto* st_tables = st->add_subcommand("tables", "List the tables of a storage");
  st_tables->add_option("id", storage)->required();
  auto* st_rows = st->add_subcommand("rows", "Print rows of a table");
  st_rows->add_option("id", storage)->required();
  st_rows->add_option("table", table)->required();
  st_rows->add_option("--offset", offset);
  st_rows->add_option("--limit", limit);
  auto* st_transfer = st->add_subcommand("transfer", "Copy a table to another storage");
  st_transfer->add_option("id", storage)->required();
  st_transfer->add_option("table", table)->required();
  st_transfer->add_option("dest", other_storage)->required();
  auto* st_export = st->add_subcommand("export", "Write a table as CSV");
  st_export->add_option("id", storage)->required();
  st_export->add_option("table", table)->required();
  st_export->add_option("file", file)->required();

  auto* imp = app.add_subcommand("import", "Import a CSV file as a table");
  imp->add_option("--storage", storage)->required();
  imp->add_option("--file", file)->required()->check(CLI::ExistingFile);
  imp->add_option("--table", table)->required();
  imp->add_flag("--header", header, "First line holds column names");

  auto* qry = app.add_subcommand("query", "Run a query and store the result");
  qry->add_option("--storage", storage)->required();
  qry->add_option("--sql", sql)->required();
  qry->add_option("--dest", dest);
  qry->add_option("--workers", workers);
  qry->add_flag("--explain", explain, "Print the plan without running it");

  auto* cmd = app.add_subcommand("command", "List or run analysis commands");
  cmd->require_subcommand(1);
  auto* cmd_list = cmd->add_subcommand("list", "List loaded commands");
  auto* cmd_run = cmd->add_subcommand("run", "Run a command on a table");
  cmd_run->add_option("--storage", storage)->required();
  cmd_run->add_option("--table", table)->required();
  cmd_run->add_option("name", name)->required();
  cmd_run->add_option("args", args, "Command parameters");
  cmd_run->add_option("--script-override", override_script, "Run this script instead of the rendered template");
  cmd_run->add_option("--output", output, "Store a table result under this name");
  auto* cmd_script = cmd->add_subcommand("script", "Run a script directly");
  cmd_script->add_option("--storage", storage)->required();
  cmd_script->add_option("--table", table)->required();
  cmd_script->add_option("script", script)->required();
  cmd_script->add_option("--output", output);

  auto* fit = app.add_subcommand("fit", "Fit a distribution to a column");
  fit->add_option("--storage", storage)->required();
  fit->add_option("--table", table)->required();
  fit->add_option("--column", column, "1-based column")->required();
  fit->add_option("--family", family)->check(CLI::IsMember({"exponential", "lognormal", "spline", "ecdf"}));
  fit->add_option("--intervals", intervals, "Spline intervals");
  std::string plots_dir;
  fit->add_option("--plots", plots_dir, "Write goodness-of-fit plot specs to this directory");

  std::string config, trace_dir, out_dir;
  std::optional<double> horizon;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> machines, max_tasks;
  double dt = 300, network_delay = 0;
  auto* sim = app.add_subcommand("simulate", "Run the cluster simulator");
  sim->add_option("--config", config, "Workload JSON")->check(CLI::ExistingFile);
  sim->add_option("--trace", trace_dir, "Trace directory to replay")->check(CLI::ExistingDirectory);
  sim->add_option("--horizon", horizon, "Simulated seconds");
  sim->add_option("--seed", seed);
  sim->add_option("--machines", machines, "Initial machines (synthetic mode)");
  sim->add_option("--dt", dt, "Metric sampling interval");
  sim->add_option("--max-tasks", max_tasks);
  sim->add_option("--network-delay", network_delay);
  sim->add_option("--out", out_dir, "Write metrics/ and trace/ here");

  std::string real, simulated, metric = "running";
  double alpha = kDefaultAlpha;
  auto* cmp = app.add_subcommand("compare", "Compare real and simulated metric series");
  cmp->add_option("--real", real, "Metric CSV or trace directory")->required();
  cmp->add_option("--sim", simulated, "Metric CSV or trace directory")->required();
  cmp->add_option("--metric", metric)->check(CLI::IsMember(kMetricNames));
  cmp->add_option("--alpha", alpha, "Smoothing factor in (0, 1]");
  cmp->add_option("--dt", dt);
  cmp->add_option("--horizon", horizon, "Horizon for trace directories (default: last event)");
  std::string plot_out;
  cmp->add_option("--plot", plot_out, "Write the overlay plot spec here");

  std::string svg_out;
  auto* render = app.add_subcommand("render", "Render a plot spec to SVG");
  render->add_option("spec", file, "PlotSpec JSON")->required()->check(CLI::ExistingFile);
  render->add_option("out", svg_out, "SVG file")->required();

  std::string bind = "127.0.0.1:8080", sim_root;
  auto* serve = app.add_subcommand("serve", "Start the HTTP service");
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--sim-output", sim_root, "Directory for simulation outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (!home.empty()) opts.home = home;
    opts.commands_file = commands_file.empty() ? default_commands_file() : fs::path(commands_file);
    if (!fs::exists(opts.commands_file) && commands_file.empty()) opts.commands_file.clear();
    opts.udf_files.assign(udf_files.begin(), udf_files.end());
    opts.query_workers = workers;
    opts.sim_workers = 1;
    opts.sim_output_root = sim_root;
    Service svc(opts);

    if (st_create->parsed()) {
      fs::create_directories(opts.home);
      print(svc.create_storage(storage, backend));
    } else if (st_open->parsed()) {
      print(svc.describe_storage(storage));
    } else if (st_list->parsed()) {
      print(svc.list_storages());
    } else if (st_tables->parsed()) {
      print(svc.list_tables(storage));
    } else if (st_rows->parsed()) {
      print(svc.table_rows(storage, table, offset, limit));
    } else if (st_transfer->parsed()) {
      print(svc.transfer(storage, table, other_storage));
    } else if (st_export->parsed()) {
      print(svc.export_csv(storage, table, file));
    } else if (imp->parsed()) {
      print(svc.import_csv(storage, file, table, header));
    } else if (qry->parsed()) {
      std::optional<unsigned> w;
      if (workers) w = workers;
      print(svc.query(storage, sql, dest, w, explain));
    } else if (cmd_list->parsed()) {
      print(svc.list_commands());
    } else if (cmd_run->parsed()) {
      std::optional<std::string> ov, out;
      if (!override_script.empty()) ov = override_script;
      if (!output.empty()) out = output;
      print(svc.run_command(storage, table, name, args, ov, out));
    } else if (cmd_script->parsed()) {
      std::optional<std::string> out;
      if (!output.empty()) out = output;
      print(svc.run_script(storage, table, script, out));
    } else if (fit->parsed()) {
      Json j = svc.fit(storage, table, column, family, intervals);
      if (!plots_dir.empty()) {
        fs::create_directories(plots_dir);
        for (const auto& id : j.at("plot_ids")) {
          const auto p = svc.plot(id.get<std::string>());
          std::ofstream(fs::path(plots_dir) / (std::string(to_string(p->kind)) + ".json")) << to_json(*p).dump(2);
        }
      }
      print(j);
    } else if (sim->parsed()) {
      if (config.empty() == trace_dir.empty()) throw BadRequest("give exactly one of --config or --trace");
      Json body;
      if (!config.empty()) body["workload_file"] = config;
      if (!trace_dir.empty()) body["trace_dir"] = trace_dir;
      if (horizon) body["horizon"] = *horizon;
      if (seed) body["seed"] = *seed;
      if (machines) body["machines"] = *machines;
      if (max_tasks) body["max_tasks"] = *max_tasks;
      body["dt"] = dt;
      body["network_delay"] = network_delay;
      const SimResult r = simulate(sim_config_from_json(body));
      if (!out_dir.empty()) {
        // Same publish-by-rename as the service, so an interrupted run
        // leaves no partial metrics.
        const fs::path tmp = out_dir + ".partial";
        fs::remove_all(tmp);
        write_metrics_dir(tmp / "metrics", r.metrics);
        write_trace_dir(tmp / "trace", r.trace, &r.log);
        fs::remove_all(out_dir);
        fs::rename(tmp, out_dir);
      }
      const auto& c = r.counters;
      print({{"schema", kApiSchema},
             {"counters",
              {{"submitted", c.submitted},
               {"running", c.running},
               {"completed", c.completed},
               {"killed", c.killed},
               {"evicted", c.evicted},
               {"failure_requeued", c.failure_requeued},
               {"events", c.events}}},
             {"log_rows", r.log.rows.size()},
             {"output_dir", out_dir}});
    } else if (cmp->parsed()) {
      const TimeSeries a = load_series(real, metric, dt, horizon);
      const TimeSeries b = load_series(simulated, metric, dt, horizon);
      Json j = svc.compare(a, b, metric, alpha);
      if (!plot_out.empty()) std::ofstream(plot_out) << j.at("plot").dump(2);
      print(j);
    } else if (render->parsed()) {
      std::ifstream in(file);
      const PlotSpec p = plotspec_from_json(Json::parse(in));
      std::ofstream(svg_out) << render_svg(p);
      print({{"schema", kApiSchema}, {"svg", svg_out}});
    } else if (serve->parsed()) {
      const auto [host, port] = parse_bind_address(bind);
      if (!sim_root.empty()) fs::create_directories(sim_root);
      ServiceOptions sopts = opts;
      sopts.sim_workers = 0;
      Service server_svc(sopts);
      HttpServer http(server_svc);
      const int bound = http.bind(host, port);
      g_server = &http;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << Json{{"listening", host + ":" + std::to_string(bound)}}.dump() << std::endl;
      http.serve();
      g_server = nullptr;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << error_json(classify_error(e)).dump() << "\n";
    return 1;
  }
}
