// Application core shared by the CLI and the HTTP service. Every operation
// takes and returns JSON so both front ends expose the same capabilities.
#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tracebench/commands.hpp"
#include "tracebench/mapreduce.hpp"
#include "tracebench/plotspec.hpp"
#include "tracebench/sim.hpp"
#include "tracebench/storage.hpp"

namespace tracebench {

inline constexpr const char* kApiSchema = "tracebench.api/1";

// Error with an HTTP-style status: 400 validation, 404 unknown resource,
// 409 name collision, 500 anything else.
struct ErrorInfo {
  int status = 500;
  std::string code;
  std::string message;
  nlohmann::json detail;
};

ErrorInfo classify_error(const std::exception& e);
nlohmann::json error_json(const ErrorInfo& e);

class BadRequest : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// TRACEBENCH_HOME, else $HOME/.tracebench, else ./.tracebench.
fs::path default_home();
// Bare names live under home; anything with a path separator is a path.
fs::path resolve_storage_path(const fs::path& home, const std::string& ref);

struct ServiceOptions {
  fs::path home = default_home();
  fs::path commands_file;
  std::vector<fs::path> udf_files;
  unsigned query_workers = 0;  // 0 = hardware concurrency
  unsigned sim_workers = 0;
  fs::path sim_output_root;    // empty: results stay in memory only
};

// Build a SimConfig from a request body:
//   {"workload": {...} | "workload_file": path | "trace_dir": path,
//    "horizon", "seed", "machines", "dt", "max_tasks", "network_delay"}
SimConfig sim_config_from_json(const nlohmann::json& body);

class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceOptions& options() const { return options_; }

  // ---- storages
  nlohmann::json list_storages();
  nlohmann::json create_storage(const std::string& ref, const std::string& backend);
  std::shared_ptr<Storage> storage(const std::string& ref);
  nlohmann::json describe_storage(const std::string& ref);
  nlohmann::json list_tables(const std::string& ref);
  nlohmann::json table_rows(const std::string& ref, const std::string& table, std::size_t offset, std::size_t limit);
  nlohmann::json import_csv(const std::string& ref, const std::string& file, const std::string& table, bool header);
  nlohmann::json transfer(const std::string& src, const std::string& table, const std::string& dst);
  nlohmann::json export_csv(const std::string& ref, const std::string& table, const std::string& file);
  nlohmann::json query(const std::string& ref, const std::string& sql, const std::string& dest,
                       std::optional<unsigned> workers = std::nullopt, bool explain_only = false);

  // ---- commands and analysis
  nlohmann::json list_commands();
  nlohmann::json reload_commands();
  nlohmann::json run_command(const std::string& ref, const std::string& table, const std::string& name,
                             const std::vector<std::string>& args, const std::optional<std::string>& script_override,
                             const std::optional<std::string>& output);
  nlohmann::json run_script(const std::string& ref, const std::string& table, const std::string& script,
                            const std::optional<std::string>& output);
  // family: exponential | lognormal | spline | ecdf
  nlohmann::json fit(const std::string& ref, const std::string& table, std::size_t column, const std::string& family,
                     std::size_t intervals = 20);

  // ---- plots
  std::string add_plot(PlotSpec spec);
  std::optional<PlotSpec> plot(const std::string& id) const;

  // ---- simulations
  std::string submit_simulation(SimConfig config);
  nlohmann::json simulation_status(const std::string& id) const;
  nlohmann::json simulation_metrics(const std::string& id, const std::string& metric, std::optional<double> alpha);
  nlohmann::json cancel_simulation(const std::string& id);
  // Blocks until the job leaves the queued/running states.
  nlohmann::json wait_simulation(const std::string& id);
  // Finished result; throws unless the job is done.
  std::shared_ptr<const SimResult> simulation_result(const std::string& id) const;

  // Compares two series documents: {"t": [...], "v": [...], "dt"} each.
  nlohmann::json compare(const TimeSeries& real, const TimeSeries& sim, const std::string& metric, double alpha);

  CommandRegistry& commands() { return *commands_; }
  const UdfRegistry& udfs() const { return udfs_; }

 private:
  struct SimJob {
    std::string id;
    SimConfig config;
    std::string status = "queued";  // queued, running, done, failed, cancelled
    std::string error;
    std::atomic<bool> cancel{false};
    std::shared_ptr<const SimResult> result;
    fs::path output_dir;
  };

  std::shared_ptr<SimJob> job(const std::string& id) const;
  nlohmann::json job_json(const SimJob& j) const;
  void worker_loop();
  nlohmann::json result_json(const CommandResult& r);

  ServiceOptions options_;
  std::unique_ptr<CommandRegistry> commands_;
  UdfRegistry udfs_;

  mutable std::mutex storages_mutex_;
  std::map<std::string, std::shared_ptr<Storage>> storages_;  // by canonical path

  mutable std::mutex plots_mutex_;
  std::map<std::string, PlotSpec> plots_;
  std::uint64_t next_plot_ = 1;

  mutable std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::map<std::string, std::shared_ptr<SimJob>> jobs_;
  std::deque<std::shared_ptr<SimJob>> pending_;
  std::uint64_t next_job_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace tracebench
