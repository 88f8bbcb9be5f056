// Analysis commands loaded from external command files, and the router that
// executes their rendered scripts.
//
// A rendered script is one or more operation calls separated by newlines or
// ';'. The first call reads the selected table; every later call consumes the
// previous call's table.
//
//   filter(t[[1]] < 11000)
//   log_histogram(1, 0.06, xy)
//   mapreduce(group_by_column(2), count)
//
// Arguments split at top-level commas; an argument wholly wrapped in quotes
// has them removed. Operations:
//   get_column(col)  apply_1col(col, fn)  filter(cond)
//   aggregate(group_col, cond, fn [, value_col])  difference_between_rows(col)
//   fit_exponential(col)  fit_lognormal(col)  spline_cdf(col, n [, from, to])
//   ecdf(col)  polynomial_regression(col, degree)  log_histogram(col, step, axes)
//   mapreduce(map(args...), reduce(args...))
#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracebench/command_format.hpp"
#include "tracebench/distributions.hpp"
#include "tracebench/mapreduce.hpp"
#include "tracebench/plotspec.hpp"
#include "tracebench/stats.hpp"
#include "tracebench/storage.hpp"

namespace tracebench {

struct CommandSpec {
  std::string name;
  std::size_t param_count = 0;
  std::vector<std::string> param_descriptions;
  std::string template_text;

  friend bool operator==(const CommandSpec&, const CommandSpec&) = default;
};

struct CommandInvocation {
  CommandSpec spec;
  std::vector<std::string> args;
  std::string rendered;
};

class CommandArityError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CommandExecutionError : public std::runtime_error {
 public:
  CommandExecutionError(const std::string& message, std::string script)
      : std::runtime_error(message), script_(std::move(script)) {}
  const std::string& script() const { return script_; }

 private:
  std::string script_;
};

std::vector<CommandSpec> parse_command_file(std::string_view text, const std::string& origin = "<input>");
std::vector<CommandSpec> load_command_file(const fs::path& path);
std::string serialize_commands(const std::vector<CommandSpec>& specs);

CommandInvocation instantiate(const CommandSpec& spec, std::vector<std::string> args);

nlohmann::json to_json(const CommandSpec& spec);

// Immutable once loaded; reload() swaps in a freshly parsed set, so readers
// holding a snapshot keep a consistent view.
class CommandRegistry {
 public:
  using Snapshot = std::shared_ptr<const std::vector<CommandSpec>>;

  CommandRegistry() : specs_(std::make_shared<const std::vector<CommandSpec>>()) {}
  explicit CommandRegistry(fs::path file);

  // Parses the file again. On error the current set stays in place.
  void reload();
  Snapshot snapshot() const;
  std::optional<CommandSpec> find(std::string_view name) const;
  const fs::path& file() const { return file_; }

 private:
  fs::path file_;
  mutable std::mutex mutex_;
  Snapshot specs_;
};

struct CommandResult {
  std::string command;
  std::string script;  // what actually ran
  std::optional<Table> table;
  std::optional<FittedDistribution> fit;
  std::optional<PolyFit> polyfit;
  std::vector<PlotSpec> plots;
  std::optional<TableMeta> stored;  // set when the table was written back
};

struct RunOptions {
  const UdfRegistry* udfs = nullptr;  // built-ins only when null
  unsigned workers = 1;
  // If set and the result is a table, it is stored under this name.
  std::optional<std::string> output;
};

// Executes script_override verbatim when given, otherwise inv.rendered.
CommandResult run_invocation(Storage& storage, const std::string& table, const CommandInvocation& inv,
                             const std::optional<std::string>& script_override = std::nullopt,
                             const RunOptions& options = {});
CommandResult run_script(Storage& storage, const std::string& table, const std::string& script,
                         const RunOptions& options = {});

// First rows of the result table are included up to preview_rows.
nlohmann::json to_json(const CommandResult& r, std::size_t preview_rows = 50);

}  // namespace tracebench
