#include "tracebench/commands.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tracebench/json_io.hpp"

namespace tracebench {

std::vector<CommandSpec> parse_command_file(std::string_view text, const std::string& origin) {
  std::vector<CommandSpec> out;
  for (auto& b : parse_command_blocks(text, origin, false)) {
    out.push_back({std::move(b.name), b.param_descriptions.size(), std::move(b.param_descriptions), std::move(b.code)});
  }
  return out;
}

std::vector<CommandSpec> load_command_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read command file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_command_file(ss.str(), path.string());
}

std::string serialize_commands(const std::vector<CommandSpec>& specs) {
  std::vector<CommandBlock> blocks;
  for (const auto& s : specs) blocks.push_back({s.name, std::nullopt, s.param_descriptions, s.template_text, 0});
  return serialize_command_blocks(blocks);
}

CommandInvocation instantiate(const CommandSpec& spec, std::vector<std::string> args) {
  if (args.size() != spec.param_count) {
    throw CommandArityError("command '" + spec.name + "' takes " + std::to_string(spec.param_count) +
                            " parameter(s), got " + std::to_string(args.size()));
  }
  CommandInvocation inv{spec, std::move(args), {}};
  inv.rendered = substitute_params(spec.template_text, inv.args);
  return inv;
}

nlohmann::json to_json(const CommandSpec& spec) {
  return {{"name", spec.name},
          {"param_count", spec.param_count},
          {"params", spec.param_descriptions},
          {"template", spec.template_text}};
}

CommandRegistry::CommandRegistry(fs::path file) : file_(std::move(file)) { reload(); }

void CommandRegistry::reload() {
  auto fresh = std::make_shared<const std::vector<CommandSpec>>(load_command_file(file_));
  std::lock_guard lock(mutex_);
  specs_ = std::move(fresh);
}

CommandRegistry::Snapshot CommandRegistry::snapshot() const {
  std::lock_guard lock(mutex_);
  return specs_;
}

std::optional<CommandSpec> CommandRegistry::find(std::string_view name) const {
  const auto s = snapshot();
  for (const auto& spec : *s) {
    if (spec.name == name) return spec;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Router

namespace {

struct Call {
  std::string op;
  std::vector<std::string> args;
};

// Splits at top-level separators, respecting quotes and brackets.
std::vector<std::string> split_top(std::string_view s, bool at_comma) {
  std::vector<std::string> parts;
  std::string cur;
  int depth = 0;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      cur += c;
      if (c == '\\' && i + 1 < s.size()) {
        cur += s[++i];
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      --depth;
    } else if (depth == 0 && (at_comma ? c == ',' : (c == '\n' || c == ';'))) {
      parts.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    cur += c;
  }
  if (quote) throw std::invalid_argument("unterminated string");
  if (depth != 0) throw std::invalid_argument("unbalanced brackets");
  parts.push_back(std::move(cur));
  return parts;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    const char q = s.front();
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size() && (s[i + 1] == q || s[i + 1] == '\\')) ++i;
      out += s[i];
    }
    return out;
  }
  return s;
}

Call parse_call(const std::string& stmt) {
  const std::string s = trim(stmt);
  const auto open = s.find('(');
  if (open == std::string::npos || s.back() != ')') {
    throw std::invalid_argument("expected an operation call like name(args), got '" + s + "'");
  }
  Call c{trim(s.substr(0, open)), {}};
  if (!is_command_name(c.op)) throw std::invalid_argument("bad operation name '" + c.op + "'");
  const std::string inner = s.substr(open + 1, s.size() - open - 2);
  if (trim(inner).empty()) return c;
  for (auto& a : split_top(inner, true)) c.args.push_back(unquote(trim(a)));
  return c;
}

std::vector<Call> parse_script(const std::string& script) {
  std::vector<Call> calls;
  for (const auto& stmt : split_top(script, false)) {
    const std::string s = trim(stmt);
    if (s.empty() || s.front() == '#') continue;
    calls.push_back(parse_call(s));
  }
  if (calls.empty()) throw std::invalid_argument("script contains no operation");
  return calls;
}

std::int64_t parse_int(const std::string& s, const char* what) {
  std::int64_t v = 0;
  const auto t = trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) {
    throw std::invalid_argument(std::string(what) + " must be an integer, got '" + s + "'");
  }
  return v;
}

std::size_t parse_column(const std::string& s) {
  const auto v = parse_int(s, "column number");
  if (v < 1) throw std::invalid_argument("column number must be at least 1, got " + s);
  return static_cast<std::size_t>(v);
}

double parse_number(const std::string& s, const char* what) {
  double v = 0;
  const auto t = trim(s);
  const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be a number, got '" + s + "'");
  }
  return v;
}

void arity(const Call& c, std::size_t lo, std::size_t hi) {
  if (c.args.size() < lo || c.args.size() > hi) {
    const std::string want = lo == hi ? std::to_string(lo) : std::to_string(lo) + ".." + std::to_string(hi);
    throw std::invalid_argument(c.op + " takes " + want + " argument(s), got " + std::to_string(c.args.size()));
  }
}

// The table flowing through the script. Reading a stored table is deferred so
// that a leading mapreduce can use the backend's partitions directly.
class Current {
 public:
  Current(const Storage& storage, std::string name) : storage_(&storage), name_(std::move(name)) {}

  const Table& table() {
    if (!table_) table_ = storage_->read_table(name_);
    return *table_;
  }
  void set(Table t) {
    table_ = std::move(t);
    stored_ = false;
  }
  bool stored() const { return stored_; }
  const Storage& storage() const { return *storage_; }
  const std::string& name() const { return name_; }

 private:
  const Storage* storage_;
  std::string name_;
  std::optional<Table> table_;
  bool stored_ = true;
};

std::string label(const Table& t, std::size_t col) {
  return t.meta.name + "." + t.meta.columns.at(col - 1).name;
}

void run_mapreduce_call(const Call& c, Current& cur, const RunOptions& opt, CommandResult& r) {
  arity(c, 2, 2);
  const Call map = parse_call(c.args[0].find('(') == std::string::npos ? c.args[0] + "()" : c.args[0]);
  const Call reduce = parse_call(c.args[1].find('(') == std::string::npos ? c.args[1] + "()" : c.args[1]);
  const UdfRegistry fallback;
  const UdfRegistry& udfs = opt.udfs ? *opt.udfs : fallback;

  std::unique_ptr<PartitionSource> src;
  if (cur.stored()) {
    src = table_source(cur.storage(), cur.name());
  } else {
    src = memory_source(cur.table().meta.columns, cur.table().rows);
  }
  MapReduceJob job;
  job.description = map.op + " / " + reduce.op;
  job.map = udfs.make_map(map.op, map.args, src->columns());
  job.reduce = udfs.make_reduce(reduce.op, reduce.args, src->columns());
  auto res = run_mapreduce(job, *src, std::max(1u, opt.workers));
  Table t;
  t.meta.name = cur.name();
  t.meta.columns = std::move(res.columns);
  t.meta.origin = TableOrigin::query_result;
  t.rows = std::move(res.rows);
  t.meta.row_count = static_cast<std::int64_t>(t.rows.size());
  cur.set(std::move(t));
}

// Returns true if the call produced a terminal (non-table) result.
bool apply(const Call& c, Current& cur, const RunOptions& opt, CommandResult& r) {
  const std::string& op = c.op;
  if (op == "get_column") {
    arity(c, 1, 1);
    cur.set(get_column(cur.table(), parse_column(c.args[0])));
  } else if (op == "apply_1col" || op == "apply_1Col") {
    arity(c, 2, 2);
    cur.set(apply_1col(cur.table(), parse_column(c.args[0]), c.args[1]));
  } else if (op == "filter") {
    arity(c, 1, 1);
    cur.set(filter_rows(cur.table(), c.args[0]));
  } else if (op == "aggregate") {
    arity(c, 3, 4);
    std::optional<std::size_t> vcol;
    if (c.args.size() == 4) vcol = parse_column(c.args[3]);
    cur.set(aggregate_rows(cur.table(), parse_column(c.args[0]), c.args[1], trim(c.args[2]), vcol));
  } else if (op == "difference_between_rows") {
    arity(c, 1, 1);
    cur.set(difference_between_rows(cur.table(), parse_column(c.args[0])));
  } else if (op == "mapreduce") {
    run_mapreduce_call(c, cur, opt, r);
  } else if (op == "fit_exponential" || op == "fit_lognormal") {
    arity(c, 1, 1);
    const auto v = numeric_column(cur.table(), parse_column(c.args[0]));
    auto f = op == "fit_exponential" ? fit_exponential(v) : fit_lognormal(v);
    r.fit = std::move(f.dist);
    r.plots = std::move(f.plots);
    return true;
  } else if (op == "spline_cdf") {
    arity(c, 2, 4);
    const auto v = numeric_column(cur.table(), parse_column(c.args[0]));
    const auto n = parse_int(c.args[1], "number of intervals");
    if (n < 1) throw std::invalid_argument("number of intervals must be at least 1");
    auto f = fit_spline_cdf(v, static_cast<std::size_t>(n));
    if (c.args.size() >= 3) {
      // Restrict the plotted range; the fit itself always covers all data.
      const double from = parse_number(c.args[2], "plot range start");
      const double to = c.args.size() == 4 ? parse_number(c.args[3], "plot range end") : f.plots[0].series[0].x.back();
      if (!(from < to)) throw std::invalid_argument("plot range start must be below its end");
      for (auto& s : f.plots[0].series) {
        PlotSeries kept{s.name, s.role, s.style, {}, {}};
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (s.x[i] >= from && s.x[i] <= to) {
            kept.x.push_back(s.x[i]);
            kept.y.push_back(s.y[i]);
          }
        }
        s = std::move(kept);
      }
      f.plots[0].meta["range"] = {from, to};
    }
    r.fit = std::move(f.dist);
    r.plots = std::move(f.plots);
    return true;
  } else if (op == "ecdf") {
    arity(c, 1, 1);
    const std::size_t col = parse_column(c.args[0]);
    const auto v = numeric_column(cur.table(), col);
    r.fit = Empirical{compute_ecdf(v).sorted};
    r.plots.push_back(ecdf_plot(Ecdf{std::get<Empirical>(*r.fit).samples}, label(cur.table(), col)));
    return true;
  } else if (op == "polynomial_regression") {
    arity(c, 2, 2);
    const std::size_t col = parse_column(c.args[0]);
    const auto degree = parse_int(c.args[1], "degree");
    if (degree < 0) throw std::invalid_argument("degree must be nonnegative");
    const auto v = numeric_column(cur.table(), col);
    r.polyfit = polynomial_regression(v, static_cast<std::size_t>(degree));
    std::vector<double> x(v.values.size());
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i + 1);
    r.plots.push_back(regression_plot(x, v.values, *r.polyfit, label(cur.table(), col)));
    return true;
  } else if (op == "log_histogram") {
    arity(c, 3, 3);
    const std::size_t col = parse_column(c.args[0]);
    const auto v = numeric_column(cur.table(), col);
    const LogAxes axes = log_axes_from_string(trim(c.args[2]));
    const auto h = log_histogram(v, parse_number(c.args[1], "log step"), axes);
    r.plots.push_back(histogram_plot(h, axes, label(cur.table(), col)));
    r.plots.back().meta["log_step"] = parse_number(c.args[1], "log step");
    return true;
  } else {
    throw std::invalid_argument("unknown operation '" + op + "'");
  }
  return false;
}

}  // namespace

CommandResult run_script(Storage& storage, const std::string& table, const std::string& script,
                         const RunOptions& options) {
  CommandResult r;
  r.script = script;
  const auto fail = [&](const std::string& msg) { return CommandExecutionError(msg, script); };
  std::vector<Call> calls;
  try {
    calls = parse_script(script);
  } catch (const std::exception& e) {
    throw fail(std::string("script error: ") + e.what());
  }
  if (!storage.has_table(table)) throw fail("table '" + table + "' does not exist in storage " + storage.id());

  Current cur(storage, table);
  for (std::size_t i = 0; i < calls.size(); ++i) {
    bool terminal = false;
    try {
      terminal = apply(calls[i], cur, options, r);
    } catch (const CommandExecutionError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail("step " + std::to_string(i + 1) + " (" + calls[i].op + "): " + e.what());
    }
    if (terminal && i + 1 < calls.size()) {
      throw fail("step " + std::to_string(i + 1) + " (" + calls[i].op + ") produces a fit or plot, so it must be last");
    }
    if (terminal) return r;
  }
  r.table = cur.table();
  if (options.output) {
    try {
      r.stored = write_table(storage, *options.output, r.table->meta.columns, r.table->rows, TableOrigin::query_result);
      r.table->meta.name = r.stored->name;
    } catch (const std::exception& e) {
      throw fail(std::string("cannot store result: ") + e.what());
    }
  }
  return r;
}

CommandResult run_invocation(Storage& storage, const std::string& table, const CommandInvocation& inv,
                             const std::optional<std::string>& script_override, const RunOptions& options) {
  if (inv.args.size() != inv.spec.param_count) {
    throw CommandArityError("command '" + inv.spec.name + "' takes " + std::to_string(inv.spec.param_count) +
                            " parameter(s), got " + std::to_string(inv.args.size()));
  }
  CommandResult r = run_script(storage, table, script_override ? *script_override : inv.rendered, options);
  r.command = inv.spec.name;
  return r;
}

nlohmann::json to_json(const CommandResult& r, std::size_t preview_rows) {
  nlohmann::json j{{"command", r.command}, {"script", r.script}};
  if (r.table) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < r.table->rows.size() && i < preview_rows; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (const auto& v : r.table->rows[i]) row.push_back(value_to_json(v));
      rows.push_back(std::move(row));
    }
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : r.table->meta.columns) cols.push_back(to_json(c));
    j["table"] = {{"columns", cols}, {"row_count", r.table->rows.size()}, {"rows", rows}};
  }
  if (r.stored) j["stored"] = to_json(*r.stored);
  if (r.fit) j["fit"] = to_json(*r.fit);
  if (r.polyfit) j["polyfit"] = {{"degree", r.polyfit->degree}, {"coefficients", r.polyfit->coefficients}};
  nlohmann::json plots = nlohmann::json::array();
  for (const auto& p : r.plots) plots.push_back(to_json(p));
  j["plots"] = plots;
  return j;
}

}  // namespace tracebench
