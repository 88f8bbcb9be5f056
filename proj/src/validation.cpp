#include "tracebench/validation.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace tracebench {

namespace {

struct State {
  std::int64_t running = 0, waiting = 0, completed = 0, evicted = 0, submitted = 0, killed = 0, requeued = 0;

  void apply(const LogRow& r) {
    switch (r.kind) {
      case EventKind::task_submit: ++submitted, ++waiting; break;
      case EventKind::task_schedule: --waiting, ++running; break;
      case EventKind::task_evict: --running, ++waiting, ++evicted; break;
      case EventKind::task_requeue: --running, ++waiting, ++requeued; break;
      case EventKind::task_finish: --running, ++completed; break;
      case EventKind::task_kill:
        // A kill row names the machine only if the task was running.
        (r.machine_id >= 0 ? running : waiting) -= 1;
        ++killed;
        break;
      default: break;
    }
  }

  double get(const std::string& metric) const {
    if (metric == "running") return static_cast<double>(running);
    if (metric == "waiting") return static_cast<double>(waiting);
    if (metric == "completed") return static_cast<double>(completed);
    if (metric == "evicted") return static_cast<double>(evicted);
    if (metric == "submitted") return static_cast<double>(submitted);
    if (metric == "killed") return static_cast<double>(killed);
    if (metric == "failure_requeued") return static_cast<double>(requeued);
    throw ValidationError("unknown metric '" + metric + "' (expected running, completed, waiting or evicted)");
  }
};

}  // namespace

TimeSeries extract_metric_series(const EventLog& log, const std::string& metric, double dt, double origin) {
  if (!(dt > 0)) throw ValidationError("dt must be positive");
  State s;
  s.get(metric);  // validates the name
  TimeSeries out;
  out.dt = dt;
  if (log.rows.empty() || log.horizon < origin) return out;
  const auto n = static_cast<std::size_t>(std::floor((log.horizon - origin) / dt + 1e-9)) + 1;
  std::size_t row = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = origin + static_cast<double>(k) * dt;
    while (row < log.rows.size() && log.rows[row].time <= t) s.apply(log.rows[row++]);
    out.t.push_back(t);
    out.v.push_back(s.get(metric));
  }
  return out;
}

double time_average(const EventLog& log, const std::string& metric) {
  if (!(log.horizon > 0)) throw ValidationError("time average needs a positive horizon");
  State s;
  double area = 0, last = 0;
  for (const auto& r : log.rows) {
    if (r.time > log.horizon) break;
    area += s.get(metric) * (r.time - last);
    last = r.time;
    s.apply(r);
  }
  area += s.get(metric) * (log.horizon - last);
  return area / log.horizon;
}

TimeSeries exp_smooth(const TimeSeries& series, double alpha) {
  if (!(alpha > 0 && alpha <= 1)) throw ValidationError("smoothing alpha must lie in (0, 1]");
  if (series.empty()) throw ValidationError("cannot smooth an empty series");
  TimeSeries out = series;
  if (alpha == 1) return out;
  // Difference form: constant runs stay exactly constant.
  for (std::size_t k = 1; k < out.v.size(); ++k) out.v[k] = out.v[k - 1] + alpha * (series.v[k] - out.v[k - 1]);
  return out;
}

ComparisonReport compare_series(const TimeSeries& a, const TimeSeries& b) {
  if (std::fabs(a.dt - b.dt) > 1e-9 * std::max(a.dt, b.dt)) {
    throw ValidationError("series have different sampling intervals");
  }
  if (a.empty() || b.empty()) throw ValidationError("cannot compare an empty series");
  const double dt = a.dt;
  const double start = std::max(a.t.front(), b.t.front());
  const double end = std::min(a.t.back(), b.t.back());
  if (start > end + 1e-9 * dt) throw ValidationError("series do not overlap in time");
  const auto ia = static_cast<std::size_t>(std::llround((start - a.t.front()) / dt));
  const auto ib = static_cast<std::size_t>(std::llround((start - b.t.front()) / dt));
  const std::size_t n = std::min(a.size() - ia, b.size() - ib);

  ComparisonReport r;
  r.samples = n;
  r.t_start = start;
  r.t_end = a.t[ia + n - 1];
  double ma = 0, mb = 0, sq = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.v[ia + i], y = b.v[ib + i];
    ma += x;
    mb += y;
    sq += (x - y) * (x - y);
    r.max_abs_diff = std::max(r.max_abs_diff, std::fabs(x - y));
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  r.rmse = std::sqrt(sq / static_cast<double>(n));
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.v[ia + i] - ma, y = b.v[ib + i] - mb;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (saa == 0 || sbb == 0) {
    // Undefined correlation; identical constant series count as agreeing.
    r.pearson_r = (saa == 0 && sbb == 0 && r.max_abs_diff == 0) ? 1.0 : 0.0;
  } else {
    r.pearson_r = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  }
  return r;
}

nlohmann::json to_json(const ComparisonReport& r) {
  return {{"rmse", r.rmse},       {"pearson_r", r.pearson_r}, {"max_abs_diff", r.max_abs_diff},
          {"samples", r.samples}, {"t_start", r.t_start},     {"t_end", r.t_end}};
}

PlotSpec timeseries_plot(const std::string& metric, const TimeSeries& real, const TimeSeries& simulated,
                         const std::string& real_label, const std::string& sim_label) {
  PlotSpec p;
  p.kind = PlotKind::timeseries;
  p.title = "Number of tasks " + metric;
  p.x_label = "time (s)";
  p.y_label = metric;
  p.series.push_back({real_label, "data", "line", real.t, real.v});
  p.series.push_back({sim_label, "fit", "line", simulated.t, simulated.v});
  p.meta["metric"] = metric;
  p.meta["dt"] = real.dt;
  return p;
}

TimeSeries read_series_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || (line != "t,value" && line != "t,value\r")) {
    throw ValidationError(path.string() + ": expected header 't,value'");
  }
  TimeSeries s;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    double t = 0, v = 0;
    const bool ok = comma != std::string::npos &&
                    std::from_chars(line.data(), line.data() + comma, t).ptr == line.data() + comma &&
                    std::from_chars(line.data() + comma + 1, line.data() + line.size(), v).ptr ==
                        line.data() + line.size();
    if (!ok) throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": bad row");
    s.t.push_back(t);
    s.v.push_back(v);
  }
  if (s.t.size() >= 2) s.dt = s.t[1] - s.t[0];
  for (std::size_t i = 1; i < s.t.size(); ++i) {
    if (std::fabs((s.t[i] - s.t[i - 1]) - s.dt) > 1e-6 * s.dt) {
      throw ValidationError(path.string() + ": samples are not evenly spaced");
    }
  }
  return s;
}

}  // namespace tracebench
