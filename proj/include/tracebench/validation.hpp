// Metric series from event logs, smoothing, and real-vs-simulated comparison.
#pragma once

#include <string>

#include <json.hpp>

#include "tracebench/plotspec.hpp"
#include "tracebench/sim.hpp"
#include "tracebench/timeseries.hpp"

namespace tracebench {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Metric state at t_k = origin + k*dt after every row with time <= t_k, for
// t_k <= log.horizon. running and waiting are instantaneous counts;
// completed and evicted are cumulative. Also accepts submitted, killed and
// failure_requeued. An empty log gives an empty series.
TimeSeries extract_metric_series(const EventLog& log, const std::string& metric, double dt, double origin = 0);

// Exact time average of an instantaneous metric over [0, horizon].
double time_average(const EventLog& log, const std::string& metric);

inline constexpr double kDefaultAlpha = 0.05;

// s0 = v0, sk = alpha*vk + (1-alpha)*s(k-1); alpha in (0, 1].
TimeSeries exp_smooth(const TimeSeries& series, double alpha = kDefaultAlpha);

struct ComparisonReport {
  double rmse = 0;
  double pearson_r = 0;
  double max_abs_diff = 0;
  std::size_t samples = 0;
  double t_start = 0;
  double t_end = 0;
};

// Compares the samples both series share; dt must match.
ComparisonReport compare_series(const TimeSeries& a, const TimeSeries& b);
nlohmann::json to_json(const ComparisonReport& r);

PlotSpec timeseries_plot(const std::string& metric, const TimeSeries& real, const TimeSeries& simulated,
                         const std::string& real_label = "trace", const std::string& sim_label = "simulation");

// t,value CSV as written by write_metrics_dir.
TimeSeries read_series_csv(const fs::path& path);

}  // namespace tracebench
