#include "tracebench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "tracebench/expr.hpp"

namespace tracebench {

namespace {

std::size_t check_column(const Table& t, std::size_t column) {
  if (column < 1 || column > t.meta.columns.size()) {
    throw AnalysisError("column " + std::to_string(column) + " out of range 1.." +
                        std::to_string(t.meta.columns.size()) + " of table '" + t.meta.name + "'");
  }
  return column - 1;
}

Table derived(const Table& src, std::vector<ColumnMeta> columns) {
  Table out;
  out.meta.name = src.meta.name;
  out.meta.columns = std::move(columns);
  out.meta.origin = TableOrigin::query_result;
  return out;
}

void finish(Table& t) { t.meta.row_count = static_cast<std::int64_t>(t.rows.size()); }

// Infers a column dtype for computed values: int64 if all ints, float64 if
// all numeric, text if all text.
DType infer_dtype(std::vector<Value>& values, DType fallback) {
  bool any_int = false, any_float = false, any_text = false;
  for (const auto& v : values) {
    any_int |= v.is_int();
    any_float |= v.is_float();
    any_text |= v.is_text();
  }
  if (any_text && (any_int || any_float)) throw AnalysisError("function returns a mix of text and numbers");
  if (any_text) return DType::text;
  if (any_float) {
    for (auto& v : values) {
      if (v.is_int()) v = Value(static_cast<double>(v.as_int()));
    }
    return DType::float64;
  }
  return any_int ? DType::int64 : fallback;
}

std::vector<double> sorted_copy(const NumericVector& v) {
  std::vector<double> s = v.values;
  std::sort(s.begin(), s.end());
  return s;
}

void require_positive(const NumericVector& v, const char* what) {
  if (v.values.size() < 2) throw FitError(std::string(what) + " fit needs at least 2 values");
  for (double x : v.values) {
    if (!(x > 0)) throw FitError(std::string(what) + " fit needs positive values, got " + format_double(x));
  }
}

std::vector<double> grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

std::string label_of(const NumericVector& v) {
  if (v.table.empty()) return v.column.empty() ? "value" : v.column;
  return v.table + "." + v.column;
}

}  // namespace

NumericVector make_vector(std::vector<double> values, std::string table, std::string column) {
  for (double x : values) {
    if (!std::isfinite(x)) throw AnalysisError("non-finite value in numeric vector");
  }
  return {std::move(values), std::move(table), std::move(column)};
}

NumericVector numeric_column(const Table& t, std::size_t column) {
  const std::size_t c = check_column(t, column);
  const ColumnMeta& meta = t.meta.columns[c];
  if (meta.dtype == DType::text) throw AnalysisError("column '" + meta.name + "' is text, not numeric");
  std::vector<double> values;
  values.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    if (!r[c].is_null()) values.push_back(r[c].to_double());
  }
  return make_vector(std::move(values), t.meta.name, meta.name);
}

Table get_column(const Table& t, std::size_t column) {
  const std::size_t c = check_column(t, column);
  Table out = derived(t, {t.meta.columns[c]});
  out.rows.reserve(t.rows.size());
  for (const auto& r : t.rows) out.rows.push_back(Row{r[c]});
  finish(out);
  return out;
}

Table apply_1col(const Table& t, std::size_t column, const std::string& fn) {
  const std::size_t c = check_column(t, column);
  const expr::Program program = expr::Program::parse_expression(fn);
  std::vector<Value> values;
  values.reserve(t.rows.size());
  expr::Context ctx;
  ctx.columns = &t.meta.columns;
  for (const auto& r : t.rows) {
    ctx.record = &r;
    ctx.vars.clear();
    ctx.set("x", r[c]);
    values.push_back(program.run(ctx));
  }
  const DType dtype = infer_dtype(values, t.meta.columns[c].dtype);
  Table out = derived(t, {{t.meta.columns[c].name, dtype}});
  out.rows.reserve(values.size());
  for (auto& v : values) out.rows.push_back(Row{std::move(v)});
  finish(out);
  return out;
}

std::vector<double> apply_1col(const NumericVector& v, const std::string& fn) {
  const expr::Program program = expr::Program::parse_expression(fn);
  std::vector<double> out;
  out.reserve(v.values.size());
  expr::Context ctx;
  for (double x : v.values) {
    ctx.vars.clear();
    ctx.set("x", Value(x));
    const Value r = program.run(ctx);
    if (!r.is_numeric()) throw AnalysisError("function '" + fn + "' did not return a number for x = " + format_double(x));
    out.push_back(r.to_double());
  }
  return make_vector(std::move(out)).values;
}

Table filter_rows(const Table& t, const std::string& condition) {
  const expr::Program program = expr::Program::parse_expression(condition);
  Table out = derived(t, t.meta.columns);
  expr::Context ctx;
  ctx.columns = &t.meta.columns;
  for (const auto& r : t.rows) {
    ctx.record = &r;
    ctx.vars.clear();
    if (expr::truth(program.run(ctx)).value_or(false)) out.rows.push_back(r);
  }
  finish(out);
  return out;
}

Table aggregate_rows(const Table& t, std::size_t group_column, const std::string& condition, const std::string& fn,
                     std::optional<std::size_t> value_column) {
  const std::size_t g = check_column(t, group_column);
  std::size_t vcol = g;
  if (value_column) {
    vcol = check_column(t, *value_column);
  } else if (t.meta.columns.size() > 1) {
    vcol = g == 0 ? 1 : 0;
  }
  static const std::vector<std::string> known = {"count", "sum", "mean", "min", "max"};
  if (std::find(known.begin(), known.end(), fn) == known.end()) {
    throw AnalysisError("unknown reducer '" + fn + "' (expected count, sum, mean, min or max)");
  }
  const ColumnMeta& vmeta = t.meta.columns[vcol];
  if (fn != "count" && vmeta.dtype == DType::text && (fn == "sum" || fn == "mean")) {
    throw AnalysisError(fn + " needs a numeric column, '" + vmeta.name + "' is text");
  }
  std::optional<expr::Program> cond;
  const auto trimmed = condition.find_first_not_of(" \t");
  if (trimmed != std::string::npos) cond = expr::Program::parse_expression(condition);

  const auto less = [](const Value& a, const Value& b) { return total_order(a, b) < 0; };
  std::map<Value, std::vector<const Row*>, decltype(less)> groups(less);
  expr::Context ctx;
  ctx.columns = &t.meta.columns;
  for (const auto& r : t.rows) {
    if (cond) {
      ctx.record = &r;
      ctx.vars.clear();
      if (!expr::truth(cond->run(ctx)).value_or(false)) continue;
    }
    groups[r[g]].push_back(&r);
  }

  DType out_type = DType::int64;
  if (fn == "mean") out_type = DType::float64;
  if (fn == "sum" || fn == "min" || fn == "max") out_type = vmeta.dtype;
  const std::string out_name = fn == "count" ? "count" : fn + "_" + vmeta.name;
  Table out = derived(t, {t.meta.columns[g], {out_name == t.meta.columns[g].name ? out_name + "_2" : out_name, out_type}});
  for (const auto& [key, rows] : groups) {
    Value result;
    if (fn == "count") {
      result = Value(static_cast<std::int64_t>(rows.size()));
    } else {
      std::vector<Value> vals;
      for (const Row* r : rows) {
        if (!(*r)[vcol].is_null()) vals.push_back((*r)[vcol]);
      }
      if (!vals.empty()) {
        if (fn == "sum") {
          if (out_type == DType::int64) {
            std::int64_t s = 0;
            for (const auto& v : vals) {
              if (__builtin_add_overflow(s, v.as_int(), &s)) throw AnalysisError("integer overflow in sum");
            }
            result = Value(s);
          } else {
            double s = 0;
            for (const auto& v : vals) s += v.as_float();
            result = Value(s);
          }
        } else if (fn == "mean") {
          double s = 0;
          for (const auto& v : vals) s += v.to_double();
          result = Value(s / static_cast<double>(vals.size()));
        } else {
          result = vals.front();
          for (const auto& v : vals) {
            const auto ord = compare_values(v, result);
            if ((fn == "min" && ord < 0) || (fn == "max" && ord > 0)) result = v;
          }
        }
      }
    }
    out.rows.push_back(Row{key, std::move(result)});
  }
  finish(out);
  return out;
}

std::vector<double> difference_between_rows(const NumericVector& v) {
  if (v.values.size() < 2) throw AnalysisError("difference_between_rows needs at least 2 values");
  std::vector<double> out(v.values.size() - 1);
  for (std::size_t i = 0; i + 1 < v.values.size(); ++i) out[i] = v.values[i + 1] - v.values[i];
  return out;
}

Table difference_between_rows(const Table& t, std::size_t column) {
  const std::size_t c = check_column(t, column);
  const ColumnMeta& meta = t.meta.columns[c];
  if (meta.dtype == DType::text) throw AnalysisError("column '" + meta.name + "' is text, not numeric");
  std::vector<Value> cells;
  for (const auto& r : t.rows) {
    if (!r[c].is_null()) cells.push_back(r[c]);
  }
  if (cells.size() < 2) throw AnalysisError("difference_between_rows needs at least 2 values");
  Table out = derived(t, {meta});
  for (std::size_t i = 0; i + 1 < cells.size(); ++i) {
    if (meta.dtype == DType::int64) {
      std::int64_t d = 0;
      if (__builtin_sub_overflow(cells[i + 1].as_int(), cells[i].as_int(), &d)) {
        throw AnalysisError("integer overflow in difference");
      }
      out.rows.push_back(Row{Value(d)});
    } else {
      out.rows.push_back(Row{Value(cells[i + 1].as_float() - cells[i].as_float())});
    }
  }
  finish(out);
  return out;
}

// ---------------------------------------------------------------------------

double sample_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw AnalysisError("quantile of an empty sample");
  if (p <= 0) return sorted.front();
  const double n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  return sorted[std::clamp<std::size_t>(k, 1, sorted.size()) - 1];
}

double Ecdf::operator()(double x) const {
  if (sorted.empty()) return 0;
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

std::vector<std::pair<double, double>> Ecdf::steps() const {
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
    out.emplace_back(sorted[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

Ecdf compute_ecdf(const NumericVector& v) {
  if (v.values.empty()) throw AnalysisError("ecdf needs at least one value");
  return Ecdf{sorted_copy(v)};
}

PlotSpec ecdf_plot(const Ecdf& e, const std::string& label) {
  PlotSpec p;
  p.kind = PlotKind::ecdf;
  p.title = "ECDF of " + label;
  p.x_label = label;
  p.y_label = "F(x)";
  PlotSeries s{"ecdf", "data", "steps", {}, {}};
  if (!e.sorted.empty()) {
    s.x.push_back(e.sorted.front());
    s.y.push_back(0);
  }
  for (auto [x, f] : e.steps()) {
    s.x.push_back(x);
    s.y.push_back(f);
  }
  p.series.push_back(std::move(s));
  p.meta["n"] = e.sorted.size();
  return p;
}

FitResult fit_exponential(const NumericVector& v) {
  require_positive(v, "exponential");
  const double m = std::accumulate(v.values.begin(), v.values.end(), 0.0) / static_cast<double>(v.values.size());
  FitResult r{Exponential{1 / m}, {}};
  check(r.dist);
  r.plots = make_gof_plots(v, r.dist);
  return r;
}

FitResult fit_lognormal(const NumericVector& v) {
  require_positive(v, "lognormal");
  std::vector<double> logs(v.values.size());
  std::transform(v.values.begin(), v.values.end(), logs.begin(), [](double x) { return std::log(x); });
  const double n = static_cast<double>(logs.size());
  const double mu = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
  double ss = 0;
  for (double l : logs) ss += (l - mu) * (l - mu);
  const double sigma = std::sqrt(ss / n);
  if (!(sigma > 0)) throw FitError("lognormal fit needs at least 2 distinct values (zero variance)");
  FitResult r{LogNormal{mu, sigma}, {}};
  check(r.dist);
  r.plots = make_gof_plots(v, r.dist);
  return r;
}

FitResult fit_spline_cdf(const NumericVector& v, std::size_t n_intervals) {
  if (n_intervals < 1) throw FitError("spline needs at least one interval");
  if (v.values.size() < n_intervals + 1) {
    throw FitError("spline with " + std::to_string(n_intervals) + " intervals needs at least " +
                   std::to_string(n_intervals + 1) + " values, got " + std::to_string(v.values.size()));
  }
  const Ecdf e = compute_ecdf(v);
  const std::size_t n = e.sorted.size();
  std::vector<double> knots, values;
  for (std::size_t k = 0; k <= n_intervals; ++k) {
    // type-1 quantile at k/n_intervals, computed in integers
    const std::size_t idx = k == 0 ? 1 : (k * n + n_intervals - 1) / n_intervals;
    const double x = e.sorted[idx - 1];
    const double f = k == 0 ? 0.0 : e(x);
    if (!knots.empty() && x <= knots.back()) continue;
    knots.push_back(x);
    values.push_back(f);
  }
  if (knots.size() < 2) throw FitError("spline needs at least 2 distinct values");
  FitResult r{SplineCdf::through(knots, values), {}};

  PlotSpec p;
  p.kind = PlotKind::spline_cdf;
  p.title = "Spline CDF of " + label_of(v);
  p.x_label = label_of(v);
  p.y_label = "F(x)";
  PlotSeries data{"data", "data", "points", {}, {}};
  for (auto [x, f] : e.steps()) {
    data.x.push_back(x);
    data.y.push_back(f);
  }
  PlotSeries fit{"spline", "fit", "line", grid(knots.front(), knots.back(), 200), {}};
  const auto& spline = std::get<SplineCdf>(r.dist);
  for (double x : fit.x) fit.y.push_back(spline(x));
  p.series = {std::move(data), std::move(fit)};
  p.meta["intervals"] = n_intervals;
  p.meta["knots"] = knots;
  r.plots.push_back(std::move(p));
  return r;
}

// ---------------------------------------------------------------------------

double PolyFit::operator()(double x) const {
  double acc = 0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * x + *it;
  return acc;
}

PolyFit polynomial_regression(const std::vector<double>& x, const std::vector<double>& y, std::size_t degree) {
  if (x.size() != y.size()) throw AnalysisError("x and y have different lengths");
  if (x.size() < degree + 1) {
    throw AnalysisError("degree " + std::to_string(degree) + " regression needs at least " + std::to_string(degree + 1) +
                        " points");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto m = static_cast<Eigen::Index>(degree + 1);
  Eigen::MatrixXd a(n, m);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1;
    for (Eigen::Index j = 0; j < m; ++j) {
      a(i, j) = p;
      p *= x[static_cast<std::size_t>(i)];
    }
    b(i) = y[static_cast<std::size_t>(i)];
  }
  // Equilibrate columns; raw powers of large x differ by many orders of magnitude.
  Eigen::VectorXd scale(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double norm = a.col(j).norm();
    scale(j) = norm > 0 ? norm : 1;
    a.col(j) /= scale(j);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < m) {
    throw AnalysisError("design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " < " +
                        std::to_string(m) + "); too few distinct x values for degree " + std::to_string(degree));
  }
  const Eigen::VectorXd c = qr.solve(b);
  PolyFit fit;
  fit.degree = degree;
  for (Eigen::Index j = 0; j < m; ++j) fit.coefficients.push_back(c(j) / scale(j));
  return fit;
}

PolyFit polynomial_regression(const NumericVector& y, std::size_t degree) {
  std::vector<double> x(y.values.size());
  std::iota(x.begin(), x.end(), 1.0);
  return polynomial_regression(x, y.values, degree);
}

PlotSpec regression_plot(const std::vector<double>& x, const std::vector<double>& y, const PolyFit& fit,
                         const std::string& label) {
  PlotSpec p;
  p.kind = PlotKind::regression;
  p.title = "Degree " + std::to_string(fit.degree) + " polynomial fit of " + label;
  p.x_label = "x";
  p.y_label = label;
  p.series.push_back({"data", "data", "points", x, y});
  if (!x.empty()) {
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    PlotSeries line{"fit", "fit", "line", grid(*lo, *hi, 200), {}};
    for (double v : line.x) line.y.push_back(fit(v));
    p.series.push_back(std::move(line));
  }
  p.meta["coefficients"] = fit.coefficients;
  return p;
}

LogAxes log_axes_from_string(std::string_view s) {
  if (s == "" || s == "none" || s == "n") return LogAxes::none;
  if (s == "x") return LogAxes::x;
  if (s == "y") return LogAxes::y;
  if (s == "xy" || s == "yx") return LogAxes::xy;
  throw AnalysisError("log axis must be none, x, y or xy, got '" + std::string(s) + "'");
}

Histogram log_histogram(const NumericVector& v, double step, LogAxes axes) {
  if (!(step > 0) || !std::isfinite(step)) throw AnalysisError("histogram step must be positive");
  if (v.values.empty()) throw AnalysisError("histogram of an empty column");
  const bool logx = axes == LogAxes::x || axes == LogAxes::xy;
  if (logx) {
    for (double x : v.values) {
      if (!(x > 0)) throw AnalysisError("log x-axis needs positive values, got " + format_double(x));
    }
  }
  const auto edge = [&](std::int64_t k) {
    return logx ? std::pow(10.0, static_cast<double>(k) * step) : static_cast<double>(k) * step;
  };
  const auto bin = [&](double x) {
    auto k = static_cast<std::int64_t>(std::floor((logx ? std::log10(x) : x) / step));
    // Correct for rounding in log10 and pow so that edge(k) <= x < edge(k+1).
    while (x < edge(k)) --k;
    while (x >= edge(k + 1)) ++k;
    return k;
  };
  const auto [lo, hi] = std::minmax_element(v.values.begin(), v.values.end());
  const std::int64_t k0 = bin(*lo), k1 = bin(*hi);
  if (k1 - k0 > 1'000'000) throw AnalysisError("histogram would have more than a million bins; increase the step");
  Histogram h;
  h.counts.assign(static_cast<std::size_t>(k1 - k0 + 1), 0);
  for (std::int64_t k = k0; k <= k1 + 1; ++k) h.edges.push_back(edge(k));
  for (double x : v.values) ++h.counts[static_cast<std::size_t>(bin(x) - k0)];
  return h;
}

PlotSpec histogram_plot(const Histogram& h, LogAxes axes, const std::string& label) {
  PlotSpec p;
  p.kind = PlotKind::log_histogram;
  p.title = "Histogram of " + label;
  p.x_label = label;
  p.y_label = "count";
  p.x_scale = axes == LogAxes::x || axes == LogAxes::xy ? AxisScale::log : AxisScale::linear;
  p.y_scale = axes == LogAxes::y || axes == LogAxes::xy ? AxisScale::log : AxisScale::linear;
  PlotSeries s{"count", "data", "bars", h.edges, {}};
  for (auto c : h.counts) s.y.push_back(static_cast<double>(c));
  p.series.push_back(std::move(s));
  std::int64_t total = 0;
  for (auto c : h.counts) total += c;
  p.meta["n"] = total;
  return p;
}

double freedman_diaconis_width(std::vector<double> values) {
  if (values.empty()) return 1;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double iqr = sample_quantile(values, 0.75) - sample_quantile(values, 0.25);
  if (iqr > 0) return 2 * iqr / std::cbrt(n);
  const double range = values.back() - values.front();
  if (range > 0) return range / (std::log2(n) + 1);  // Sturges
  return 1;
}

std::vector<PlotSpec> make_gof_plots(const NumericVector& v, const FittedDistribution& dist) {
  const std::vector<double> xs = sorted_copy(v);
  if (xs.empty()) throw AnalysisError("goodness-of-fit plots need data");
  const std::size_t n = xs.size();
  const double lo = xs.front(), hi = xs.back();
  const std::string label = label_of(v);
  const std::string name = distribution_name(dist);
  std::vector<PlotSpec> plots;

  {  // density overlay
    PlotSpec p;
    p.kind = PlotKind::density_fit;
    p.title = "Density of " + label + " vs " + name;
    p.x_label = label;
    p.y_label = "density";
    const double w = freedman_diaconis_width(xs);
    auto bins = static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / w)));
    bins = std::min<std::size_t>(bins, 1000);
    const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
    PlotSeries bars{"data", "data", "bars", {}, std::vector<double>(bins, 0)};
    for (std::size_t k = 0; k <= bins; ++k) bars.x.push_back(lo + width * static_cast<double>(k));
    for (double x : xs) {
      auto k = static_cast<std::size_t>((x - lo) / width);
      bars.y[std::min(k, bins - 1)] += 1;
    }
    for (auto& c : bars.y) c /= static_cast<double>(n) * width;
    p.series.push_back(std::move(bars));
    if (!std::holds_alternative<Empirical>(dist)) {
      PlotSeries fit{name, "fit", "line", grid(lo, hi, 200), {}};
      for (double x : fit.x) fit.y.push_back(pdf(dist, x));
      p.series.push_back(std::move(fit));
    }
    p.meta["bin_width"] = width;
    plots.push_back(std::move(p));
  }
  {  // CDF overlay
    PlotSpec p;
    p.kind = PlotKind::cdf_fit;
    p.title = "CDF of " + label + " vs " + name;
    p.x_label = label;
    p.y_label = "F(x)";
    PlotSeries data{"data", "data", "points", {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
      data.x.push_back(xs[i]);
      data.y.push_back(static_cast<double>(i + 1) / static_cast<double>(n));
    }
    PlotSeries fit{name, "fit", "line", grid(lo, hi, 200), {}};
    for (double x : fit.x) fit.y.push_back(cdf(dist, x));
    p.series = {std::move(data), std::move(fit)};
    plots.push_back(std::move(p));
  }
  std::vector<double> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  {  // Q-Q
    PlotSpec p;
    p.kind = PlotKind::qq;
    p.title = "Q-Q plot, " + name;
    p.x_label = "theoretical quantile";
    p.y_label = "sample quantile";
    PlotSeries pts{"data", "data", "points", {}, xs};
    for (double u : pos) pts.x.push_back(quantile(dist, u));
    const double a = std::min(pts.x.front(), lo), b = std::max(pts.x.back(), hi);
    p.series = {std::move(pts), {"perfect fit", "reference", "line", {a, b}, {a, b}}};
    plots.push_back(std::move(p));
  }
  {  // P-P
    PlotSpec p;
    p.kind = PlotKind::pp;
    p.title = "P-P plot, " + name;
    p.x_label = "fitted CDF";
    p.y_label = "empirical probability";
    PlotSeries pts{"data", "data", "points", {}, pos};
    for (double x : xs) pts.x.push_back(cdf(dist, x));
    p.series = {std::move(pts), {"perfect fit", "reference", "line", {0, 1}, {0, 1}}};
    plots.push_back(std::move(p));
  }
  for (auto& p : plots) p.meta["distribution"] = to_json(dist);
  return plots;
}

}  // namespace tracebench
