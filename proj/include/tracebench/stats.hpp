// Table and column analysis operations, distribution fitting and plots.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tracebench/distributions.hpp"
#include "tracebench/plotspec.hpp"
#include "tracebench/storage.hpp"

namespace tracebench {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NumericVector {
  std::vector<double> values;
  std::string table;
  std::string column;
};

// Non-null cells of a numeric column (1-based), in row order.
NumericVector numeric_column(const Table& t, std::size_t column);
// Rejects NaN/inf.
NumericVector make_vector(std::vector<double> values, std::string table = {}, std::string column = {});

// ---- table operations (results are new in-memory tables) -----------------

Table get_column(const Table& t, std::size_t column);
// Evaluates fn (expression dialect; x is the cell, t the record) on every
// cell of the column. The output column keeps the name.
Table apply_1col(const Table& t, std::size_t column, const std::string& fn);
std::vector<double> apply_1col(const NumericVector& v, const std::string& fn);
Table filter_rows(const Table& t, const std::string& condition);
// One row per group of rows satisfying condition; fn is count, sum, mean,
// min or max over value_column (defaults to the first other column).
Table aggregate_rows(const Table& t, std::size_t group_column, const std::string& condition, const std::string& fn,
                     std::optional<std::size_t> value_column = std::nullopt);
std::vector<double> difference_between_rows(const NumericVector& v);
Table difference_between_rows(const Table& t, std::size_t column);

// ---- fitting ---------------------------------------------------------------

struct FitResult {
  FittedDistribution dist;
  std::vector<PlotSpec> plots;
};

FitResult fit_exponential(const NumericVector& v);
FitResult fit_lognormal(const NumericVector& v);
FitResult fit_spline_cdf(const NumericVector& v, std::size_t n_intervals);

struct Ecdf {
  std::vector<double> sorted;
  double operator()(double x) const;
  // Distinct values and F at each.
  std::vector<std::pair<double, double>> steps() const;
};

Ecdf compute_ecdf(const NumericVector& v);
PlotSpec ecdf_plot(const Ecdf& e, const std::string& label);

struct PolyFit {
  std::size_t degree = 0;
  std::vector<double> coefficients;  // c0 .. cn
  double operator()(double x) const;
};

PolyFit polynomial_regression(const std::vector<double>& x, const std::vector<double>& y, std::size_t degree);
// x defaults to the 1-based index.
PolyFit polynomial_regression(const NumericVector& y, std::size_t degree);
PlotSpec regression_plot(const std::vector<double>& x, const std::vector<double>& y, const PolyFit& fit,
                         const std::string& label);

enum class LogAxes : std::uint8_t { none, x, y, xy };
LogAxes log_axes_from_string(std::string_view s);

struct Histogram {
  std::vector<double> edges;  // size = counts.size() + 1
  std::vector<std::int64_t> counts;
};

// With a log x-axis bins are [10^(k*step), 10^((k+1)*step)); otherwise
// [k*step, (k+1)*step).
Histogram log_histogram(const NumericVector& v, double step, LogAxes axes);
PlotSpec histogram_plot(const Histogram& h, LogAxes axes, const std::string& label);

// Density overlay, CDF overlay, Q-Q and P-P, in that order.
std::vector<PlotSpec> make_gof_plots(const NumericVector& v, const FittedDistribution& dist);

// Freedman-Diaconis bin width, with fallbacks for degenerate spread.
double freedman_diaconis_width(std::vector<double> values);

// Type-1 sample quantile of sorted data: x_(ceil(p n)), p = 0 gives the minimum.
double sample_quantile(const std::vector<double>& sorted, double p);

}  // namespace tracebench
