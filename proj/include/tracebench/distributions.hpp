// Fitted distributions: closed forms, spline CDFs and empirical samples.
#pragma once

#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace tracebench {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Exponential {
  double rate = 1;
  friend bool operator==(const Exponential&, const Exponential&) = default;
};

struct LogNormal {
  double mu = 0;
  double sigma = 1;
  friend bool operator==(const LogNormal&, const LogNormal&) = default;
};

// Monotone piecewise-cubic Hermite interpolant through (knots[i], values[i]).
// Below the first knot the CDF is 0, from the last knot on it is 1.
struct SplineCdf {
  std::vector<double> knots;
  std::vector<double> values;
  std::vector<double> slopes;

  // Computes Fritsch-Carlson slopes for the current knots/values.
  static SplineCdf through(std::vector<double> knots, std::vector<double> values);
  double operator()(double x) const;
  // Smallest x with cdf(x) >= u, by bisection to 1e-10 (absolute, x domain).
  double inverse(double u) const;
  double derivative(double x) const;

  friend bool operator==(const SplineCdf&, const SplineCdf&) = default;
};

struct Empirical {
  std::vector<double> samples;  // sorted
  friend bool operator==(const Empirical&, const Empirical&) = default;
};

using FittedDistribution = std::variant<Exponential, LogNormal, SplineCdf, Empirical>;

std::string distribution_name(const FittedDistribution& d);

double cdf(const FittedDistribution& d, double x);
// Inverse CDF for u in (0, 1).
double quantile(const FittedDistribution& d, double u);
double pdf(const FittedDistribution& d, double x);
double mean(const FittedDistribution& d);

// {"type": "exponential", "rate": ...} and so on.
nlohmann::json to_json(const FittedDistribution& d);
FittedDistribution distribution_from_json(const nlohmann::json& j);

// Throws FitError if parameters are out of domain.
void check(const FittedDistribution& d);

}  // namespace tracebench
