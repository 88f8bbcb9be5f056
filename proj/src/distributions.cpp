#include "tracebench/distributions.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

namespace tracebench {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

const boost::math::normal& standard_normal() {
  static const boost::math::normal n(0.0, 1.0);
  return n;
}

}  // namespace

SplineCdf SplineCdf::through(std::vector<double> knots, std::vector<double> values) {
  if (knots.size() != values.size() || knots.size() < 2) throw FitError("a spline CDF needs at least two knots");
  const std::size_t n = knots.size();
  std::vector<double> h(n - 1), d(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = knots[i + 1] - knots[i];
    if (!(h[i] > 0)) throw FitError("spline knots must be strictly increasing");
    if (values[i + 1] < values[i]) throw FitError("spline CDF values must be nondecreasing");
    d[i] = (values[i + 1] - values[i]) / h[i];
  }
  std::vector<double> m(n);
  m[0] = d[0];
  m[n - 1] = d[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) m[i] = (d[i - 1] == 0 || d[i] == 0) ? 0.0 : (d[i - 1] + d[i]) / 2;
  // Fritsch-Carlson limiter keeps each cubic piece monotone.
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (d[i] == 0) {
      m[i] = m[i + 1] = 0;
      continue;
    }
    const double a = m[i] / d[i], b = m[i + 1] / d[i];
    const double s = a * a + b * b;
    if (s > 9) {
      const double tau = 3 / std::sqrt(s);
      m[i] = tau * a * d[i];
      m[i + 1] = tau * b * d[i];
    }
  }
  return SplineCdf{std::move(knots), std::move(values), std::move(m)};
}

double SplineCdf::operator()(double x) const {
  if (knots.empty()) return 0;
  if (x < knots.front()) return 0;
  if (x >= knots.back()) return 1;
  const auto it = std::upper_bound(knots.begin(), knots.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - knots.begin()) - 1;
  const double h = knots[i + 1] - knots[i];
  const double t = (x - knots[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double v = (2 * t3 - 3 * t2 + 1) * values[i] + (t3 - 2 * t2 + t) * h * slopes[i] +
                   (-2 * t3 + 3 * t2) * values[i + 1] + (t3 - t2) * h * slopes[i + 1];
  return std::clamp(v, 0.0, 1.0);
}

double SplineCdf::derivative(double x) const {
  if (knots.size() < 2 || x < knots.front() || x >= knots.back()) return 0;
  const auto it = std::upper_bound(knots.begin(), knots.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - knots.begin()) - 1;
  const double h = knots[i + 1] - knots[i];
  const double t = (x - knots[i]) / h;
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * values[i] + (3 * t2 - 4 * t + 1) * h * slopes[i] + (-6 * t2 + 6 * t) * values[i + 1] +
          (3 * t2 - 2 * t) * h * slopes[i + 1]) /
         h;
}

double SplineCdf::inverse(double u) const {
  if (knots.empty()) throw FitError("empty spline CDF");
  double lo = knots.front(), hi = knots.back();
  if ((*this)(lo) >= u) return lo;
  while (hi - lo > 1e-10) {
    const double mid = lo + (hi - lo) / 2;
    if (mid <= lo || mid >= hi) break;  // interval below double resolution
    if ((*this)(mid) >= u) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::string distribution_name(const FittedDistribution& d) {
  return std::visit(Overloaded{[](const Exponential&) { return std::string("exponential"); },
                               [](const LogNormal&) { return std::string("lognormal"); },
                               [](const SplineCdf&) { return std::string("spline_cdf"); },
                               [](const Empirical&) { return std::string("empirical"); }},
                    d);
}

double cdf(const FittedDistribution& d, double x) {
  return std::visit(Overloaded{[x](const Exponential& e) { return x <= 0 ? 0.0 : -std::expm1(-e.rate * x); },
                               [x](const LogNormal& l) {
                                 return x <= 0 ? 0.0 : boost::math::cdf(standard_normal(), (std::log(x) - l.mu) / l.sigma);
                               },
                               [x](const SplineCdf& s) { return s(x); },
                               [x](const Empirical& e) {
                                 if (e.samples.empty()) return 0.0;
                                 const auto it = std::upper_bound(e.samples.begin(), e.samples.end(), x);
                                 return static_cast<double>(it - e.samples.begin()) / static_cast<double>(e.samples.size());
                               }},
                    d);
}

double quantile(const FittedDistribution& d, double u) {
  if (!(u > 0 && u < 1)) throw std::domain_error("quantile level must lie in (0, 1)");
  return std::visit(Overloaded{[u](const Exponential& e) { return -std::log1p(-u) / e.rate; },
                               [u](const LogNormal& l) {
                                 return std::exp(l.mu + l.sigma * boost::math::quantile(standard_normal(), u));
                               },
                               [u](const SplineCdf& s) { return s.inverse(u); },
                               [u](const Empirical& e) {
                                 if (e.samples.empty()) throw FitError("empty empirical distribution");
                                 // type-1 (inverse ECDF) quantile
                                 const double n = static_cast<double>(e.samples.size());
                                 const auto k = static_cast<std::size_t>(std::ceil(u * n));
                                 return e.samples[std::clamp<std::size_t>(k, 1, e.samples.size()) - 1];
                               }},
                    d);
}

double pdf(const FittedDistribution& d, double x) {
  return std::visit(Overloaded{[x](const Exponential& e) { return x < 0 ? 0.0 : e.rate * std::exp(-e.rate * x); },
                               [x](const LogNormal& l) {
                                 if (x <= 0) return 0.0;
                                 return boost::math::pdf(standard_normal(), (std::log(x) - l.mu) / l.sigma) / (x * l.sigma);
                               },
                               [x](const SplineCdf& s) { return s.derivative(x); },
                               [](const Empirical&) { return std::numeric_limits<double>::quiet_NaN(); }},
                    d);
}

double mean(const FittedDistribution& d) {
  return std::visit(Overloaded{[](const Exponential& e) { return 1 / e.rate; },
                               [](const LogNormal& l) { return std::exp(l.mu + l.sigma * l.sigma / 2); },
                               [](const SplineCdf& s) {
                                 // E[X] = x0 + integral of (1 - F) over [x0, xn], Simpson per piece
                                 if (s.knots.empty()) return 0.0;
                                 double acc = s.knots.front();
                                 for (std::size_t i = 0; i + 1 < s.knots.size(); ++i) {
                                   const double a = s.knots[i], b = s.knots[i + 1];
                                   constexpr int steps = 16;
                                   const double w = (b - a) / steps;
                                   double sum = 0;
                                   for (int k = 0; k <= steps; ++k) {
                                     const double f = 1 - s(a + k * w);
                                     sum += f * (k == 0 || k == steps ? 1 : (k % 2 ? 4 : 2));
                                   }
                                   acc += sum * w / 3;
                                 }
                                 return acc;
                               },
                               [](const Empirical& e) {
                                 double sum = 0;
                                 for (double v : e.samples) sum += v;
                                 return e.samples.empty() ? 0.0 : sum / static_cast<double>(e.samples.size());
                               }},
                    d);
}

void check(const FittedDistribution& d) {
  std::visit(Overloaded{[](const Exponential& e) {
                          if (!(e.rate > 0) || !std::isfinite(e.rate)) throw FitError("exponential rate must be positive");
                        },
                        [](const LogNormal& l) {
                          if (!std::isfinite(l.mu) || !(l.sigma > 0) || !std::isfinite(l.sigma)) {
                            throw FitError("lognormal needs finite mu and positive sigma");
                          }
                        },
                        [](const SplineCdf& s) {
                          if (s.knots.size() < 2 || s.values.size() != s.knots.size() || s.slopes.size() != s.knots.size()) {
                            throw FitError("spline CDF needs matching knots, values and slopes (at least two)");
                          }
                          for (std::size_t i = 0; i < s.knots.size(); ++i) {
                            if (!std::isfinite(s.knots[i]) || s.values[i] < 0 || s.values[i] > 1) {
                              throw FitError("spline CDF values must lie in [0, 1]");
                            }
                            if (i && (s.knots[i] <= s.knots[i - 1] || s.values[i] < s.values[i - 1])) {
                              throw FitError("spline CDF knots must increase and values must not decrease");
                            }
                          }
                        },
                        [](const Empirical& e) {
                          if (e.samples.empty()) throw FitError("empirical distribution needs at least one sample");
                          if (!std::is_sorted(e.samples.begin(), e.samples.end())) {
                            throw FitError("empirical samples must be sorted");
                          }
                        }},
             d);
}

nlohmann::json to_json(const FittedDistribution& d) {
  return std::visit(Overloaded{[](const Exponential& e) { return nlohmann::json{{"type", "exponential"}, {"rate", e.rate}}; },
                               [](const LogNormal& l) {
                                 return nlohmann::json{{"type", "lognormal"}, {"mu", l.mu}, {"sigma", l.sigma}};
                               },
                               [](const SplineCdf& s) {
                                 return nlohmann::json{{"type", "spline_cdf"}, {"knots", s.knots}, {"values", s.values},
                                                       {"slopes", s.slopes}};
                               },
                               [](const Empirical& e) { return nlohmann::json{{"type", "empirical"}, {"samples", e.samples}}; }},
                    d);
}

FittedDistribution distribution_from_json(const nlohmann::json& j) {
  FittedDistribution d;
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "exponential") {
      d = Exponential{j.at("rate").get<double>()};
    } else if (type == "lognormal") {
      d = LogNormal{j.at("mu").get<double>(), j.at("sigma").get<double>()};
    } else if (type == "spline_cdf") {
      auto knots = j.at("knots").get<std::vector<double>>();
      auto values = j.at("values").get<std::vector<double>>();
      if (j.contains("slopes")) {
        d = SplineCdf{std::move(knots), std::move(values), j.at("slopes").get<std::vector<double>>()};
      } else {
        d = SplineCdf::through(std::move(knots), std::move(values));
      }
    } else if (type == "empirical") {
      auto s = j.at("samples").get<std::vector<double>>();
      std::sort(s.begin(), s.end());
      d = Empirical{std::move(s)};
    } else {
      throw FitError("unknown distribution type '" + type + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FitError(std::string("bad distribution: ") + e.what());
  }
  check(d);
  return d;
}

}  // namespace tracebench
