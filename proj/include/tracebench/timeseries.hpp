#pragma once

#include <vector>

namespace tracebench {

// Samples at t[k] = k * dt.
struct TimeSeries {
  std::vector<double> t;
  std::vector<double> v;
  double dt = 300;

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }
  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

}  // namespace tracebench
