// Samplers over fitted distributions and the simulator's workload config.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracebench/distributions.hpp"

namespace tracebench {

inline constexpr const char* kWorkloadSchema = "tracebench.workload/1";

class WorkloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Counter-based SplitMix64 stream. Draw i of stream (seed, name) depends on
// nothing else, so adding a stream or changing another distribution never
// shifts this one.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view name);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

double draw(const FittedDistribution& dist, RngStream& rng);
double draw_at(const FittedDistribution& dist, double u);
// n draws of dist from the named stream.
std::vector<double> sample(const FittedDistribution& dist, std::size_t n, std::uint64_t seed,
                           std::string_view stream = "sample");

// Nearest integer, at least 1.
std::int64_t to_count(double x);

struct WorkloadConfig {
  static const std::vector<std::string>& slot_names();

  std::map<std::string, FittedDistribution> samplers;  // one per slot, plus optional machine_downtime
  double memory_cap_fraction = 0.5;
  // Fraction of jobs that end killed; their kill time is arrival plus a
  // duration_killed draw.
  double kill_probability = 0.0;
  std::uint64_t seed = 1;

  const FittedDistribution& at(const std::string& slot) const;
  // Throws WorkloadError naming the first missing slot or bad field.
  void check() const;
};

nlohmann::json to_json(const WorkloadConfig& c);
WorkloadConfig workload_from_json(const nlohmann::json& j);
WorkloadConfig load_workload(const std::string& path);

// fits supply slots by name; overrides may carry any config field ("samplers"
// entries, memory_cap_fraction, kill_probability, seed) and win over fits.
WorkloadConfig build_workload_config(const std::map<std::string, FittedDistribution>& fits,
                                     const nlohmann::json& overrides = nlohmann::json::object());

}  // namespace tracebench
