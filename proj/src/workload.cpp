#include "tracebench/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <boost/math/distributions/normal.hpp>

namespace tracebench {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view name) : key_(mix(seed ^ mix(fnv1a(name)))) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
}

double RngStream::uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

double draw_at(const FittedDistribution& dist, double u) {
  if (const auto* e = std::get_if<Exponential>(&dist)) return -std::log(u) / e->rate;
  if (const auto* l = std::get_if<LogNormal>(&dist)) {
    static const boost::math::normal z(0.0, 1.0);
    return std::exp(l->mu + l->sigma * boost::math::quantile(z, u));
  }
  if (const auto* s = std::get_if<SplineCdf>(&dist)) return s->inverse(u);
  const auto& samples = std::get<Empirical>(dist).samples;
  if (samples.empty()) throw WorkloadError("empirical distribution has no samples");
  const auto i = static_cast<std::size_t>(u * static_cast<double>(samples.size()));
  return samples[std::min(i, samples.size() - 1)];
}

double draw(const FittedDistribution& dist, RngStream& rng) { return draw_at(dist, rng.uniform()); }

std::vector<double> sample(const FittedDistribution& dist, std::size_t n, std::uint64_t seed, std::string_view stream) {
  RngStream rng(seed, stream);
  std::vector<double> out(n);
  for (auto& x : out) x = draw(dist, rng);
  return out;
}

std::int64_t to_count(double x) {
  if (!std::isfinite(x) || x < 1.5) return 1;
  return static_cast<std::int64_t>(std::llround(x));
}

const std::vector<std::string>& WorkloadConfig::slot_names() {
  static const std::vector<std::string> names = {
      "cpu_per_task",     "ram_per_task",     "task_priority",
      "duration_normal_end", "duration_killed", "tasks_per_job",
      "job_interarrival", "machine_failure_interarrival", "machine_cpu",
      "machine_ram"};
  return names;
}

const FittedDistribution& WorkloadConfig::at(const std::string& slot) const {
  const auto it = samplers.find(slot);
  if (it == samplers.end()) throw WorkloadError("workload config is missing sampler '" + slot + "'");
  return it->second;
}

void WorkloadConfig::check() const {
  for (const auto& s : slot_names()) {
    const auto& d = at(s);
    try {
      tracebench::check(d);
    } catch (const std::exception& e) {
      throw WorkloadError("sampler '" + s + "': " + e.what());
    }
  }
  for (const auto& [name, d] : samplers) {
    if (name != "machine_downtime" &&
        std::find(slot_names().begin(), slot_names().end(), name) == slot_names().end()) {
      throw WorkloadError("unknown sampler slot '" + name + "'");
    }
  }
  if (!(memory_cap_fraction > 0 && memory_cap_fraction <= 1)) {
    throw WorkloadError("memory_cap_fraction must lie in (0, 1], got " + std::to_string(memory_cap_fraction));
  }
  if (!(kill_probability >= 0 && kill_probability <= 1)) {
    throw WorkloadError("kill_probability must lie in [0, 1], got " + std::to_string(kill_probability));
  }
}

nlohmann::json to_json(const WorkloadConfig& c) {
  nlohmann::json samplers = nlohmann::json::object();
  for (const auto& [name, d] : c.samplers) samplers[name] = to_json(d);
  return {{"schema", kWorkloadSchema},
          {"seed", c.seed},
          {"memory_cap_fraction", c.memory_cap_fraction},
          {"kill_probability", c.kill_probability},
          {"samplers", samplers}};
}

namespace {

void apply_fields(WorkloadConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw WorkloadError("workload config must be a JSON object");
  try {
    if (j.contains("samplers")) {
      for (const auto& [name, d] : j.at("samplers").items()) {
        try {
          c.samplers.insert_or_assign(name, distribution_from_json(d));
        } catch (const std::exception& e) {
          throw WorkloadError("sampler '" + name + "': " + e.what());
        }
      }
    }
    if (j.contains("memory_cap_fraction")) c.memory_cap_fraction = j.at("memory_cap_fraction").get<double>();
    if (j.contains("kill_probability")) c.kill_probability = j.at("kill_probability").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw WorkloadError(std::string("bad workload config: ") + e.what());
  }
}

}  // namespace

WorkloadConfig workload_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("schema", "") != kWorkloadSchema) {
    throw WorkloadError(std::string("workload config must declare schema \"") + kWorkloadSchema + "\"");
  }
  WorkloadConfig c;
  apply_fields(c, j);
  c.check();
  return c;
}

WorkloadConfig load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw WorkloadError("cannot read workload config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw WorkloadError(path + ": " + e.what());
  }
  return workload_from_json(j);
}

WorkloadConfig build_workload_config(const std::map<std::string, FittedDistribution>& fits,
                                     const nlohmann::json& overrides) {
  WorkloadConfig c;
  for (const auto& [name, d] : fits) c.samplers.insert_or_assign(name, d);
  apply_fields(c, overrides);
  c.check();
  return c;
}

}  // namespace tracebench
