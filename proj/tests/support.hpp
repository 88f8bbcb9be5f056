// Shared helpers for the test binaries.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "tracebench/storage.hpp"
#include "tracebench/value.hpp"

namespace tbtest {

namespace fs = std::filesystem;
using tracebench::Row;
using tracebench::Value;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("tracebench_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline bool row_less(const Row& a, const Row& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](const Value& x, const Value& y) {
    return tracebench::total_order(x, y) < 0;
  });
}

inline std::vector<Row> sorted(std::vector<Row> rows) {
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

inline std::string show(const std::vector<Row>& rows, std::size_t limit = 8) {
  std::string out;
  for (std::size_t i = 0; i < rows.size() && i < limit; ++i) {
    out += "(";
    for (std::size_t j = 0; j < rows[i].size(); ++j) out += (j ? "," : "") + tracebench::format_value(rows[i][j]);
    out += ") ";
  }
  if (rows.size() > limit) out += "... (" + std::to_string(rows.size()) + " rows)";
  return out;
}

// Headerless task_events-like CSV with the 13 columns of the public Google
// trace: time, missing, job id, task index, machine, event type, user,
// scheduling class, priority, cpu, ram, disk, constraint. Job ids grow with
// time; most jobs have few tasks, a few have many.
inline void write_task_events(const fs::path& file, std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ofstream out(file, std::ios::binary);
  std::int64_t job = 6000, task = 0, tasks_left = 0;
  std::uint64_t time = 0;
  std::size_t written = 0;
  while (written < rows) {
    if (tasks_left == 0) {
      ++job;
      task = 0;
      const double u = std::uniform_real_distribution<>(0, 1)(rng);
      tasks_left = u < 0.7 ? 1 + static_cast<std::int64_t>(rng() % 3) : 1 + static_cast<std::int64_t>(rng() % 40);
      if (rng() % 50 == 0) job += 5000;  // gaps so that the id filter has work to do
    }
    // A task sometimes appears in several events (submit, schedule, finish).
    const int repeats = 1 + static_cast<int>(rng() % 3);
    for (int r = 0; r < repeats && written < rows; ++r, ++written) {
      time += rng() % 2000000;
      out << time << ",," << job << "," << task << "," << (rng() % 500) << "," << (r == 0 ? 0 : rng() % 6) << ",u"
          << (rng() % 20) << "," << (rng() % 4) << "," << (rng() % 12) << "," << (rng() % 1000) / 1000.0 << ","
          << (rng() % 1000) / 1000.0 << "," << (rng() % 100) / 1000.0 << "," << (rng() % 2) << "\n";
    }
    ++task;
    --tasks_left;
  }
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

}  // namespace tbtest
