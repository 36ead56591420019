#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qs/bench/cowichan.hpp"
#include "qs/runtime/runtime.hpp"

namespace qs::bench {

/// Workload sizes and runtime arm. Defaults are desk scale.
struct BenchParams {
  std::size_t nr = 1000;
  int p = 1;  // percent, in (0, 100]
  std::size_t nw = 1000;
  unsigned n = 8;
  unsigned m = 2000;
  std::uint64_t nt = 100000;
  unsigned ring = 503;
  std::uint64_t nc = 20000;
  unsigned creatures = 4;
  std::uint64_t nq = 100000;
  unsigned threads = 0;  // 0: hardware concurrency
  std::uint32_t seed = 42;
  Mode mode = Mode::kQoQ;
  bool coalesce = true;
  std::optional<std::uint64_t> chaos_seed;
  bool keep_output = false;  // fill BenchReport::output

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  unsigned resolved_threads() const noexcept;
  RuntimeConfig runtime_config() const;
};

struct BenchReport {
  std::string task;
  BenchParams params;
  double total_time = 0;    // seconds
  double compute_time = 0;  // seconds, after data is in place on the workers
  double comm_time = 0;     // total - compute
  RuntimeStats stats;
  std::uint64_t checksum = 0;
  bool check_passed = false;
  std::string detail;
  std::string output;  // full result as text, only with keep_output
};

class UnknownTask : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

const std::vector<std::string>& task_names();
bool is_cowichan(std::string_view task);

/// Runs one task on a fresh runtime and verifies its result.
BenchReport run_task(std::string_view task, const BenchParams& params);

/// 64-bit FNV-1a over a little-endian byte stream.
class Fnv1a {
 public:
  void bytes(std::span<const std::uint8_t> data) noexcept;
  void u64(std::uint64_t v) noexcept;
  void i64(std::int64_t v) noexcept { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) noexcept;
  std::uint64_t value() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

// Canonical encodings: length prefix as u64, then each element. Ints and
// mask cells are widened to 64 bits; reals go in as their IEEE bits.
std::uint64_t checksum(const IntMatrix& m);
std::uint64_t checksum(const BoolMask& m);
std::uint64_t checksum(const RealMatrix& m);
std::uint64_t checksum(const std::vector<double>& v);
std::uint64_t checksum(const PointList& pts);
std::string hex(std::uint64_t v);

std::string_view to_string(Mode mode) noexcept;
Mode parse_mode(std::string_view s);  // "qoq" or "lock"

std::string to_json(const BenchReport& r);  // one line
std::string csv_header();
std::string to_csv(const BenchReport& r);
std::string to_text(const BenchReport& r);

}  // namespace qs::bench
