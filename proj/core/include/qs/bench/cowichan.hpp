#pragma once

#include <any>
#include <chrono>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qs/runtime/runtime.hpp"

namespace qs::bench {

/// Square row-major matrix.
template <class T>
struct Matrix {
  std::size_t nr = 0;
  std::vector<T> cells;

  Matrix() = default;
  explicit Matrix(std::size_t n, T fill = T{}) : nr(n), cells(n * n, fill) {}

  T& at(std::size_t r, std::size_t c) { return cells[r * nr + c]; }
  const T& at(std::size_t r, std::size_t c) const { return cells[r * nr + c]; }
  bool operator==(const Matrix&) const = default;
};

using IntMatrix = Matrix<int>;
using RealMatrix = Matrix<double>;
using BoolMask = Matrix<std::uint8_t>;

struct Point {
  int row = 0;
  int col = 0;
  auto operator<=>(const Point&) const = default;
};
using PointList = std::vector<Point>;

class InsufficientCandidates : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::uint32_t kLcgMul = 1664525u;
inline constexpr std::uint32_t kLcgAdd = 1013904223u;

/// Number of cells that must pass thresh: ceil(p * nr^2 / 100).
std::uint64_t thresh_target(std::size_t nr, int percent);

/// Worker handlers that own slices of the data. A kernel scatters its input
/// to them, runs a timed compute phase on every handler, then gathers.
class Team {
 public:
  Team(Runtime& rt, unsigned workers);

  unsigned size() const noexcept { return static_cast<unsigned>(workers_.size()); }
  Runtime& runtime() const noexcept { return client_.runtime(); }

  /// Contiguous block of `rows` assigned to worker `w`.
  std::pair<std::size_t, std::size_t> range(std::size_t rows, unsigned w) const noexcept;

  /// Stores make(w) in worker w's slot.
  template <class Make>
  void scatter(Make make) {
    for (unsigned w = 0; w < size(); ++w) {
      auto s = client_.reserve(workers_[w]);
      s.call([data = std::any(make(w))](Slot& slot) mutable { slot.data = std::move(data); });
      s.end();
    }
    // Make sure every slot holds its input before compute is timed.
    for (unsigned w = 0; w < size(); ++w) {
      auto s = client_.reserve(workers_[w]);
      s.query([](Slot&) { return 0; });
      s.end();
    }
  }

  /// Runs f(w, slot_data) on every worker's handler; returns elapsed seconds.
  template <class F>
  double compute(F f) {
    const auto start = std::chrono::steady_clock::now();
    std::vector<Session<Slot>> open;
    open.reserve(size());
    for (unsigned w = 0; w < size(); ++w) {
      open.push_back(client_.reserve(workers_[w]));
      open.back().call([w, f](Slot& slot) mutable { f(w, slot.data); });
    }
    for (auto& s : open) {
      s.query([](Slot&) { return 0; });
      s.end();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    compute_seconds_ += elapsed;
    return elapsed;
  }

  /// Moves g(w, slot_data) out of every worker, in worker order.
  template <class R, class G>
  std::vector<R> gather(G g) {
    std::vector<R> out;
    out.reserve(size());
    for (unsigned w = 0; w < size(); ++w) {
      auto s = client_.reserve(workers_[w]);
      out.push_back(s.query([&](Slot& slot) -> R { return g(w, slot.data); }));
      s.end();
    }
    return out;
  }

  /// Total time spent in compute phases so far.
  double compute_seconds() const noexcept { return compute_seconds_; }

 private:
  struct Slot {
    std::any data;
  };

  Client client_;
  std::vector<Handler<Slot>> workers_;
  double compute_seconds_ = 0;
};

// Parallel kernels. Results do not depend on the team size.
IntMatrix randmat(Team& team, std::size_t nr, std::uint32_t seed);
BoolMask thresh(Team& team, const IntMatrix& m, int percent);
PointList winnow(Team& team, const IntMatrix& m, const BoolMask& mask, std::size_t nw);
std::pair<RealMatrix, std::vector<double>> outer(Team& team, const PointList& pts);
std::vector<double> product(Team& team, const RealMatrix& m, const std::vector<double>& v);

struct ChainParams {
  std::size_t nr = 500;
  int percent = 1;
  std::size_t nw = 500;
  std::uint32_t seed = 42;
};
std::vector<double> chain(Team& team, const ChainParams& p);

/// Sequential references, written independently of the kernels above.
namespace reference {
IntMatrix randmat(std::size_t nr, std::uint32_t seed);
BoolMask thresh(const IntMatrix& m, int percent);
PointList winnow(const IntMatrix& m, const BoolMask& mask, std::size_t nw);
std::pair<RealMatrix, std::vector<double>> outer(const PointList& pts);
std::vector<double> product(const RealMatrix& m, const std::vector<double>& v);
std::vector<double> chain(const ChainParams& p);
}  // namespace reference

/// |a - b| <= tol * max(|a|, |b|), with exact equality for zeros.
bool close_relative(double a, double b, double tol = 1e-9);
bool close_relative(const std::vector<double>& a, const std::vector<double>& b,
                    double tol = 1e-9);

}  // namespace qs::bench
