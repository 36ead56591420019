#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "qs/bench/cowichan.hpp"

// Straight-line sequential versions. They deliberately take different routes
// from the parallel kernels (no histogram, one global sort, hypot).
namespace qs::bench::reference {

IntMatrix randmat(std::size_t nr, std::uint32_t seed) {
  if (nr == 0) throw std::invalid_argument("randmat: nr must be positive");
  IntMatrix m(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    std::uint64_t state = (static_cast<std::uint64_t>(seed) + r) % (1ull << 32);
    for (std::size_t c = 0; c < nr; ++c) {
      state = (1664525ull * state + 1013904223ull) % (1ull << 32);
      m.at(r, c) = static_cast<int>(state % 100);
    }
  }
  return m;
}

BoolMask thresh(const IntMatrix& m, int percent) {
  if (percent <= 0 || percent > 100) throw std::invalid_argument("thresh: bad percent");
  const std::size_t cells = m.nr * m.nr;
  const std::size_t need = (cells * static_cast<std::size_t>(percent) + 99) / 100;
  std::vector<int> desc(m.cells);
  std::sort(desc.begin(), desc.end(), std::greater<>());
  // The need-th largest value is the highest cut that keeps `need` cells.
  const int t = need == 0 ? desc.front() + 1 : desc[need - 1];
  BoolMask mask(m.nr);
  for (std::size_t i = 0; i < cells; ++i) mask.cells[i] = m.cells[i] >= t;
  return mask;
}

PointList winnow(const IntMatrix& m, const BoolMask& mask, std::size_t nw) {
  if (mask.nr != m.nr) throw DimensionMismatch("winnow: mask and matrix sizes differ");
  struct Cand {
    int value, row, col;
  };
  std::vector<Cand> all;
  for (std::size_t r = 0; r < m.nr; ++r) {
    for (std::size_t c = 0; c < m.nr; ++c) {
      if (mask.at(r, c)) all.push_back({m.at(r, c), static_cast<int>(r), static_cast<int>(c)});
    }
  }
  if (nw == 0 || all.size() < nw) throw InsufficientCandidates("winnow: too few candidates");
  std::sort(all.begin(), all.end(), [](const Cand& a, const Cand& b) {
    if (a.value != b.value) return a.value < b.value;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  PointList out;
  for (std::size_t i = 0; i < nw; ++i) {
    const Cand& c = all[i * all.size() / nw];
    out.push_back({c.row, c.col});
  }
  return out;
}

std::pair<RealMatrix, std::vector<double>> outer(const PointList& pts) {
  const std::size_t n = pts.size();
  if (n == 0) throw std::invalid_argument("outer: empty point list");
  RealMatrix m(n);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    double top = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      m.at(i, j) = std::hypot(double(pts[i].row - pts[j].row), double(pts[i].col - pts[j].col));
      top = std::max(top, m.at(i, j));
    }
    m.at(i, i) = top * static_cast<double>(n);
    v[i] = std::hypot(double(pts[i].row), double(pts[i].col));
  }
  return {m, v};
}

std::vector<double> product(const RealMatrix& m, const std::vector<double>& v) {
  if (m.nr != v.size()) throw DimensionMismatch("product: dimension mismatch");
  std::vector<double> out(m.nr, 0.0);
  for (std::size_t r = 0; r < m.nr; ++r) {
    for (std::size_t c = 0; c < m.nr; ++c) out[r] += m.at(r, c) * v[c];
  }
  return out;
}

std::vector<double> chain(const ChainParams& p) {
  const IntMatrix m = randmat(p.nr, p.seed);
  const PointList pts = winnow(m, thresh(m, p.percent), p.nw);
  const auto [om, ov] = outer(pts);
  return product(om, ov);
}

}  // namespace qs::bench::reference
