#include "qs/bench/cowichan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>

namespace qs::bench {

std::uint64_t thresh_target(std::size_t nr, int percent) {
  if (percent <= 0 || percent > 100) {
    throw std::invalid_argument("thresh: percent must lie in (0, 100]");
  }
  const std::uint64_t cells = static_cast<std::uint64_t>(nr) * nr;
  return (cells * static_cast<std::uint64_t>(percent) + 99) / 100;
}

Team::Team(Runtime& rt, unsigned workers) : client_(rt) {
  if (workers == 0) throw std::invalid_argument("Team: need at least one worker");
  workers_.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) workers_.push_back(rt.spawn<Slot>());
}

std::pair<std::size_t, std::size_t> Team::range(std::size_t rows, unsigned w) const noexcept {
  const std::size_t n = size();
  return {rows * w / n, rows * (w + 1) / n};
}

namespace {

// Slices handed to a worker. Row indices are absolute.
struct RowSlice {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t nr = 0;
  std::vector<int> values;          // rows [begin, end) of the int matrix
  std::vector<std::uint8_t> mask;   // same rows of the mask, when needed
};

using Candidate = std::tuple<int, int, int>;  // value, row, col

template <class T>
std::vector<T> rows_of(const Matrix<T>& m, std::size_t b, std::size_t e) {
  return std::vector<T>(m.cells.begin() + static_cast<std::ptrdiff_t>(b * m.nr),
                        m.cells.begin() + static_cast<std::ptrdiff_t>(e * m.nr));
}

template <class T>
void place_rows(Matrix<T>& m, std::size_t b, const std::vector<T>& rows) {
  std::copy(rows.begin(), rows.end(), m.cells.begin() + static_cast<std::ptrdiff_t>(b * m.nr));
}

double distance(const Point& a, const Point& b) {
  const double dr = static_cast<double>(a.row) - b.row;
  const double dc = static_cast<double>(a.col) - b.col;
  return std::sqrt(dr * dr + dc * dc);
}

}  // namespace

IntMatrix randmat(Team& team, std::size_t nr, std::uint32_t seed) {
  if (nr == 0) throw std::invalid_argument("randmat: nr must be positive");
  team.compute([&team, nr, seed](unsigned w, std::any& data) {
    const auto [b, e] = team.range(nr, w);
    std::vector<int> rows((e - b) * nr);
    for (std::size_t r = b; r < e; ++r) {
      std::uint32_t state = seed + static_cast<std::uint32_t>(r);
      int* out = rows.data() + (r - b) * nr;
      for (std::size_t c = 0; c < nr; ++c) {
        state = kLcgMul * state + kLcgAdd;
        out[c] = static_cast<int>(state % 100u);
      }
    }
    data = std::move(rows);
  });
  IntMatrix m(nr);
  auto parts = team.gather<std::vector<int>>(
      [](unsigned, std::any& data) { return std::move(std::any_cast<std::vector<int>&>(data)); });
  for (unsigned w = 0; w < team.size(); ++w) place_rows(m, team.range(nr, w).first, parts[w]);
  return m;
}

BoolMask thresh(Team& team, const IntMatrix& m, int percent) {
  const std::uint64_t target = thresh_target(m.nr, percent);
  const std::size_t nr = m.nr;
  if (std::any_of(m.cells.begin(), m.cells.end(), [](int v) { return v < 0 || v >= 100; })) {
    throw std::invalid_argument("thresh: values must lie in [0, 100)");
  }
  team.scatter([&](unsigned w) {
    const auto [b, e] = team.range(nr, w);
    return RowSlice{b, e, nr, rows_of(m, b, e), {}};
  });

  team.compute([](unsigned, std::any& data) {
    RowSlice slice = std::move(std::any_cast<RowSlice&>(data));
    std::vector<std::uint64_t> hist(100, 0);
    for (int v : slice.values) ++hist[static_cast<std::size_t>(v)];
    data = std::make_pair(std::move(slice), std::move(hist));
  });
  auto hists = team.gather<std::vector<std::uint64_t>>([](unsigned, std::any& data) {
    return std::any_cast<std::pair<RowSlice, std::vector<std::uint64_t>>&>(data).second;
  });
  std::array<std::uint64_t, 100> total{};
  for (const auto& h : hists) {
    for (std::size_t v = 0; v < 100; ++v) total[v] += h[v];
  }
  // Largest threshold that still lets `target` cells through.
  int t = 0;
  std::uint64_t at_or_above = 0;
  for (int v = 99; v >= 0; --v) {
    at_or_above += total[static_cast<std::size_t>(v)];
    if (at_or_above >= target) {
      t = v;
      break;
    }
  }

  team.compute([t](unsigned, std::any& data) {
    auto& s = std::any_cast<std::pair<RowSlice, std::vector<std::uint64_t>>&>(data).first;
    s.mask.resize(s.values.size());
    for (std::size_t i = 0; i < s.values.size(); ++i) s.mask[i] = s.values[i] >= t ? 1 : 0;
  });
  BoolMask mask(nr);
  auto parts = team.gather<std::vector<std::uint8_t>>([](unsigned, std::any& data) {
    return std::move(std::any_cast<std::pair<RowSlice, std::vector<std::uint64_t>>&>(data).first.mask);
  });
  for (unsigned w = 0; w < team.size(); ++w) place_rows(mask, team.range(nr, w).first, parts[w]);
  return mask;
}

PointList winnow(Team& team, const IntMatrix& m, const BoolMask& mask, std::size_t nw) {
  if (mask.nr != m.nr) throw DimensionMismatch("winnow: mask and matrix sizes differ");
  if (nw == 0) throw std::invalid_argument("winnow: nw must be positive");
  const std::size_t nr = m.nr;
  team.scatter([&](unsigned w) {
    const auto [b, e] = team.range(nr, w);
    return RowSlice{b, e, nr, rows_of(m, b, e), rows_of(mask, b, e)};
  });
  team.compute([](unsigned, std::any& data) {
    auto& s = std::any_cast<RowSlice&>(data);
    std::vector<Candidate> found;
    for (std::size_t r = s.begin; r < s.end; ++r) {
      for (std::size_t c = 0; c < s.nr; ++c) {
        const std::size_t i = (r - s.begin) * s.nr + c;
        if (s.mask[i]) found.emplace_back(s.values[i], static_cast<int>(r), static_cast<int>(c));
      }
    }
    std::sort(found.begin(), found.end());
    data = std::move(found);
  });
  auto runs = team.gather<std::vector<Candidate>>([](unsigned, std::any& data) {
    return std::move(std::any_cast<std::vector<Candidate>&>(data));
  });
  std::vector<Candidate> sorted;
  for (auto& run : runs) {
    std::vector<Candidate> merged;
    merged.reserve(sorted.size() + run.size());
    std::merge(sorted.begin(), sorted.end(), run.begin(), run.end(), std::back_inserter(merged));
    sorted = std::move(merged);
  }
  if (sorted.size() < nw) {
    throw InsufficientCandidates("winnow: " + std::to_string(sorted.size()) +
                                 " candidates for nw = " + std::to_string(nw));
  }
  PointList out;
  out.reserve(nw);
  for (std::size_t i = 0; i < nw; ++i) {
    const auto& [v, r, c] = sorted[i * sorted.size() / nw];
    out.push_back(Point{r, c});
  }
  return out;
}

std::pair<RealMatrix, std::vector<double>> outer(Team& team, const PointList& pts) {
  const std::size_t n = pts.size();
  if (n == 0) throw std::invalid_argument("outer: empty point list");
  team.scatter([&](unsigned) { return pts; });
  team.compute([&team, n](unsigned w, std::any& data) {
    const auto pts = std::any_cast<PointList>(data);
    const auto [b, e] = team.range(n, w);
    std::vector<double> rows((e - b) * n);
    std::vector<double> vec(e - b);
    const Point origin{0, 0};
    for (std::size_t i = b; i < e; ++i) {
      double* row = rows.data() + (i - b) * n;
      double longest = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        row[j] = distance(pts[i], pts[j]);
        longest = std::max(longest, row[j]);
      }
      row[i] = static_cast<double>(n) * longest;
      vec[i - b] = distance(pts[i], origin);
    }
    data = std::make_pair(std::move(rows), std::move(vec));
  });
  using Part = std::pair<std::vector<double>, std::vector<double>>;
  auto parts = team.gather<Part>(
      [](unsigned, std::any& data) { return std::move(std::any_cast<Part&>(data)); });
  RealMatrix m(n);
  std::vector<double> v(n);
  for (unsigned w = 0; w < team.size(); ++w) {
    const std::size_t b = team.range(n, w).first;
    place_rows(m, b, parts[w].first);
    std::copy(parts[w].second.begin(), parts[w].second.end(),
              v.begin() + static_cast<std::ptrdiff_t>(b));
  }
  return {std::move(m), std::move(v)};
}

std::vector<double> product(Team& team, const RealMatrix& m, const std::vector<double>& v) {
  if (m.nr != v.size()) {
    throw DimensionMismatch("product: " + std::to_string(m.nr) + "x" + std::to_string(m.nr) +
                            " matrix with vector of " + std::to_string(v.size()));
  }
  const std::size_t n = m.nr;
  using Part = std::pair<std::vector<double>, std::vector<double>>;  // rows, vector
  team.scatter([&](unsigned w) {
    const auto [b, e] = team.range(n, w);
    return Part{rows_of(m, b, e), v};
  });
  team.compute([n](unsigned, std::any& data) {
    auto& [rows, vec] = std::any_cast<Part&>(data);
    const std::size_t count = n ? rows.size() / n : 0;
    std::vector<double> out(count);
    for (std::size_t r = 0; r < count; ++r) {
      double sum = 0;
      for (std::size_t c = 0; c < n; ++c) sum += rows[r * n + c] * vec[c];
      out[r] = sum;
    }
    data = std::move(out);
  });
  auto parts = team.gather<std::vector<double>>([](unsigned, std::any& data) {
    return std::move(std::any_cast<std::vector<double>&>(data));
  });
  std::vector<double> out;
  out.reserve(n);
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<double> chain(Team& team, const ChainParams& p) {
  const IntMatrix m = randmat(team, p.nr, p.seed);
  const BoolMask mask = thresh(team, m, p.percent);
  const PointList pts = winnow(team, m, mask, p.nw);
  const auto [om, ov] = outer(team, pts);
  return product(team, om, ov);
}

bool close_relative(double a, double b, double tol) {
  if (a == b) return true;
  return std::fabs(a - b) <= tol * std::max(std::fabs(a), std::fabs(b));
}

bool close_relative(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!close_relative(a[i], b[i], tol)) return false;
  }
  return true;
}

}  // namespace qs::bench
