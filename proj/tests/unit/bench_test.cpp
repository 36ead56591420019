#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "qs/bench/coordination.hpp"
#include "qs/bench/cowichan.hpp"
#include "qs/bench/report.hpp"

namespace {

using namespace qs::bench;

qs::RuntimeConfig config(unsigned threads, std::optional<std::uint64_t> chaos = {},
                         qs::Mode mode = qs::Mode::kQoQ) {
  qs::RuntimeConfig c;
  c.worker_threads = threads;
  c.chaos_seed = chaos;
  c.mode = mode;
  c.fiber_stack_size = 64 * 1024;
  return c;
}

IntMatrix matrix(std::size_t nr, std::vector<int> cells) {
  IntMatrix m(nr);
  m.cells = std::move(cells);
  return m;
}

// Runs f(team) on a fresh runtime with `threads` workers and team size.
template <class F>
auto with_team(unsigned threads, F f) {
  qs::Runtime rt(config(threads));
  Team team(rt, threads);
  auto out = f(team);
  rt.shutdown();
  return out;
}

// ---------------------------------------------------------------------------
// randmat

TEST(Randmat, SingleCellIsOneLcgStep) {
  const std::uint64_t expected = (1664525ull * 0 + 1013904223ull) % 4294967296ull % 100;
  ASSERT_EQ(expected, 23u);
  const IntMatrix m = with_team(1, [](Team& t) { return randmat(t, 1, 0); });
  EXPECT_EQ(m.cells, std::vector<int>{23});
}

TEST(Randmat, RowsSeedIndependently) {
  // Row r restarts from seed + r; worked by hand for the first two steps.
  const IntMatrix m = with_team(2, [](Team& t) { return randmat(t, 2, 1); });
  auto step = [](std::uint64_t s) { return (1664525ull * s + 1013904223ull) % 4294967296ull; };
  EXPECT_EQ(m.at(0, 0), static_cast<int>(step(1) % 100));
  EXPECT_EQ(m.at(0, 1), static_cast<int>(step(step(1)) % 100));
  EXPECT_EQ(m.at(1, 0), static_cast<int>(step(2) % 100));
  EXPECT_EQ(m.at(1, 1), static_cast<int>(step(step(2)) % 100));
}

TEST(Randmat, ValuesInRange) {
  const IntMatrix m = with_team(3, [](Team& t) { return randmat(t, 97, 9); });
  EXPECT_TRUE(std::all_of(m.cells.begin(), m.cells.end(), [](int v) { return v >= 0 && v < 100; }));
}

// ---------------------------------------------------------------------------
// thresh

TEST(Thresh, TargetIsCeiling) {
  EXPECT_EQ(thresh_target(10, 1), 1u);
  EXPECT_EQ(thresh_target(500, 1), 2500u);
  EXPECT_EQ(thresh_target(3, 50), 5u);  // 4.5 rounds up
  EXPECT_THROW(thresh_target(3, 0), std::invalid_argument);
  EXPECT_THROW(thresh_target(3, 101), std::invalid_argument);
}

TEST(Thresh, HandExamples) {
  const IntMatrix m = matrix(2, {10, 20, 30, 40});
  auto run = [&](int p) { return with_team(2, [&](Team& t) { return thresh(t, m, p).cells; }); };
  EXPECT_EQ(run(25), (std::vector<std::uint8_t>{0, 0, 0, 1}));
  EXPECT_EQ(run(26), (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(run(50), (std::vector<std::uint8_t>{0, 0, 1, 1}));
  EXPECT_EQ(run(100), (std::vector<std::uint8_t>{1, 1, 1, 1}));
}

TEST(Thresh, TiesAtTheCutAllPass) {
  const IntMatrix m = matrix(2, {5, 5, 5, 1});
  const auto mask = with_team(1, [&](Team& t) { return thresh(t, m, 25); });
  EXPECT_EQ(mask.cells, (std::vector<std::uint8_t>{1, 1, 1, 0}));
}

TEST(Thresh, AllEqualMatrixPassesEverything) {
  const IntMatrix m(20, 7);
  const auto mask = with_team(4, [&](Team& t) { return thresh(t, m, 1); });
  EXPECT_EQ(mask, BoolMask(20, 1));
}

TEST(Thresh, RejectsOutOfRangeValues) {
  const IntMatrix m = matrix(1, {100});
  EXPECT_THROW(with_team(1, [&](Team& t) { return thresh(t, m, 50); }), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// winnow

TEST(Winnow, SortsByValueThenPosition) {
  const IntMatrix m = matrix(2, {3, 1, 1, 2});
  const BoolMask all(2, 1);
  const auto pts = with_team(2, [&](Team& t) { return winnow(t, m, all, 4); });
  EXPECT_EQ(pts, (PointList{{0, 1}, {1, 0}, {1, 1}, {0, 0}}));
}

TEST(Winnow, SingleSelectionIsMinimum) {
  const IntMatrix m = matrix(2, {3, 1, 0, 2});
  const BoolMask mask = [] {
    BoolMask b(2, 1);
    b.at(1, 0) = 0;
    return b;
  }();
  const auto pts = with_team(1, [&](Team& t) { return winnow(t, m, mask, 1); });
  EXPECT_EQ(pts, (PointList{{0, 1}}));
}

TEST(Winnow, StrideSelection) {
  // Five candidates, nw = 2: indices floor(0*5/2) = 0 and floor(1*5/2) = 2.
  const IntMatrix m = matrix(3, {0, 1, 2, 3, 4, 50, 60, 70, 80});
  BoolMask mask(3, 0);
  for (int i = 0; i < 5; ++i) mask.cells[i] = 1;
  const auto pts = with_team(3, [&](Team& t) { return winnow(t, m, mask, 2); });
  EXPECT_EQ(pts, (PointList{{0, 0}, {0, 2}}));
}

TEST(Winnow, Errors) {
  const IntMatrix m = matrix(2, {1, 2, 3, 4});
  BoolMask mask(2, 0);
  mask.cells[0] = 1;
  EXPECT_THROW(with_team(1, [&](Team& t) { return winnow(t, m, mask, 2); }),
               InsufficientCandidates);
  EXPECT_THROW(with_team(1, [&](Team& t) { return winnow(t, m, BoolMask(3, 1), 1); }),
               DimensionMismatch);
}

// ---------------------------------------------------------------------------
// outer, product

TEST(Outer, SinglePoint) {
  const auto [m, v] = with_team(1, [](Team& t) { return outer(t, {{3, 4}}); });
  EXPECT_EQ(m.cells, std::vector<double>{0.0});
  EXPECT_EQ(v, std::vector<double>{5.0});
}

TEST(Outer, IdenticalPoints) {
  const auto [m, v] = with_team(2, [](Team& t) { return outer(t, {{1, 1}, {1, 1}}); });
  EXPECT_EQ(m.cells, std::vector<double>(4, 0.0));
  EXPECT_DOUBLE_EQ(v[0], std::sqrt(2.0));
}

TEST(Outer, ThreeFourFive) {
  // d(a,b) = 5, d(a,c) = 4, d(b,c) = 3; diagonal = 3 * row max.
  const auto [m, v] = with_team(2, [](Team& t) { return outer(t, {{0, 0}, {3, 4}, {0, 4}}); });
  EXPECT_EQ(m.cells, (std::vector<double>{15, 5, 4, 5, 15, 3, 4, 3, 12}));
  EXPECT_EQ(v, (std::vector<double>{0, 5, 4}));
}

TEST(Product, IdentityAndZero) {
  RealMatrix id(3);
  for (std::size_t i = 0; i < 3; ++i) id.at(i, i) = 1;
  const std::vector<double> v{1.5, -2, 7};
  EXPECT_EQ(with_team(2, [&](Team& t) { return product(t, id, v); }), v);
  RealMatrix full(3, 2.5);
  EXPECT_EQ(with_team(2, [&](Team& t) { return product(t, full, std::vector<double>(3, 0.0)); }),
            std::vector<double>(3, 0.0));
  EXPECT_THROW(with_team(1, [&](Team& t) { return product(t, id, {1, 2}); }), DimensionMismatch);
}

TEST(CloseRelative, Tolerance) {
  EXPECT_TRUE(close_relative(1.0, 1.0 + 1e-10));
  EXPECT_FALSE(close_relative(1.0, 1.0 + 1e-8));
  EXPECT_TRUE(close_relative(0.0, 0.0));
  EXPECT_FALSE(close_relative(0.0, 1e-300));
}

// ---------------------------------------------------------------------------
// Properties: thread independence and oracle equivalence

TEST(CowichanProperties, IdenticalAcrossTeamSizes) {
  const ChainParams p{100, 5, 100, 42};
  std::optional<std::uint64_t> first[6];
  for (unsigned threads : {1u, 2u, 4u, 8u}) {
    with_team(threads, [&](Team& t) {
      const IntMatrix m = randmat(t, p.nr, p.seed);
      const BoolMask mask = thresh(t, m, p.percent);
      const PointList pts = winnow(t, m, mask, p.nw);
      const auto [om, ov] = outer(t, pts);
      const std::uint64_t sums[6] = {checksum(m),  checksum(mask), checksum(pts),
                                     checksum(om), checksum(product(t, om, ov)),
                                     checksum(chain(t, p))};
      for (int k = 0; k < 6; ++k) {
        if (!first[k]) first[k] = sums[k];
        EXPECT_EQ(*first[k], sums[k]) << "stage " << k << " threads " << threads;
      }
      return 0;
    });
  }
}

TEST(CowichanProperties, MatchesSequentialReferenceAt500) {
  const ChainParams p{500, 1, 500, 42};
  const IntMatrix rm = reference::randmat(p.nr, p.seed);
  const BoolMask rmask = reference::thresh(rm, p.percent);
  const PointList rpts = reference::winnow(rm, rmask, p.nw);
  const auto [rom, rov] = reference::outer(rpts);
  const auto rprod = reference::product(rom, rov);
  for (unsigned threads : {1u, 4u}) {
    with_team(threads, [&](Team& t) {
      EXPECT_EQ(randmat(t, p.nr, p.seed), rm);
      EXPECT_EQ(thresh(t, rm, p.percent), rmask);
      EXPECT_EQ(winnow(t, rm, rmask, p.nw), rpts);
      const auto [om, ov] = outer(t, rpts);
      EXPECT_TRUE(close_relative(om.cells, rom.cells));
      EXPECT_TRUE(close_relative(ov, rov));
      EXPECT_TRUE(close_relative(product(t, rom, rov), rprod));
      EXPECT_TRUE(close_relative(chain(t, p), reference::chain(p)));
      return 0;
    });
  }
}

TEST(CowichanProperties, SmallChainMatchesReference) {
  const ChainParams p{4, 100, 4, 7};
  const auto got = with_team(2, [&](Team& t) { return chain(t, p); });
  EXPECT_TRUE(close_relative(got, reference::chain(p)));
}

TEST(CowichanProperties, ComputeTimeExcludesScatter) {
  qs::Runtime rt(config(2));
  Team team(rt, 2);
  EXPECT_EQ(team.compute_seconds(), 0.0);
  const double phase = team.compute([](unsigned, std::any& d) { d = 1; });
  EXPECT_GE(phase, 0.0);
  EXPECT_DOUBLE_EQ(team.compute_seconds(), phase);
  team.scatter([](unsigned w) { return static_cast<int>(w); });
  EXPECT_DOUBLE_EQ(team.compute_seconds(), phase);
  rt.shutdown();
}

// ---------------------------------------------------------------------------
// Coordination

template <class F>
auto on_runtime(F f, qs::RuntimeConfig c = config(2)) {
  qs::Runtime rt(c);
  auto out = f(rt);
  rt.shutdown();
  return out;
}

TEST(Coordination, Mutex) {
  EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return mutex(rt, 1, 1); }), 1u);
  EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return mutex(rt, 4, 1000); }), 4000u);
}

TEST(Coordination, ProdCons) {
  const auto small = on_runtime([](qs::Runtime& rt) { return prodcons(rt, 1, 3); });
  EXPECT_EQ(small.histogram, (std::vector<std::uint64_t>{0, 1, 1, 1}));
  const auto big = on_runtime([](qs::Runtime& rt) { return prodcons(rt, 4, 100); });
  EXPECT_EQ(big.sum, 20200u);
  EXPECT_EQ(big.count, 400u);
}

TEST(Coordination, Condition) {
  EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return condition(rt, 1, 1); }), 2u);
  EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return condition(rt, 2, 5); }), 20u);
}

TEST(Coordination, ThreadRing) {
  EXPECT_EQ(threadring_oracle(3, 3), 1u);
  EXPECT_EQ(threadring_oracle(503, 1000), 498u);
  EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return threadring(rt, 3, 3); }), 1u);
  EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return threadring(rt, 503, 1000); }), 498u);
  EXPECT_THROW(on_runtime([](qs::Runtime& rt) { return threadring(rt, 1, 5); }),
               std::invalid_argument);
}

TEST(Coordination, ComplementTable) {
  using C = Colour;
  EXPECT_EQ(complement(C::kBlue, C::kBlue), C::kBlue);
  EXPECT_EQ(complement(C::kBlue, C::kRed), C::kYellow);
  EXPECT_EQ(complement(C::kRed, C::kBlue), C::kYellow);
  EXPECT_EQ(complement(C::kRed, C::kYellow), C::kBlue);
  EXPECT_EQ(complement(C::kYellow, C::kBlue), C::kRed);
  EXPECT_EQ(complement(C::kYellow, C::kYellow), C::kYellow);
}

TEST(Coordination, Chameneos) {
  using C = Colour;
  const auto r = on_runtime([](qs::Runtime& rt) {
    return chameneos(rt, 10000, {C::kBlue, C::kRed, C::kYellow, C::kBlue});
  });
  EXPECT_EQ(r.tally(), 20000u);
  EXPECT_EQ(r.self_meetings, 0u);
}

TEST(Coordination, QueryLoopElidesAllButOneSync) {
  qs::Runtime rt(config(1));
  const auto r = queryloop(rt, 1000);
  const auto stats = rt.shutdown();
  EXPECT_EQ(r.sum, 1000);
  EXPECT_EQ(stats.sync_roundtrips, 1u);
  EXPECT_EQ(stats.syncs_elided, 999u);
}

TEST(CoordinationProperties, HoldUnderChaosInBothModes) {
  for (auto mode : {qs::Mode::kQoQ, qs::Mode::kLockBaseline}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto c = config(2, seed, mode);
      EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return mutex(rt, 4, 50); }, c), 200u);
      EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return condition(rt, 3, 20); }, c), 120u);
      const auto pc = on_runtime([](qs::Runtime& rt) { return prodcons(rt, 3, 30); }, c);
      EXPECT_EQ(pc.histogram, std::vector<std::uint64_t>({0, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3,
                                                          3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3,
                                                          3, 3, 3, 3, 3}));
      EXPECT_EQ(on_runtime([](qs::Runtime& rt) { return threadring(rt, 7, 100); }, c),
                threadring_oracle(7, 100));
      const auto ch = on_runtime(
          [](qs::Runtime& rt) {
            return chameneos(rt, 300, {Colour::kBlue, Colour::kRed, Colour::kYellow});
          },
          c);
      EXPECT_EQ(ch.tally(), 600u);
    }
  }
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, Fnv1aKnownVectors) {
  Fnv1a empty;
  EXPECT_EQ(empty.value(), 0xcbf29ce484222325ull);
  Fnv1a a;
  const std::uint8_t byte[] = {'a'};
  a.bytes(byte);
  EXPECT_EQ(a.value(), 0xaf63dc4c8601ec8cull);
  // u64 feeds little-endian bytes.
  Fnv1a x, y;
  x.u64(0x0102);
  const std::uint8_t le[] = {2, 1, 0, 0, 0, 0, 0, 0};
  y.bytes(le);
  EXPECT_EQ(x.value(), y.value());
  EXPECT_EQ(hex(0xabcull), "0x0000000000000abc");
}

TEST(Report, JsonFieldsAndTimingSplit) {
  BenchParams p;
  p.n = 2;
  p.m = 10;
  p.threads = 2;
  const BenchReport r = run_task("mutex", p);
  EXPECT_TRUE(r.check_passed) << r.detail;
  const auto j = nlohmann::json::parse(to_json(r));
  for (const char* key : {"task", "mode", "coalescing", "threads", "params", "total_time",
                          "compute_time", "comm_time", "stats", "checksum", "check_passed"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["task"], "mutex");
  EXPECT_EQ(j["stats"]["calls_enqueued"].get<std::uint64_t>() >= 20, true);
  EXPECT_LE(r.compute_time, r.total_time);
  EXPECT_DOUBLE_EQ(r.comm_time, r.total_time - r.compute_time);

  const std::string header = csv_header();
  const std::string row = to_csv(r);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}

TEST(Report, ChainHasComputeSplit) {
  BenchParams p;
  p.nr = 200;
  p.nw = 200;
  p.threads = 2;
  const BenchReport r = run_task("chain", p);
  EXPECT_TRUE(r.check_passed) << r.detail;
  EXPECT_GT(r.compute_time, 0.0);
  EXPECT_LE(r.compute_time, r.total_time);
}

TEST(Report, Errors) {
  EXPECT_THROW(run_task("nope", BenchParams{}), UnknownTask);
  BenchParams bad;
  bad.p = 0;
  EXPECT_THROW(run_task("thresh", bad), std::invalid_argument);
  EXPECT_THROW(parse_mode("fast"), std::invalid_argument);
}

TEST(Report, OutputDumpMatchesReference) {
  BenchParams p;
  p.nr = 7;
  p.threads = 2;
  EXPECT_TRUE(run_task("randmat", p).output.empty());
  p.keep_output = true;
  const BenchReport r = run_task("randmat", p);
  const IntMatrix want = reference::randmat(7, p.seed);
  std::istringstream in(r.output);
  std::vector<int> cells;
  for (int v; in >> v;) cells.push_back(v);
  EXPECT_EQ(cells, want.cells);
  EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 7);
}

TEST(Report, EveryArmRunsEveryTask) {
  BenchParams p;
  p.nr = 60;
  p.nw = 30;
  p.p = 10;
  p.n = 3;
  p.m = 40;
  p.nt = 200;
  p.ring = 11;
  p.nc = 200;
  p.nq = 200;
  p.threads = 2;
  std::map<std::string, std::uint64_t> sums;
  for (auto mode : {qs::Mode::kQoQ, qs::Mode::kLockBaseline}) {
    for (bool coalesce : {false, true}) {
      p.mode = mode;
      p.coalesce = coalesce;
      for (const auto& task : task_names()) {
        const BenchReport r = run_task(task, p);
        EXPECT_TRUE(r.check_passed) << task << ": " << r.detail;
        auto [it, fresh] = sums.emplace(task, r.checksum);
        if (!fresh) EXPECT_EQ(it->second, r.checksum) << task;
      }
    }
  }
}

}  // namespace
