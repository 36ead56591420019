#include <benchmark/benchmark.h>

#include "qs/bench/cowichan.hpp"
#include "qs/channels/mpsc_channel.hpp"
#include "qs/channels/spsc_channel.hpp"
#include "qs/runtime/runtime.hpp"
#include "qs/semantics/checker.hpp"
#include "qs/syncopt/syncopt.hpp"

namespace {

qs::RuntimeConfig arm(qs::Mode mode, bool coalesce) {
  qs::RuntimeConfig c;
  c.mode = mode;
  c.dynamic_coalescing = coalesce;
  c.worker_threads = 1;
  return c;
}

void BM_SpscEnqueueDequeue(benchmark::State& state) {
  // capacity 0 stands for unbounded
  const auto cap = static_cast<std::size_t>(state.range(0));
  qs::SpscChannel<int> ch(cap == 0 ? qs::kUnbounded : cap);
  for (auto _ : state) {
    ch.enqueue(1);
    benchmark::DoNotOptimize(ch.try_dequeue());
  }
}
BENCHMARK(BM_SpscEnqueueDequeue)->ArgName("capacity")->Arg(1024)->Arg(0);

void BM_MpscEnqueueDequeue(benchmark::State& state) {
  qs::MpscChannel<int> ch;
  for (auto _ : state) {
    ch.enqueue(1);
    benchmark::DoNotOptimize(ch.try_dequeue());
  }
}
BENCHMARK(BM_MpscEnqueueDequeue);

struct Cell {
  long v = 0;
};

// Query cost inside one open block: the first sync pays, the rest may not.
void BM_QueryInBlock(benchmark::State& state) {
  qs::Runtime rt(arm(static_cast<qs::Mode>(state.range(0)), state.range(1) != 0));
  const auto h = rt.spawn<Cell>();
  qs::Client c(rt);
  auto s = c.reserve(h);
  for (auto _ : state) benchmark::DoNotOptimize(s.query([](Cell& x) { return x.v; }));
  s.end();
  rt.shutdown();
}
BENCHMARK(BM_QueryInBlock)
    ->ArgNames({"lock", "coalesce"})
    ->Args({static_cast<int>(qs::Mode::kQoQ), 1})
    ->Args({static_cast<int>(qs::Mode::kQoQ), 0})
    ->Args({static_cast<int>(qs::Mode::kLockBaseline), 1})
    ->Args({static_cast<int>(qs::Mode::kLockBaseline), 0});

// One reservation, one async call, end of block.
void BM_ReserveCallEnd(benchmark::State& state) {
  qs::Runtime rt(arm(static_cast<qs::Mode>(state.range(0)), true));
  const auto h = rt.spawn<Cell>();
  qs::Client c(rt);
  for (auto _ : state) {
    auto s = c.reserve(h);
    s.call([](Cell& x) { ++x.v; });
    s.end();
  }
  rt.shutdown();
}
BENCHMARK(BM_ReserveCallEnd)
    ->ArgName("lock")
    ->Arg(static_cast<int>(qs::Mode::kQoQ))
    ->Arg(static_cast<int>(qs::Mode::kLockBaseline));

void BM_SyncSets(benchmark::State& state) {
  std::vector<qs::opt::IrFunction> fs;
  for (std::uint64_t s = 0; s < 64; ++s) fs.push_back(qs::opt::random_function(s));
  for (auto _ : state) {
    for (const auto& f : fs) {
      const auto alias = qs::opt::AliasInfo::of(f);
      benchmark::DoNotOptimize(qs::opt::compute_sync_sets(f, alias));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fs.size()));
}
BENCHMARK(BM_SyncSets);

void BM_ExploreFig1(benchmark::State& state) {
  const auto p = qs::sem::parse_program(R"(
    handler x
    client t1 { separate x { call x.foo; call x.bar } }
    client t2 { separate x { call x.bar; query x.baz } }
  )");
  for (auto _ : state) benchmark::DoNotOptimize(qs::sem::explore(p.initial, p));
}
BENCHMARK(BM_ExploreFig1);

void BM_RandmatReference(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(qs::bench::reference::randmat(static_cast<std::size_t>(state.range(0)), 42));
  }
}
BENCHMARK(BM_RandmatReference)->Arg(500);

void BM_RandmatTeam(benchmark::State& state) {
  qs::RuntimeConfig c;
  c.worker_threads = static_cast<unsigned>(state.range(1));
  qs::Runtime rt(c);
  qs::bench::Team team(rt, c.worker_threads);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qs::bench::randmat(team, static_cast<std::size_t>(state.range(0)), 42));
  }
  rt.shutdown();
}
BENCHMARK(BM_RandmatTeam)->ArgNames({"nr", "threads"})->Args({500, 1})->Args({500, 4});

}  // namespace

BENCHMARK_MAIN();
