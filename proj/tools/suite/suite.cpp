#include "suite.hpp"

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "qs/bench/report.hpp"
#include "qs/semantics/checker.hpp"
#include "qs/semantics/conformance.hpp"
#include "qs/syncopt/syncopt.hpp"

namespace qs::suite {

namespace {

using Clock = std::chrono::steady_clock;

std::string slurp(const Options& o, const std::string& name) {
  std::ifstream in(o.corpus_dir + "/" + name);
  if (!in) throw std::runtime_error("cannot read " + o.corpus_dir + "/" + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

sem::Program program(const Options& o, const std::string& name) {
  return sem::parse_program(slurp(o, name));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct Verdict {
  bool ok = false;
  std::string detail;
  bool not_applicable = false;
};

// ---------------------------------------------------------------------------

Verdict fig1(const Options& o) {
  const sem::Program p = program(o, "fig1.scq");
  const auto r = sem::explore(p.initial, p);
  const auto orders = sem::handler_orders(r.traces, p, p.find("x"));
  const std::set<std::vector<std::string>> expected = {{"foo", "bar", "bar", "baz"},
                                                       {"bar", "baz", "foo", "bar"}};
  return {orders == expected && r.stuck.empty(),
          "orders: " + std::to_string(orders.size()) + ", stuck: " + std::to_string(r.stuck.size())};
}

Verdict fig6(const Options& o) {
  const sem::Program a = program(o, "fig6_async.scq");
  const sem::Program q = program(o, "fig6_query.scq");
  const auto ra = sem::explore(a.initial, a);
  const auto rq = sem::explore(q.initial, q);
  return {ra.stuck.empty() && !rq.stuck.empty(),
          "async stuck: " + std::to_string(ra.stuck.size()) +
              ", query stuck: " + std::to_string(rq.stuck.size())};
}

Verdict fig5(const Options& o) {
  const sem::Program p = program(o, "fig5.scq");
  const auto r = sem::explore(p.initial, p);
  const sem::HandlerId obs = p.find("observer");
  std::size_t observed = 0;
  bool agree = r.stuck.empty();
  for (const auto& t : r.traces) {
    std::vector<long> reads;
    for (const auto& e : t.events) {
      if (e.client == obs && e.value) reads.push_back(*e.value);
    }
    agree = agree && reads.size() == 2 && reads[0] == reads[1];
    ++observed;
  }
  const auto g = sem::check_guarantees(r.traces, p);
  return {agree && g.ok(), std::to_string(observed) + " terminal traces, colours " +
                               (agree ? "always equal" : "DIFFER") + ", guarantee violations " +
                               std::to_string(g.violations.size())};
}

Verdict conformance(const Options& o) {
  const sem::Program p = program(o, "fig1.scq");
  const auto allowed = sem::handler_projections(sem::explore(p.initial, p).traces, p);
  std::set<sem::Projection> seen;
  std::size_t bad = 0;
  const unsigned runs = 10000;
  for (unsigned s = 0; s < runs; ++s) {
    RuntimeConfig c;
    c.mode = s % 2 ? Mode::kLockBaseline : Mode::kQoQ;
    c.worker_threads = 1 + (s / 2) % 2;
    c.fiber_stack_size = 64 * 1024;
    c.chaos_seed = s;
    const auto got = sem::run_on_runtime(p, c);
    if (!allowed.contains(got)) ++bad;
    seen.insert(got);
  }
  return {bad == 0, std::to_string(runs) + " schedules (both modes, 1 and 2 workers), " + std::to_string(seen.size()) +
                        " distinct orders, " + std::to_string(bad) + " outside the enumeration"};
}

Verdict syncopt_figures(const Options& o) {
  auto removed = [&](const std::string& name) {
    const opt::IrFunction f = opt::parse_ir(slurp(o, name));
    const opt::AliasInfo alias = opt::AliasInfo::of(f);
    return opt::remove_redundant_syncs(f, opt::compute_sync_sets(f, alias), alias).removed;
  };
  const std::size_t a = removed("fig14.qir");
  const std::size_t b = removed("fig15.qir");
  return {a == 2 && b == 0,
          "fig14 removed " + std::to_string(a) + ", fig15 removed " + std::to_string(b)};
}

Verdict syncopt_random(const Options&) {
  std::size_t mismatches = 0, worse = 0, removed = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const opt::IrFunction f = opt::random_function(seed);
    const opt::AliasInfo alias = opt::AliasInfo::of(f);
    const auto r = opt::remove_redundant_syncs(f, opt::compute_sync_sets(f, alias), alias);
    removed += r.removed;
    for (std::uint64_t run = 0; run < 4; ++run) {
      const auto binding = opt::random_binding(f, seed * 31 + run);
      const auto before = opt::interpret(f, binding, run);
      const auto after = opt::interpret(r.rewritten, binding, run);
      if (before.observations != after.observations) ++mismatches;
      if (after.roundtrips > before.roundtrips) ++worse;
    }
  }
  return {mismatches == 0 && worse == 0,
          "1000 functions, " + std::to_string(removed) + " syncs removed, " +
              std::to_string(mismatches) + " behaviour mismatches, " + std::to_string(worse) +
              " runs with more roundtrips"};
}

Verdict coordination(const Options& o) {
  bench::BenchParams p;
  p.n = 32;
  p.m = 20000;
  p.ring = 503;
  p.nt = 600000;
  p.nc = 100000;
  p.creatures = 4;
  p.threads = o.threads;
  std::size_t runs = 0;
  std::string failures;
  for (unsigned k = 0; k < o.repetitions; ++k) {
    // Rotate through all four arms; alternate blocks of four run under
    // randomized scheduling.
    p.mode = k % 2 ? Mode::kLockBaseline : Mode::kQoQ;
    p.coalesce = (k / 2) % 2 == 0;
    p.chaos_seed = (k / 4) % 2 == 0 ? std::optional<std::uint64_t>(k) : std::nullopt;
    for (const char* task : {"mutex", "condition", "prodcons", "threadring", "chameneos"}) {
      const auto r = bench::run_task(task, p);
      ++runs;
      if (!r.check_passed && failures.size() < 400) {
        failures += std::string(" ") + task + "#" + std::to_string(k) + ": " + r.detail + ";";
      }
    }
  }
  return {failures.empty(), std::to_string(o.repetitions) + " repetitions x 5 tasks (n=32, m=20000, " +
                                "nt=600000, nc=100000, all four arms, half under chaos scheduling), " +
                                std::to_string(runs) + " runs" +
                                (failures.empty() ? ", all checks hold" : ";" + failures)};
}

Verdict cowichan(const Options&) {
  bench::BenchParams p;
  p.nr = 500;
  p.p = 1;
  p.nw = 500;
  std::string failures;
  for (unsigned threads : {1u, 2u, 4u, 8u}) {
    p.threads = threads;
    for (const char* task : {"randmat", "thresh", "winnow", "outer", "product", "chain"}) {
      const auto r = bench::run_task(task, p);
      if (!r.check_passed) failures += std::string(" ") + task + "@" + std::to_string(threads) + ";";
    }
  }
  return {failures.empty(), "6 kernels x threads {1,2,4,8} at nr=500, p=1, nw=500" +
                                (failures.empty() ? std::string(", all equal the references")
                                                  : ", mismatches:" + failures)};
}

// Best of three to keep scheduler noise out of the ratio.
bench::BenchReport best_of(const char* task, const bench::BenchParams& p,
                           double bench::BenchReport::*field) {
  bench::BenchReport best = bench::run_task(task, p);
  for (int i = 0; i < 2; ++i) {
    auto r = bench::run_task(task, p);
    if (r.*field < best.*field) best = std::move(r);
  }
  return best;
}

Verdict coalescing(const Options& o) {
  bench::BenchParams p;
  p.nq = 100000;
  p.threads = o.threads;
  p.mode = Mode::kQoQ;
  p.coalesce = !o.break_coalescing;
  const auto all = best_of("queryloop", p, &bench::BenchReport::total_time);
  p.mode = Mode::kLockBaseline;
  p.coalesce = false;
  const auto none = best_of("queryloop", p, &bench::BenchReport::total_time);
  const double ratio = none.total_time / std::max(all.total_time, 1e-9);
  const double elided = static_cast<double>(all.stats.syncs_elided) / static_cast<double>(p.nq);
  return {ratio >= 5.0 && elided >= 0.99 && all.check_passed && none.check_passed,
          "lock+off " + fmt("%.4f", none.total_time) + " s, qoq+" +
              (o.break_coalescing ? "off(broken)" : "on") + " " + fmt("%.4f", all.total_time) +
              " s, speedup " + fmt("%.1f", ratio) + "x (need >= 5), elided " +
              fmt("%.4f", elided) + " of queries (need >= 0.99)"};
}

Verdict scaling(const Options&) {
  bench::BenchParams p;
  p.nr = 2000;
  p.threads = 1;
  const auto one = best_of("randmat", p, &bench::BenchReport::compute_time);
  p.threads = 4;
  const auto four = best_of("randmat", p, &bench::BenchReport::compute_time);
  const double ratio = four.compute_time / std::max(one.compute_time, 1e-12);
  const unsigned cores = std::thread::hardware_concurrency();
  Verdict v{ratio <= 0.6 && one.check_passed && four.check_passed,
            "randmat nr=2000 compute 1 thread " + fmt("%.4f", one.compute_time) + " s, 4 threads " +
                fmt("%.4f", four.compute_time) + " s, ratio " + fmt("%.2f", ratio) +
                " (need <= 0.6)"};
  if (cores < 4) {
    v.not_applicable = true;
    v.detail += "; machine has " + std::to_string(cores) + " hardware thread(s), criterion needs 4";
  }
  return v;
}

struct Criterion {
  const char* id;
  double limit;
  bool performance;
  Verdict (*run)(const Options&);
};

const Criterion kCriteria[] = {
    {"semantics.fig1", 1, false, fig1},
    {"semantics.fig6", 10, false, fig6},
    {"semantics.fig5", 10, false, fig5},
    {"conformance.fig1", 30, false, conformance},
    {"syncopt.figures", 1, false, syncopt_figures},
    {"syncopt.random", 30, false, syncopt_random},
    {"coordination", 120, false, coordination},
    {"cowichan.oracle", 60, false, cowichan},
    {"perf.coalescing", 60, true, coalescing},
    {"perf.scaling", 60, true, scaling},
};

}  // namespace

namespace {

// A criterion that blocks forever would otherwise only show up as a test
// timeout with no output. Past its deadline the watchdog reports it as a
// failure and ends the process, since the stuck work cannot be cancelled.
class Watchdog {
 public:
  Watchdog() : thread_([this] { loop(); }) {}
  ~Watchdog() {
    {
      std::lock_guard lk(m_);
      quit_ = true;
    }
    cv_.notify_all();
    thread_.join();
  }

  void arm(Clock::time_point deadline, std::function<void()> on_expiry) {
    {
      std::lock_guard lk(m_);
      deadline_ = deadline;
      on_expiry_ = std::move(on_expiry);
    }
    cv_.notify_all();
  }

  void disarm() {
    std::lock_guard lk(m_);
    on_expiry_ = nullptr;
  }

 private:
  void loop() {
    std::unique_lock lk(m_);
    while (!quit_) {
      if (!on_expiry_) {
        cv_.wait(lk);
      } else if (cv_.wait_until(lk, deadline_) == std::cv_status::timeout &&
                 on_expiry_ && Clock::now() >= deadline_) {
        on_expiry_();
        std::cout.flush();
        std::_Exit(1);
      }
    }
  }

  std::mutex m_;
  std::condition_variable cv_;
  bool quit_ = false;
  Clock::time_point deadline_;
  std::function<void()> on_expiry_;
  std::thread thread_;
};

}  // namespace

std::vector<CriterionResult> run_suite(const Options& opts,
                                       const std::function<void(const CriterionResult&)>& sink) {
  std::vector<CriterionResult> out;
  Watchdog watchdog;
  for (const Criterion& c : kCriteria) {
    if (!opts.only.empty() &&
        std::find(opts.only.begin(), opts.only.end(), c.id) == opts.only.end()) {
      continue;
    }
    CriterionResult r;
    r.id = c.id;
    r.limit = c.limit;
    if (opts.quick && c.performance) {
      r.outcome = Outcome::kSkipped;
      r.detail = "performance criterion skipped (--quick)";
    } else {
      const auto t0 = Clock::now();
      const double grace = 2 * c.limit + 30;
      watchdog.arm(t0 + std::chrono::duration_cast<Clock::duration>(
                            std::chrono::duration<double>(grace)),
                   [&] {
                     CriterionResult hung = r;
                     hung.outcome = Outcome::kFail;
                     hung.seconds = grace;
                     hung.detail = "no result after " + fmt("%.0f", grace) + " s, aborting the run";
                     if (sink) sink(hung);
                   });
      Verdict v;
      try {
        v = c.run(opts);
      } catch (const std::exception& e) {
        v = {false, std::string("error: ") + e.what()};
      }
      watchdog.disarm();
      r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      const bool in_time = r.seconds <= c.limit;
      r.detail = v.detail;
      if (!in_time) r.detail += "; took longer than " + fmt("%.0f", c.limit) + " s";
      if (v.not_applicable) {
        r.outcome = Outcome::kNotApplicable;
      } else {
        r.outcome = v.ok && in_time ? Outcome::kPass : Outcome::kFail;
      }
    }
    if (sink) sink(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> criterion_ids() {
  std::vector<std::string> ids;
  for (const Criterion& c : kCriteria) ids.emplace_back(c.id);
  return ids;
}

std::string format(const CriterionResult& r) {
  const char* tag = "FAIL";
  switch (r.outcome) {
    case Outcome::kPass: tag = "PASS"; break;
    case Outcome::kFail: tag = "FAIL"; break;
    case Outcome::kNotApplicable: tag = "N/A "; break;
    case Outcome::kSkipped: tag = "SKIP"; break;
  }
  char head[96];
  std::snprintf(head, sizeof head, "[%s] %-18s %8.3fs / %3.0fs  ", tag, r.id.c_str(), r.seconds,
                r.limit);
  return head + r.detail;
}

bool passed(const std::vector<CriterionResult>& results) {
  return std::none_of(results.begin(), results.end(),
                      [](const CriterionResult& r) { return r.outcome == Outcome::kFail; });
}

std::string summary(const std::vector<CriterionResult>& results) {
  std::size_t counts[4] = {};
  for (const auto& r : results) ++counts[static_cast<int>(r.outcome)];
  return std::to_string(counts[0]) + " passed, " + std::to_string(counts[1]) + " failed, " +
         std::to_string(counts[2]) + " not applicable, " + std::to_string(counts[3]) + " skipped";
}

}  // namespace qs::suite
