#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "qs/bench/report.hpp"
#include "qs/error.hpp"
#include "qs/semantics/checker.hpp"
#include "qs/syncopt/syncopt.hpp"
#include "suite.hpp"

#ifndef QS_CORPUS_DIR
#define QS_CORPUS_DIR "corpus"
#endif

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kBadInput = 2;
constexpr int kLimit = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

unsigned default_threads() {
  if (const char* env = std::getenv("QS_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "qs: ignoring QS_THREADS=" << env << " (expected a positive integer)\n";
  }
  return 0;
}

struct BenchArgs {
  std::string task;
  std::string mode = "qoq";
  std::string coalesce = "on";
  std::string arm;
  std::string format = "text";
  bool no_header = false;
  std::optional<std::uint64_t> chaos;
  std::string dump;
};

int run_bench(qs::bench::BenchParams p, const BenchArgs& a) {
  p.mode = qs::bench::parse_mode(a.mode);
  p.coalesce = a.coalesce == "on";
  // Arms of the optimization matrix.
  if (a.arm == "none") {
    p.mode = qs::Mode::kLockBaseline;
    p.coalesce = false;
  } else if (a.arm == "dynamic") {
    p.mode = qs::Mode::kLockBaseline;
    p.coalesce = true;
  } else if (a.arm == "qoq") {
    p.mode = qs::Mode::kQoQ;
    p.coalesce = false;
  } else if (a.arm == "all") {
    p.mode = qs::Mode::kQoQ;
    p.coalesce = true;
  }
  p.chaos_seed = a.chaos;
  p.keep_output = !a.dump.empty();
  qs::bench::BenchReport r;
  try {
    r = qs::bench::run_task(a.task, p);
  } catch (const qs::bench::UnknownTask& e) {
    std::cerr << "qs: " << e.what() << "; known tasks:";
    for (const auto& t : qs::bench::task_names()) std::cerr << ' ' << t;
    std::cerr << '\n';
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "qs: " << e.what() << '\n';
    return kBadInput;
  }
  if (!a.dump.empty()) {
    std::ofstream out(a.dump);
    out << r.output;
    if (!out) {
      std::cerr << "qs: cannot write " << a.dump << '\n';
      return kBadInput;
    }
  }
  if (a.format == "json") {
    std::cout << qs::bench::to_json(r) << '\n';
  } else if (a.format == "csv") {
    if (!a.no_header) std::cout << qs::bench::csv_header() << '\n';
    std::cout << qs::bench::to_csv(r) << '\n';
  } else {
    std::cout << qs::bench::to_text(r);
  }
  if (!r.check_passed) {
    std::cerr << "qs: check failed: " << r.detail << '\n';
    return kCheckFailed;
  }
  return kOk;
}

struct CheckArgs {
  std::string path;
  std::size_t max_states = qs::sem::Limits{}.max_states;
  std::size_t max_depth = qs::sem::Limits{}.max_depth;
  bool expect_deadlock = false;
  std::string query_mode = "original";
  bool show_traces = false;
};

int run_check(const CheckArgs& a) {
  using namespace qs::sem;
  const Program p = parse_program(read_file(a.path));
  const QueryMode mode = a.query_mode == "client" ? QueryMode::kClientSide : QueryMode::kOriginal;
  const ExploreResult r = explore(p.initial, p, Limits{a.max_states, a.max_depth}, mode);
  const GuaranteeReport g = check_guarantees(r.traces, p);

  std::cout << "states: " << r.states_visited << '\n';
  std::cout << "traces: " << r.traces.size() << '\n';
  std::cout << "orders: " << handler_projections(r.traces, p).size() << '\n';
  for (HandlerId h : p.handlers()) {
    const auto orders = handler_orders(r.traces, p, h);
    std::cout << "  " << p.names[h] << ": " << orders.size() << " order(s)\n";
    if (a.show_traces) {
      for (const auto& o : orders) {
        std::cout << "    [";
        for (std::size_t i = 0; i < o.size(); ++i) std::cout << (i ? ", " : "") << o[i];
        std::cout << "]\n";
      }
    }
  }
  std::cout << "stuck: " << r.stuck.size() << '\n';
  if (!r.stuck.empty()) std::cout << "  e.g. " << to_string(r.stuck.front(), p) << '\n';
  std::cout << "guarantees: " << (g.ok() ? "ok" : "VIOLATED") << " (" << g.traces_checked
            << " traces checked)\n";
  for (const auto& v : g.violations) std::cout << "  " << v.message << '\n';

  const bool stuck_ok = a.expect_deadlock ? !r.stuck.empty() : r.stuck.empty();
  if (!stuck_ok) {
    std::cerr << "qs: " << (a.expect_deadlock ? "expected a deadlock, found none"
                                              : "program can deadlock")
              << '\n';
  }
  return g.ok() && stuck_ok ? kOk : kCheckFailed;
}

int run_opt(const std::string& path, bool show_sets) {
  using namespace qs::opt;
  const IrFunction f = parse_ir(read_file(path));
  const AliasInfo alias = AliasInfo::of(f);
  const SyncSets sets = compute_sync_sets(f, alias);
  const Removal r = remove_redundant_syncs(f, sets, alias);
  std::cout << print_ir(r.rewritten);
  if (show_sets) {
    for (std::size_t b = 0; b < f.blocks.size(); ++b) {
      std::cout << "synced after " << f.blocks[b].id << ": {";
      bool first = true;
      for (const auto& v : sets[b]) {
        std::cout << (first ? "" : ", ") << v;
        first = false;
      }
      std::cout << "}\n";
    }
  }
  std::cout << "removed: " << r.removed << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Handler runtime benchmarks, semantics checker and sync optimizer", "qs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "qs 0.1.0");

  // bench
  qs::bench::BenchParams params;
  params.threads = default_threads();
  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Run one benchmark task and print its report");
  bench->add_option("task", ba.task, "Task name")->required();
  bench->add_option("--nr", params.nr, "Matrix side (cowichan)")->capture_default_str();
  bench->add_option("--p", params.p, "thresh percent in (0, 100]")->capture_default_str();
  bench->add_option("--nw", params.nw, "winnow point count")->capture_default_str();
  bench->add_option("--n", params.n, "Workers (coordination)")->capture_default_str();
  bench->add_option("--m", params.m, "Iterations per worker")->capture_default_str();
  bench->add_option("--nt", params.nt, "threadring token passes")->capture_default_str();
  bench->add_option("--ring", params.ring, "threadring ring size")->capture_default_str();
  bench->add_option("--nc", params.nc, "chameneos meetings")->capture_default_str();
  bench->add_option("--creatures", params.creatures, "chameneos creatures")->capture_default_str();
  bench->add_option("--nq", params.nq, "queryloop queries")->capture_default_str();
  bench->add_option("--threads", params.threads, "Worker threads; 0 = CPU count (env QS_THREADS)")
      ->capture_default_str();
  bench->add_option("--seed", params.seed, "RNG seed")->capture_default_str();
  bench->add_option("--mode", ba.mode, "Handler mode")
      ->check(CLI::IsMember({"qoq", "lock"}))
      ->capture_default_str();
  bench->add_option("--dynamic-coalesce", ba.coalesce, "Dynamic sync coalescing")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  bench->add_option("--arm", ba.arm, "Shorthand: none, dynamic, qoq or all (overrides --mode and --dynamic-coalesce)")
      ->check(CLI::IsMember({"none", "dynamic", "qoq", "all"}));
  bench->add_option("--chaos-seed", ba.chaos, "Randomize runtime scheduling points");
  bench->add_option("--format", ba.format, "Output format")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  bench->add_flag("--no-header", ba.no_header, "Omit the CSV header line");
  bench->add_option("--dump", ba.dump, "Write the full result to this file as text");

  // check
  CheckArgs ca;
  auto* check = app.add_subcommand("check", "Explore every interleaving of a program");
  check->add_option("path", ca.path, "Program file (.scq)")->required();
  check->add_option("--max-states", ca.max_states, "State limit")->capture_default_str();
  check->add_option("--max-depth", ca.max_depth, "Depth limit")->capture_default_str();
  check->add_flag("--expect-deadlock", ca.expect_deadlock, "Succeed only if some run gets stuck");
  check->add_option("--query-mode", ca.query_mode, "QUERY rule variant")
      ->check(CLI::IsMember({"original", "client"}))
      ->capture_default_str();
  check->add_flag("--show-orders", ca.show_traces, "List every handler order");

  // opt
  std::string opt_path;
  bool show_sets = false;
  auto* opt = app.add_subcommand("opt", "Remove redundant syncs from an IR function");
  opt->add_option("path", opt_path, "IR file (.qir)")->required();
  opt->add_flag("--sets", show_sets, "Print the sync set after each block");

  // suite
  qs::suite::Options so;
  so.corpus_dir = QS_CORPUS_DIR;
  so.threads = default_threads();
  auto* suite = app.add_subcommand("suite", "Run the acceptance criteria");
  suite->add_flag("--quick", so.quick, "Correctness criteria only");
  suite->add_flag("--break-coalescing", so.break_coalescing,
                  "Negative control: run the all-optimizations arm without coalescing");
  suite->add_option("--corpus", so.corpus_dir, "Directory with the bundled programs")
      ->capture_default_str();
  suite->add_option("--threads", so.threads, "Worker threads; 0 = CPU count")->capture_default_str();
  suite->add_option("--repetitions", so.repetitions, "Coordination repetitions")
      ->capture_default_str();
  suite->add_option("--only", so.only, "Run only these criteria")
      ->check(CLI::IsMember(qs::suite::criterion_ids()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kBadInput;
  }

  try {
    if (*bench) return run_bench(params, ba);
    if (*check) return run_check(ca);
    if (*opt) return run_opt(opt_path, show_sets);
    if (*suite) {
      const auto results = qs::suite::run_suite(so, [](const qs::suite::CriterionResult& r) {
        std::cout << qs::suite::format(r) << std::endl;
      });
      std::cout << qs::suite::summary(results) << '\n';
      return qs::suite::passed(results) ? kOk : kCheckFailed;
    }
  } catch (const qs::ParseError& e) {
    std::cerr << "qs: parse error at " << e.what() << '\n';
    return kBadInput;
  } catch (const qs::sem::LimitExceeded& e) {
    std::cerr << "qs: " << e.what() << '\n';
    return kLimit;
  } catch (const std::exception& e) {
    std::cerr << "qs: " << e.what() << '\n';
    return kBadInput;
  }
  return kOk;
}
