#include "qs/bench/report.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <thread>
#include <type_traits>

#include "json.hpp"

#include "qs/bench/coordination.hpp"

namespace qs::bench {

void Fnv1a::bytes(std::span<const std::uint8_t> data) noexcept {
  for (std::uint8_t b : data) {
    h_ ^= b;
    h_ *= 0x100000001b3ull;
  }
}

void Fnv1a::u64(std::uint64_t v) noexcept {
  std::uint8_t le[8];
  for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(v >> (8 * i));
  bytes(le);
}

void Fnv1a::f64(double v) noexcept { u64(std::bit_cast<std::uint64_t>(v)); }

namespace {

template <class T, class Put>
std::uint64_t hash_cells(std::uint64_t nr, const std::vector<T>& cells, Put put) {
  Fnv1a h;
  h.u64(nr);
  for (const T& c : cells) put(h, c);
  return h.value();
}

}  // namespace

std::uint64_t checksum(const IntMatrix& m) {
  return hash_cells(m.nr, m.cells, [](Fnv1a& h, int v) { h.i64(v); });
}
std::uint64_t checksum(const BoolMask& m) {
  return hash_cells(m.nr, m.cells, [](Fnv1a& h, std::uint8_t v) { h.u64(v); });
}
std::uint64_t checksum(const RealMatrix& m) {
  return hash_cells(m.nr, m.cells, [](Fnv1a& h, double v) { h.f64(v); });
}
std::uint64_t checksum(const std::vector<double>& v) {
  return hash_cells(v.size(), v, [](Fnv1a& h, double x) { h.f64(x); });
}
std::uint64_t checksum(const PointList& pts) {
  return hash_cells(pts.size(), pts, [](Fnv1a& h, const Point& p) {
    h.i64(p.row);
    h.i64(p.col);
  });
}

std::string hex(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string_view to_string(Mode mode) noexcept {
  return mode == Mode::kQoQ ? "qoq" : "lock";
}

Mode parse_mode(std::string_view s) {
  if (s == "qoq") return Mode::kQoQ;
  if (s == "lock") return Mode::kLockBaseline;
  throw std::invalid_argument("unknown mode '" + std::string(s) + "' (expected qoq or lock)");
}

void BenchParams::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  need(nr > 0, "nr must be positive");
  need(p > 0 && p <= 100, "p must lie in (0, 100]");
  need(nw > 0, "nw must be positive");
  need(n > 0, "n must be positive");
  need(m > 0, "m must be positive");
  need(nt > 0, "nt must be positive");
  need(ring >= 2, "ring needs at least 2 workers");
  need(nc > 0, "nc must be positive");
  need(creatures >= 2, "chameneos needs at least 2 creatures");
  need(nq > 0, "nq must be positive");
}

unsigned BenchParams::resolved_threads() const noexcept {
  if (threads) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

RuntimeConfig BenchParams::runtime_config() const {
  RuntimeConfig c;
  c.mode = mode;
  c.dynamic_coalescing = coalesce;
  c.worker_threads = resolved_threads();
  c.chaos_seed = chaos_seed;
  return c;
}

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {
      "randmat", "thresh",   "winnow",    "outer",      "product",   "chain",
      "mutex",   "prodcons", "condition", "threadring", "chameneos", "queryloop"};
  return names;
}

bool is_cowichan(std::string_view task) {
  static const std::string_view k[] = {"randmat", "thresh", "winnow", "outer", "product", "chain"};
  return std::find(std::begin(k), std::end(k), task) != std::end(k);
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void expect(BenchReport& r, bool ok, std::string detail) {
  r.check_passed = ok;
  r.detail = std::move(detail);
}

// Plain-text dumps: one matrix row or one list element per line.
template <class T>
std::string dump(const Matrix<T>& m) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t r = 0; r < m.nr; ++r) {
    for (std::size_t c = 0; c < m.nr; ++c) {
      if (c) os << ' ';
      if constexpr (std::is_same_v<T, std::uint8_t>) os << int{m.at(r, c)};
      else os << m.at(r, c);
    }
    os << '\n';
  }
  return os.str();
}

std::string dump(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (double x : v) os << x << '\n';
  return os.str();
}

std::string dump(const PointList& pts) {
  std::ostringstream os;
  for (const auto& pt : pts) os << pt.row << ' ' << pt.col << '\n';
  return os.str();
}

std::string eq(std::uint64_t got, std::uint64_t want) {
  return "got " + std::to_string(got) + ", expected " + std::to_string(want);
}

// Sets total/compute for a Cowichan kernel run through `team`.
template <class F>
auto timed_kernel(BenchReport& r, Team& team, F f) {
  const auto t0 = Clock::now();
  auto out = f();
  r.total_time = since(t0);
  r.compute_time = std::min(team.compute_seconds(), r.total_time);
  return out;
}

void run_cowichan(BenchReport& r, std::string_view task, const BenchParams& p, Runtime& rt) {
  Team team(rt, p.resolved_threads());
  if (task == "randmat") {
    const IntMatrix m = timed_kernel(r, team, [&] { return randmat(team, p.nr, p.seed); });
    r.checksum = checksum(m);
    if (p.keep_output) r.output = dump(m);
    expect(r, m == reference::randmat(p.nr, p.seed), "matrix vs sequential reference");
    return;
  }
  const IntMatrix input = reference::randmat(p.nr, p.seed);
  if (task == "thresh") {
    const BoolMask mask = timed_kernel(r, team, [&] { return thresh(team, input, p.p); });
    r.checksum = checksum(mask);
    if (p.keep_output) r.output = dump(mask);
    expect(r, mask == reference::thresh(input, p.p), "mask vs sequential reference");
    return;
  }
  const BoolMask mask = reference::thresh(input, p.p);
  if (task == "winnow") {
    const PointList pts = timed_kernel(r, team, [&] { return winnow(team, input, mask, p.nw); });
    r.checksum = checksum(pts);
    if (p.keep_output) r.output = dump(pts);
    expect(r, pts == reference::winnow(input, mask, p.nw), "points vs sequential reference");
    return;
  }
  const PointList pts = reference::winnow(input, mask, p.nw);
  if (task == "outer") {
    const auto [om, ov] = timed_kernel(r, team, [&] { return outer(team, pts); });
    Fnv1a h;
    h.u64(checksum(om));
    h.u64(checksum(ov));
    r.checksum = h.value();
    if (p.keep_output) r.output = dump(om) + "\n" + dump(ov);
    const auto [rm, rv] = reference::outer(pts);
    expect(r, close_relative(om.cells, rm.cells) && close_relative(ov, rv),
           "matrix and vector vs sequential reference, 1e-9 relative");
    return;
  }
  if (task == "product") {
    const auto [om, ov] = reference::outer(pts);
    const auto v = timed_kernel(r, team, [&] { return product(team, om, ov); });
    r.checksum = checksum(v);
    if (p.keep_output) r.output = dump(v);
    expect(r, close_relative(v, reference::product(om, ov)),
           "vector vs sequential reference, 1e-9 relative");
    return;
  }
  const ChainParams cp{p.nr, p.p, p.nw, p.seed};
  const auto v = timed_kernel(r, team, [&] { return chain(team, cp); });
  r.checksum = checksum(v);
  if (p.keep_output) r.output = dump(v);
  expect(r, close_relative(v, reference::chain(cp)),
         "vector vs composed sequential references, 1e-9 relative");
}

void run_coordination(BenchReport& r, std::string_view task, const BenchParams& p, Runtime& rt) {
  const auto t0 = Clock::now();
  Fnv1a h;
  if (task == "mutex") {
    const std::uint64_t got = mutex(rt, p.n, p.m);
    r.total_time = since(t0);
    const std::uint64_t want = std::uint64_t{p.n} * p.m;
    h.u64(got);
    expect(r, got == want, "counter " + eq(got, want));
  } else if (task == "prodcons") {
    const ProdConsResult got = prodcons(rt, p.n, p.m);
    r.total_time = since(t0);
    bool ok = got.count == std::uint64_t{p.n} * p.m && got.histogram[0] == 0;
    for (unsigned v = 1; v <= p.m; ++v) ok = ok && got.histogram[v] == p.n;
    const std::uint64_t want_sum = std::uint64_t{p.n} * p.m * (p.m + 1) / 2;
    ok = ok && got.sum == want_sum;
    for (auto c : got.histogram) h.u64(c);
    expect(r, ok, "consumed " + std::to_string(got.count) + " items, sum " + eq(got.sum, want_sum) +
                      ", every value 1..m seen n times: " + (ok ? "yes" : "no") + ", empty polls " +
                      std::to_string(got.empty_polls));
  } else if (task == "condition") {
    const std::uint64_t got = condition(rt, p.n, p.m);
    r.total_time = since(t0);
    const std::uint64_t want = 2ull * p.n * p.m;
    h.u64(got);
    expect(r, got == want, "value " + eq(got, want));
  } else if (task == "threadring") {
    const unsigned got = threadring(rt, p.ring, p.nt);
    r.total_time = since(t0);
    const unsigned want = threadring_oracle(p.ring, p.nt);
    h.u64(got);
    expect(r, got == want, "holder " + eq(got, want));
  } else if (task == "chameneos") {
    std::vector<Colour> colours;
    for (unsigned i = 0; i < p.creatures; ++i) colours.push_back(static_cast<Colour>(i % 3));
    const ChameneosResult got = chameneos(rt, p.nc, colours);
    r.total_time = since(t0);
    h.u64(got.tally());
    expect(r, got.tally() == 2 * p.nc && got.self_meetings == 0,
           "tally " + eq(got.tally(), 2 * p.nc) + ", self meetings " +
               std::to_string(got.self_meetings));
  } else if (task == "queryloop") {
    const QueryLoopResult got = queryloop(rt, p.nq);
    r.total_time = since(t0);
    h.u64(static_cast<std::uint64_t>(got.sum));
    expect(r, got.queries == p.nq && got.sum == static_cast<std::int64_t>(p.nq),
           "queries " + eq(got.queries, p.nq));
  }
  r.checksum = h.value();
  if (p.keep_output) r.output = r.detail + "\n";
  // No separate compute phase: everything here is coordination.
  r.compute_time = 0;
}

}  // namespace

BenchReport run_task(std::string_view task, const BenchParams& params) {
  const auto& names = task_names();
  if (std::find(names.begin(), names.end(), task) == names.end()) {
    throw UnknownTask("unknown task '" + std::string(task) + "'");
  }
  params.validate();
  BenchReport r;
  r.task = std::string(task);
  r.params = params;
  Runtime rt(params.runtime_config());
  if (is_cowichan(task)) {
    run_cowichan(r, task, params, rt);
  } else {
    run_coordination(r, task, params, rt);
  }
  r.stats = rt.shutdown();
  r.comm_time = r.total_time - r.compute_time;
  return r;
}

namespace {

nlohmann::json params_json(const BenchParams& p) {
  return {{"nr", p.nr},      {"p", p.p},       {"nw", p.nw},     {"n", p.n},
          {"m", p.m},        {"nt", p.nt},     {"ring", p.ring}, {"nc", p.nc},
          {"creatures", p.creatures},          {"nq", p.nq},     {"seed", p.seed}};
}

}  // namespace

std::string to_json(const BenchReport& r) {
  const RuntimeStats& s = r.stats;
  nlohmann::json j = {
      {"task", r.task},
      {"mode", to_string(r.params.mode)},
      {"coalescing", r.params.coalesce},
      {"threads", r.params.resolved_threads()},
      {"params", params_json(r.params)},
      {"total_time", r.total_time},
      {"compute_time", r.compute_time},
      {"comm_time", r.comm_time},
      {"stats",
       {{"sync_roundtrips", s.sync_roundtrips},
        {"syncs_elided", s.syncs_elided},
        {"calls_enqueued", s.calls_enqueued},
        {"queues_created", s.queues_created},
        {"queues_reused", s.queues_reused},
        {"reservations_blocked", s.reservations_blocked}}},
      {"checksum", hex(r.checksum)},
      {"check_passed", r.check_passed},
      {"detail", r.detail},
  };
  return j.dump();
}

std::string csv_header() {
  return "task,mode,coalescing,threads,nr,p,nw,n,m,nt,ring,nc,creatures,nq,seed,"
         "total_time,compute_time,comm_time,sync_roundtrips,syncs_elided,calls_enqueued,"
         "queues_created,queues_reused,reservations_blocked,checksum,check_passed";
}

std::string to_csv(const BenchReport& r) {
  const BenchParams& p = r.params;
  const RuntimeStats& s = r.stats;
  std::ostringstream os;
  os.precision(9);
  os << r.task << ',' << to_string(p.mode) << ',' << (p.coalesce ? "on" : "off") << ','
     << p.resolved_threads() << ',' << p.nr << ',' << p.p << ',' << p.nw << ',' << p.n << ','
     << p.m << ',' << p.nt << ',' << p.ring << ',' << p.nc << ',' << p.creatures << ',' << p.nq
     << ',' << p.seed << ',' << r.total_time << ',' << r.compute_time << ',' << r.comm_time << ','
     << s.sync_roundtrips << ',' << s.syncs_elided << ',' << s.calls_enqueued << ','
     << s.queues_created << ',' << s.queues_reused << ',' << s.reservations_blocked << ','
     << hex(r.checksum) << ',' << (r.check_passed ? "true" : "false");
  return os.str();
}

std::string to_text(const BenchReport& r) {
  const RuntimeStats& s = r.stats;
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << r.task << " [" << to_string(r.params.mode) << ", coalescing "
     << (r.params.coalesce ? "on" : "off") << ", " << r.params.resolved_threads()
     << " threads]\n";
  os << "  total   " << r.total_time << " s\n";
  os << "  compute " << r.compute_time << " s\n";
  os << "  comm    " << r.comm_time << " s\n";
  os << "  syncs " << s.sync_roundtrips << " (elided " << s.syncs_elided << "), calls "
     << s.calls_enqueued << ", queues " << s.queues_created << " new / " << s.queues_reused
     << " reused, blocked reservations " << s.reservations_blocked << '\n';
  os << "  checksum " << hex(r.checksum) << '\n';
  os << "  check " << (r.check_passed ? "ok" : "FAILED") << ": " << r.detail << '\n';
  return os.str();
}

}  // namespace qs::bench
