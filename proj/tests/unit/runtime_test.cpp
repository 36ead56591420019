#include <gtest/gtest.h>

#include <chrono>
#include <future>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "qs/runtime/runtime.hpp"

namespace {

using qs::Client;
using qs::Errc;
using qs::Error;
using qs::Handler;
using qs::Mode;
using qs::Runtime;
using qs::RuntimeConfig;

RuntimeConfig config_for(Mode mode, bool coalesce = true) {
  RuntimeConfig cfg;
  cfg.mode = mode;
  cfg.dynamic_coalescing = coalesce;
  cfg.worker_threads = 2;
  return cfg;
}

// Executes `fn` and returns the Errc it throws, or nullopt.
template <class F>
std::optional<Errc> thrown_code(F&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Request log kept inside handler state: (session, sequence number).
struct Log {
  std::vector<std::pair<std::uint64_t, int>> entries;
};

class RuntimeModes : public ::testing::TestWithParam<Mode> {};

TEST_P(RuntimeModes, FreshShutdownHasZeroCounters) {
  Runtime rt(config_for(GetParam()));
  rt.spawn<int>(0);
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.sync_roundtrips, 0u);
  EXPECT_EQ(stats.syncs_elided, 0u);
  EXPECT_EQ(stats.calls_enqueued, 0u);
  EXPECT_EQ(stats.queues_created, 0u);
  EXPECT_EQ(stats.queues_reused, 0u);
}

TEST_P(RuntimeModes, CallsRunInLoggedOrder) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<std::string>();
  Client c(rt);
  auto s = c.reserve(h);
  s.call([](std::string& log) { log += "a"; });
  s.call([](std::string& log) { log += "b"; });
  EXPECT_EQ(s.query([](std::string& log) { return log; }), "ab");
  s.end();
  rt.shutdown();
}

TEST_P(RuntimeModes, QueryObservesEarlierCalls) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  auto s = c.reserve(h);
  for (int v = 1; v <= 50; ++v) {
    s.call([v](int& x) { x = v; });
    ASSERT_EQ(s.query([](int& x) { return x; }), v);
  }
  s.call([](int& x) { x = 41; });
  EXPECT_EQ(s.query([](int& x) { return x; }), 41);
  s.end();
  rt.shutdown();
}

TEST_P(RuntimeModes, CallsEnqueuedCounter) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  {
    auto s = c.reserve(h);
    for (int i = 0; i < 17; ++i) s.call([](int& x) { ++x; });
    s.end();
  }
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.calls_enqueued, 17u);
}

TEST_P(RuntimeModes, EmptySessionLeavesStateUntouched) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(5);
  Client c(rt);
  c.reserve(h).end();
  auto s = c.reserve(h);
  EXPECT_EQ(s.query([](int& x) { return x; }), 5);
  s.end();
  rt.shutdown();
}

TEST_P(RuntimeModes, TwoQueriesCostOneRoundtrip) {
  Runtime rt(config_for(GetParam(), true));
  auto h = rt.spawn<int>(3);
  Client c(rt);
  auto s = c.reserve(h);
  s.query([](int& x) { return x; });
  s.query([](int& x) { return x; });
  EXPECT_EQ(s.handle().counters().syncs_sent, 1u);
  EXPECT_EQ(s.handle().counters().syncs_elided, 1u);
  s.end();
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.sync_roundtrips, 1u);
  EXPECT_EQ(stats.syncs_elided, 1u);
}

TEST_P(RuntimeModes, AsyncCallInvalidatesSyncedFlag) {
  Runtime rt(config_for(GetParam(), true));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  auto s = c.reserve(h);
  s.query([](int& x) { return x; });
  EXPECT_TRUE(s.handle().synced());
  s.call([](int& x) { ++x; });
  EXPECT_FALSE(s.handle().synced());
  EXPECT_EQ(s.query([](int& x) { return x; }), 1);
  s.end();
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.sync_roundtrips, 2u);
  EXPECT_EQ(stats.syncs_elided, 0u);
}

TEST_P(RuntimeModes, CoalescedLoopNeedsOneRoundtrip) {
  Runtime rt(config_for(GetParam(), true));
  auto h = rt.spawn<int>(9);
  Client c(rt);
  auto s = c.reserve(h);
  long sum = 0;
  for (int i = 0; i < 1000; ++i) sum += s.query([](int& x) { return x; });
  s.end();
  EXPECT_EQ(sum, 9000);
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.sync_roundtrips, 1u);
  EXPECT_EQ(stats.syncs_elided, 999u);
}

TEST_P(RuntimeModes, WithoutCoalescingEveryQuerySyncs) {
  Runtime rt(config_for(GetParam(), false));
  auto h = rt.spawn<int>(9);
  Client c(rt);
  auto s = c.reserve(h);
  for (int i = 0; i < 100; ++i) s.query([](int& x) { return x; });
  s.end();
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.sync_roundtrips, 100u);
  EXPECT_EQ(stats.syncs_elided, 0u);
}

TEST_P(RuntimeModes, SyncedFlagResetsOnNewSession) {
  Runtime rt(config_for(GetParam(), true));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  for (int i = 0; i < 3; ++i) {
    auto s = c.reserve(h);
    EXPECT_FALSE(s.handle().synced());
    s.query([](int& x) { return x; });
    s.end();
  }
  EXPECT_EQ(rt.shutdown().sync_roundtrips, 3u);
}

TEST_P(RuntimeModes, SessionEndedErrors) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  auto s = c.reserve(h);
  s.end();
  EXPECT_EQ(thrown_code([&] { s.call([](int&) {}); }), Errc::kSessionEnded);
  EXPECT_EQ(thrown_code([&] { s.query([](int& x) { return x; }); }), Errc::kSessionEnded);
  EXPECT_EQ(thrown_code([&] { s.end(); }), Errc::kSessionEnded);
  rt.shutdown();
}

TEST_P(RuntimeModes, DuplicateHandlerRejected) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  const qs::HandlerRef refs[] = {h, h};
  EXPECT_EQ(thrown_code([&] { c.reserve_multi(refs); }), Errc::kDuplicateHandler);
  EXPECT_THROW(c.reserve_multi({}), std::invalid_argument);
  rt.shutdown();
}

TEST_P(RuntimeModes, SecondOpenSessionOnSameHandlerRejected) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  auto s = c.reserve(h);
  EXPECT_EQ(thrown_code([&] { c.reserve(h); }), Errc::kSessionAlreadyOpen);
  s.end();
  EXPECT_NO_THROW(c.reserve(h).end());
  rt.shutdown();
}

TEST_P(RuntimeModes, ReserveAfterShutdownRejected) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  rt.shutdown();
  Client c(rt);
  EXPECT_EQ(thrown_code([&] { c.reserve(h); }), Errc::kRuntimeShutdown);
  EXPECT_EQ(thrown_code([&] { rt.spawn<int>(1); }), Errc::kRuntimeShutdown);
  EXPECT_NO_THROW(rt.shutdown());
}

TEST_P(RuntimeModes, SingletonMultiReservationMatchesReserve) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  auto [s] = c.reserve_all(h);
  s.call([](int& x) { x = 12; });
  EXPECT_EQ(s.query([](int& x) { return x; }), 12);
  s.end();
  rt.shutdown();
}

// Two clients on plain threads log tagged requests; sessions must be
// contiguous and internally ordered.
void check_contiguity(const Log& log, int per_session) {
  std::map<std::uint64_t, int> next;
  std::map<std::uint64_t, bool> finished;
  std::uint64_t current = 0;
  for (auto [session, seq] : log.entries) {
    if (session != current) {
      ASSERT_FALSE(finished[session]) << "session " << session << " resumed";
      if (current != 0) {
        ASSERT_EQ(next[current], per_session) << "session " << current << " interrupted";
        finished[current] = true;
      }
      current = session;
    }
    ASSERT_EQ(seq, next[session]) << "session " << session << " out of order";
    ++next[session];
  }
}

TEST_P(RuntimeModes, ConcurrentClientsRunContiguously) {
  constexpr int kClients = 32;
  constexpr int kSessions = 20;
  constexpr int kCalls = 25;
  RuntimeConfig cfg = config_for(GetParam());
  cfg.chaos_seed = 7;
  Runtime rt(cfg);
  auto h = rt.spawn<Log>();
  std::vector<std::thread> clients;
  for (int i = 0; i < kClients; ++i) {
    clients.emplace_back([&] {
      Client c(rt);
      for (int k = 0; k < kSessions; ++k) {
        auto s = c.reserve(h);
        const auto id = s.handle().session_id();
        for (int j = 0; j < kCalls; ++j) {
          s.call([id, j](Log& log) { log.entries.emplace_back(id, j); });
          if (j % 8 == 7) std::this_thread::yield();
        }
        s.end();
      }
    });
  }
  for (auto& t : clients) t.join();
  Client reader(rt);
  auto s = reader.reserve(h);
  Log log = s.query([](Log& l) { return l; });
  s.end();
  rt.shutdown();
  ASSERT_EQ(log.entries.size(), static_cast<std::size_t>(kClients * kSessions * kCalls));
  check_contiguity(log, kCalls);
}

// Same property with clients that are themselves handlers.
struct Worker {
  Client client;
  Handler<Log> target;
};

TEST_P(RuntimeModes, HandlerClientsRunContiguously) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<Log>();
  std::vector<Handler<Worker>> workers;
  for (int i = 0; i < 16; ++i) workers.push_back(rt.spawn<Worker>(Client(rt), h));
  Client main(rt);
  for (auto& w : workers) {
    auto s = main.reserve(w);
    s.call([](Worker& me) {
      for (int k = 0; k < 10; ++k) {
        auto t = me.client.reserve(me.target);
        const auto id = t.handle().session_id();
        for (int j = 0; j < 10; ++j) t.call([id, j](Log& l) { l.entries.emplace_back(id, j); });
        if (k % 3 == 0) t.query([](Log& l) { return l.entries.size(); });
        t.end();
      }
    });
    s.end();
  }
  for (auto& w : workers) {
    auto s = main.reserve(w);
    s.query([](Worker&) { return 0; });
    s.end();
  }
  auto s = main.reserve(h);
  Log log = s.query([](Log& l) { return l; });
  s.end();
  rt.shutdown();
  ASSERT_EQ(log.entries.size(), 16u * 10 * 10);
  check_contiguity(log, 10);
}

// Client 1 reserves first and holds its block open while client 2 logs;
// client 2's calls must run only after client 1 ends.
TEST_P(RuntimeModes, LaterSessionWaitsForEarlierEnd) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<std::string>();
  Client c1(rt);
  auto s1 = c1.reserve(h);
  s1.call([](std::string& l) { l += "1"; });
  std::promise<void> c2_logged;
  std::thread t([&] {
    Client c2(rt);
    auto s2 = c2.reserve(h);
    s2.call([](std::string& l) { l += "2"; });
    c2_logged.set_value();
    s2.end();
  });
  // In lock mode client 2 is still blocked in reserve here.
  c2_logged.get_future().wait_for(std::chrono::milliseconds(50));
  s1.call([](std::string& l) { l += "1"; });
  EXPECT_EQ(s1.query([](std::string& l) { return l; }), "11");
  s1.end();
  t.join();
  Client reader(rt);
  auto s = reader.reserve(h);
  EXPECT_EQ(s.query([](std::string& l) { return l; }), "112");
  s.end();
  rt.shutdown();
}

TEST_P(RuntimeModes, ColourInvariantUnderGroupReservations) {
  struct Colour {
    int value = 0;
  };
  constexpr int kClients = 8;
  constexpr int kRounds = 1000;
  RuntimeConfig cfg = config_for(GetParam());
  cfg.chaos_seed = 11;
  Runtime rt(cfg);
  auto x = rt.spawn<Colour>();
  auto y = rt.spawn<Colour>();
  std::atomic<int> violations{0};
  std::atomic<int> observations{0};
  std::vector<std::thread> writers;
  for (int i = 0; i < kClients; ++i) {
    writers.emplace_back([&, i] {
      Client c(rt);
      for (int r = 0; r < kRounds; ++r) {
        const int colour = i * kRounds + r + 1;
        auto [sx, sy] = c.reserve_all(x, y);
        sx.call([colour](Colour& o) { o.value = colour; });
        sy.call([colour](Colour& o) { o.value = colour; });
        sx.end();
        sy.end();
        if (r % 10 == 0) {
          // Observer round: reserve in the opposite argument order.
          auto [oy, ox] = c.reserve_all(y, x);
          const int a = ox.query([](Colour& o) { return o.value; });
          const int b = oy.query([](Colour& o) { return o.value; });
          if (a != b) ++violations;
          ++observations;
          ox.end();
          oy.end();
        }
      }
    });
  }
  for (auto& t : writers) t.join();
  rt.shutdown();
  EXPECT_EQ(violations.load(), 0);
  EXPECT_EQ(observations.load(), kClients * kRounds / 10);
}

// Crossed nested reservations with async calls only: both clients finish.
TEST_P(RuntimeModes, CrossedNestedAsyncReservationsComplete) {
  if (GetParam() == Mode::kLockBaseline) {
    GTEST_SKIP() << "the lock baseline is expected to deadlock here";
  }
  RuntimeConfig cfg = config_for(GetParam());
  cfg.chaos_seed = 5;
  Runtime rt(cfg);
  auto x = rt.spawn<int>(0);
  auto y = rt.spawn<int>(0);
  auto done = std::async(std::launch::async, [&] {
    auto client = [&](bool x_first) {
      Client c(rt);
      for (int i = 0; i < 2000; ++i) {
        if (x_first) {
          auto sx = c.reserve(x);
          auto sy = c.reserve(y);
          sx.call([](int& v) { ++v; });
          sy.call([](int& v) { ++v; });
          sy.end();
          sx.end();
        } else {
          auto sy = c.reserve(y);
          auto sx = c.reserve(x);
          sx.call([](int& v) { ++v; });
          sy.call([](int& v) { ++v; });
          sx.end();
          sy.end();
        }
      }
    };
    std::thread a(client, true);
    std::thread b(client, false);
    a.join();
    b.join();
  });
  ASSERT_EQ(done.wait_for(std::chrono::seconds(60)), std::future_status::ready)
      << "crossed reservations did not complete";
  Client c(rt);
  auto [sx, sy] = c.reserve_all(x, y);
  EXPECT_EQ(sx.query([](int& v) { return v; }), 4000);
  EXPECT_EQ(sy.query([](int& v) { return v; }), 4000);
  sx.end();
  sy.end();
  rt.shutdown();
}

TEST_P(RuntimeModes, FailingCallPoisonsHandler) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  auto s = c.reserve(h);
  s.call([](int&) { throw std::runtime_error("boom"); });
  s.call([](int& x) { x = 99; });
  EXPECT_EQ(thrown_code([&] { s.query([](int& x) { return x; }); }), Errc::kHandlerPoisoned);
  EXPECT_TRUE(h.poisoned());
  EXPECT_EQ(thrown_code([&] { s.call([](int&) {}); }), Errc::kHandlerPoisoned);
  s.end();
  EXPECT_EQ(thrown_code([&] { rt.shutdown(); }), Errc::kHandlerPoisoned);
}

TEST_P(RuntimeModes, QueryExceptionPropagatesToClient) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  auto s = c.reserve(h);
  EXPECT_THROW(s.query([](int&) -> int { throw std::logic_error("q"); }), std::logic_error);
  EXPECT_FALSE(h.poisoned());
  s.end();
  EXPECT_NO_THROW(rt.shutdown());
}

TEST_P(RuntimeModes, DestructorEndsOpenSession) {
  Runtime rt(config_for(GetParam()));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  {
    auto s = c.reserve(h);
    s.call([](int& x) { x = 3; });
  }
  auto s = c.reserve(h);
  EXPECT_EQ(s.query([](int& x) { return x; }), 3);
  s.end();
  rt.shutdown();
}

INSTANTIATE_TEST_SUITE_P(Modes, RuntimeModes,
                         ::testing::Values(Mode::kQoQ, Mode::kLockBaseline),
                         [](const auto& info) {
                           return info.param == Mode::kQoQ ? std::string("QoQ")
                                                           : std::string("Lock");
                         });

TEST(RuntimeQoQ, QueueCacheReusesPrivateQueues) {
  Runtime rt(config_for(Mode::kQoQ));
  auto h = rt.spawn<int>(0);
  Client c(rt);
  for (int i = 0; i < 5; ++i) {
    auto s = c.reserve(h);
    s.call([](int& x) { ++x; });
    s.end();
  }
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.queues_created, 1u);
  EXPECT_EQ(stats.queues_reused, 4u);
}

TEST(RuntimeQoQ, QueueCacheOffCreatesEveryTime) {
  RuntimeConfig cfg = config_for(Mode::kQoQ);
  cfg.queue_cache = false;
  Runtime rt(cfg);
  auto h = rt.spawn<int>(0);
  Client c(rt);
  for (int i = 0; i < 5; ++i) c.reserve(h).end();
  auto stats = rt.shutdown();
  EXPECT_EQ(stats.queues_created, 5u);
  EXPECT_EQ(stats.queues_reused, 0u);
}

TEST(RuntimeQoQ, ReservationNeverBlocksWhileAnotherClientHoldsHandler) {
  Runtime rt(config_for(Mode::kQoQ));
  auto h = rt.spawn<int>(0);
  Client c1(rt);
  auto s1 = c1.reserve(h);
  auto reserved = std::async(std::launch::async, [&] {
    Client c2(rt);
    auto s2 = c2.reserve(h);
    s2.call([](int& x) { x += 10; });
    s2.end();
  });
  EXPECT_EQ(reserved.wait_for(std::chrono::seconds(10)), std::future_status::ready);
  s1.call([](int& x) { x = 1; });
  s1.end();
  Client c3(rt);
  auto s3 = c3.reserve(h);
  EXPECT_EQ(s3.query([](int& x) { return x; }), 11);
  s3.end();
  EXPECT_EQ(rt.shutdown().reservations_blocked, 0u);
}

TEST(RuntimeLock, ConcurrentReservationBlocks) {
  Runtime rt(config_for(Mode::kLockBaseline));
  auto h = rt.spawn<int>(0);
  Client c1(rt);
  auto s1 = c1.reserve(h);
  std::atomic<bool> got{false};
  std::thread t([&] {
    Client c2(rt);
    auto s2 = c2.reserve(h);
    got = true;
    s2.end();
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(30));
  EXPECT_FALSE(got.load());
  s1.end();
  t.join();
  EXPECT_TRUE(got.load());
  EXPECT_EQ(rt.shutdown().reservations_blocked, 1u);
}

// Coalescing must not change what handlers observe: the same random
// program gives identical state at every session boundary either way.
TEST(RuntimeCoalescing, TransparentOnRandomPrograms) {
  for (unsigned seed = 0; seed < 30; ++seed) {
    std::vector<std::vector<int>> boundaries[2];
    for (int arm = 0; arm < 2; ++arm) {
      RuntimeConfig cfg = config_for(seed % 2 ? Mode::kQoQ : Mode::kLockBaseline, arm == 1);
      Runtime rt(cfg);
      std::vector<Handler<int>> hs;
      for (int i = 0; i < 3; ++i) hs.push_back(rt.spawn<int>(0));
      Client c(rt);
      std::mt19937 rng(seed);
      for (int session = 0; session < 20; ++session) {
        auto& h = hs[rng() % hs.size()];
        auto s = c.reserve(h);
        std::vector<int> seen;
        for (int op = 0, n = 1 + rng() % 10; op < n; ++op) {
          const int v = static_cast<int>(rng() % 100);
          switch (rng() % 3) {
            case 0:
              s.call([v](int& x) { x = x * 3 + v; });
              break;
            case 1:
              seen.push_back(s.query([](int& x) { return x; }));
              break;
            default:
              seen.push_back(s.query([v](int& x) { return x + v; }));
              break;
          }
        }
        seen.push_back(s.query([](int& x) { return x; }));
        s.end();
        boundaries[arm].push_back(seen);
      }
      rt.shutdown();
    }
    EXPECT_EQ(boundaries[0], boundaries[1]) << "seed " << seed;
  }
}

TEST(RuntimeStatsInvariant, ElidedPlusRoundtripsEqualsQueries) {
  for (bool coalesce : {true, false}) {
    Runtime rt(config_for(Mode::kQoQ, coalesce));
    auto h = rt.spawn<int>(0);
    Client c(rt);
    std::mt19937 rng(1);
    std::uint64_t queries = 0;
    for (int session = 0; session < 10; ++session) {
      auto s = c.reserve(h);
      for (int i = 0; i < 50; ++i) {
        if (rng() % 2) {
          s.call([](int& x) { ++x; });
        } else {
          s.query([](int& x) { return x; });
          ++queries;
        }
      }
      s.end();
    }
    auto stats = rt.shutdown();
    EXPECT_EQ(stats.sync_roundtrips + stats.syncs_elided, queries);
  }
}

}  // namespace
