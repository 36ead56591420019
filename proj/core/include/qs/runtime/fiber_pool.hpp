#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "qs/channels/parker.hpp"
#include "qs/runtime/unique_function.hpp"

namespace qs::detail {

/// Lightweight-thread layer: a fixed set of OS worker threads that multiplex
/// fibers through one shared ready queue. Each pool has its own queue, so
/// several pools can coexist in one process.
class FiberPool {
 public:
  FiberPool(unsigned threads, std::size_t stack_size);
  ~FiberPool();

  FiberPool(const FiberPool&) = delete;
  FiberPool& operator=(const FiberPool&) = delete;

  /// Starts `fn` on a new fiber. Callable from any thread or fiber.
  void launch(UniqueFunction<void()> fn);

  /// Blocks until every launched fiber has returned.
  void wait_idle();

  /// Stops and joins the worker threads. Fibers must have finished.
  void stop();

  unsigned threads() const noexcept { return static_cast<unsigned>(workers_.size()); }

  struct Shared;

 private:
  void worker_main(unsigned index);
  void start_fiber(UniqueFunction<void()> fn);
  void fiber_done();

  std::size_t stack_size_;
  std::unique_ptr<Shared> shared_;
  std::vector<std::thread> workers_;

  // Control path. Worker 0's main context starts launched fibers; the other
  // workers' main contexts only wait for stop().
  std::mutex control_mutex_;
  std::vector<UniqueFunction<void()>> pending_;
  std::atomic<std::size_t> pending_count_{0};
  std::atomic<bool> stopping_{false};
  bool stopped_ = false;
  std::unique_ptr<Parker[]> control_;

  std::mutex idle_waiters_;
  Parker idle_;
  std::atomic<std::size_t> live_{0};
};

}  // namespace qs::detail
