#pragma once

#include <atomic>
#include <deque>
#include <mutex>
#include <utility>

#include <boost/fiber/context.hpp>
#include <boost/fiber/operations.hpp>

namespace qs {

/// Park/unpark point for a single waiter. Works from pool fibers and from
/// plain threads (a plain thread suspends its main fiber context).
///
/// Built directly on fiber contexts rather than fiber mutex/condvar: those
/// wake the peer while still holding an internal spinlock, and on a single
/// core the woken thread then spins away its whole timeslice.
///
/// Protocol: the waker publishes its state change, then calls wake(). The
/// waiter registers itself, re-checks the predicate and only then suspends.
/// The seq_cst fences on both sides rule out the lost-wakeup interleaving.
class Parker {
 public:
  explicit Parker(int spin_yields = 0) noexcept : spin_yields_(spin_yields) {}

  Parker(const Parker&) = delete;
  Parker& operator=(const Parker&) = delete;

  template <class Pred>
  void wait_until(Pred ready) {
    for (int i = 0; i < spin_yields_; ++i) {
      if (ready()) return;
      boost::this_fiber::yield();
    }
    for (;;) {
      if (ready()) return;
      auto* self = boost::fibers::context::active();
      boost::fibers::detail::spinlock_lock lk(splk_);
      waiter_ = self;
      has_waiter_.store(true, std::memory_order_relaxed);
      std::atomic_thread_fence(std::memory_order_seq_cst);
      if (ready()) {
        waiter_ = nullptr;
        has_waiter_.store(false, std::memory_order_relaxed);
        return;
      }
      // Releases splk_ once this context is off its stack.
      self->suspend(lk);
    }
  }

  void wake() noexcept {
    std::atomic_thread_fence(std::memory_order_seq_cst);
    if (!has_waiter_.load(std::memory_order_relaxed)) return;
    boost::fibers::context* waiter;
    {
      boost::fibers::detail::spinlock_lock lk(splk_);
      waiter = std::exchange(waiter_, nullptr);
      has_waiter_.store(false, std::memory_order_relaxed);
    }
    if (waiter != nullptr) boost::fibers::context::active()->schedule(waiter);
  }

 private:
  std::atomic<bool> has_waiter_{false};
  int spin_yields_;
  boost::fibers::detail::spinlock splk_;
  boost::fibers::context* waiter_ = nullptr;
};

/// One-shot rendezvous, re-armed by the waiter after each use.
class Event {
 public:
  void signal() {
    set_.store(true, std::memory_order_release);
    parker_.wake();
  }

  void wait() {
    parker_.wait_until([this] { return set_.load(std::memory_order_acquire); });
    set_.store(false, std::memory_order_relaxed);
  }

 private:
  std::atomic<bool> set_{false};
  Parker parker_;
};

/// FIFO mutex usable from fibers and plain threads; blocked lockers suspend
/// their fiber. Ownership is handed directly to the oldest waiter.
class FiberMutex {
 public:
  FiberMutex() = default;
  FiberMutex(const FiberMutex&) = delete;
  FiberMutex& operator=(const FiberMutex&) = delete;

  bool try_lock() noexcept {
    boost::fibers::detail::spinlock_lock lk(splk_);
    if (locked_) return false;
    locked_ = true;
    return true;
  }

  void lock() {
    auto* self = boost::fibers::context::active();
    boost::fibers::detail::spinlock_lock lk(splk_);
    if (!locked_) {
      locked_ = true;
      return;
    }
    waiters_.push_back(self);
    // unlock() hands ownership over before scheduling us.
    self->suspend(lk);
  }

  void unlock() noexcept {
    boost::fibers::context* next = nullptr;
    {
      boost::fibers::detail::spinlock_lock lk(splk_);
      if (waiters_.empty()) {
        locked_ = false;
        return;
      }
      next = waiters_.front();
      waiters_.pop_front();
    }
    boost::fibers::context::active()->schedule(next);
  }

 private:
  boost::fibers::detail::spinlock splk_;
  bool locked_ = false;
  std::deque<boost::fibers::context*> waiters_;
};

}  // namespace qs
