#include "qs/runtime/fiber_pool.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>

#include <boost/fiber/algo/algorithm.hpp>
#include <boost/fiber/context.hpp>
#include <boost/fiber/fiber.hpp>
#include <boost/fiber/fixedsize_stack.hpp>
#include <boost/fiber/operations.hpp>
#include <boost/fiber/scheduler.hpp>

namespace qs::detail {

namespace bf = boost::fibers;

struct FiberPool::Shared {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<bf::context*> ready;
  int sleepers = 0;
};

namespace {

thread_local FiberPool* tls_pool = nullptr;

// Worker fibers go to the pool-wide queue; pinned contexts (main and
// dispatcher) stay on their own thread.
class PoolAlgorithm final : public bf::algo::algorithm {
 public:
  explicit PoolAlgorithm(FiberPool::Shared* shared) : shared_(shared) {}

  void awakened(bf::context* ctx) noexcept override {
    if (ctx->is_context(bf::type::pinned_context)) {
      local_.push_back(*ctx);
      return;
    }
    ctx->detach();
    std::lock_guard<std::mutex> lock(shared_->mutex);
    shared_->ready.push_back(ctx);
    if (shared_->sleepers > 0) shared_->cv.notify_one();
  }

  bf::context* pick_next() noexcept override {
    bf::context* ctx = nullptr;
    {
      std::lock_guard<std::mutex> lock(shared_->mutex);
      if (!shared_->ready.empty()) {
        ctx = shared_->ready.front();
        shared_->ready.pop_front();
      }
    }
    if (ctx != nullptr) {
      bf::context::active()->attach(ctx);
      return ctx;
    }
    if (!local_.empty()) {
      ctx = &local_.front();
      local_.pop_front();
    }
    return ctx;
  }

  bool has_ready_fibers() const noexcept override {
    if (!local_.empty()) return true;
    std::lock_guard<std::mutex> lock(shared_->mutex);
    return !shared_->ready.empty();
  }

  void suspend_until(std::chrono::steady_clock::time_point const& deadline) noexcept override {
    std::unique_lock<std::mutex> lock(shared_->mutex);
    auto ready = [this] { return notified_ || !shared_->ready.empty(); };
    ++shared_->sleepers;
    if (deadline == (std::chrono::steady_clock::time_point::max)()) {
      shared_->cv.wait(lock, ready);
    } else {
      shared_->cv.wait_until(lock, deadline, ready);
    }
    --shared_->sleepers;
    notified_ = false;
  }

  void notify() noexcept override {
    std::lock_guard<std::mutex> lock(shared_->mutex);
    notified_ = true;
    shared_->cv.notify_all();
  }

 private:
  FiberPool::Shared* shared_;
  bf::scheduler::ready_queue_type local_{};
  bool notified_ = false;  // guarded by shared_->mutex
};

}  // namespace

FiberPool::FiberPool(unsigned threads, std::size_t stack_size)
    : stack_size_(stack_size), shared_(std::make_unique<Shared>()) {
  if (threads == 0) threads = 1;
  control_ = std::make_unique<Parker[]>(threads);
  workers_.reserve(threads);
  for (unsigned i = 0; i < threads; ++i) {
    workers_.emplace_back([this, i] { worker_main(i); });
  }
}

FiberPool::~FiberPool() { stop(); }

void FiberPool::worker_main(unsigned index) {
  bf::use_scheduling_algorithm<PoolAlgorithm>(shared_.get());
  tls_pool = this;
  for (;;) {
    control_[index].wait_until([&] {
      return stopping_.load(std::memory_order_acquire) ||
             (index == 0 && pending_count_.load(std::memory_order_acquire) > 0);
    });
    if (stopping_.load(std::memory_order_acquire)) break;
    std::vector<UniqueFunction<void()>> batch;
    {
      std::lock_guard<std::mutex> lock(control_mutex_);
      batch.swap(pending_);
      pending_count_.store(0, std::memory_order_release);
    }
    for (auto& fn : batch) start_fiber(std::move(fn));
  }
  tls_pool = nullptr;
}

void FiberPool::start_fiber(UniqueFunction<void()> fn) {
  bf::fiber(std::allocator_arg, bf::fixedsize_stack(stack_size_),
            [this, fn = std::move(fn)]() mutable {
              fn();
              fn = nullptr;
              fiber_done();
            })
      .detach();
}

void FiberPool::fiber_done() {
  if (live_.fetch_sub(1, std::memory_order_acq_rel) == 1) idle_.wake();
}

void FiberPool::launch(UniqueFunction<void()> fn) {
  live_.fetch_add(1, std::memory_order_acq_rel);
  if (tls_pool == this) {
    start_fiber(std::move(fn));
    return;
  }
  {
    std::lock_guard<std::mutex> lock(control_mutex_);
    pending_.push_back(std::move(fn));
    pending_count_.store(pending_.size(), std::memory_order_release);
  }
  control_[0].wake();
}

void FiberPool::wait_idle() {
  std::lock_guard<std::mutex> serialize(idle_waiters_);
  idle_.wait_until([this] { return live_.load(std::memory_order_acquire) == 0; });
}

void FiberPool::stop() {
  {
    std::lock_guard<std::mutex> lock(control_mutex_);
    if (stopped_) return;
    stopped_ = true;
  }
  stopping_.store(true, std::memory_order_release);
  for (std::size_t i = 0; i < workers_.size(); ++i) control_[i].wake();
  for (auto& t : workers_) {
    if (t.joinable()) t.join();
  }
}

}  // namespace qs::detail
