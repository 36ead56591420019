#include "qs/runtime/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include <boost/fiber/operations.hpp>

#include "qs/channels/mpsc_channel.hpp"
#include "qs/channels/parker.hpp"
#include "qs/channels/spsc_channel.hpp"
#include "qs/runtime/fiber_pool.hpp"

namespace qs {

void yield_now() { boost::this_fiber::yield(); }

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::kChannelClosed: return "ChannelClosed";
    case Errc::kRuntimeShutdown: return "RuntimeShutdown";
    case Errc::kDuplicateHandler: return "DuplicateHandler";
    case Errc::kSessionEnded: return "SessionEnded";
    case Errc::kSessionAlreadyOpen: return "SessionAlreadyOpen";
    case Errc::kHandlerPoisoned: return "HandlerPoisoned";
  }
  return "Unknown";
}

namespace detail {

struct Request {
  enum class Kind : std::uint8_t { kCall, kSync, kEnd };

  Kind kind = Kind::kEnd;
  Event* token = nullptr;
  Task task;
};

struct PrivateQueue {
  PrivateQueue(std::size_t capacity, int spin_yields) : chan(capacity, spin_yields) {}

  SpscChannel<Request> chan;
  Event sync_done;
  // Client-side only: the handler is parked on this queue and it is empty.
  bool synced = false;
  QueueCounters counters;
};

struct RuntimeState {
  explicit RuntimeState(RuntimeConfig cfg)
      : config(normalize(cfg)), pool(config.worker_threads, config.fiber_stack_size) {}

  static RuntimeConfig normalize(RuntimeConfig cfg) {
    if (cfg.worker_threads == 0) {
      cfg.worker_threads = std::max(1u, std::thread::hardware_concurrency());
    }
    if (cfg.private_queue_capacity == 0) cfg.private_queue_capacity = 1;
    return cfg;
  }

  // Randomly yields the current fiber when chaos scheduling is enabled.
  void maybe_yield() {
    if (!config.chaos_seed) return;
    // Per thread, reseeded whenever the thread starts serving another runtime.
    thread_local std::uint64_t owner = 0;
    thread_local std::minstd_rand rng;
    if (owner != serial) {
      owner = serial;
      rng.seed(static_cast<std::uint32_t>(
          *config.chaos_seed ^ std::hash<std::thread::id>{}(std::this_thread::get_id())));
    }
    const auto r = rng();
    if ((r & 3u) == 0) {
      for (unsigned i = 0, n = 1 + (r >> 8) % 3; i < n; ++i) boost::this_fiber::yield();
    }
  }

  static inline std::atomic<std::uint64_t> next_serial{1};
  const std::uint64_t serial = next_serial++;
  const RuntimeConfig config;
  FiberPool pool;

  std::atomic<bool> stopping{false};
  std::atomic<std::uint64_t> next_handler_id{1};
  std::atomic<std::uint64_t> next_session_id{1};

  std::atomic<std::uint64_t> sync_roundtrips{0};
  std::atomic<std::uint64_t> syncs_elided{0};
  std::atomic<std::uint64_t> calls_enqueued{0};
  std::atomic<std::uint64_t> queues_created{0};
  std::atomic<std::uint64_t> queues_reused{0};
  std::atomic<std::uint64_t> reservations_blocked{0};

  std::mutex handlers_mutex;
  std::vector<std::shared_ptr<HandlerCore>> handlers;
  bool shut_down = false;

  std::mutex poison_mutex;
  std::string first_poison;
};

class HandlerCore {
 public:
  HandlerCore(RuntimeState& rt, std::uint64_t id, std::unique_ptr<Runtime::StateBase> state)
      : runtime(rt), id(id), state_(std::move(state)), raw_state(state_->get()) {
    if (rt.config.mode == Mode::kLockBaseline) {
      fifo = std::make_shared<PrivateQueue>(kUnbounded, rt.config.spin_yields);
    }
  }

  // Main handler loop. In QoQ mode: take the next private queue, run its
  // requests until END, repeat until the queue-of-queues is closed.
  void run() {
    if (fifo) {
      while (auto req = fifo->chan.dequeue()) execute(*req);
      return;
    }
    while (auto next = qoq.dequeue()) {
      PrivateQueue& pq = **next;
      for (;;) {
        auto req = pq.chan.dequeue();
        if (!req || req->kind == Request::Kind::kEnd) break;
        execute(*req);
        runtime.maybe_yield();
      }
    }
  }

  void close() {
    if (fifo) {
      fifo->chan.close();
    } else {
      qoq.close();
    }
  }

  void release_state() noexcept {
    raw_state = nullptr;
    state_.reset();
  }

  RuntimeState& runtime;
  const std::uint64_t id;

  MpscChannel<std::shared_ptr<PrivateQueue>> qoq;
  // Serializes queue-of-queues insertion for group reservations. Held only
  // across a few non-blocking enqueues.
  std::mutex group_lock;

  // Lock baseline: one FIFO shared by successive lock holders.
  std::shared_ptr<PrivateQueue> fifo;
  FiberMutex reservation;

  std::atomic<bool> poisoned{false};

 private:
  void execute(Request& req) {
    switch (req.kind) {
      case Request::Kind::kCall:
        if (!poisoned.load(std::memory_order_relaxed)) {
          try {
            req.task();
          } catch (const std::exception& e) {
            poison(e.what());
          } catch (...) {
            poison("non-standard exception");
          }
        }
        req.task = nullptr;
        break;
      case Request::Kind::kSync:
        req.token->signal();
        break;
      case Request::Kind::kEnd:
        break;
    }
  }

  void poison(const std::string& what) {
    poisoned.store(true, std::memory_order_release);
    std::fprintf(stderr, "qs: handler %llu poisoned by a failing call: %s\n",
                 static_cast<unsigned long long>(id), what.c_str());
    std::lock_guard<std::mutex> lock(runtime.poison_mutex);
    if (runtime.first_poison.empty()) {
      runtime.first_poison = "handler " + std::to_string(id) + ": " + what;
    }
  }

  std::unique_ptr<Runtime::StateBase> state_;

 public:
  void* raw_state;
};

}  // namespace detail

using detail::HandlerCore;
using detail::PrivateQueue;
using detail::Request;

// ---------------------------------------------------------------------------
// HandlerRef

std::uint64_t HandlerRef::id() const noexcept { return core_ ? core_->id : 0; }

bool HandlerRef::poisoned() const noexcept {
  return core_ && core_->poisoned.load(std::memory_order_acquire);
}

void* HandlerRef::raw_state() const noexcept { return core_ ? core_->raw_state : nullptr; }

// ---------------------------------------------------------------------------
// PrivateQueueHandle

PrivateQueueHandle::PrivateQueueHandle(Client* client, std::shared_ptr<HandlerCore> target,
                                       std::shared_ptr<PrivateQueue> queue,
                                       std::uint64_t session)
    : client_(client),
      target_(std::move(target)),
      queue_(std::move(queue)),
      session_(session),
      open_(true) {}

PrivateQueueHandle::PrivateQueueHandle(PrivateQueueHandle&& other) noexcept
    : client_(std::exchange(other.client_, nullptr)),
      target_(std::move(other.target_)),
      queue_(std::move(other.queue_)),
      session_(other.session_),
      open_(std::exchange(other.open_, false)) {}

PrivateQueueHandle& PrivateQueueHandle::operator=(PrivateQueueHandle&& other) noexcept {
  if (this != &other) {
    release();
    client_ = std::exchange(other.client_, nullptr);
    target_ = std::move(other.target_);
    queue_ = std::move(other.queue_);
    session_ = other.session_;
    open_ = std::exchange(other.open_, false);
  }
  return *this;
}

PrivateQueueHandle::~PrivateQueueHandle() { release(); }

void PrivateQueueHandle::release() noexcept {
  if (!open_) return;
  try {
    end_block();
  } catch (...) {
    // Destructors must not throw; a failed END only happens during shutdown.
  }
}

void PrivateQueueHandle::require_open(const char* op) const {
  if (!open_) {
    throw Error(Errc::kSessionEnded, std::string(op) + " on an ended block");
  }
}

void PrivateQueueHandle::async_call(Task task) {
  require_open("async_call");
  if (target_->poisoned.load(std::memory_order_acquire)) {
    throw Error(Errc::kHandlerPoisoned, "handler " + std::to_string(target_->id));
  }
  auto& rt = target_->runtime;
  queue_->synced = false;
  ++queue_->counters.calls_enqueued;
  rt.calls_enqueued.fetch_add(1, std::memory_order_relaxed);
  queue_->chan.enqueue(Request{Request::Kind::kCall, nullptr, std::move(task)});
  rt.maybe_yield();
}

void PrivateQueueHandle::sync() {
  require_open("query");
  auto& rt = target_->runtime;
  if (rt.config.dynamic_coalescing && queue_->synced) {
    ++queue_->counters.syncs_elided;
    rt.syncs_elided.fetch_add(1, std::memory_order_relaxed);
  } else {
    ++queue_->counters.syncs_sent;
    rt.sync_roundtrips.fetch_add(1, std::memory_order_relaxed);
    queue_->chan.enqueue(Request{Request::Kind::kSync, &queue_->sync_done, nullptr});
    queue_->sync_done.wait();
    queue_->synced = true;
  }
  if (target_->poisoned.load(std::memory_order_acquire)) {
    throw Error(Errc::kHandlerPoisoned, "handler " + std::to_string(target_->id));
  }
}

void PrivateQueueHandle::end_block() {
  require_open("end_block");
  open_ = false;
  queue_->synced = false;
  client_->close_session(target_->id);
  queue_->chan.enqueue(Request{Request::Kind::kEnd, nullptr, nullptr});
  if (target_->fifo) target_->reservation.unlock();
}

bool PrivateQueueHandle::synced() const noexcept { return queue_ && queue_->synced; }

const QueueCounters& PrivateQueueHandle::counters() const { return queue_->counters; }

HandlerRef PrivateQueueHandle::target() const { return HandlerRef(target_); }

// ---------------------------------------------------------------------------
// Client

Client::Client(Runtime& runtime) : runtime_(&runtime) {}
Client::Client(Client&&) noexcept = default;
Client& Client::operator=(Client&&) noexcept = default;
Client::~Client() = default;

void Client::close_session(std::uint64_t handler_id) noexcept { open_.erase(handler_id); }

std::shared_ptr<PrivateQueue> Client::acquire_queue(HandlerCore& target) {
  auto& rt = *runtime_->state_;
  if (target.fifo) return target.fifo;
  // A client holds at most one block per handler, so its cached queue can be
  // reused as soon as END is enqueued: the handler reads the stream in order
  // and treats everything after END as the queue's next appearance.
  if (rt.config.queue_cache) {
    auto& cached = cache_[target.id];
    if (cached) {
      rt.queues_reused.fetch_add(1, std::memory_order_relaxed);
      return cached;
    }
    cached = std::make_shared<PrivateQueue>(rt.config.private_queue_capacity,
                                            rt.config.spin_yields);
    rt.queues_created.fetch_add(1, std::memory_order_relaxed);
    return cached;
  }
  rt.queues_created.fetch_add(1, std::memory_order_relaxed);
  return std::make_shared<PrivateQueue>(rt.config.private_queue_capacity,
                                        rt.config.spin_yields);
}

// Same contract as reserve_multi with one handler, without its bookkeeping.
PrivateQueueHandle Client::reserve(const HandlerRef& handler) {
  auto& rt = *runtime_->state_;
  if (rt.stopping.load(std::memory_order_acquire)) {
    throw Error(Errc::kRuntimeShutdown, "reserve after shutdown");
  }
  rt.maybe_yield();
  if (!handler.valid()) throw std::invalid_argument("reserve: invalid handler reference");
  HandlerCore& h = *handler.core_;
  if (open_.contains(h.id)) {
    throw Error(Errc::kSessionAlreadyOpen,
                "client already holds an open block on handler " + std::to_string(h.id));
  }
  const std::uint64_t session = rt.next_session_id.fetch_add(1, std::memory_order_relaxed);
  if (rt.config.mode == Mode::kLockBaseline && !h.reservation.try_lock()) {
    rt.reservations_blocked.fetch_add(1, std::memory_order_relaxed);
    h.reservation.lock();
  }
  std::shared_ptr<PrivateQueue> queue = acquire_queue(h);
  queue->synced = false;
  if (rt.config.mode == Mode::kQoQ) {
    try {
      h.qoq.enqueue(queue);
    } catch (const Error&) {
      throw Error(Errc::kRuntimeShutdown, "handler queue closed");
    }
  }
  open_.insert(h.id);
  PrivateQueueHandle out(this, handler.core_, std::move(queue), session);
  rt.maybe_yield();
  return out;
}

std::vector<PrivateQueueHandle> Client::reserve_multi(std::span<const HandlerRef> handlers) {
  auto& rt = *runtime_->state_;
  if (handlers.empty()) {
    throw std::invalid_argument("reserve_multi: empty handler list");
  }
  if (rt.stopping.load(std::memory_order_acquire)) {
    throw Error(Errc::kRuntimeShutdown, "reserve after shutdown");
  }
  rt.maybe_yield();

  // Lock order: ascending handler id.
  std::vector<HandlerCore*> ordered;
  ordered.reserve(handlers.size());
  for (const auto& h : handlers) {
    if (!h.valid()) throw std::invalid_argument("reserve: invalid handler reference");
    ordered.push_back(h.core_.get());
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const HandlerCore* a, const HandlerCore* b) { return a->id < b->id; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->id == ordered[i - 1]->id) {
      throw Error(Errc::kDuplicateHandler,
                  "handler " + std::to_string(ordered[i]->id) + " listed twice");
    }
  }
  for (const HandlerCore* h : ordered) {
    if (open_.contains(h->id)) {
      throw Error(Errc::kSessionAlreadyOpen,
                  "client already holds an open block on handler " + std::to_string(h->id));
    }
  }

  const std::uint64_t session = rt.next_session_id.fetch_add(1, std::memory_order_relaxed);
  std::vector<std::shared_ptr<PrivateQueue>> queues(handlers.size());

  if (rt.config.mode == Mode::kLockBaseline) {
    for (HandlerCore* h : ordered) {
      if (!h->reservation.try_lock()) {
        rt.reservations_blocked.fetch_add(1, std::memory_order_relaxed);
        h->reservation.lock();
      }
    }
    for (std::size_t i = 0; i < handlers.size(); ++i) {
      queues[i] = acquire_queue(*handlers[i].core_);
      queues[i]->synced = false;
    }
  } else {
    for (std::size_t i = 0; i < handlers.size(); ++i) {
      queues[i] = acquire_queue(*handlers[i].core_);
      queues[i]->synced = false;
    }
    auto enqueue_all = [&] {
      for (std::size_t i = 0; i < handlers.size(); ++i) {
        try {
          handlers[i].core_->qoq.enqueue(queues[i]);
        } catch (const Error&) {
          throw Error(Errc::kRuntimeShutdown, "handler queue closed");
        }
      }
    };
    if (handlers.size() == 1) {
      enqueue_all();
    } else {
      for (HandlerCore* h : ordered) h->group_lock.lock();
      try {
        enqueue_all();
      } catch (...) {
        for (HandlerCore* h : ordered) h->group_lock.unlock();
        throw;
      }
      for (HandlerCore* h : ordered) h->group_lock.unlock();
    }
  }

  std::vector<PrivateQueueHandle> out;
  out.reserve(handlers.size());
  for (std::size_t i = 0; i < handlers.size(); ++i) {
    open_.insert(handlers[i].core_->id);
    out.push_back(PrivateQueueHandle(this, handlers[i].core_, std::move(queues[i]), session));
  }
  rt.maybe_yield();
  return out;
}

// ---------------------------------------------------------------------------
// Runtime

Runtime::Runtime(RuntimeConfig config)
    : state_(std::make_unique<detail::RuntimeState>(config)) {}

Runtime::~Runtime() {
  try {
    shutdown();
  } catch (...) {
    // Poison was already reported on stderr when it happened.
  }
}

const RuntimeConfig& Runtime::config() const noexcept { return state_->config; }

bool Runtime::stopping() const noexcept {
  return state_->stopping.load(std::memory_order_acquire);
}

HandlerRef Runtime::spawn_core(std::unique_ptr<StateBase> state) {
  auto& rt = *state_;
  if (rt.stopping.load(std::memory_order_acquire)) {
    throw Error(Errc::kRuntimeShutdown, "spawn after shutdown");
  }
  auto core = std::make_shared<HandlerCore>(
      rt, rt.next_handler_id.fetch_add(1, std::memory_order_relaxed), std::move(state));
  {
    std::lock_guard<std::mutex> lock(rt.handlers_mutex);
    rt.handlers.push_back(core);
  }
  rt.pool.launch([core] { core->run(); });
  return HandlerRef(core);
}

RuntimeStats Runtime::stats() const noexcept {
  const auto& rt = *state_;
  RuntimeStats s;
  s.sync_roundtrips = rt.sync_roundtrips.load(std::memory_order_relaxed);
  s.syncs_elided = rt.syncs_elided.load(std::memory_order_relaxed);
  s.calls_enqueued = rt.calls_enqueued.load(std::memory_order_relaxed);
  s.queues_created = rt.queues_created.load(std::memory_order_relaxed);
  s.queues_reused = rt.queues_reused.load(std::memory_order_relaxed);
  s.reservations_blocked = rt.reservations_blocked.load(std::memory_order_relaxed);
  return s;
}

RuntimeStats Runtime::shutdown() {
  auto& rt = *state_;
  std::vector<std::shared_ptr<HandlerCore>> handlers;
  {
    std::lock_guard<std::mutex> lock(rt.handlers_mutex);
    if (!rt.shut_down) {
      rt.shut_down = true;
      rt.stopping.store(true, std::memory_order_release);
      handlers = rt.handlers;
    }
  }
  if (!handlers.empty()) {
    for (auto& h : handlers) h->close();
    rt.pool.wait_idle();
    rt.pool.stop();
    // Handler states may hold references to each other; drop them now.
    for (auto& h : handlers) h->release_state();
    std::lock_guard<std::mutex> lock(rt.handlers_mutex);
    rt.handlers.clear();
  }
  rt.pool.stop();
  std::lock_guard<std::mutex> lock(rt.poison_mutex);
  if (!rt.first_poison.empty()) {
    auto what = std::exchange(rt.first_poison, std::string());
    throw Error(Errc::kHandlerPoisoned, what);
  }
  return stats();
}

}  // namespace qs
