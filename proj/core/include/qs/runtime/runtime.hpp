#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <tuple>
#include <type_traits>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "qs/error.hpp"
#include "qs/runtime/unique_function.hpp"

namespace qs {

namespace detail {
class HandlerCore;
struct PrivateQueue;
struct RuntimeState;
}  // namespace detail

/// How clients reach a handler.
enum class Mode {
  kQoQ,           // queue-of-queues: reservations never block
  kLockBaseline,  // one FIFO per handler, reservation holds a handler lock
};

struct RuntimeConfig {
  Mode mode = Mode::kQoQ;
  bool dynamic_coalescing = true;
  unsigned worker_threads = 0;  // 0 selects std::thread::hardware_concurrency()
  bool queue_cache = true;
  std::size_t private_queue_capacity = 1024;
  std::size_t fiber_stack_size = 128 * 1024;
  int spin_yields = 0;  // fiber yields before a blocked endpoint parks
  /// When set, runtime scheduling points yield at random, seeded from this.
  std::optional<std::uint64_t> chaos_seed;
};

struct RuntimeStats {
  std::uint64_t sync_roundtrips = 0;
  std::uint64_t syncs_elided = 0;
  std::uint64_t calls_enqueued = 0;
  std::uint64_t queues_created = 0;
  std::uint64_t queues_reused = 0;
  std::uint64_t reservations_blocked = 0;  // lock baseline only
};

/// Per-private-queue counters, maintained on the client side.
struct QueueCounters {
  std::uint64_t syncs_sent = 0;
  std::uint64_t syncs_elided = 0;
  std::uint64_t calls_enqueued = 0;
};

using Task = UniqueFunction<void()>;

class Client;
class Runtime;

/// Lets other handlers on this worker thread run. Used by handlers that poll.
void yield_now();

/// Untyped identity of a handler. Copyable and sendable between threads.
class HandlerRef {
 public:
  HandlerRef() = default;

  std::uint64_t id() const noexcept;
  bool valid() const noexcept { return core_ != nullptr; }
  /// True once a call running on this handler has thrown.
  bool poisoned() const noexcept;

  friend bool operator==(const HandlerRef& a, const HandlerRef& b) noexcept {
    return a.core_ == b.core_;
  }

 protected:
  explicit HandlerRef(std::shared_ptr<detail::HandlerCore> core) : core_(std::move(core)) {}
  void* raw_state() const noexcept;

  std::shared_ptr<detail::HandlerCore> core_;

  friend class Runtime;
  friend class Client;
  friend class PrivateQueueHandle;
};

/// Typed handler reference: the handler owns one object of type T.
template <class T>
class Handler : public HandlerRef {
 public:
  Handler() = default;

 private:
  explicit Handler(HandlerRef ref) : HandlerRef(std::move(ref)) {}
  T* state() const noexcept { return static_cast<T*>(raw_state()); }

  friend class Runtime;
  friend class Client;
};

/// A client's open reservation of one handler (a private queue). Move-only;
/// used by one client thread at a time. Destruction ends an open block.
class PrivateQueueHandle {
 public:
  PrivateQueueHandle() = default;
  PrivateQueueHandle(PrivateQueueHandle&& other) noexcept;
  PrivateQueueHandle& operator=(PrivateQueueHandle&& other) noexcept;
  PrivateQueueHandle(const PrivateQueueHandle&) = delete;
  PrivateQueueHandle& operator=(const PrivateQueueHandle&) = delete;
  ~PrivateQueueHandle();

  /// Logs `task` for the handler and returns immediately.
  void async_call(Task task);

  /// Returns once every call logged so far has run and the handler is parked
  /// on this queue. Elided when the queue is already synced and dynamic
  /// coalescing is on.
  void sync();

  /// Runs `f` on the calling client after synchronizing.
  template <class F>
  std::invoke_result_t<F&> query(F&& f) {
    sync();
    return f();
  }

  /// Sends the END marker; the handler moves on to the next client.
  void end_block();

  bool open() const noexcept { return open_; }
  bool synced() const noexcept;
  std::uint64_t session_id() const noexcept { return session_; }
  const QueueCounters& counters() const;
  HandlerRef target() const;

 private:
  PrivateQueueHandle(Client* client, std::shared_ptr<detail::HandlerCore> target,
                     std::shared_ptr<detail::PrivateQueue> queue, std::uint64_t session);
  void require_open(const char* op) const;
  void release() noexcept;

  Client* client_ = nullptr;
  std::shared_ptr<detail::HandlerCore> target_;
  std::shared_ptr<detail::PrivateQueue> queue_;
  std::uint64_t session_ = 0;
  bool open_ = false;

  friend class Client;
};

/// Typed view of a reservation: calls and queries receive the handler's T&.
template <class T>
class Session {
 public:
  Session() = default;

  /// Asynchronous call; `f(T&)` runs later on the handler.
  template <class F>
  void call(F&& f) {
    handle_.async_call(
        [state = state_, fn = std::forward<F>(f)]() mutable { fn(*state); });
  }

  /// Synchronous query; `f(T&)` runs on the client once the handler is synced.
  template <class F>
  std::invoke_result_t<F&, T&> query(F&& f) {
    handle_.sync();
    return f(*state_);
  }

  void end() { handle_.end_block(); }
  bool open() const noexcept { return handle_.open(); }
  PrivateQueueHandle& handle() noexcept { return handle_; }
  const PrivateQueueHandle& handle() const noexcept { return handle_; }

 private:
  Session(PrivateQueueHandle handle, T* state) : handle_(std::move(handle)), state_(state) {}

  PrivateQueueHandle handle_;
  T* state_ = nullptr;

  friend class Client;
};

/// Identity of a client: owns its cache of private queues and tracks which
/// handlers it currently holds open blocks on. At most one open block per
/// handler. Must outlive the handles it produced.
class Client {
 public:
  explicit Client(Runtime& runtime);
  Client(Client&&) noexcept;
  Client& operator=(Client&&) noexcept;
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;
  ~Client();

  PrivateQueueHandle reserve(const HandlerRef& handler);

  /// Reserves all handlers atomically with respect to other group
  /// reservations; handles come back in argument order.
  std::vector<PrivateQueueHandle> reserve_multi(std::span<const HandlerRef> handlers);

  template <class T>
  Session<T> reserve(const Handler<T>& handler) {
    return Session<T>(reserve(static_cast<const HandlerRef&>(handler)), handler.state());
  }

  template <class... Ts>
  std::tuple<Session<Ts>...> reserve_all(const Handler<Ts>&... handlers) {
    const HandlerRef refs[] = {static_cast<const HandlerRef&>(handlers)...};
    auto handles = reserve_multi(refs);
    std::size_t i = 0;
    return std::tuple<Session<Ts>...>{
        Session<Ts>(std::move(handles[i++]), handlers.state())...};
  }

  template <class T>
  std::vector<Session<T>> reserve_all(std::span<const Handler<T>> handlers) {
    std::vector<HandlerRef> refs(handlers.begin(), handlers.end());
    auto handles = reserve_multi(refs);
    std::vector<Session<T>> out;
    out.reserve(handles.size());
    for (std::size_t i = 0; i < handles.size(); ++i) {
      out.push_back(Session<T>(std::move(handles[i]), handlers[i].state()));
    }
    return out;
  }

  Runtime& runtime() const noexcept { return *runtime_; }

 private:
  std::shared_ptr<detail::PrivateQueue> acquire_queue(detail::HandlerCore& target);
  void close_session(std::uint64_t handler_id) noexcept;

  Runtime* runtime_;
  std::unordered_map<std::uint64_t, std::shared_ptr<detail::PrivateQueue>> cache_;
  std::unordered_set<std::uint64_t> open_;

  friend class PrivateQueueHandle;
};

/// Owns the worker pool and every handler spawned on it.
class Runtime {
 public:
  explicit Runtime(RuntimeConfig config = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Spawns a handler owning a T constructed from `args`.
  template <class T, class... Args>
  Handler<T> spawn(Args&&... args) {
    auto holder = std::make_unique<StateHolder<T>>(std::forward<Args>(args)...);
    return Handler<T>(spawn_core(std::move(holder)));
  }

  /// Closes every queue-of-queues, waits for handler loops to drain, stops the
  /// pool and returns aggregated counters. Idempotent. Throws
  /// Errc::kHandlerPoisoned if any call threw during the run.
  RuntimeStats shutdown();

  RuntimeStats stats() const noexcept;
  const RuntimeConfig& config() const noexcept;
  bool stopping() const noexcept;

  struct StateBase {
    virtual ~StateBase() = default;
    virtual void* get() noexcept = 0;
  };

 private:
  template <class T>
  struct StateHolder final : StateBase {
    template <class... Args>
    explicit StateHolder(Args&&... args) : value(std::forward<Args>(args)...) {}
    void* get() noexcept override { return &value; }
    T value;
  };

  HandlerRef spawn_core(std::unique_ptr<StateBase> state);

  std::unique_ptr<detail::RuntimeState> state_;

  friend class Client;
  friend class PrivateQueueHandle;
};

}  // namespace qs
