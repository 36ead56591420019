#pragma once

#include <atomic>
#include <optional>
#include <utility>

#include "qs/channels/parker.hpp"
#include "qs/error.hpp"

namespace qs {

/// Unbounded multiple-producer/single-consumer FIFO channel.
///
/// Intrusive-stub linked queue: enqueue is one atomic exchange plus a store,
/// so producers never wait on each other. Items from one producer keep their
/// relative order. The consumer parks when the queue is empty.
template <class T>
class MpscChannel {
 public:
  explicit MpscChannel(int spin_yields = 0) : parker_(spin_yields) {
    Node* stub = new Node;
    back_.store(stub, std::memory_order_relaxed);
    front_ = stub;
  }

  MpscChannel(const MpscChannel&) = delete;
  MpscChannel& operator=(const MpscChannel&) = delete;

  ~MpscChannel() {
    while (front_ != nullptr) {
      Node* next = front_->next.load(std::memory_order_relaxed);
      delete front_;
      front_ = next;
    }
  }

  /// Callable from any number of threads. Throws ChannelClosed after close().
  void enqueue(T item) {
    inflight_.fetch_add(1, std::memory_order_seq_cst);
    if (closed_.load(std::memory_order_seq_cst)) {
      inflight_.fetch_sub(1, std::memory_order_release);
      parker_.wake();
      throw Error(Errc::kChannelClosed, "enqueue on closed mpsc channel");
    }
    Node* node = new Node(std::move(item));
    Node* prev = back_.exchange(node, std::memory_order_acq_rel);
    prev->next.store(node, std::memory_order_release);
    inflight_.fetch_sub(1, std::memory_order_release);
    parker_.wake();
  }

  /// Consumer only. Blocks until an item arrives; nullopt once closed and
  /// every accepted item has been drained.
  std::optional<T> dequeue() {
    parker_.wait_until([this] { return readable() || drained_closed(); });
    return try_dequeue();
  }

  std::optional<T> try_dequeue() {
    Node* next = front_->next.load(std::memory_order_acquire);
    if (next == nullptr) return std::nullopt;
    std::optional<T> out(std::move(next->value));
    next->value.reset();
    delete front_;
    front_ = next;
    return out;
  }

  /// Idempotent; wakes a parked consumer.
  void close() {
    closed_.store(true, std::memory_order_seq_cst);
    parker_.wake();
  }

  bool closed() const noexcept { return closed_.load(std::memory_order_acquire); }

 private:
  struct Node {
    Node() = default;
    explicit Node(T v) : value(std::move(v)) {}
    std::atomic<Node*> next{nullptr};
    std::optional<T> value;
  };

  bool readable() const noexcept {
    return front_->next.load(std::memory_order_acquire) != nullptr;
  }

  bool drained_closed() const noexcept {
    return closed_.load(std::memory_order_seq_cst) &&
           inflight_.load(std::memory_order_seq_cst) == 0 && !readable();
  }

  alignas(64) std::atomic<Node*> back_;
  std::atomic<int> inflight_{0};
  std::atomic<bool> closed_{false};
  alignas(64) Node* front_;
  Parker parker_;
};

}  // namespace qs
