#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <utility>

#include "qs/channels/parker.hpp"
#include "qs/error.hpp"

namespace qs {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// Single-producer/single-consumer FIFO channel.
///
/// Storage is a linked list of segments whose size grows geometrically, so an
/// idle or short-lived channel costs a few hundred bytes while a busy one
/// amortizes allocation. `capacity` bounds the number of buffered items; the
/// producer blocks while the channel is full. Exactly one thread (or fiber)
/// may enqueue and one may dequeue at any time; either endpoint may migrate
/// provided the hand-over is itself synchronized.
template <class T>
class SpscChannel {
 public:
  explicit SpscChannel(std::size_t capacity = kUnbounded, int spin_yields = 0)
      : capacity_(capacity == 0 ? 1 : capacity),
        not_empty_(spin_yields),
        not_full_(spin_yields) {
    head_ = tail_ = new Segment(kFirstSegment);
  }

  SpscChannel(const SpscChannel&) = delete;
  SpscChannel& operator=(const SpscChannel&) = delete;

  ~SpscChannel() {
    // Destroy items that were never consumed.
    std::size_t remaining = pushed_.load(std::memory_order_relaxed) -
                            popped_.load(std::memory_order_relaxed);
    Segment* seg = head_;
    std::size_t idx = head_idx_;
    while (remaining > 0) {
      if (idx == seg->size) {
        seg = seg->next.load(std::memory_order_relaxed);
        idx = 0;
        continue;
      }
      std::destroy_at(seg->slot(idx));
      ++idx;
      --remaining;
    }
    while (head_ != nullptr) {
      Segment* next = head_->next.load(std::memory_order_relaxed);
      delete head_;
      head_ = next;
    }
    delete spare_.load(std::memory_order_relaxed);
  }

  std::size_t capacity() const noexcept { return capacity_; }

  /// Appends `item`; blocks while the channel holds `capacity` items.
  void enqueue(T item) {
    if (closed_.load(std::memory_order_acquire)) {
      throw Error(Errc::kChannelClosed, "enqueue on closed spsc channel");
    }
    const std::size_t pushed = pushed_.load(std::memory_order_relaxed);
    if (capacity_ != kUnbounded &&
        pushed - popped_.load(std::memory_order_acquire) >= capacity_) {
      not_full_.wait_until([&] {
        return pushed - popped_.load(std::memory_order_acquire) < capacity_;
      });
    }
    if (tail_idx_ == tail_->size) {
      Segment* seg = take_spare(std::min(tail_->size * 2, kMaxSegment));
      tail_->next.store(seg, std::memory_order_release);
      tail_ = seg;
      tail_idx_ = 0;
    }
    ::new (tail_->slot(tail_idx_)) T(std::move(item));
    ++tail_idx_;
    pushed_.store(pushed + 1, std::memory_order_release);
    not_empty_.wake();
  }

  /// Blocks until an item is available; returns nullopt once the channel is
  /// closed and drained.
  std::optional<T> dequeue() {
    not_empty_.wait_until([this] { return readable() || drained_closed(); });
    return try_dequeue();
  }

  std::optional<T> try_dequeue() {
    const std::size_t popped = popped_.load(std::memory_order_relaxed);
    if (pushed_.load(std::memory_order_acquire) == popped) return std::nullopt;
    if (head_idx_ == head_->size) {
      Segment* next = head_->next.load(std::memory_order_acquire);
      recycle(head_);
      head_ = next;
      head_idx_ = 0;
    }
    T* slot = head_->slot(head_idx_);
    std::optional<T> out(std::move(*slot));
    std::destroy_at(slot);
    ++head_idx_;
    popped_.store(popped + 1, std::memory_order_release);
    if (capacity_ != kUnbounded) not_full_.wake();
    return out;
  }

  /// Idempotent. Wakes a blocked consumer; buffered items remain readable.
  void close() {
    closed_.store(true, std::memory_order_release);
    not_empty_.wake();
  }

  bool closed() const noexcept { return closed_.load(std::memory_order_acquire); }

  /// Snapshot; exact only when called by one of the two endpoints.
  std::size_t size() const noexcept {
    return pushed_.load(std::memory_order_acquire) -
           popped_.load(std::memory_order_acquire);
  }

  bool empty() const noexcept { return size() == 0; }

 private:
  static constexpr std::size_t kFirstSegment = 8;
  static constexpr std::size_t kMaxSegment = 256;

  struct Segment {
    explicit Segment(std::size_t n)
        : size(n),
          storage(static_cast<std::byte*>(::operator new(
              n * sizeof(T), std::align_val_t{alignof(T)}))) {}
    ~Segment() { ::operator delete(storage, std::align_val_t{alignof(T)}); }
    Segment(const Segment&) = delete;
    Segment& operator=(const Segment&) = delete;

    T* slot(std::size_t i) {
      return std::launder(reinterpret_cast<T*>(storage + i * sizeof(T)));
    }

    std::size_t size;
    std::byte* storage;
    std::atomic<Segment*> next{nullptr};
  };

  bool readable() const noexcept {
    return pushed_.load(std::memory_order_acquire) !=
           popped_.load(std::memory_order_relaxed);
  }

  bool drained_closed() const noexcept {
    return closed_.load(std::memory_order_acquire) && !readable();
  }

  // Consumer side: keep one drained segment around for the producer.
  void recycle(Segment* seg) {
    seg->next.store(nullptr, std::memory_order_relaxed);
    Segment* old = spare_.exchange(seg, std::memory_order_acq_rel);
    delete old;
  }

  // Producer side.
  Segment* take_spare(std::size_t wanted) {
    Segment* seg = spare_.exchange(nullptr, std::memory_order_acq_rel);
    if (seg != nullptr && seg->size >= wanted / 2) return seg;
    delete seg;
    return new Segment(wanted);
  }

  const std::size_t capacity_;

  alignas(64) std::atomic<std::size_t> pushed_{0};
  Segment* tail_;
  std::size_t tail_idx_ = 0;

  alignas(64) std::atomic<std::size_t> popped_{0};
  Segment* head_;
  std::size_t head_idx_ = 0;

  alignas(64) std::atomic<Segment*> spare_{nullptr};
  std::atomic<bool> closed_{false};
  Parker not_empty_;
  Parker not_full_;
};

}  // namespace qs
