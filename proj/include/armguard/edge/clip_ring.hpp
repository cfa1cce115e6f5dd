#pragma once

#include <array>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::edge {

/// Fixed ring of the most recent frames; the oldest is overwritten once full.
template <std::size_t Capacity = Clip::kFrames>
class FrameRing {
 public:
  static constexpr std::size_t capacity = Capacity;

  void push(Frame frame) {
    slots_[head_] = std::move(frame);
    head_ = (head_ + 1) % Capacity;
    if (count_ < Capacity) ++count_;
  }

  std::size_t size() const noexcept { return count_; }
  bool warm() const noexcept { return count_ == Capacity; }
  void clear() noexcept {
    count_ = 0;
    head_ = 0;
  }

  /// Frames oldest to newest.
  std::vector<Frame> snapshot() const {
    std::vector<Frame> out;
    out.reserve(count_);
    std::size_t start = (head_ + Capacity - count_) % Capacity;
    for (std::size_t i = 0; i < count_; ++i) out.push_back(slots_[(start + i) % Capacity]);
    return out;
  }

 private:
  std::array<Frame, Capacity> slots_{};
  std::size_t head_ = 0;
  std::size_t count_ = 0;
};

using ClipRing = FrameRing<Clip::kFrames>;

}  // namespace armguard::edge
