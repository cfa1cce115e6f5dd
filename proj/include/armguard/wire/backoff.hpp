#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>

#include "armguard/core/types.hpp"

namespace armguard::wire {

/// Exponential backoff: the wait after attempt a (1-based) is min(base * factor^(a-1), cap).
/// max_attempts counts every send, including the first.
struct RetryPolicy {
  TimeMs base_ms = 500;
  double factor = 2.0;
  TimeMs cap_ms = 8'000;
  std::uint32_t max_attempts = 6;

  /// Delay before attempt `attempt + 1`, or nullopt once the budget is spent.
  std::optional<TimeMs> delay_after(std::uint32_t attempt) const {
    if (attempt == 0 || attempt >= max_attempts) return std::nullopt;
    double d = static_cast<double>(base_ms);
    for (std::uint32_t i = 1; i < attempt; ++i) {
      d *= factor;
      if (d >= static_cast<double>(cap_ms)) break;
    }
    return std::min(static_cast<TimeMs>(d), cap_ms);
  }
};

}  // namespace armguard::wire
