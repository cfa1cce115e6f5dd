#pragma once

#include <deque>
#include <optional>

#include "armguard/core/types.hpp"

namespace armguard::edge {

struct Trigger {
  WeaponClass weapon;
  double value;  // momentum (or raw confidence in instantaneous mode) at the trigger

  friend bool operator==(const Trigger&, const Trigger&) = default;
};

/// Per-class window of the last n+1 confidences, newest first, and the weighted
/// score momentum_c = Σ_i q_c(t-i) * k^i over that window.
class MomentumState {
 public:
  MomentumState() = default;
  MomentumState(double k, std::uint32_t n) : k_(k), n_(n) {}

  void push(const DetectionScores& scores) {
    for (WeaponClass c : kWeaponClasses) {
      auto& q = queues_[index_of(c)];
      q.push_front(scores[c]);
      while (q.size() > capacity()) q.pop_back();
      // Horner from the oldest entry: q0 + k*(q1 + k*(q2 + ...)).
      double m = 0.0;
      for (auto it = q.rbegin(); it != q.rend(); ++it) m = m * k_ + *it;
      momentum_[c] = m;
    }
  }

  /// Changes k or n. The window is truncated when it shrinks.
  void reconfigure(double k, std::uint32_t n) {
    k_ = k;
    n_ = n;
    for (WeaponClass c : kWeaponClasses) {
      auto& q = queues_[index_of(c)];
      while (q.size() > capacity()) q.pop_back();
      double m = 0.0;
      for (auto it = q.rbegin(); it != q.rend(); ++it) m = m * k_ + *it;
      momentum_[c] = m;
    }
  }

  double momentum(WeaponClass c) const noexcept { return momentum_[c]; }
  const std::deque<double>& queue(WeaponClass c) const noexcept { return queues_[index_of(c)]; }
  std::size_t capacity() const noexcept { return static_cast<std::size_t>(n_) + 1; }
  double k() const noexcept { return k_; }
  std::uint32_t n() const noexcept { return n_; }

  /// Latest confidence pushed for a class, 0 when nothing has been pushed.
  double latest(WeaponClass c) const noexcept {
    const auto& q = queues_[index_of(c)];
    return q.empty() ? 0.0 : q.front();
  }

 private:
  double k_ = 0.5;
  std::uint32_t n_ = 5;
  std::array<std::deque<double>, 2> queues_;
  PerClass<double> momentum_{};
};

inline MomentumState momentum_push(MomentumState state, const DetectionScores& scores) {
  state.push(scores);
  return state;
}

namespace detail {
inline std::optional<Trigger> pick_exceeding(const PerClass<double>& values, const PerClass<double>& thresholds) {
  std::optional<Trigger> best;
  double best_excess = 0.0;
  for (WeaponClass c : kWeaponClasses) {
    double excess = values[c] - thresholds[c];
    if (values[c] > thresholds[c] && (!best || excess > best_excess)) {
      best = Trigger{c, values[c]};
      best_excess = excess;
    }
  }
  return best;
}
}  // namespace detail

/// The class whose momentum strictly exceeds its threshold. When both do, the
/// larger excess wins; an exact tie on excess goes to Gun.
inline std::optional<Trigger> check_trigger(const MomentumState& state, const PerClass<double>& thresholds) {
  PerClass<double> m;
  for (WeaponClass c : kWeaponClasses) m[c] = state.momentum(c);
  return detail::pick_exceeding(m, thresholds);
}

/// Baseline without temporal filtering: fires on a single frame whose confidence
/// exceeds threshold / Σ k^i, the per-frame level a sustained stream would need.
inline std::optional<Trigger> check_instant_trigger(const DetectionScores& scores, const PerClass<double>& thresholds,
                                                    double weight_sum) {
  PerClass<double> scaled;
  for (WeaponClass c : kWeaponClasses) scaled[c] = thresholds[c] / weight_sum;
  return detail::pick_exceeding(scores.confidence, scaled);
}

}  // namespace armguard::edge
