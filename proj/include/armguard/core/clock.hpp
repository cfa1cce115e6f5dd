#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

#include "armguard/core/error.hpp"
#include "armguard/core/types.hpp"

namespace armguard {

/// Discrete-event clock. Events run in (time, insertion order); time never decreases.
/// Single owner: nothing here is synchronized.
class VirtualClock {
 public:
  using EventId = std::uint64_t;
  using Action = std::function<void()>;

  explicit VirtualClock(TimeMs start = 0) : now_(start) {}

  VirtualClock(const VirtualClock&) = delete;
  VirtualClock& operator=(const VirtualClock&) = delete;

  TimeMs now() const noexcept { return now_; }

  EventId schedule_at(TimeMs at, Action action) {
    if (at < now_) throw Error(ErrorCode::InvalidArgument, "cannot schedule in the past");
    EventId id = next_id_++;
    queue_.push(Event{at, id, std::move(action)});
    live_.insert(id);
    return id;
  }

  EventId schedule_after(TimeMs delay, Action action) { return schedule_at(now_ + delay, std::move(action)); }

  void cancel(EventId id) { live_.erase(id); }

  bool empty() const noexcept { return live_.empty(); }
  std::size_t pending() const noexcept { return live_.size(); }

  std::optional<TimeMs> next_time() {
    drop_cancelled_head();
    if (queue_.empty()) return std::nullopt;
    return queue_.top().at;
  }

  /// Runs one event. Returns false when the queue is exhausted.
  bool step() {
    drop_cancelled_head();
    if (queue_.empty()) return false;
    Event ev = queue_.top();
    queue_.pop();
    live_.erase(ev.id);
    now_ = ev.at;
    ev.action();
    return true;
  }

  /// Runs every event with time <= until, then parks the clock at `until`.
  void run_until(TimeMs until) {
    while (true) {
      auto t = next_time();
      if (!t || *t > until) break;
      step();
    }
    if (until > now_) now_ = until;
  }

  void run_all() {
    while (step()) {
    }
  }

  /// Moves time forward without running anything; used by the wall-clock driver.
  void advance_to(TimeMs t) {
    if (t > now_) now_ = t;
  }

 private:
  struct Event {
    TimeMs at;
    EventId id;
    Action action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      return a.at != b.at ? a.at > b.at : a.id > b.id;
    }
  };

  void drop_cancelled_head() {
    while (!queue_.empty() && !live_.contains(queue_.top().id)) queue_.pop();
  }

  TimeMs now_;
  EventId next_id_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_set<EventId> live_;
};

}  // namespace armguard
