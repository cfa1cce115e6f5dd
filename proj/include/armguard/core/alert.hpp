#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "armguard/core/error.hpp"
#include "armguard/core/types.hpp"

namespace armguard {

enum class AlertState { Pending, Verifying, Confirmed, Rejected, Notified, Dismissed };

inline std::string_view to_string(AlertState s) {
  switch (s) {
    case AlertState::Pending: return "pending";
    case AlertState::Verifying: return "verifying";
    case AlertState::Confirmed: return "confirmed";
    case AlertState::Rejected: return "rejected";
    case AlertState::Notified: return "notified";
    case AlertState::Dismissed: return "dismissed";
  }
  return "pending";
}

inline AlertState alert_state_from_string(std::string_view s) {
  for (AlertState st : {AlertState::Pending, AlertState::Verifying, AlertState::Confirmed, AlertState::Rejected,
                        AlertState::Notified, AlertState::Dismissed}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown alert state '" + std::string(s) + "'");
}

inline constexpr bool is_terminal(AlertState s) noexcept {
  return s == AlertState::Rejected || s == AlertState::Notified || s == AlertState::Dismissed;
}

/// The legal-transition graph. Dismissed is reachable from every non-terminal state.
inline constexpr bool is_legal_transition(AlertState from, AlertState to) noexcept {
  if (is_terminal(from)) return false;
  if (to == AlertState::Dismissed) return true;
  switch (from) {
    case AlertState::Pending: return to == AlertState::Verifying;
    case AlertState::Verifying: return to == AlertState::Confirmed || to == AlertState::Rejected;
    case AlertState::Confirmed: return to == AlertState::Notified;
    default: return false;
  }
}

struct AlertHistoryEntry {
  AlertState state;
  TimeMs at;
  std::string actor;

  friend bool operator==(const AlertHistoryEntry&, const AlertHistoryEntry&) = default;
};

/// What the alert refers to; the pixels live in the clip store under alert_id.
struct ClipRef {
  std::string device_id;
  std::uint64_t msg_id = 0;
  WeaponClass trigger_class = WeaponClass::Gun;
  double momentum = 0.0;
  TimeMs captured_at = 0;
  FrameSeq trigger_seq = 0;

  friend bool operator==(const ClipRef&, const ClipRef&) = default;
};

struct AlertEvent {
  std::string alert_id;
  ClipRef clip;
  AlertState state = AlertState::Pending;
  std::optional<double> verifier_score;
  std::vector<AlertHistoryEntry> history;

  static AlertEvent create(std::string id, ClipRef clip, TimeMs at, std::string actor) {
    AlertEvent a;
    a.alert_id = std::move(id);
    a.clip = std::move(clip);
    a.history.push_back({AlertState::Pending, at, std::move(actor)});
    return a;
  }

  bool has_been(AlertState s) const {
    for (const auto& h : history) {
      if (h.state == s) return true;
    }
    return false;
  }

  std::optional<TimeMs> entered_at(AlertState s) const {
    for (const auto& h : history) {
      if (h.state == s) return h.at;
    }
    return std::nullopt;
  }

  friend bool operator==(const AlertEvent&, const AlertEvent&) = default;
};

/// Returns the alert advanced to `to`; throws IllegalTransition for edges outside the graph.
inline AlertEvent transition(AlertEvent alert, AlertState to, std::string actor, TimeMs at) {
  if (!is_legal_transition(alert.state, to)) {
    throw Error(ErrorCode::IllegalTransition,
                std::string(to_string(alert.state)) + " -> " + std::string(to_string(to)) + " for " + alert.alert_id);
  }
  alert.state = to;
  alert.history.push_back({to, at, std::move(actor)});
  return alert;
}

inline json to_json(const AlertEvent& a) {
  json history = json::array();
  for (const auto& h : a.history) {
    history.push_back({{"state", std::string(to_string(h.state))}, {"t", h.at}, {"actor", h.actor}});
  }
  return json{{"alert_id", a.alert_id},
              {"device_id", a.clip.device_id},
              {"msg_id", a.clip.msg_id},
              {"trigger_class", std::string(to_string(a.clip.trigger_class))},
              {"momentum", a.clip.momentum},
              {"captured_at", a.clip.captured_at},
              {"trigger_seq", a.clip.trigger_seq},
              {"state", std::string(to_string(a.state))},
              {"verifier_score", a.verifier_score ? json(*a.verifier_score) : json(nullptr)},
              {"clip_url", "/alerts/" + a.alert_id + "/clip"},
              {"history", history}};
}

}  // namespace armguard
