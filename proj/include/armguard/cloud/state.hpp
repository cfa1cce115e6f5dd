#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "armguard/cloud/event_log.hpp"
#include "armguard/core/alert.hpp"

namespace armguard::cloud {

inline constexpr TimeMs kHeartbeatIntervalMs = 5'000;
inline constexpr TimeMs kOnlineWindowMs = 3 * kHeartbeatIntervalMs;

struct DeviceRecord {
  std::string device_id;
  DeviceConfig config;
  std::uint64_t config_version = 1;
  std::uint64_t acked_version = 1;      // last version the device confirmed
  bool config_queued = false;           // waiting for the device to come back
  std::optional<TimeMs> config_sent_at;
  std::uint64_t config_msg_id = 0;      // msg_id of the last CONFIG_UPDATE sent
  std::uint64_t config_sent_version = 0;
  TimeMs registered_at = 0;
  std::uint64_t registrations = 0;
  std::optional<TimeMs> last_heartbeat;

  bool online(TimeMs now) const noexcept { return last_heartbeat && now - *last_heartbeat <= kOnlineWindowMs; }

  friend bool operator==(const DeviceRecord&, const DeviceRecord&) = default;
};

struct NotificationRecord {
  std::string alert_id;
  std::string channel;
  std::vector<std::string> recipients;
  std::uint32_t attempts = 0;
  std::optional<TimeMs> delivered_at;
  std::string failure;  // empty when delivered

  friend bool operator==(const NotificationRecord&, const NotificationRecord&) = default;
};

struct ProtocolFault {
  TimeMs t = 0;
  std::string device_id;
  std::string reason;

  friend bool operator==(const ProtocolFault&, const ProtocolFault&) = default;
};

/// Everything the cloud knows. Produced only by folding log records.
struct ServiceState {
  std::uint64_t last_seq = 0;
  TimeMs last_t = 0;
  std::map<std::string, DeviceRecord> devices;
  std::map<std::string, AlertEvent> alerts;  // ids are zero-padded, so map order is creation order
  std::map<std::pair<std::string, std::uint64_t>, std::string> alert_by_msg;
  std::uint64_t alerts_created = 0;
  std::map<std::string, std::pair<std::uint32_t, TimeMs>> notify_attempts;  // alert -> (attempts, last attempt time)
  std::vector<NotificationRecord> notifications;
  std::vector<ProtocolFault> faults;

  const NotificationRecord* notification_for(const std::string& alert_id) const {
    for (const auto& n : notifications) {
      if (n.alert_id == alert_id) return &n;
    }
    return nullptr;
  }

  friend bool operator==(const ServiceState&, const ServiceState&) = default;
};

inline std::string format_alert_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "A-%06llu", static_cast<unsigned long long>(n));
  return buf;
}

namespace detail {

inline const std::string& str(const json& d, const char* key) {
  if (!d.contains(key) || !d[key].is_string()) throw Error(ErrorCode::CorruptLog, std::string("missing string '") + key + "'");
  return d[key].get_ref<const std::string&>();
}

template <typename T>
T num(const json& d, const char* key) {
  if (!d.contains(key) || !d[key].is_number()) throw Error(ErrorCode::CorruptLog, std::string("missing number '") + key + "'");
  return d[key].get<T>();
}

inline DeviceRecord& device(ServiceState& s, const std::string& id) {
  auto it = s.devices.find(id);
  if (it == s.devices.end()) throw Error(ErrorCode::CorruptLog, "record refers to unknown device " + id);
  return it->second;
}

inline AlertEvent& alert(ServiceState& s, const std::string& id) {
  auto it = s.alerts.find(id);
  if (it == s.alerts.end()) throw Error(ErrorCode::CorruptLog, "record refers to unknown alert " + id);
  return it->second;
}

}  // namespace detail

/// Applies one record. The live service and rebuild_state both go through here.
inline void apply_record(ServiceState& s, const LogRecord& r) {
  if (r.seq != s.last_seq + 1) {
    throw Error(ErrorCode::CorruptLog, "expected seq " + std::to_string(s.last_seq + 1) + ", got " + std::to_string(r.seq));
  }
  const json& d = r.data;
  try {
    if (r.kind == "device_registered") {
      const std::string& id = detail::str(d, "device_id");
      DeviceConfig reported = d.contains("config") ? config_from_json(d["config"]) : DeviceConfig{};
      auto [it, fresh] = s.devices.try_emplace(id);
      DeviceRecord& dev = it->second;
      if (fresh) {
        dev.device_id = id;
        dev.config = reported;
        dev.registered_at = r.t;
      } else if (reported != dev.config) {
        dev.acked_version = 0;  // device came back with other settings; ours must be re-sent
      }
      dev.registrations += 1;
      dev.last_heartbeat = r.t;
    } else if (r.kind == "heartbeat") {
      detail::device(s, detail::str(d, "device_id")).last_heartbeat = r.t;
    } else if (r.kind == "config_updated") {
      DeviceRecord& dev = detail::device(s, detail::str(d, "device_id"));
      dev.config = config_from_json(d.at("config"));
      dev.config_version = detail::num<std::uint64_t>(d, "version");
      dev.config_queued = detail::str(d, "delivery") == "queued";
    } else if (r.kind == "config_sent") {
      DeviceRecord& dev = detail::device(s, detail::str(d, "device_id"));
      dev.config_queued = false;
      dev.config_sent_at = r.t;
      dev.config_msg_id = detail::num<std::uint64_t>(d, "msg_id");
      dev.config_sent_version = detail::num<std::uint64_t>(d, "version");
    } else if (r.kind == "config_acked") {
      DeviceRecord& dev = detail::device(s, detail::str(d, "device_id"));
      dev.acked_version = std::max(dev.acked_version, detail::num<std::uint64_t>(d, "version"));
    } else if (r.kind == "alert_received") {
      ClipRef clip;
      clip.device_id = detail::str(d, "device_id");
      clip.msg_id = detail::num<std::uint64_t>(d, "msg_id");
      clip.trigger_class = weapon_class_from_string(detail::str(d, "trigger_class"));
      clip.momentum = detail::num<double>(d, "momentum");
      clip.captured_at = detail::num<TimeMs>(d, "captured_at");
      clip.trigger_seq = detail::num<FrameSeq>(d, "trigger_seq");
      const std::string& id = detail::str(d, "alert_id");
      if (s.alerts.contains(id)) throw Error(ErrorCode::CorruptLog, "duplicate alert id " + id);
      s.alert_by_msg[{clip.device_id, clip.msg_id}] = id;
      s.alerts.emplace(id, AlertEvent::create(id, clip, r.t, "device"));
      s.alerts_created += 1;
    } else if (r.kind == "alert_transition") {
      AlertEvent& a = detail::alert(s, detail::str(d, "alert_id"));
      a = transition(std::move(a), alert_state_from_string(detail::str(d, "to")), detail::str(d, "actor"), r.t);
      if (d.contains("score")) a.verifier_score = detail::num<double>(d, "score");
    } else if (r.kind == "notification_attempt") {
      auto& [count, at] = s.notify_attempts[detail::str(d, "alert_id")];
      count = detail::num<std::uint32_t>(d, "attempt");
      at = r.t;
    } else if (r.kind == "notification") {
      NotificationRecord n;
      n.alert_id = detail::str(d, "alert_id");
      if (!detail::alert(s, n.alert_id).has_been(AlertState::Confirmed)) {
        throw Error(ErrorCode::CorruptLog, "notification for unconfirmed alert " + n.alert_id);
      }
      n.channel = detail::str(d, "channel");
      n.recipients = d.value("recipients", std::vector<std::string>{});
      n.attempts = detail::num<std::uint32_t>(d, "attempts");
      if (d.contains("delivered_at") && !d["delivered_at"].is_null()) n.delivered_at = d["delivered_at"].get<TimeMs>();
      n.failure = d.value("failure", std::string{});
      s.notifications.push_back(std::move(n));
    } else if (r.kind == "protocol_fault") {
      s.faults.push_back({r.t, d.value("device_id", std::string{}), detail::str(d, "reason")});
    } else if (r.kind == "alert_duplicate" || r.kind == "verification_deferred" || r.kind == "service_started") {
      // informational
    } else {
      throw Error(ErrorCode::CorruptLog, "unknown record kind '" + r.kind + "'");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptLog) throw;
    throw Error(ErrorCode::CorruptLog, "record " + std::to_string(r.seq) + ": " + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, "record " + std::to_string(r.seq) + ": " + e.what());
  }
  s.last_seq = r.seq;
  s.last_t = r.t;
}

inline ServiceState rebuild_state(const std::vector<LogRecord>& records, ServiceState from = {}) {
  for (const auto& r : records) apply_record(from, r);
  return from;
}

inline ServiceState rebuild_state(const LogStore& store) { return rebuild_state(store.records()); }

// ---- snapshots ---------------------------------------------------------------

inline json to_json(const ServiceState& s) {
  json devices = json::object();
  for (const auto& [id, d] : s.devices) {
    devices[id] = {{"config", to_json(d.config)},
                   {"config_version", d.config_version},
                   {"acked_version", d.acked_version},
                   {"config_queued", d.config_queued},
                   {"config_sent_at", d.config_sent_at ? json(*d.config_sent_at) : json(nullptr)},
                   {"config_msg_id", d.config_msg_id},
                   {"config_sent_version", d.config_sent_version},
                   {"registered_at", d.registered_at},
                   {"registrations", d.registrations},
                   {"last_heartbeat", d.last_heartbeat ? json(*d.last_heartbeat) : json(nullptr)}};
  }
  json alerts = json::array();
  for (const auto& [_, a] : s.alerts) alerts.push_back(to_json(a));
  json attempts = json::object();
  for (const auto& [id, v] : s.notify_attempts) attempts[id] = {v.first, v.second};
  json notes = json::array();
  for (const auto& n : s.notifications) {
    notes.push_back({{"alert_id", n.alert_id},
                     {"channel", n.channel},
                     {"recipients", n.recipients},
                     {"attempts", n.attempts},
                     {"delivered_at", n.delivered_at ? json(*n.delivered_at) : json(nullptr)},
                     {"failure", n.failure}});
  }
  json faults = json::array();
  for (const auto& f : s.faults) faults.push_back({{"t", f.t}, {"device_id", f.device_id}, {"reason", f.reason}});
  return json{{"last_seq", s.last_seq},   {"last_t", s.last_t},         {"devices", devices},
              {"alerts", alerts},         {"alerts_created", s.alerts_created}, {"notify_attempts", attempts},
              {"notifications", notes},   {"faults", faults}};
}

inline ServiceState state_from_json(const json& j) {
  try {
    ServiceState s;
    s.last_seq = j.at("last_seq").get<std::uint64_t>();
    s.last_t = j.at("last_t").get<TimeMs>();
    auto opt_time = [](const json& v) -> std::optional<TimeMs> {
      if (v.is_null()) return std::nullopt;
      return v.get<TimeMs>();
    };
    for (const auto& [id, d] : j.at("devices").items()) {
      DeviceRecord r;
      r.device_id = id;
      r.config = config_from_json(d.at("config"));
      r.config_version = d.at("config_version").get<std::uint64_t>();
      r.acked_version = d.at("acked_version").get<std::uint64_t>();
      r.config_queued = d.at("config_queued").get<bool>();
      r.config_sent_at = opt_time(d.at("config_sent_at"));
      r.config_msg_id = d.at("config_msg_id").get<std::uint64_t>();
      r.config_sent_version = d.at("config_sent_version").get<std::uint64_t>();
      r.registered_at = d.at("registered_at").get<TimeMs>();
      r.registrations = d.at("registrations").get<std::uint64_t>();
      r.last_heartbeat = opt_time(d.at("last_heartbeat"));
      s.devices.emplace(id, std::move(r));
    }
    for (const auto& a : j.at("alerts")) {
      AlertEvent e;
      e.alert_id = a.at("alert_id").get<std::string>();
      e.clip.device_id = a.at("device_id").get<std::string>();
      e.clip.msg_id = a.at("msg_id").get<std::uint64_t>();
      e.clip.trigger_class = weapon_class_from_string(a.at("trigger_class").get<std::string>());
      e.clip.momentum = a.at("momentum").get<double>();
      e.clip.captured_at = a.at("captured_at").get<TimeMs>();
      e.clip.trigger_seq = a.at("trigger_seq").get<FrameSeq>();
      e.state = alert_state_from_string(a.at("state").get<std::string>());
      if (!a.at("verifier_score").is_null()) e.verifier_score = a["verifier_score"].get<double>();
      for (const auto& h : a.at("history")) {
        e.history.push_back({alert_state_from_string(h.at("state").get<std::string>()), h.at("t").get<TimeMs>(),
                             h.at("actor").get<std::string>()});
      }
      s.alert_by_msg[{e.clip.device_id, e.clip.msg_id}] = e.alert_id;
      s.alerts.emplace(e.alert_id, std::move(e));
    }
    s.alerts_created = j.at("alerts_created").get<std::uint64_t>();
    for (const auto& [id, v] : j.at("notify_attempts").items()) {
      s.notify_attempts[id] = {v.at(0).get<std::uint32_t>(), v.at(1).get<TimeMs>()};
    }
    for (const auto& n : j.at("notifications")) {
      NotificationRecord r;
      r.alert_id = n.at("alert_id").get<std::string>();
      r.channel = n.at("channel").get<std::string>();
      r.recipients = n.at("recipients").get<std::vector<std::string>>();
      r.attempts = n.at("attempts").get<std::uint32_t>();
      r.delivered_at = opt_time(n.at("delivered_at"));
      r.failure = n.at("failure").get<std::string>();
      s.notifications.push_back(std::move(r));
    }
    for (const auto& f : j.at("faults")) {
      s.faults.push_back({f.at("t").get<TimeMs>(), f.at("device_id").get<std::string>(), f.at("reason").get<std::string>()});
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptLog, std::string("snapshot: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptLog, std::string("snapshot: ") + e.what());
  }
}

/// Snapshot plus the records that follow it.
inline ServiceState rebuild_state(const json& snapshot, const std::vector<LogRecord>& all_records) {
  ServiceState s = state_from_json(snapshot);
  for (const auto& r : all_records) {
    if (r.seq > s.last_seq) apply_record(s, r);
  }
  return s;
}

}  // namespace armguard::cloud
