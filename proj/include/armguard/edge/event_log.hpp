#pragma once

#include <string>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::edge {

/// Per-device state-change log; serialized as JSON lines {t, device_id, kind, payload}.
class DeviceEventLog {
 public:
  explicit DeviceEventLog(std::string device_id = {}) : device_id_(std::move(device_id)) {}

  void append(TimeMs t, std::string kind, json payload = json::object()) {
    records_.push_back(json{{"t", t}, {"device_id", device_id_}, {"kind", std::move(kind)}, {"payload", std::move(payload)}});
  }

  const std::vector<json>& records() const noexcept { return records_; }

  std::size_t count(std::string_view kind) const {
    std::size_t n = 0;
    for (const auto& r : records_) {
      if (r["kind"] == kind) ++n;
    }
    return n;
  }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records_) {
      out += r.dump();
      out += '\n';
    }
    return out;
  }

 private:
  std::string device_id_;
  std::vector<json> records_;
};

/// Simulated relay-driven siren. Repeated requests for the current state are no-ops.
class AlarmActuator {
 public:
  bool set(bool on, TimeMs t, DeviceEventLog& log) {
    if (on == on_) return on_;
    on_ = on;
    log.append(t, "alarm", json{{"on", on}});
    return on_;
  }

  bool on() const noexcept { return on_; }

 private:
  bool on_ = false;
};

}  // namespace armguard::edge
