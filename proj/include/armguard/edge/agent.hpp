#pragma once

#include <deque>
#include <functional>
#include <map>

#include "armguard/core/clock.hpp"
#include "armguard/edge/edge_node.hpp"
#include "armguard/wire/backoff.hpp"
#include "armguard/wire/gif.hpp"
#include "armguard/wire/protocol.hpp"

namespace armguard::edge {

struct AgentOptions {
  TimeMs heartbeat_ms = 5'000;
  wire::RetryPolicy retry{};
};

/// Connects an EdgeNode to the cloud: registration, heartbeats, reliable ALERT
/// upload, config updates and verdicts. Everything is logged to the node's log.
class DeviceAgent {
 public:
  using Send = std::function<void(const wire::Envelope&)>;

  DeviceAgent(VirtualClock& clock, EdgeNode& node, detect::Detector& detector, Send send, AgentOptions opts = {})
      : clock_(clock), node_(node), detector_(detector), send_(std::move(send)), opts_(opts) {}

  DeviceAgent(const DeviceAgent&) = delete;
  DeviceAgent& operator=(const DeviceAgent&) = delete;

  ~DeviceAgent() { *alive_ = false; }

  /// Sends REGISTER with the current config and keeps retrying until acknowledged.
  void start() {
    registered_ = false;
    wire::Envelope e{wire::MessageType::Register, next_msg_id_++, node_.device_id(), clock_.now(),
                     wire::Envelope::bytes_of(to_json(node_.config()).dump())};
    transmit_reliably(std::move(e));
  }

  FrameOutcome on_frame(const Frame& frame) {
    FrameOutcome out = node_.process_frame(frame, detector_);
    if (out.clip) {
      wire::Envelope e{wire::MessageType::Alert, next_msg_id_++, node_.device_id(), clock_.now(), wire::encode_clip(*out.clip)};
      log("alert_queued", {{"msg_id", e.msg_id}, {"trigger_seq", out.clip->trigger_seq()}, {"bytes", e.payload.size()}});
      if (registered_) {
        transmit_reliably(std::move(e));
      } else {
        held_.push_back(std::move(e));
      }
    }
    return out;
  }

  void on_envelope(const wire::Envelope& e) {
    switch (e.type) {
      case wire::MessageType::RegisterAck:
        if (settle(e.msg_id)) {
          registered_ = true;
          log("registered", {{"msg_id", e.msg_id}});
          schedule_heartbeat();
          while (!held_.empty()) {
            transmit_reliably(std::move(held_.front()));
            held_.pop_front();
          }
        }
        break;
      case wire::MessageType::Ack:
        if (settle(e.msg_id)) log("ack", {{"msg_id", e.msg_id}});
        break;
      case wire::MessageType::ConfigUpdate: handle_config(e); break;
      case wire::MessageType::Verdict: handle_verdict(e); break;
      case wire::MessageType::Error: handle_error(e); break;
      default: log("unexpected_message", {{"type", std::string(wire::to_string(e.type))}, {"msg_id", e.msg_id}});
    }
  }

  bool registered() const noexcept { return registered_; }
  std::size_t in_flight() const noexcept { return outstanding_.size(); }
  std::size_t held() const noexcept { return held_.size(); }
  std::uint64_t config_version() const noexcept { return config_version_; }
  EdgeNode& node() noexcept { return node_; }

 private:
  struct Outstanding {
    wire::Envelope envelope;
    std::uint32_t attempts = 0;
    VirtualClock::EventId timer = 0;
  };

  void log(std::string kind, json payload) { node_.log().append(clock_.now(), std::move(kind), std::move(payload)); }

  template <typename F>
  VirtualClock::EventId schedule_after(TimeMs delay, F fn) {
    std::weak_ptr<bool> alive = alive_;
    return clock_.schedule_after(delay, [alive, fn = std::move(fn)]() mutable {
      if (auto a = alive.lock(); a && *a) fn();
    });
  }

  void transmit_reliably(wire::Envelope e) {
    const auto id = e.msg_id;
    outstanding_[id] = Outstanding{std::move(e), 0, 0};
    attempt(id);
  }

  void attempt(std::uint64_t msg_id) {
    auto it = outstanding_.find(msg_id);
    if (it == outstanding_.end()) return;
    Outstanding& o = it->second;
    ++o.attempts;
    o.envelope.sent_at = clock_.now();
    log("send", {{"type", std::string(wire::to_string(o.envelope.type))}, {"msg_id", msg_id}, {"attempt", o.attempts}});
    send_(o.envelope);
    if (auto delay = opts_.retry.delay_after(o.attempts)) {
      o.timer = schedule_after(*delay, [this, msg_id] { attempt(msg_id); });
      return;
    }
    // Budget spent: wait one last interval for a late ACK, then give up.
    o.timer = schedule_after(opts_.retry.cap_ms, [this, msg_id] { give_up(msg_id); });
  }

  void give_up(std::uint64_t msg_id) {
    auto it = outstanding_.find(msg_id);
    if (it == outstanding_.end()) return;
    const auto type = it->second.envelope.type;
    log("undelivered", {{"type", std::string(wire::to_string(type))}, {"msg_id", msg_id}, {"attempts", it->second.attempts}});
    outstanding_.erase(it);
    if (type == wire::MessageType::Register) start();  // never stop trying to join
  }

  bool settle(std::uint64_t msg_id) {
    auto it = outstanding_.find(msg_id);
    if (it == outstanding_.end()) return false;
    clock_.cancel(it->second.timer);
    outstanding_.erase(it);
    return true;
  }

  void schedule_heartbeat() {
    if (heartbeat_armed_) return;
    heartbeat_armed_ = true;
    schedule_after(opts_.heartbeat_ms, [this] {
      heartbeat_armed_ = false;
      send_(wire::Envelope{wire::MessageType::Heartbeat, next_msg_id_++, node_.device_id(), clock_.now(), {}});
      schedule_heartbeat();
    });
  }

  void ack(std::uint64_t msg_id) {
    send_(wire::Envelope{wire::MessageType::Ack, msg_id, node_.device_id(), clock_.now(), {}});
  }

  void handle_config(const wire::Envelope& e) {
    json body = json::parse(e.payload.begin(), e.payload.end(), nullptr, false);
    if (body.is_discarded() || !body.is_object() || !body.contains("config") || !body.contains("version") ||
        !body["version"].is_number_unsigned()) {
      log("config_rejected", {{"msg_id", e.msg_id}, {"reason", "malformed CONFIG_UPDATE"}});
      return;
    }
    const auto version = body["version"].get<std::uint64_t>();
    if (version <= config_version_) {
      ack(e.msg_id);  // already applied; the first ACK was probably lost
      return;
    }
    try {
      node_.apply_config(config_from_json(body["config"]), clock_.now());
    } catch (const Error& err) {
      log("config_rejected", {{"msg_id", e.msg_id}, {"reason", err.what()}});
      return;
    }
    config_version_ = version;
    ack(e.msg_id);
  }

  void handle_verdict(const wire::Envelope& e) {
    json body = json::parse(e.payload.begin(), e.payload.end(), nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      log("unexpected_message", {{"type", "VERDICT"}, {"msg_id", e.msg_id}});
      return;
    }
    log("verdict", body);
    const std::string verdict = body.value("verdict", std::string{});
    if (verdict == "rejected" || verdict == "dismissed") node_.set_alarm(false, clock_.now());
  }

  void handle_error(const wire::Envelope& e) {
    json body = json::parse(e.payload.begin(), e.payload.end(), nullptr, false);
    if (body.is_discarded() || !body.is_object()) body = json::object();
    log("server_error", body);
    const auto ref = body.value("ref_msg_id", std::uint64_t{0});
    const std::string code = body.value("code", std::string{});
    if (code == "unknown_device") {
      // The cloud lost us; stop the stale retry and join again.
      if (auto it = outstanding_.find(ref); it != outstanding_.end()) {
        held_.push_front(it->second.envelope);
        settle(ref);
      }
      if (registered_) start();
      return;
    }
    if (outstanding_.contains(ref)) settle(ref);  // the server will never accept it
  }

  VirtualClock& clock_;
  EdgeNode& node_;
  detect::Detector& detector_;
  Send send_;
  AgentOptions opts_;
  bool registered_ = false;
  bool heartbeat_armed_ = false;
  std::uint64_t next_msg_id_ = 1;
  std::uint64_t config_version_ = 0;
  std::map<std::uint64_t, Outstanding> outstanding_;
  std::deque<wire::Envelope> held_;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
};

}  // namespace armguard::edge
