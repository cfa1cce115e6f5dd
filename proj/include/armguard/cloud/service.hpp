#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "armguard/cloud/clip_store.hpp"
#include "armguard/cloud/notifier.hpp"
#include "armguard/cloud/state.hpp"
#include "armguard/cloud/verifier.hpp"
#include "armguard/core/clock.hpp"
#include "armguard/wire/backoff.hpp"
#include "armguard/wire/gif.hpp"
#include "armguard/wire/protocol.hpp"

namespace armguard::cloud {

struct CloudOptions {
  std::size_t queue_capacity = 64;
  TimeMs verify_ms = 400;  // virtual time one verification occupies the worker
  wire::RetryPolicy notify_retry{};
  std::size_t snapshot_every = 0;  // records between snapshots; 0 disables
};

struct ConfigUpdateResult {
  std::vector<std::string> errors;
  std::uint64_t version = 0;
  std::string delivery;  // "sent" or "queued"

  bool ok() const noexcept { return errors.empty(); }
};

/// The cloud side. Every mutation appends a record to the event log and folds it
/// into the in-memory state with apply_record(), so state is always what
/// rebuild_state() would produce from the log. Not thread-safe: in live mode all
/// calls are funneled through one command queue.
class CloudService {
 public:
  using Outbox = std::function<void(const std::string& device_id, const wire::Envelope&)>;
  using Listener = std::function<void(const LogRecord&)>;

  CloudService(VirtualClock& clock, LogStore& log, ClipStore& clips, Verifier& verifier, Notifier& notifier,
               Outbox outbox, CloudOptions opts = {})
      : clock_(clock),
        log_(log),
        clips_(clips),
        verifier_(verifier),
        notifier_(notifier),
        outbox_(std::move(outbox)),
        opts_(opts) {
    if (opts_.queue_capacity == 0) throw Error(ErrorCode::InvalidArgument, "queue capacity must be positive");
    auto records = log_.records();
    state_ = log_.snapshot() ? rebuild_state(*log_.snapshot(), records) : rebuild_state(records);
    append("service_started", {{"replayed", records.size()}});
    resume();
  }

  ~CloudService() { *alive_ = false; }

  CloudService(const CloudService&) = delete;
  CloudService& operator=(const CloudService&) = delete;

  // ---- device port -----------------------------------------------------------

  /// Raw bytes of one framed message from `peer`. Framing errors become a protocol
  /// fault plus an ERROR reply.
  void on_bytes(const std::string& peer, std::span<const std::uint8_t> bytes) {
    wire::Envelope e;
    try {
      e = wire::decode(bytes);
    } catch (const Error& err) {
      fault(peer, std::string("undecodable message: ") + err.what(), 0, "bad_frame");
      return;
    }
    on_envelope(e);
  }

  /// A byte stream that stopped framing; the transport closes it afterwards.
  void on_transport_error(const std::string& peer, const std::string& reason) {
    fault(peer, "undecodable message: " + reason, 0, "bad_frame");
  }

  void on_envelope(const wire::Envelope& e) {
    switch (e.type) {
      case wire::MessageType::Register: handle_register(e); break;
      case wire::MessageType::Heartbeat: handle_heartbeat(e); break;
      case wire::MessageType::Alert: handle_alert(e); break;
      case wire::MessageType::Ack: handle_ack(e); break;
      case wire::MessageType::Error:
        append("protocol_fault", {{"device_id", e.device_id}, {"reason", "device reported error"}});
        break;
      default:
        fault(e.device_id, "unexpected " + std::string(wire::to_string(e.type)) + " from device", e.msg_id,
              "unexpected_type");
    }
  }

  // ---- operator actions -------------------------------------------------------

  /// Overlays `patch` on the device's current config. Validation errors come back
  /// verbatim and change nothing.
  ConfigUpdateResult update_config(const std::string& device_id, const json& patch, const std::string& actor = "console") {
    auto it = state_.devices.find(device_id);
    if (it == state_.devices.end()) throw Error(ErrorCode::UnknownDevice, "unknown device " + device_id);
    ConfigUpdateResult res;
    DeviceConfig merged = merge_config(it->second.config, patch, &res.errors);
    if (res.errors.empty()) res.errors = validate_config(merged);
    if (!res.errors.empty()) return res;
    res.version = it->second.config_version + 1;
    res.delivery = it->second.online(clock_.now()) ? "sent" : "queued";
    append("config_updated", {{"device_id", device_id},
                              {"config", to_json(merged)},
                              {"version", res.version},
                              {"delivery", res.delivery},
                              {"actor", actor}});
    if (res.delivery == "sent") send_config(device_id);
    return res;
  }

  /// Operator override. Throws UnknownAlert, or IllegalTransition for terminal alerts.
  const AlertEvent& dismiss(const std::string& alert_id, const std::string& actor = "console") {
    auto it = state_.alerts.find(alert_id);
    if (it == state_.alerts.end()) throw Error(ErrorCode::UnknownAlert, "unknown alert " + alert_id);
    if (!is_legal_transition(it->second.state, AlertState::Dismissed)) {
      throw Error(ErrorCode::IllegalTransition, "alert " + alert_id + " is already " + std::string(to_string(it->second.state)));
    }
    const auto seq = append("alert_transition", {{"alert_id", alert_id}, {"to", "dismissed"}, {"actor", actor}});
    send_verdict(it->second, "dismissed", seq);
    return it->second;
  }

  // ---- reads -------------------------------------------------------------------

  const ServiceState& state() const noexcept { return state_; }
  const CloudOptions& options() const noexcept { return opts_; }
  TimeMs now() const noexcept { return clock_.now(); }
  ClipStore& clips() noexcept { return clips_; }
  std::size_t queue_depth() const noexcept { return queue_.size() + overflow_.size(); }
  bool verifying() const noexcept { return busy_; }

  std::size_t subscribe(Listener l) {
    listeners_.emplace_back(next_listener_, std::move(l));
    return next_listener_++;
  }

  void unsubscribe(std::size_t id) {
    std::erase_if(listeners_, [id](const auto& p) { return p.first == id; });
  }

 private:
  // ---- log -------------------------------------------------------------------------

  std::uint64_t append(std::string kind, json data) {
    LogRecord r{state_.last_seq + 1, clock_.now(), std::move(kind), std::move(data)};
    apply_record(state_, r);
    log_.append(r);
    if (opts_.snapshot_every > 0 && r.seq % opts_.snapshot_every == 0) log_.save_snapshot(to_json(state_));
    for (auto& [_, l] : listeners_) l(r);
    return r.seq;
  }

  void send(wire::MessageType type, std::uint64_t msg_id, const std::string& device_id, std::vector<std::uint8_t> payload = {}) {
    outbox_(device_id, wire::Envelope{type, msg_id, device_id, clock_.now(), std::move(payload)});
  }

  void fault(const std::string& device_id, const std::string& reason, std::uint64_t ref_msg_id, const std::string& code) {
    const auto seq = append("protocol_fault", {{"device_id", device_id}, {"reason", reason}, {"msg_id", ref_msg_id}});
    if (device_id.empty()) return;
    json body{{"code", code}, {"message", reason}, {"ref_msg_id", ref_msg_id}};
    send(wire::MessageType::Error, seq, device_id, wire::Envelope::bytes_of(body.dump()));
  }

  template <typename F>
  void schedule_at(TimeMs at, F fn) {
    std::weak_ptr<bool> alive = alive_;
    clock_.schedule_at(std::max(at, clock_.now()), [alive, fn = std::move(fn)]() mutable {
      if (auto a = alive.lock(); a && *a) fn();
    });
  }

  // ---- handlers ---------------------------------------------------------------------

  void handle_register(const wire::Envelope& e) {
    json data{{"device_id", e.device_id}};
    if (!e.payload.empty()) {
      json cfg = json::parse(e.payload.begin(), e.payload.end(), nullptr, false);
      std::vector<std::string> errors;
      DeviceConfig parsed = cfg.is_discarded() ? DeviceConfig{} : merge_config(DeviceConfig{}, cfg, &errors);
      if (cfg.is_discarded()) errors.emplace_back("REGISTER payload is not JSON");
      if (errors.empty()) errors = validate_config(parsed);
      if (!errors.empty()) {
        fault(e.device_id, "invalid REGISTER config: " + errors.front(), e.msg_id, "invalid_config");
        return;
      }
      data["config"] = to_json(parsed);
    }
    append("device_registered", data);
    send(wire::MessageType::RegisterAck, e.msg_id, e.device_id);
    maybe_push_config(e.device_id, true);
  }

  void handle_heartbeat(const wire::Envelope& e) {
    if (!state_.devices.contains(e.device_id)) {
      fault(e.device_id, "heartbeat from unregistered device", e.msg_id, "unknown_device");
      return;
    }
    append("heartbeat", {{"device_id", e.device_id}});
    maybe_push_config(e.device_id, false);
  }

  void handle_alert(const wire::Envelope& e) {
    if (!state_.devices.contains(e.device_id)) {
      fault(e.device_id, "alert from unregistered device", e.msg_id, "unknown_device");
      return;
    }
    if (auto it = state_.alert_by_msg.find({e.device_id, e.msg_id}); it != state_.alert_by_msg.end()) {
      append("alert_duplicate", {{"alert_id", it->second}, {"device_id", e.device_id}, {"msg_id", e.msg_id}});
      send(wire::MessageType::Ack, e.msg_id, e.device_id);
      return;
    }
    Clip clip;
    try {
      clip = wire::decode_clip(e.payload);
      clip.check();
    } catch (const Error& err) {
      fault(e.device_id, std::string("malformed clip: ") + err.what(), e.msg_id, "malformed_clip");
      return;
    }
    const std::string id = format_alert_id(state_.alerts_created + 1);
    clips_.put(id, e.payload);
    append("alert_received", {{"alert_id", id},
                              {"device_id", e.device_id},
                              {"msg_id", e.msg_id},
                              {"trigger_class", std::string(to_string(clip.trigger_class))},
                              {"momentum", clip.momentum_at_trigger},
                              {"captured_at", clip.captured_at},
                              {"trigger_seq", clip.trigger_seq()},
                              {"bytes", e.payload.size()}});
    send(wire::MessageType::Ack, e.msg_id, e.device_id);
    enqueue(id);
  }

  void handle_ack(const wire::Envelope& e) {
    auto it = state_.devices.find(e.device_id);
    if (it == state_.devices.end()) return;
    const DeviceRecord& dev = it->second;
    if (dev.config_msg_id == e.msg_id && dev.config_sent_version > dev.acked_version) {
      append("config_acked", {{"device_id", e.device_id}, {"version", dev.config_sent_version}});
    }
  }

  // ---- config delivery ---------------------------------------------------------------

  /// On REGISTER anything unacknowledged goes out at once; on heartbeats it is
  /// re-sent at most once per heartbeat interval.
  void maybe_push_config(const std::string& device_id, bool on_register) {
    const DeviceRecord& dev = state_.devices.at(device_id);
    if (dev.config_version <= dev.acked_version && !dev.config_queued) return;
    if (!on_register && dev.config_sent_at && clock_.now() - *dev.config_sent_at < kHeartbeatIntervalMs) return;
    send_config(device_id);
  }

  void send_config(const std::string& device_id) {
    const DeviceRecord& dev = state_.devices.at(device_id);
    const std::uint64_t msg_id = state_.last_seq + 1;
    json body{{"version", dev.config_version}, {"config", to_json(dev.config)}};
    append("config_sent", {{"device_id", device_id}, {"version", dev.config_version}, {"msg_id", msg_id}});
    send(wire::MessageType::ConfigUpdate, msg_id, device_id, wire::Envelope::bytes_of(body.dump()));
  }

  // ---- verification ---------------------------------------------------------------------

  void enqueue(const std::string& alert_id) {
    if (queue_.size() < opts_.queue_capacity) {
      queue_.push_back(alert_id);
    } else {
      overflow_.push_back(alert_id);
      append("verification_deferred", {{"alert_id", alert_id}, {"queued", queue_depth()}});
    }
    pump();
  }

  void pump() {
    while (!busy_ && !queue_.empty()) {
      const std::string id = queue_.front();
      queue_.pop_front();
      if (!overflow_.empty()) {
        queue_.push_back(overflow_.front());
        overflow_.pop_front();
      }
      if (state_.alerts.at(id).state != AlertState::Pending) continue;  // dismissed while waiting
      append("alert_transition", {{"alert_id", id}, {"to", "verifying"}, {"actor", "verifier"}});
      start_verification(id, clock_.now() + opts_.verify_ms);
    }
  }

  void start_verification(const std::string& id, TimeMs done_at) {
    busy_ = true;
    schedule_at(done_at, [this, id] { finish_verification(id); });
  }

  void finish_verification(const std::string& id) {
    busy_ = false;
    const AlertEvent& alert = state_.alerts.at(id);
    if (alert.state == AlertState::Verifying) {
      double score = 0.0;
      bool scored = false;
      std::string failure;
      try {
        const auto* gif = clips_.get(id);
        if (!gif) throw Error(ErrorCode::Io, "clip missing from store");
        score = verifier_.score(wire::decode_clip(*gif));
        if (!(score >= 0.0 && score <= 1.0)) throw Error(ErrorCode::InvalidArgument, "verifier score outside [0,1]");
        scored = true;
      } catch (const Error& e) {
        failure = e.what();
      }
      const bool confirmed = scored && score > verify::kRobberyThreshold;
      json data{{"alert_id", id}, {"to", confirmed ? "confirmed" : "rejected"}, {"actor", "verifier"}};
      if (scored) data["score"] = score;
      if (!failure.empty()) data["error"] = failure;
      const auto seq = append("alert_transition", data);
      send_verdict(state_.alerts.at(id), confirmed ? "confirmed" : "rejected", seq);
      if (confirmed) notify_attempt(id, 1);
    }
    pump();
  }

  void send_verdict(const AlertEvent& a, const std::string& verdict, std::uint64_t msg_id) {
    json body{{"alert_id", a.alert_id}, {"msg_id", a.clip.msg_id}, {"verdict", verdict}};
    if (a.verifier_score) body["score"] = *a.verifier_score;
    send(wire::MessageType::Verdict, msg_id, a.clip.device_id, wire::Envelope::bytes_of(body.dump()));
  }

  // ---- notification ------------------------------------------------------------------

  void notify_attempt(const std::string& id, std::uint32_t attempt) {
    const AlertEvent& a = state_.alerts.at(id);
    if (a.state != AlertState::Confirmed) return;  // dismissed meanwhile
    json body{{"alert_id", id},
              {"device_id", a.clip.device_id},
              {"score", a.verifier_score ? json(*a.verifier_score) : json(nullptr)},
              {"clip_url", "/alerts/" + id + "/clip"}};
    std::weak_ptr<bool> alive = alive_;
    notifier_.deliver(body, [this, alive, id, attempt](DeliveryResult r) {
      if (auto a = alive.lock(); a && *a) notify_result(id, attempt, r);
    });
  }

  void notify_result(const std::string& id, std::uint32_t attempt, const DeliveryResult& r) {
    json data{{"alert_id", id}, {"attempt", attempt}, {"ok", r.ok}};
    if (!r.ok) data["error"] = r.error;
    append("notification_attempt", data);
    if (r.ok) {
      append("notification", {{"alert_id", id},
                              {"channel", notifier_.channel()},
                              {"recipients", notifier_.recipients()},
                              {"attempts", attempt},
                              {"delivered_at", clock_.now()}});
      if (state_.alerts.at(id).state == AlertState::Confirmed) {
        append("alert_transition", {{"alert_id", id}, {"to", "notified"}, {"actor", "notifier"}});
      }
      return;
    }
    schedule_retry(id, attempt, clock_.now());
  }

  void schedule_retry(const std::string& id, std::uint32_t attempt, TimeMs last_at) {
    if (auto delay = opts_.notify_retry.delay_after(attempt)) {
      schedule_at(last_at + *delay, [this, id, attempt] { notify_attempt(id, attempt + 1); });
      return;
    }
    append("notification", {{"alert_id", id},
                            {"channel", notifier_.channel()},
                            {"recipients", notifier_.recipients()},
                            {"attempts", attempt},
                            {"delivered_at", nullptr},
                            {"failure", "gave up after " + std::to_string(attempt) + " attempts"}});
  }

  // ---- restart ---------------------------------------------------------------------------

  /// Picks up work the previous process left in flight, at the times it would
  /// have happened had the process not stopped.
  void resume() {
    for (const auto& [id, a] : state_.alerts) {
      if (a.state == AlertState::Verifying) {
        start_verification(id, *a.entered_at(AlertState::Verifying) + opts_.verify_ms);
      }
    }
    for (const auto& [id, a] : state_.alerts) {
      if (a.state == AlertState::Pending) {
        if (queue_.size() < opts_.queue_capacity) {
          queue_.push_back(id);
        } else {
          overflow_.push_back(id);
        }
      }
    }
    for (const auto& [id, a] : state_.alerts) {
      if (a.state != AlertState::Confirmed || state_.notification_for(id)) continue;
      auto it = state_.notify_attempts.find(id);
      if (it == state_.notify_attempts.end()) {
        notify_attempt(id, 1);
      } else {
        schedule_retry(id, it->second.first, it->second.second);
      }
    }
    pump();
  }

  VirtualClock& clock_;
  LogStore& log_;
  ClipStore& clips_;
  Verifier& verifier_;
  Notifier& notifier_;
  Outbox outbox_;
  CloudOptions opts_;
  ServiceState state_;
  std::deque<std::string> queue_;
  std::deque<std::string> overflow_;
  bool busy_ = false;
  std::shared_ptr<bool> alive_ = std::make_shared<bool>(true);
  std::vector<std::pair<std::size_t, Listener>> listeners_;
  std::size_t next_listener_ = 0;
};

}  // namespace armguard::cloud
