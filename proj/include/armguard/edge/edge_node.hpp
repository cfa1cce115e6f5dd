#pragma once

#include <memory>
#include <optional>
#include <string>

#include "armguard/detect/detector.hpp"
#include "armguard/edge/background.hpp"
#include "armguard/edge/calibrate.hpp"
#include "armguard/edge/clip_ring.hpp"
#include "armguard/edge/event_log.hpp"
#include "armguard/edge/momentum.hpp"

namespace armguard::edge {

enum class EdgeState { Calibrating, Idle, Active, Cooldown };

inline std::string_view to_string(EdgeState s) {
  switch (s) {
    case EdgeState::Calibrating: return "calibrating";
    case EdgeState::Idle: return "idle";
    case EdgeState::Active: return "active";
    case EdgeState::Cooldown: return "cooldown";
  }
  return "idle";
}

struct FrameOutcome {
  double foreground_ratio = 0.0;
  bool motion = false;
  bool detector_invoked = false;
  DetectionScores scores;
  std::optional<Trigger> trigger;  // raw trigger signal, before cooldown and warm-up gating
  bool deferred = false;           // trigger held back because the clip ring was not warm
  std::optional<Clip> clip;        // set exactly when an alert fires
};

/// The per-camera pipeline: calibrate, motion gate, detect, momentum, trigger,
/// snapshot clip, alarm, cooldown. Network concerns live in DeviceAgent.
class EdgeNode {
 public:
  EdgeNode(std::string device_id, DeviceConfig cfg, double fps = 15.0,
           std::unique_ptr<BackgroundSubtractor> subtractor = nullptr)
      : device_id_(std::move(device_id)),
        cfg_(cfg),
        fps_(fps),
        subtractor_(subtractor ? std::move(subtractor)
                               : std::make_unique<RunningMeanSubtractor>(cfg.bg_rho, cfg.bg_tau)),
        momentum_(cfg.k, cfg.n),
        log_(device_id_) {
    auto errors = validate_config(cfg_);
    if (!errors.empty()) throw Error(ErrorCode::ValidationFailed, errors.front());
  }

  FrameOutcome process_frame(const Frame& raw, detect::Detector& detector) {
    if (last_seq_ && raw.seq <= *last_seq_) {
      throw Error(ErrorCode::InvalidArgument, "frame seq must strictly increase");
    }
    last_seq_ = raw.seq;
    const TimeMs now = raw.timestamp;
    FrameOutcome out;

    Frame frame = calibrate(raw, cfg_.alpha, cfg_.beta);
    out.foreground_ratio = subtractor_->apply(frame);
    out.motion = out.foreground_ratio >= cfg_.motion_ratio_min;
    ring_.push(frame);

    if (state_ == EdgeState::Cooldown && now >= cooldown_until_) {
      alarm_.set(false, now, log_);
      change_state(EdgeState::Idle, now);
    }

    if (out.motion) {
      out.scores = detector.detect(frame);
      out.scores.frame_seq = frame.seq;
      out.detector_invoked = true;
      if (!out.scores.valid()) throw Error(ErrorCode::InvalidArgument, "detector confidence outside [0,1]");
    } else {
      out.scores = DetectionScores::zero(frame.seq);
    }
    momentum_.push(out.scores);

    out.trigger = cfg_.trigger_mode == TriggerMode::Momentum
                      ? check_trigger(momentum_, cfg_.thresholds)
                      : check_instant_trigger(out.scores, cfg_.thresholds, cfg_.weight_sum());

    if (out.trigger && state_ != EdgeState::Cooldown) {
      if (!ring_.warm()) {
        out.deferred = true;
        log_.append(now, "trigger_deferred",
                    json{{"class", std::string(to_string(out.trigger->weapon))}, {"value", out.trigger->value},
                         {"buffered", ring_.size()}});
      } else {
        out.clip = snapshot_clip(*out.trigger, now);
        log_.append(now, "trigger",
                    json{{"class", std::string(to_string(out.trigger->weapon))},
                         {"value", out.trigger->value},
                         {"seq", frame.seq}});
        alarm_.set(true, now, log_);
        cooldown_until_ = now + cfg_.cooldown_ms;
        change_state(EdgeState::Cooldown, now);
        ++clips_emitted_;
      }
    }

    if (state_ != EdgeState::Cooldown) {
      EdgeState next = !ring_.warm() ? EdgeState::Calibrating : (out.motion ? EdgeState::Active : EdgeState::Idle);
      change_state(next, now);
    }
    return out;
  }

  void set_alarm(bool on, TimeMs t) { alarm_.set(on, t, log_); }

  /// Applies a pushed configuration. Background parameters take effect on the next session.
  void apply_config(const DeviceConfig& cfg, TimeMs t) {
    auto errors = validate_config(cfg);
    if (!errors.empty()) throw Error(ErrorCode::ValidationFailed, errors.front());
    cfg_ = cfg;
    momentum_.reconfigure(cfg.k, cfg.n);
    log_.append(t, "config_applied", to_json(cfg));
  }

  const std::string& device_id() const noexcept { return device_id_; }
  const DeviceConfig& config() const noexcept { return cfg_; }
  EdgeState state() const noexcept { return state_; }
  TimeMs cooldown_until() const noexcept { return cooldown_until_; }
  const MomentumState& momentum() const noexcept { return momentum_; }
  const ClipRing& ring() const noexcept { return ring_; }
  bool alarm_on() const noexcept { return alarm_.on(); }
  DeviceEventLog& log() noexcept { return log_; }
  const DeviceEventLog& log() const noexcept { return log_; }
  std::size_t clips_emitted() const noexcept { return clips_emitted_; }
  double fps() const noexcept { return fps_; }

 private:
  Clip snapshot_clip(const Trigger& trigger, TimeMs now) const {
    Clip clip;
    clip.device_id = device_id_;
    clip.frames = ring_.snapshot();
    clip.trigger_class = trigger.weapon;
    clip.momentum_at_trigger = trigger.value;
    clip.captured_at = now;
    clip.fps = fps_;
    return clip;
  }

  void change_state(EdgeState next, TimeMs t) {
    if (next == state_) return;
    log_.append(t, "state", json{{"from", std::string(to_string(state_))}, {"to", std::string(to_string(next))}});
    state_ = next;
  }

  std::string device_id_;
  DeviceConfig cfg_;
  double fps_;
  std::unique_ptr<BackgroundSubtractor> subtractor_;
  MomentumState momentum_;
  ClipRing ring_;
  AlarmActuator alarm_;
  DeviceEventLog log_;
  EdgeState state_ = EdgeState::Calibrating;
  TimeMs cooldown_until_ = 0;
  std::optional<FrameSeq> last_seq_;
  std::size_t clips_emitted_ = 0;
};

}  // namespace armguard::edge
