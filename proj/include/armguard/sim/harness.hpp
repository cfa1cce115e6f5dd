#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "armguard/cloud/service.hpp"
#include "armguard/detect/synthetic.hpp"
#include "armguard/detect/trace.hpp"
#include "armguard/edge/agent.hpp"
#include "armguard/sim/metrics.hpp"
#include "armguard/sim/network.hpp"
#include "armguard/sim/scenario.hpp"
#include "armguard/sim/scene.hpp"

namespace armguard::sim {

struct RunOptions {
  std::optional<std::uint64_t> seed;             // replaces the scenario seed
  std::optional<TriggerMode> trigger_mode;       // forces every device into this mode
};

/// Everything a run leaves behind. All logs are JSON lines.
struct RunResult {
  MetricsReport report;
  std::string cloud_log;
  std::map<std::string, std::string> device_logs;
  std::string net_log;
  std::string notifications;
  std::string harness_log;
  std::map<std::string, std::vector<std::uint8_t>> clips;
  std::vector<DeviceTruth> truth;
  std::uint64_t seed = 0;
};

inline json truth_to_json(const std::vector<DeviceTruth>& truth) {
  json devices = json::array();
  for (const auto& d : truth) devices.push_back({{"device_id", d.device_id}, {"intervals", detect::to_json(d.intervals)}});
  return json{{"devices", devices}};
}

inline std::vector<DeviceTruth> truth_from_json(const json& j) {
  std::vector<DeviceTruth> out;
  for (const auto& d : j.at("devices")) {
    out.push_back({d.at("device_id").get<std::string>(), detect::intervals_from_json(d.at("intervals"))});
  }
  return out;
}

/// Scores the alerts folded from a cloud event log.
inline MetricsReport metrics_from_log(const std::vector<cloud::LogRecord>& records, const std::vector<DeviceTruth>& truth) {
  const cloud::ServiceState st = cloud::rebuild_state(records);
  std::vector<AlertOutcome> outcomes;
  for (const auto& [_, a] : st.alerts) outcomes.push_back(outcome_of(a));
  return score_alerts(std::move(outcomes), truth);
}

namespace detail {

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, std::string_view text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
}

}  // namespace detail

/// Recomputes the report from a log directory written by write_logdir().
inline MetricsReport metrics_from_logdir(const std::filesystem::path& dir) {
  const auto records = cloud::parse_log(detail::slurp(dir / "cloud_events.jsonl"));
  json gt = json::parse(detail::slurp(dir / "ground_truth.json"), nullptr, false);
  if (gt.is_discarded()) throw Error(ErrorCode::BadJson, "ground_truth.json is not JSON");
  return metrics_from_log(records, truth_from_json(gt));
}

/// Layout:
///   report.json  report.txt  ground_truth.json  cloud_events.jsonl  net.jsonl
///   notifications.jsonl  harness.jsonl  devices/<device_id>.jsonl  clips/<alert_id>.gif
inline void write_logdir(const RunResult& r, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "devices");
  fs::create_directories(dir / "clips");
  detail::spit(dir / "report.json", to_json(r.report).dump(2) + "\n");
  detail::spit(dir / "report.txt", format_table(r.report));
  detail::spit(dir / "ground_truth.json", truth_to_json(r.truth).dump(2) + "\n");
  detail::spit(dir / "cloud_events.jsonl", r.cloud_log);
  detail::spit(dir / "net.jsonl", r.net_log);
  detail::spit(dir / "notifications.jsonl", r.notifications);
  detail::spit(dir / "harness.jsonl", r.harness_log);
  for (const auto& [id, text] : r.device_logs) detail::spit(dir / "devices" / (id + ".jsonl"), text);
  for (const auto& [id, gif] : r.clips) {
    detail::spit(dir / "clips" / (id + ".gif"), std::string_view(reinterpret_cast<const char*>(gif.data()), gif.size()));
  }
}

/// One simulated deployment: N edge nodes and one cloud service over SimNetwork,
/// all driven by a single VirtualClock.
class SimRun {
 public:
  SimRun(Scenario scenario, RunOptions opts = {})
      : s_(std::move(scenario)), net_(clock_, s_.network, opts.seed.value_or(s_.seed)) {
    if (opts.seed) s_.seed = *opts.seed;
    if (opts.trigger_mode) {
      for (auto& d : s_.devices) d.config.trigger_mode = *opts.trigger_mode;
    }
    build_verifier();
    build_notifier();
    for (std::size_t i = 0; i < s_.devices.size(); ++i) build_device(i);
  }

  SimRun(const SimRun&) = delete;
  SimRun& operator=(const SimRun&) = delete;

  RunResult run() {
    boot_cloud();
    for (auto& dev : devices_) {
      Device* d = dev.get();
      clock_.schedule_at(d->spec.start_ms, [d] { d->agent->start(); });
      if (d->frames > 0) schedule_frame(d, 0);
    }
    for (const auto& op : s_.operator_actions) {
      clock_.schedule_at(op.at_ms, [this, op] { perform(op); });
    }
    if (s_.cloud.crash_at_ms) {
      clock_.schedule_at(*s_.cloud.crash_at_ms, [this] {
        cloud_.reset();
        note({{"event", "cloud_crash"}});
        if (s_.cloud.restart_delay_ms == 0) {
          boot_cloud();
        } else {
          clock_.schedule_after(s_.cloud.restart_delay_ms, [this] { boot_cloud(); });
        }
      });
    }
    clock_.run_until(s_.duration_ms + s_.settle_ms);
    return collect();
  }

  const cloud::CloudService* cloud() const noexcept { return cloud_.get(); }

 private:
  struct Device {
    DeviceSpec spec;
    FrameSeq frames = 0;
    std::unique_ptr<detect::Detector> detector;
    std::unique_ptr<edge::EdgeNode> node;
    std::unique_ptr<edge::DeviceAgent> agent;
    std::vector<detect::LabeledInterval> truth;
  };

  void build_verifier() {
    if (const auto* stub = std::get_if<StubVerifierSpec>(&s_.verifier.mode)) {
      verifier_ = std::make_unique<cloud::StubVerifier>(stub->default_score, stub->per_device);
    } else {
      const auto& w = std::get<WeightsVerifierSpec>(s_.verifier.mode);
      verifier_ = cloud::load_cnn_verifier(w.arch, w.weights, s_.resample);
    }
  }

  void build_notifier() {
    if (s_.cloud.notifier.channel == "webhook") {
      webhook_ = std::make_unique<cloud::ScriptedWebhook>(s_.cloud.notifier.urls, s_.cloud.notifier.fail_attempts);
    } else {
      log_channel_ = std::make_unique<cloud::LogNotifier>();
    }
  }

  cloud::Notifier& notifier() {
    if (webhook_) return *webhook_;
    return *log_channel_;
  }

  void build_device(std::size_t index) {
    auto d = std::make_unique<Device>();
    d->spec = s_.devices[index];
    d->frames = frame_count(s_, d->spec);
    if (const auto* syn = std::get_if<SyntheticSpec>(&d->spec.detector)) {
      const std::uint64_t seed = detector_seed(s_, index);
      auto bursts = expand_bursts(*syn, seed, d->frames);
      d->truth = default_truth(syn->bursts, d->frames);
      d->detector = std::make_unique<detect::SyntheticDetector>(detect::SyntheticProfile{syn->noise, bursts, seed});
    } else {
      const auto& tr = std::get<TraceSpec>(d->spec.detector);
      auto trace = detect::ScoreTrace::load(tr.csv.string(), tr.ground_truth.empty() ? std::string{} : tr.ground_truth.string());
      d->truth = trace.ground_truth.empty() ? default_truth({}, d->frames) : trace.ground_truth;
      d->detector = std::make_unique<detect::ReplayDetector>(std::move(trace));
    }
    if (d->spec.ground_truth) d->truth = *d->spec.ground_truth;
    d->node = std::make_unique<edge::EdgeNode>(d->spec.device_id, d->spec.config, d->spec.fps);
    const std::string id = d->spec.device_id;
    d->agent = std::make_unique<edge::DeviceAgent>(clock_, *d->node, *d->detector, [this, id](const wire::Envelope& e) {
      net_.send(id, "cloud", e, [this, id](const std::vector<std::uint8_t>& bytes) {
        if (cloud_) {
          cloud_->on_bytes(id, bytes);
        } else {
          net_.note_lost("cloud", bytes);
        }
      });
    });
    by_id_[id] = d.get();
    devices_.push_back(std::move(d));
  }

  void boot_cloud() {
    cloud::CloudOptions opts;
    opts.queue_capacity = s_.cloud.queue_capacity;
    opts.verify_ms = s_.verifier.verify_ms;
    opts.snapshot_every = s_.cloud.snapshot_every;
    cloud_ = std::make_unique<cloud::CloudService>(
        clock_, log_, clips_, *verifier_, notifier(), [this](const std::string& to, const wire::Envelope& e) {
          net_.send("cloud", to, e, [this, to](const std::vector<std::uint8_t>& bytes) {
            auto it = by_id_.find(to);
            if (it == by_id_.end()) return;  // reply to a peer that is not a scenario device
            it->second->agent->on_envelope(wire::decode(bytes));
          });
        },
        opts);
    if (booted_) note({{"event", "cloud_restarted"}, {"replayed", log_.size() - 1}});
    booted_ = true;
  }

  void schedule_frame(Device* d, FrameSeq seq) {
    clock_.schedule_at(frame_time(d->spec, seq), [this, d, seq] {
      d->agent->on_frame(render_scene(d->spec.scene, d->spec.width, d->spec.height, seq, clock_.now()));
      if (seq + 1 < d->frames) schedule_frame(d, seq + 1);
    });
  }

  void perform(const OperatorAction& op) {
    json rec{{"event", "operator_" + op.action}};
    if (!cloud_) {
      rec["error"] = "cloud down";
      note(rec);
      return;
    }
    try {
      if (op.action == "update_config") {
        rec["device_id"] = op.device_id;
        auto res = cloud_->update_config(op.device_id, op.patch, "operator");
        if (res.ok()) {
          rec["version"] = res.version;
          rec["delivery"] = res.delivery;
        } else {
          rec["errors"] = res.errors;
        }
      } else {
        rec["alert_id"] = op.alert_id;
        cloud_->dismiss(op.alert_id, "operator");
        rec["ok"] = true;
      }
    } catch (const Error& e) {
      rec["error"] = e.what();
    }
    note(rec);
  }

  void note(json rec) {
    rec["t"] = clock_.now();
    harness_.push_back(rec.dump());
  }

  RunResult collect() {
    RunResult r;
    r.seed = s_.seed;
    for (const auto& d : devices_) r.truth.push_back({d->spec.device_id, d->truth});
    r.report = metrics_from_log(log_.records(), r.truth);
    r.cloud_log = log_.text();
    for (const auto& d : devices_) r.device_logs[d->spec.device_id] = d->node->log().to_jsonl();
    r.net_log = net_.to_jsonl();
    const auto& lines = webhook_ ? webhook_->lines() : log_channel_->lines();
    for (const auto& l : lines) r.notifications += l + "\n";
    for (const auto& l : harness_) r.harness_log += l + "\n";
    r.clips = clips_.all();
    return r;
  }

  Scenario s_;
  VirtualClock clock_;
  SimNetwork net_;
  cloud::LogStore log_;
  cloud::ClipStore clips_;
  std::unique_ptr<cloud::Verifier> verifier_;
  std::unique_ptr<cloud::LogNotifier> log_channel_;
  std::unique_ptr<cloud::ScriptedWebhook> webhook_;
  std::unique_ptr<cloud::CloudService> cloud_;
  std::vector<std::unique_ptr<Device>> devices_;
  std::map<std::string, Device*> by_id_;
  std::vector<std::string> harness_;
  bool booted_ = false;
};

inline RunResult run_scenario(const Scenario& s, RunOptions opts = {}) { return SimRun(s, opts).run(); }

struct MomentumComparison {
  RunResult on;
  RunResult off;
};

/// Runs the scenario with the momentum trigger and again with the per-frame
/// trigger at threshold / sum_{i=0..n} k^i.
inline MomentumComparison compare_momentum(const Scenario& s, std::optional<std::uint64_t> seed = std::nullopt) {
  return {run_scenario(s, {seed, TriggerMode::Momentum}), run_scenario(s, {seed, TriggerMode::Instantaneous})};
}

inline json to_json(const MomentumComparison& c, const Scenario& s) {
  json thresholds = json::object();
  for (const auto& d : s.devices) {
    const double w = d.config.weight_sum();
    thresholds[d.device_id] = {{"gun", d.config.thresholds[WeaponClass::Gun] / w},
                               {"knife", d.config.thresholds[WeaponClass::Knife] / w}};
  }
  return json{{"seed", c.on.seed},
              {"momentum_on", to_json(c.on.report)},
              {"momentum_off", to_json(c.off.report)},
              {"instantaneous_thresholds", thresholds}};
}

}  // namespace armguard::sim
