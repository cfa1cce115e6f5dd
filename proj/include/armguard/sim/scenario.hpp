#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "armguard/core/rng.hpp"
#include "armguard/detect/synthetic.hpp"
#include "armguard/detect/trace.hpp"
#include "armguard/sim/scene.hpp"
#include "armguard/verify/resample.hpp"

namespace armguard::sim {

struct LatencyModel {
  TimeMs lo = 20;
  TimeMs hi = 20;  // lo == hi: fixed
};

struct NetworkModel {
  LatencyModel latency;
  double drop_probability = 0.0;
};

struct StubVerifierSpec {
  double default_score = 0.9;
  std::map<std::string, double> per_device;
};

struct WeightsVerifierSpec {
  std::filesystem::path arch;
  std::filesystem::path weights;
};

struct VerifierSpec {
  std::variant<StubVerifierSpec, WeightsVerifierSpec> mode = StubVerifierSpec{};
  TimeMs verify_ms = 400;
};

struct NotifierSpec {
  std::string channel = "log";  // "log" or "webhook"
  std::vector<std::string> urls;
  int fail_attempts = 0;
};

struct CloudSpec {
  std::size_t queue_capacity = 64;
  std::size_t snapshot_every = 0;
  std::optional<TimeMs> crash_at_ms;
  TimeMs restart_delay_ms = 0;
  NotifierSpec notifier;
};

/// Isolated single-frame confidence spikes; expanded into length-1 bursts.
struct SpikeSpec {
  std::size_t count = 0;
  FrameSeq start_seq = 30;
  FrameSeq min_gap = 6;
  FrameSeq max_gap = 40;
  double value = 0.9;
  double jitter = 0.0;
  WeaponClass weapon = WeaponClass::Gun;
};

struct SyntheticSpec {
  double noise = 0.0;
  std::vector<detect::Burst> bursts;
  std::optional<SpikeSpec> spikes;
  std::optional<std::uint64_t> seed;  // default: derived from scenario seed and device index
};

struct TraceSpec {
  std::filesystem::path csv;
  std::filesystem::path ground_truth;
};

struct DeviceSpec {
  std::string device_id;
  double fps = 10.0;
  std::uint32_t width = 64;
  std::uint32_t height = 48;
  json config_patch = json::object();
  DeviceConfig config;
  SceneKind scene = SceneKind::Moving;
  std::variant<SyntheticSpec, TraceSpec> detector = SyntheticSpec{};
  std::optional<std::vector<detect::LabeledInterval>> ground_truth;
  TimeMs start_ms = 0;
};

struct OperatorAction {
  TimeMs at_ms = 0;
  std::string action;  // "update_config" or "dismiss"
  std::string device_id;
  json patch = json::object();
  std::string alert_id;
};

struct Scenario {
  std::uint64_t seed = 0;
  TimeMs duration_ms = 60'000;
  TimeMs settle_ms = 30'000;  // virtual time after the last frame for retries and verdicts to drain
  NetworkModel network;
  VerifierSpec verifier;
  std::optional<verify::ResampleConfig> resample;
  CloudSpec cloud;
  std::vector<DeviceSpec> devices;
  std::vector<OperatorAction> operator_actions;
  std::filesystem::path base_dir;  // relative paths resolve against this
};

/// Frame timestamps are round(seq * 1000 / fps) after the device's start.
inline TimeMs frame_time(const DeviceSpec& d, FrameSeq seq) {
  return d.start_ms + static_cast<TimeMs>(std::llround(static_cast<double>(seq) * 1000.0 / d.fps));
}

/// Frames the device captures before duration_ms.
inline FrameSeq frame_count(const Scenario& s, const DeviceSpec& d) {
  if (d.start_ms >= s.duration_ms) return 0;
  FrameSeq n = static_cast<FrameSeq>(std::ceil(static_cast<double>(s.duration_ms - d.start_ms) * d.fps / 1000.0));
  while (n > 0 && frame_time(d, n - 1) >= s.duration_ms) --n;
  while (frame_time(d, n) < s.duration_ms) ++n;
  return n;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  SplitMix64 g(seed ^ (salt * 0x9E3779B97F4A7C15ULL));
  return g.next();
}

/// Burst list a synthetic device actually uses: declared bursts plus expanded spikes.
inline std::vector<detect::Burst> expand_bursts(const SyntheticSpec& syn, std::uint64_t seed, FrameSeq frames) {
  std::vector<detect::Burst> out = syn.bursts;
  if (!syn.spikes) return out;
  const SpikeSpec& sp = *syn.spikes;
  SplitMix64 rng(mix_seed(seed, 0x5B1CE));
  FrameSeq at = sp.start_seq;
  for (std::size_t i = 0; i < sp.count && at < frames; ++i) {
    out.push_back(detect::Burst{at, 1, sp.weapon, sp.value, sp.jitter, 0.0});
    at += static_cast<FrameSeq>(rng.uniform_int(static_cast<std::int64_t>(sp.min_gap), static_cast<std::int64_t>(sp.max_gap)));
  }
  return out;
}

inline std::uint64_t detector_seed(const Scenario& s, std::size_t device_index) {
  const auto& syn = std::get<SyntheticSpec>(s.devices[device_index].detector);
  return syn.seed ? *syn.seed : mix_seed(s.seed, device_index + 1);
}

/// Labels when the scenario gives none: each burst of length > 1 is a robbery
/// interval, everything else up to the last frame is normal. Spikes are noise.
inline std::vector<detect::LabeledInterval> default_truth(const std::vector<detect::Burst>& bursts, FrameSeq frames) {
  std::vector<detect::LabeledInterval> out;
  if (frames == 0) return out;
  std::vector<std::pair<FrameSeq, FrameSeq>> rob;
  for (const auto& b : bursts) {
    if (b.length <= 1 || b.start_seq >= frames) continue;
    rob.emplace_back(b.start_seq, std::min(frames - 1, b.start_seq + b.length - 1));
  }
  std::sort(rob.begin(), rob.end());
  std::vector<std::pair<FrameSeq, FrameSeq>> merged;
  for (const auto& r : rob) {
    if (!merged.empty() && r.first <= merged.back().second + 1) {
      merged.back().second = std::max(merged.back().second, r.second);
    } else {
      merged.push_back(r);
    }
  }
  FrameSeq cursor = 0;
  for (const auto& [a, b] : merged) {
    if (a > cursor) out.push_back({cursor, a - 1, detect::IntervalLabel::Normal});
    out.push_back({a, b, detect::IntervalLabel::Robbery});
    cursor = b + 1;
  }
  if (cursor < frames) out.push_back({cursor, frames - 1, detect::IntervalLabel::Normal});
  return out;
}

namespace detail {

/// Collects every problem instead of stopping at the first.
class Checker {
 public:
  explicit Checker(std::vector<std::string>& errors) : errors_(errors) {}

  void fail(const std::string& where, const std::string& what) { errors_.push_back(where + ": " + what); }

  void allow_keys(const json& obj, const std::string& where, std::initializer_list<std::string_view> keys) {
    if (!obj.is_object()) return;
    for (const auto& [k, _] : obj.items()) {
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(where, "unknown key '" + k + "'");
    }
  }

  template <typename T>
  std::optional<T> get(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) return std::nullopt;
    const json& v = obj[key];
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw std::invalid_argument("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw std::invalid_argument("");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.get<std::int64_t>() < 0 && !v.is_number_unsigned()) throw std::invalid_argument("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw std::invalid_argument("");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      fail(where + "." + key, "wrong type");
      return std::nullopt;
    }
  }

 private:
  std::vector<std::string>& errors_;
};

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

}  // namespace detail

/// Parses and validates a scenario. Every problem is reported in one
/// ValidationFailed error, messages separated by "; ".
inline Scenario parse_scenario(const json& j, const std::filesystem::path& base_dir = {}) {
  std::vector<std::string> errors;
  detail::Checker c(errors);
  Scenario s;
  s.base_dir = base_dir;
  if (!j.is_object()) throw Error(ErrorCode::ValidationFailed, "scenario must be a JSON object");
  c.allow_keys(j, "scenario",
               {"seed", "duration_ms", "settle_ms", "network", "verifier", "resample", "cloud", "devices",
                "operator_actions", "description"});

  if (auto v = c.get<std::uint64_t>(j, "seed", "scenario")) s.seed = *v;
  if (auto v = c.get<TimeMs>(j, "duration_ms", "scenario")) s.duration_ms = *v;
  if (auto v = c.get<TimeMs>(j, "settle_ms", "scenario")) s.settle_ms = *v;
  if (s.duration_ms < 0) c.fail("duration_ms", "must be >= 0");
  if (s.settle_ms < 0) c.fail("settle_ms", "must be >= 0");

  if (j.contains("network")) {
    const json& n = j["network"];
    if (!n.is_object()) {
      c.fail("network", "must be an object");
    } else {
      c.allow_keys(n, "network", {"latency_ms", "drop_probability"});
      if (auto p = c.get<double>(n, "drop_probability", "network")) s.network.drop_probability = *p;
      if (!(s.network.drop_probability >= 0.0 && s.network.drop_probability < 1.0)) {
        c.fail("network.drop_probability", "must be in [0,1)");
      }
      if (n.contains("latency_ms")) {
        const json& l = n["latency_ms"];
        if (l.is_number_integer()) {
          s.network.latency.lo = s.network.latency.hi = l.get<TimeMs>();
        } else if (l.is_object() && l.contains("fixed") && l["fixed"].is_number_integer() && l.size() == 1) {
          s.network.latency.lo = s.network.latency.hi = l["fixed"].get<TimeMs>();
        } else if (l.is_object() && l.contains("uniform") && l.size() == 1 && l["uniform"].is_array() &&
                   l["uniform"].size() == 2 && l["uniform"][0].is_number_integer() && l["uniform"][1].is_number_integer()) {
          s.network.latency.lo = l["uniform"][0].get<TimeMs>();
          s.network.latency.hi = l["uniform"][1].get<TimeMs>();
        } else {
          c.fail("network.latency_ms", "must be an integer, {\"fixed\": ms} or {\"uniform\": [lo, hi]}");
        }
        if (s.network.latency.lo < 0 || s.network.latency.hi < s.network.latency.lo) {
          c.fail("network.latency_ms", "needs 0 <= lo <= hi");
        }
      }
    }
  }

  if (j.contains("verifier")) {
    const json& v = j["verifier"];
    if (!v.is_object()) {
      c.fail("verifier", "must be an object");
    } else {
      c.allow_keys(v, "verifier", {"mode", "default", "devices", "arch", "weights", "verify_ms"});
      const std::string mode = c.get<std::string>(v, "mode", "verifier").value_or("stub");
      if (auto ms = c.get<TimeMs>(v, "verify_ms", "verifier")) s.verifier.verify_ms = *ms;
      if (s.verifier.verify_ms < 0) c.fail("verifier.verify_ms", "must be >= 0");
      if (mode == "stub") {
        StubVerifierSpec stub;
        if (auto d = c.get<double>(v, "default", "verifier")) stub.default_score = *d;
        if (!(stub.default_score >= 0.0 && stub.default_score <= 1.0)) c.fail("verifier.default", "must be in [0,1]");
        if (v.contains("devices")) {
          if (!v["devices"].is_object()) {
            c.fail("verifier.devices", "must map device_id to score");
          } else {
            for (const auto& [id, sc] : v["devices"].items()) {
              if (!sc.is_number() || sc.get<double>() < 0.0 || sc.get<double>() > 1.0) {
                c.fail("verifier.devices." + id, "score must be a number in [0,1]");
              } else {
                stub.per_device[id] = sc.get<double>();
              }
            }
          }
        }
        s.verifier.mode = stub;
      } else if (mode == "weights") {
        WeightsVerifierSpec w;
        auto arch = c.get<std::string>(v, "arch", "verifier");
        auto weights = c.get<std::string>(v, "weights", "verifier");
        if (!arch || !weights) c.fail("verifier", "weights mode needs 'arch' and 'weights'");
        if (arch) w.arch = base_dir / *arch;
        if (weights) w.weights = base_dir / *weights;
        if (arch && !std::filesystem::exists(w.arch)) c.fail("verifier.arch", "file not found: " + w.arch.string());
        if (weights && !std::filesystem::exists(w.weights)) {
          c.fail("verifier.weights", "file not found: " + w.weights.string());
        }
        s.verifier.mode = w;
      } else {
        c.fail("verifier.mode", "must be 'stub' or 'weights'");
      }
    }
  }

  if (j.contains("resample") && !j["resample"].is_null()) {
    const json& r = j["resample"];
    verify::ResampleConfig rc;
    auto fps = c.get<double>(r, "fps", "resample");
    auto secs = c.get<double>(r, "seconds", "resample");
    c.allow_keys(r, "resample", {"fps", "seconds"});
    if (!fps || !secs) {
      c.fail("resample", "needs numeric 'fps' and 'seconds'");
    } else {
      rc.fps = *fps;
      rc.seconds = *secs;
      if (!rc.valid()) c.fail("resample", "round(fps*seconds) must be 30");
      s.resample = rc;
    }
  }

  if (j.contains("cloud")) {
    const json& cl = j["cloud"];
    c.allow_keys(cl, "cloud", {"queue_capacity", "snapshot_every", "crash_at_ms", "restart_delay_ms", "notifier"});
    if (auto q = c.get<std::size_t>(cl, "queue_capacity", "cloud")) s.cloud.queue_capacity = *q;
    if (s.cloud.queue_capacity == 0) c.fail("cloud.queue_capacity", "must be > 0");
    if (auto q = c.get<std::size_t>(cl, "snapshot_every", "cloud")) s.cloud.snapshot_every = *q;
    if (cl.is_object() && cl.contains("crash_at_ms") && !cl["crash_at_ms"].is_null()) {
      s.cloud.crash_at_ms = c.get<TimeMs>(cl, "crash_at_ms", "cloud");
      if (s.cloud.crash_at_ms && *s.cloud.crash_at_ms < 0) c.fail("cloud.crash_at_ms", "must be >= 0");
    }
    if (auto d = c.get<TimeMs>(cl, "restart_delay_ms", "cloud")) s.cloud.restart_delay_ms = *d;
    if (s.cloud.restart_delay_ms < 0) c.fail("cloud.restart_delay_ms", "must be >= 0");
    if (cl.is_object() && cl.contains("notifier")) {
      const json& n = cl["notifier"];
      c.allow_keys(n, "cloud.notifier", {"channel", "urls", "fail_attempts"});
      if (auto ch = c.get<std::string>(n, "channel", "cloud.notifier")) s.cloud.notifier.channel = *ch;
      if (s.cloud.notifier.channel != "log" && s.cloud.notifier.channel != "webhook") {
        c.fail("cloud.notifier.channel", "must be 'log' or 'webhook'");
      }
      if (auto f = c.get<int>(n, "fail_attempts", "cloud.notifier")) s.cloud.notifier.fail_attempts = *f;
      if (n.is_object() && n.contains("urls")) {
        if (!n["urls"].is_array()) {
          c.fail("cloud.notifier.urls", "must be an array of strings");
        } else {
          for (const auto& u : n["urls"]) {
            if (u.is_string()) {
              s.cloud.notifier.urls.push_back(u.get<std::string>());
            } else {
              c.fail("cloud.notifier.urls", "must be an array of strings");
            }
          }
        }
      }
    }
  }

  if (j.contains("devices") && !j["devices"].is_array()) c.fail("devices", "must be an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; j.contains("devices") && j["devices"].is_array() && i < j["devices"].size(); ++i) {
    const json& d = j["devices"][i];
    const std::string where = "devices[" + std::to_string(i) + "]";
    if (!d.is_object()) {
      c.fail(where, "must be an object");
      continue;
    }
    c.allow_keys(d, where, {"device_id", "fps", "width", "height", "config", "scene", "detector", "ground_truth", "start_ms"});
    DeviceSpec dev;
    auto id = c.get<std::string>(d, "device_id", where);
    if (!id || id->empty()) {
      c.fail(where + ".device_id", "required non-empty string");
    } else if (!ids.insert(*id).second) {
      c.fail(where + ".device_id", "duplicate '" + *id + "'");
    } else {
      dev.device_id = *id;
    }
    if (auto f = c.get<double>(d, "fps", where)) dev.fps = *f;
    if (!(dev.fps > 0.0 && dev.fps <= 1000.0)) c.fail(where + ".fps", "must be in (0,1000]");
    if (auto w = c.get<std::uint32_t>(d, "width", where)) dev.width = *w;
    if (auto h = c.get<std::uint32_t>(d, "height", where)) dev.height = *h;
    if (dev.width < 4 || dev.height < 4 || dev.width > 4096 || dev.height > 4096) {
      c.fail(where, "width and height must be in [4,4096]");
    }
    if (auto st = c.get<TimeMs>(d, "start_ms", where)) dev.start_ms = *st;
    if (dev.start_ms < 0) c.fail(where + ".start_ms", "must be >= 0");
    if (d.contains("config")) {
      std::vector<std::string> cfg_errors;
      dev.config_patch = d["config"];
      dev.config = merge_config(DeviceConfig{}, d["config"], &cfg_errors);
      if (cfg_errors.empty()) cfg_errors = validate_config(dev.config);
      for (const auto& e : cfg_errors) c.fail(where + ".config", e);
    }
    if (auto sc = c.get<std::string>(d, "scene", where)) {
      try {
        dev.scene = scene_kind_from_string(*sc);
      } catch (const Error&) {
        c.fail(where + ".scene", "must be 'moving' or 'static'");
      }
    }
    if (d.contains("detector")) {
      const json& det = d["detector"];
      const std::string dw = where + ".detector";
      const std::string kind = c.get<std::string>(det, "kind", dw).value_or("synthetic");
      if (kind == "synthetic") {
        c.allow_keys(det, dw, {"kind", "noise", "bursts", "spikes", "seed"});
        SyntheticSpec syn;
        if (auto nz = c.get<double>(det, "noise", dw)) syn.noise = *nz;
        if (auto sd = c.get<std::uint64_t>(det, "seed", dw)) syn.seed = *sd;
        if (det.contains("bursts")) {
          if (!det["bursts"].is_array()) c.fail(dw + ".bursts", "must be an array");
          for (std::size_t b = 0; det["bursts"].is_array() && b < det["bursts"].size(); ++b) {
            const json& bj = det["bursts"][b];
            const std::string bw = dw + ".bursts[" + std::to_string(b) + "]";
            c.allow_keys(bj, bw, {"start_seq", "length", "weapon", "mean", "jitter", "dropout"});
            detect::Burst burst;
            auto st = c.get<FrameSeq>(bj, "start_seq", bw);
            auto len = c.get<FrameSeq>(bj, "length", bw);
            auto mean = c.get<double>(bj, "mean", bw);
            if (!st || !len || !mean) c.fail(bw, "needs start_seq, length and mean");
            burst.start_seq = st.value_or(0);
            burst.length = len.value_or(0);
            burst.mean = mean.value_or(0.0);
            burst.jitter = c.get<double>(bj, "jitter", bw).value_or(0.0);
            burst.dropout = c.get<double>(bj, "dropout", bw).value_or(0.0);
            if (auto wc = c.get<std::string>(bj, "weapon", bw)) {
              if (*wc == "gun" || *wc == "knife") {
                burst.weapon = weapon_class_from_string(*wc);
              } else {
                c.fail(bw + ".weapon", "must be 'gun' or 'knife'");
              }
            }
            syn.bursts.push_back(burst);
          }
        }
        if (det.contains("spikes")) {
          const json& sj = det["spikes"];
          const std::string sw = dw + ".spikes";
          c.allow_keys(sj, sw, {"count", "start_seq", "min_gap", "max_gap", "value", "jitter", "weapon"});
          SpikeSpec sp;
          if (auto v = c.get<std::size_t>(sj, "count", sw)) sp.count = *v;
          if (auto v = c.get<FrameSeq>(sj, "start_seq", sw)) sp.start_seq = *v;
          if (auto v = c.get<FrameSeq>(sj, "min_gap", sw)) sp.min_gap = *v;
          if (auto v = c.get<FrameSeq>(sj, "max_gap", sw)) sp.max_gap = *v;
          if (auto v = c.get<double>(sj, "value", sw)) sp.value = *v;
          if (auto v = c.get<double>(sj, "jitter", sw)) sp.jitter = *v;
          if (auto wc = c.get<std::string>(sj, "weapon", sw)) {
            if (*wc == "gun" || *wc == "knife") {
              sp.weapon = weapon_class_from_string(*wc);
            } else {
              c.fail(sw + ".weapon", "must be 'gun' or 'knife'");
            }
          }
          if (sp.min_gap < 1 || sp.max_gap < sp.min_gap) c.fail(sw, "needs 1 <= min_gap <= max_gap");
          if (!(sp.value >= 0.0 && sp.jitter >= 0.0 && sp.value + sp.jitter <= 1.0)) {
            c.fail(sw, "needs value, jitter >= 0 and value + jitter <= 1");
          }
          syn.spikes = sp;
        }
        detect::SyntheticProfile probe{syn.noise, syn.bursts, 0};
        for (const auto& e : probe.validate()) c.fail(dw, e);
        dev.detector = syn;
      } else if (kind == "trace") {
        c.allow_keys(det, dw, {"kind", "csv", "ground_truth"});
        TraceSpec tr;
        auto csv = c.get<std::string>(det, "csv", dw);
        if (!csv) {
          c.fail(dw + ".csv", "required for trace detectors");
        } else {
          tr.csv = base_dir / *csv;
          if (!std::filesystem::exists(tr.csv)) c.fail(dw + ".csv", "file not found: " + tr.csv.string());
        }
        if (auto gt = c.get<std::string>(det, "ground_truth", dw)) {
          tr.ground_truth = base_dir / *gt;
          if (!std::filesystem::exists(tr.ground_truth)) {
            c.fail(dw + ".ground_truth", "file not found: " + tr.ground_truth.string());
          }
        }
        dev.detector = tr;
      } else {
        c.fail(dw + ".kind", "must be 'synthetic' or 'trace'");
      }
    }
    if (d.contains("ground_truth")) {
      try {
        dev.ground_truth = detect::intervals_from_json(d["ground_truth"]);
      } catch (const std::exception& e) {
        c.fail(where + ".ground_truth", e.what());
      }
    }
    s.devices.push_back(std::move(dev));
  }

  if (j.contains("operator_actions")) {
    const json& acts = j["operator_actions"];
    if (!acts.is_array()) c.fail("operator_actions", "must be an array");
    for (std::size_t i = 0; acts.is_array() && i < acts.size(); ++i) {
      const json& a = acts[i];
      const std::string where = "operator_actions[" + std::to_string(i) + "]";
      c.allow_keys(a, where, {"at_ms", "action", "device_id", "patch", "alert_id"});
      OperatorAction op;
      auto at = c.get<TimeMs>(a, "at_ms", where);
      if (!at || *at < 0) c.fail(where + ".at_ms", "required, >= 0");
      op.at_ms = at.value_or(0);
      op.action = c.get<std::string>(a, "action", where).value_or("");
      if (op.action == "update_config") {
        op.device_id = c.get<std::string>(a, "device_id", where).value_or("");
        if (!ids.contains(op.device_id)) c.fail(where + ".device_id", "not a scenario device");
        if (!a.contains("patch") || !a["patch"].is_object()) {
          c.fail(where + ".patch", "required object");
        } else {
          op.patch = a["patch"];
        }
      } else if (op.action == "dismiss") {
        op.alert_id = c.get<std::string>(a, "alert_id", where).value_or("");
        if (op.alert_id.empty()) c.fail(where + ".alert_id", "required");
      } else {
        c.fail(where + ".action", "must be 'update_config' or 'dismiss'");
      }
      s.operator_actions.push_back(std::move(op));
    }
  }

  if (!errors.empty()) throw Error(ErrorCode::ValidationFailed, detail::join(errors));
  return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ValidationFailed, path.string() + " is not valid JSON");
  return parse_scenario(j, path.parent_path());
}

}  // namespace armguard::sim
