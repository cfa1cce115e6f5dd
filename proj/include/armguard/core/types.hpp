#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "armguard/core/error.hpp"

namespace armguard {

using json = nlohmann::json;

/// Virtual milliseconds. Simulation time is integral so event ordering is exact.
using TimeMs = std::int64_t;
using FrameSeq = std::uint64_t;

enum class WeaponClass : std::uint8_t { Gun = 0, Knife = 1 };

inline constexpr std::array<WeaponClass, 2> kWeaponClasses{WeaponClass::Gun, WeaponClass::Knife};

inline constexpr std::size_t index_of(WeaponClass c) noexcept { return static_cast<std::size_t>(c); }

inline std::string_view to_string(WeaponClass c) {
  return c == WeaponClass::Gun ? "gun" : "knife";
}

inline WeaponClass weapon_class_from_string(std::string_view s) {
  if (s == "gun") return WeaponClass::Gun;
  if (s == "knife") return WeaponClass::Knife;
  throw Error(ErrorCode::InvalidArgument, "unknown weapon class '" + std::string(s) + "'");
}

/// A value per weapon class, indexed by WeaponClass.
template <typename T>
struct PerClass {
  std::array<T, 2> values{};

  constexpr T& operator[](WeaponClass c) noexcept { return values[index_of(c)]; }
  constexpr const T& operator[](WeaponClass c) const noexcept { return values[index_of(c)]; }
  friend bool operator==(const PerClass&, const PerClass&) = default;
};

/// Row-major 8-bit grayscale image.
struct Frame {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;
  TimeMs timestamp = 0;
  FrameSeq seq = 0;

  Frame() = default;
  Frame(std::uint32_t w, std::uint32_t h, std::vector<std::uint8_t> px, TimeMs ts = 0, FrameSeq s = 0)
      : width(w), height(h), pixels(std::move(px)), timestamp(ts), seq(s) {
    if (pixels.size() != static_cast<std::size_t>(w) * h) {
      throw Error(ErrorCode::DimensionMismatch, "pixel count does not match width*height");
    }
  }

  static Frame filled(std::uint32_t w, std::uint32_t h, std::uint8_t value, TimeMs ts = 0, FrameSeq s = 0) {
    return Frame(w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, value), ts, s);
  }

  std::size_t size() const noexcept { return pixels.size(); }
  std::uint8_t at(std::uint32_t x, std::uint32_t y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool same_shape(const Frame& o) const noexcept { return width == o.width && height == o.height; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Per-frame detector output. A class that was not detected has confidence exactly 0.
struct DetectionScores {
  PerClass<double> confidence{};
  FrameSeq frame_seq = 0;

  static DetectionScores zero(FrameSeq seq = 0) { return DetectionScores{{}, seq}; }

  static DetectionScores of(double gun, double knife, FrameSeq seq = 0) {
    DetectionScores s;
    s.confidence[WeaponClass::Gun] = gun;
    s.confidence[WeaponClass::Knife] = knife;
    s.frame_seq = seq;
    return s;
  }

  double operator[](WeaponClass c) const noexcept { return confidence[c]; }

  bool valid() const noexcept {
    for (double q : confidence.values) {
      if (!(q >= 0.0 && q <= 1.0)) return false;
    }
    return true;
  }

  friend bool operator==(const DetectionScores&, const DetectionScores&) = default;
};

/// How the edge decides a detection is valid. Instantaneous exists only as the
/// comparison baseline for the momentum filter.
enum class TriggerMode { Momentum, Instantaneous };

struct DeviceConfig {
  double alpha = 1.0;  // contrast gain
  double beta = 0.0;   // brightness offset
  double k = 0.5;
  std::uint32_t n = 5;
  PerClass<double> thresholds{{1.05, 0.7}};
  TimeMs cooldown_ms = 10'000;
  double motion_ratio_min = 0.01;
  double bg_rho = 0.05;
  double bg_tau = 25.0;
  TriggerMode trigger_mode = TriggerMode::Momentum;

  std::size_t queue_capacity() const noexcept { return static_cast<std::size_t>(n) + 1; }

  /// Σ_{i=0..n} k^i, the largest momentum a stream of 1.0 confidences can reach.
  double weight_sum() const noexcept {
    double s = 0.0;
    double w = 1.0;
    for (std::uint32_t i = 0; i <= n; ++i) {
      s += w;
      w *= k;
    }
    return s;
  }

  friend bool operator==(const DeviceConfig&, const DeviceConfig&) = default;
};

inline constexpr std::uint32_t kMaxWindowExponent = 1000;

/// Returns every violated invariant; empty means the config is usable.
inline std::vector<std::string> validate_config(const DeviceConfig& cfg) {
  std::vector<std::string> errors;
  if (!(std::isfinite(cfg.alpha) && cfg.alpha > 0.0)) errors.emplace_back("alpha must be > 0");
  if (!std::isfinite(cfg.beta)) errors.emplace_back("beta must be finite");
  if (!(cfg.k > 0.0 && cfg.k < 1.0)) errors.emplace_back("k out of (0,1)");
  if (cfg.n > kMaxWindowExponent) errors.emplace_back("n out of [0,1000]");
  for (WeaponClass c : kWeaponClasses) {
    double t = cfg.thresholds[c];
    if (!(std::isfinite(t) && t > 0.0)) {
      errors.push_back("threshold " + std::string(to_string(c)) + " must be > 0");
    }
  }
  if (cfg.cooldown_ms < 0) errors.emplace_back("cooldown_ms must be >= 0");
  if (!(cfg.motion_ratio_min >= 0.0 && cfg.motion_ratio_min <= 1.0)) {
    errors.emplace_back("motion_ratio_min out of [0,1]");
  }
  if (!(cfg.bg_rho > 0.0 && cfg.bg_rho < 1.0)) errors.emplace_back("bg_rho out of (0,1)");
  if (!(std::isfinite(cfg.bg_tau) && cfg.bg_tau >= 0.0)) errors.emplace_back("bg_tau must be >= 0");
  return errors;
}

inline json to_json(const DeviceConfig& c) {
  return json{
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"k", c.k},
      {"n", c.n},
      {"thresholds", {{"gun", c.thresholds[WeaponClass::Gun]}, {"knife", c.thresholds[WeaponClass::Knife]}}},
      {"cooldown_ms", c.cooldown_ms},
      {"motion_ratio_min", c.motion_ratio_min},
      {"bg_rho", c.bg_rho},
      {"bg_tau", c.bg_tau},
      {"trigger_mode", c.trigger_mode == TriggerMode::Momentum ? "momentum" : "instantaneous"},
  };
}

/// Overlays the keys present in `j` onto `base`. Unknown keys and wrong types are
/// reported as errors rather than ignored, so a typo never silently keeps a default.
inline DeviceConfig merge_config(DeviceConfig base, const json& j, std::vector<std::string>* errors = nullptr) {
  std::vector<std::string> local;
  auto& errs = errors ? *errors : local;
  if (!j.is_object()) {
    errs.emplace_back("config must be a JSON object");
    if (!errors) throw Error(ErrorCode::ValidationFailed, errs.front());
    return base;
  }
  auto number = [&](const json& v, const std::string& key, double& out) {
    if (!v.is_number()) {
      errs.push_back(key + " must be a number");
      return;
    }
    out = v.get<double>();
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "alpha") {
      number(v, key, base.alpha);
    } else if (key == "beta") {
      number(v, key, base.beta);
    } else if (key == "k") {
      number(v, key, base.k);
    } else if (key == "n") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        errs.emplace_back("n must be a non-negative integer");
      } else if (v.get<std::int64_t>() > kMaxWindowExponent) {
        errs.emplace_back("n out of [0,1000]");
      } else {
        base.n = v.get<std::uint32_t>();
      }
    } else if (key == "thresholds") {
      if (!v.is_object()) {
        errs.emplace_back("thresholds must be an object");
        continue;
      }
      for (const auto& [cls, tv] : v.items()) {
        if (cls != "gun" && cls != "knife") {
          errs.push_back("unknown threshold class '" + cls + "'");
          continue;
        }
        number(tv, "threshold " + cls, base.thresholds[weapon_class_from_string(cls)]);
      }
    } else if (key == "cooldown_ms") {
      if (!v.is_number_integer()) {
        errs.emplace_back("cooldown_ms must be an integer");
      } else {
        base.cooldown_ms = v.get<TimeMs>();
      }
    } else if (key == "motion_ratio_min") {
      number(v, key, base.motion_ratio_min);
    } else if (key == "bg_rho") {
      number(v, key, base.bg_rho);
    } else if (key == "bg_tau") {
      number(v, key, base.bg_tau);
    } else if (key == "trigger_mode") {
      if (v == "momentum") {
        base.trigger_mode = TriggerMode::Momentum;
      } else if (v == "instantaneous") {
        base.trigger_mode = TriggerMode::Instantaneous;
      } else {
        errs.emplace_back("trigger_mode must be 'momentum' or 'instantaneous'");
      }
    } else {
      errs.push_back("unknown config key '" + key + "'");
    }
  }
  if (!errors && !errs.empty()) throw Error(ErrorCode::ValidationFailed, errs.front());
  return base;
}

inline DeviceConfig config_from_json(const json& j) { return merge_config(DeviceConfig{}, j); }

/// The 30-frame pre-trigger snapshot shipped from an edge node to the cloud.
struct Clip {
  static constexpr std::size_t kFrames = 30;

  std::string device_id;
  std::vector<Frame> frames;
  WeaponClass trigger_class = WeaponClass::Gun;
  double momentum_at_trigger = 0.0;
  TimeMs captured_at = 0;
  double fps = 0.0;  // capture rate, needed by the resampler

  FrameSeq trigger_seq() const { return frames.empty() ? 0 : frames.back().seq; }

  /// Throws Malformed when the frame count or ordering invariant is broken.
  void check() const {
    if (frames.size() != kFrames) {
      throw Error(ErrorCode::Malformed, "clip must hold exactly 30 frames, got " + std::to_string(frames.size()));
    }
    for (std::size_t i = 1; i < frames.size(); ++i) {
      if (frames[i].seq <= frames[i - 1].seq) throw Error(ErrorCode::Malformed, "clip frame seq not increasing");
      if (!frames[i].same_shape(frames[0])) throw Error(ErrorCode::DimensionMismatch, "clip frames differ in size");
    }
  }

  /// Capture metadata without pixels; travels in the GIF comment block.
  json metadata() const {
    json seqs = json::array();
    json stamps = json::array();
    for (const auto& f : frames) {
      seqs.push_back(f.seq);
      stamps.push_back(f.timestamp);
    }
    return json{{"device_id", device_id},
                {"trigger_class", std::string(to_string(trigger_class))},
                {"momentum", momentum_at_trigger},
                {"captured_at", captured_at},
                {"fps", fps},
                {"frame_seq", seqs},
                {"frame_ts", stamps}};
  }
};

}  // namespace armguard
