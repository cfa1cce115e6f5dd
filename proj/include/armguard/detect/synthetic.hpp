#pragma once

#include <algorithm>
#include <vector>

#include "armguard/core/rng.hpp"
#include "armguard/detect/detector.hpp"

namespace armguard::detect {

struct Burst {
  FrameSeq start_seq = 0;
  FrameSeq length = 0;
  WeaponClass weapon = WeaponClass::Gun;
  double mean = 0.0;
  double jitter = 0.0;
  double dropout = 0.0;  // probability that a burst frame reports nothing at all

  bool covers(FrameSeq s) const noexcept { return s >= start_seq && s < start_seq + length; }
};

struct SyntheticProfile {
  double noise = 0.0;  // background confidence is uniform(0, noise)
  std::vector<Burst> bursts;
  std::uint64_t seed = 0;

  std::vector<std::string> validate() const {
    std::vector<std::string> errors;
    if (!(noise >= 0.0 && noise < 1.0)) errors.emplace_back("noise out of [0,1)");
    for (const auto& b : bursts) {
      if (!(b.mean >= 0.0 && b.jitter >= 0.0 && b.mean + b.jitter <= 1.0)) {
        errors.emplace_back("burst needs mean, jitter >= 0 and mean + jitter <= 1");
      }
      if (!(b.dropout >= 0.0 && b.dropout <= 1.0)) errors.emplace_back("burst dropout out of [0,1]");
    }
    return errors;
  }
};

/// Scores for one frame. The generator is keyed on (seed, frame seq) rather than
/// on call order, so the result does not depend on which frames the motion gate
/// let through. Per frame, four uniforms are drawn in order: gun noise, knife
/// noise, burst jitter, burst dropout.
inline DetectionScores synth_detect(const SyntheticProfile& profile, FrameSeq seq) {
  SplitMix64 keyed(SplitMix64(profile.seed).next() ^ (seq * 0xD1B54A32D192ED03ULL));
  const double u_gun = keyed.uniform();
  const double u_knife = keyed.uniform();
  const double u_jitter = keyed.uniform();
  const double u_drop = keyed.uniform();

  PerClass<double> q;
  q[WeaponClass::Gun] = u_gun * profile.noise;
  q[WeaponClass::Knife] = u_knife * profile.noise;
  PerClass<bool> claimed{};
  for (const auto& b : profile.bursts) {
    if (!b.covers(seq) || claimed[b.weapon]) continue;
    claimed[b.weapon] = true;
    if (b.dropout > 0.0 && u_drop < b.dropout) {
      q[b.weapon] = 0.0;
    } else {
      q[b.weapon] = std::clamp(b.mean + (2.0 * u_jitter - 1.0) * b.jitter, 0.0, 1.0);
    }
  }
  return DetectionScores::of(q[WeaponClass::Gun], q[WeaponClass::Knife], seq);
}

inline DetectionScores synth_detect(const SyntheticProfile& profile, const Frame& frame) {
  return synth_detect(profile, frame.seq);
}

class SyntheticDetector final : public Detector {
 public:
  explicit SyntheticDetector(SyntheticProfile profile) : profile_(std::move(profile)) {
    auto errors = profile_.validate();
    if (!errors.empty()) throw Error(ErrorCode::ValidationFailed, errors.front());
  }

  DetectionScores detect(const Frame& frame) override { return synth_detect(profile_, frame.seq); }

  const SyntheticProfile& profile() const noexcept { return profile_; }

 private:
  SyntheticProfile profile_;
};

}  // namespace armguard::detect
