#pragma once

#include "armguard/core/types.hpp"

namespace armguard::detect {

/// Per-frame weapon confidence source. q_c is the maximum confidence for class c
/// in the frame, 0 when the class is absent. Implementations must not depend on
/// wall or virtual time, only on the frame.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectionScores detect(const Frame& frame) = 0;
};

/// Always reports nothing.
class NullDetector final : public Detector {
 public:
  DetectionScores detect(const Frame& frame) override { return DetectionScores::zero(frame.seq); }
};

}  // namespace armguard::detect
