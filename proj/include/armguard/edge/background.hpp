#pragma once

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::edge {

/// Anything that can tell static from moving pixels. apply() consumes one frame
/// and returns the fraction of pixels classified as foreground.
class BackgroundSubtractor {
 public:
  virtual ~BackgroundSubtractor() = default;
  virtual double apply(const Frame& frame) = 0;
  virtual void reset() = 0;
};

/// Single-Gaussian running mean per pixel.
struct BackgroundModel {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> mean;  // empty until the first frame seeds it
  double rho = 0.05;
  double tau = 25.0;

  static BackgroundModel seeded(std::uint32_t w, std::uint32_t h, double value, double rho = 0.05, double tau = 25.0) {
    return BackgroundModel{w, h, std::vector<double>(static_cast<std::size_t>(w) * h, value), rho, tau};
  }

  bool initialized() const noexcept { return !mean.empty(); }
};

/// Pure form: returns the updated model and the foreground ratio measured against
/// the model as it was before the update. An unseeded model adopts the frame and
/// reports no foreground.
inline std::pair<BackgroundModel, double> update_background(BackgroundModel model, const Frame& frame) {
  if (!model.initialized()) {
    model.width = frame.width;
    model.height = frame.height;
    model.mean.assign(frame.pixels.begin(), frame.pixels.end());
    return {std::move(model), 0.0};
  }
  if (frame.width != model.width || frame.height != model.height) {
    throw Error(ErrorCode::DimensionMismatch, "frame size differs from background model");
  }
  std::size_t moving = 0;
  const double keep = 1.0 - model.rho;
  for (std::size_t i = 0; i < frame.pixels.size(); ++i) {
    double p = frame.pixels[i];
    if (std::abs(p - model.mean[i]) > model.tau) ++moving;
    model.mean[i] = keep * model.mean[i] + model.rho * p;
  }
  double ratio = frame.pixels.empty() ? 0.0 : static_cast<double>(moving) / static_cast<double>(frame.pixels.size());
  return {std::move(model), ratio};
}

class RunningMeanSubtractor final : public BackgroundSubtractor {
 public:
  RunningMeanSubtractor(double rho, double tau) : model_{0, 0, {}, rho, tau} {}

  double apply(const Frame& frame) override {
    auto [next, ratio] = update_background(std::move(model_), frame);
    model_ = std::move(next);
    return ratio;
  }

  void reset() override { model_.mean.clear(); }

  const BackgroundModel& model() const noexcept { return model_; }

 private:
  BackgroundModel model_;
};

}  // namespace armguard::edge
