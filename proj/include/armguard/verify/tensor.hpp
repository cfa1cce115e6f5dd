#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "armguard/core/error.hpp"

namespace armguard::verify {

/// Dense channels x time x height x width array, row-major (width fastest).
class Tensor4 {
 public:
  struct Dims {
    std::size_t channels = 0;
    std::size_t time = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t count() const noexcept { return channels * time * height * width; }
    std::size_t plane() const noexcept { return time * height * width; }
    friend bool operator==(const Dims&, const Dims&) = default;
  };

  Tensor4() = default;
  explicit Tensor4(Dims dims, float fill = 0.0f) : dims_(dims), data_(dims.count(), fill) {}
  Tensor4(Dims dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.count()) throw Error(ErrorCode::ShapeMismatch, "tensor data does not match dims");
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }

  std::size_t offset(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const noexcept {
    return ((c * dims_.time + t) * dims_.height + y) * dims_.width + x;
  }

  float& at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) noexcept { return data_[offset(c, t, y, x)]; }
  float at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const noexcept {
    return data_[offset(c, t, y, x)];
  }

  float* channel(std::size_t c) noexcept { return data_.data() + c * dims_.plane(); }
  const float* channel(std::size_t c) const noexcept { return data_.data() + c * dims_.plane(); }

  std::vector<float>& data() noexcept { return data_; }
  const std::vector<float>& data() const noexcept { return data_; }

  bool all_finite() const noexcept {
    for (float v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

 private:
  Dims dims_{};
  std::vector<float> data_;
};

}  // namespace armguard::verify
