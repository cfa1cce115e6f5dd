#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>

#include "armguard/verify/network.hpp"
#include "armguard/verify/resample.hpp"

namespace armguard::cloud {

/// Scores a decoded clip; > 0.5 confirms the alert.
class Verifier {
 public:
  virtual ~Verifier() = default;
  virtual double score(const Clip& clip) = 0;
};

/// Fixed scores, optionally per device. Stands in for a trained model in simulation.
class StubVerifier final : public Verifier {
 public:
  explicit StubVerifier(double default_score = 0.9, std::map<std::string, double> per_device = {})
      : default_(default_score), per_device_(std::move(per_device)) {
    check(default_);
    for (const auto& [_, s] : per_device_) check(s);
  }

  double score(const Clip& clip) override {
    auto it = per_device_.find(clip.device_id);
    return it == per_device_.end() ? default_ : it->second;
  }

 private:
  static void check(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::InvalidArgument, "stub score outside [0,1]");
  }
  double default_;
  std::map<std::string, double> per_device_;
};

/// The 3D-CNN. With a resample config the clip is first re-timed; a clip too short
/// for the requested span is scored as captured.
class CnnVerifier final : public Verifier {
 public:
  CnnVerifier(verify::Network net, std::optional<verify::ResampleConfig> resample = std::nullopt)
      : net_(std::move(net)), resample_(resample) {}

  double score(const Clip& clip) override {
    if (resample_ && clip.fps > 0.0) {
      try {
        auto frames = verify::resample_clip(clip.frames, clip.fps, *resample_);
        return verify::infer(net_, frames);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientFrames) throw;
        ++fallbacks_;
      }
    }
    return verify::infer(net_, clip.frames);
  }

  std::size_t fallbacks() const noexcept { return fallbacks_; }

 private:
  verify::Network net_;
  std::optional<verify::ResampleConfig> resample_;
  std::size_t fallbacks_ = 0;
};

inline std::vector<std::uint8_t> read_binary(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::unique_ptr<Verifier> load_cnn_verifier(const std::filesystem::path& arch, const std::filesystem::path& weights,
                                                   std::optional<verify::ResampleConfig> resample = std::nullopt) {
  const auto arch_bytes = read_binary(arch);
  json j = json::parse(arch_bytes.begin(), arch_bytes.end(), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::BadJson, arch.string() + " is not JSON");
  auto spec = verify::NetworkSpec::from_json(j);
  auto w = verify::weight_file::parse(read_binary(weights));
  return std::make_unique<CnnVerifier>(verify::Network(std::move(spec), std::move(w)), resample);
}

}  // namespace armguard::cloud
