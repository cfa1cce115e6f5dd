#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "armguard/core/rng.hpp"
#include "armguard/core/types.hpp"
#include "armguard/verify/ops.hpp"

namespace armguard::verify {

struct Conv3dLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::array<std::size_t, 3> kernel{3, 3, 3};
  std::size_t padding = 0;
};
struct ReluLayer {};
struct GlobalAvgPoolLayer {};
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
};
struct SigmoidLayer {};

using Layer = std::variant<Conv3dLayer, ReluLayer, GlobalAvgPoolLayer, DenseLayer, SigmoidLayer>;

struct InputShape {
  std::size_t channels = 1;
  std::size_t frames = 30;
  std::size_t height = 224;
  std::size_t width = 224;
};

/// Layer sequence of the clip verifier. Architectures are data: see from_json().
struct NetworkSpec {
  InputShape input;
  std::vector<Layer> layers;

  /// Conv3D(1->16) ReLU Conv3D(16->32) ReLU GAP Dense(32->16) ReLU Dense(16->1) Sigmoid, 3x3x3 kernels, padding 1.
  static NetworkSpec reference() {
    NetworkSpec s;
    s.layers = {Conv3dLayer{1, 16, {3, 3, 3}, 1}, ReluLayer{}, Conv3dLayer{16, 32, {3, 3, 3}, 1}, ReluLayer{},
                GlobalAvgPoolLayer{}, DenseLayer{32, 16}, ReluLayer{}, DenseLayer{16, 1}, SigmoidLayer{}};
    return s;
  }

  /// Throws ShapeMismatch unless every adjacent pair of layers is compatible and
  /// the network ends in a single sigmoid output.
  void validate() const {
    if (input.channels == 0 || input.frames == 0 || input.height == 0 || input.width == 0) {
      throw Error(ErrorCode::ShapeMismatch, "input dims must be positive");
    }
    bool spatial = true;
    std::size_t width = input.channels;
    std::array<std::size_t, 3> extent{input.frames, input.height, input.width};
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const Layer& layer = layers[i];
      auto fail = [&](const std::string& why) {
        throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + ": " + why);
      };
      if (const auto* c = std::get_if<Conv3dLayer>(&layer)) {
        if (!spatial) fail("conv3d after pooling");
        if (c->in != width) fail("conv3d expects " + std::to_string(c->in) + " channels, got " + std::to_string(width));
        if (c->out == 0) fail("conv3d needs at least one output channel");
        for (std::size_t a = 0; a < 3; ++a) {
          if (c->kernel[a] % 2 == 0) fail("conv3d kernel must be odd-sized");
          if (extent[a] + 2 * c->padding < c->kernel[a]) fail("conv3d kernel larger than padded input");
          extent[a] = extent[a] + 2 * c->padding - c->kernel[a] + 1;
        }
        width = c->out;
      } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer)) {
        if (!spatial) fail("second pooling layer");
        spatial = false;
      } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        if (spatial) fail("dense before pooling");
        if (d->in != width) fail("dense expects " + std::to_string(d->in) + " inputs, got " + std::to_string(width));
        if (d->out == 0) fail("dense needs at least one output");
        width = d->out;
      } else if (std::holds_alternative<SigmoidLayer>(layer)) {
        if (i + 1 != layers.size()) fail("sigmoid must be the final layer");
      }
    }
    if (spatial) throw Error(ErrorCode::ShapeMismatch, "network never pools to a vector");
    if (width != 1) throw Error(ErrorCode::ShapeMismatch, "final output dimension must be 1");
    if (layers.empty() || !std::holds_alternative<SigmoidLayer>(layers.back())) {
      throw Error(ErrorCode::ShapeMismatch, "network must end in a sigmoid");
    }
  }

  static NetworkSpec from_json(const json& j) {
    NetworkSpec s;
    if (j.contains("input")) {
      const auto& in = j["input"];
      s.input.channels = in.value("channels", std::size_t{1});
      s.input.frames = in.value("frames", std::size_t{30});
      s.input.height = in.value("height", std::size_t{224});
      s.input.width = in.value("width", std::size_t{224});
    }
    for (const auto& l : j.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "conv3d") {
        Conv3dLayer c;
        c.in = l.at("in").get<std::size_t>();
        c.out = l.at("out").get<std::size_t>();
        auto k = l.value("kernel", std::vector<std::size_t>{3, 3, 3});
        if (k.size() != 3) throw Error(ErrorCode::ShapeMismatch, "conv3d kernel needs 3 extents");
        c.kernel = {k[0], k[1], k[2]};
        c.padding = l.value("padding", std::size_t{0});
        s.layers.emplace_back(c);
      } else if (type == "relu") {
        s.layers.emplace_back(ReluLayer{});
      } else if (type == "global_avg_pool") {
        s.layers.emplace_back(GlobalAvgPoolLayer{});
      } else if (type == "dense") {
        s.layers.emplace_back(DenseLayer{l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>()});
      } else if (type == "sigmoid") {
        s.layers.emplace_back(SigmoidLayer{});
      } else {
        throw Error(ErrorCode::BadJson, "unknown layer type '" + type + "'");
      }
    }
    s.validate();
    return s;
  }

  json to_json() const {
    json layers_json = json::array();
    for (const auto& layer : layers) {
      std::visit(
          [&](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, Conv3dLayer>) {
              layers_json.push_back({{"type", "conv3d"},
                                     {"in", l.in},
                                     {"out", l.out},
                                     {"kernel", {l.kernel[0], l.kernel[1], l.kernel[2]}},
                                     {"padding", l.padding}});
            } else if constexpr (std::is_same_v<T, ReluLayer>) {
              layers_json.push_back({{"type", "relu"}});
            } else if constexpr (std::is_same_v<T, GlobalAvgPoolLayer>) {
              layers_json.push_back({{"type", "global_avg_pool"}});
            } else if constexpr (std::is_same_v<T, DenseLayer>) {
              layers_json.push_back({{"type", "dense"}, {"in", l.in}, {"out", l.out}});
            } else {
              layers_json.push_back({{"type", "sigmoid"}});
            }
          },
          layer);
    }
    return json{{"input",
                 {{"channels", input.channels}, {"frames", input.frames}, {"height", input.height}, {"width", input.width}}},
                {"layers", layers_json}};
  }
};

/// Parameters of one conv3d or dense layer. `shape` is {out, in, kt, kh, kw} or {out, in}.
struct ParamBlock {
  std::vector<std::uint32_t> shape;
  std::vector<float> weights;
  std::vector<float> bias;

  bool is_conv() const noexcept { return shape.size() == 5; }
  std::size_t weight_count() const noexcept {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

struct NetworkWeights {
  std::vector<ParamBlock> blocks;  // one per parametric layer, in layer order

  friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;
};

inline std::vector<ParamBlock> expected_blocks(const NetworkSpec& spec) {
  std::vector<ParamBlock> out;
  for (const auto& layer : spec.layers) {
    if (const auto* c = std::get_if<Conv3dLayer>(&layer)) {
      out.push_back({{static_cast<std::uint32_t>(c->out), static_cast<std::uint32_t>(c->in),
                      static_cast<std::uint32_t>(c->kernel[0]), static_cast<std::uint32_t>(c->kernel[1]),
                      static_cast<std::uint32_t>(c->kernel[2])},
                     {},
                     {}});
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      out.push_back({{static_cast<std::uint32_t>(d->out), static_cast<std::uint32_t>(d->in)}, {}, {}});
    }
  }
  return out;
}

/// Zero-filled weights shaped for `spec`.
inline NetworkWeights zero_weights(const NetworkSpec& spec) {
  NetworkWeights w{expected_blocks(spec)};
  for (auto& b : w.blocks) {
    b.weights.assign(b.weight_count(), 0.0f);
    b.bias.assign(b.shape[0], 0.0f);
  }
  return w;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases, drawn from SplitMix64(seed)
/// layer by layer, weights before biases.
inline NetworkWeights random_weights(const NetworkSpec& spec, std::uint64_t seed) {
  SplitMix64 rng(seed);
  NetworkWeights w{expected_blocks(spec)};
  for (auto& b : w.blocks) {
    const std::size_t fan_in = b.weight_count() / b.shape[0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    b.weights.resize(b.weight_count());
    for (auto& v : b.weights) v = static_cast<float>(rng.uniform(-bound, bound));
    b.bias.resize(b.shape[0]);
    for (auto& v : b.bias) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return w;
}

inline void check_weights(const NetworkSpec& spec, const NetworkWeights& w) {
  auto expected = expected_blocks(spec);
  if (expected.size() != w.blocks.size()) throw Error(ErrorCode::ShapeMismatch, "weight file layer count mismatch");
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const auto& b = w.blocks[i];
    if (b.shape != expected[i].shape) {
      throw Error(ErrorCode::ShapeMismatch, "weight block " + std::to_string(i) + " shape does not match architecture");
    }
    if (b.weights.size() != b.weight_count() || b.bias.size() != b.shape[0]) {
      throw Error(ErrorCode::ShapeMismatch, "weight block " + std::to_string(i) + " value count mismatch");
    }
  }
}

// Weight file layout, all integers and floats little-endian:
//   "S3DC" | u16 version (1) | u16 block count
//   per block: u8 kind (1 = conv3d, 2 = dense) | u8 rank (5 or 2) | rank x u32 dims
//              | float32 weights (product of dims) | float32 biases (dims[0])
namespace weight_file {

inline constexpr std::array<std::uint8_t, 4> kMagic{'S', '3', 'D', 'C'};
inline constexpr std::uint16_t kVersion = 1;

namespace detail {
inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
inline void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::Malformed, "weight file truncated");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};
}  // namespace detail

inline std::vector<std::uint8_t> serialize(const NetworkWeights& w) {
  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  detail::put_u16(out, kVersion);
  detail::put_u16(out, static_cast<std::uint16_t>(w.blocks.size()));
  for (const auto& b : w.blocks) {
    if (b.shape.size() != 5 && b.shape.size() != 2) throw Error(ErrorCode::ShapeMismatch, "block rank must be 5 or 2");
    out.push_back(b.is_conv() ? 1 : 2);
    out.push_back(static_cast<std::uint8_t>(b.shape.size()));
    for (auto d : b.shape) detail::put_u32(out, d);
    for (float f : b.weights) detail::put_f32(out, f);
    for (float f : b.bias) detail::put_f32(out, f);
  }
  return out;
}

inline NetworkWeights parse(std::span<const std::uint8_t> bytes) {
  detail::Reader r(bytes);
  r.need(4);
  for (auto m : kMagic) {
    if (r.u8() != m) throw Error(ErrorCode::Malformed, "weight file magic is not S3DC");
  }
  if (r.u16() != kVersion) throw Error(ErrorCode::Malformed, "unsupported weight file version");
  const std::uint16_t count = r.u16();
  NetworkWeights w;
  for (std::uint16_t i = 0; i < count; ++i) {
    ParamBlock b;
    const std::uint8_t kind = r.u8();
    const std::uint8_t rank = r.u8();
    if (!((kind == 1 && rank == 5) || (kind == 2 && rank == 2))) {
      throw Error(ErrorCode::Malformed, "weight block kind/rank invalid");
    }
    for (std::uint8_t d = 0; d < rank; ++d) b.shape.push_back(r.u32());
    std::uint64_t n = 1;
    for (auto d : b.shape) {
      n *= d;
      if (n > r.remaining()) throw Error(ErrorCode::Malformed, "weight file truncated");
    }
    if (b.shape[0] == 0) throw Error(ErrorCode::Malformed, "weight block with zero outputs");
    r.need((n + b.shape[0]) * 4);
    b.weights.resize(n);
    for (auto& f : b.weights) f = r.f32();
    b.bias.resize(b.shape[0]);
    for (auto& f : b.bias) f = r.f32();
    w.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw Error(ErrorCode::Malformed, "trailing bytes after weight blocks");
  return w;
}

}  // namespace weight_file

/// Architecture plus matching weights, ready for inference.
class Network {
 public:
  Network(NetworkSpec spec, NetworkWeights weights) : spec_(std::move(spec)), weights_(std::move(weights)) {
    spec_.validate();
    check_weights(spec_, weights_);
    std::size_t block = 0;
    for (const auto& layer : spec_.layers) {
      if (const auto* c = std::get_if<Conv3dLayer>(&layer)) {
        const auto& b = weights_.blocks[block++];
        convs_.push_back(Conv3dParams{c->in, c->out, c->kernel, c->padding, b.weights, b.bias});
      } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        const auto& b = weights_.blocks[block++];
        denses_.push_back(DenseParams{d->in, d->out, b.weights, b.bias});
      }
    }
  }

  const NetworkSpec& spec() const noexcept { return spec_; }
  const NetworkWeights& weights() const noexcept { return weights_; }

  /// Runs every layer and returns the final sigmoid output. Pure.
  double forward(const Tensor4& input) const {
    const auto& d = input.dims();
    if (d.channels != spec_.input.channels || d.time != spec_.input.frames || d.height != spec_.input.height ||
        d.width != spec_.input.width) {
      throw Error(ErrorCode::ShapeMismatch, "input tensor does not match architecture input");
    }
    Tensor4 spatial = input;
    std::vector<double> vec;
    std::size_t ci = 0;
    std::size_t di = 0;
    const auto& layers = spec_.layers;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const Layer& layer = layers[i];
      if (std::holds_alternative<Conv3dLayer>(layer)) {
        const bool fuse = i + 2 < layers.size() && std::holds_alternative<ReluLayer>(layers[i + 1]) &&
                          std::holds_alternative<GlobalAvgPoolLayer>(layers[i + 2]);
        if (fuse) {
          vec = conv3d_relu_gap(spatial, convs_[ci++]);
          spatial = Tensor4();
          i += 2;
        } else {
          spatial = conv3d(spatial, convs_[ci++]);
        }
      } else if (std::holds_alternative<ReluLayer>(layer)) {
        if (spatial.size() > 0) {
          spatial = relu(std::move(spatial));
        } else {
          vec = relu(std::move(vec));
        }
      } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer)) {
        vec = global_avg_pool(spatial);
        spatial = Tensor4();
      } else if (std::holds_alternative<DenseLayer>(layer)) {
        vec = dense(vec, denses_[di++]);
      } else {
        vec[0] = sigmoid(vec[0]);
      }
    }
    return vec.at(0);
  }

 private:
  NetworkSpec spec_;
  NetworkWeights weights_;
  std::vector<Conv3dParams> convs_;
  std::vector<DenseParams> denses_;
};

/// Nearest-neighbour resize to (height, width), scaled to [0,1], stacked as (1, T, H, W).
inline Tensor4 clip_to_tensor(std::span<const Frame> frames, std::size_t height, std::size_t width) {
  Tensor4 t({1, frames.size(), height, width});
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const Frame& src = frames[f];
    if (src.width == 0 || src.height == 0) throw Error(ErrorCode::ShapeMismatch, "empty frame");
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t sy = y * src.height / height;
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t sx = x * src.width / width;
        t.at(0, f, y, x) = static_cast<float>(src.pixels[sy * src.width + sx] / 255.0);
      }
    }
  }
  return t;
}

/// Probability that the clip shows a robbery. Above 0.5 is labelled "robbery".
inline double infer(const Network& net, std::span<const Frame> frames) {
  const auto& in = net.spec().input;
  if (frames.size() != in.frames) {
    throw Error(ErrorCode::ShapeMismatch,
                "clip has " + std::to_string(frames.size()) + " frames, network expects " + std::to_string(in.frames));
  }
  if (in.channels != 1) throw Error(ErrorCode::ShapeMismatch, "grayscale clips need a 1-channel input layer");
  return net.forward(clip_to_tensor(frames, in.height, in.width));
}

inline constexpr double kRobberyThreshold = 0.5;

}  // namespace armguard::verify
