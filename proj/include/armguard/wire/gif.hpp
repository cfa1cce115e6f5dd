#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::wire {

/// Decoded animated GIF: palette-resolved 8-bit gray frames plus the comment text.
struct GifImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::vector<std::uint8_t>> frames;
  std::vector<std::uint16_t> delays_cs;
  std::string comment;
  bool loops = false;
};

namespace gif_detail {

inline constexpr int kMaxCodeBits = 12;
inline constexpr int kMaxCodes = 1 << kMaxCodeBits;
inline constexpr int kMinCodeSize = 8;
inline constexpr int kClear = 1 << kMinCodeSize;
inline constexpr int kEoi = kClear + 1;

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void write(std::uint32_t code, int bits) {
    acc_ |= static_cast<std::uint64_t>(code) << nbits_;
    nbits_ += bits;
    while (nbits_ >= 8) {
      push(static_cast<std::uint8_t>(acc_ & 0xFF));
      acc_ >>= 8;
      nbits_ -= 8;
    }
  }

  void finish() {
    if (nbits_ > 0) push(static_cast<std::uint8_t>(acc_ & 0xFF));
    acc_ = 0;
    nbits_ = 0;
    flush_block();
    out_.push_back(0);  // block terminator
  }

 private:
  void push(std::uint8_t b) {
    block_[block_len_++] = b;
    if (block_len_ == 255) flush_block();
  }
  void flush_block() {
    if (block_len_ == 0) return;
    out_.push_back(static_cast<std::uint8_t>(block_len_));
    out_.insert(out_.end(), block_.begin(), block_.begin() + block_len_);
    block_len_ = 0;
  }

  std::vector<std::uint8_t>& out_;
  std::array<std::uint8_t, 255> block_{};
  int block_len_ = 0;
  std::uint64_t acc_ = 0;
  int nbits_ = 0;
};

/// Variable-width LZW over 8-bit indices. The table is reset with a clear code
/// once all 4096 codes are assigned.
class LzwEncoder {
 public:
  LzwEncoder() : child_(static_cast<std::size_t>(kMaxCodes) * 256, 0) {}

  void encode(std::span<const std::uint8_t> pixels, std::vector<std::uint8_t>& out) {
    out.push_back(kMinCodeSize);
    BitWriter bw(out);
    reset();
    bw.write(kClear, code_bits_);
    if (!pixels.empty()) {
      int prefix = pixels[0];
      for (std::size_t i = 1; i < pixels.size(); ++i) {
        const std::uint8_t sym = pixels[i];
        const std::size_t slot = static_cast<std::size_t>(prefix) * 256 + sym;
        if (child_[slot] != 0) {
          prefix = child_[slot];
          continue;
        }
        bw.write(static_cast<std::uint32_t>(prefix), code_bits_);
        if (next_code_ < kMaxCodes) {
          child_[slot] = static_cast<std::uint16_t>(next_code_);
          used_.push_back(slot);
          ++next_code_;
          if (next_code_ > (1 << code_bits_) && code_bits_ < kMaxCodeBits) ++code_bits_;
        } else {
          bw.write(kClear, code_bits_);
          reset();
        }
        prefix = sym;
      }
      bw.write(static_cast<std::uint32_t>(prefix), code_bits_);
    }
    bw.write(kEoi, code_bits_);
    bw.finish();
  }

 private:
  void reset() {
    for (std::size_t s : used_) child_[s] = 0;
    used_.clear();
    next_code_ = kEoi + 1;
    code_bits_ = kMinCodeSize + 1;
  }

  std::vector<std::uint16_t> child_;  // (prefix code, symbol) -> code, 0 = absent
  std::vector<std::size_t> used_;
  int next_code_ = kEoi + 1;
  int code_bits_ = kMinCodeSize + 1;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    if (pos_ >= bytes_.size()) throw Error(ErrorCode::Malformed, "GIF stream truncated");
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    std::uint16_t lo = u8();
    std::uint16_t hi = u8();
    return static_cast<std::uint16_t>(lo | (hi << 8));
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::Malformed, "GIF stream truncated");
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  /// Concatenated payload of a sub-block chain.
  std::vector<std::uint8_t> sub_blocks() {
    std::vector<std::uint8_t> data;
    while (true) {
      std::uint8_t len = u8();
      if (len == 0) break;
      auto s = take(len);
      data.insert(data.end(), s.begin(), s.end());
    }
    return data;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> lzw_decode(std::span<const std::uint8_t> data, int min_code_size, std::size_t expected) {
  if (min_code_size < 2 || min_code_size > 11) throw Error(ErrorCode::Malformed, "bad LZW minimum code size");
  const int clear = 1 << min_code_size;
  const int eoi = clear + 1;
  std::vector<std::uint16_t> prefix(kMaxCodes);
  std::vector<std::uint8_t> suffix(kMaxCodes);
  std::vector<std::uint8_t> first(kMaxCodes);
  std::vector<std::uint16_t> length(kMaxCodes);
  for (int i = 0; i < clear; ++i) {
    suffix[i] = static_cast<std::uint8_t>(i);
    first[i] = static_cast<std::uint8_t>(i);
    length[i] = 1;
  }
  std::vector<std::uint8_t> out;
  out.reserve(expected);
  int code_bits = min_code_size + 1;
  int next_code = eoi + 1;
  int prev = -1;
  std::size_t bitpos = 0;
  const std::size_t total_bits = data.size() * 8;

  auto emit = [&](int code) {
    const std::size_t start = out.size();
    out.resize(start + length[code]);
    for (int c = code, i = length[code] - 1; i >= 0; --i) {
      out[start + i] = suffix[c];
      c = prefix[c];
    }
  };

  while (true) {
    if (bitpos + code_bits > total_bits) throw Error(ErrorCode::Malformed, "LZW data ended without end code");
    int code = 0;
    for (int b = 0; b < code_bits; ++b, ++bitpos) {
      code |= ((data[bitpos >> 3] >> (bitpos & 7)) & 1) << b;
    }
    if (code == clear) {
      code_bits = min_code_size + 1;
      next_code = eoi + 1;
      prev = -1;
      continue;
    }
    if (code == eoi) break;
    if (prev < 0) {
      if (code >= clear) throw Error(ErrorCode::Malformed, "LZW stream starts with an undefined code");
      emit(code);
      prev = code;
      continue;
    }
    if (code > next_code || (code == next_code && next_code >= kMaxCodes)) {
      throw Error(ErrorCode::Malformed, "LZW code out of range");
    }
    const bool known = code < next_code;
    if (next_code < kMaxCodes) {
      prefix[next_code] = static_cast<std::uint16_t>(prev);
      first[next_code] = first[prev];
      suffix[next_code] = known ? first[code] : first[prev];
      length[next_code] = static_cast<std::uint16_t>(length[prev] + 1);
      ++next_code;
      if (next_code == (1 << code_bits) && code_bits < kMaxCodeBits) ++code_bits;
    }
    emit(code);
    prev = code;
    if (out.size() > expected) throw Error(ErrorCode::Malformed, "LZW data overruns the image");
  }
  if (out.size() != expected) throw Error(ErrorCode::Malformed, "LZW data does not fill the image");
  return out;
}

}  // namespace gif_detail

/// Animated GIF89a with a 256-level gray palette (index i is RGB(i,i,i)), one
/// full-size image per frame, an infinite NETSCAPE loop block, and an optional
/// comment block.
inline std::vector<std::uint8_t> encode_gif(std::span<const Frame> frames, std::uint16_t delay_cs = 7,
                                            const std::string& comment = {}) {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "GIF needs at least one frame");
  const std::uint32_t w = frames[0].width;
  const std::uint32_t h = frames[0].height;
  if (w == 0 || h == 0 || w > 0xFFFF || h > 0xFFFF) throw Error(ErrorCode::DimensionMismatch, "GIF frame size out of range");
  for (const auto& f : frames) {
    if (f.width != w || f.height != h) throw Error(ErrorCode::DimensionMismatch, "GIF frames differ in size");
  }
  std::vector<std::uint8_t> out;
  out.reserve(1024 + frames.size() * w * h);
  auto u16 = [&](std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  };
  for (char c : std::string_view("GIF89a")) out.push_back(static_cast<std::uint8_t>(c));
  u16(w);
  u16(h);
  out.push_back(0xF7);  // global table, 8-bit colour resolution, 256 entries
  out.push_back(0);     // background index
  out.push_back(0);     // pixel aspect
  for (int i = 0; i < 256; ++i) {
    for (int c = 0; c < 3; ++c) out.push_back(static_cast<std::uint8_t>(i));
  }
  // NETSCAPE2.0 application extension, loop forever.
  out.insert(out.end(), {0x21, 0xFF, 0x0B});
  for (char c : std::string_view("NETSCAPE2.0")) out.push_back(static_cast<std::uint8_t>(c));
  out.insert(out.end(), {0x03, 0x01, 0x00, 0x00, 0x00});
  if (!comment.empty()) {
    out.insert(out.end(), {0x21, 0xFE});
    for (std::size_t i = 0; i < comment.size(); i += 255) {
      const std::size_t n = std::min<std::size_t>(255, comment.size() - i);
      out.push_back(static_cast<std::uint8_t>(n));
      out.insert(out.end(), comment.begin() + static_cast<std::ptrdiff_t>(i),
                 comment.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
    out.push_back(0);
  }
  gif_detail::LzwEncoder lzw;
  for (const auto& f : frames) {
    out.insert(out.end(), {0x21, 0xF9, 0x04, 0x04});  // graphic control: disposal "leave in place"
    u16(delay_cs);
    out.insert(out.end(), {0x00, 0x00});
    out.push_back(0x2C);
    u16(0);
    u16(0);
    u16(w);
    u16(h);
    out.push_back(0x00);  // no local table, not interlaced
    lzw.encode(f.pixels, out);
  }
  out.push_back(0x3B);
  return out;
}

/// Strict decoder for the subset written by encode_gif plus common variations
/// (local palettes, unknown extensions). Any structural problem is Malformed.
inline GifImage decode_gif(std::span<const std::uint8_t> bytes) {
  gif_detail::Reader r(bytes);
  auto magic = r.take(6);
  if (std::string_view(reinterpret_cast<const char*>(magic.data()), 6) != "GIF89a" &&
      std::string_view(reinterpret_cast<const char*>(magic.data()), 6) != "GIF87a") {
    throw Error(ErrorCode::Malformed, "not a GIF stream");
  }
  GifImage img;
  img.width = r.u16();
  img.height = r.u16();
  if (img.width == 0 || img.height == 0) throw Error(ErrorCode::Malformed, "GIF has zero size");
  const std::uint8_t packed = r.u8();
  r.u8();
  r.u8();
  std::array<std::uint8_t, 256> global{};
  bool has_global = packed & 0x80;
  if (has_global) {
    const std::size_t entries = std::size_t{2} << (packed & 0x07);
    auto table = r.take(entries * 3);
    for (std::size_t i = 0; i < entries; ++i) global[i] = table[i * 3];
  }
  std::uint16_t pending_delay = 0;
  while (true) {
    const std::uint8_t tag = r.u8();
    if (tag == 0x3B) break;
    if (tag == 0x21) {
      const std::uint8_t label = r.u8();
      auto data = r.sub_blocks();
      if (label == 0xF9 && data.size() >= 4) {
        pending_delay = static_cast<std::uint16_t>(data[1] | (data[2] << 8));
      } else if (label == 0xFE) {
        img.comment.append(data.begin(), data.end());
      } else if (label == 0xFF && data.size() >= 11 &&
                 std::string_view(reinterpret_cast<const char*>(data.data()), 11) == "NETSCAPE2.0") {
        img.loops = true;
      }
      continue;
    }
    if (tag != 0x2C) throw Error(ErrorCode::Malformed, "unexpected GIF block");
    const std::uint16_t left = r.u16();
    const std::uint16_t top = r.u16();
    const std::uint16_t w = r.u16();
    const std::uint16_t h = r.u16();
    const std::uint8_t flags = r.u8();
    if (left != 0 || top != 0 || w != img.width || h != img.height) {
      throw Error(ErrorCode::Malformed, "partial-frame GIF images are not supported");
    }
    if (flags & 0x40) throw Error(ErrorCode::Malformed, "interlaced GIF images are not supported");
    std::array<std::uint8_t, 256> palette = global;
    if (flags & 0x80) {
      const std::size_t entries = std::size_t{2} << (flags & 0x07);
      auto table = r.take(entries * 3);
      for (std::size_t i = 0; i < entries; ++i) palette[i] = table[i * 3];
    } else if (!has_global) {
      throw Error(ErrorCode::Malformed, "GIF image without a palette");
    }
    const int min_code = r.u8();
    auto data = r.sub_blocks();
    auto indices = gif_detail::lzw_decode(data, min_code, static_cast<std::size_t>(w) * h);
    for (auto& px : indices) px = palette[px];
    img.frames.push_back(std::move(indices));
    img.delays_cs.push_back(pending_delay);
    pending_delay = 0;
  }
  return img;
}

/// Clip as GIF: pixels in image blocks, capture metadata as JSON in the comment block.
inline std::vector<std::uint8_t> encode_clip(const Clip& clip) {
  const std::uint16_t delay =
      clip.fps > 0.0 ? static_cast<std::uint16_t>(std::clamp(std::lround(100.0 / clip.fps), 1L, 65535L)) : 7;
  return encode_gif(clip.frames, delay, clip.metadata().dump());
}

inline Clip decode_clip(std::span<const std::uint8_t> bytes) {
  GifImage img = decode_gif(bytes);
  Clip clip;
  json meta;
  if (!img.comment.empty()) {
    meta = json::parse(img.comment, nullptr, false);
    if (meta.is_discarded() || !meta.is_object()) throw Error(ErrorCode::Malformed, "clip metadata is not JSON");
  }
  try {
    clip.device_id = meta.value("device_id", std::string{});
    clip.trigger_class = weapon_class_from_string(meta.value("trigger_class", std::string("gun")));
    clip.momentum_at_trigger = meta.value("momentum", 0.0);
    clip.captured_at = meta.value("captured_at", TimeMs{0});
    clip.fps = meta.value("fps", 0.0);
    std::vector<FrameSeq> seqs = meta.value("frame_seq", std::vector<FrameSeq>{});
    std::vector<TimeMs> stamps = meta.value("frame_ts", std::vector<TimeMs>{});
    for (std::size_t i = 0; i < img.frames.size(); ++i) {
      clip.frames.emplace_back(img.width, img.height, std::move(img.frames[i]), i < stamps.size() ? stamps[i] : 0,
                               i < seqs.size() ? seqs[i] : i);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Malformed, std::string("clip metadata: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::Malformed, std::string("clip metadata: ") + e.what());
  }
  return clip;
}

}  // namespace armguard::wire
