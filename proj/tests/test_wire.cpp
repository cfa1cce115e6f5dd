#include <gtest/gtest.h>

#include <map>

#include "armguard/wire/backoff.hpp"
#include "armguard/wire/gif.hpp"
#include "armguard/wire/protocol.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace armguard;
using namespace armguard::wire;
using armguard::testing::data_path;
using armguard::testing::parse_hex;
using armguard::testing::read_text;
using armguard::testing::to_hex;
using namespace armguard::testing;

namespace {

ErrorCode decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

std::vector<std::uint8_t> frame_with_header(const std::string& header, std::size_t payload_bytes = 0) {
  std::vector<std::uint8_t> out;
  const auto n = static_cast<std::uint32_t>(header.size());
  out = {static_cast<std::uint8_t>(n >> 24), static_cast<std::uint8_t>(n >> 16), static_cast<std::uint8_t>(n >> 8),
         static_cast<std::uint8_t>(n)};
  out.insert(out.end(), header.begin(), header.end());
  out.resize(out.size() + payload_bytes, 0xAB);
  return out;
}

Clip sample_clip(std::uint32_t w = 16, std::uint32_t h = 12) {
  Clip c;
  c.device_id = "cam-01";
  c.trigger_class = WeaponClass::Knife;
  c.momentum_at_trigger = 0.8125;
  c.captured_at = 2046;
  c.fps = 15.0;
  for (FrameSeq s = 2; s < 32; ++s) c.frames.push_back(gradient(w, h, s));
  return c;
}

}  // namespace

// ---- framing ---------------------------------------------------------------

TEST(Protocol, HeartbeatBytesByHand) {
  Envelope e{MessageType::Heartbeat, 7, "cam-01", 1000, {}};
  const std::string header = R"({"device_id":"cam-01","msg_id":7,"payload_len":0,"sent_at":1000,"type":"HEARTBEAT"})";
  ASSERT_EQ(header.size(), 83u);
  std::vector<std::uint8_t> want{0x00, 0x00, 0x00, 0x53};
  want.insert(want.end(), header.begin(), header.end());
  EXPECT_EQ(encode(e), want);
  EXPECT_EQ(decode(want), e);
}

TEST(Protocol, GoldenEncodings) {
  for (const auto& [name, env] : golden_envelopes()) {
    SCOPED_TRACE(name);
    const auto bytes = encode(env);
    const auto golden = parse_hex(read_text(data_path("golden/wire/" + name + ".hex")));
    EXPECT_EQ(bytes, golden) << to_hex(bytes);
    EXPECT_EQ(decode(golden), env);
  }
}

TEST(ProtocolProperty, RoundTripIsIdentity) {
  SplitMix64 rng(77);
  for (int i = 0; i < 10000; ++i) {
    Envelope e = random_envelope(rng);
    const auto bytes = encode(e);
    const Envelope back = decode(bytes);
    ASSERT_EQ(back, e) << "case " << i;
    ASSERT_EQ(encode(back), bytes);
  }
}

TEST(Protocol, TruncatedAnywhere) {
  Envelope e{MessageType::Alert, 9, "dev", 1, {1, 2, 3, 4, 5}};
  const auto bytes = encode(e);
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    std::span<const std::uint8_t> prefix(bytes.data(), cut);
    EXPECT_EQ(decode_error(prefix), ErrorCode::Truncated) << "cut " << cut;
  }
}

TEST(Protocol, UnknownType) {
  auto bytes = frame_with_header(R"({"device_id":"d","msg_id":1,"payload_len":0,"sent_at":0,"type":"FOO"})");
  EXPECT_EQ(decode_error(bytes), ErrorCode::UnknownType);
}

TEST(Protocol, TrailingBytesRejected) {
  auto bytes = encode({MessageType::Ack, 1, "d", 0, {}});
  bytes.push_back(0);
  EXPECT_EQ(decode_error(bytes), ErrorCode::LengthMismatch);
}

TEST(Protocol, HeaderShapeErrors) {
  EXPECT_EQ(decode_error(frame_with_header("not json")), ErrorCode::BadJson);
  EXPECT_EQ(decode_error(frame_with_header("[1,2]")), ErrorCode::BadJson);
  EXPECT_EQ(decode_error(frame_with_header(R"({"device_id":"d","msg_id":1,"payload_len":0,"type":"ACK"})")),
            ErrorCode::BadJson);
  EXPECT_EQ(decode_error(frame_with_header(
                R"({"device_id":"d","extra":1,"msg_id":1,"payload_len":0,"sent_at":0,"type":"ACK"})")),
            ErrorCode::BadJson);
  EXPECT_EQ(decode_error(frame_with_header(R"({"device_id":"d","msg_id":-1,"payload_len":0,"sent_at":0,"type":"ACK"})")),
            ErrorCode::BadJson);
  EXPECT_EQ(decode_error(frame_with_header(R"({"device_id":7,"msg_id":1,"payload_len":0,"sent_at":0,"type":"ACK"})")),
            ErrorCode::BadJson);
  // Valid JSON with the right keys, but not byte-identical to what encode() writes.
  EXPECT_EQ(decode_error(frame_with_header(R"({"type":"ACK","device_id":"d","msg_id":1,"payload_len":0,"sent_at":0})")),
            ErrorCode::BadJson);
  EXPECT_EQ(decode_error(frame_with_header(R"({"device_id":"d", "msg_id":1,"payload_len":0,"sent_at":0,"type":"ACK"})")),
            ErrorCode::BadJson);
}

TEST(Protocol, PayloadRules) {
  EXPECT_EQ(decode_error(frame_with_header(R"({"device_id":"d","msg_id":1,"payload_len":2,"sent_at":0,"type":"ACK"})", 2)),
            ErrorCode::LengthMismatch);
  EXPECT_EQ(decode_error(frame_with_header(R"({"device_id":"d","msg_id":1,"payload_len":0,"sent_at":0,"type":"ALERT"})")),
            ErrorCode::LengthMismatch);
  EXPECT_THROW(encode({MessageType::Heartbeat, 1, "d", 0, {1}}), Error);
  EXPECT_THROW(encode({MessageType::ConfigUpdate, 1, "d", 0, {}}), Error);
  EXPECT_NO_THROW(encode({MessageType::Register, 1, "d", 0, {}}));
}

TEST(Protocol, OversizeLimits) {
  EXPECT_EQ(decode_error(frame_with_header(
                R"({"device_id":"d","msg_id":1,"payload_len":67108865,"sent_at":0,"type":"ALERT"})")),
            ErrorCode::OversizePayload);
  std::vector<std::uint8_t> long_header{0x00, 0x01, 0x00, 0x01};
  long_header.resize(4 + 65537, ' ');
  EXPECT_EQ(decode_error(long_header), ErrorCode::BadJson);
  Envelope huge{MessageType::Alert, 1, "d", 0, std::vector<std::uint8_t>(kMaxPayload + 1)};
  try {
    encode(huge);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OversizePayload);
  }
}

TEST(Protocol, InvalidUtf8DeviceIdCannotBeEncoded) {
  EXPECT_THROW(encode({MessageType::Heartbeat, 1, "\xFF\xFE", 0, {}}), Error);
}

TEST(ProtocolProperty, FuzzNeverCrashes) {
  SplitMix64 rng(1234);
  const auto goldens = golden_envelopes();
  std::vector<std::vector<std::uint8_t>> seeds;
  for (const auto& [_, env] : goldens) seeds.push_back(encode(env));
  int ok = 0;
  int rejected = 0;
  for (int i = 0; i < 20000; ++i) {
    auto bytes = seeds[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(seeds.size()) - 1))];
    const auto edits = rng.uniform_int(1, 4);
    for (std::int64_t k = 0; k < edits; ++k) {
      const auto pos = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(bytes.size()) - 1));
      switch (rng.uniform_int(0, 3)) {
        case 0: bytes[pos] = static_cast<std::uint8_t>(rng.next()); break;
        case 1: bytes.erase(bytes.begin() + static_cast<std::ptrdiff_t>(pos)); break;
        case 2: bytes.insert(bytes.begin() + static_cast<std::ptrdiff_t>(pos), static_cast<std::uint8_t>(rng.next())); break;
        default: bytes.resize(pos); break;
      }
      if (bytes.empty()) break;
    }
    try {
      Envelope e = decode(bytes);
      EXPECT_EQ(encode(e), bytes);
      ++ok;
    } catch (const Error&) {
      ++rejected;
    }
  }
  EXPECT_EQ(ok + rejected, 20000);
  EXPECT_GT(rejected, 15000);
}

// ---- stream decoder ----------------------------------------------------------

TEST(StreamDecoder, ByteAtATime) {
  SplitMix64 rng(5);
  std::vector<Envelope> sent;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 200; ++i) {
    sent.push_back(random_envelope(rng));
    auto b = encode(sent.back());
    stream.insert(stream.end(), b.begin(), b.end());
  }
  StreamDecoder dec;
  std::vector<Envelope> got;
  for (std::uint8_t byte : stream) {
    dec.feed(std::span<const std::uint8_t>(&byte, 1));
    while (auto e = dec.next()) got.push_back(std::move(*e));
  }
  EXPECT_EQ(got, sent);
  EXPECT_EQ(dec.buffered(), 0u);
}

TEST(StreamDecoder, RandomChunks) {
  SplitMix64 rng(6);
  std::vector<Envelope> sent;
  std::vector<std::uint8_t> stream;
  for (int i = 0; i < 300; ++i) {
    sent.push_back(random_envelope(rng));
    auto b = encode(sent.back());
    stream.insert(stream.end(), b.begin(), b.end());
  }
  StreamDecoder dec;
  std::vector<Envelope> got;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const auto n = std::min<std::size_t>(stream.size() - pos, static_cast<std::size_t>(rng.uniform_int(1, 900)));
    dec.feed(std::span<const std::uint8_t>(stream.data() + pos, n));
    pos += n;
    while (auto e = dec.next()) got.push_back(std::move(*e));
  }
  EXPECT_EQ(got, sent);
}

TEST(StreamDecoder, PoisonedAfterFramingError) {
  StreamDecoder dec;
  auto good = encode({MessageType::Heartbeat, 1, "d", 0, {}});
  dec.feed(good);
  auto bad = frame_with_header(R"({"device_id":"d","msg_id":1,"payload_len":0,"sent_at":0,"type":"FOO"})");
  dec.feed(bad);
  EXPECT_TRUE(dec.next().has_value());
  EXPECT_THROW(dec.next(), Error);
  EXPECT_TRUE(dec.failed());
  dec.feed(good);
  try {
    dec.next();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownType);
  }
}

// ---- retry policy ------------------------------------------------------------

TEST(RetryPolicy, DoublingWithCap) {
  RetryPolicy p;
  EXPECT_EQ(p.delay_after(1), 500);
  EXPECT_EQ(p.delay_after(2), 1000);
  EXPECT_EQ(p.delay_after(3), 2000);
  EXPECT_EQ(p.delay_after(4), 4000);
  EXPECT_EQ(p.delay_after(5), 8000);
  EXPECT_EQ(p.delay_after(6), std::nullopt);
  RetryPolicy longer = p;
  longer.max_attempts = 12;
  for (std::uint32_t a = 5; a < 12; ++a) EXPECT_EQ(longer.delay_after(a), 8000);
  EXPECT_EQ(p.delay_after(0), std::nullopt);
}

// ---- GIF -----------------------------------------------------------------------

TEST(Gif, StructureOfEncodedClip) {
  const auto bytes = encode_clip(sample_clip());
  ASSERT_GT(bytes.size(), 13u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "GIF89a");
  EXPECT_EQ(bytes[6] | (bytes[7] << 8), 16);
  EXPECT_EQ(bytes[8] | (bytes[9] << 8), 12);
  EXPECT_EQ(bytes.back(), 0x3B);
  // Walk the block structure independently of the decoder.
  std::size_t i = 13 + 768;
  int images = 0;
  int comments = 0;
  bool netscape = false;
  while (bytes.at(i) != 0x3B) {
    if (bytes[i] == 0x21) {
      const std::uint8_t label = bytes[i + 1];
      if (label == 0xFE) ++comments;
      if (label == 0xFF) netscape = std::string(bytes.begin() + static_cast<std::ptrdiff_t>(i + 3),
                                                bytes.begin() + static_cast<std::ptrdiff_t>(i + 14)) == "NETSCAPE2.0";
      i += 2;
    } else {
      ASSERT_EQ(bytes[i], 0x2C);
      ++images;
      i += 10;
      EXPECT_EQ(bytes[i], 8);  // LZW minimum code size
      ++i;
    }
    while (bytes.at(i) != 0) i += bytes[i] + 1u;
    ++i;
  }
  EXPECT_EQ(images, 30);
  EXPECT_EQ(comments, 1);
  EXPECT_TRUE(netscape);
  EXPECT_EQ(i + 1, bytes.size());
}

TEST(Gif, ClipRoundTripKeepsPixelsAndMetadata) {
  const Clip c = sample_clip();
  const Clip back = decode_clip(encode_clip(c));
  EXPECT_EQ(back.device_id, "cam-01");
  EXPECT_EQ(back.trigger_class, WeaponClass::Knife);
  EXPECT_EQ(back.momentum_at_trigger, 0.8125);
  EXPECT_EQ(back.captured_at, 2046);
  EXPECT_EQ(back.fps, 15.0);
  ASSERT_EQ(back.frames.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(back.frames[i], c.frames[i]);
  EXPECT_EQ(decode_gif(encode_clip(c)).delays_cs.front(), 7);
}

TEST(GifProperty, RandomFullSizeClipIsPixelExact) {
  SplitMix64 rng(224);
  std::vector<Frame> frames;
  for (FrameSeq s = 0; s < 30; ++s) frames.push_back(armguard::testing::random_frame(224, 224, rng, s));
  const auto img = decode_gif(encode_gif(frames));
  ASSERT_EQ(img.frames.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) ASSERT_EQ(img.frames[i], frames[i].pixels) << "frame " << i;
}

TEST(GifProperty, RandomSmallImagesRoundTrip) {
  SplitMix64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto w = static_cast<std::uint32_t>(rng.uniform_int(1, 40));
    const auto h = static_cast<std::uint32_t>(rng.uniform_int(1, 40));
    const int levels = static_cast<int>(rng.uniform_int(1, 256));
    Frame f = Frame::filled(w, h, 0);
    for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, levels - 1));
    const auto img = decode_gif(encode_gif(std::vector<Frame>{f}));
    ASSERT_EQ(img.frames.at(0), f.pixels) << "trial " << trial;
  }
}

TEST(Gif, GoldenChecksum) {
  const auto bytes = encode_clip(sample_clip());
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (auto b : bytes) h = (h ^ b) * 0x100000001b3ULL;
  auto golden = json::parse(read_text(data_path("golden/clip_gif.json")));
  EXPECT_EQ(bytes.size(), golden["size"].get<std::size_t>());
  char hex[20];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  EXPECT_EQ(golden["fnv1a64"].get<std::string>(), hex);
}

TEST(Gif, DecodesThirdPartyEncoding) {
  // Written by another encoder: local palettes, its own LZW code stream.
  const auto text = read_text(data_path("golden/pillow_gray.gif"));
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  const auto img = decode_gif(bytes);
  EXPECT_EQ(img.width, 16u);
  EXPECT_EQ(img.height, 12u);
  EXPECT_EQ(img.comment, "made elsewhere");
  EXPECT_TRUE(img.loops);
  ASSERT_EQ(img.frames.size(), 3u);
  for (FrameSeq f = 0; f < 3; ++f) EXPECT_EQ(img.frames[f], gradient(16, 12, f).pixels);
}

TEST(Gif, DecodesMinimalOnePixelFile) {
  const std::vector<std::uint8_t> bytes{0x47, 0x49, 0x46, 0x38, 0x39, 0x61, 0x01, 0x00, 0x01, 0x00, 0x80, 0x00, 0x00,
                                        0xFF, 0xFF, 0xFF, 0x00, 0x00, 0x00, 0x21, 0xF9, 0x04, 0x01, 0x00, 0x00, 0x00,
                                        0x00, 0x2C, 0x00, 0x00, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x00, 0x02, 0x02,
                                        0x44, 0x01, 0x00, 0x3B};
  const auto img = decode_gif(bytes);
  ASSERT_EQ(img.frames.size(), 1u);
  EXPECT_EQ(img.frames[0], std::vector<std::uint8_t>{0xFF});
}

TEST(Gif, MalformedInputs) {
  auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      decode_clip(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  const auto good = encode_clip(sample_clip());
  EXPECT_EQ(code_of({}), ErrorCode::Malformed);
  EXPECT_EQ(code_of(Envelope::bytes_of("PNG not a gif at all")), ErrorCode::Malformed);
  for (std::size_t cut : {6ul, 13ul, 500ul, good.size() / 2, good.size() - 1}) {
    EXPECT_EQ(code_of(std::vector<std::uint8_t>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut))),
              ErrorCode::Malformed)
        << "cut " << cut;
  }
  auto bad_meta = encode_gif(sample_clip().frames, 7, R"({"trigger_class":"spoon"})");
  EXPECT_EQ(code_of(bad_meta), ErrorCode::Malformed);
  auto not_json = encode_gif(sample_clip().frames, 7, "hello");
  EXPECT_EQ(code_of(not_json), ErrorCode::Malformed);
}

TEST(GifProperty, FuzzNeverCrashes) {
  SplitMix64 rng(31);
  const auto good = encode_gif(std::vector<Frame>{gradient(8, 8, 1), gradient(8, 8, 2)}, 7, "x");
  for (int i = 0; i < 3000; ++i) {
    auto bytes = good;
    const auto edits = rng.uniform_int(1, 3);
    for (std::int64_t k = 0; k < edits; ++k) {
      const auto pos = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(bytes.size()) - 1));
      bytes[pos] = static_cast<std::uint8_t>(rng.next());
    }
    try {
      auto img = decode_gif(bytes);
      for (const auto& f : img.frames) EXPECT_EQ(f.size(), static_cast<std::size_t>(img.width) * img.height);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Malformed);
    }
  }
}
