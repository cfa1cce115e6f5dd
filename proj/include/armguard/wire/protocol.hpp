#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::wire {

enum class MessageType { Register, RegisterAck, Heartbeat, Alert, Verdict, ConfigUpdate, Ack, Error };

inline constexpr std::array<MessageType, 8> kMessageTypes{MessageType::Register,     MessageType::RegisterAck,
                                                          MessageType::Heartbeat,    MessageType::Alert,
                                                          MessageType::Verdict,      MessageType::ConfigUpdate,
                                                          MessageType::Ack,          MessageType::Error};

inline std::string_view to_string(MessageType t) {
  switch (t) {
    case MessageType::Register: return "REGISTER";
    case MessageType::RegisterAck: return "REGISTER_ACK";
    case MessageType::Heartbeat: return "HEARTBEAT";
    case MessageType::Alert: return "ALERT";
    case MessageType::Verdict: return "VERDICT";
    case MessageType::ConfigUpdate: return "CONFIG_UPDATE";
    case MessageType::Ack: return "ACK";
    case MessageType::Error: return "ERROR";
  }
  return "ERROR";
}

inline std::optional<MessageType> message_type_from_string(std::string_view s) {
  for (MessageType t : kMessageTypes) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

enum class PayloadRule { Empty, Required, Optional };

/// ALERT carries a GIF; CONFIG_UPDATE a DeviceConfig JSON; VERDICT and ERROR a small
/// JSON body; REGISTER may carry the device's current config. The rest are empty.
inline PayloadRule payload_rule(MessageType t) {
  switch (t) {
    case MessageType::Alert:
    case MessageType::ConfigUpdate:
    case MessageType::Verdict:
    case MessageType::Error: return PayloadRule::Required;
    case MessageType::Register: return PayloadRule::Optional;
    default: return PayloadRule::Empty;
  }
}

inline constexpr std::size_t kMaxPayload = 64u * 1024u * 1024u;
inline constexpr std::size_t kMaxHeader = 64u * 1024u;

struct Envelope {
  MessageType type = MessageType::Heartbeat;
  std::uint64_t msg_id = 0;
  std::string device_id;
  TimeMs sent_at = 0;
  std::vector<std::uint8_t> payload;

  json payload_json() const {
    json j = json::parse(payload.begin(), payload.end(), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::BadJson, std::string(to_string(type)) + " payload is not JSON");
    return j;
  }

  static std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

  friend bool operator==(const Envelope&, const Envelope&) = default;
};

namespace detail {

inline std::string header_json(const Envelope& e) {
  // nlohmann::json objects are std::map-backed, so keys serialize in lexicographic order.
  json h{{"device_id", e.device_id},
         {"msg_id", e.msg_id},
         {"payload_len", e.payload.size()},
         {"sent_at", e.sent_at},
         {"type", std::string(to_string(e.type))}};
  try {
    return h.dump();
  } catch (const json::exception&) {
    throw Error(ErrorCode::InvalidArgument, "device_id is not valid UTF-8");
  }
}

inline void check_payload_rule(MessageType type, std::size_t len) {
  switch (payload_rule(type)) {
    case PayloadRule::Empty:
      if (len != 0) throw Error(ErrorCode::LengthMismatch, std::string(to_string(type)) + " must not carry a payload");
      break;
    case PayloadRule::Required:
      if (len == 0) throw Error(ErrorCode::LengthMismatch, std::string(to_string(type)) + " requires a payload");
      break;
    case PayloadRule::Optional: break;
  }
}

struct ParsedHeader {
  Envelope envelope;  // payload not yet filled
  std::size_t payload_len = 0;
};

inline ParsedHeader parse_header(std::span<const std::uint8_t> header) {
  json h = json::parse(header.begin(), header.end(), nullptr, false);
  if (h.is_discarded() || !h.is_object()) throw Error(ErrorCode::BadJson, "header is not a JSON object");
  if (h.size() != 5 || !h.contains("type") || !h.contains("msg_id") || !h.contains("device_id") ||
      !h.contains("sent_at") || !h.contains("payload_len")) {
    throw Error(ErrorCode::BadJson, "header must have exactly type, msg_id, device_id, sent_at, payload_len");
  }
  if (!h["type"].is_string()) throw Error(ErrorCode::BadJson, "type must be a string");
  auto type = message_type_from_string(h["type"].get_ref<const std::string&>());
  if (!type) throw Error(ErrorCode::UnknownType, "unknown message type '" + h["type"].get<std::string>() + "'");
  if (!h["msg_id"].is_number_unsigned() && !(h["msg_id"].is_number_integer() && h["msg_id"].get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::BadJson, "msg_id must be an unsigned integer");
  }
  if (!h["device_id"].is_string()) throw Error(ErrorCode::BadJson, "device_id must be a string");
  if (!h["sent_at"].is_number_integer()) throw Error(ErrorCode::BadJson, "sent_at must be an integer");
  if (!h["payload_len"].is_number_unsigned() &&
      !(h["payload_len"].is_number_integer() && h["payload_len"].get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::BadJson, "payload_len must be an unsigned integer");
  }
  ParsedHeader out;
  out.envelope.type = *type;
  out.envelope.msg_id = h["msg_id"].get<std::uint64_t>();
  out.envelope.device_id = h["device_id"].get<std::string>();
  out.envelope.sent_at = h["sent_at"].get<TimeMs>();
  const std::uint64_t len = h["payload_len"].get<std::uint64_t>();
  if (len > kMaxPayload) throw Error(ErrorCode::OversizePayload, "payload exceeds 64 MiB");
  out.payload_len = static_cast<std::size_t>(len);
  check_payload_rule(*type, out.payload_len);
  // Only the canonical encoding is accepted, which makes decode/encode an exact inverse pair.
  out.envelope.payload.resize(out.payload_len);
  const std::string canonical = header_json(out.envelope);
  out.envelope.payload.clear();
  if (canonical.size() != header.size() ||
      !std::equal(header.begin(), header.end(), canonical.begin(),
                  [](std::uint8_t a, char b) { return a == static_cast<std::uint8_t>(b); })) {
    throw Error(ErrorCode::BadJson, "header is not in canonical form");
  }
  return out;
}

inline std::uint32_t read_be32(std::span<const std::uint8_t> b) {
  return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
         (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

}  // namespace detail

/// [u32 big-endian header length][header JSON, keys sorted][payload bytes].
inline std::vector<std::uint8_t> encode(const Envelope& e) {
  if (e.payload.size() > kMaxPayload) throw Error(ErrorCode::OversizePayload, "payload exceeds 64 MiB");
  detail::check_payload_rule(e.type, e.payload.size());
  const std::string header = detail::header_json(e);
  std::vector<std::uint8_t> out;
  out.reserve(4 + header.size() + e.payload.size());
  const auto n = static_cast<std::uint32_t>(header.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), e.payload.begin(), e.payload.end());
  return out;
}

/// Decodes exactly one message occupying the whole buffer.
inline Envelope decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::Truncated, "missing header length");
  const std::uint32_t header_len = detail::read_be32(bytes);
  if (header_len > kMaxHeader) throw Error(ErrorCode::BadJson, "header longer than 64 KiB");
  if (bytes.size() - 4 < header_len) throw Error(ErrorCode::Truncated, "header length exceeds available bytes");
  auto parsed = detail::parse_header(bytes.subspan(4, header_len));
  const std::size_t rest = bytes.size() - 4 - header_len;
  if (rest < parsed.payload_len) throw Error(ErrorCode::Truncated, "payload shorter than payload_len");
  if (rest > parsed.payload_len) throw Error(ErrorCode::LengthMismatch, "trailing bytes after payload");
  auto payload = bytes.subspan(4 + header_len);
  parsed.envelope.payload.assign(payload.begin(), payload.end());
  return std::move(parsed.envelope);
}

/// Incremental reader for a byte stream carrying back-to-back envelopes. Chunk
/// boundaries are irrelevant. After a framing error the stream is unusable and
/// every further call rethrows.
class StreamDecoder {
 public:
  void feed(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  }

  /// Next complete message, or nullopt if more bytes are needed.
  std::optional<Envelope> next() {
    if (failed_) throw Error(*failed_, "stream previously failed");
    try {
      if (buffer_.size() - start_ < 4) return std::nullopt;
      std::span<const std::uint8_t> view(buffer_.data() + start_, buffer_.size() - start_);
      const std::uint32_t header_len = detail::read_be32(view);
      if (header_len > kMaxHeader) throw Error(ErrorCode::BadJson, "header longer than 64 KiB");
      if (view.size() - 4 < header_len) return std::nullopt;
      if (!parsed_) parsed_ = detail::parse_header(view.subspan(4, header_len));
      const std::size_t total = 4 + header_len + parsed_->payload_len;
      if (view.size() < total) return std::nullopt;
      Envelope e = std::move(parsed_->envelope);
      auto payload = view.subspan(4 + header_len, parsed_->payload_len);
      e.payload.assign(payload.begin(), payload.end());
      parsed_.reset();
      start_ += total;
      compact();
      return e;
    } catch (const Error& err) {
      failed_ = err.code();
      throw;
    }
  }

  std::size_t buffered() const noexcept { return buffer_.size() - start_; }
  bool failed() const noexcept { return failed_.has_value(); }

 private:
  void compact() {
    if (start_ > 4096 && start_ * 2 > buffer_.size()) {
      buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(start_));
      start_ = 0;
    }
  }

  std::vector<std::uint8_t> buffer_;
  std::size_t start_ = 0;
  std::optional<detail::ParsedHeader> parsed_;
  std::optional<ErrorCode> failed_;
};

}  // namespace armguard::wire
