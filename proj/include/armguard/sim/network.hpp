#pragma once

#include <functional>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "armguard/core/clock.hpp"
#include "armguard/core/rng.hpp"
#include "armguard/sim/scenario.hpp"
#include "armguard/wire/protocol.hpp"

namespace armguard::sim {

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Message-level link between endpoints. Every send draws its latency and drop
/// decision from a generator keyed on (seed, from, to, type, message key,
/// occurrence), never from a shared stream, so adding or removing unrelated
/// traffic (a cloud restart, say) leaves every other draw unchanged.
///
/// The message key is the msg_id for device traffic. Cloud-originated messages
/// take their msg_id from the event log sequence, which shifts when the log gains
/// records, so they are keyed on content instead: config version, alert id plus
/// verdict, or the referenced msg_id for errors.
class SimNetwork {
 public:
  using Deliver = std::function<void(const std::vector<std::uint8_t>&)>;

  SimNetwork(VirtualClock& clock, NetworkModel model, std::uint64_t seed) : clock_(clock), model_(model), seed_(seed) {}

  /// Encodes `e` and schedules `deliver` unless the message is dropped.
  void send(const std::string& from, const std::string& to, const wire::Envelope& e, Deliver deliver) {
    const std::string key = message_key(e);
    const std::string type(wire::to_string(e.type));
    const std::uint64_t occurrence = ++occurrences_[std::make_tuple(from, to, type, key)];
    std::uint64_t h = fnv1a64(from);
    h = fnv1a64("\x1f" + to, h);
    h = fnv1a64("\x1f" + type, h);
    h = fnv1a64("\x1f" + key, h);
    h = fnv1a64("\x1f" + std::to_string(occurrence), h);
    SplitMix64 draw(seed_ ^ h);
    const bool dropped = draw.uniform() < model_.drop_probability;
    const TimeMs latency = model_.latency.lo == model_.latency.hi
                               ? model_.latency.lo
                               : static_cast<TimeMs>(draw.uniform_int(model_.latency.lo, model_.latency.hi));
    auto bytes = wire::encode(e);
    json rec{{"t", clock_.now()},   {"from", from},       {"to", to},
             {"type", type},        {"msg_id", e.msg_id}, {"bytes", bytes.size()},
             {"dropped", dropped}};
    if (!dropped) {
      rec["latency_ms"] = latency;
      clock_.schedule_after(latency, [deliver = std::move(deliver), bytes = std::move(bytes)] { deliver(bytes); });
    }
    records_.push_back(std::move(rec));
  }

  /// Notes a message that arrived while its receiver was down.
  void note_lost(const std::string& to, const std::vector<std::uint8_t>& bytes) {
    records_.push_back(json{{"t", clock_.now()}, {"to", to}, {"bytes", bytes.size()}, {"lost", "receiver down"}});
  }

  const std::vector<json>& records() const noexcept { return records_; }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records_) {
      out += r.dump();
      out += '\n';
    }
    return out;
  }

  static std::string message_key(const wire::Envelope& e) {
    using wire::MessageType;
    if (e.type != MessageType::ConfigUpdate && e.type != MessageType::Verdict && e.type != MessageType::Error) {
      return std::to_string(e.msg_id);
    }
    json body = json::parse(e.payload.begin(), e.payload.end(), nullptr, false);
    if (body.is_discarded() || !body.is_object()) return std::to_string(e.msg_id);
    switch (e.type) {
      case MessageType::ConfigUpdate: return "v" + body.value("version", json()).dump();
      case MessageType::Verdict: return body.value("alert_id", std::string{}) + "/" + body.value("verdict", std::string{});
      default: return "ref" + body.value("ref_msg_id", json()).dump() + "/" + body.value("code", std::string{});
    }
  }

 private:
  VirtualClock& clock_;
  NetworkModel model_;
  std::uint64_t seed_;
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::uint64_t> occurrences_;
  std::vector<json> records_;
};

}  // namespace armguard::sim
