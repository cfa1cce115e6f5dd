#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::cloud {

/// One line of the cloud event log: {"seq":N,"t":ms,"kind":"...","data":{...}}.
struct LogRecord {
  std::uint64_t seq = 0;
  TimeMs t = 0;
  std::string kind;
  json data = json::object();

  json to_json() const { return json{{"seq", seq}, {"t", t}, {"kind", kind}, {"data", data}}; }

  static LogRecord from_json(const json& j) {
    if (!j.is_object() || !j.contains("seq") || !j.contains("t") || !j.contains("kind") || !j.contains("data") ||
        !j["seq"].is_number_unsigned() || !j["t"].is_number_integer() || !j["kind"].is_string() ||
        !j["data"].is_object()) {
      throw Error(ErrorCode::CorruptLog, "log record lacks seq/t/kind/data");
    }
    return LogRecord{j["seq"].get<std::uint64_t>(), j["t"].get<TimeMs>(), j["kind"].get<std::string>(), j["data"]};
  }

  friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

/// Parses JSON lines; blank lines are skipped. Throws CorruptLog on bad JSON or a seq gap.
inline std::vector<LogRecord> parse_log(std::string_view text, std::uint64_t first_seq = 1) {
  std::vector<LogRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::CorruptLog, "line " + std::to_string(line_no) + " is not JSON");
    LogRecord r = LogRecord::from_json(j);
    const std::uint64_t want = out.empty() ? first_seq : out.back().seq + 1;
    if (r.seq != want) {
      throw Error(ErrorCode::CorruptLog,
                  "sequence gap at line " + std::to_string(line_no) + ": expected " + std::to_string(want) + ", got " +
                      std::to_string(r.seq));
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Append-only store for the event log. Lives outside the service so that a
/// restarted service can replay it. Optionally mirrored to a file.
class LogStore {
 public:
  LogStore() = default;
  explicit LogStore(std::filesystem::path file) : file_(std::move(file)) {
    if (std::filesystem::exists(*file_)) {
      std::ifstream in(*file_, std::ios::binary);
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) lines_.push_back(line);
      }
    }
    auto snap = snapshot_path();
    if (std::filesystem::exists(snap)) {
      std::ifstream in(snap, std::ios::binary);
      json j = json::parse(in, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::CorruptLog, "snapshot file is not JSON");
      snapshot_ = std::move(j);
    }
  }

  std::uint64_t append(const LogRecord& r) {
    lines_.push_back(r.to_json().dump());
    if (file_) {
      std::ofstream out(*file_, std::ios::binary | std::ios::app);
      out << lines_.back() << '\n';
      out.flush();
      if (!out) throw Error(ErrorCode::Io, "cannot append to " + file_->string());
    }
    return r.seq;
  }

  const std::vector<std::string>& lines() const noexcept { return lines_; }
  std::size_t size() const noexcept { return lines_.size(); }

  std::string text() const {
    std::string out;
    for (const auto& l : lines_) {
      out += l;
      out += '\n';
    }
    return out;
  }

  std::vector<LogRecord> records() const { return parse_log(text()); }

  /// A snapshot never replaces log lines; it only shortens replay.
  void save_snapshot(json state) {
    snapshot_ = std::move(state);
    if (file_) {
      auto tmp = snapshot_path();
      tmp += ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << snapshot_->dump();
        if (!out) throw Error(ErrorCode::Io, "cannot write snapshot");
      }
      std::filesystem::rename(tmp, snapshot_path());
    }
  }

  const std::optional<json>& snapshot() const noexcept { return snapshot_; }

 private:
  std::filesystem::path snapshot_path() const {
    auto p = *file_;
    p += ".snapshot.json";
    return p;
  }

  std::optional<std::filesystem::path> file_;
  std::vector<std::string> lines_;
  std::optional<json> snapshot_;
};

}  // namespace armguard::cloud
