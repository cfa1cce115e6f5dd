#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "armguard/core/error.hpp"

namespace armguard::cloud {

/// GIF bytes by alert id. In memory, optionally mirrored to <dir>/<alert_id>.gif.
class ClipStore {
 public:
  ClipStore() = default;
  explicit ClipStore(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(*dir_); }

  void put(const std::string& alert_id, std::vector<std::uint8_t> gif) {
    if (dir_) {
      std::ofstream out(*dir_ / (alert_id + ".gif"), std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(gif.data()), static_cast<std::streamsize>(gif.size()));
      if (!out) throw Error(ErrorCode::Io, "cannot write clip " + alert_id);
    }
    clips_[alert_id] = std::move(gif);
  }

  /// nullptr when unknown. Falls back to the directory for clips written by an earlier process.
  const std::vector<std::uint8_t>* get(const std::string& alert_id) {
    auto it = clips_.find(alert_id);
    if (it != clips_.end()) return &it->second;
    if (dir_) {
      auto path = *dir_ / (alert_id + ".gif");
      std::ifstream in(path, std::ios::binary);
      if (in) {
        std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        return &(clips_[alert_id] = std::move(bytes));
      }
    }
    return nullptr;
  }

  const std::map<std::string, std::vector<std::uint8_t>>& all() const noexcept { return clips_; }

 private:
  std::optional<std::filesystem::path> dir_;
  std::map<std::string, std::vector<std::uint8_t>> clips_;
};

}  // namespace armguard::cloud
