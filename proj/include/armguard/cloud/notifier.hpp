#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "armguard/core/types.hpp"

namespace armguard::cloud {

struct DeliveryResult {
  bool ok = false;
  std::string error;
};

/// Outbound alert channel. deliver() may complete synchronously or later; `done`
/// is called exactly once.
class Notifier {
 public:
  using Done = std::function<void(DeliveryResult)>;
  virtual ~Notifier() = default;
  virtual std::string channel() const = 0;
  virtual std::vector<std::string> recipients() const { return {}; }
  virtual void deliver(const json& body, Done done) = 0;
};

/// Appends each notification body to a JSON-lines sink. Never fails.
class LogNotifier final : public Notifier {
 public:
  LogNotifier() = default;
  explicit LogNotifier(std::filesystem::path file) : file_(std::move(file)) {}

  std::string channel() const override { return "log"; }

  void deliver(const json& body, Done done) override {
    lines_.push_back(body.dump());
    if (file_) {
      std::ofstream out(*file_, std::ios::app);
      out << lines_.back() << '\n';
    }
    done({true, {}});
  }

  const std::vector<std::string>& lines() const noexcept { return lines_; }

 private:
  std::optional<std::filesystem::path> file_;
  std::vector<std::string> lines_;
};

/// Simulated webhook endpoint: the first `fail_attempts` calls fail (negative: all
/// fail). Every call, good or bad, is recorded.
class ScriptedWebhook final : public Notifier {
 public:
  ScriptedWebhook(std::vector<std::string> urls, int fail_attempts) : urls_(std::move(urls)), fail_(fail_attempts) {}

  std::string channel() const override { return "webhook"; }
  std::vector<std::string> recipients() const override { return urls_; }

  void deliver(const json& body, Done done) override {
    ++calls_;
    const bool ok = fail_ >= 0 && calls_ > static_cast<std::size_t>(fail_);
    lines_.push_back(json{{"body", body}, {"status", ok ? 200 : 503}}.dump());
    done(ok ? DeliveryResult{true, {}} : DeliveryResult{false, "HTTP 503"});
  }

  std::size_t calls() const noexcept { return calls_; }
  const std::vector<std::string>& lines() const noexcept { return lines_; }

 private:
  std::vector<std::string> urls_;
  int fail_;
  std::size_t calls_ = 0;
  std::vector<std::string> lines_;
};

}  // namespace armguard::cloud
