#include <gtest/gtest.h>

#include "armguard/cloud/console_api.hpp"
#include "armguard/cloud/live.hpp"
#include "test_util.hpp"

using namespace armguard;
using namespace armguard::cloud;
using wire::Envelope;
using wire::MessageType;

namespace {

std::vector<std::uint8_t> clip_gif(const std::string& device, FrameSeq last_seq = 40) {
  Clip c;
  c.device_id = device;
  c.trigger_class = WeaponClass::Gun;
  c.momentum_at_trigger = 1.1;
  c.captured_at = static_cast<TimeMs>(last_seq) * 100;
  c.fps = 10.0;
  for (FrameSeq s = last_seq - 29; s <= last_seq; ++s) c.frames.push_back(armguard::testing::moving_frame(16, 12, s, static_cast<TimeMs>(s) * 100));
  return wire::encode_clip(c);
}

struct ApiRig {
  VirtualClock clock;
  LogStore log;
  ClipStore clips;
  StubVerifier stub{0.9};
  LogNotifier notifier;
  std::vector<Envelope> sent;
  std::vector<std::string> events;
  CloudService svc{clock, log, clips, stub, notifier, [this](const std::string&, const Envelope& e) { sent.push_back(e); }};
  ConsoleApi api{svc};

  ApiRig() {
    svc.subscribe([this](const LogRecord& r) {
      if (auto ev = sse_event(svc.state(), r, svc.now())) events.push_back(*ev);
    });
  }

  void deliver(Envelope e) {
    e.sent_at = clock.now();
    svc.on_bytes(e.device_id, wire::encode(e));
  }

  HttpResponse req(std::string_view method, std::string_view path, std::string_view body = {},
                   std::map<std::string, std::string> query = {}) {
    return api.handle(method, path, query, body);
  }
};

json body_of(const HttpResponse& r) { return json::parse(r.body); }

}  // namespace

TEST(ConsoleApi, DevicesListShowsConfigAndPending) {
  ApiRig rig;
  EXPECT_EQ(body_of(rig.req("GET", "/devices"))["devices"], json::array());
  rig.deliver({MessageType::Register, 1, "cam-01", 0, {}});
  auto r = rig.req("GET", "/devices");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "application/json");
  auto d = body_of(r)["devices"][0];
  EXPECT_EQ(d["device_id"], "cam-01");
  EXPECT_EQ(d["online"], true);
  EXPECT_EQ(d["config"]["k"], 0.5);
  EXPECT_EQ(d["config"]["n"], 5);
  EXPECT_EQ(d["config_pending"], false);
}

TEST(ConsoleApi, PatchConfigStatuses) {
  ApiRig rig;
  rig.deliver({MessageType::Register, 1, "cam-01", 0, {}});
  auto ok = rig.req("PATCH", "/devices/cam-01/config", R"({"k":0.6})");
  ASSERT_EQ(ok.status, 200);
  EXPECT_EQ(body_of(ok)["delivery"], "sent");
  EXPECT_EQ(body_of(ok)["version"], 2);
  EXPECT_EQ(body_of(rig.req("GET", "/devices"))["devices"][0]["config_pending"], true);

  auto bad = rig.req("PATCH", "/devices/cam-01/config", R"({"k":1.5})");
  ASSERT_EQ(bad.status, 422);
  EXPECT_EQ(body_of(bad)["errors"], json::array({"k out of (0,1)"}));

  EXPECT_EQ(rig.req("PATCH", "/devices/nobody/config", R"({"k":0.6})").status, 404);
  EXPECT_EQ(rig.req("PATCH", "/devices/cam-01/config", "not json").status, 400);
  EXPECT_EQ(rig.req("PATCH", "/devices/cam-01/config", "[1]").status, 400);
  EXPECT_EQ(rig.req("GET", "/devices/cam-01/config").status, 405);
}

TEST(ConsoleApi, AlertLifecycleAndFilters) {
  ApiRig rig;
  rig.deliver({MessageType::Register, 1, "cam-01", 0, {}});
  rig.deliver({MessageType::Alert, 2, "cam-01", 0, clip_gif("cam-01")});
  rig.deliver({MessageType::Alert, 3, "cam-01", 0, clip_gif("cam-01", 80)});

  auto list = body_of(rig.req("GET", "/alerts"))["alerts"];
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0]["alert_id"], "A-000002");  // newest first
  EXPECT_EQ(list[1]["state"], "verifying");
  EXPECT_EQ(list[0]["state"], "pending");
  EXPECT_TRUE(list[0]["notification"].is_null());

  EXPECT_EQ(body_of(rig.req("GET", "/alerts", {}, {{"state", "pending"}}))["alerts"].size(), 1u);
  EXPECT_EQ(rig.req("GET", "/alerts", {}, {{"state", "bogus"}}).status, 400);

  auto dismissed = rig.req("POST", "/alerts/A-000002/dismiss");
  ASSERT_EQ(dismissed.status, 200);
  EXPECT_EQ(body_of(dismissed)["state"], "dismissed");

  rig.clock.run_all();
  auto one = rig.req("GET", "/alerts/A-000001");
  ASSERT_EQ(one.status, 200);
  EXPECT_EQ(body_of(one)["state"], "notified");
  EXPECT_EQ(body_of(one)["notification"]["channel"], "log");
  EXPECT_EQ(body_of(one)["notification"]["attempts"], 1);

  auto again = rig.req("POST", "/alerts/A-000001/dismiss");
  ASSERT_EQ(again.status, 409);
  EXPECT_EQ(body_of(again)["state"], "notified");
  EXPECT_EQ(rig.req("POST", "/alerts/A-000404/dismiss").status, 404);
  EXPECT_EQ(rig.req("GET", "/alerts/A-000404").status, 404);
  EXPECT_EQ(rig.req("DELETE", "/alerts/A-000001").status, 405);
  EXPECT_EQ(rig.req("GET", "/nothing/here").status, 404);
}

TEST(ConsoleApi, ClipIsServedAsGif) {
  ApiRig rig;
  rig.deliver({MessageType::Register, 1, "cam-01", 0, {}});
  const auto gif = clip_gif("cam-01");
  rig.deliver({MessageType::Alert, 2, "cam-01", 0, gif});
  auto r = rig.req("GET", "/alerts/A-000001/clip");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "image/gif");
  EXPECT_EQ(r.body, std::string(gif.begin(), gif.end()));
  EXPECT_EQ(rig.req("GET", "/alerts/A-000009/clip").status, 404);
}

TEST(ConsoleApi, SseEventsFollowTheLog) {
  ApiRig rig;
  rig.deliver({MessageType::Register, 1, "cam-01", 0, {}});
  rig.deliver({MessageType::Alert, 2, "cam-01", 0, clip_gif("cam-01")});
  rig.clock.run_all();
  ASSERT_FALSE(rig.events.empty());
  EXPECT_EQ(rig.events.front().rfind("id: ", 0), 0u);
  EXPECT_NE(rig.events.front().find("\nevent: device\ndata: {"), std::string::npos);
  EXPECT_EQ(rig.events.front().substr(rig.events.front().size() - 2), "\n\n");
  std::vector<std::string> alert_states;
  for (const auto& ev : rig.events) {
    if (ev.find("event: alert") == std::string::npos) continue;
    const auto data = json::parse(ev.substr(ev.find("data: ") + 6));
    alert_states.push_back(data["state"]);
  }
  // received, verifying, confirmed, notification attempt, notified
  ASSERT_GE(alert_states.size(), 4u);
  EXPECT_EQ(alert_states.back(), "notified");
  EXPECT_NE(std::find(alert_states.begin(), alert_states.end(), "confirmed"), alert_states.end());
}

TEST(ConsoleApi, WritesResponseSamplesForSchemaCheck) {
  ApiRig rig;
  json samples = json::array();
  auto keep = [&](const std::string& def, const HttpResponse& r) { samples.push_back({{"def", def}, {"body", body_of(r)}}); };
  keep("DeviceList", rig.req("GET", "/devices"));
  rig.deliver({MessageType::Register, 1, "cam-01", 0, {}});
  rig.deliver({MessageType::Register, 1, "cam-02", 0, Envelope::bytes_of(R"({"k":0.4})")});
  keep("ConfigAccepted", rig.req("PATCH", "/devices/cam-01/config", R"({"thresholds":{"knife":0.8}})"));
  keep("DeviceList", rig.req("GET", "/devices"));
  keep("ConfigRejected", rig.req("PATCH", "/devices/cam-01/config", R"({"k":1.5,"n":-1})"));
  keep("Error", rig.req("PATCH", "/devices/zzz/config", "{}"));
  keep("Error", rig.req("GET", "/alerts", {}, {{"state", "bogus"}}));
  keep("Error", rig.req("PUT", "/devices"));
  rig.deliver({MessageType::Alert, 2, "cam-01", 0, clip_gif("cam-01")});
  rig.deliver({MessageType::Alert, 3, "cam-02", 0, clip_gif("cam-02", 70)});
  rig.deliver({MessageType::Alert, 4, "cam-02", 0, clip_gif("cam-02", 99)});
  keep("AlertList", rig.req("GET", "/alerts"));
  keep("Alert", rig.req("POST", "/alerts/A-000003/dismiss"));
  rig.clock.run_all();
  keep("AlertList", rig.req("GET", "/alerts"));
  keep("Alert", rig.req("GET", "/alerts/A-000001"));
  keep("DismissConflict", rig.req("POST", "/alerts/A-000001/dismiss"));
  keep("Error", rig.req("GET", "/alerts/A-000404/clip"));
  for (const auto& ev : rig.events) {
    const bool alert = ev.find("\nevent: alert\n") != std::string::npos;
    samples.push_back({{"def", alert ? "Alert" : "Device"}, {"body", json::parse(ev.substr(ev.find("data: ") + 6))}});
  }
  ASSERT_GT(samples.size(), 20u);
  armguard::testing::write_text(ARMGUARD_API_SAMPLES, samples.dump(2));
}

// ---- loopback: real sockets on 127.0.0.1 -------------------------------------

namespace {

class DeviceSocket {
 public:
  explicit DeviceSocket(int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &addr.sin_addr);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) throw std::runtime_error("connect failed");
    timeval tv{0, 200 * 1000};
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
  }
  ~DeviceSocket() { ::close(fd_); }

  void send_raw(const std::vector<std::uint8_t>& bytes) { ::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL); }
  void send(Envelope e) {
    e.sent_at = wall_ms();
    send_raw(wire::encode(e));
  }

  /// Next envelope of type `t`, skipping others. Empty on timeout.
  std::optional<Envelope> expect(MessageType t, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      while (auto e = decoder_.next()) {
        if (e->type == t) return e;
      }
      std::uint8_t buf[4096];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n == 0) return std::nullopt;
      if (n > 0) decoder_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
    }
    return std::nullopt;
  }

  /// True once the peer has closed the connection.
  bool closed_by_peer(std::chrono::milliseconds timeout = std::chrono::seconds(5)) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      std::uint8_t buf[256];
      const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
      if (n == 0) return true;
      if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK) return true;
    }
    return false;
  }

 private:
  int fd_ = -1;
  wire::StreamDecoder decoder_;
};

/// A local webhook receiver.
struct HookServer {
  httplib::Server server;
  std::mutex m;
  std::vector<json> bodies;
  int port = 0;
  std::thread thread;

  HookServer() {
    server.Post("/hook", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lk(m);
      bodies.push_back(json::parse(req.body));
      res.status = 204;
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~HookServer() {
    server.stop();
    thread.join();
  }
  std::size_t count() {
    std::lock_guard lk(m);
    return bodies.size();
  }
};

template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return pred();
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("armguard_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

LiveOptions loopback_options(const std::filesystem::path& dir) {
  LiveOptions o;
  o.device_port = 0;
  o.console_port = 0;
  o.data_dir = dir;
  o.cloud.verify_ms = 300;
  return o;
}

}  // namespace

TEST(LiveCloud, EndToEndOverLoopback) {
  HookServer hook;
  const auto dir = fresh_dir("live");
  auto opts = loopback_options(dir);
  opts.webhook_urls = {"http://127.0.0.1:" + std::to_string(hook.port) + "/hook"};
  LiveCloud cloud(opts, std::make_unique<StubVerifier>(0.9));
  cloud.start();

  httplib::Client http("127.0.0.1", cloud.console_port());
  http.set_read_timeout(std::chrono::seconds(5));

  // SSE listener
  std::mutex sse_m;
  std::string sse_text;
  std::atomic<bool> sse_stop{false};
  std::thread sse([&] {
    httplib::Client c("127.0.0.1", cloud.console_port());
    c.Get("/events", [&](const char* data, std::size_t n) {
      std::lock_guard lk(sse_m);
      sse_text.append(data, n);
      return !sse_stop.load();
    });
  });
  auto sse_has = [&](const std::string& needle) {
    std::lock_guard lk(sse_m);
    return sse_text.find(needle) != std::string::npos;
  };
  std::this_thread::sleep_for(std::chrono::milliseconds(100));

  DeviceSocket dev(cloud.device_port());
  dev.send({MessageType::Register, 11, "cam-live", 0, {}});
  auto reg_ack = dev.expect(MessageType::RegisterAck);
  ASSERT_TRUE(reg_ack);
  EXPECT_EQ(reg_ack->msg_id, 11u);

  dev.send({MessageType::Alert, 12, "cam-live", 0, clip_gif("cam-live")});
  auto ack = dev.expect(MessageType::Ack);
  ASSERT_TRUE(ack);
  EXPECT_EQ(ack->msg_id, 12u);
  auto verdict = dev.expect(MessageType::Verdict);
  ASSERT_TRUE(verdict);
  EXPECT_EQ(verdict->payload_json()["verdict"], "confirmed");

  ASSERT_TRUE(eventually([&] { return hook.count() == 1; }));
  {
    std::lock_guard lk(hook.m);
    EXPECT_EQ(hook.bodies[0]["alert_id"], "A-000001");
    EXPECT_EQ(hook.bodies[0]["clip_url"], "/alerts/A-000001/clip");
  }
  ASSERT_TRUE(eventually([&] {
    auto r = http.Get("/alerts/A-000001");
    return r && r->status == 200 && json::parse(r->body)["state"] == "notified";
  }));
  auto clip = http.Get("/alerts/A-000001/clip");
  ASSERT_TRUE(clip);
  EXPECT_EQ(clip->get_header_value("Content-Type"), "image/gif");
  EXPECT_EQ(clip->body.substr(0, 6), "GIF89a");

  // Dismiss a second alert while it is still being verified.
  dev.send({MessageType::Alert, 13, "cam-live", 0, clip_gif("cam-live", 90)});
  ASSERT_TRUE(dev.expect(MessageType::Ack));
  auto dismissed = http.Post("/alerts/A-000002/dismiss");
  ASSERT_TRUE(dismissed);
  EXPECT_EQ(dismissed->status, 200);
  auto conflict = http.Post("/alerts/A-000001/dismiss");
  ASSERT_TRUE(conflict);
  EXPECT_EQ(conflict->status, 409);

  auto patched = http.Patch("/devices/cam-live/config", R"({"thresholds":{"gun":1.2}})", "application/json");
  ASSERT_TRUE(patched);
  ASSERT_EQ(patched->status, 200);
  EXPECT_EQ(json::parse(patched->body)["delivery"], "sent");
  auto update = dev.expect(MessageType::ConfigUpdate);
  ASSERT_TRUE(update);
  EXPECT_EQ(update->payload_json()["config"]["thresholds"]["gun"], 1.2);
  dev.send({MessageType::Ack, update->msg_id, "cam-live", 0, {}});
  ASSERT_TRUE(eventually([&] {
    auto r = http.Get("/devices");
    return r && json::parse(r->body)["devices"][0]["config_pending"] == false;
  }));
  auto rejected = http.Patch("/devices/cam-live/config", R"({"k":0})", "application/json");
  ASSERT_TRUE(rejected);
  EXPECT_EQ(rejected->status, 422);

  EXPECT_TRUE(eventually([&] { return sse_has("event: alert") && sse_has("\"state\":\"dismissed\"") && sse_has("event: device"); }));

  // Garbage on a fresh connection: logged as a fault and the connection is dropped.
  DeviceSocket junk(cloud.device_port());
  junk.send_raw({0xde, 0xad, 0xbe, 0xef, 0, 0, 0, 0, 0, 0, 0, 0});
  EXPECT_TRUE(junk.closed_by_peer());

  sse_stop = true;
  cloud.stop();
  sse.join();

  auto records = LogStore(dir / "events.jsonl").records();
  EXPECT_TRUE(std::any_of(records.begin(), records.end(), [](const LogRecord& r) {
    return r.kind == "protocol_fault" && r.data.dump().find("undecodable") != std::string::npos;
  }));
  std::filesystem::remove_all(dir);
}

TEST(LiveCloud, RestartRecoversStateFromDataDir) {
  const auto dir = fresh_dir("restart");
  {
    LiveCloud cloud(loopback_options(dir), std::make_unique<StubVerifier>(0.2));
    cloud.start();
    DeviceSocket dev(cloud.device_port());
    dev.send({MessageType::Register, 1, "cam-r", 0, {}});
    ASSERT_TRUE(dev.expect(MessageType::RegisterAck));
    dev.send({MessageType::Alert, 2, "cam-r", 0, clip_gif("cam-r")});
    auto verdict = dev.expect(MessageType::Verdict);
    ASSERT_TRUE(verdict);
    EXPECT_EQ(verdict->payload_json()["verdict"], "rejected");
  }
  LiveCloud cloud(loopback_options(dir), std::make_unique<StubVerifier>(0.2));
  cloud.start();
  httplib::Client http("127.0.0.1", cloud.console_port());
  auto r = http.Get("/alerts");
  ASSERT_TRUE(r);
  auto alerts = json::parse(r->body)["alerts"];
  ASSERT_EQ(alerts.size(), 1u);
  EXPECT_EQ(alerts[0]["state"], "rejected");
  auto clip = http.Get("/alerts/A-000001/clip");
  ASSERT_TRUE(clip);
  EXPECT_EQ(clip->status, 200);
  EXPECT_EQ(cloud.call([](CloudService& s) { return s.state().devices.size(); }), 1u);
  cloud.stop();
  std::filesystem::remove_all(dir);
}

TEST(LiveCloud, PortInUseIsAnIoError) {
  const auto dir = fresh_dir("busy");
  LiveCloud first(loopback_options(dir), std::make_unique<StubVerifier>());
  first.start();
  auto opts = loopback_options(dir / "second");
  opts.device_port = first.device_port();
  LiveCloud second(opts, std::make_unique<StubVerifier>());
  try {
    second.start();
    FAIL() << "expected bind failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
  first.stop();
  std::filesystem::remove_all(dir);
}

TEST(WebhookNotifier, RejectsUnsupportedUrls) {
  EXPECT_THROW(WebhookNotifier::parse_url("https://example.com/x"), Error);
  EXPECT_THROW(WebhookNotifier::parse_url("ftp://x"), Error);
  auto u = WebhookNotifier::parse_url("http://10.0.0.1:9000/a/b");
  EXPECT_EQ(u.host, "10.0.0.1");
  EXPECT_EQ(u.port, 9000);
  EXPECT_EQ(u.path, "/a/b");
  EXPECT_EQ(WebhookNotifier::parse_url("http://h").path, "/");
}

TEST(WebhookNotifier, Non2xxIsAFailure) {
  httplib::Server server;
  server.Post("/down", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  std::promise<DeliveryResult> got;
  {
    WebhookNotifier n({"http://127.0.0.1:" + std::to_string(port) + "/down"}, [](std::function<void()> fn) { fn(); });
    n.deliver({{"alert_id", "A-1"}}, [&](DeliveryResult r) { got.set_value(r); });
    auto r = got.get_future().get();
    EXPECT_FALSE(r.ok);
    EXPECT_NE(r.error.find("503"), std::string::npos);
  }
  server.stop();
  t.join();
}
