#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <iostream>
#include <list>
#include <mutex>
#include <regex>
#include <thread>

#include <httplib.h>

#include "armguard/cloud/console_api.hpp"

namespace armguard::cloud {

inline TimeMs wall_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

/// The single writer. Every touch of the service runs on this thread, in
/// arrival order, and the clock is dragged along with wall time so timers fire.
class CommandLoop {
 public:
  explicit CommandLoop(VirtualClock& clock) : clock_(clock) {}
  ~CommandLoop() { stop(); }

  void start() { thread_ = std::thread([this] { run(); }); }

  void stop() {
    {
      std::lock_guard lk(m_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  void post(std::function<void()> fn) {
    {
      std::lock_guard lk(m_);
      if (stopping_) return;
      queue_.push_back(std::move(fn));
    }
    cv_.notify_one();
  }

  /// Runs `f` on the loop thread and waits for its result. Never call from the loop thread.
  template <typename F>
  auto call(F f) -> std::invoke_result_t<F> {
    using R = std::invoke_result_t<F>;
    auto task = std::make_shared<std::packaged_task<R()>>(std::move(f));
    auto fut = task->get_future();
    {
      std::lock_guard lk(m_);
      if (stopping_) throw Error(ErrorCode::Io, "service is shutting down");
      queue_.push_back([task] { (*task)(); });
    }
    cv_.notify_one();
    return fut.get();
  }

 private:
  void run() {
    std::unique_lock lk(m_);
    while (!stopping_) {
      if (queue_.empty()) {
        TimeMs wait = 200;
        if (next_timer_) wait = std::clamp<TimeMs>(*next_timer_ - wall_ms(), 0, 200);
        cv_.wait_for(lk, std::chrono::milliseconds(wait), [this] { return stopping_ || !queue_.empty(); });
        if (stopping_) break;
      }
      std::deque<std::function<void()>> batch;
      batch.swap(queue_);
      lk.unlock();
      fire_due();
      for (auto& fn : batch) {
        try {
          fn();
        } catch (const std::exception& e) {
          std::cerr << "command failed: " << e.what() << "\n";
        }
      }
      fire_due();
      auto next = clock_.next_time();
      lk.lock();
      next_timer_ = next;
    }
  }

  void fire_due() {
    try {
      clock_.run_until(wall_ms());
    } catch (const std::exception& e) {
      std::cerr << "timer failed: " << e.what() << "\n";
    }
  }

  VirtualClock& clock_;
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  std::optional<TimeMs> next_timer_;
  bool stopping_ = false;
  std::thread thread_;
};

/// Fan-out buffer for server-sent events. Keeps the last `capacity` events.
class EventHub {
 public:
  explicit EventHub(std::size_t capacity = 1024) : capacity_(capacity) {}

  void publish(std::string text) {
    {
      std::lock_guard lk(m_);
      events_.push_back(std::move(text));
      ++published_;
      if (events_.size() > capacity_) events_.pop_front();
    }
    cv_.notify_all();
  }

  std::uint64_t head() const {
    std::lock_guard lk(m_);
    return published_;
  }

  /// Events numbered >= cursor, waiting up to `timeout` for at least one.
  std::vector<std::string> wait(std::uint64_t& cursor, std::chrono::milliseconds timeout) {
    std::unique_lock lk(m_);
    cv_.wait_for(lk, timeout, [&] { return closed_ || published_ > cursor; });
    std::vector<std::string> out;
    const std::uint64_t first = published_ - events_.size();
    if (cursor < first) cursor = first;  // slow reader fell behind; skip ahead
    for (; cursor < published_; ++cursor) out.push_back(events_[cursor - first]);
    return out;
  }

  void close() {
    {
      std::lock_guard lk(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lk(m_);
    return closed_;
  }

 private:
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::string> events_;
  std::uint64_t published_ = 0;
  std::size_t capacity_;
  bool closed_ = false;
};

/// HTTP POST of the notification body to every URL; a delivery succeeds when all
/// answer 2xx. Requests run on a private thread and completions are handed back
/// through `post` so the service only ever sees them on its own thread.
class WebhookNotifier final : public Notifier {
 public:
  using Post = std::function<void(std::function<void()>)>;

  WebhookNotifier(std::vector<std::string> urls, Post post, std::chrono::milliseconds timeout = std::chrono::seconds(5))
      : urls_(std::move(urls)), post_(std::move(post)), timeout_(timeout) {
    for (const auto& u : urls_) parse_url(u);
    thread_ = std::thread([this] { run(); });
  }

  ~WebhookNotifier() override {
    {
      std::lock_guard lk(m_);
      stopping_ = true;
    }
    cv_.notify_all();
    if (thread_.joinable()) thread_.join();
  }

  std::string channel() const override { return "webhook"; }
  std::vector<std::string> recipients() const override { return urls_; }

  void deliver(const json& body, Done done) override {
    {
      std::lock_guard lk(m_);
      jobs_.push_back({body.dump(), std::move(done)});
    }
    cv_.notify_one();
  }

  struct Url {
    std::string host;
    int port = 80;
    std::string path = "/";
  };

  static Url parse_url(const std::string& url) {
    static const std::regex re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
      throw Error(ErrorCode::InvalidArgument, "webhook URL must look like http://host[:port]/path: " + url);
    }
    Url u;
    u.host = m[1];
    if (m[2].matched) u.port = std::stoi(m[2]);
    if (m[3].matched) u.path = m[3];
    return u;
  }

 private:
  struct Job {
    std::string body;
    Done done;
  };

  void run() {
    std::unique_lock lk(m_);
    while (true) {
      cv_.wait(lk, [this] { return stopping_ || !jobs_.empty(); });
      if (stopping_) return;
      Job job = std::move(jobs_.front());
      jobs_.pop_front();
      lk.unlock();
      DeliveryResult result{true, {}};
      for (const auto& url : urls_) {
        const Url u = parse_url(url);
        httplib::Client cli(u.host, u.port);
        cli.set_connection_timeout(timeout_);
        cli.set_read_timeout(timeout_);
        auto res = cli.Post(u.path, job.body, "application/json");
        if (!res) {
          result = {false, url + ": " + httplib::to_string(res.error())};
          break;
        }
        if (res->status < 200 || res->status >= 300) {
          result = {false, url + ": HTTP " + std::to_string(res->status)};
          break;
        }
      }
      post_([done = std::move(job.done), result] { done(result); });
      lk.lock();
    }
  }

  std::vector<std::string> urls_;
  Post post_;
  std::chrono::milliseconds timeout_;
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<Job> jobs_;
  bool stopping_ = false;
  std::thread thread_;
};

struct LiveOptions {
  std::string host = "127.0.0.1";
  int device_port = 7700;  // 0 picks a free port
  int console_port = 8080;
  std::filesystem::path data_dir = "armguard-data";
  CloudOptions cloud;
  std::vector<std::string> webhook_urls;  // empty: log channel
  std::optional<std::filesystem::path> static_dir;  // served under /console/
};

/// The cloud service on real sockets: wire protocol over TCP on the device port,
/// console API plus SSE over HTTP on the console port. State lives in
/// <data_dir>/events.jsonl and <data_dir>/clips/.
class LiveCloud {
 public:
  LiveCloud(LiveOptions opts, std::unique_ptr<Verifier> verifier)
      : opts_(std::move(opts)),
        clock_(wall_ms()),
        loop_(clock_),
        verifier_(std::move(verifier)) {
    std::filesystem::create_directories(opts_.data_dir);
    log_ = std::make_unique<LogStore>(opts_.data_dir / "events.jsonl");
    clips_ = std::make_unique<ClipStore>(opts_.data_dir / "clips");
    if (opts_.webhook_urls.empty()) {
      notifier_ = std::make_unique<LogNotifier>(opts_.data_dir / "notifications.jsonl");
    } else {
      notifier_ = std::make_unique<WebhookNotifier>(opts_.webhook_urls, [this](std::function<void()> fn) {
        loop_.post(std::move(fn));
      });
    }
    svc_ = std::make_unique<CloudService>(
        clock_, *log_, *clips_, *verifier_, *notifier_,
        [this](const std::string& device_id, const wire::Envelope& e) { send_to_device(device_id, e); }, opts_.cloud);
    api_ = std::make_unique<ConsoleApi>(*svc_);
    svc_->subscribe([this](const LogRecord& r) {
      if (auto ev = sse_event(svc_->state(), r, svc_->now())) hub_.publish(std::move(*ev));
    });
  }

  ~LiveCloud() { stop(); }

  LiveCloud(const LiveCloud&) = delete;
  LiveCloud& operator=(const LiveCloud&) = delete;

  /// Binds both ports and starts serving. Throws Io when a port is taken.
  void start() {
    open_device_port();
    setup_http();
    console_port_ = opts_.console_port == 0 ? http_.bind_to_any_port(opts_.host)
                                            : (http_.bind_to_port(opts_.host, opts_.console_port) ? opts_.console_port : -1);
    if (console_port_ < 0) throw Error(ErrorCode::Io, "cannot bind console port " + std::to_string(opts_.console_port));
    loop_.start();
    running_ = true;
    http_thread_ = std::thread([this] { http_.listen_after_bind(); });
    accept_thread_ = std::thread([this] { accept_loop(); });
    http_.wait_until_ready();
  }

  void stop() {
    if (!running_.exchange(false)) return;
    hub_.close();
    http_.stop();
    if (http_thread_.joinable()) http_thread_.join();
    if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    {
      std::lock_guard lk(conns_m_);
      for (auto& c : all_conns_) ::shutdown(c->fd, SHUT_RDWR);
    }
    for (auto& t : readers_) {
      if (t.joinable()) t.join();
    }
    loop_.stop();
    notifier_.reset();  // joins the webhook thread before the service goes away
  }

  int device_port() const noexcept { return device_port_; }
  int console_port() const noexcept { return console_port_; }

  template <typename F>
  auto call(F f) {
    return loop_.call([this, f = std::move(f)]() mutable { return f(*svc_); });
  }

 private:
  struct Conn {
    int fd = -1;
    std::string peer;
    std::string device_id;
    std::mutex write_m;
  };

  void open_device_port() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::Io, "socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(opts_.device_port));
    if (::inet_pton(AF_INET, opts_.host.c_str(), &addr.sin_addr) != 1) {
      throw Error(ErrorCode::InvalidArgument, "host must be an IPv4 address: " + opts_.host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
      ::close(listen_fd_);
      listen_fd_ = -1;
      throw Error(ErrorCode::Io, "cannot bind device port " + std::to_string(opts_.device_port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    device_port_ = ntohs(addr.sin_port);
  }

  void accept_loop() {
    while (running_) {
      pollfd p{listen_fd_, POLLIN, 0};
      if (::poll(&p, 1, 200) <= 0) continue;
      sockaddr_in peer{};
      socklen_t len = sizeof peer;
      const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      auto conn = std::make_shared<Conn>();
      conn->fd = fd;
      char ip[INET_ADDRSTRLEN] = {};
      ::inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof ip);
      conn->peer = std::string("tcp:") + ip + ":" + std::to_string(ntohs(peer.sin_port));
      std::lock_guard lk(conns_m_);
      all_conns_.push_back(conn);
      readers_.emplace_back([this, conn] { read_loop(conn); });
    }
  }

  void read_loop(std::shared_ptr<Conn> conn) {
    wire::StreamDecoder decoder;
    std::vector<std::uint8_t> buf(64 * 1024);
    while (true) {
      const ssize_t n = ::recv(conn->fd, buf.data(), buf.size(), 0);
      if (n <= 0) break;
      decoder.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
      try {
        while (auto e = decoder.next()) {
          bind_device(conn, e->device_id);
          loop_.post([this, env = std::move(*e)] { svc_->on_envelope(env); });
        }
      } catch (const Error& err) {
        const std::string who = conn->device_id.empty() ? conn->peer : conn->device_id;
        loop_.post([this, who, reason = std::string(err.what())] { svc_->on_transport_error(who, reason); });
        break;  // the stream cannot be resynchronized
      }
    }
    unbind(conn);
  }

  void bind_device(const std::shared_ptr<Conn>& conn, const std::string& device_id) {
    std::lock_guard lk(conns_m_);
    conn->device_id = device_id;
    by_device_[device_id] = conn;
  }

  void unbind(const std::shared_ptr<Conn>& conn) {
    std::lock_guard lk(conns_m_);
    ::shutdown(conn->fd, SHUT_RDWR);
    if (auto it = by_device_.find(conn->device_id); it != by_device_.end() && it->second == conn) by_device_.erase(it);
  }

  /// Called on the loop thread. Messages for a disconnected device are dropped;
  /// the device's own retries and the heartbeat-driven config resend cover that.
  void send_to_device(const std::string& device_id, const wire::Envelope& e) {
    std::shared_ptr<Conn> conn;
    {
      std::lock_guard lk(conns_m_);
      auto it = by_device_.find(device_id);
      if (it == by_device_.end()) return;
      conn = it->second;
    }
    wire::Envelope out = e;
    out.sent_at = wall_ms();
    const auto bytes = wire::encode(out);
    std::lock_guard wl(conn->write_m);
    std::size_t off = 0;
    while (off < bytes.size()) {
      const ssize_t n = ::send(conn->fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
      if (n <= 0) {
        ::shutdown(conn->fd, SHUT_RDWR);
        return;
      }
      off += static_cast<std::size_t>(n);
    }
  }

  void setup_http() {
    http_.Get("/events", [this](const httplib::Request&, httplib::Response& res) {
      res.set_header("Cache-Control", "no-cache");
      auto cursor = std::make_shared<std::uint64_t>(hub_.head());
      auto idle = std::make_shared<int>(0);
      res.set_chunked_content_provider("text/event-stream", [this, cursor, idle](std::size_t, httplib::DataSink& sink) {
        if (hub_.closed()) {
          sink.done();
          return false;
        }
        auto events = hub_.wait(*cursor, std::chrono::milliseconds(500));
        if (events.empty()) {
          if (++*idle >= 30) {  // comment line every ~15 s keeps proxies from closing the stream
            *idle = 0;
            const std::string ping = ": keepalive\n\n";
            return sink.write(ping.data(), ping.size());
          }
          return true;
        }
        *idle = 0;
        for (const auto& ev : events) {
          if (!sink.write(ev.data(), ev.size())) return false;
        }
        return true;
      });
    });
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> query;
      for (const auto& [k, v] : req.params) query.emplace(k, v);
      HttpResponse r;
      try {
        r = loop_.call([&] { return api_->handle(req.method, req.path, query, req.body); });
      } catch (const std::exception& e) {
        r = HttpResponse::error(503, e.what());
      }
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    http_.Get(".*", route);
    http_.Post(".*", route);
    http_.Patch(".*", route);
    http_.Put(".*", route);
    http_.Delete(".*", route);
    if (opts_.static_dir) http_.set_mount_point("/console", opts_.static_dir->string());
  }

  LiveOptions opts_;
  VirtualClock clock_;
  CommandLoop loop_;
  std::unique_ptr<Verifier> verifier_;
  std::unique_ptr<LogStore> log_;
  std::unique_ptr<ClipStore> clips_;
  std::unique_ptr<Notifier> notifier_;
  std::unique_ptr<CloudService> svc_;
  std::unique_ptr<ConsoleApi> api_;
  EventHub hub_;
  httplib::Server http_;
  std::thread http_thread_;
  std::thread accept_thread_;
  int listen_fd_ = -1;
  int device_port_ = -1;
  int console_port_ = -1;
  std::atomic<bool> running_{false};
  std::mutex conns_m_;
  std::list<std::shared_ptr<Conn>> all_conns_;
  std::map<std::string, std::shared_ptr<Conn>> by_device_;
  std::vector<std::thread> readers_;
};

}  // namespace armguard::cloud
