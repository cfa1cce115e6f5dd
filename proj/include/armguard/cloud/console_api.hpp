#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "armguard/cloud/service.hpp"

namespace armguard::cloud {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  static HttpResponse json_body(int status, const json& j) { return {status, "application/json", j.dump()}; }
  static HttpResponse error(int status, const std::string& message) { return json_body(status, {{"error", message}}); }
};

inline json device_view(const DeviceRecord& d, TimeMs now) {
  return json{{"device_id", d.device_id},
              {"online", d.online(now)},
              {"last_heartbeat", d.last_heartbeat ? json(*d.last_heartbeat) : json(nullptr)},
              {"registered_at", d.registered_at},
              {"config", to_json(d.config)},
              {"config_version", d.config_version},
              {"acked_version", d.acked_version},
              {"config_pending", d.config_version > d.acked_version}};
}

inline json alert_view(const ServiceState& s, const AlertEvent& a) {
  json j = to_json(a);
  if (const auto* n = s.notification_for(a.alert_id)) {
    j["notification"] = {{"channel", n->channel},
                         {"recipients", n->recipients},
                         {"attempts", n->attempts},
                         {"delivered_at", n->delivered_at ? json(*n->delivered_at) : json(nullptr)},
                         {"failure", n->failure.empty() ? json(nullptr) : json(n->failure)}};
  } else {
    j["notification"] = nullptr;
  }
  return j;
}

/// One server-sent event ("alert" or "device") for a log record, or nothing for
/// records the console does not care about. Must run right after the record was
/// applied, so the view reflects it.
inline std::optional<std::string> sse_event(const ServiceState& s, const LogRecord& r, TimeMs now) {
  std::string event;
  json data;
  const json& d = r.data;
  if (r.kind == "alert_received" || r.kind == "alert_transition" || r.kind == "notification") {
    auto it = s.alerts.find(d.value("alert_id", std::string{}));
    if (it == s.alerts.end()) return std::nullopt;
    event = "alert";
    data = alert_view(s, it->second);
  } else if (r.kind == "device_registered" || r.kind == "config_updated" || r.kind == "config_acked") {
    auto it = s.devices.find(d.value("device_id", std::string{}));
    if (it == s.devices.end()) return std::nullopt;
    event = "device";
    data = device_view(it->second, now);
  } else {
    return std::nullopt;
  }
  return "id: " + std::to_string(r.seq) + "\nevent: " + event + "\ndata: " + data.dump() + "\n\n";
}

/// The console's HTTP/JSON surface as a pure function of (method, path, query,
/// body) over one CloudService. The caller must hold the service's command
/// queue while calling handle(). GET /events is streamed by the server and is
/// not routed here.
class ConsoleApi {
 public:
  explicit ConsoleApi(CloudService& svc) : svc_(svc) {}

  HttpResponse handle(std::string_view method, std::string_view path, const std::map<std::string, std::string>& query,
                      std::string_view body) {
    const auto parts = split(path);
    try {
      if (parts.size() == 1 && parts[0] == "devices") {
        if (method != "GET") return not_allowed();
        return list_devices();
      }
      if (parts.size() == 3 && parts[0] == "devices" && parts[2] == "config") {
        if (method != "PATCH") return not_allowed();
        return patch_config(parts[1], body);
      }
      if (parts.size() == 1 && parts[0] == "alerts") {
        if (method != "GET") return not_allowed();
        return list_alerts(query);
      }
      if (parts.size() == 2 && parts[0] == "alerts") {
        if (method != "GET") return not_allowed();
        return get_alert(parts[1]);
      }
      if (parts.size() == 3 && parts[0] == "alerts" && parts[2] == "clip") {
        if (method != "GET") return not_allowed();
        return get_clip(parts[1]);
      }
      if (parts.size() == 3 && parts[0] == "alerts" && parts[2] == "dismiss") {
        if (method != "POST") return not_allowed();
        return dismiss(parts[1]);
      }
    } catch (const Error& e) {
      return HttpResponse::error(500, e.what());
    }
    return HttpResponse::error(404, "no route for " + std::string(method) + " " + std::string(path));
  }

 private:
  static std::vector<std::string> split(std::string_view path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
      while (i < path.size() && path[i] == '/') ++i;
      std::size_t j = i;
      while (j < path.size() && path[j] != '/') ++j;
      if (j > i) out.emplace_back(path.substr(i, j - i));
      i = j;
    }
    return out;
  }

  static HttpResponse not_allowed() { return HttpResponse::error(405, "method not allowed"); }

  HttpResponse list_devices() {
    json arr = json::array();
    for (const auto& [_, d] : svc_.state().devices) arr.push_back(device_view(d, svc_.now()));
    return HttpResponse::json_body(200, {{"devices", arr}});
  }

  HttpResponse list_alerts(const std::map<std::string, std::string>& query) {
    std::optional<AlertState> filter;
    if (auto it = query.find("state"); it != query.end() && !it->second.empty()) {
      try {
        filter = alert_state_from_string(it->second);
      } catch (const Error&) {
        return HttpResponse::error(400, "unknown state '" + it->second + "'");
      }
    }
    json arr = json::array();
    const auto& alerts = svc_.state().alerts;
    for (auto it = alerts.rbegin(); it != alerts.rend(); ++it) {  // newest first
      if (filter && it->second.state != *filter) continue;
      arr.push_back(alert_view(svc_.state(), it->second));
    }
    return HttpResponse::json_body(200, {{"alerts", arr}});
  }

  HttpResponse get_alert(const std::string& id) {
    auto it = svc_.state().alerts.find(id);
    if (it == svc_.state().alerts.end()) return HttpResponse::error(404, "unknown alert " + id);
    return HttpResponse::json_body(200, alert_view(svc_.state(), it->second));
  }

  HttpResponse get_clip(const std::string& id) {
    if (!svc_.state().alerts.contains(id)) return HttpResponse::error(404, "unknown alert " + id);
    const auto* gif = svc_.clips().get(id);
    if (!gif) return HttpResponse::error(404, "clip for " + id + " is missing");
    return {200, "image/gif", std::string(gif->begin(), gif->end())};
  }

  HttpResponse dismiss(const std::string& id) {
    try {
      const AlertEvent& a = svc_.dismiss(id, "console");
      return HttpResponse::json_body(200, alert_view(svc_.state(), a));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownAlert) return HttpResponse::error(404, "unknown alert " + id);
      if (e.code() == ErrorCode::IllegalTransition) {
        const auto& a = svc_.state().alerts.at(id);
        return HttpResponse::json_body(
            409, {{"error", "alert " + id + " is " + std::string(to_string(a.state))}, {"state", to_string(a.state)}});
      }
      throw;
    }
  }

  HttpResponse patch_config(const std::string& device_id, std::string_view body) {
    json patch = json::parse(body, nullptr, false);
    if (patch.is_discarded() || !patch.is_object()) return HttpResponse::error(400, "body must be a JSON object");
    if (!svc_.state().devices.contains(device_id)) return HttpResponse::error(404, "unknown device " + device_id);
    auto res = svc_.update_config(device_id, patch, "console");
    if (!res.ok()) return HttpResponse::json_body(422, {{"errors", res.errors}});
    return HttpResponse::json_body(200, {{"device_id", device_id}, {"version", res.version}, {"delivery", res.delivery}});
  }

  CloudService& svc_;
};

}  // namespace armguard::cloud
