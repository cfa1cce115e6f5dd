#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "armguard/core/alert.hpp"
#include "armguard/detect/trace.hpp"

namespace armguard::sim {

/// Alert-level confusion counts.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// A ratio whose denominator may be zero. `defined` is false in that case and
/// `value` is reported as 0.
struct Ratio {
  double value = 0.0;
  bool defined = false;

  static Ratio of(double num, double den) { return den > 0.0 ? Ratio{num / den, true} : Ratio{0.0, false}; }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

struct DerivedMetrics {
  double accuracy = 0.0;
  Ratio precision;
  Ratio recall;
  Ratio f1;

  friend bool operator==(const DerivedMetrics&, const DerivedMetrics&) = default;
};

/// Real-valued cells so that a normalized confusion matrix can be used directly.
inline DerivedMetrics compute_metrics(double tp, double fp, double fn, double tn) {
  for (double v : {tp, fp, fn, tn}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "confusion cells must be finite and >= 0");
  }
  const double total = tp + fp + fn + tn;
  if (!(total > 0.0)) throw Error(ErrorCode::EmptyInput, "confusion matrix is empty");
  DerivedMetrics m;
  m.accuracy = (tp + tn) / total;
  m.precision = Ratio::of(tp, tp + fp);
  m.recall = Ratio::of(tp, tp + fn);
  m.f1 = Ratio::of(2.0 * m.precision.value * m.recall.value, m.precision.value + m.recall.value);
  if (!m.precision.defined || !m.recall.defined) m.f1 = Ratio{m.f1.value, false};
  return m;
}

inline DerivedMetrics compute_metrics(const ConfusionCounts& c) {
  return compute_metrics(static_cast<double>(c.tp), static_cast<double>(c.fp), static_cast<double>(c.fn),
                         static_cast<double>(c.tn));
}

/// Area under the ROC curve by the trapezoid rule. Thresholds sweep the distinct
/// scores from +inf down to -inf; tied scores move TPR and FPR together, which is
/// what gives a tie half credit.
inline double compute_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  std::size_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
    if (std::isnan(scores[i])) throw Error(ErrorCode::InvalidArgument, "score is NaN");
    pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw Error(ErrorCode::DegenerateLabels, "AUC needs both positive and negative labels");

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const std::size_t tp0 = tp;
    const std::size_t fp0 = fp;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (labels[order[i]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
    }
    // trapezoid between (fp0, tp0) and (fp, tp), in counts; normalized at the end
    area += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0) / 2.0;
  }
  return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

/// What happened to one alert, as needed for scoring.
struct AlertOutcome {
  std::string alert_id;
  std::string device_id;
  FrameSeq trigger_seq = 0;
  TimeMs captured_at = 0;
  AlertState final_state = AlertState::Pending;
  bool confirmed = false;  // ever reached Confirmed
  std::optional<double> score;
  std::optional<TimeMs> verdict_at;
  bool in_robbery = false;
};

struct DeviceTruth {
  std::string device_id;
  std::vector<detect::LabeledInterval> intervals;
};

struct MetricsReport {
  ConfusionCounts counts;
  DerivedMetrics metrics;
  std::optional<double> auc;  // absent when the verified alerts hold a single class
  std::vector<TimeMs> latencies_ms;
  std::map<std::string, ConfusionCounts> per_device;
  std::vector<AlertOutcome> alerts;
};

inline bool in_robbery(const std::vector<detect::LabeledInterval>& intervals, FrameSeq seq) {
  return std::any_of(intervals.begin(), intervals.end(), [seq](const auto& iv) {
    return iv.label == detect::IntervalLabel::Robbery && iv.contains(seq);
  });
}

/// Alert-level scoring. A Confirmed alert is TP when its trigger frame lies in a
/// robbery interval of its device, FP otherwise. Robbery intervals without a
/// Confirmed alert are FN; normal intervals without one are TN.
inline MetricsReport score_alerts(std::vector<AlertOutcome> alerts, const std::vector<DeviceTruth>& truth) {
  std::map<std::string, const DeviceTruth*> by_device;
  MetricsReport rep;
  for (const auto& d : truth) {
    by_device[d.device_id] = &d;
    rep.per_device[d.device_id];
  }
  std::sort(alerts.begin(), alerts.end(), [](const auto& a, const auto& b) { return a.alert_id < b.alert_id; });

  std::vector<double> scores;
  std::vector<int> labels;
  for (auto& a : alerts) {
    auto it = by_device.find(a.device_id);
    a.in_robbery = it != by_device.end() && in_robbery(it->second->intervals, a.trigger_seq);
    auto& dev = rep.per_device[a.device_id];
    if (a.confirmed) {
      if (a.in_robbery) {
        ++dev.tp;
      } else {
        ++dev.fp;
      }
    }
    if (a.score) {
      scores.push_back(*a.score);
      labels.push_back(a.in_robbery ? 1 : 0);
    }
    if (a.verdict_at) rep.latencies_ms.push_back(*a.verdict_at - a.captured_at);
  }

  for (const auto& d : truth) {
    auto& dev = rep.per_device[d.device_id];
    for (const auto& iv : d.intervals) {
      const bool hit = std::any_of(alerts.begin(), alerts.end(), [&](const AlertOutcome& a) {
        return a.confirmed && a.device_id == d.device_id && iv.contains(a.trigger_seq);
      });
      if (hit) continue;
      if (iv.label == detect::IntervalLabel::Robbery) {
        ++dev.fn;
      } else {
        ++dev.tn;
      }
    }
  }

  for (const auto& [_, c] : rep.per_device) rep.counts += c;
  if (rep.counts.total() > 0) rep.metrics = compute_metrics(rep.counts);
  const bool both = std::count(labels.begin(), labels.end(), 1) > 0 && std::count(labels.begin(), labels.end(), 0) > 0;
  if (both) rep.auc = compute_auc(scores, labels);
  rep.alerts = std::move(alerts);
  return rep;
}

/// Alert outcomes from the cloud's folded alert table.
inline AlertOutcome outcome_of(const AlertEvent& a) {
  AlertOutcome o;
  o.alert_id = a.alert_id;
  o.device_id = a.clip.device_id;
  o.trigger_seq = a.clip.trigger_seq;
  o.captured_at = a.clip.captured_at;
  o.final_state = a.state;
  o.confirmed = a.has_been(AlertState::Confirmed);
  o.score = a.verifier_score;
  o.verdict_at = a.entered_at(AlertState::Confirmed);
  if (!o.verdict_at) o.verdict_at = a.entered_at(AlertState::Rejected);
  return o;
}

inline json to_json(const ConfusionCounts& c) { return json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}; }

inline json to_json(const Ratio& r) { return r.defined ? json(r.value) : json(nullptr); }

inline json to_json(const MetricsReport& r) {
  json per_device = json::object();
  for (const auto& [id, c] : r.per_device) per_device[id] = to_json(c);
  json alerts = json::array();
  for (const auto& a : r.alerts) {
    alerts.push_back({{"alert_id", a.alert_id},
                      {"device_id", a.device_id},
                      {"trigger_seq", a.trigger_seq},
                      {"captured_at", a.captured_at},
                      {"state", std::string(to_string(a.final_state))},
                      {"confirmed", a.confirmed},
                      {"score", a.score ? json(*a.score) : json(nullptr)},
                      {"verdict_at", a.verdict_at ? json(*a.verdict_at) : json(nullptr)},
                      {"label", a.in_robbery ? "robbery" : "normal"}});
  }
  const bool any = r.counts.total() > 0;
  return json{{"counts", to_json(r.counts)},
              {"accuracy", any ? json(r.metrics.accuracy) : json(nullptr)},
              {"precision", to_json(r.metrics.precision)},
              {"recall", to_json(r.metrics.recall)},
              {"f1", to_json(r.metrics.f1)},
              {"auc", r.auc ? json(*r.auc) : json(nullptr)},
              {"latency_ms", r.latencies_ms},
              {"per_device", per_device},
              {"alerts", alerts}};
}

inline std::string format_table(const MetricsReport& r) {
  auto num = [](const json& v) {
    if (v.is_null()) return std::string("n/a");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v.get<double>());
    return std::string(buf);
  };
  json j = to_json(r);
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %6s %6s %6s %6s\n", "device", "TP", "FP", "FN", "TN");
  out += line;
  for (const auto& [id, c] : r.per_device) {
    std::snprintf(line, sizeof line, "%-16s %6llu %6llu %6llu %6llu\n", id.c_str(), (unsigned long long)c.tp,
                  (unsigned long long)c.fp, (unsigned long long)c.fn, (unsigned long long)c.tn);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-16s %6llu %6llu %6llu %6llu\n", "total", (unsigned long long)r.counts.tp,
                (unsigned long long)r.counts.fp, (unsigned long long)r.counts.fn, (unsigned long long)r.counts.tn);
  out += line;
  out += "accuracy " + num(j["accuracy"]) + "  precision " + num(j["precision"]) + "  recall " + num(j["recall"]) +
         "  f1 " + num(j["f1"]) + "  auc " + num(j["auc"]) + "\n";
  if (!r.latencies_ms.empty()) {
    auto sorted = r.latencies_ms;
    std::sort(sorted.begin(), sorted.end());
    std::snprintf(line, sizeof line, "latency ms: n=%zu min=%lld median=%lld max=%lld\n", sorted.size(),
                  (long long)sorted.front(), (long long)sorted[sorted.size() / 2], (long long)sorted.back());
    out += line;
  }
  return out;
}

}  // namespace armguard::sim
