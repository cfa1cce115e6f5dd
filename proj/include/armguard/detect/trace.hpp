#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "armguard/detect/detector.hpp"

namespace armguard::detect {

enum class IntervalLabel { Robbery, Normal };

inline std::string_view to_string(IntervalLabel l) { return l == IntervalLabel::Robbery ? "robbery" : "normal"; }

/// Inclusive frame range [start_seq, end_seq] with a ground-truth label.
struct LabeledInterval {
  FrameSeq start_seq = 0;
  FrameSeq end_seq = 0;
  IntervalLabel label = IntervalLabel::Normal;

  bool contains(FrameSeq s) const noexcept { return s >= start_seq && s <= end_seq; }
  friend bool operator==(const LabeledInterval&, const LabeledInterval&) = default;
};

/// Throws InvalidArgument when intervals overlap or are inverted.
inline void check_intervals(std::vector<LabeledInterval>& intervals) {
  std::sort(intervals.begin(), intervals.end(),
            [](const auto& a, const auto& b) { return a.start_seq < b.start_seq; });
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].end_seq < intervals[i].start_seq) {
      throw Error(ErrorCode::InvalidArgument, "ground-truth interval has end before start");
    }
    if (i > 0 && intervals[i].start_seq <= intervals[i - 1].end_seq) {
      throw Error(ErrorCode::InvalidArgument, "ground-truth intervals overlap");
    }
  }
}

inline std::vector<LabeledInterval> intervals_from_json(const json& j) {
  const json& arr = j.is_object() ? j.at("intervals") : j;
  if (!arr.is_array()) throw Error(ErrorCode::BadJson, "ground truth must be an array of intervals");
  std::vector<LabeledInterval> out;
  for (const auto& e : arr) {
    LabeledInterval iv;
    iv.start_seq = e.at("start_seq").get<FrameSeq>();
    iv.end_seq = e.at("end_seq").get<FrameSeq>();
    std::string label = e.at("label").get<std::string>();
    if (label == "robbery") {
      iv.label = IntervalLabel::Robbery;
    } else if (label == "normal") {
      iv.label = IntervalLabel::Normal;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown interval label '" + label + "'");
    }
    out.push_back(iv);
  }
  check_intervals(out);
  return out;
}

inline json to_json(const std::vector<LabeledInterval>& intervals) {
  json arr = json::array();
  for (const auto& iv : intervals) {
    arr.push_back({{"start_seq", iv.start_seq}, {"end_seq", iv.end_seq}, {"label", std::string(to_string(iv.label))}});
  }
  return arr;
}

struct TraceEntry {
  FrameSeq frame_seq;
  double q_gun;
  double q_knife;
};

/// Recorded per-frame confidences plus labeled ground truth.
struct ScoreTrace {
  std::string device_id;
  std::vector<TraceEntry> entries;  // strictly increasing frame_seq
  std::vector<LabeledInterval> ground_truth;

  /// CSV with header `frame_seq,q_gun,q_knife`. Blank lines are skipped.
  static ScoreTrace parse_csv(std::string_view text, std::string device_id = {}) {
    ScoreTrace trace;
    trace.device_id = std::move(device_id);
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (!header_seen) {
        if (line != "frame_seq,q_gun,q_knife") {
          throw Error(ErrorCode::Malformed, "trace CSV header must be 'frame_seq,q_gun,q_knife'");
        }
        header_seen = true;
        continue;
      }
      std::istringstream row(line);
      std::string a, b, c, extra;
      if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c, ',') ||
          std::getline(row, extra, ',')) {
        throw Error(ErrorCode::Malformed, "trace CSV line " + std::to_string(line_no) + " needs 3 fields");
      }
      TraceEntry e{};
      try {
        std::size_t used = 0;
        e.frame_seq = std::stoull(a, &used);
        if (used != a.size()) throw std::invalid_argument(a);
        e.q_gun = std::stod(b);
        e.q_knife = std::stod(c);
      } catch (const std::exception&) {
        throw Error(ErrorCode::Malformed, "trace CSV line " + std::to_string(line_no) + " is not numeric");
      }
      trace.append(e);
    }
    if (!header_seen) throw Error(ErrorCode::Malformed, "trace CSV is empty");
    return trace;
  }

  static ScoreTrace load(const std::string& csv_path, const std::string& ground_truth_path = {}) {
    ScoreTrace t = parse_csv(read_file(csv_path));
    if (!ground_truth_path.empty()) {
      json gt = json::parse(read_file(ground_truth_path));
      if (gt.is_object() && gt.contains("device_id")) t.device_id = gt["device_id"].get<std::string>();
      t.ground_truth = intervals_from_json(gt);
    }
    return t;
  }

  void append(TraceEntry e) {
    if (!entries.empty() && e.frame_seq <= entries.back().frame_seq) {
      throw Error(ErrorCode::Malformed, "trace frame_seq must strictly increase");
    }
    if (!(e.q_gun >= 0.0 && e.q_gun <= 1.0 && e.q_knife >= 0.0 && e.q_knife <= 1.0)) {
      throw Error(ErrorCode::Malformed, "trace confidence outside [0,1]");
    }
    entries.push_back(e);
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "frame_seq,q_gun,q_knife\n";
    for (const auto& e : entries) out << e.frame_seq << ',' << e.q_gun << ',' << e.q_knife << '\n';
    return out.str();
  }

 private:
  static std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }
};

/// Scores recorded for `seq`; gaps and frames past the end of the trace report zero.
inline DetectionScores lookup_scores(const ScoreTrace& trace, FrameSeq seq) {
  const auto& es = trace.entries;
  auto it = std::lower_bound(es.begin(), es.end(), seq,
                             [](const TraceEntry& e, FrameSeq s) { return e.frame_seq < s; });
  if (it == es.end() || it->frame_seq != seq) return DetectionScores::zero(seq);
  return DetectionScores::of(it->q_gun, it->q_knife, seq);
}

inline DetectionScores replay_detect(const ScoreTrace& trace, const Frame& frame) {
  return lookup_scores(trace, frame.seq);
}

class ReplayDetector final : public Detector {
 public:
  explicit ReplayDetector(ScoreTrace trace) : trace_(std::move(trace)) {}

  DetectionScores detect(const Frame& frame) override { return lookup_scores(trace_, frame.seq); }

  const ScoreTrace& trace() const noexcept { return trace_; }

 private:
  ScoreTrace trace_;
};

}  // namespace armguard::detect
