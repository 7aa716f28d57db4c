#pragma once

// Multi-object grounding metrics: per-sample tIoU and vIoU, and the
// aggregate m_tIoU / m_vIoU / vIoU@R report with target-count subsets.

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "omnitube/assignment.hpp"
#include "omnitube/geometry.hpp"
#include "omnitube/tube_builder.hpp"

namespace omnitube {

inline double sample_tiou(const Segment& gt, const Segment& pred) { return tiou(gt, pred); }

/// Box of `tube` at `frame`, or nullptr when the tube does not cover it.
inline const Box* tube_box(const Tube& tube, int frame) {
  if (!tube.segment.contains(frame)) return nullptr;
  const auto i = static_cast<std::size_t>(frame - tube.segment.start);
  return i < tube.boxes.size() ? &tube.boxes[i] : nullptr;
}

/// Summed per-frame IoU of one GT/pred tube pair over frames [first, last];
/// zero for pairs with different class words.
inline double tube_overlap(const Tube& gt, const Tube& pred, int first, int last) {
  if (gt.word != pred.word) return 0.0;
  double sum = 0.0;
  for (int t = first; t <= last; ++t) {
    const Box* g = tube_box(gt, t);
    const Box* p = tube_box(pred, t);
    if (g && p) sum += iou(*g, *p);
  }
  return sum;
}

/// vIoU = 1/|P_u| * sum_{t in P_i} 1/N * sum_i IoU(gt_i(t), pred_{pi(i)}(t)),
/// where P_i/P_u are the intersection/union of the GT and predicted
/// segments and pi pairs GT tubes with same-word predicted tubes so that the
/// total overlap is maximal. Unpaired GT tubes contribute zero.
inline double sample_viou(const Segment& gt_segment, const std::vector<Tube>& gt, const Segment& pred_segment,
                          const std::vector<Tube>& pred) {
  require(!gt.empty(), ErrorKind::empty_input, "vIoU needs at least one ground-truth tube");
  validate(gt_segment);
  validate(pred_segment);
  const int first = std::max(gt_segment.start, pred_segment.start);
  const int last = std::min(gt_segment.end, pred_segment.end);
  if (first > last || pred.empty()) return 0.0;
  const double uni = gt_segment.length() + pred_segment.length() - (last - first + 1);

  CostMatrix gain(gt.size(), pred.size());
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j) gain(i, j) = -tube_overlap(gt[i], pred[j], first, last);
  const Assignment best = hungarian(gain);
  double total = 0.0;
  for (auto [i, j] : best.pairs) total -= gain(i, j);
  return total / (static_cast<double>(gt.size()) * uni);
}

struct SampleScore {
  std::string video_id;
  double tiou = 0.0;
  double viou = 0.0;
  std::size_t targets = 0;
};

enum class Subset { low, medium, high };

/// Target-count subsets: 1-3 low, 4-6 medium, 7 or more high.
inline Subset subset_of(std::size_t targets) {
  if (targets <= 3) return Subset::low;
  if (targets <= 6) return Subset::medium;
  return Subset::high;
}

inline std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::low: return "low";
    case Subset::medium: return "medium";
    case Subset::high: return "high";
  }
  return "";
}

struct Aggregate {
  std::size_t count = 0;
  double m_tiou = 0.0;
  double m_viou = 0.0;
  std::vector<double> viou_at;  // parallel to EvalReport::thresholds
};

struct EvalReport {
  std::vector<double> thresholds;
  Aggregate full;
  std::map<Subset, Aggregate> subsets;  // only non-empty subsets
  std::vector<SampleScore> samples;     // sorted by video id
};

namespace detail {
inline Aggregate reduce(const std::vector<const SampleScore*>& xs, const std::vector<double>& thresholds) {
  Aggregate a;
  a.count = xs.size();
  a.viou_at.assign(thresholds.size(), 0.0);
  if (xs.empty()) return a;
  for (const auto* s : xs) {
    a.m_tiou += s->tiou;
    a.m_viou += s->viou;
    for (std::size_t r = 0; r < thresholds.size(); ++r)
      if (s->viou > thresholds[r]) a.viou_at[r] += 1.0;
  }
  const double n = static_cast<double>(xs.size());
  a.m_tiou /= n;
  a.m_viou /= n;
  for (auto& v : a.viou_at) v /= n;
  return a;
}
}  // namespace detail

/// Means and strict-threshold ratios; samples are reduced in video-id order.
inline EvalReport aggregate(std::vector<SampleScore> samples, std::vector<double> thresholds) {
  require(!samples.empty(), ErrorKind::empty_input, "no samples to aggregate");
  std::stable_sort(samples.begin(), samples.end(),
                   [](const SampleScore& a, const SampleScore& b) { return a.video_id < b.video_id; });
  EvalReport r;
  r.thresholds = std::move(thresholds);
  std::vector<const SampleScore*> all;
  std::map<Subset, std::vector<const SampleScore*>> parts;
  for (const auto& s : samples) {
    all.push_back(&s);
    parts[subset_of(s.targets)].push_back(&s);
  }
  r.full = detail::reduce(all, r.thresholds);
  for (const auto& [k, xs] : parts) r.subsets[k] = detail::reduce(xs, r.thresholds);
  r.samples = std::move(samples);
  return r;
}

inline nlohmann::json to_json(const Aggregate& a, const std::vector<double>& thresholds) {
  nlohmann::json j;
  j["count"] = a.count;
  j["m_tIoU"] = a.m_tiou;
  j["m_vIoU"] = a.m_viou;
  auto& at = j["vIoU@R"] = nlohmann::json::object();
  for (std::size_t r = 0; r < thresholds.size(); ++r) {
    char key[32];
    std::snprintf(key, sizeof key, "%g", thresholds[r]);
    at[key] = a.viou_at[r];
  }
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["version"] = 1;
  j["thresholds"] = r.thresholds;
  j["full"] = to_json(r.full, r.thresholds);
  auto& subs = j["subsets"] = nlohmann::json::object();
  for (const auto& [k, a] : r.subsets) subs[std::string(to_string(k))] = to_json(a, r.thresholds);
  auto& samples = j["samples"] = nlohmann::json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"video_id", s.video_id}, {"tIoU", s.tiou}, {"vIoU", s.viou}, {"targets", s.targets}});
  return j;
}

/// Human-readable table; values in percent like published tables.
inline std::string format_table(const EvalReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %7s %8s %8s", "subset", "count", "m_tIoU", "m_vIoU");
  out += buf;
  for (double t : r.thresholds) {
    std::snprintf(buf, sizeof buf, " vIoU@%-4g", t);
    out += buf;
  }
  out += '\n';
  auto line = [&](std::string_view name, const Aggregate& a) {
    std::snprintf(buf, sizeof buf, "%-8.*s %7zu %8.2f %8.2f", static_cast<int>(name.size()), name.data(), a.count,
                  100 * a.m_tiou, 100 * a.m_viou);
    out += buf;
    for (double v : a.viou_at) {
      std::snprintf(buf, sizeof buf, " %9.2f", 100 * v);
      out += buf;
    }
    out += '\n';
  };
  for (const auto& [k, a] : r.subsets) line(to_string(k), a);
  line("full", r.full);
  return out;
}

}  // namespace omnitube
