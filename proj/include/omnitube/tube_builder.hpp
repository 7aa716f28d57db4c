#pragma once

// Turns per-frame predictions into tubes: link boxes across consecutive
// frames, trim to the decoded segment, classify each tubelet by its mean
// class distribution and keep those grounded in a mention of the query.

#include <string>
#include <vector>

#include "omnitube/assignment.hpp"
#include "omnitube/geometry.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

struct Tubelet {
  int first_frame = 0;                   // frames are first_frame .. first_frame + boxes.size() - 1
  std::vector<Box> boxes;
  std::vector<std::vector<double>> dists;  // per-frame class distribution
  std::vector<double> mean_dist;         // filled by trim_and_classify
  std::size_t resolved = 0;              // argmax of mean_dist
  bool no_object = false;

  int last_frame() const { return first_frame + static_cast<int>(boxes.size()) - 1; }
};

/// Object mention in the query: a class word grounded on a token span.
struct Mention {
  std::string word;
  std::size_t span_begin = 0;  // inclusive token indices
  std::size_t span_end = 0;
  std::size_t count = 1;

  bool covers(std::size_t token) const { return token >= span_begin && token <= span_end; }
  /// Supervision slot for the class head: the span's last token (head noun).
  std::size_t slot() const { return span_end; }
  friend bool operator==(const Mention&, const Mention&) = default;
};

struct Tube {
  std::string word;
  std::size_t span_begin = 0, span_end = 0;
  std::size_t token = 0;
  Segment segment;
  std::vector<Box> boxes;  // one per frame of `segment`
  friend bool operator==(const Tube&, const Tube&) = default;
};

/// Chains Hungarian frame-to-frame assignments forward from frame 0; tubelet
/// j starts at query j of frame 0. Always returns N_q full-length tubelets.
inline std::vector<Tubelet> link_frames(const Tensor& boxes, const Tensor& probs) {
  require(boxes.rank() == 3 && boxes.extent(2) == 4 && probs.rank() == 3 && probs.extent(0) == boxes.extent(0) &&
              probs.extent(1) == boxes.extent(1),
          ErrorKind::shape_mismatch, "link_frames expects B [N_v x N_q x 4] and G [N_v x N_q x S]");
  const std::size_t frames = boxes.extent(0), nq = boxes.extent(1), slots = probs.extent(2);
  auto dist_at = [&](std::size_t f, std::size_t q) {
    const double* p = probs.data().data() + (f * nq + q) * slots;
    return std::vector<double>(p, p + slots);
  };
  std::vector<Tubelet> tubes(nq);
  std::vector<std::size_t> current(nq);
  for (std::size_t j = 0; j < nq; ++j) {
    current[j] = j;
    tubes[j].boxes.push_back(box_at(boxes, 0, j));
    tubes[j].dists.push_back(dist_at(0, j));
  }
  for (std::size_t f = 0; f + 1 < frames; ++f) {
    const Assignment a = hungarian(build_link_cost(boxes, probs, f, f + 1));
    std::vector<std::size_t> next_of(nq);
    for (auto [from, to] : a.pairs) next_of[from] = to;
    for (std::size_t j = 0; j < nq; ++j) {
      current[j] = next_of[current[j]];
      tubes[j].boxes.push_back(box_at(boxes, f + 1, current[j]));
      tubes[j].dists.push_back(dist_at(f + 1, current[j]));
    }
  }
  return tubes;
}

/// Keeps frames inside `segment`, averages the retained distributions and
/// resolves the class by argmax (ties to the lower slot). The last slot is
/// the no-object slot.
inline std::vector<Tubelet> trim_and_classify(std::vector<Tubelet> tubelets, const Segment& segment) {
  validate(segment);
  for (auto& t : tubelets) {
    require(!t.boxes.empty() && t.boxes.size() == t.dists.size(), ErrorKind::invalid_argument, "malformed tubelet");
    const int lo = std::max(segment.start, t.first_frame), hi = std::min(segment.end, t.last_frame());
    require(lo <= hi, ErrorKind::invalid_segment, "segment does not overlap tubelet");
    const auto b = static_cast<std::size_t>(lo - t.first_frame), e = static_cast<std::size_t>(hi - t.first_frame) + 1;
    t.boxes = std::vector<Box>(t.boxes.begin() + static_cast<std::ptrdiff_t>(b),
                               t.boxes.begin() + static_cast<std::ptrdiff_t>(e));
    t.dists = std::vector<std::vector<double>>(t.dists.begin() + static_cast<std::ptrdiff_t>(b),
                                               t.dists.begin() + static_cast<std::ptrdiff_t>(e));
    t.first_frame = lo;
    const std::size_t slots = t.dists.front().size();
    t.mean_dist.assign(slots, 0.0);
    for (const auto& d : t.dists)
      for (std::size_t s = 0; s < slots; ++s) t.mean_dist[s] += d[s];
    for (auto& v : t.mean_dist) v /= static_cast<double>(t.dists.size());
    t.resolved = 0;
    for (std::size_t s = 1; s < slots; ++s)
      if (t.mean_dist[s] > t.mean_dist[t.resolved]) t.resolved = s;
    t.no_object = t.resolved == slots - 1;
  }
  return tubelets;
}

/// Keeps tubelets whose resolved token lies inside a mention span.
/// Several tubelets may resolve to the same mention; all are kept.
inline std::vector<Tube> filter_tubelets(const std::vector<Tubelet>& tubelets, const std::vector<Mention>& mentions) {
  std::vector<Tube> out;
  for (const auto& t : tubelets) {
    if (t.no_object) continue;
    for (const auto& m : mentions) {
      if (!m.covers(t.resolved)) continue;
      out.push_back({m.word, m.span_begin, m.span_end, t.resolved, Segment{t.first_frame, t.last_frame()}, t.boxes});
      break;
    }
  }
  return out;
}

/// Direct-class variant: the resolved slot indexes `vocabulary`, and a
/// tubelet is kept when that word is one of the mentioned class words.
inline std::vector<Tube> filter_tubelets_by_class(const std::vector<Tubelet>& tubelets,
                                                  const std::vector<Mention>& mentions,
                                                  const std::vector<std::string>& vocabulary) {
  std::vector<Tube> out;
  for (const auto& t : tubelets) {
    if (t.no_object || t.resolved >= vocabulary.size()) continue;
    for (const auto& m : mentions) {
      if (m.word != vocabulary[t.resolved]) continue;
      out.push_back({m.word, m.span_begin, m.span_end, m.slot(), Segment{t.first_frame, t.last_frame()}, t.boxes});
      break;
    }
  }
  return out;
}

/// link -> trim/classify -> filter.
inline std::vector<Tube> build_tubes(const Tensor& boxes, const Tensor& probs, const Segment& segment,
                                     const std::vector<Mention>& mentions) {
  return filter_tubelets(trim_and_classify(link_frames(boxes, probs), segment), mentions);
}

}  // namespace omnitube
