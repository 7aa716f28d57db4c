#pragma once

// Training objective: matched-set (Hungarian) loss over boxes and class
// distributions plus KL losses on the start/end distributions, each with
// closed-form gradients with respect to boxes and pre-softmax logits.

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "omnitube/assignment.hpp"
#include "omnitube/geometry.hpp"
#include "omnitube/ground_truth.hpp"
#include "omnitube/nn.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

using BoxGrad = std::array<double, 4>;  // d/d(cx, cy, w, h)

struct OverlapWithGrad {
  double value = 0.0;
  BoxGrad grad{};  // with respect to the first (predicted) box
};

/// IoU or GIoU of `pred` against `gt`, with the gradient in `pred`.
/// At coordinate ties the gradient takes the one-sided branch where `pred`
/// does not define the extreme.
inline OverlapWithGrad overlap_with_grad(const Box& pred, const Box& gt, BoxLoss kind) {
  const CornerBox a = to_corners(pred), b = to_corners(gt);
  OverlapWithGrad out;
  out.value = kind == BoxLoss::giou ? giou(a, b) : iou(a, b);

  const double iw_raw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih_raw = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const double iw = std::max(0.0, iw_raw), ih = std::max(0.0, ih_raw);
  const double inter = iw * ih;
  const double aw = a.x1 - a.x0, ah = a.y1 - a.y0;
  const double uni = aw * ah + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
  const double cw = std::max(a.x1, b.x1) - std::min(a.x0, b.x0);
  const double ch = std::max(a.y1, b.y1) - std::min(a.y0, b.y0);
  const double hull = cw * ch;
  if (uni <= 0) return out;

  // partials with respect to a's corners (x0, y0, x1, y1)
  std::array<double, 4> d_inter{}, d_area{}, d_hull{};
  if (iw_raw > 0 && ih_raw > 0) {
    if (a.x0 > b.x0) d_inter[0] = -ih;
    if (a.x1 < b.x1) d_inter[2] = ih;
    if (a.y0 > b.y0) d_inter[1] = -iw;
    if (a.y1 < b.y1) d_inter[3] = iw;
  }
  d_area = {-ah, -aw, ah, aw};
  if (a.x0 < b.x0) d_hull[0] = -ch;
  if (a.x1 > b.x1) d_hull[2] = ch;
  if (a.y0 < b.y0) d_hull[1] = -cw;
  if (a.y1 > b.y1) d_hull[3] = cw;

  std::array<double, 4> dc{};
  for (int i = 0; i < 4; ++i) {
    const double d_uni = d_area[i] - d_inter[i];
    dc[i] = (d_inter[i] * uni - inter * d_uni) / (uni * uni);
    if (kind == BoxLoss::giou && hull > 0) dc[i] += (d_uni * hull - uni * d_hull[i]) / (hull * hull);
  }
  // corners -> center form
  out.grad = {dc[0] + dc[2], dc[1] + dc[3], 0.5 * (dc[2] - dc[0]), 0.5 * (dc[3] - dc[1])};
  return out;
}

/// Smooth L1 with threshold beta.
inline std::pair<double, double> smooth_l1(double d, double beta = 1.0) {
  if (std::abs(d) < beta) return {0.5 * d * d / beta, d / beta};
  return {std::abs(d) - 0.5 * beta, d > 0 ? 1.0 : -1.0};
}

/// Matched (query, target) pairs for every frame of the ground-truth segment;
/// frames[t - segment.start].
struct MatchPlan {
  Segment segment;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> frames;

  std::size_t pair_count() const {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.size();
    return n;
  }
};

/// The same tube-level assignment applied on every segment frame.
inline MatchPlan tube_plan(const Assignment& a, const Segment& segment) {
  MatchPlan plan{segment, {}};
  plan.frames.assign(static_cast<std::size_t>(segment.length()), a.pairs);
  return plan;
}

struct HungarianLoss {
  double box_overlap = 0.0;  // L_u: mean (1 - GIoU) or (1 - IoU)
  double box_l1 = 0.0;       // L_l: mean smooth-L1 per coordinate
  double cls = 0.0;          // L_c: weighted cross-entropy
  double total = 0.0;        // L_h
  Tensor grad_boxes_overlap;  // dL_u / dB
  Tensor grad_boxes_l1;       // dL_l / dB
  Tensor grad_logits_cls;     // dL_c / dG-logits
  Tensor grad_boxes;          // dL_h / dB
  Tensor grad_logits;         // dL_h / dG-logits
};

inline void check_plan(const MatchPlan& plan, const Tensor& boxes, const GroundTruth& gt) {
  require(plan.segment == gt.segment && plan.frames.size() == static_cast<std::size_t>(gt.segment.length()),
          ErrorKind::invalid_argument, "match plan does not cover the ground-truth segment");
  for (const auto& f : plan.frames) {
    require(f.size() == gt.targets.size(), ErrorKind::invalid_argument, "matched count differs from target count");
    std::vector<char> q(boxes.extent(1), 0), t(gt.targets.size(), 0);
    for (auto [j, k] : f) {
      require(j < q.size() && k < t.size() && !q[j] && !t[k], ErrorKind::invalid_argument,
              "assignment inconsistent with prediction/target shapes");
      q[j] = t[k] = 1;
    }
  }
}

/// Matched-set loss. Unmatched queries on segment frames are trained toward
/// the no-object slot with weight `w.no_object`; unmatched boxes get no
/// gradient.
inline HungarianLoss hungarian_loss(const Tensor& boxes, const Tensor& class_logits, const GroundTruth& gt,
                                    const MatchPlan& plan, const LossWeights& w = {}, BoxLoss kind = BoxLoss::giou) {
  require(boxes.rank() == 3 && boxes.extent(2) == 4, ErrorKind::shape_mismatch, "boxes must be [N_v x N_q x 4]");
  require(class_logits.rank() == 3 && class_logits.extent(0) == boxes.extent(0) &&
              class_logits.extent(1) == boxes.extent(1),
          ErrorKind::shape_mismatch, "class logits must be [N_v x N_q x S]");
  require(static_cast<std::size_t>(gt.segment.end) < boxes.extent(0), ErrorKind::invalid_segment,
          "segment beyond video");
  check_plan(plan, boxes, gt);
  const std::size_t nq = boxes.extent(1), slots = class_logits.extent(2), no_object = slots - 1;
  for (const auto& t : gt.targets)
    require(t.slot < no_object, ErrorKind::invalid_argument, "target slot outside text length");

  HungarianLoss out;
  out.grad_boxes_overlap = Tensor(boxes.shape());
  out.grad_boxes_l1 = Tensor(boxes.shape());
  out.grad_logits_cls = Tensor(class_logits.shape());

  const double n_pairs = static_cast<double>(plan.pair_count());
  double weight_sum = 0.0;
  std::vector<double> probs(slots);
  for (std::size_t fi = 0; fi < plan.frames.size(); ++fi) {
    const int frame = gt.segment.start + static_cast<int>(fi);
    const auto f = static_cast<std::size_t>(frame);
    std::vector<long> target_of(nq, -1);
    for (auto [j, k] : plan.frames[fi]) {
      target_of[j] = static_cast<long>(k);
      const Box pred = box_at(boxes, f, j);
      const Box& ref = gt.box(k, frame);
      const auto ov = overlap_with_grad(pred, ref, kind);
      out.box_overlap += (1.0 - ov.value) / n_pairs;
      const std::array<double, 4> diff{pred.cx - ref.cx, pred.cy - ref.cy, pred.w - ref.w, pred.h - ref.h};
      double* g_ov = out.grad_boxes_overlap.data().data() + (f * nq + j) * 4;
      double* g_l1 = out.grad_boxes_l1.data().data() + (f * nq + j) * 4;
      for (int c = 0; c < 4; ++c) {
        const auto [val, der] = smooth_l1(diff[c]);
        out.box_l1 += val / (4.0 * n_pairs);
        g_l1[c] += der / (4.0 * n_pairs);
        g_ov[c] += -ov.grad[c] / n_pairs;
      }
    }
    for (std::size_t j = 0; j < nq; ++j) {
      const double wt = target_of[j] >= 0 ? 1.0 : w.no_object;
      const std::size_t target_slot =
          target_of[j] >= 0 ? gt.targets[static_cast<std::size_t>(target_of[j])].slot : no_object;
      const double* z = class_logits.data().data() + (f * nq + j) * slots;
      std::copy(z, z + slots, probs.begin());
      const double peak = *std::max_element(probs.begin(), probs.end());
      double sum = 0.0;
      for (double& p : probs) sum += std::exp(p - peak);
      const double lse = peak + std::log(sum);
      out.cls += wt * (lse - z[target_slot]);
      double* g = out.grad_logits_cls.data().data() + (f * nq + j) * slots;
      for (std::size_t s = 0; s < slots; ++s) g[s] = wt * (std::exp(z[s] - lse) - (s == target_slot ? 1.0 : 0.0));
      weight_sum += wt;
    }
  }
  out.cls /= weight_sum;
  for (auto& g : out.grad_logits_cls.data()) g /= weight_sum;

  out.total = w.iou * out.box_overlap + w.l1 * out.box_l1 + w.cls * out.cls;
  out.grad_boxes = Tensor(boxes.shape());
  for (std::size_t i = 0; i < boxes.size(); ++i)
    out.grad_boxes[i] = w.iou * out.grad_boxes_overlap[i] + w.l1 * out.grad_boxes_l1[i];
  out.grad_logits = out.grad_logits_cls;
  for (auto& g : out.grad_logits.data()) g *= w.cls;
  return out;
}

struct KlLoss {
  double start = 0.0;
  double end = 0.0;
  Tensor grad_logits;  // [N_v x 2]
};

/// Target distribution over frames: one-hot at `index`, or a normalized
/// Gaussian around it when sigma > 0.
inline std::vector<double> temporal_target(std::size_t frames, std::size_t index, double sigma) {
  std::vector<double> q(frames, 0.0);
  if (sigma <= 0) {
    q[index] = 1.0;
    return q;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < frames; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(index);
    q[i] = std::exp(-d * d / (2 * sigma * sigma));
    sum += q[i];
  }
  for (auto& v : q) v /= sum;
  return q;
}

/// KL(target || softmax(logits)) per channel; column 0 start, column 1 end.
inline KlLoss kl_temporal_loss(const Tensor& logits, const Segment& gt, double sigma = 0.0) {
  require(logits.rank() == 2 && logits.cols() == 2, ErrorKind::shape_mismatch, "temporal logits must be [N_v x 2]");
  validate(gt);
  const std::size_t n = logits.rows();
  require(static_cast<std::size_t>(gt.end) < n, ErrorKind::invalid_segment, "ground-truth frame outside video");
  KlLoss out;
  out.grad_logits = Tensor::matrix(n, 2);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const auto q = temporal_target(n, static_cast<std::size_t>(ch == 0 ? gt.start : gt.end), sigma);
    double peak = logits(0, ch);
    for (std::size_t i = 1; i < n; ++i) peak = std::max(peak, logits(i, ch));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(logits(i, ch) - peak);
    const double lse = peak + std::log(sum);
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (q[i] > 0) value += q[i] * (std::log(q[i]) - (logits(i, ch) - lse));
      out.grad_logits(i, ch) = std::exp(logits(i, ch) - lse) - q[i];
    }
    (ch == 0 ? out.start : out.end) = value;
  }
  return out;
}

struct LossBreakdown {
  double total = 0.0;
  double hungarian = 0.0;  // L_h
  double box_overlap = 0.0;
  double box_l1 = 0.0;
  double cls = 0.0;
  double kl_start = 0.0;
  double kl_end = 0.0;
};

struct LossGradients {
  Tensor boxes;            // dL/dB
  Tensor class_logits;     // dL/dG-logits
  Tensor temporal_logits;  // dL/dH-logits
};

struct LossOptions {
  LossWeights weights;
  BoxLoss box_loss = BoxLoss::giou;
  MatchGranularity matching = MatchGranularity::tube;
  double kl_sigma = 0.0;
};

struct LossResult {
  LossBreakdown breakdown;
  LossGradients gradients;
  MatchPlan plan;
};

/// Matches predictions to ground truth, then composes
/// total = w.hungarian * L_h + w.kl * (KL_start + KL_end).
inline LossResult total_loss(const Tensor& boxes, const Tensor& class_logits, const Tensor& temporal_logits,
                             const GroundTruth& gt, const LossOptions& opt = {}) {
  const Tensor probs = softmax(class_logits, 2);
  MatchPlan plan;
  if (opt.matching == MatchGranularity::tube) {
    plan = tube_plan(hungarian(build_train_cost(boxes, probs, gt, opt.weights, opt.box_loss)), gt.segment);
  } else {
    plan.segment = gt.segment;
    for (int f = gt.segment.start; f <= gt.segment.end; ++f)
      plan.frames.push_back(hungarian(build_train_cost_frame(boxes, probs, gt, f, opt.weights, opt.box_loss)).pairs);
  }
  const auto h = hungarian_loss(boxes, class_logits, gt, plan, opt.weights, opt.box_loss);
  const auto k = kl_temporal_loss(temporal_logits, gt.segment, opt.kl_sigma);

  LossResult r;
  const auto& w = opt.weights;
  r.breakdown = {w.hungarian * h.total + w.kl * (k.start + k.end), h.total, h.box_overlap, h.box_l1, h.cls,
                 k.start, k.end};
  r.gradients.boxes = h.grad_boxes;
  for (auto& g : r.gradients.boxes.data()) g *= w.hungarian;
  r.gradients.class_logits = h.grad_logits;
  for (auto& g : r.gradients.class_logits.data()) g *= w.hungarian;
  r.gradients.temporal_logits = k.grad_logits;
  for (auto& g : r.gradients.temporal_logits.data()) g *= w.kl;
  r.plan = std::move(plan);
  return r;
}

}  // namespace omnitube
