#pragma once

// Finite-difference verification of the analytic loss gradients.
//
// Instances are random (boxes, class logits, temporal logits, ground truth).
// The matching is computed once at the unperturbed point and held fixed,
// since it is piecewise constant. Instances whose matched boxes lie within
// `kink_margin` of a non-differentiable configuration (coinciding edges) are
// redrawn: a central difference across a kink does not estimate a gradient.

#include <algorithm>
#include <cmath>
#include <functional>

#include "omnitube/losses.hpp"
#include "omnitube/random.hpp"

namespace omnitube {

struct GradcheckInstance {
  Tensor boxes;            // [N_v x N_q x 4]
  Tensor class_logits;     // [N_v x N_q x S]
  Tensor temporal_logits;  // [N_v x 2]
  GroundTruth gt;
  MatchPlan plan;
};

struct GradcheckOptions {
  std::size_t instances = 100;
  double step = 1e-5;
  double tolerance = 1e-4;
  double kink_margin = 1e-3;
  BoxLoss box_loss = BoxLoss::giou;
  LossWeights weights;
  bool corrupt = false;  // perturbs one analytic entry; used to prove the checker can fail
};

struct GradcheckResult {
  double box_overlap = 0.0;  // max relative error over instances, L_u
  double box_l1 = 0.0;       // L_l
  double cls = 0.0;          // L_c
  double kl = 0.0;           // KL_start + KL_end
  std::size_t instances = 0;
  std::size_t redrawn = 0;

  double worst() const { return std::max({box_overlap, box_l1, cls, kl}); }
};

namespace gradcheck_detail {

inline Box random_box(Rng& rng) {
  return {rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4)};
}

/// Smallest distance between an edge of `a` and an edge of `b` on the same axis.
inline double edge_gap(const Box& a, const Box& b) {
  const auto p = to_corners(a), q = to_corners(b);
  double gap = 1e300;
  for (double u : {p.x0, p.x1})
    for (double v : {q.x0, q.x1}) gap = std::min(gap, std::abs(u - v));
  for (double u : {p.y0, p.y1})
    for (double v : {q.y0, q.y1}) gap = std::min(gap, std::abs(u - v));
  return gap;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& n) {
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - n[i]) * (a[i] - n[i]);
    na += a[i] * a[i];
    nn += n[i] * n[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
}

/// Central differences of f over every entry of x.
inline std::vector<double> numeric_gradient(Tensor& x, double h, const std::function<double()>& f) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace gradcheck_detail

/// Draws one instance; returns false when it sits too close to a kink.
inline bool draw_instance(Rng& rng, const GradcheckOptions& opt, GradcheckInstance& inst) {
  using namespace gradcheck_detail;
  const auto nv = static_cast<std::size_t>(rng.uniform_int(2, 6));
  const auto nq = static_cast<std::size_t>(rng.uniform_int(2, 6));
  const auto text = static_cast<std::size_t>(rng.uniform_int(2, 8));
  const auto targets = static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(std::min<std::size_t>(nq, 4))));
  const int start = rng.uniform_int(0, static_cast<int>(nv) - 1);
  inst.gt = {{start, rng.uniform_int(start, static_cast<int>(nv) - 1)}, {}};
  for (std::size_t k = 0; k < targets; ++k) {
    TargetTrack t{rng.index(text), {}};
    for (int f = inst.gt.segment.start; f <= inst.gt.segment.end; ++f) t.boxes.push_back(random_box(rng));
    inst.gt.targets.push_back(std::move(t));
  }
  inst.boxes = Tensor({nv, nq, 4});
  for (std::size_t f = 0; f < nv; ++f)
    for (std::size_t j = 0; j < nq; ++j) {
      const Box b = random_box(rng);
      double* dst = inst.boxes.data().data() + (f * nq + j) * 4;
      dst[0] = b.cx, dst[1] = b.cy, dst[2] = b.w, dst[3] = b.h;
    }
  inst.class_logits = Tensor({nv, nq, text + 1});
  for (auto& v : inst.class_logits.data()) v = rng.normal();
  inst.temporal_logits = Tensor::matrix(nv, 2);
  for (auto& v : inst.temporal_logits.data()) v = rng.normal();

  const Tensor probs = softmax(inst.class_logits, 2);
  inst.plan = tube_plan(hungarian(build_train_cost(inst.boxes, probs, inst.gt, opt.weights, opt.box_loss)),
                        inst.gt.segment);
  for (std::size_t fi = 0; fi < inst.plan.frames.size(); ++fi)
    for (auto [j, k] : inst.plan.frames[fi]) {
      const int frame = inst.gt.segment.start + static_cast<int>(fi);
      if (edge_gap(box_at(inst.boxes, static_cast<std::size_t>(frame), j), inst.gt.box(k, frame)) < opt.kink_margin)
        return false;
    }
  return true;
}

inline GradcheckResult check_instance(GradcheckInstance inst, const GradcheckOptions& opt) {
  using namespace gradcheck_detail;
  GradcheckResult r;
  r.instances = 1;
  const auto base = hungarian_loss(inst.boxes, inst.class_logits, inst.gt, inst.plan, opt.weights, opt.box_loss);
  auto term = [&](auto pick) {
    return [&, pick] {
      return pick(hungarian_loss(inst.boxes, inst.class_logits, inst.gt, inst.plan, opt.weights, opt.box_loss));
    };
  };
  auto analytic_overlap = base.grad_boxes_overlap.data();
  if (opt.corrupt) {
    // shift the largest entry by 1%
    auto it = std::max_element(analytic_overlap.begin(), analytic_overlap.end(),
                               [](double a, double b) { return std::abs(a) < std::abs(b); });
    *it *= 1.01;
  }
  r.box_overlap = relative_error(
      analytic_overlap,
      numeric_gradient(inst.boxes, opt.step, term([](const HungarianLoss& h) { return h.box_overlap; })));
  r.box_l1 =
      relative_error(base.grad_boxes_l1.data(),
                     numeric_gradient(inst.boxes, opt.step, term([](const HungarianLoss& h) { return h.box_l1; })));
  r.cls =
      relative_error(base.grad_logits_cls.data(),
                     numeric_gradient(inst.class_logits, opt.step, term([](const HungarianLoss& h) { return h.cls; })));
  const auto kl = kl_temporal_loss(inst.temporal_logits, inst.gt.segment);
  r.kl = relative_error(kl.grad_logits.data(), numeric_gradient(inst.temporal_logits, opt.step, [&] {
                          const auto k = kl_temporal_loss(inst.temporal_logits, inst.gt.segment);
                          return k.start + k.end;
                        }));
  return r;
}

inline GradcheckResult run_gradcheck(std::uint64_t seed, const GradcheckOptions& opt = {}) {
  Rng rng(seed);
  GradcheckResult total;
  while (total.instances < opt.instances) {
    GradcheckInstance inst;
    if (!draw_instance(rng, opt, inst)) {
      ++total.redrawn;
      continue;
    }
    const auto r = check_instance(std::move(inst), opt);
    total.box_overlap = std::max(total.box_overlap, r.box_overlap);
    total.box_l1 = std::max(total.box_l1, r.box_l1);
    total.cls = std::max(total.cls, r.cls);
    total.kl = std::max(total.kl, r.kl);
    ++total.instances;
  }
  return total;
}

}  // namespace omnitube
