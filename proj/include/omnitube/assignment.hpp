#pragma once

// Exact rectangular linear assignment (shortest augmenting path with dual
// potentials) and the two cost builders used by training-time matching and
// inference-time frame linking.

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <limits>
#include <utility>
#include <vector>

#include "omnitube/error.hpp"
#include "omnitube/geometry.hpp"
#include "omnitube/ground_truth.hpp"
#include "omnitube/tensor.hpp"

namespace omnitube {

class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    for (const auto& r : init) {
      require(r.size() == cols_, ErrorKind::shape_mismatch, "ragged cost matrix");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<double>& data() const { return data_; }

  CostMatrix transposed() const {
    CostMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // sorted by row
  double cost = 0.0;

  /// Column assigned to `row`, or -1.
  long col_of(std::size_t row) const {
    for (const auto& [r, c] : pairs)
      if (r == row) return static_cast<long>(c);
    return -1;
  }
};

namespace detail {

// Finds an alternating path in the tight graph from `row` to `target_col`,
// avoiding locked rows/cols, and flips it. Used to test whether a pairing
// can be forced while keeping an optimal perfect matching. Columns >= n are
// padding; a row locked as unassigned may still move between them.
struct TightGraph {
  enum : char { free_row = 0, locked = 1, unassigned = 2 };
  std::size_t k, n;
  std::vector<char> tight;  // k*k
  std::vector<long> row_col, col_row;
  std::vector<char> row_locked, col_locked, seen;

  bool augment(std::size_t row, std::size_t target_col) {
    for (std::size_t c = 0; c < k; ++c) {
      if (!tight[row * k + c] || col_locked[c] || seen[c]) continue;
      if (row_locked[row] == unassigned && c < n) continue;
      seen[c] = 1;
      if (c == target_col) {
        row_col[row] = static_cast<long>(c);
        col_row[c] = static_cast<long>(row);
        return true;
      }
      const auto next = static_cast<std::size_t>(col_row[c]);
      if (row_locked[next] == locked) continue;
      if (augment(next, target_col)) {
        row_col[row] = static_cast<long>(c);
        col_row[c] = static_cast<long>(row);
        return true;
      }
    }
    return false;
  }
};

}  // namespace detail

/// Minimum-cost one-to-one assignment of size min(rows, cols). Among optimal
/// assignments the one whose row-sorted pair list is lexicographically
/// smallest is returned. Negative entries are shifted internally.
inline Assignment hungarian(const CostMatrix& cost) {
  const std::size_t m = cost.rows(), n = cost.cols();
  require(m > 0 && n > 0, ErrorKind::empty_input, "empty cost matrix");
  double lo = std::numeric_limits<double>::infinity(), scale = 1.0;
  for (double v : cost.data()) {
    require(std::isfinite(v), ErrorKind::invalid_argument, "non-finite cost entry");
    lo = std::min(lo, v);
    scale = std::max(scale, std::abs(v));
  }
  const double shift = lo < 0 ? -lo : 0.0;
  const std::size_t k = std::max(m, n);
  auto a = [&](std::size_t i, std::size_t j) {  // padded, 0-based
    return (i < m && j < n) ? cost(i, j) + shift : 0.0;
  };

  // 1-based potentials; p[j] = row matched to column j.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(k + 1, 0.0), v(k + 1, 0.0), minv(k + 1);
  std::vector<std::size_t> p(k + 1, 0), way(k + 1, 0);
  std::vector<char> used(k + 1);
  for (std::size_t i = 1; i <= k; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= k; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= k; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  // Canonicalize ties: walk rows in order and lock each to its smallest
  // column that still admits an optimal perfect matching on the tight graph.
  detail::TightGraph g{k, n, std::vector<char>(k * k), std::vector<long>(k), std::vector<long>(k),
                       std::vector<char>(k, 0), std::vector<char>(k, 0), std::vector<char>(k, 0)};
  const double tol = 1e-9 * (scale + shift);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) g.tight[i * k + j] = (a(i, j) - u[i + 1] - v[j + 1]) <= tol;
  for (std::size_t j = 1; j <= k; ++j) {
    g.row_col[p[j] - 1] = static_cast<long>(j - 1);
    g.col_row[j - 1] = static_cast<long>(p[j] - 1);
    g.tight[(p[j] - 1) * k + (j - 1)] = 1;
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      if (g.col_locked[c] || !g.tight[i * k + c]) continue;
      if (g.row_col[i] == static_cast<long>(c)) break;
      if (c >= n && g.row_col[i] >= static_cast<long>(n)) break;  // already unassigned
      // Tentatively give c to row i; the displaced row must reach i's old column.
      const auto saved_row_col = g.row_col;
      const auto saved_col_row = g.col_row;
      const auto old_col = static_cast<std::size_t>(g.row_col[i]);
      const auto displaced = static_cast<std::size_t>(g.col_row[c]);
      g.row_col[i] = static_cast<long>(c);
      g.col_row[c] = static_cast<long>(i);
      const char own_lock = g.row_locked[i];
      g.row_locked[i] = detail::TightGraph::locked;
      g.col_locked[c] = 1;
      std::fill(g.seen.begin(), g.seen.end(), 0);
      const bool ok = g.augment(displaced, old_col);
      g.row_locked[i] = own_lock;
      g.col_locked[c] = 0;
      if (ok) break;
      g.row_col = saved_row_col;
      g.col_row = saved_col_row;
    }
    if (g.row_col[i] < static_cast<long>(n)) {
      g.row_locked[i] = detail::TightGraph::locked;
      g.col_locked[static_cast<std::size_t>(g.row_col[i])] = 1;
    } else {
      g.row_locked[i] = detail::TightGraph::unassigned;
    }
  }

  Assignment out;
  for (std::size_t i = 0; i < m; ++i) {
    const auto c = static_cast<std::size_t>(g.row_col[i]);
    if (c < n) {
      out.pairs.emplace_back(i, c);
      out.cost += cost(i, c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost builders

inline double l1_distance(const Box& a, const Box& b) {
  return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) + std::abs(a.w - b.w) + std::abs(a.h - b.h);
}

inline Box box_at(const Tensor& boxes, std::size_t frame, std::size_t query) {
  const std::size_t nq = boxes.extent(1);
  const double* b = boxes.data().data() + (frame * nq + query) * 4;
  return {b[0], b[1], b[2], b[3]};
}

namespace detail {
inline double pair_cost(const Box& pred, const Box& gt, double confidence, const LossWeights& w, BoxLoss kind) {
  const double overlap = kind == BoxLoss::giou ? giou(pred, gt) : iou(pred, gt);
  return w.l1 * l1_distance(pred, gt) + w.iou * (1.0 - overlap) + w.cls * (1.0 - confidence);
}

inline void check_train_inputs(const Tensor& boxes, const Tensor& probs, const GroundTruth& gt) {
  require(boxes.rank() == 3 && boxes.extent(2) == 4, ErrorKind::shape_mismatch, "boxes must be [N_v x N_q x 4]");
  require(probs.rank() == 3 && probs.extent(0) == boxes.extent(0) && probs.extent(1) == boxes.extent(1),
          ErrorKind::shape_mismatch, "class distributions must be [N_v x N_q x S]");
  require(!gt.targets.empty(), ErrorKind::empty_input, "ground truth without targets");
  require(gt.targets.size() <= boxes.extent(1), ErrorKind::invalid_argument, "more targets than queries");
  validate(gt.segment);
  require(static_cast<std::size_t>(gt.segment.end) < boxes.extent(0), ErrorKind::invalid_segment,
          "ground-truth segment beyond video length");
  for (const auto& t : gt.targets) {
    require(t.slot + 1 < probs.extent(2), ErrorKind::invalid_argument, "target token slot outside text length");
    require(t.boxes.size() == static_cast<std::size_t>(gt.segment.length()), ErrorKind::shape_mismatch,
            "target track does not cover the segment");
  }
}
}  // namespace detail

/// Tube-level matching cost [N_q x N_q*]: per-frame pair costs averaged over
/// the ground-truth segment.
inline CostMatrix build_train_cost(const Tensor& boxes, const Tensor& probs, const GroundTruth& gt,
                                   const LossWeights& w = {}, BoxLoss kind = BoxLoss::giou) {
  detail::check_train_inputs(boxes, probs, gt);
  const std::size_t nq = boxes.extent(1), slots = probs.extent(2);
  CostMatrix c(nq, gt.targets.size());
  const double frames = gt.segment.length();
  for (std::size_t j = 0; j < nq; ++j) {
    for (std::size_t t = 0; t < gt.targets.size(); ++t) {
      double sum = 0.0;
      for (int f = gt.segment.start; f <= gt.segment.end; ++f) {
        const auto fi = static_cast<std::size_t>(f);
        sum += detail::pair_cost(box_at(boxes, fi, j), gt.box(t, f), probs[(fi * nq + j) * slots + gt.targets[t].slot],
                                 w, kind);
      }
      c(j, t) = sum / frames;
    }
  }
  return c;
}

/// Single-frame matching cost, for per-frame matching.
inline CostMatrix build_train_cost_frame(const Tensor& boxes, const Tensor& probs, const GroundTruth& gt, int frame,
                                         const LossWeights& w = {}, BoxLoss kind = BoxLoss::giou) {
  detail::check_train_inputs(boxes, probs, gt);
  require(gt.segment.contains(frame), ErrorKind::invalid_argument, "frame outside ground-truth segment");
  const std::size_t nq = boxes.extent(1), slots = probs.extent(2);
  const auto fi = static_cast<std::size_t>(frame);
  CostMatrix c(nq, gt.targets.size());
  for (std::size_t j = 0; j < nq; ++j)
    for (std::size_t t = 0; t < gt.targets.size(); ++t)
      c(j, t) = detail::pair_cost(box_at(boxes, fi, j), gt.box(t, frame),
                                  probs[(fi * nq + j) * slots + gt.targets[t].slot], w, kind);
  return c;
}

/// Frame-to-frame linking cost [N_q x N_q]:
/// (1 - IoU) + 0.5 * L1 distance between class distributions.
inline CostMatrix build_link_cost(const Tensor& boxes, const Tensor& probs, std::size_t frame_a, std::size_t frame_b) {
  require(boxes.rank() == 3 && probs.rank() == 3 && boxes.extent(1) == probs.extent(1), ErrorKind::shape_mismatch,
          "linking inputs must be [N_v x N_q x ...]");
  const std::size_t nq = boxes.extent(1), slots = probs.extent(2);
  CostMatrix c(nq, nq);
  for (std::size_t a = 0; a < nq; ++a) {
    const Box ba = box_at(boxes, frame_a, a);
    const double* ga = probs.data().data() + (frame_a * nq + a) * slots;
    for (std::size_t b = 0; b < nq; ++b) {
      const double* gb = probs.data().data() + (frame_b * nq + b) * slots;
      double l1 = 0.0;
      for (std::size_t s = 0; s < slots; ++s) l1 += std::abs(ga[s] - gb[s]);
      c(a, b) = (1.0 - iou(ba, box_at(boxes, frame_b, b))) + 0.5 * l1;
    }
  }
  return c;
}

}  // namespace omnitube
