#pragma once

// Box and segment primitives shared by the decoders, losses, tube builder and
// evaluation code. Boxes are normalized to [0,1] image units.

#include <algorithm>
#include <cmath>
#include <string>

#include "omnitube/error.hpp"

namespace omnitube {

/// Canonical box form: center, width, height.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Axis-aligned corner form; only used as a conversion target.
struct CornerBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const CornerBox&, const CornerBox&) = default;

  double area() const { return (x1 - x0) * (y1 - y0); }
};

/// Inclusive integer frame interval [start, end].
struct Segment {
  int start = 0;
  int end = 0;
  friend bool operator==(const Segment&, const Segment&) = default;

  int length() const { return end - start + 1; }
  bool contains(int frame) const { return frame >= start && frame <= end; }
};

inline void validate(const Box& b) {
  if (!(std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) && std::isfinite(b.h)))
    throw Error(ErrorKind::invalid_box, "non-finite box coordinate");
  if (b.w < 0 || b.h < 0) throw Error(ErrorKind::invalid_box, "negative width or height");
}

inline void validate(const CornerBox& b) {
  if (!(std::isfinite(b.x0) && std::isfinite(b.y0) && std::isfinite(b.x1) && std::isfinite(b.y1)))
    throw Error(ErrorKind::invalid_box, "non-finite box coordinate");
  if (b.x1 < b.x0 || b.y1 < b.y0) throw Error(ErrorKind::invalid_box, "corner box with x1<x0 or y1<y0");
}

inline void validate(const Segment& s) {
  if (s.start < 0 || s.end < s.start)
    throw Error(ErrorKind::invalid_segment,
                "segment [" + std::to_string(s.start) + "," + std::to_string(s.end) + "]");
}

inline CornerBox to_corners(const Box& b) {
  validate(b);
  return {b.cx - 0.5 * b.w, b.cy - 0.5 * b.h, b.cx + 0.5 * b.w, b.cy + 0.5 * b.h};
}

inline Box to_center(const CornerBox& c) {
  validate(c);
  return {0.5 * (c.x0 + c.x1), 0.5 * (c.y0 + c.y1), c.x1 - c.x0, c.y1 - c.y0};
}

namespace detail {

struct Overlap {
  double inter = 0;
  double uni = 0;
  double hull = 0;
};

inline Overlap overlap(const CornerBox& a, const CornerBox& b) {
  const double iw = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double ih = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double cw = std::max(a.x1, b.x1) - std::min(a.x0, b.x0);
  const double ch = std::max(a.y1, b.y1) - std::min(a.y0, b.y0);
  Overlap o;
  o.inter = iw * ih;
  o.uni = a.area() + b.area() - o.inter;
  o.hull = cw * ch;
  return o;
}

inline double iou_from(const Overlap& o, bool identical) {
  // zero union only happens for two zero-area boxes
  if (o.uni <= 0) return identical ? 1.0 : 0.0;
  return o.inter / o.uni;
}

}  // namespace detail

inline double iou(const CornerBox& a, const CornerBox& b) {
  validate(a);
  validate(b);
  return detail::iou_from(detail::overlap(a, b), a == b);
}

inline double iou(const Box& a, const Box& b) { return iou(to_corners(a), to_corners(b)); }

/// Generalized IoU: iou - (hull - union) / hull. Falls back to iou when the
/// enclosing hull has zero area.
inline double giou(const CornerBox& a, const CornerBox& b) {
  validate(a);
  validate(b);
  const auto o = detail::overlap(a, b);
  const double base = detail::iou_from(o, a == b);
  if (o.hull <= 0) return base;
  return base - (o.hull - o.uni) / o.hull;
}

inline double giou(const Box& a, const Box& b) { return giou(to_corners(a), to_corners(b)); }

inline double tiou(const Segment& a, const Segment& b) {
  validate(a);
  validate(b);
  const int inter = std::max(0, std::min(a.end, b.end) - std::max(a.start, b.start) + 1);
  const int uni = a.length() + b.length() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace omnitube
