#pragma once

#include <algorithm>

#include "lmix/error.hpp"

namespace lmix {

/// Axis-aligned box given by center and extents, in canvas pixels.
struct Box {
  double cx = 0;
  double cy = 0;
  double w = 0;
  double h = 0;
};

/// The same box as its top-left / bottom-right corners.
struct Corners {
  double xl = 0;
  double yt = 0;
  double xr = 0;
  double yb = 0;
};

/// Poster coordinate frame; all layout coordinates live in [0,width]x[0,height].
struct Canvas {
  int width = 224;
  int height = 224;
};

inline Corners cxcywh_to_xyxy(const Box& b) noexcept {
  return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

inline Box xyxy_to_cxcywh(const Corners& c) {
  if (c.xl > c.xr || c.yt > c.yb) {
    throw ValidationError("xyxy_to_cxcywh: inverted corners");
  }
  return {(c.xl + c.xr) / 2.0, (c.yt + c.yb) / 2.0, c.xr - c.xl, c.yb - c.yt};
}

inline double box_area(const Corners& c) noexcept {
  return (c.xr - c.xl) * (c.yb - c.yt);
}

inline double intersection_area(const Corners& a, const Corners& b) noexcept {
  const double w = std::min(a.xr, b.xr) - std::max(a.xl, b.xl);
  const double h = std::min(a.yb, b.yb) - std::max(a.yt, b.yt);
  return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

/// Fraction of `inner` covered by `outer`; 1 iff inner is fully contained.
/// Degenerate inner boxes score 0 by convention.
inline double enclosure_ratio(const Corners& outer, const Corners& inner) noexcept {
  const double a = box_area(inner);
  return a > 0.0 ? intersection_area(outer, inner) / a : 0.0;
}

inline double symmetric_iou(const Corners& a, const Corners& b) noexcept {
  const double inter = intersection_area(a, b);
  const double uni = box_area(a) + box_area(b) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// How underlay/content containment is scored during grouping. Enclosure is
/// the default; symmetric IoU is kept as a comparison mode (a small element
/// inside a large underlay scores near 0 under symmetric IoU, so thresholds
/// behave very differently).
enum class OverlapMode { Enclosure, SymmetricIou };

inline double overlap_score(const Corners& outer, const Corners& inner,
                            OverlapMode mode) noexcept {
  return mode == OverlapMode::Enclosure ? enclosure_ratio(outer, inner)
                                        : symmetric_iou(outer, inner);
}

}  // namespace lmix
