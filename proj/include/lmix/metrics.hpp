#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lmix/error.hpp"
#include "lmix/geometry.hpp"
#include "lmix/image.hpp"
#include "lmix/vlr.hpp"

// The seven layout quality metrics. Graphic metrics (ove, ali, und_l, und_s)
// need only the boxes; content metrics additionally need a saliency map
// (uti, occ) or the background image (rea). Box coverage is rasterized over
// half-open integer pixel ranges [floor(xl), ceil(xr)) so results do not
// depend on summation order.

namespace lmix {

/// Salient-object probability per pixel, values in [0,1].
using SaliencyMap = FloatMap;

struct MetricReport {
  double ove = 0;    // pairwise overlap among non-underlay elements (lower better)
  double ali = 0;    // nearest alignment-line distance, canvas-normalized (lower better)
  double und_l = 0;  // loose underlay effectiveness (higher better)
  double und_s = 0;  // strict underlay effectiveness (higher better)
  double uti = 0;    // fraction of non-salient space used (higher better)
  double occ = 0;    // mean saliency under elements (lower better)
  double rea = 0;    // mean gradient under text elements (lower better)

  // denominators actually seen, so aggregates can be recomputed
  int64_t ove_pairs = 0;
  int64_t ali_elements = 0;
  int64_t underlays = 0;
  int64_t covered_pixels = 0;
  int64_t low_saliency_pixels = 0;
  int64_t text_pixels = 0;
  int64_t elements = 0;
};

namespace detail {

struct PixelRect {
  int x0, y0, x1, y1;  // half-open
  bool empty() const { return x0 >= x1 || y0 >= y1; }
};

inline PixelRect raster_rect(const Corners& c, const Canvas& canvas) {
  PixelRect r;
  r.x0 = std::max(0, int(std::floor(c.xl)));
  r.y0 = std::max(0, int(std::floor(c.yt)));
  r.x1 = std::min(canvas.width, int(std::ceil(c.xr)));
  r.y1 = std::min(canvas.height, int(std::ceil(c.yb)));
  return r;
}

/// Sorted reduction: the result depends only on the multiset of
/// contributions, not on element order, so reordering a layout (e.g. through
/// an encode/decode round trip) reproduces metric values bit for bit.
inline double sorted_mean(std::vector<double>& values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  return sum / double(values.size());
}

}  // namespace detail

/// Mean over unordered pairs of non-underlay elements of
/// intersection / min(area, area); 0 with fewer than two such elements.
inline double compute_ove(const Layout& layout, int underlay_category,
                          int64_t* pair_count = nullptr) {
  std::vector<Corners> boxes;
  for (const Element& e : layout) {
    if (e.category != underlay_category) boxes.push_back(cxcywh_to_xyxy(e.box));
  }
  std::vector<double> overlaps;
  for (size_t i = 0; i < boxes.size(); ++i) {
    for (size_t j = i + 1; j < boxes.size(); ++j) {
      const double smaller = std::min(box_area(boxes[i]), box_area(boxes[j]));
      overlaps.push_back(smaller > 0 ? intersection_area(boxes[i], boxes[j]) / smaller
                                     : 0.0);
    }
  }
  if (pair_count) *pair_count = int64_t(overlaps.size());
  return detail::sorted_mean(overlaps);
}

/// Mean over elements of the distance to the nearest alignment line of any
/// other element (left, x-center, right edges normalized by canvas width;
/// top, y-center, bottom by height). 0 with one element or fewer.
inline double compute_ali(const Layout& layout, const Canvas& canvas,
                          int64_t* element_count = nullptr) {
  const size_t n = layout.size();
  if (element_count) *element_count = n > 1 ? int64_t(n) : 0;
  if (n <= 1) return 0.0;

  struct Lines {
    double x[3], y[3];
  };
  std::vector<Lines> lines(n);
  for (size_t i = 0; i < n; ++i) {
    const Corners c = cxcywh_to_xyxy(layout[i].box);
    lines[i] = {{c.xl, (c.xl + c.xr) / 2, c.xr}, {c.yt, (c.yt + c.yb) / 2, c.yb}};
  }
  std::vector<double> nearest(n);
  for (size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int a = 0; a < 3; ++a) {
        best = std::min(best, std::abs(lines[i].x[a] - lines[j].x[a]) / canvas.width);
        best = std::min(best, std::abs(lines[i].y[a] - lines[j].y[a]) / canvas.height);
      }
    }
    nearest[i] = best;
  }
  return detail::sorted_mean(nearest);
}

struct UnderlayScore {
  double loose = 0;
  double strict = 0;
  int64_t underlays = 0;
};

/// Per underlay: loose = best containment of any non-underlay element,
/// strict = 1 iff some element is fully contained; averaged over underlays.
/// strictness relaxes the full-containment test by that ratio.
inline UnderlayScore compute_underlay(const Layout& layout, int underlay_category,
                                      double strictness = 0.0) {
  UnderlayScore out;
  std::vector<double> loose;
  std::vector<double> strict;
  for (const Element& u : layout) {
    if (u.category != underlay_category) continue;
    const Corners uc = cxcywh_to_xyxy(u.box);
    double best = 0;
    for (const Element& e : layout) {
      if (e.category == underlay_category) continue;
      best = std::max(best, enclosure_ratio(uc, cxcywh_to_xyxy(e.box)));
    }
    loose.push_back(best);
    strict.push_back(best >= 1.0 - strictness ? 1.0 : 0.0);
    ++out.underlays;
  }
  out.loose = detail::sorted_mean(loose);
  out.strict = detail::sorted_mean(strict);
  return out;
}

struct ContentScore {
  double uti = 0;
  double occ = 0;
  int64_t covered_pixels = 0;
  int64_t low_saliency_pixels = 0;
};

/// occ = mean saliency over pixels covered by any element; uti = fraction of
/// low-saliency pixels (< threshold) that elements cover.
inline ContentScore compute_content(const Layout& layout, const SaliencyMap& saliency,
                                    const Canvas& canvas,
                                    double saliency_threshold = 0.5) {
  if (saliency.width != canvas.width || saliency.height != canvas.height) {
    throw ValidationError("compute_content: saliency map does not match canvas");
  }
  ContentScore out;
  std::vector<uint8_t> covered(size_t(canvas.width) * canvas.height, 0);
  for (const Element& e : layout) {
    const detail::PixelRect r = detail::raster_rect(cxcywh_to_xyxy(e.box), canvas);
    for (int y = r.y0; y < r.y1; ++y) {
      std::fill(covered.begin() + size_t(y) * canvas.width + r.x0,
                covered.begin() + size_t(y) * canvas.width + r.x1, uint8_t(1));
    }
  }
  double saliency_sum = 0;
  int64_t covered_count = 0;
  int64_t low_total = 0;
  int64_t low_covered = 0;
  for (size_t i = 0; i < covered.size(); ++i) {
    const float s = saliency.values[i];
    if (covered[i]) {
      saliency_sum += s;
      ++covered_count;
    }
    if (s < saliency_threshold) {
      ++low_total;
      if (covered[i]) ++low_covered;
    }
  }
  out.covered_pixels = covered_count;
  out.low_saliency_pixels = low_total;
  out.occ = covered_count > 0 ? saliency_sum / double(covered_count) : 0.0;
  out.uti = low_total > 0 ? double(low_covered) / double(low_total) : 0.0;
  return out;
}

/// Mean central-difference gradient magnitude of luminance over pixels under
/// text elements; 0 when no text element covers any pixel.
inline double compute_rea(const Layout& layout, const Image& image, int text_category,
                          const Canvas& canvas, int64_t* text_pixel_count = nullptr) {
  if (image.width != canvas.width || image.height != canvas.height) {
    throw ValidationError("compute_rea: image does not match canvas");
  }
  std::vector<uint8_t> covered(size_t(canvas.width) * canvas.height, 0);
  bool any = false;
  for (const Element& e : layout) {
    if (e.category != text_category) continue;
    const detail::PixelRect r = detail::raster_rect(cxcywh_to_xyxy(e.box), canvas);
    for (int y = r.y0; y < r.y1; ++y) {
      std::fill(covered.begin() + size_t(y) * canvas.width + r.x0,
                covered.begin() + size_t(y) * canvas.width + r.x1, uint8_t(1));
    }
    any = true;
  }
  if (text_pixel_count) *text_pixel_count = 0;
  if (!any) return 0.0;

  const FloatMap lum = luminance(image);
  const int w = canvas.width;
  const int h = canvas.height;
  double sum = 0;
  int64_t count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!covered[size_t(y) * w + x]) continue;
      const float gx =
          0.5f * (lum.at(std::min(x + 1, w - 1), y) - lum.at(std::max(x - 1, 0), y));
      const float gy =
          0.5f * (lum.at(x, std::min(y + 1, h - 1)) - lum.at(x, std::max(y - 1, 0)));
      sum += std::sqrt(double(gx) * gx + double(gy) * gy);
      ++count;
    }
  }
  if (text_pixel_count) *text_pixel_count = count;
  return count > 0 ? sum / double(count) : 0.0;
}

/// All seven metrics for one layout. Pass nullptr for maps that are not
/// available; the corresponding metrics report 0 with a zero count.
inline MetricReport evaluate_layout(const Layout& layout, const Canvas& canvas,
                                    int underlay_category, int text_category,
                                    const SaliencyMap* saliency = nullptr,
                                    const Image* image = nullptr,
                                    double saliency_threshold = 0.5) {
  MetricReport r;
  r.elements = int64_t(layout.size());
  r.ove = compute_ove(layout, underlay_category, &r.ove_pairs);
  r.ali = compute_ali(layout, canvas, &r.ali_elements);
  const UnderlayScore u = compute_underlay(layout, underlay_category);
  r.und_l = u.loose;
  r.und_s = u.strict;
  r.underlays = u.underlays;
  if (saliency) {
    const ContentScore c = compute_content(layout, *saliency, canvas, saliency_threshold);
    r.uti = c.uti;
    r.occ = c.occ;
    r.covered_pixels = c.covered_pixels;
    r.low_saliency_pixels = c.low_saliency_pixels;
  }
  if (image) {
    r.rea = compute_rea(layout, *image, text_category, canvas, &r.text_pixels);
  }
  return r;
}

}  // namespace lmix
