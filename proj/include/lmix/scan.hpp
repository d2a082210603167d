#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lmix/error.hpp"
#include "lmix/image.hpp"

// Patch selection over the p x p grid tiling the working image (16 px cells
// at p=14 on 224x224). Cells are addressed as (x, y) and stored row-major as
// id = y*p + x.

namespace lmix {

/// Per-pixel score of how suitable a location is for placing element
/// vertices; ingested from a file or approximated by heuristic_density.
using DensityMap = FloatMap;

/// Scores of the p*p grid cells, row-major.
struct PatchScores {
  int p = 14;
  std::vector<double> values;
};

/// The selected grid cells, as sorted row-major ids.
struct PatchIndexSet {
  int p = 14;
  std::vector<int> cells;

  int k() const { return static_cast<int>(cells.size()); }
  bool contains(int cell) const {
    return std::binary_search(cells.begin(), cells.end(), cell);
  }
};

/// Binary p x p mask, row-major.
struct PatchMask {
  int p = 14;
  std::vector<uint8_t> bits;

  bool test(int x, int y) const { return bits[size_t(y) * p + x] != 0; }
};

/// Mean-pools pixel densities into cell scores. Block edges partition the
/// map (exact blocks when dimensions divide by p).
inline PatchScores pool_patch_scores(const DensityMap& d, int p = 14) {
  if (d.empty()) throw ValidationError("pool_patch_scores: empty density map");
  if (p <= 0) throw ValidationError("pool_patch_scores: p must be positive");
  for (float v : d.values) {
    if (!std::isfinite(v)) {
      throw ValidationError("pool_patch_scores: non-finite density value");
    }
  }
  PatchScores out;
  out.p = p;
  out.values.assign(size_t(p) * p, 0.0);
  for (int cy = 0; cy < p; ++cy) {
    const int y0 = int(int64_t(cy) * d.height / p);
    const int y1 = int(int64_t(cy + 1) * d.height / p);
    for (int cx = 0; cx < p; ++cx) {
      const int x0 = int(int64_t(cx) * d.width / p);
      const int x1 = int(int64_t(cx + 1) * d.width / p);
      double sum = 0.0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) sum += d.at(x, y);
      }
      const int64_t count = int64_t(y1 - y0) * (x1 - x0);
      out.values[size_t(cy) * p + cx] = count > 0 ? sum / double(count) : 0.0;
    }
  }
  return out;
}

/// The k highest-scoring cells; equal scores resolve in row-major cell order.
inline PatchIndexSet select_topk(const PatchScores& scores, int k) {
  const int total = scores.p * scores.p;
  if (k < 1 || k > total) throw ValidationError("select_topk: k out of range");
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores.values[a] != scores.values[b]) return scores.values[a] > scores.values[b];
    return a < b;
  });
  PatchIndexSet out;
  out.p = scores.p;
  out.cells.assign(order.begin(), order.begin() + k);
  std::sort(out.cells.begin(), out.cells.end());
  return out;
}

inline PatchMask mask_from_indices(const PatchIndexSet& s) {
  if (s.p <= 0) throw ValidationError("mask_from_indices: p must be positive");
  PatchMask m;
  m.p = s.p;
  m.bits.assign(size_t(s.p) * s.p, 0);
  for (int cell : s.cells) {
    if (cell < 0 || cell >= s.p * s.p) {
      throw ValidationError("mask_from_indices: cell outside grid");
    }
    m.bits[cell] = 1;
  }
  return m;
}

inline PatchIndexSet indices_from_mask(const PatchMask& m) {
  PatchIndexSet s;
  s.p = m.p;
  for (int cell = 0; cell < m.p * m.p; ++cell) {
    if (m.bits[cell]) s.cells.push_back(cell);
  }
  return s;
}

/// Density fallback when no precomputed map exists: flat areas score high,
/// busy areas low. 1 - normalized local gradient energy of luminance,
/// box-smoothed; values in [0,1]. A constant image scores 1 everywhere.
inline DensityMap heuristic_density(const Image& img) {
  if (img.empty()) throw ValidationError("heuristic_density: zero-size image");
  const FloatMap lum = luminance(img);
  const int w = lum.width;
  const int h = lum.height;

  std::vector<float> energy(size_t(w) * h);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const float gx = 0.5f * (lum.at(xp, y) - lum.at(xm, y));
      const float gy = 0.5f * (lum.at(x, yp) - lum.at(x, ym));
      energy[size_t(y) * w + x] = gx * gx + gy * gy;
    }
  }

  // 5x5 box smoothing, separable with clamped borders.
  const int radius = 2;
  std::vector<float> tmp(energy.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float sum = 0;
      for (int dx = -radius; dx <= radius; ++dx) {
        sum += energy[size_t(y) * w + std::clamp(x + dx, 0, w - 1)];
      }
      tmp[size_t(y) * w + x] = sum / (2 * radius + 1);
    }
  }
  std::vector<float> smooth(energy.size());
  float max_val = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float sum = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        sum += tmp[size_t(std::clamp(y + dy, 0, h - 1)) * w + x];
      }
      const float v = sum / (2 * radius + 1);
      smooth[size_t(y) * w + x] = v;
      max_val = std::max(max_val, v);
    }
  }

  DensityMap out;
  out.width = w;
  out.height = h;
  out.values.resize(smooth.size());
  if (max_val <= 0) {
    std::fill(out.values.begin(), out.values.end(), 1.0f);
  } else {
    for (size_t i = 0; i < smooth.size(); ++i) {
      out.values[i] = 1.0f - smooth[i] / max_val;
    }
  }
  return out;
}

}  // namespace lmix
