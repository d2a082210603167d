#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "lmix/error.hpp"
#include "lmix/geometry.hpp"

// Vertex layout representation: a layout becomes an ordered sequence of
// start/end vertices. Element e_i owns vertex ids 2i (start, top-left corner)
// and 2i+1 (end, bottom-right corner); its category c maps to vertex
// categories 2c (start) and 2c+1 (end). Underlays group the elements they
// enclose, and a group's vertices bracket all of its descendants.

namespace lmix {

struct Element {
  int category = 0;
  Box box;
};

using Layout = std::vector<Element>;

/// One node of the grouping forest; `value` is an element index. Only
/// underlay elements ever carry children.
struct IdTree {
  int value = -1;
  std::vector<IdTree> children;
};

struct Vertex {
  int category = 0;  // even: start vertex of element category/2; odd: end
  double x = 0;
  double y = 0;
};

using VertexTensor = std::vector<Vertex>;

struct GroupingParams {
  int underlay_category = 2;
  double eps_underlay = 0.8;  // threshold for underlay-in-underlay nesting
  double eps_non = 0.5;       // threshold for content sitting on an underlay
  OverlapMode mode = OverlapMode::Enclosure;
};

/// Builds the grouping forest. Underlays are sorted ascending by area
/// (stable, so equal areas keep element-index order); each smaller underlay
/// attaches to the first larger underlay whose containment score exceeds
/// eps_underlay, then each non-underlay attaches to the first underlay
/// (ascending area) whose score exceeds eps_non. A node attaches at most
/// once; everything unattached becomes a root, in element-index order.
inline std::vector<IdTree> group_element_ids(std::span<const int> categories,
                                             std::span<const Corners> corners,
                                             const GroupingParams& params = {}) {
  if (categories.size() != corners.size()) {
    throw ValidationError("group_element_ids: categories/corners length mismatch");
  }
  const int n = static_cast<int>(categories.size());

  std::vector<int> underlays;
  std::vector<int> others;
  for (int i = 0; i < n; ++i) {
    (categories[i] == params.underlay_category ? underlays : others).push_back(i);
  }

  std::vector<std::vector<int>> kids(n);
  std::vector<char> attached(n, 0);

  if (!underlays.empty()) {
    std::stable_sort(underlays.begin(), underlays.end(), [&](int a, int b) {
      return box_area(corners[a]) < box_area(corners[b]);
    });

    // Underlay nesting: outer loop ascending area, inner over smaller ones.
    // The pair (pi, pi) would always score 1 against itself; skipping it is
    // the zeroed diagonal.
    for (size_t pi = 0; pi < underlays.size(); ++pi) {
      for (size_t pj = 0; pj < pi; ++pj) {
        const int parent = underlays[pi];
        const int child = underlays[pj];
        if (attached[child]) continue;
        if (overlap_score(corners[parent], corners[child], params.mode) >
            params.eps_underlay) {
          kids[parent].push_back(child);
          attached[child] = 1;
        }
      }
    }
    for (size_t pi = 0; pi < underlays.size(); ++pi) {
      for (int child : others) {
        if (attached[child]) continue;
        if (overlap_score(corners[underlays[pi]], corners[child], params.mode) >
            params.eps_non) {
          kids[underlays[pi]].push_back(child);
          attached[child] = 1;
        }
      }
    }
  }

  auto build = [&](auto&& self, int i) -> IdTree {
    IdTree t;
    t.value = i;
    t.children.reserve(kids[i].size());
    for (int c : kids[i]) t.children.push_back(self(self, c));
    return t;
  };

  std::vector<IdTree> forest;
  for (int i = 0; i < n; ++i) {
    if (!attached[i]) forest.push_back(build(build, i));
  }
  return forest;
}

/// W[i] = 0.01*x[i] + y[i]: reading-order weight, dominated by y with x as
/// the tiebreaker within a row.
inline std::vector<double> sorting_weights(std::span<const double> xs,
                                           std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw ValidationError("sorting_weights: coordinate list length mismatch");
  }
  std::vector<double> w(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) w[i] = 0.01 * xs[i] + ys[i];
  return w;
}

/// Orders the 2n vertex ids. Each tree at a level contributes one contiguous
/// block [start, arranged children..., end]; blocks are sorted by the start
/// vertex weight (ties by vertex id), recursively at every level. Leaf
/// blocks are just [start, end], so a leaf's end vertex always directly
/// follows its start vertex.
inline std::vector<int> arrange_vertex_ids(const std::vector<IdTree>& forest,
                                           std::span<const double> weights) {
  struct Entry {
    int start_id;
    std::vector<int> block;
  };
  std::vector<Entry> entries;
  entries.reserve(forest.size());
  for (const IdTree& t : forest) {
    const int start = 2 * t.value;
    const int end = start + 1;
    if (static_cast<size_t>(end) >= weights.size()) {
      throw ValidationError("arrange_vertex_ids: weight list too short");
    }
    Entry e;
    e.start_id = start;
    e.block.push_back(start);
    if (!t.children.empty()) {
      std::vector<int> inner = arrange_vertex_ids(t.children, weights);
      e.block.insert(e.block.end(), inner.begin(), inner.end());
    }
    e.block.push_back(end);
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), [&](const Entry& a, const Entry& b) {
    const double wa = weights[a.start_id];
    const double wb = weights[b.start_id];
    if (wa != wb) return wa < wb;
    return a.start_id < b.start_id;
  });
  std::vector<int> out;
  for (const Entry& e : entries) {
    out.insert(out.end(), e.block.begin(), e.block.end());
  }
  return out;
}

/// Layout -> start/end vertex tensor.
inline VertexTensor encode_vlr(const Layout& layout,
                               const GroupingParams& params = {}) {
  const int n = static_cast<int>(layout.size());
  if (n == 0) return {};

  std::vector<int> categories(n);
  std::vector<Corners> corners(n);
  for (int i = 0; i < n; ++i) {
    categories[i] = layout[i].category;
    corners[i] = cxcywh_to_xyxy(layout[i].box);
  }

  std::vector<int> vertex_cat(2 * n);
  std::vector<double> xs(2 * n);
  std::vector<double> ys(2 * n);
  for (int i = 0; i < n; ++i) {
    vertex_cat[2 * i] = 2 * categories[i];
    vertex_cat[2 * i + 1] = 2 * categories[i] + 1;
    xs[2 * i] = corners[i].xl;
    xs[2 * i + 1] = corners[i].xr;
    ys[2 * i] = corners[i].yt;
    ys[2 * i + 1] = corners[i].yb;
  }

  const std::vector<IdTree> forest = group_element_ids(categories, corners, params);
  const std::vector<double> weights = sorting_weights(xs, ys);
  const std::vector<int> order = arrange_vertex_ids(forest, weights);

  VertexTensor v;
  v.reserve(order.size());
  for (int id : order) v.push_back({vertex_cat[id], xs[id], ys[id]});
  return v;
}

/// Structural check shared by decode_vlr and the tokenizer: vertices must
/// form properly nested start/end pairs per category.
inline void validate_vertex_tensor(const VertexTensor& v) {
  if (v.size() % 2 != 0) {
    throw ValidationError("vertex tensor: odd number of vertices");
  }
  std::vector<int> open;
  for (const Vertex& vx : v) {
    if (vx.category < 0) throw ValidationError("vertex tensor: negative category");
    if (vx.category % 2 == 0) {
      open.push_back(vx.category / 2);
    } else {
      const int cat = (vx.category - 1) / 2;
      if (open.empty() || open.back() != cat) {
        throw ValidationError("vertex tensor: crossed or unbalanced start/end pair");
      }
      open.pop_back();
    }
  }
  if (!open.empty()) {
    throw ValidationError("vertex tensor: unclosed start vertex");
  }
}

/// Vertex tensor -> layout. Start vertices open an element, the matching end
/// vertex (innermost open start of the same category) closes it. Exact
/// inverse of encode_vlr up to element order; the element multiset is
/// reproduced as-is.
inline Layout decode_vlr(const VertexTensor& v) {
  if (v.size() % 2 != 0) {
    throw ValidationError("decode_vlr: odd number of vertices");
  }
  struct Open {
    int category;
    double x, y;
  };
  std::vector<Open> open;
  Layout out;
  out.reserve(v.size() / 2);
  for (const Vertex& vx : v) {
    if (vx.category < 0) throw ValidationError("decode_vlr: negative category");
    if (vx.category % 2 == 0) {
      open.push_back({vx.category / 2, vx.x, vx.y});
    } else {
      const int cat = (vx.category - 1) / 2;
      if (open.empty() || open.back().category != cat) {
        throw ValidationError("decode_vlr: crossed or unbalanced start/end pair");
      }
      const Corners c{open.back().x, open.back().y, vx.x, vx.y};
      open.pop_back();
      out.push_back({cat, xyxy_to_cxcywh(c)});
    }
  }
  if (!open.empty()) {
    throw ValidationError("decode_vlr: unclosed start vertex");
  }
  return out;
}

/// Vertex categories of a tensor, in order (the LCS input).
inline std::vector<int> vertex_categories(const VertexTensor& v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (const Vertex& vx : v) out.push_back(vx.category);
  return out;
}

}  // namespace lmix
