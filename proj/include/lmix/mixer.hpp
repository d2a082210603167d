#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "lmix/error.hpp"
#include "lmix/image.hpp"
#include "lmix/rng.hpp"
#include "lmix/scan.hpp"
#include "lmix/vlr.hpp"

// Synthesizes new image-layout pairs from two batch members: image patches
// are swapped wherever the first member's selected cells sit, and element
// vertices survive where both members' category sequences agree (longest
// common subsequence), relocated into connected free regions shared by both.

namespace lmix {

enum class PairStrategy { Pcc, Cosim, Random };

inline const char* to_string(PairStrategy s) {
  switch (s) {
    case PairStrategy::Pcc: return "pcc";
    case PairStrategy::Cosim: return "cosim";
    case PairStrategy::Random: return "random";
  }
  return "?";
}

inline PairStrategy pair_strategy_from_string(const std::string& s) {
  if (s == "pcc") return PairStrategy::Pcc;
  if (s == "cosim") return PairStrategy::Cosim;
  if (s == "random") return PairStrategy::Random;
  throw ValidationError("unknown pair strategy: " + s);
}

/// One batch member, fully prepared for mixing.
struct Sample {
  Image image;
  Layout layout;
  PatchIndexSet patches;
  VertexTensor vertices;  // cached encode_vlr(layout)
};

/// 4-connected component of the strict mask with at least three cells.
/// min/max are the bounding extremes in grid coordinates.
struct Region {
  std::vector<int> cells;  // sorted row-major ids
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
};

struct Provenance {
  int source_i = -1;
  int source_j = -1;
  uint64_t master_seed = 0;
  uint64_t pair_seed = 0;
  int ordinal = 0;
  std::vector<Region> regions;  // one per output element, aligned with layout
};

struct AugmentedSample {
  Image image;
  Layout layout;
  Provenance provenance;
};

struct PairSkip {
  int ordinal = 0;
  int source_i = -1;
  int source_j = -1;
  std::string reason;
};

struct AugmentResult {
  std::vector<AugmentedSample> samples;
  std::vector<PairSkip> skipped;
};

// ---------------------------------------------------------------------------
// pair selection

namespace detail {

inline int intersection_count(const PatchIndexSet& a, const PatchIndexSet& b) {
  int count = 0;
  size_t ia = 0, ib = 0;
  while (ia < a.cells.size() && ib < b.cells.size()) {
    if (a.cells[ia] < b.cells[ib]) {
      ++ia;
    } else if (a.cells[ia] > b.cells[ib]) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

/// Pearson correlation of the two flattened binary masks; 0 when either
/// vector is constant (all or none selected).
inline double pcc_similarity(const PatchIndexSet& a, const PatchIndexSet& b) {
  const double n = double(a.p) * a.p;
  const double ka = a.k();
  const double kb = b.k();
  const double var_a = ka * (n - ka);
  const double var_b = kb * (n - kb);
  if (var_a <= 0 || var_b <= 0) return 0.0;
  const double inter = intersection_count(a, b);
  return (n * inter - ka * kb) / std::sqrt(var_a * var_b);
}

inline double cosim_similarity(const PatchIndexSet& a, const PatchIndexSet& b) {
  const double ka = a.k();
  const double kb = b.k();
  if (ka <= 0 || kb <= 0) return 0.0;
  return intersection_count(a, b) / std::sqrt(ka * kb);
}

}  // namespace detail

/// Draws alpha ordered source pairs (i, j), i != j. The first member walks
/// the batch round-robin from a seeded offset; the partner is the most
/// similar other member (ties to the smaller index) or uniform for Random.
inline std::vector<std::pair<int, int>> select_pairs(
    const std::vector<PatchIndexSet>& sets, PairStrategy strategy, int alpha,
    uint64_t seed) {
  const int batch = static_cast<int>(sets.size());
  if (batch < 2) throw ValidationError("select_pairs: batch of size < 2");
  if (alpha < 1) throw ValidationError("select_pairs: alpha must be >= 1");

  Rng rng(seed);
  const int offset = static_cast<int>(rng.next_below(batch));

  // Best partner per distinct i, computed on demand.
  std::vector<int> best(batch, -1);
  auto best_partner = [&](int i) {
    if (best[i] >= 0) return best[i];
    double top = -2.0;
    int arg = -1;
    for (int j = 0; j < batch; ++j) {
      if (j == i) continue;
      const double s = strategy == PairStrategy::Pcc
                           ? detail::pcc_similarity(sets[i], sets[j])
                           : detail::cosim_similarity(sets[i], sets[j]);
      if (s > top) {
        top = s;
        arg = j;
      }
    }
    best[i] = arg;
    return arg;
  };

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(alpha);
  for (int t = 0; t < alpha; ++t) {
    const int i = (offset + t) % batch;
    int j;
    if (strategy == PairStrategy::Random) {
      j = static_cast<int>(rng.next_below(batch - 1));
      if (j >= i) ++j;
    } else {
      j = best_partner(i);
    }
    pairs.emplace_back(i, j);
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// image patch mixing

/// Composite: cells where m=1 carry img_j's pixels, everything else img_i's.
/// Pure byte copies, never blended.
inline Image mix_images(const Image& img_i, const Image& img_j, const PatchMask& m) {
  if (img_i.width != img_j.width || img_i.height != img_j.height ||
      img_i.channels != img_j.channels) {
    throw ValidationError("mix_images: image dimension mismatch");
  }
  if (img_i.empty()) throw ValidationError("mix_images: empty image");
  const int p = m.p;
  if (img_i.width % p != 0 || img_i.height % p != 0) {
    throw ValidationError("mix_images: image dimensions not divisible by grid");
  }
  const int pw = img_i.width / p;
  const int ph = img_i.height / p;
  const int ch = img_i.channels;

  Image out = img_i;
  for (int cy = 0; cy < p; ++cy) {
    for (int cx = 0; cx < p; ++cx) {
      if (!m.test(cx, cy)) continue;
      for (int y = cy * ph; y < (cy + 1) * ph; ++y) {
        std::memcpy(out.row(y) + size_t(cx) * pw * ch,
                    img_j.row(y) + size_t(cx) * pw * ch, size_t(pw) * ch);
      }
    }
  }
  return out;
}

/// Cells applicable in both sources.
inline PatchMask strict_mask(const PatchIndexSet& p_i, const PatchIndexSet& p_j) {
  if (p_i.p != p_j.p) throw ValidationError("strict_mask: grid size mismatch");
  PatchMask s;
  s.p = p_i.p;
  s.bits.assign(size_t(s.p) * s.p, 0);
  size_t ia = 0, ib = 0;
  while (ia < p_i.cells.size() && ib < p_j.cells.size()) {
    if (p_i.cells[ia] < p_j.cells[ib]) {
      ++ia;
    } else if (p_i.cells[ia] > p_j.cells[ib]) {
      ++ib;
    } else {
      s.bits[p_i.cells[ia]] = 1;
      ++ia;
      ++ib;
    }
  }
  return s;
}

/// 4-connected components of the set cells with at least three members,
/// ordered by their smallest row-major cell.
inline std::vector<Region> find_regions(const PatchMask& s) {
  const int p = s.p;
  std::vector<char> seen(size_t(p) * p, 0);
  std::vector<Region> out;
  std::vector<int> stack;
  for (int start = 0; start < p * p; ++start) {
    if (!s.bits[start] || seen[start]) continue;
    std::vector<int> cells;
    stack.assign(1, start);
    seen[start] = 1;
    while (!stack.empty()) {
      const int cell = stack.back();
      stack.pop_back();
      cells.push_back(cell);
      const int x = cell % p;
      const int y = cell / p;
      const int nbr[4] = {x > 0 ? cell - 1 : -1, x < p - 1 ? cell + 1 : -1,
                          y > 0 ? cell - p : -1, y < p - 1 ? cell + p : -1};
      for (int nb : nbr) {
        if (nb >= 0 && s.bits[nb] && !seen[nb]) {
          seen[nb] = 1;
          stack.push_back(nb);
        }
      }
    }
    if (cells.size() < 3) continue;
    std::sort(cells.begin(), cells.end());
    Region r;
    r.min_x = r.min_y = p;
    r.max_x = r.max_y = -1;
    for (int cell : cells) {
      const int x = cell % p;
      const int y = cell / p;
      r.min_x = std::min(r.min_x, x);
      r.max_x = std::max(r.max_x, x);
      r.min_y = std::min(r.min_y, y);
      r.max_y = std::max(r.max_y, y);
    }
    r.cells = std::move(cells);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// vertex mixing

/// LCS of two vertex-category sequences plus the index maps back into each
/// source, and the well-formed (start, end) pairs kept for mixing.
struct LcsMatch {
  std::vector<int> categories;              // the common subsequence
  std::vector<int> idx_i;                   // position of each symbol in c_i
  std::vector<int> idx_j;                   // position of each symbol in c_j
  std::vector<std::pair<int, int>> pairs;   // (start, end) positions into categories
};

/// Dynamic-programming LCS with a deterministic traceback (skips c_i symbols
/// first on ties), then a well-forming pass: each start symbol greedily
/// claims the first unclaimed end symbol of its category further right;
/// unpaired symbols are dropped.
inline LcsMatch lcs_categories(std::span<const int> c_i, std::span<const int> c_j) {
  const int n = static_cast<int>(c_i.size());
  const int m = static_cast<int>(c_j.size());
  LcsMatch out;
  if (n == 0 || m == 0) return out;

  std::vector<int> table(size_t(n + 1) * (m + 1), 0);
  auto cell = [&](int a, int b) -> int& { return table[size_t(a) * (m + 1) + b]; };
  for (int a = 1; a <= n; ++a) {
    for (int b = 1; b <= m; ++b) {
      cell(a, b) = c_i[a - 1] == c_j[b - 1]
                       ? cell(a - 1, b - 1) + 1
                       : std::max(cell(a - 1, b), cell(a, b - 1));
    }
  }

  int a = n, b = m;
  std::vector<std::pair<int, int>> taken;  // (index in c_i, index in c_j)
  while (a > 0 && b > 0) {
    if (c_i[a - 1] == c_j[b - 1]) {
      taken.emplace_back(a - 1, b - 1);
      --a;
      --b;
    } else if (cell(a - 1, b) >= cell(a, b - 1)) {
      --a;
    } else {
      --b;
    }
  }
  std::reverse(taken.begin(), taken.end());

  out.categories.reserve(taken.size());
  for (auto [ia, ib] : taken) {
    out.categories.push_back(c_i[ia]);
    out.idx_i.push_back(ia);
    out.idx_j.push_back(ib);
  }

  const int len = static_cast<int>(out.categories.size());
  std::vector<char> used(len, 0);
  for (int l = 0; l < len; ++l) {
    if (used[l] || out.categories[l] % 2 != 0) continue;
    for (int r = l + 1; r < len; ++r) {
      if (!used[r] && out.categories[r] == out.categories[l] + 1) {
        out.pairs.emplace_back(l, r);
        used[l] = used[r] = 1;
        break;
      }
    }
  }
  return out;
}

/// Moves a start/end vertex pair into region r: each keeps its offset within
/// its original patch, the start lands in the region's left-top patch and
/// the end in its right-bottom patch. A fix-up restores corner ordering and
/// a >= 1 px extent for degenerate placements, staying inside the region's
/// patch-aligned bounds.
inline std::pair<Vertex, Vertex> shift_pair(const Vertex& v_s, const Vertex& v_e,
                                            const Region& r, const Canvas& canvas,
                                            int p) {
  if (p <= 0 || canvas.width % p != 0 || canvas.height % p != 0) {
    throw ValidationError("shift_pair: canvas not divisible by grid size");
  }
  const double pw = double(canvas.width) / p;
  const double ph = double(canvas.height) / p;
  auto wrap = [](double v, double m) {
    double r = std::fmod(v, m);
    if (r < 0) r += m;
    return r;
  };
  Vertex s = v_s;
  Vertex e = v_e;
  s.x = wrap(v_s.x, pw) + r.min_x * pw;
  s.y = wrap(v_s.y, ph) + r.min_y * ph;
  e.x = wrap(v_e.x, pw) + r.max_x * pw;
  e.y = wrap(v_e.y, ph) + r.max_y * ph;

  auto fix = [](double& lo, double& hi, double bound) {
    if (lo > hi) std::swap(lo, hi);
    if (hi - lo < 1.0) {
      hi = lo + 1.0;
      if (hi > bound) {
        hi = bound;
        lo = bound - 1.0;
      }
    }
  };
  fix(s.x, e.x, (r.max_x + 1) * pw);
  fix(s.y, e.y, (r.max_y + 1) * ph);
  return {s, e};
}

/// The mixed vertex tensor plus the region assigned to each pair.
struct VertexMix {
  VertexTensor vertices;
  std::vector<Region> regions;
};

/// Combines matched vertices across the two sources: per surviving pair, the
/// start vertex comes from v_i and the end vertex from v_j, relocated into a
/// region of its own. Pair and region lists are shuffled independently
/// (pairs travel whole, a start never separates from its end); with m =
/// min(#pairs, #regions) the first m of each are zipped. Empty result means
/// the pair carries no usable augmentation.
inline VertexMix mix_vertices(const VertexTensor& v_i, const VertexTensor& v_j,
                              const LcsMatch& match,
                              const std::vector<Region>& regions,
                              const Canvas& canvas, int p, uint64_t seed) {
  VertexMix out;
  if (match.pairs.empty() || regions.empty()) return out;

  Rng rng(seed);
  std::vector<std::pair<int, int>> pairs = match.pairs;
  std::vector<Region> regs = regions;
  rng.shuffle(pairs);
  rng.shuffle(regs);

  const size_t m = std::min(pairs.size(), regs.size());
  out.vertices.reserve(2 * m);
  out.regions.reserve(m);
  for (size_t l = 0; l < m; ++l) {
    const auto [ls, le] = pairs[l];
    Vertex start = v_i[match.idx_i[ls]];
    Vertex end = v_j[match.idx_j[le]];
    auto [s, e] = shift_pair(start, end, regs[l], canvas, p);
    s.category = match.categories[ls];
    e.category = match.categories[le];
    out.vertices.push_back(s);
    out.vertices.push_back(e);
    out.regions.push_back(regs[l]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// batch orchestration

struct AugmentOptions {
  PairStrategy strategy = PairStrategy::Pcc;
  int alpha = 256;
  uint64_t master_seed = 0;
  int threads = 1;
  int p = 14;
  Canvas canvas{224, 224};
  GroupingParams grouping;
};

namespace detail {

inline std::optional<AugmentedSample> augment_one(
    const std::vector<Sample>& batch, int ordinal, int i, int j,
    const AugmentOptions& opt, std::string& skip_reason) {
  const Sample& a = batch[i];
  const Sample& b = batch[j];
  const uint64_t pair_seed = derive_seed(opt.master_seed, uint64_t(ordinal));

  const PatchMask strict = strict_mask(a.patches, b.patches);
  const std::vector<Region> regions = find_regions(strict);
  if (regions.empty()) {
    skip_reason = "no applicable region";
    return std::nullopt;
  }
  const LcsMatch match =
      lcs_categories(vertex_categories(a.vertices), vertex_categories(b.vertices));
  if (match.pairs.empty()) {
    skip_reason = "no common category pairs";
    return std::nullopt;
  }
  VertexMix mix =
      mix_vertices(a.vertices, b.vertices, match, regions, opt.canvas, opt.p, pair_seed);
  if (mix.vertices.empty()) {
    skip_reason = "empty vertex mix";
    return std::nullopt;
  }

  AugmentedSample sample;
  sample.image = mix_images(a.image, b.image, mask_from_indices(a.patches));
  sample.layout = decode_vlr(mix.vertices);
  sample.provenance = {i, j, opt.master_seed, pair_seed, ordinal, std::move(mix.regions)};
  return sample;
}

}  // namespace detail

/// Runs the full augmentation over one mini-batch: selects alpha source
/// pairs, mixes each, and reports per-pair skips. Output order and content
/// depend only on (batch, options), never on thread count.
inline AugmentResult augment_batch(const std::vector<Sample>& batch,
                                   const AugmentOptions& opt) {
  if (batch.size() < 2) throw ValidationError("augment_batch: batch of size < 2");
  for (const Sample& s : batch) {
    if (s.image.width != opt.canvas.width || s.image.height != opt.canvas.height) {
      throw ValidationError("augment_batch: sample image does not match canvas");
    }
    if (s.patches.p != opt.p) {
      throw ValidationError("augment_batch: patch grid does not match options");
    }
  }

  std::vector<PatchIndexSet> sets;
  sets.reserve(batch.size());
  for (const Sample& s : batch) sets.push_back(s.patches);
  const auto pairs = select_pairs(sets, opt.strategy, opt.alpha, opt.master_seed);

  std::vector<std::optional<AugmentedSample>> slots(pairs.size());
  std::vector<std::string> reasons(pairs.size());

  const int workers = std::max(1, opt.threads);
  if (workers == 1) {
    for (size_t t = 0; t < pairs.size(); ++t) {
      slots[t] = detail::augment_one(batch, int(t), pairs[t].first, pairs[t].second,
                                     opt, reasons[t]);
    }
  } else {
    std::atomic<size_t> next{0};
    auto work = [&] {
      for (size_t t = next.fetch_add(1); t < pairs.size(); t = next.fetch_add(1)) {
        slots[t] = detail::augment_one(batch, int(t), pairs[t].first, pairs[t].second,
                                       opt, reasons[t]);
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  AugmentResult result;
  for (size_t t = 0; t < pairs.size(); ++t) {
    if (slots[t]) {
      result.samples.push_back(std::move(*slots[t]));
    } else {
      result.skipped.push_back({int(t), pairs[t].first, pairs[t].second, reasons[t]});
    }
  }
  return result;
}

}  // namespace lmix
