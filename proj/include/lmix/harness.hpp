#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lmix/config.hpp"
#include "lmix/dataset.hpp"
#include "lmix/error.hpp"
#include "lmix/image.hpp"
#include "lmix/metrics.hpp"
#include "lmix/mixer.hpp"
#include "lmix/render.hpp"
#include "lmix/scan.hpp"
#include "lmix/tokenizer.hpp"
#include "lmix/vlr.hpp"

// Batch orchestration behind the CLI subcommands. Everything here is
// deterministic under a fixed (records, config) input, including output file
// bytes, regardless of worker thread count.

namespace lmix {

namespace detail {

inline std::string zero_pad(int value, int width) {
  std::ostringstream out;
  out << std::setw(width) << std::setfill('0') << value;
  return out.str();
}

template <typename Fn>
inline void parallel_indexed(size_t count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto work = [&] {
    for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<size_t>(threads, count);
  for (int t = 0; t < n; ++t) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

/// Density map for a record: the precomputed file when present, otherwise
/// the gradient heuristic over the (already loaded) image.
inline DensityMap record_density(const DatasetRecord& rec, const Image* image,
                                 const Canvas& canvas) {
  if (!rec.density_path.empty()) {
    return resize_bilinear(read_float_map(rec.density_path), canvas.width, canvas.height);
  }
  if (!image || image->empty()) {
    throw ValidationError("record at line " + std::to_string(rec.line_number) +
                          ": no density map and no image for the heuristic");
  }
  return heuristic_density(*image);
}

/// Loads and fully prepares one record for mixing.
inline Sample build_sample(const DatasetRecord& rec, const RunConfig& cfg) {
  if (rec.image_path.empty()) {
    throw ValidationError("record at line " + std::to_string(rec.line_number) +
                          ": image path required");
  }
  Sample s;
  s.image = resize_bilinear(read_png(rec.image_path, 3), cfg.canvas.width,
                            cfg.canvas.height);
  s.layout = rec.elements;
  const DensityMap density = record_density(rec, &s.image, cfg.canvas);
  s.patches = select_topk(pool_patch_scores(density, cfg.p), cfg.k);
  s.vertices = encode_vlr(s.layout, cfg.grouping());
  return s;
}

/// Patch set for one record without requiring the layout (scan / pairs).
inline PatchIndexSet record_patches(const DatasetRecord& rec, const RunConfig& cfg) {
  std::optional<Image> image;
  if (rec.density_path.empty()) {
    if (rec.image_path.empty()) {
      throw ValidationError("record at line " + std::to_string(rec.line_number) +
                            ": need a density map or an image");
    }
    image = resize_bilinear(read_png(rec.image_path, 3), cfg.canvas.width,
                            cfg.canvas.height);
  }
  const DensityMap density =
      record_density(rec, image ? &*image : nullptr, cfg.canvas);
  return select_topk(pool_patch_scores(density, cfg.p), cfg.k);
}

// ---------------------------------------------------------------------------
// vlr encode/decode streaming

inline nlohmann::json tensor_to_json(const VertexTensor& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Vertex& vx : v) arr.push_back({vx.category, vx.x, vx.y});
  return nlohmann::json{{"vertices", arr}};
}

inline VertexTensor tensor_from_json(const nlohmann::json& obj) {
  if (!obj.contains("vertices") || !obj["vertices"].is_array()) {
    throw ValidationError("expected a 'vertices' array");
  }
  VertexTensor v;
  for (const auto& entry : obj["vertices"]) {
    if (!entry.is_array() || entry.size() != 3) {
      throw ValidationError("vertex entries must be [category, x, y]");
    }
    v.push_back({entry[0].get<int>(), entry[1].get<double>(), entry[2].get<double>()});
  }
  return v;
}

/// Layouts -> vertex tensors, one output line per record. `tokens` switches
/// the output to quantized token lines, `framed` wraps them in BOS/EOS.
inline void run_vlr_encode(const std::vector<DatasetRecord>& records,
                           const RunConfig& cfg, bool tokens, std::ostream& out,
                           bool framed = false) {
  const TokenizerConfig tok{cfg.categories.size(), 128, framed};
  for (const DatasetRecord& rec : records) {
    const VertexTensor v = encode_vlr(rec.elements, cfg.grouping());
    if (tokens) {
      out << tokens_to_line(tensor_to_tokens(v, rec.canvas, tok)) << "\n";
    } else {
      out << tensor_to_json(v).dump() << "\n";
    }
  }
}

/// Vertex tensors (JSONL or token lines) -> layouts. Malformed lines are
/// reported and skipped; the return value is the number of bad lines.
inline int run_vlr_decode(std::istream& in, const RunConfig& cfg, bool tokens,
                          std::ostream& out, std::ostream& err, bool framed = false) {
  const TokenizerConfig tok{cfg.categories.size(), 128, framed};
  std::string line;
  int line_number = 0;
  int failures = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      VertexTensor v;
      if (tokens) {
        v = tokens_to_tensor(line_to_tokens(line), cfg.canvas, tok);
      } else {
        v = tensor_from_json(nlohmann::json::parse(line));
      }
      const Layout layout = decode_vlr(v);
      nlohmann::json obj{{"elements", layout_to_json(layout, cfg.categories)},
                         {"width", cfg.canvas.width},
                         {"height", cfg.canvas.height}};
      out << obj.dump() << "\n";
    } catch (const std::exception& e) {
      err << "line " << line_number << ": " << e.what() << "\n";
      ++failures;
    }
  }
  return failures;
}

// ---------------------------------------------------------------------------
// scan / pairs

/// One line per record: the k selected cells as "x,y" in row-major order.
inline void run_scan(const std::vector<DatasetRecord>& records, const RunConfig& cfg,
                     std::ostream& out) {
  std::vector<PatchIndexSet> sets(records.size());
  detail::parallel_indexed(records.size(), cfg.threads,
                           [&](size_t i) { sets[i] = record_patches(records[i], cfg); });
  for (const PatchIndexSet& s : sets) {
    for (size_t c = 0; c < s.cells.size(); ++c) {
      if (c) out << ' ';
      out << s.cells[c] % s.p << ',' << s.cells[c] / s.p;
    }
    out << "\n";
  }
}

/// One line per drawn pair: "i j" (indices into the manifest).
inline void run_pairs(const std::vector<DatasetRecord>& records, const RunConfig& cfg,
                      std::ostream& out) {
  std::vector<PatchIndexSet> sets(records.size());
  detail::parallel_indexed(records.size(), cfg.threads,
                           [&](size_t i) { sets[i] = record_patches(records[i], cfg); });
  const auto pairs = select_pairs(sets, cfg.strategy, cfg.alpha, cfg.seed);
  for (const auto& [i, j] : pairs) out << i << ' ' << j << "\n";
}

// ---------------------------------------------------------------------------
// augment

struct AugmentRunStats {
  int batches = 0;
  int written = 0;
  int skipped = 0;
  std::map<std::string, int> skip_reasons;
};

/// Batches the manifest, mixes each batch, and writes PNGs plus a JSONL file
/// of layouts and provenance into out_dir. Any I/O failure leaves a
/// PARTIAL_OUTPUT marker behind. A trailing batch of one record cannot pair
/// and is reported as skipped.
inline AugmentRunStats run_augment(const std::vector<DatasetRecord>& records,
                                   const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  cfg.validate();
  if (records.size() < 2) {
    throw ValidationError("augment needs at least 2 records");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  const fs::path marker = fs::path(out_dir) / "PARTIAL_OUTPUT";
  {
    std::ofstream m(marker);
    if (!m) throw IoError("cannot write into output directory: " + out_dir);
  }

  AugmentRunStats stats;
  try {
    std::ofstream manifest(fs::path(out_dir) / "augmented.jsonl");
    if (!manifest) throw IoError("cannot open augmented.jsonl for write");

    int out_index = 0;
    const int n = static_cast<int>(records.size());
    for (int start = 0, batch_index = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const int count = std::min(cfg.batch_size, n - start);
      if (count < 2) {
        stats.skip_reasons["trailing batch smaller than 2"] += 1;
        ++stats.skipped;
        break;
      }
      std::vector<Sample> batch(count);
      detail::parallel_indexed(count, cfg.threads, [&](size_t i) {
        batch[i] = build_sample(records[size_t(start) + i], cfg);
      });

      AugmentOptions opt;
      opt.strategy = cfg.strategy;
      opt.alpha = cfg.alpha;
      opt.master_seed = derive_seed(cfg.seed, uint64_t(batch_index));
      opt.threads = cfg.threads;
      opt.p = cfg.p;
      opt.canvas = cfg.canvas;
      opt.grouping = cfg.grouping();

      const AugmentResult result = augment_batch(batch, opt);
      ++stats.batches;

      for (const AugmentedSample& sample : result.samples) {
        const std::string name = "aug_" + detail::zero_pad(out_index, 6) + ".png";
        write_png(sample.image, (fs::path(out_dir) / name).string());

        nlohmann::json regions = nlohmann::json::array();
        for (const Region& r : sample.provenance.regions) {
          regions.push_back({r.min_x, r.min_y, r.max_x, r.max_y});
        }
        nlohmann::json line{
            {"image", name},
            {"width", cfg.canvas.width},
            {"height", cfg.canvas.height},
            {"elements", layout_to_json(sample.layout, cfg.categories)},
            {"provenance",
             {{"source_i", start + sample.provenance.source_i},
              {"source_j", start + sample.provenance.source_j},
              {"batch", batch_index},
              {"ordinal", sample.provenance.ordinal},
              {"master_seed", sample.provenance.master_seed},
              {"pair_seed", sample.provenance.pair_seed},
              {"regions", regions}}}};
        manifest << line.dump() << "\n";
        ++out_index;
      }
      stats.written += static_cast<int>(result.samples.size());
      for (const PairSkip& skip : result.skipped) {
        ++stats.skipped;
        stats.skip_reasons[skip.reason] += 1;
      }
    }
    manifest.flush();
    if (!manifest) throw IoError("failed writing augmented.jsonl");
  } catch (...) {
    // leave the marker in place
    throw;
  }
  fs::remove(marker);
  return stats;
}

// ---------------------------------------------------------------------------
// eval

struct EvalAggregate {
  int samples = 0;
  MetricReport totals;  // count-weighted sums, divided on finalize
  nlohmann::json to_json() const;
};

inline nlohmann::json EvalAggregate::to_json() const {
  auto ratio = [](double sum, int64_t count) { return count > 0 ? sum / double(count) : 0.0; };
  return nlohmann::json{
      {"samples", samples},
      {"ove", ratio(totals.ove, totals.ove_pairs)},
      {"ali", ratio(totals.ali, totals.ali_elements)},
      {"und_l", ratio(totals.und_l, totals.underlays)},
      {"und_s", ratio(totals.und_s, totals.underlays)},
      {"uti", ratio(totals.uti, totals.low_saliency_pixels)},
      {"occ", ratio(totals.occ, totals.covered_pixels)},
      {"rea", ratio(totals.rea, totals.text_pixels)},
      {"counts",
       {{"ove_pairs", totals.ove_pairs},
        {"ali_elements", totals.ali_elements},
        {"underlays", totals.underlays},
        {"covered_pixels", totals.covered_pixels},
        {"low_saliency_pixels", totals.low_saliency_pixels},
        {"text_pixels", totals.text_pixels},
        {"elements", totals.elements}}}};
}

/// Evaluates each record's layout (or the override layouts, aligned by
/// index). Writes one CSV row per sample and returns the count-weighted
/// aggregate. Content metrics are skipped (count 0) for records without the
/// needed map or image.
inline EvalAggregate run_eval(const std::vector<DatasetRecord>& records,
                              const std::vector<Layout>* override_layouts,
                              const RunConfig& cfg, std::ostream& csv) {
  if (override_layouts && override_layouts->size() != records.size()) {
    throw ValidationError("eval: layouts file does not align with the manifest");
  }
  csv << std::setprecision(17);
  csv << "index,ove,ali,und_l,und_s,uti,occ,rea,ove_pairs,ali_elements,underlays,"
         "covered_pixels,low_saliency_pixels,text_pixels,elements\n";

  std::vector<MetricReport> reports(records.size());
  detail::parallel_indexed(records.size(), cfg.threads, [&](size_t i) {
    const DatasetRecord& rec = records[i];
    const Layout& layout = override_layouts ? (*override_layouts)[i] : rec.elements;

    std::optional<SaliencyMap> saliency;
    if (!rec.saliency_path.empty()) {
      saliency = resize_bilinear(read_float_map(rec.saliency_path), cfg.canvas.width,
                                 cfg.canvas.height);
    }
    std::optional<Image> image;
    if (!rec.image_path.empty()) {
      image = resize_bilinear(read_png(rec.image_path, 3), cfg.canvas.width,
                              cfg.canvas.height);
    }
    reports[i] = evaluate_layout(layout, cfg.canvas, cfg.categories.underlay_id,
                                 cfg.categories.text_id,
                                 saliency ? &*saliency : nullptr,
                                 image ? &*image : nullptr, cfg.saliency_threshold);
  });

  EvalAggregate agg;
  for (size_t i = 0; i < reports.size(); ++i) {
    const MetricReport& r = reports[i];
    csv << i << ',' << r.ove << ',' << r.ali << ',' << r.und_l << ',' << r.und_s << ','
        << r.uti << ',' << r.occ << ',' << r.rea << ',' << r.ove_pairs << ','
        << r.ali_elements << ',' << r.underlays << ',' << r.covered_pixels << ','
        << r.low_saliency_pixels << ',' << r.text_pixels << ',' << r.elements << "\n";
    ++agg.samples;
    agg.totals.ove += r.ove * double(r.ove_pairs);
    agg.totals.ali += r.ali * double(r.ali_elements);
    agg.totals.und_l += r.und_l * double(r.underlays);
    agg.totals.und_s += r.und_s * double(r.underlays);
    agg.totals.uti += r.uti * double(r.low_saliency_pixels);
    agg.totals.occ += r.occ * double(r.covered_pixels);
    agg.totals.rea += r.rea * double(r.text_pixels);
    agg.totals.ove_pairs += r.ove_pairs;
    agg.totals.ali_elements += r.ali_elements;
    agg.totals.underlays += r.underlays;
    agg.totals.covered_pixels += r.covered_pixels;
    agg.totals.low_saliency_pixels += r.low_saliency_pixels;
    agg.totals.text_pixels += r.text_pixels;
    agg.totals.elements += r.elements;
  }
  return agg;
}

// ---------------------------------------------------------------------------
// render

/// One SVG per record (or per override layout) into out_dir.
inline void run_render(const std::vector<DatasetRecord>& records,
                       const std::vector<Layout>* override_layouts,
                       const RunConfig& cfg, const std::string& out_dir,
                       bool embed_background) {
  namespace fs = std::filesystem;
  if (override_layouts && override_layouts->size() != records.size()) {
    throw ValidationError("render: layouts file does not align with the manifest");
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + out_dir);

  for (size_t i = 0; i < records.size(); ++i) {
    const Layout& layout = override_layouts ? (*override_layouts)[i] : records[i].elements;
    const std::string background =
        embed_background && !records[i].image_path.empty() ? records[i].image_path : "";
    const std::string svg =
        render_svg(layout, records[i].canvas, cfg.categories, cfg.grouping(), background);
    const fs::path path =
        fs::path(out_dir) / ("render_" + detail::zero_pad(int(i), 6) + ".svg");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << svg;
  }
}

/// Layouts from JSONL {"elements": [...]} lines (e.g. decoded or generated
/// layouts) for eval/render overrides.
inline std::vector<Layout> read_layout_lines(std::istream& in, const CategoryTable& table) {
  std::vector<Layout> layouts;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("layouts line " + std::to_string(line_number) +
                            ": malformed JSON: " + e.what());
    }
    Layout layout;
    if (obj.contains("elements")) {
      for (const auto& el : obj["elements"]) {
        Element e;
        if (el["category"].is_string()) {
          e.category = table.id_of(el["category"].get<std::string>());
          if (e.category < 0) {
            throw ValidationError("layouts line " + std::to_string(line_number) +
                                  ": unknown category");
          }
        } else {
          e.category = el["category"].get<int>();
        }
        e.box = {el["cx"].get<double>(), el["cy"].get<double>(), el["w"].get<double>(),
                 el["h"].get<double>()};
        layout.push_back(e);
      }
    }
    layouts.push_back(std::move(layout));
  }
  return layouts;
}

inline std::vector<Layout> read_layout_lines(const std::string& path,
                                             const CategoryTable& table) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open layouts file: " + path);
  return read_layout_lines(in, table);
}

}  // namespace lmix
