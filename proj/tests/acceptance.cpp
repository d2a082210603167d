// Acceptance suite: runs every gate criterion at its stated tolerance and
// prints one [PASS]/[FAIL]/[SKIP] line per criterion. Exit code is the
// number of failed criteria.

#include <sys/wait.h>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lmix/harness.hpp"
#include "test_util.hpp"

using namespace lmix;
namespace fs = std::filesystem;

namespace {

struct Failure {
  std::string message;
};

void expect(bool ok, const std::string& message) {
  if (!ok) throw Failure{message};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << v;
  return out.str();
}

// --------------------------------------------------------------------------
// 1. VLR round trip: 1,000 random layouts, exact multisets, under a second.

std::string criterion_vlr_round_trip() {
  Rng rng(1001);
  const auto start = std::chrono::steady_clock::now();
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Layout layout = testutil::random_layout(rng, {224, 224}, 20, 4, 2);
    const Layout back = decode_vlr(encode_vlr(layout));
    if (!testutil::layouts_equal_exact(layout, back)) ++failures;
  }
  const double elapsed = seconds_since(start);
  expect(failures == 0, std::to_string(failures) + " round-trip failures");
  expect(elapsed < 1.0, "took " + fmt(elapsed) + " s (budget 1 s)");
  return "1000 layouts, 0 failures, " + fmt(elapsed) + " s";
}

// --------------------------------------------------------------------------
// 2. Grouping matches the brute-force enclosure oracle, 500 layouts per
//    threshold pair (defaults plus three perturbed pairs).

std::string criterion_grouping_oracle() {
  Rng rng(2002);
  const std::vector<std::pair<double, double>> thresholds{
      {0.8, 0.5}, {0.9, 0.7}, {0.6, 0.4}, {0.99, 0.9}};
  int mismatches = 0;
  for (const auto& [eps_u, eps_n] : thresholds) {
    const GroupingParams gp{2, eps_u, eps_n, OverlapMode::Enclosure};
    for (int trial = 0; trial < 500; ++trial) {
      const Layout layout = testutil::random_layout(rng, {224, 224}, 20, 4, 2);
      std::vector<int> cats;
      std::vector<Corners> corners;
      for (const Element& e : layout) {
        cats.push_back(e.category);
        corners.push_back(cxcywh_to_xyxy(e.box));
      }
      if (!testutil::forests_equal(group_element_ids(cats, corners, gp),
                                   testutil::grouping_oracle(cats, corners, gp))) {
        ++mismatches;
      }
    }
  }
  expect(mismatches == 0, std::to_string(mismatches) + " forest mismatches");
  return "4 threshold pairs x 500 layouts, 0 mismatches";
}

// --------------------------------------------------------------------------
// 3. LCS length equals exhaustive search for sequences up to length 12.

std::string criterion_lcs_oracle() {
  Rng rng(3003);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> a(1 + rng.next_below(12));
    std::vector<int> b(1 + rng.next_below(12));
    for (int& v : a) v = int(rng.next_below(8));
    for (int& v : b) v = int(rng.next_below(8));
    if (int(lcs_categories(a, b).categories.size()) != testutil::lcs_brute_force(a, b)) {
      ++mismatches;
    }
  }
  expect(mismatches == 0, std::to_string(mismatches) + " length mismatches");
  return "1000 sequence pairs, 0 mismatches";
}

// --------------------------------------------------------------------------
// 4. Region finding equals an independent flood fill on 1,000 random masks
//    across densities 5..95%.

std::string criterion_region_oracle() {
  Rng rng(4004);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double density = 0.05 + 0.90 * (trial / 999.0);
    const PatchMask m = testutil::random_mask(rng, 14, density);
    if (!testutil::regions_equal(find_regions(m), testutil::regions_oracle(m))) {
      ++mismatches;
    }
  }
  expect(mismatches == 0, std::to_string(mismatches) + " component mismatches");
  return "1000 masks, densities 5-95%, 0 mismatches";
}

// --------------------------------------------------------------------------
// 5. Mixup plausibility over >= 1,000 augmented samples.

std::string criterion_mixup_plausibility() {
  Rng rng(5005);
  int produced = 0;
  int violations = 0;
  auto note = [&](bool ok) {
    if (!ok) ++violations;
  };

  while (produced < 1000) {
    std::vector<Sample> batch;
    const int batch_size = 4 + int(rng.next_below(5));
    for (int i = 0; i < batch_size; ++i) {
      Sample s;
      s.image = testutil::random_image(rng, 224, 224, 3);
      s.layout = testutil::random_layout(rng, {224, 224}, 12, 4, 2, false);
      s.patches = testutil::random_patch_set(rng, 14, 24 + int(rng.next_below(100)));
      s.vertices = encode_vlr(s.layout);
      batch.push_back(std::move(s));
    }
    AugmentOptions opt;
    opt.alpha = 64;
    opt.master_seed = rng.next_u64();
    opt.strategy = PairStrategy::Cosim;
    const AugmentResult result = augment_batch(batch, opt);

    for (const AugmentedSample& aug : result.samples) {
      ++produced;
      const Sample& a = batch[size_t(aug.provenance.source_i)];
      const Sample& b = batch[size_t(aug.provenance.source_j)];

      // (a) patch-exactness on every cell
      const PatchMask m = mask_from_indices(a.patches);
      bool exact = true;
      for (int y = 0; y < 224 && exact; ++y) {
        const uint8_t* out_row = aug.image.row(y);
        const uint8_t* a_row = a.image.row(y);
        const uint8_t* b_row = b.image.row(y);
        for (int x = 0; x < 224 && exact; ++x) {
          const uint8_t* src = m.test(x / 16, y / 16) ? b_row : a_row;
          for (int c = 0; c < 3; ++c) {
            if (out_row[x * 3 + c] != src[x * 3 + c]) exact = false;
          }
        }
      }
      note(exact);

      // (b) containment in assigned region bounds and the canvas
      note(aug.layout.size() == aug.provenance.regions.size());
      for (size_t e = 0; e < aug.layout.size(); ++e) {
        const Corners c = cxcywh_to_xyxy(aug.layout[e].box);
        const Region& r = aug.provenance.regions[e];
        note(c.xl >= r.min_x * 16.0 - 1e-9 && c.yt >= r.min_y * 16.0 - 1e-9 &&
             c.xr <= (r.max_x + 1) * 16.0 + 1e-9 && c.yb <= (r.max_y + 1) * 16.0 + 1e-9);
        note(c.xl >= 0 && c.yt >= 0 && c.xr <= 224 && c.yb <= 224);
      }

      // (c) element count bound: min(floor(|LCS|/2), |regions|)
      const LcsMatch match = lcs_categories(vertex_categories(a.vertices),
                                            vertex_categories(b.vertices));
      const auto regions = find_regions(strict_mask(a.patches, b.patches));
      note(aug.layout.size() <= std::min(match.categories.size() / 2, regions.size()));

      // (d) category multiset contained in both sources
      std::map<int, int> counts;
      for (const Element& e : aug.layout) counts[e.category] += 1;
      for (const Layout* src : {&a.layout, &b.layout}) {
        std::map<int, int> have;
        for (const Element& e : *src) have[e.category] += 1;
        for (const auto& [cat, cnt] : counts) note(have[cat] >= cnt);
      }
    }
  }
  expect(violations == 0, std::to_string(violations) + " violations");
  return std::to_string(produced) + " augmented samples, 0 violations";
}

// --------------------------------------------------------------------------
// 6. CLI augment determinism: same seed twice, then 1 vs N threads,
//    byte-identical output directories (batch 128, alpha 256).

std::string criterion_cli_determinism() {
  testutil::TempDir data("acc_data");
  Rng rng(6006);
  {
    std::ofstream manifest(data.path / "manifest.jsonl");
    for (int i = 0; i < 128; ++i) {
      const std::string img = "img_" + std::to_string(i) + ".png";
      write_png(testutil::random_image(rng, 224, 224, 3), (data.path / img).string());
      const Layout layout = testutil::random_layout(rng, {224, 224}, 8, 3, 2, false);
      manifest << nlohmann::json{{"image", img},
                                 {"width", 224},
                                 {"height", 224},
                                 {"elements", layout_to_json(layout, pku_categories())}}
                      .dump()
               << "\n";
    }
  }
  const std::string manifest = (data.path / "manifest.jsonl").string();

  auto run = [&](const std::string& out, int threads) {
    const std::string cmd = std::string(LMIX_CLI_PATH) + " augment --input " + manifest +
                            " --output " + out + " --alpha 256 --batch-size 128" +
                            " --seed 99 --threads " + std::to_string(threads) +
                            " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    expect(WIFEXITED(status) && WEXITSTATUS(status) == 0,
           "augment run failed with status " + std::to_string(status));
  };

  testutil::TempDir out1("acc_out1"), out2("acc_out2"), out3("acc_out3");
  run(out1.str(), 1);
  run(out2.str(), 1);
  run(out3.str(), 2);

  const uint64_t h1 = testutil::hash_directory(out1.path);
  const uint64_t h2 = testutil::hash_directory(out2.path);
  const uint64_t h3 = testutil::hash_directory(out3.path);
  expect(h1 == h2, "same-seed reruns differ");
  expect(h1 == h3, "1-thread vs 2-thread outputs differ");

  int pngs = 0;
  for (const auto& entry : fs::directory_iterator(out1.path)) {
    if (entry.path().extension() == ".png") ++pngs;
  }
  return "3 runs byte-identical (" + std::to_string(pngs) + " samples each)";
}

// --------------------------------------------------------------------------
// 7. Throughput: 256 augmented samples from a 128-sample batch of 224x224
//    images within 3.2 s.

std::string criterion_throughput() {
  Rng rng(7007);
  std::vector<Sample> batch;
  for (int i = 0; i < 128; ++i) {
    Sample s;
    s.image = testutil::random_image(rng, 224, 224, 3);
    s.layout = testutil::random_layout(rng, {224, 224}, 10, 3, 2, false);
    s.patches = testutil::random_patch_set(rng, 14, 96);
    s.vertices = encode_vlr(s.layout);
    batch.push_back(std::move(s));
  }
  AugmentOptions opt;
  opt.alpha = 256;
  opt.master_seed = 1;
  opt.strategy = PairStrategy::Pcc;

  const auto start = std::chrono::steady_clock::now();
  const AugmentResult result = augment_batch(batch, opt);
  const double elapsed = seconds_since(start);

  expect(result.samples.size() + result.skipped.size() == 256, "pair count off");
  expect(elapsed <= 3.2, "took " + fmt(elapsed) + " s (budget 3.2 s)");
  const std::string target_note = elapsed <= 0.5 ? ", meets 0.5 s target" : "";
  return fmt(elapsed) + " s for " + std::to_string(result.samples.size()) +
         " samples (budget 3.2 s" + target_note + ")";
}

// --------------------------------------------------------------------------
// 8. Constructed metric extremes, each within 1e-9.

std::string criterion_metric_extremes() {
  const double tol = 1e-9;
  const Canvas canvas{224, 224};

  const Layout disjoint{{1, xyxy_to_cxcywh({0, 0, 40, 40})},
                        {0, xyxy_to_cxcywh({60, 60, 100, 100})},
                        {1, xyxy_to_cxcywh({120, 120, 160, 160})}};
  expect(std::abs(compute_ove(disjoint, 2)) <= tol, "Ove != 0 on disjoint");

  const Layout duplicated{{1, xyxy_to_cxcywh({10, 10, 60, 60})},
                          {1, xyxy_to_cxcywh({10, 10, 60, 60})}};
  expect(std::abs(compute_ove(duplicated, 2) - 1.0) <= tol, "Ove != 1 on duplicates");

  const Layout aligned{{1, xyxy_to_cxcywh({10, 10, 50, 30})},
                       {0, xyxy_to_cxcywh({10, 60, 80, 90})},
                       {1, xyxy_to_cxcywh({10, 120, 40, 180})}};
  expect(std::abs(compute_ali(aligned, canvas)) <= tol, "Ali != 0 on shared edges");

  const Layout enclosed{{2, xyxy_to_cxcywh({16, 16, 96, 96})},
                        {1, xyxy_to_cxcywh({16, 16, 96, 96})}};
  const UnderlayScore u = compute_underlay(enclosed, 2);
  expect(std::abs(u.loose - 1.0) <= tol, "Und_l != 1 on exact enclosure");
  expect(std::abs(u.strict - 1.0) <= tol, "Und_s != 1 on exact enclosure");

  SaliencyMap blob;
  blob.width = 224;
  blob.height = 224;
  blob.values.assign(size_t(224) * 224, 0.f);
  for (int y = 50; y < 100; ++y) {
    for (int x = 50; x < 100; ++x) blob.at(x, y) = 1.f;
  }
  const Layout on_blob{{1, xyxy_to_cxcywh({50, 50, 100, 100})}};
  const ContentScore c = compute_content(on_blob, blob, canvas);
  expect(std::abs(c.occ - 1.0) <= tol, "Occ != 1 on the salient blob");
  expect(std::abs(c.uti) <= tol, "Uti != 0 on the salient blob");

  return "Ove 0/1, Ali 0, Und 1/1, Occ 1, Uti 0 all within 1e-9";
}

// --------------------------------------------------------------------------
// 9. Dataset-gated: PKU real-data metric row within +/-15% relative.
//    Expects $LMIX_PKU_ROOT/manifest.jsonl; skips cleanly when absent.

std::string criterion_pku_real_data(bool& skipped) {
  const char* root = std::getenv("LMIX_PKU_ROOT");
  if (!root) {
    skipped = true;
    return "LMIX_PKU_ROOT not set; skipped";
  }
  const fs::path manifest = fs::path(root) / "manifest.jsonl";
  if (!fs::exists(manifest)) {
    skipped = true;
    return manifest.string() + " not found; skipped";
  }

  RunConfig cfg = preset_config("pku");
  cfg.threads = 2;
  const auto records = ingest_dataset(manifest.string(), cfg.categories, cfg.canvas);
  std::stringstream csv;
  const EvalAggregate agg = run_eval(records, nullptr, cfg, csv);
  const nlohmann::json summary = agg.to_json();

  const std::vector<std::pair<std::string, double>> reference{
      {"ove", 0.0010},  {"ali", 0.0038}, {"und_l", 0.9955}, {"und_s", 0.9896},
      {"uti", 0.2238},  {"occ", 0.1193}, {"rea", 0.0109}};
  std::string detail;
  for (const auto& [key, ref] : reference) {
    const double got = summary[key].get<double>();
    const double rel = std::abs(got - ref) / ref;
    detail += key + "=" + fmt(got) + " ";
    expect(rel <= 0.15, key + " off by " + fmt(rel * 100) + "% (got " + fmt(got) +
                            ", reference " + fmt(ref) + ")");
  }
  return detail + "all within 15%";
}

// --------------------------------------------------------------------------
// 10. Quantizer bound: 10,000 random coordinates within extent/256 + 1e-9;
//     bin round trip exact on all 128 bins.

std::string criterion_quantizer_bound() {
  Rng rng(10010);
  int bound_failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const double extent = trial % 2 ? 224.0 : 100.0 + rng.next_unit() * 900.0;
    const double v = rng.next_unit() * extent;
    const double back = dequantize_coord(quantize_coord(v, extent), extent);
    if (std::abs(back - v) > extent / 256.0 + 1e-9) ++bound_failures;
  }
  int bin_failures = 0;
  for (int bin = 0; bin < 128; ++bin) {
    if (quantize_coord(dequantize_coord(bin, 224.0), 224.0) != bin) ++bin_failures;
  }
  expect(bound_failures == 0, std::to_string(bound_failures) + " bound violations");
  expect(bin_failures == 0, std::to_string(bin_failures) + " bin round-trip failures");
  return "10000 coordinates within extent/256 + 1e-9; 128 bins exact";
}

}  // namespace

int main() {
  struct Entry {
    int id;
    std::string name;
    std::function<std::string(bool&)> run;
  };
  auto plain = [](std::function<std::string()> fn) {
    return [fn](bool&) { return fn(); };
  };

  const std::vector<Entry> criteria{
      {1, "vlr-round-trip", plain(criterion_vlr_round_trip)},
      {2, "grouping-oracle", plain(criterion_grouping_oracle)},
      {3, "lcs-oracle", plain(criterion_lcs_oracle)},
      {4, "region-oracle", plain(criterion_region_oracle)},
      {5, "mixup-plausibility", plain(criterion_mixup_plausibility)},
      {6, "augment-determinism", plain(criterion_cli_determinism)},
      {7, "throughput", plain(criterion_throughput)},
      {8, "metric-extremes", plain(criterion_metric_extremes)},
      {9, "pku-real-data", criterion_pku_real_data},
      {10, "quantizer-bound", plain(criterion_quantizer_bound)},
  };

  int failures = 0;
  for (const Entry& entry : criteria) {
    bool skipped = false;
    std::string detail;
    bool ok = true;
    try {
      detail = entry.run(skipped);
    } catch (const Failure& f) {
      ok = false;
      detail = f.message;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("unexpected error: ") + e.what();
    }
    const char* tag = skipped ? "[SKIP]" : ok ? "[PASS]" : "[FAIL]";
    std::cout << tag << " " << entry.id << ". " << entry.name << ": " << detail << "\n";
    if (!ok && !skipped) ++failures;
  }
  return failures;
}
