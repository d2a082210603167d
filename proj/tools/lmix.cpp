// lmix: layout mixing toolkit CLI.
//
// Subcommands: vlr (encode/decode), scan, pairs, augment, eval, render.
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "lmix/config.hpp"
#include "lmix/harness.hpp"

namespace {

struct CliOptions {
  std::string preset;
  std::string strategy;
  std::string canvas;
  std::string config_file;
  lmix::RunConfig cfg;
};

// Config-file keys and CLI flags share names. Precedence: explicit CLI flag,
// then config file, then preset, then built-in defaults.
void add_common_flags(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--preset", opt.preset, "Dataset preset: pku or cgl")
      ->check(CLI::IsMember({"pku", "cgl"}));
  cmd->add_option("--p", opt.cfg.p, "Patch grid dimension");
  cmd->add_option("--k", opt.cfg.k, "Number of selected patches");
  cmd->add_option("--alpha", opt.cfg.alpha, "Augmented samples per mini-batch");
  cmd->add_option("--batch-size", opt.cfg.batch_size, "Mini-batch size");
  cmd->add_option("--eps-u", opt.cfg.eps_u, "Underlay-in-underlay grouping threshold");
  cmd->add_option("--eps-n", opt.cfg.eps_n, "Content-on-underlay grouping threshold");
  cmd->add_option("--strategy", opt.strategy, "Pair selection: pcc, cosim or random")
      ->check(CLI::IsMember({"pcc", "cosim", "random"}));
  cmd->add_option("--seed", opt.cfg.seed, "Master seed");
  cmd->add_option("--canvas", opt.canvas, "Canvas size as WxH");
  cmd->add_option("--threads", opt.cfg.threads, "Worker threads");
  cmd->add_option("--saliency-threshold", opt.cfg.saliency_threshold,
                  "Saliency cutoff for space utilization");
  cmd->add_option("--config", opt.config_file, "Flat key=value config file");
}

template <typename T, typename Parse>
void apply_key(const std::map<std::string, std::string>& file, CLI::App* cmd,
               const std::string& key, T& target, Parse parse) {
  const auto it = file.find(key);
  if (it == file.end() || cmd->count("--" + key) > 0) return;
  try {
    target = parse(it->second);
  } catch (const lmix::ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw lmix::ValidationError("config file: bad value for '" + key + "': " +
                                it->second);
  }
}

void finalize_config(CLI::App* cmd, CliOptions& opt) {
  std::map<std::string, std::string> file;
  if (!opt.config_file.empty()) file = lmix::load_flat_config(opt.config_file);

  auto to_int = [](const std::string& s) { return std::stoi(s); };
  auto to_double = [](const std::string& s) { return std::stod(s); };
  auto to_u64 = [](const std::string& s) { return std::stoull(s); };
  auto identity = [](const std::string& s) { return s; };

  apply_key(file, cmd, "preset", opt.preset, identity);
  if (!opt.preset.empty()) {
    const lmix::RunConfig preset = lmix::preset_config(opt.preset);
    if (!cmd->count("--k") && !file.count("k")) opt.cfg.k = preset.k;
    if (!cmd->count("--alpha") && !file.count("alpha")) opt.cfg.alpha = preset.alpha;
    opt.cfg.categories = preset.categories;
  }
  apply_key(file, cmd, "p", opt.cfg.p, to_int);
  apply_key(file, cmd, "k", opt.cfg.k, to_int);
  apply_key(file, cmd, "alpha", opt.cfg.alpha, to_int);
  apply_key(file, cmd, "batch-size", opt.cfg.batch_size, to_int);
  apply_key(file, cmd, "eps-u", opt.cfg.eps_u, to_double);
  apply_key(file, cmd, "eps-n", opt.cfg.eps_n, to_double);
  apply_key(file, cmd, "strategy", opt.strategy, identity);
  apply_key(file, cmd, "seed", opt.cfg.seed, to_u64);
  apply_key(file, cmd, "canvas", opt.canvas, identity);
  apply_key(file, cmd, "threads", opt.cfg.threads, to_int);
  apply_key(file, cmd, "saliency-threshold", opt.cfg.saliency_threshold, to_double);

  if (!opt.strategy.empty()) {
    opt.cfg.strategy = lmix::pair_strategy_from_string(opt.strategy);
  }
  if (!opt.canvas.empty()) opt.cfg.canvas = lmix::parse_canvas(opt.canvas);
  opt.cfg.validate();
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw lmix::IoError("cannot open for write: " + path);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"layout mixing toolkit: vertex layout codec, patch selection, "
               "mixup augmentation and layout quality metrics"};
  app.require_subcommand(1);

  CliOptions opt;
  std::string input, output, layouts_file, mode, json_out;
  bool tokens = false;
  bool framed = false;
  bool background = false;

  CLI::App* vlr = app.add_subcommand("vlr", "Encode layouts to vertex tensors and back");
  vlr->add_option("mode", mode, "encode or decode")
      ->required()
      ->check(CLI::IsMember({"encode", "decode"}));
  vlr->add_option("--input", input, "Manifest (encode) or tensor/token file (decode)")
      ->required();
  vlr->add_option("--output", output, "Output file (default: stdout)");
  vlr->add_flag("--tokens", tokens, "Use quantized token lines instead of JSONL");
  vlr->add_flag("--framed", framed, "Wrap token lines in BOS/EOS (with --tokens)");
  add_common_flags(vlr, opt);

  CLI::App* scan = app.add_subcommand("scan", "Select top-k patches per record");
  scan->add_option("--input", input, "Manifest JSONL")->required();
  scan->add_option("--output", output, "Output file (default: stdout)");
  add_common_flags(scan, opt);

  CLI::App* pairs = app.add_subcommand("pairs", "Draw mixing source pairs");
  pairs->add_option("--input", input, "Manifest JSONL")->required();
  pairs->add_option("--output", output, "Output file (default: stdout)");
  add_common_flags(pairs, opt);

  CLI::App* augment = app.add_subcommand("augment", "Synthesize augmented samples");
  augment->add_option("--input", input, "Manifest JSONL")->required();
  augment->add_option("--output", output, "Output directory")->required();
  add_common_flags(augment, opt);

  CLI::App* eval = app.add_subcommand("eval", "Compute the seven layout metrics");
  eval->add_option("--input", input, "Manifest JSONL")->required();
  eval->add_option("--layouts", layouts_file,
                   "Optional JSONL of layouts to evaluate instead of the manifest's");
  eval->add_option("--csv", output, "Per-sample CSV output path");
  eval->add_option("--json", json_out, "Aggregate JSON output path");
  add_common_flags(eval, opt);

  CLI::App* render = app.add_subcommand("render", "Render layouts to SVG");
  render->add_option("--input", input, "Manifest JSONL")->required();
  render->add_option("--layouts", layouts_file, "Optional JSONL of layouts to render");
  render->add_option("--output", output, "Output directory")->required();
  render->add_flag("--background", background, "Embed the poster image in the SVG");
  add_common_flags(render, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    CLI::App* active = app.get_subcommands().front();
    finalize_config(active, opt);
    const lmix::RunConfig& cfg = opt.cfg;

    if (active == vlr) {
      if (mode == "encode") {
        const auto records =
            lmix::ingest_dataset(input, cfg.categories, cfg.canvas, nullptr);
        if (output.empty()) {
          lmix::run_vlr_encode(records, cfg, tokens, std::cout, framed);
        } else {
          auto out = open_output(output);
          lmix::run_vlr_encode(records, cfg, tokens, out, framed);
        }
      } else {
        std::ifstream in(input);
        if (!in) throw lmix::IoError("cannot open: " + input);
        int failures = 0;
        if (output.empty()) {
          failures = lmix::run_vlr_decode(in, cfg, tokens, std::cout, std::cerr, framed);
        } else {
          auto out = open_output(output);
          failures = lmix::run_vlr_decode(in, cfg, tokens, out, std::cerr, framed);
        }
        if (failures > 0) {
          std::cerr << failures << " malformed record(s)\n";
          return 1;
        }
      }
    } else if (active == scan) {
      const auto records = lmix::ingest_dataset(input, cfg.categories, cfg.canvas, nullptr);
      if (output.empty()) {
        lmix::run_scan(records, cfg, std::cout);
      } else {
        auto out = open_output(output);
        lmix::run_scan(records, cfg, out);
      }
    } else if (active == pairs) {
      const auto records = lmix::ingest_dataset(input, cfg.categories, cfg.canvas, nullptr);
      if (output.empty()) {
        lmix::run_pairs(records, cfg, std::cout);
      } else {
        auto out = open_output(output);
        lmix::run_pairs(records, cfg, out);
      }
    } else if (active == augment) {
      std::vector<std::string> warnings;
      const auto records = lmix::ingest_dataset(input, cfg.categories, cfg.canvas, &warnings);
      for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
      const lmix::AugmentRunStats stats = lmix::run_augment(records, cfg, output);
      std::cout << "batches: " << stats.batches << "\n";
      std::cout << "written: " << stats.written << "\n";
      std::cout << "skipped: " << stats.skipped << "\n";
      for (const auto& [reason, count] : stats.skip_reasons) {
        std::cout << "  " << reason << ": " << count << "\n";
      }
    } else if (active == eval) {
      const auto records = lmix::ingest_dataset(input, cfg.categories, cfg.canvas, nullptr);
      std::vector<lmix::Layout> layouts;
      const std::vector<lmix::Layout>* override_ptr = nullptr;
      if (!layouts_file.empty()) {
        layouts = lmix::read_layout_lines(layouts_file, cfg.categories);
        override_ptr = &layouts;
      }
      lmix::EvalAggregate agg;
      if (output.empty()) {
        agg = lmix::run_eval(records, override_ptr, cfg, std::cout);
      } else {
        auto csv = open_output(output);
        agg = lmix::run_eval(records, override_ptr, cfg, csv);
      }
      const std::string json_text = agg.to_json().dump(2);
      if (json_out.empty()) {
        std::cout << json_text << "\n";
      } else {
        auto js = open_output(json_out);
        js << json_text << "\n";
      }
    } else if (active == render) {
      const auto records = lmix::ingest_dataset(input, cfg.categories, cfg.canvas, nullptr);
      std::vector<lmix::Layout> layouts;
      const std::vector<lmix::Layout>* override_ptr = nullptr;
      if (!layouts_file.empty()) {
        layouts = lmix::read_layout_lines(layouts_file, cfg.categories);
        override_ptr = &layouts;
      }
      lmix::run_render(records, override_ptr, cfg, output, background);
    }
  } catch (const lmix::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const lmix::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
