#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include "lmix/dataset.hpp"
#include "lmix/error.hpp"
#include "lmix/geometry.hpp"
#include "lmix/mixer.hpp"
#include "lmix/vlr.hpp"

namespace lmix {

/// Everything a batch run needs. Defaults follow the pku preset.
struct RunConfig {
  int p = 14;
  int k = 96;
  int alpha = 256;
  int batch_size = 128;
  double eps_u = 0.8;
  double eps_n = 0.5;
  PairStrategy strategy = PairStrategy::Pcc;
  uint64_t seed = 0;
  Canvas canvas{224, 224};
  CategoryTable categories = pku_categories();
  int threads = 1;
  double saliency_threshold = 0.5;

  GroupingParams grouping() const {
    return {categories.underlay_id, eps_u, eps_n, OverlapMode::Enclosure};
  }

  void validate() const {
    if (p <= 0) throw ValidationError("config: p must be positive");
    if (k < 1 || k > p * p) throw ValidationError("config: k must be in [1, p*p]");
    if (alpha < 1) throw ValidationError("config: alpha must be >= 1");
    if (batch_size < 2) throw ValidationError("config: batch size must be >= 2");
    if (!(eps_u > 0.0 && eps_u <= 1.0) || !(eps_n > 0.0 && eps_n <= 1.0)) {
      throw ValidationError("config: eps-u and eps-n must be in (0, 1]");
    }
    if (canvas.width <= 0 || canvas.height <= 0) {
      throw ValidationError("config: canvas must be positive");
    }
    if (canvas.width % p != 0 || canvas.height % p != 0) {
      throw ValidationError("config: canvas must divide evenly into the p x p grid");
    }
    if (categories.size() < 1) throw ValidationError("config: empty category table");
    if (threads < 1) throw ValidationError("config: threads must be >= 1");
  }
};

/// Per-dataset operating points.
inline RunConfig preset_config(const std::string& name) {
  RunConfig cfg;
  if (name == "pku") {
    cfg.k = 96;
    cfg.alpha = 256;
    cfg.categories = pku_categories();
  } else if (name == "cgl") {
    cfg.k = 48;
    cfg.alpha = 16;
    cfg.categories = cgl_categories();
  } else {
    throw ValidationError("unknown preset: " + name);
  }
  return cfg;
}

/// Flat key=value config file: one pair per line, '#' comments, blank lines
/// ignored. Keys use the same names as the CLI flags (without dashes).
inline std::map<std::string, std::string> load_flat_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_number = 0;
  auto trim = [](std::string s) {
    const size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_number;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config file line " + std::to_string(line_number) +
                            ": expected key=value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ValidationError("config file line " + std::to_string(line_number) +
                            ": empty key");
    }
    out[key] = value;
  }
  return out;
}

/// "WxH" -> Canvas.
inline Canvas parse_canvas(const std::string& text) {
  const size_t x = text.find_first_of("xX");
  if (x == std::string::npos || x == 0 || x + 1 >= text.size()) {
    throw ValidationError("canvas must look like 224x224, got: " + text);
  }
  try {
    const int w = std::stoi(text.substr(0, x));
    const int h = std::stoi(text.substr(x + 1));
    if (w <= 0 || h <= 0) throw ValidationError("canvas must be positive: " + text);
    return {w, h};
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception&) {
    throw ValidationError("canvas must look like 224x224, got: " + text);
  }
}

}  // namespace lmix
