#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmix/error.hpp"
#include "lmix/geometry.hpp"
#include "lmix/vlr.hpp"

namespace lmix {

struct CategoryTable {
  std::vector<std::string> names;
  int underlay_id = 2;
  int text_id = 1;

  int id_of(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
  const std::string& name_of(int id) const {
    if (id < 0 || id >= static_cast<int>(names.size())) {
      throw ValidationError("category id outside table: " + std::to_string(id));
    }
    return names[size_t(id)];
  }
  int size() const { return static_cast<int>(names.size()); }
};

inline CategoryTable pku_categories() { return {{"logo", "text", "underlay"}, 2, 1}; }

inline CategoryTable cgl_categories() {
  return {{"logo", "text", "underlay", "embellishment"}, 2, 1};
}

/// One manifest line: an image-layout pair with optional precomputed maps.
struct DatasetRecord {
  std::string image_path;
  std::string density_path;
  std::string saliency_path;
  Canvas canvas{224, 224};
  Layout elements;
  std::string split;  // train | annotated-test | unannotated-test | ""
  int line_number = 0;
};

namespace detail {

inline std::string resolve_path(const std::string& raw,
                                const std::filesystem::path& manifest_dir) {
  namespace fs = std::filesystem;
  if (raw.empty()) return raw;
  fs::path p(raw);
  if (p.is_absolute()) return raw;
  const fs::path near = manifest_dir / p;
  if (fs::exists(near)) return near.string();
  if (const char* root = std::getenv("LMIX_DATA_ROOT")) {
    const fs::path under = fs::path(root) / p;
    if (fs::exists(under)) return under.string();
  }
  return near.string();
}

inline double require_number(const nlohmann::json& obj, const char* key, int line) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw ValidationError("line " + std::to_string(line) + ": missing numeric field '" +
                          key + "'");
  }
  return obj[key].get<double>();
}

}  // namespace detail

/// Parses a JSONL manifest. Boxes are clamped to the record canvas; anything
/// unparseable fails with the offending line number. Relative paths resolve
/// against the manifest directory, then $LMIX_DATA_ROOT.
inline std::vector<DatasetRecord> ingest_dataset(
    const std::string& manifest_path, const CategoryTable& table,
    const Canvas& default_canvas = {224, 224},
    std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest: " + manifest_path);
  const std::filesystem::path dir =
      std::filesystem::path(manifest_path).parent_path();

  std::vector<DatasetRecord> records;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("line " + std::to_string(line_number) +
                            ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) {
      throw ValidationError("line " + std::to_string(line_number) + ": not a JSON object");
    }

    DatasetRecord rec;
    rec.line_number = line_number;
    rec.canvas = default_canvas;
    if (obj.contains("width")) rec.canvas.width = obj["width"].get<int>();
    if (obj.contains("height")) rec.canvas.height = obj["height"].get<int>();
    if (rec.canvas.width <= 0 || rec.canvas.height <= 0) {
      throw ValidationError("line " + std::to_string(line_number) + ": bad canvas size");
    }
    auto take_path = [&](const char* key, std::string& dest) {
      if (!obj.contains(key)) return;
      dest = detail::resolve_path(obj[key].get<std::string>(), dir);
      if (warnings && !std::filesystem::exists(dest)) {
        warnings->push_back("line " + std::to_string(line_number) + ": " + key +
                            " path not found: " + dest);
      }
    };
    take_path("image", rec.image_path);
    take_path("density", rec.density_path);
    take_path("saliency", rec.saliency_path);
    if (obj.contains("split")) rec.split = obj["split"].get<std::string>();

    if (obj.contains("elements")) {
      if (!obj["elements"].is_array()) {
        throw ValidationError("line " + std::to_string(line_number) +
                              ": 'elements' must be an array");
      }
      for (const auto& el : obj["elements"]) {
        Element e;
        if (el.contains("category") && el["category"].is_string()) {
          const std::string name = el["category"].get<std::string>();
          e.category = table.id_of(name);
          if (e.category < 0) {
            throw ValidationError("line " + std::to_string(line_number) +
                                  ": unknown category '" + name + "'");
          }
        } else if (el.contains("category") && el["category"].is_number_integer()) {
          e.category = el["category"].get<int>();
          if (e.category < 0 || e.category >= table.size()) {
            throw ValidationError("line " + std::to_string(line_number) +
                                  ": category id outside table: " +
                                  std::to_string(e.category));
          }
        } else {
          throw ValidationError("line " + std::to_string(line_number) +
                                ": element without category");
        }
        e.box.cx = detail::require_number(el, "cx", line_number);
        e.box.cy = detail::require_number(el, "cy", line_number);
        e.box.w = detail::require_number(el, "w", line_number);
        e.box.h = detail::require_number(el, "h", line_number);
        if (e.box.w < 0 || e.box.h < 0) {
          throw ValidationError("line " + std::to_string(line_number) +
                                ": negative extent");
        }

        Corners c = cxcywh_to_xyxy(e.box);
        const Corners clamped{
            std::clamp(c.xl, 0.0, double(rec.canvas.width)),
            std::clamp(c.yt, 0.0, double(rec.canvas.height)),
            std::clamp(c.xr, 0.0, double(rec.canvas.width)),
            std::clamp(c.yb, 0.0, double(rec.canvas.height))};
        if (warnings && (clamped.xl != c.xl || clamped.yt != c.yt ||
                         clamped.xr != c.xr || clamped.yb != c.yb)) {
          warnings->push_back("line " + std::to_string(line_number) +
                              ": box clamped to canvas");
        }
        e.box = xyxy_to_cxcywh(clamped);
        rec.elements.push_back(e);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

/// JSON value for one layout, with category names from the table.
inline nlohmann::json layout_to_json(const Layout& layout, const CategoryTable& table) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Element& e : layout) {
    arr.push_back({{"category", table.name_of(e.category)},
                   {"cx", e.box.cx},
                   {"cy", e.box.cy},
                   {"w", e.box.w},
                   {"h", e.box.h}});
  }
  return arr;
}

}  // namespace lmix
