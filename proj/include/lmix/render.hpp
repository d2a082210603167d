#pragma once

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lmix/dataset.hpp"
#include "lmix/error.hpp"
#include "lmix/vlr.hpp"

namespace lmix {

namespace detail {

inline std::string base64_encode(const std::vector<unsigned char>& data) {
  static const char* alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 2 < data.size(); i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += alphabet[v & 63];
  }
  if (i + 1 == data.size()) {
    const unsigned v = data[i] << 16;
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == data.size()) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out += alphabet[(v >> 18) & 63];
    out += alphabet[(v >> 12) & 63];
    out += alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::string fmt_coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace detail

/// One translucent rect per element. Draw order follows the grouping forest
/// pre-order (the same order the vertex encoding uses), so an underlay is
/// always painted beneath the elements it encloses. Pass a PNG path to embed
/// the poster background.
inline std::string render_svg(const Layout& layout, const Canvas& canvas,
                              const CategoryTable& table,
                              const GroupingParams& grouping = {},
                              const std::string& background_png = "") {
  static const std::array<const char*, 6> palette = {
      "#e6550d", "#3182bd", "#31a354", "#756bb1", "#636363", "#de2d26"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << canvas.width
      << "\" height=\"" << canvas.height << "\" viewBox=\"0 0 " << canvas.width << " "
      << canvas.height << "\">\n";

  if (!background_png.empty()) {
    std::ifstream in(background_png, std::ios::binary);
    if (!in) throw IoError("cannot open background image: " + background_png);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    svg << "  <image width=\"" << canvas.width << "\" height=\"" << canvas.height
        << "\" href=\"data:image/png;base64," << detail::base64_encode(bytes)
        << "\"/>\n";
  }

  if (!layout.empty()) {
    std::vector<int> categories;
    std::vector<Corners> corners;
    for (const Element& e : layout) {
      categories.push_back(e.category);
      corners.push_back(cxcywh_to_xyxy(e.box));
    }
    const std::vector<IdTree> forest =
        group_element_ids(categories, corners, grouping);

    std::vector<int> order;
    auto visit = [&](auto&& self, const IdTree& t) -> void {
      order.push_back(t.value);
      for (const IdTree& c : t.children) self(self, c);
    };
    for (const IdTree& t : forest) visit(visit, t);

    for (int idx : order) {
      const Element& e = layout[size_t(idx)];
      const Corners c = corners[size_t(idx)];
      const char* color = palette[size_t(e.category) % palette.size()];
      svg << "  <rect x=\"" << detail::fmt_coord(c.xl) << "\" y=\""
          << detail::fmt_coord(c.yt) << "\" width=\"" << detail::fmt_coord(c.xr - c.xl)
          << "\" height=\"" << detail::fmt_coord(c.yb - c.yt) << "\" fill=\"" << color
          << "\" fill-opacity=\"0.35\" stroke=\"" << color
          << "\" stroke-width=\"1\"><title>" << table.name_of(e.category)
          << "</title></rect>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lmix
