#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lmix/error.hpp"
#include "lmix/vlr.hpp"

// Quantizes vertex tensors into flat token sequences (6 tokens per element:
// two vertices, each a category/x-bin/y-bin triple) and back. Vocabulary:
//   [0, 2C)                vertex categories
//   [2C, 2C+bins)          x bins
//   [2C+bins, 2C+2*bins)   y bins
//   then BOS, EOS, PAD.

namespace lmix {

struct TokenizerConfig {
  int num_categories = 3;
  int coord_bins = 128;
  bool framing = false;  // wrap sequences in BOS/EOS

  int category_vocab() const { return 2 * num_categories; }
  int x_base() const { return category_vocab(); }
  int y_base() const { return category_vocab() + coord_bins; }
  int bos() const { return category_vocab() + 2 * coord_bins; }
  int eos() const { return bos() + 1; }
  int pad() const { return bos() + 2; }
  int vocab_size() const { return bos() + 3; }
};

using TokenSequence = std::vector<int>;

/// Pixel coordinate -> bin index. Out-of-canvas values clamp to the first or
/// last bin; v == extent lands in the last bin.
inline int quantize_coord(double v, double extent, int bins = 128) {
  if (!std::isfinite(v)) throw ValidationError("quantize_coord: non-finite coordinate");
  if (!(extent > 0.0)) throw ValidationError("quantize_coord: extent must be positive");
  if (bins < 1) throw ValidationError("quantize_coord: bins must be >= 1");
  const int bin = static_cast<int>(std::floor(v / extent * bins));
  return std::clamp(bin, 0, bins - 1);
}

/// Bin index -> bin-center pixel coordinate, so quantize(dequantize(b)) == b.
inline double dequantize_coord(int bin, double extent, int bins = 128) {
  if (!(extent > 0.0)) throw ValidationError("dequantize_coord: extent must be positive");
  if (bin < 0 || bin >= bins) throw ValidationError("dequantize_coord: bin out of range");
  return (bin + 0.5) / bins * extent;
}

inline TokenSequence tensor_to_tokens(const VertexTensor& v, const Canvas& canvas,
                                      const TokenizerConfig& cfg = {}) {
  if (v.size() % 2 != 0) {
    throw ValidationError("tensor_to_tokens: vertex count must be even");
  }
  TokenSequence out;
  out.reserve(3 * v.size() + (cfg.framing ? 2 : 0));
  if (cfg.framing) out.push_back(cfg.bos());
  for (const Vertex& vx : v) {
    if (vx.category < 0 || vx.category >= cfg.category_vocab()) {
      throw ValidationError("tensor_to_tokens: vertex category outside table");
    }
    out.push_back(vx.category);
    out.push_back(cfg.x_base() + quantize_coord(vx.x, canvas.width, cfg.coord_bins));
    out.push_back(cfg.y_base() + quantize_coord(vx.y, canvas.height, cfg.coord_bins));
  }
  if (cfg.framing) out.push_back(cfg.eos());
  return out;
}

inline VertexTensor tokens_to_tensor(std::span<const int> tokens, const Canvas& canvas,
                                     const TokenizerConfig& cfg = {}) {
  size_t begin = 0;
  size_t end = tokens.size();
  if (cfg.framing) {
    if (end < 2 || tokens[0] != cfg.bos() || tokens[end - 1] != cfg.eos()) {
      throw ValidationError("tokens_to_tensor: missing BOS/EOS framing");
    }
    begin = 1;
    end -= 1;
  }
  const size_t len = end - begin;
  if (len % 6 != 0) {
    throw ValidationError("tokens_to_tensor: token count not divisible by 6");
  }
  VertexTensor v;
  v.reserve(len / 3);
  for (size_t i = begin; i < end; i += 3) {
    const int cat = tokens[i];
    const int xt = tokens[i + 1];
    const int yt = tokens[i + 2];
    if (cat < 0 || cat >= cfg.category_vocab()) {
      throw ValidationError("tokens_to_tensor: category token out of range");
    }
    if (xt < cfg.x_base() || xt >= cfg.x_base() + cfg.coord_bins) {
      throw ValidationError("tokens_to_tensor: x token out of range");
    }
    if (yt < cfg.y_base() || yt >= cfg.y_base() + cfg.coord_bins) {
      throw ValidationError("tokens_to_tensor: y token out of range");
    }
    v.push_back({cat,
                 dequantize_coord(xt - cfg.x_base(), canvas.width, cfg.coord_bins),
                 dequantize_coord(yt - cfg.y_base(), canvas.height, cfg.coord_bins)});
  }
  validate_vertex_tensor(v);
  return v;
}

/// One layout per line, whitespace-separated integers.
inline std::string tokens_to_line(const TokenSequence& tokens) {
  std::string line;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) line += ' ';
    line += std::to_string(tokens[i]);
  }
  return line;
}

inline TokenSequence line_to_tokens(const std::string& line) {
  TokenSequence out;
  std::istringstream in(line);
  std::string word;
  while (in >> word) {
    size_t pos = 0;
    int value = 0;
    try {
      value = std::stoi(word, &pos);
    } catch (const std::exception&) {
      throw ValidationError("token line: not an integer: '" + word + "'");
    }
    if (pos != word.size()) {
      throw ValidationError("token line: not an integer: '" + word + "'");
    }
    out.push_back(value);
  }
  return out;
}

}  // namespace lmix
