#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "nuig/error.hpp"
#include "nuig/tensor.hpp"

namespace nuig {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }
};

/// Binary portable graymap (P5, maxval 255).
inline void write_pgm(std::ostream& os, const GrayImage& img) {
  os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::config, "cannot open '" + path + "' for writing");
  write_pgm(os, img);
}

namespace detail {

inline std::size_t read_header_int(std::istream& is, const std::string& source) {
  // skips whitespace and '#' comments per the netpbm header grammar
  while (true) {
    const int c = is.peek();
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      is.get();
    } else {
      break;
    }
  }
  std::size_t v = 0;
  if (!(is >> v)) fail(ErrorKind::parse, source + ": malformed netpbm header");
  return v;
}

}  // namespace detail

/// Reads P2/P5 (graymap) as shape (H, W) or P3/P6 (pixmap) as (H, W, 3),
/// with samples scaled to [0, 1] by maxval.
inline Tensor read_netpbm(std::istream& is, const std::string& source = "<image>") {
  std::string magic(2, '\0');
  if (!is.read(magic.data(), 2)) fail(ErrorKind::parse, source + ": empty image");
  const bool gray = magic == "P2" || magic == "P5";
  const bool color = magic == "P3" || magic == "P6";
  if (!gray && !color) fail(ErrorKind::parse, source + ": unsupported netpbm magic '" + magic + "'");
  const bool binary = magic == "P5" || magic == "P6";

  const std::size_t w = detail::read_header_int(is, source);
  const std::size_t h = detail::read_header_int(is, source);
  const std::size_t maxval = detail::read_header_int(is, source);
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) fail(ErrorKind::parse, source + ": invalid image header");
  const std::size_t channels = color ? 3 : 1;
  const std::size_t n = w * h * channels;

  std::vector<double> data(n);
  if (binary) {
    is.get();  // single whitespace after maxval
    const std::size_t bytes = maxval < 256 ? 1 : 2;
    std::vector<unsigned char> raw(n * bytes);
    if (!is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
      fail(ErrorKind::parse, source + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t v = bytes == 1 ? raw[i] : (std::size_t{raw[2 * i]} << 8) | raw[2 * i + 1];
      data[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t v = 0;
      if (!(is >> v) || v > maxval) fail(ErrorKind::parse, source + ": bad sample " + std::to_string(i));
      data[i] = static_cast<double>(v) / static_cast<double>(maxval);
    }
  }
  Shape shape = color ? Shape{h, w, 3} : Shape{h, w};
  return Tensor(std::move(shape), std::move(data));
}

inline Tensor read_netpbm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::config, "cannot open image '" + path + "'");
  return read_netpbm(is, path);
}

/// True for (H, W) and (H, W, C) tensors, the shapes a heatmap can show.
inline bool is_image_shaped(const Shape& s) { return s.size() == 2 || s.size() == 3; }

struct HeatmapOptions {
  /// Values above this quantile of the per-pixel magnitudes are clipped.
  double clip_quantile = 0.99;
};

/// Grayscale heatmap: per pixel |phi| summed over channels, clipped at the
/// quantile (nearest rank), mapped linearly onto 0..255. When the quantile is
/// zero but some pixel is not, the maximum is used as the clip level instead.
inline GrayImage render_heatmap(const Tensor& phi, HeatmapOptions opts = {}) {
  const Shape& s = phi.shape();
  if (!is_image_shaped(s)) {
    fail(ErrorKind::shape, "heatmap needs a 2-D or 3-D (H, W, C) attribution, got " + shape_to_string(s));
  }
  if (!(opts.clip_quantile > 0.0 && opts.clip_quantile <= 1.0)) {
    fail(ErrorKind::config, "heatmap clip quantile must lie in (0, 1]");
  }
  const std::size_t h = s[0], w = s[1], c = s.size() == 3 ? s[2] : 1;
  std::vector<double> mag(h * w, 0.0);
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t k = 0; k < c; ++k) mag[p] += std::abs(phi[p * c + k]);
  }

  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<std::size_t>(std::ceil(opts.clip_quantile * static_cast<double>(sorted.size())));
  double clip = sorted[std::max<std::size_t>(rank, 1) - 1];
  if (!(clip > 0.0)) clip = sorted.back();

  GrayImage img{w, h, std::vector<std::uint8_t>(h * w, 0)};
  if (!(clip > 0.0)) return img;
  for (std::size_t p = 0; p < h * w; ++p) {
    const double v = std::min(mag[p], clip) / clip;
    img.pixels[p] = static_cast<std::uint8_t>(std::lround(255.0 * v));
  }
  return img;
}

}  // namespace nuig
