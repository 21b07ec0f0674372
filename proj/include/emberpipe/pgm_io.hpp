#pragma once

// Binary portable graymap (P5) I/O for thermal frames. Pixel values are
// stored as unsigned integers, 16-bit big-endian when maxval > 255.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "emberpipe/errors.hpp"
#include "emberpipe/thermal_image.hpp"

namespace emberpipe {

namespace detail {

inline std::string pgm_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> tok;
  return tok;
}

inline int pgm_int(std::istream& in, const char* what) {
  const std::string tok = pgm_token(in);
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("pgm: bad ") + what + " '" + tok + "'", 0);
  }
}

}  // namespace detail

inline ThermalImage read_pgm(std::istream& in) {
  if (detail::pgm_token(in) != "P5") throw ParseError("pgm: expected P5 magic", 1);
  const int w = detail::pgm_int(in, "width");
  const int h = detail::pgm_int(in, "height");
  const int maxval = detail::pgm_int(in, "maxval");
  if (w <= 0 || h <= 0) throw ParseError("pgm: non-positive dimensions", 0);
  if (maxval <= 0 || maxval > 65535) throw ParseError("pgm: maxval out of range", 0);
  in.get();  // single whitespace before raster
  ThermalImage img(w, h, 0.0);
  const bool wide = maxval > 255;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      int value = 0;
      if (wide) {
        const int hi = in.get(), lo = in.get();
        if (hi == EOF || lo == EOF) throw ParseError("pgm: truncated raster", 0);
        value = (hi << 8) | lo;
      } else {
        const int b = in.get();
        if (b == EOF) throw ParseError("pgm: truncated raster", 0);
        value = b;
      }
      img.at(u, v) = value;
    }
  return img;
}

inline ThermalImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_pgm(in);
}

inline void write_pgm(std::ostream& out, const ThermalImage& img) {
  out << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      const auto x = static_cast<unsigned>(std::clamp(std::lround(img.at(u, v)), 0L, 65535L));
      out.put(char((x >> 8) & 0xff));
      out.put(char(x & 0xff));
    }
}

inline void write_pgm(const std::string& path, const ThermalImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_pgm(out, img);
}

}  // namespace emberpipe
