#pragma once

#include <cstddef>
#include <vector>

#include "emberpipe/errors.hpp"

namespace emberpipe {

/// Scalar intensity grid, row-major. Pixel (u, v) has its center at (u, v).
struct ThermalImage {
  int width = 160;
  int height = 120;
  std::vector<double> data;
  double stamp = 0.0;

  ThermalImage() = default;
  ThermalImage(int w, int h, double fill = 0.0) : width(w), height(h), data(std::size_t(w) * h, fill) {
    if (w <= 0 || h <= 0) throw DegenerateInput("thermal image dimensions must be > 0");
  }

  double& at(int u, int v) { return data[std::size_t(v) * width + u]; }
  double at(int u, int v) const { return data[std::size_t(v) * width + u]; }
};

}  // namespace emberpipe
