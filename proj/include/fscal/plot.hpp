#pragma once

// Tiny raster plotting into PNG: line/scatter charts and histograms with
// numeric tick labels. Enough for quick-look result figures.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fscal {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image(int w, int h);
  void set(int x, int y, std::uint32_t color);
  std::uint32_t get(int x, int y) const;
};

std::string encode_png(const Image& img);
void write_png(const Image& img, const std::filesystem::path& path);

struct Series {
  std::vector<double> x;
  std::vector<double> y;
  std::uint32_t color = 0x1f77b4;
};

/// Axes spanning [x_min, x_max] x [y_min, y_max] with a polyline and dots
/// per series.
Image line_chart(const std::vector<Series>& series, double x_min, double x_max, double y_min,
                 double y_max);

/// Bar chart of counts over `bins` equal bins of [lo, hi].
Image histogram(const std::vector<double>& values, int bins, double lo, double hi);

}  // namespace fscal
