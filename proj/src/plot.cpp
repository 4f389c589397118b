#include "fscal/plot.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "fscal/error.hpp"
#include "fscal/io.hpp"

namespace fscal {

Image::Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 255) {
  require(w > 0 && h > 0, "Image: dimensions must be positive");
}

void Image::set(int x, int y, std::uint32_t color) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  rgb[i] = static_cast<std::uint8_t>(color >> 16);
  rgb[i + 1] = static_cast<std::uint8_t>(color >> 8);
  rgb[i + 2] = static_cast<std::uint8_t>(color);
}

std::uint32_t Image::get(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return (std::uint32_t{rgb[i]} << 16) | (std::uint32_t{rgb[i + 1]} << 8) | rgb[i + 2];
}

namespace {

void put_u32be(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

void chunk(std::string& out, const char* type, const std::string& data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  put_u32be(out, static_cast<std::uint32_t>(crc));
}

// 3x5 glyphs for tick labels, one row per 3-bit mask.
const std::uint8_t* glyph(char c) {
  static const std::uint8_t digits[10][5] = {
      {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
      {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7}};
  static const std::uint8_t dot[5] = {0, 0, 0, 0, 2};
  static const std::uint8_t minus[5] = {0, 0, 7, 0, 0};
  static const std::uint8_t blank[5] = {0, 0, 0, 0, 0};
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c == '.') return dot;
  if (c == '-') return minus;
  return blank;
}

void draw_text(Image& img, int x, int y, const std::string& s, int scale = 2) {
  for (char c : s) {
    const std::uint8_t* g = glyph(c);
    for (int r = 0; r < 5; ++r) {
      for (int k = 0; k < 3; ++k) {
        if (!(g[r] & (4 >> k))) continue;
        for (int dy = 0; dy < scale; ++dy) {
          for (int dx = 0; dx < scale; ++dx) img.set(x + k * scale + dx, y + r * scale + dy, 0x000000);
        }
      }
    }
    x += 4 * scale;
  }
}

void draw_line(Image& img, int x0, int y0, int x1, int y1, std::uint32_t color) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    img.set(x0, y0, color);
    img.set(x0, y0 + 1, color);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void fill_rect(Image& img, int x0, int y0, int x1, int y1, std::uint32_t color) {
  for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) img.set(x, y, color);
  }
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, std::abs(v - std::round(v)) < 1e-9 ? "%.0f" : "%.2g", v);
  return buf;
}

constexpr int kW = 640, kH = 420, kLeft = 60, kRight = 20, kTop = 20, kBottom = 50;

struct Frame {
  double x_min, x_max, y_min, y_max;
  int px(double x) const {
    const double span = x_max > x_min ? x_max - x_min : 1.0;
    return kLeft + static_cast<int>(std::lround((x - x_min) / span * (kW - kLeft - kRight)));
  }
  int py(double y) const {
    const double span = y_max > y_min ? y_max - y_min : 1.0;
    return kH - kBottom - static_cast<int>(std::lround((y - y_min) / span * (kH - kTop - kBottom)));
  }
};

void draw_axes(Image& img, const Frame& f, int x_ticks) {
  draw_line(img, kLeft, kH - kBottom, kW - kRight, kH - kBottom, 0x000000);
  draw_line(img, kLeft, kTop, kLeft, kH - kBottom, 0x000000);
  for (int i = 0; i <= 4; ++i) {
    const double v = f.y_min + (f.y_max - f.y_min) * i / 4.0;
    const int y = f.py(v);
    draw_line(img, kLeft - 5, y, kLeft, y, 0x000000);
    for (int x = kLeft + 1; x < kW - kRight; x += 4) img.set(x, y, 0xdddddd);
    draw_text(img, 8, y - 5, tick_label(v));
  }
  for (int i = 0; i <= x_ticks; ++i) {
    const double v = f.x_min + (f.x_max - f.x_min) * i / x_ticks;
    const int x = f.px(v);
    draw_line(img, x, kH - kBottom, x, kH - kBottom + 5, 0x000000);
    draw_text(img, x - 8, kH - kBottom + 12, tick_label(v));
  }
}

}  // namespace

std::string encode_png(const Image& img) {
  std::string raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (img.width * 3 + 1));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(&img.rgb[static_cast<std::size_t>(y) * img.width * 3]),
               static_cast<std::size_t>(img.width) * 3);
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string z(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw std::runtime_error("png: compression failed");
  }
  z.resize(len);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit RGB, no interlace
  chunk(out, "IHDR", ihdr);
  chunk(out, "IDAT", z);
  chunk(out, "IEND", "");
  return out;
}

void write_png(const Image& img, const std::filesystem::path& path) { write_file(path, encode_png(img)); }

Image line_chart(const std::vector<Series>& series, double x_min, double x_max, double y_min,
                 double y_max) {
  Image img(kW, kH);
  const Frame f{x_min, x_max, y_min, y_max};
  std::size_t ticks = 4;
  for (const auto& s : series) ticks = std::max(ticks, s.x.size() > 1 ? s.x.size() - 1 : 1);
  draw_axes(img, f, static_cast<int>(std::min<std::size_t>(ticks, 10)));
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const int x = f.px(s.x[i]);
      const int y = f.py(s.y[i]);
      fill_rect(img, x - 3, y - 3, x + 3, y + 3, s.color);
      if (i > 0) draw_line(img, f.px(s.x[i - 1]), f.py(s.y[i - 1]), x, y, s.color);
    }
  }
  return img;
}

Image histogram(const std::vector<double>& values, int bins, double lo, double hi) {
  require(bins >= 1 && hi > lo, "histogram: invalid binning");
  std::vector<int> counts(static_cast<std::size_t>(bins), 0);
  for (double v : values) {
    int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
    counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))]++;
  }
  const int top = std::max(1, *std::max_element(counts.begin(), counts.end()));
  Image img(kW, kH);
  const Frame f{lo, hi, 0.0, static_cast<double>(top)};
  draw_axes(img, f, std::min(bins, 10));
  for (int b = 0; b < bins; ++b) {
    const double x0 = lo + (hi - lo) * b / bins;
    const double x1 = lo + (hi - lo) * (b + 1) / bins;
    if (counts[static_cast<std::size_t>(b)] == 0) continue;
    fill_rect(img, f.px(x0) + 1, f.py(counts[static_cast<std::size_t>(b)]), f.px(x1) - 1, f.py(0) - 1,
              0x4c72b0);
  }
  return img;
}

}  // namespace fscal
