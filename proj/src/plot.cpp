#include "deepssc/plot.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include "deepssc/common.hpp"

namespace deepssc {

namespace {

// ---------------------------------------------------------------------------
// 5x7 bitmap font: digits, uppercase letters, and the punctuation the axis
// labels use. Lowercase input is rendered uppercase.
// ---------------------------------------------------------------------------

struct Glyph {
  char ch;
  uint8_t rows[7];  // low 5 bits per row, MSB-left
};

constexpr Glyph kGlyphs[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'=', {0x00, 0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kGlyphs)
    if (g.ch == up) return &g;
  return nullptr;
}

class Canvas {
 public:
  Canvas(int64_t w, int64_t h) : w_(w), h_(h), px_(static_cast<size_t>(w * h * 3), 0xFF) {}

  void set(int64_t x, int64_t y, uint32_t rgb) {
    if (x < 0 || x >= w_ || y < 0 || y >= h_) return;
    auto* p = &px_[static_cast<size_t>((y * w_ + x) * 3)];
    p[0] = static_cast<uint8_t>(rgb >> 16);
    p[1] = static_cast<uint8_t>(rgb >> 8);
    p[2] = static_cast<uint8_t>(rgb);
  }

  void line(int64_t x0, int64_t y0, int64_t x1, int64_t y1, uint32_t rgb,
            int64_t thickness = 1) {
    const int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int64_t err = dx + dy;
    while (true) {
      for (int64_t ox = 0; ox < thickness; ++ox)
        for (int64_t oy = 0; oy < thickness; ++oy) set(x0 + ox, y0 + oy, rgb);
      if (x0 == x1 && y0 == y1) break;
      const int64_t e2 = 2 * err;
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

  void marker(int64_t x, int64_t y, uint32_t rgb) {
    for (int64_t dx = -2; dx <= 2; ++dx)
      for (int64_t dy = -2; dy <= 2; ++dy)
        if (std::abs(dx) + std::abs(dy) <= 2) set(x + dx, y + dy, rgb);
  }

  void text(int64_t x, int64_t y, const std::string& s, uint32_t rgb) {
    for (char c : s) {
      if (const Glyph* g = find_glyph(c)) {
        for (int64_t r = 0; r < 7; ++r)
          for (int64_t b = 0; b < 5; ++b)
            if (g->rows[r] & (1 << (4 - b))) set(x + b, y + r, rgb);
      }
      x += 6;
    }
  }

  int64_t width() const { return w_; }
  int64_t height() const { return h_; }
  const std::vector<uint8_t>& pixels() const { return px_; }

 private:
  int64_t w_, h_;
  std::vector<uint8_t> px_;
};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void put_chunk(std::ofstream& f, const char type[4], const std::vector<uint8_t>& data) {
  std::vector<uint8_t> head;
  put_u32(head, static_cast<uint32_t>(data.size()));
  f.write(reinterpret_cast<const char*>(head.data()), 4);
  f.write(type, 4);
  if (!data.empty())
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<uint8_t> tail;
  put_u32(tail, crc);
  f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

void write_png(const std::string& path, const Canvas& canvas) {
  const int64_t w = canvas.width(), h = canvas.height();
  // Raw scanlines, each prefixed with filter type 0.
  std::vector<uint8_t> raw;
  raw.reserve(static_cast<size_t>(h * (w * 3 + 1)));
  for (int64_t y = 0; y < h; ++y) {
    raw.push_back(0);
    const uint8_t* row = canvas.pixels().data() + y * w * 3;
    raw.insert(raw.end(), row, row + w * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                9) != Z_OK)
    throw IoError("png compression failed");
  compressed.resize(bound);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write plot file: " + path);
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(w));
  put_u32(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  put_chunk(f, "IHDR", ihdr);
  put_chunk(f, "IDAT", compressed);
  put_chunk(f, "IEND", {});
  if (!f) throw IoError("plot write failed: " + path);
}

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), std::abs(v) < 10 ? "%.2f" : "%.0f", v);
  return buf;
}

}  // namespace

void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& x,
                     const std::vector<PlotSeries>& series, double y_min,
                     double y_max) {
  if (x.empty() || series.empty()) throw ContractError("empty plot input");
  for (const auto& s : series)
    if (s.y.size() != x.size())
      throw ContractError("plot series length mismatch: " + s.label);

  const int64_t width = 720, height = 480;
  const int64_t left = 70, right = 40, top = 40, bottom = 60;
  const int64_t pw = width - left - right, ph = height - top - bottom;
  Canvas canvas(width, height);

  const double x_min = *std::min_element(x.begin(), x.end());
  const double x_max = *std::max_element(x.begin(), x.end());
  const double x_span = x_max > x_min ? x_max - x_min : 1.0;
  const double y_span = y_max > y_min ? y_max - y_min : 1.0;

  auto px = [&](double xv) {
    return left + static_cast<int64_t>(std::lround((xv - x_min) / x_span * pw));
  };
  auto py = [&](double yv) {
    return top + ph - static_cast<int64_t>(std::lround((yv - y_min) / y_span * ph));
  };

  // Frame and grid.
  const uint32_t grid = 0xD8D8D8, axis = 0x202020;
  for (int64_t i = 0; i <= 5; ++i) {
    const double yv = y_min + y_span * static_cast<double>(i) / 5.0;
    canvas.line(left, py(yv), left + pw, py(yv), grid);
    canvas.text(8, py(yv) - 3, format_tick(yv), axis);
  }
  for (size_t i = 0; i < x.size(); ++i) {
    canvas.line(px(x[i]), top, px(x[i]), top + ph, grid);
    canvas.text(px(x[i]) - 8, top + ph + 8, format_tick(x[i]), axis);
  }
  canvas.line(left, top, left, top + ph, axis);
  canvas.line(left, top + ph, left + pw, top + ph, axis);
  canvas.text(left, 16, title, axis);
  canvas.text(left + pw / 2 - 6 * static_cast<int64_t>(x_label.size()) / 2,
              height - 24, x_label, axis);
  canvas.text(8, top - 16, y_label, axis);

  // Series.
  for (const auto& s : series) {
    for (size_t i = 0; i + 1 < x.size(); ++i)
      canvas.line(px(x[i]), py(s.y[i]), px(x[i + 1]), py(s.y[i + 1]), s.rgb, 2);
    for (size_t i = 0; i < x.size(); ++i) canvas.marker(px(x[i]), py(s.y[i]), s.rgb);
  }

  // Legend.
  int64_t ly = top + 8;
  for (const auto& s : series) {
    const int64_t lx = left + pw - 150;
    canvas.line(lx, ly + 3, lx + 18, ly + 3, s.rgb, 2);
    canvas.text(lx + 24, ly, s.label, axis);
    ly += 12;
  }

  write_png(path, canvas);
}

}  // namespace deepssc
