#include "lmk/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace lmk {

namespace {

// 5x7 glyphs, one bit per pixel, row-major from the top.
struct Glyph {
  char ch;
  std::array<uint8_t, 7> rows;  // low 5 bits used
};

constexpr Glyph kFont[] = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {',', {0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {'%', {0x19, 0x1a, 0x02, 0x04, 0x08, 0x0b, 0x13}},
    {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'B', {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}},
    {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
    {'D', {0x1c, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1c}},
    {'E', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}},
    {'F', {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}},
    {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
    {'H', {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
    {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
    {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
    {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
    {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11}},
    {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
};

const Glyph* find_glyph(char c) {
  c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont) {
    if (g.ch == c) return &g;
  }
  return nullptr;
}

const std::array<std::array<uint8_t, 3>, 6> kSeries = {{{31, 119, 180},
                                                        {255, 127, 14},
                                                        {44, 160, 44},
                                                        {214, 39, 40},
                                                        {148, 103, 189},
                                                        {140, 86, 75}}};

}  // namespace

Canvas::Canvas(int64_t width, int64_t height, std::array<uint8_t, 3> bg)
    : w_(width), h_(height), px_(static_cast<size_t>(width * height * 3)) {
  for (int64_t i = 0; i < width * height; ++i) {
    px_[3 * i] = bg[0];
    px_[3 * i + 1] = bg[1];
    px_[3 * i + 2] = bg[2];
  }
}

void Canvas::set(int64_t x, int64_t y, std::array<uint8_t, 3> rgb) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  const size_t i = static_cast<size_t>(3 * (y * w_ + x));
  px_[i] = rgb[0];
  px_[i + 1] = rgb[1];
  px_[i + 2] = rgb[2];
}

void Canvas::line(int64_t x0, int64_t y0, int64_t x1, int64_t y1, std::array<uint8_t, 3> rgb) {
  const int64_t dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int64_t sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int64_t err = dx + dy;
  while (true) {
    set(x0, y0, rgb);
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

void Canvas::fill_rect(int64_t x0, int64_t y0, int64_t x1, int64_t y1,
                       std::array<uint8_t, 3> rgb) {
  for (int64_t y = std::min(y0, y1); y <= std::max(y0, y1); ++y) {
    for (int64_t x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, rgb);
  }
}

void Canvas::text(int64_t x, int64_t y, const std::string& s, std::array<uint8_t, 3> rgb,
                  int scale) {
  int64_t cx = x;
  for (char c : s) {
    if (const Glyph* g = find_glyph(c)) {
      for (int row = 0; row < 7; ++row) {
        for (int col = 0; col < 5; ++col) {
          if (g->rows[row] & (1 << (4 - col))) {
            for (int dy = 0; dy < scale; ++dy) {
              for (int dx = 0; dx < scale; ++dx) {
                set(cx + col * scale + dx, y + row * scale + dy, rgb);
              }
            }
          }
        }
      }
    }
    cx += 6 * scale;
  }
}

void Canvas::save_ppm(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write plot '" + path + "'");
  os << "P6\n" << w_ << " " << h_ << "\n255\n";
  os.write(reinterpret_cast<const char*>(px_.data()), static_cast<std::streamsize>(px_.size()));
}

void plot_error_curves(const std::vector<EvalReport>& reports, const std::string& path) {
  if (reports.empty()) throw std::invalid_argument("plot_error_curves: no reports");
  const int64_t W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 60;
  Canvas c(W, H);

  std::vector<std::string> labels;
  double vmax = 0;
  for (const auto& r : reports) {
    for (const auto& [label, v] : r.rows) {
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
      vmax = std::max(vmax, v);
    }
  }
  if (vmax <= 0) vmax = 1;
  vmax *= 1.1;

  c.line(ml, H - mb, W - mr, H - mb, {0, 0, 0});
  c.line(ml, mt, ml, H - mb, {0, 0, 0});
  c.text(10, 10, reports.front().protocol + " ERROR VS N IM", {0, 0, 0});

  const int64_t plot_w = W - ml - mr, plot_h = H - mb - mt;
  auto x_of = [&](size_t i) {
    return ml + static_cast<int64_t>(plot_w * (labels.size() == 1 ? 0.5 : double(i) / (labels.size() - 1)));
  };
  auto y_of = [&](double v) { return H - mb - static_cast<int64_t>(plot_h * (v / vmax)); };

  for (size_t i = 0; i < labels.size(); ++i) {
    c.line(x_of(i), H - mb, x_of(i), H - mb + 4, {0, 0, 0});
    c.text(x_of(i) - 3 * static_cast<int64_t>(labels[i].size()), H - mb + 8, labels[i], {0, 0, 0});
  }
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = vmax * tick / 4;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    c.line(ml - 4, y_of(v), ml, y_of(v), {0, 0, 0});
    c.text(ml - 6 * static_cast<int64_t>(std::strlen(buf)) - 8, y_of(v) - 3, buf, {0, 0, 0});
  }

  for (size_t r = 0; r < reports.size(); ++r) {
    const auto color = kSeries[r % kSeries.size()];
    const auto& rows = reports[r].rows;
    for (size_t i = 0; i + 1 < rows.size(); ++i) {
      auto i0 = std::find(labels.begin(), labels.end(), rows[i].first) - labels.begin();
      auto i1 = std::find(labels.begin(), labels.end(), rows[i + 1].first) - labels.begin();
      c.line(x_of(i0), y_of(rows[i].second), x_of(i1), y_of(rows[i + 1].second), color);
    }
    for (const auto& [label, v] : rows) {
      auto i = std::find(labels.begin(), labels.end(), label) - labels.begin();
      c.fill_rect(x_of(i) - 2, y_of(v) - 2, x_of(i) + 2, y_of(v) + 2, color);
    }
    c.text(W - mr - 150, mt + 12 * static_cast<int64_t>(r), reports[r].regime, color);
  }
  c.save_ppm(path);
}

void plot_point_bars(const EvalReport& report, const std::string& path) {
  const int64_t W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 60;
  Canvas c(W, H);
  double vmax = 0;
  for (const auto& [_, v] : report.rows) vmax = std::max(vmax, v);
  if (vmax <= 0) vmax = 1;
  vmax *= 1.1;
  c.line(ml, H - mb, W - mr, H - mb, {0, 0, 0});
  c.line(ml, mt, ml, H - mb, {0, 0, 0});
  c.text(10, 10, report.protocol + " PER POINT " + report.regime, {0, 0, 0});
  const int64_t n = static_cast<int64_t>(report.rows.size());
  const int64_t plot_w = W - ml - mr, plot_h = H - mb - mt;
  const int64_t bw = std::max<int64_t>(4, plot_w / (2 * std::max<int64_t>(n, 1)));
  for (int64_t i = 0; i < n; ++i) {
    const auto& [label, v] = report.rows[i];
    const int64_t x = ml + plot_w * (2 * i + 1) / (2 * n);
    const int64_t y = H - mb - static_cast<int64_t>(plot_h * (v / vmax));
    c.fill_rect(x - bw / 2, y, x + bw / 2, H - mb - 1, kSeries[0]);
    c.text(x - 3 * static_cast<int64_t>(label.size()), H - mb + 8, label, {0, 0, 0});
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    c.text(x - 3 * static_cast<int64_t>(std::strlen(buf)), y - 10, buf, {60, 60, 60});
  }
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = vmax * tick / 4;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    const int64_t y = H - mb - static_cast<int64_t>(plot_h * (v / vmax));
    c.line(ml - 4, y, ml, y, {0, 0, 0});
    c.text(ml - 6 * static_cast<int64_t>(std::strlen(buf)) - 8, y - 3, buf, {0, 0, 0});
  }
  c.save_ppm(path);
}

}  // namespace lmk
