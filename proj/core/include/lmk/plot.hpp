#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lmk/eval.hpp"

namespace lmk {

/// Minimal deterministic RGB raster canvas with a 5x7 bitmap font; charts are
/// written as binary PPM so plot outputs are byte-stable under a fixed seed.
class Canvas {
 public:
  Canvas(int64_t width, int64_t height, std::array<uint8_t, 3> bg = {255, 255, 255});

  int64_t width() const { return w_; }
  int64_t height() const { return h_; }

  void set(int64_t x, int64_t y, std::array<uint8_t, 3> rgb);
  void line(int64_t x0, int64_t y0, int64_t x1, int64_t y1, std::array<uint8_t, 3> rgb);
  void fill_rect(int64_t x0, int64_t y0, int64_t x1, int64_t y1, std::array<uint8_t, 3> rgb);
  void text(int64_t x, int64_t y, const std::string& s, std::array<uint8_t, 3> rgb,
            int scale = 1);

  void save_ppm(const std::string& path) const;

 private:
  int64_t w_, h_;
  std::vector<uint8_t> px_;
};

/// Error-vs-n_im curves, one line per (protocol, regime) report.
void plot_error_curves(const std::vector<EvalReport>& reports, const std::string& path);

/// Sorted per-point consistency bars.
void plot_point_bars(const EvalReport& report, const std::string& path);

}  // namespace lmk
