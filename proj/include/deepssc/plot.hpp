// Minimal PNG line plots (zlib-backed) for the score-versus-SNR figures.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deepssc {

struct PlotSeries {
  std::string label;
  uint32_t rgb = 0x000000;
  std::vector<double> y;
};

// One polyline per series over shared x values; y axis fixed to
// [y_min, y_max]. Writes a standard RGB PNG.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& x,
                     const std::vector<PlotSeries>& series, double y_min,
                     double y_max);

}  // namespace deepssc
