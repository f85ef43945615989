#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vfa/common.hpp"
#include "vfa/image.hpp"

// Minimal static plot rendering (PNG). Everything here is a pure function of
// the numbers handed in, so re-rendering from persisted JSON reproduces the
// same files byte for byte.

namespace vfa {

// Cool-to-warm colormap over [lo, hi]; optional numeric annotation stamped in
// the top-left corner (used for similarity-map peaks).
void render_heatmap_png(const std::string& path, const Mat& grid, int cell_px = 24,
                        std::optional<double> annotate = std::nullopt);

struct CurveSeries {
  std::string label;
  std::vector<double> values;
};

// Line plot with x = index (layer), y in [y_min, y_max].
void render_curves_png(const std::string& path, const std::vector<CurveSeries>& series, double y_min,
                       double y_max, int width = 480, int height = 320);

// One vertical bar per element.
void render_bars_png(const std::string& path, const Vec& values, int width = 480, int height = 240);

}  // namespace vfa
