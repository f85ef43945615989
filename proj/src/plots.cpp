#include "vfa/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vfa {

namespace {

// 3x5 glyphs for digits plus '.', '-', 'x'; row-major bitmask
const std::uint8_t* glyph_for(char c) {
  static const std::uint8_t digits[13][5] = {
      {0b111, 0b101, 0b101, 0b101, 0b111},  // 0
      {0b010, 0b110, 0b010, 0b010, 0b111},  // 1
      {0b111, 0b001, 0b111, 0b100, 0b111},  // 2
      {0b111, 0b001, 0b111, 0b001, 0b111},  // 3
      {0b101, 0b101, 0b111, 0b001, 0b001},  // 4
      {0b111, 0b100, 0b111, 0b001, 0b111},  // 5
      {0b111, 0b100, 0b111, 0b101, 0b111},  // 6
      {0b111, 0b001, 0b001, 0b001, 0b001},  // 7
      {0b111, 0b101, 0b111, 0b101, 0b111},  // 8
      {0b111, 0b101, 0b111, 0b001, 0b111},  // 9
      {0b000, 0b000, 0b000, 0b000, 0b010},  // .
      {0b000, 0b000, 0b111, 0b000, 0b000},  // -
      {0b000, 0b101, 0b010, 0b101, 0b000},  // x
  };
  if (c >= '0' && c <= '9') return digits[c - '0'];
  if (c == '.') return digits[10];
  if (c == '-') return digits[11];
  return digits[12];
}

void stamp_text(Image& img, const std::string& text, int x0, int y0, int scale) {
  int x = x0;
  for (char c : text) {
    const std::uint8_t* g = glyph_for(c);
    for (int gy = 0; gy < 5; ++gy)
      for (int gx = 0; gx < 3; ++gx)
        if (g[gy] & (1 << (2 - gx)))
          for (int sy = 0; sy < scale; ++sy)
            for (int sx = 0; sx < scale; ++sx) {
              int py = y0 + gy * scale + sy;
              int px = x + gx * scale + sx;
              if (py >= 0 && py < img.h && px >= 0 && px < img.w)
                for (int ch = 0; ch < 3; ++ch) img.at(py, px, ch) = 0.0;
            }
    x += 4 * scale;
  }
}

void heat_color(double t, double& r, double& g, double& b) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {  // blue -> white
    double u = t * 2.0;
    r = 0.23 + 0.77 * u;
    g = 0.30 + 0.70 * u;
    b = 0.75 + 0.25 * u;
  } else {  // white -> red
    double u = (t - 0.5) * 2.0;
    r = 1.0;
    g = 1.0 - 0.75 * u;
    b = 1.0 - 0.85 * u;
  }
}

void fill(Image& img, double r, double g, double b) {
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      img.at(y, x, 0) = r;
      img.at(y, x, 1) = g;
      img.at(y, x, 2) = b;
    }
}

void draw_line(Image& img, double x0, double y0, double x1, double y1, double r, double g, double b) {
  int steps = int(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
  for (int i = 0; i <= steps; ++i) {
    double t = double(i) / steps;
    int px = int(std::lround(x0 + (x1 - x0) * t));
    int py = int(std::lround(y0 + (y1 - y0) * t));
    if (px >= 0 && px < img.w && py >= 0 && py < img.h) {
      img.at(py, px, 0) = r;
      img.at(py, px, 1) = g;
      img.at(py, px, 2) = b;
    }
  }
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

void render_heatmap_png(const std::string& path, const Mat& grid, int cell_px,
                        std::optional<double> annotate) {
  if (grid.size() == 0) throw InputError("render_heatmap_png: empty grid");
  double lo = grid.minCoeff(), hi = grid.maxCoeff();
  double span = hi - lo;
  Image img(int(grid.rows()) * cell_px, int(grid.cols()) * cell_px, 3);
  for (Eigen::Index gy = 0; gy < grid.rows(); ++gy)
    for (Eigen::Index gx = 0; gx < grid.cols(); ++gx) {
      double t = span > 0 ? (grid(gy, gx) - lo) / span : 0.5;
      double r, g, b;
      heat_color(t, r, g, b);
      for (int dy = 0; dy < cell_px; ++dy)
        for (int dx = 0; dx < cell_px; ++dx) {
          img.at(int(gy) * cell_px + dy, int(gx) * cell_px + dx, 0) = r;
          img.at(int(gy) * cell_px + dy, int(gx) * cell_px + dx, 1) = g;
          img.at(int(gy) * cell_px + dy, int(gx) * cell_px + dx, 2) = b;
        }
    }
  if (annotate) stamp_text(img, fmt3(*annotate), 2, 2, 2);
  save_png(path, img, 8);
}

void render_curves_png(const std::string& path, const std::vector<CurveSeries>& series, double y_min,
                       double y_max, int width, int height) {
  if (series.empty()) throw InputError("render_curves_png: no series");
  Image img(height, width, 3);
  fill(img, 1.0, 1.0, 1.0);
  const int ml = 30, mr = 10, mt = 10, mb = 20;  // margins
  draw_line(img, ml, mt, ml, height - mb, 0, 0, 0);
  draw_line(img, ml, height - mb, width - mr, height - mb, 0, 0, 0);

  static const double palette[][3] = {{0.85, 0.2, 0.2}, {0.2, 0.35, 0.85}, {0.15, 0.6, 0.25},
                                      {0.75, 0.55, 0.1}, {0.5, 0.2, 0.7}};
  size_t max_len = 0;
  for (const auto& s : series) max_len = std::max(max_len, s.values.size());
  if (max_len < 1) throw InputError("render_curves_png: empty series");
  double span = y_max - y_min;
  if (span <= 0) span = 1.0;

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& vals = series[si].values;
    const double* col = palette[si % 5];
    for (size_t i = 0; i + 1 < vals.size(); ++i) {
      auto px = [&](size_t idx) {
        return ml + double(idx) / double(std::max<size_t>(1, max_len - 1)) * (width - ml - mr);
      };
      auto py = [&](double v) {
        return (height - mb) - std::clamp((v - y_min) / span, 0.0, 1.0) * (height - mt - mb);
      };
      draw_line(img, px(i), py(vals[i]), px(i + 1), py(vals[i + 1]), col[0], col[1], col[2]);
    }
    stamp_text(img, std::to_string(si), ml + 6 + int(si) * 14, mt + 2, 2);
  }
  save_png(path, img, 8);
}

void render_bars_png(const std::string& path, const Vec& values, int width, int height) {
  if (values.size() == 0) throw InputError("render_bars_png: empty values");
  Image img(height, width, 3);
  fill(img, 1.0, 1.0, 1.0);
  double lo = std::min(0.0, values.minCoeff());
  double hi = std::max(0.0, values.maxCoeff());
  double span = hi - lo;
  if (span <= 0) span = 1.0;
  int zero_y = int(std::lround((height - 1) * (hi / span)));
  draw_line(img, 0, zero_y, width - 1, zero_y, 0.6, 0.6, 0.6);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    int x = int(double(i) / double(values.size()) * width);
    int y = int(std::lround((height - 1) * ((hi - values(i)) / span)));
    draw_line(img, x, zero_y, x, y, 0.2, 0.35, 0.85);
  }
  save_png(path, img, 8);
}

}  // namespace vfa
