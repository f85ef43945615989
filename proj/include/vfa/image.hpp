#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vfa/common.hpp"

namespace vfa {

// Interleaved HWC raster with double samples. Pixel data lives in [0,1];
// gradient buffers reuse the same struct with unrestricted values.
struct Image {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h_, int w_, int c_) : h(h_), w(w_), c(c_), data(size_t(h_) * w_ * c_, 0.0) {}

  double& at(int y, int x, int ch) { return data[(size_t(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return data[(size_t(y) * w + x) * c + ch]; }
  size_t count() const { return data.size(); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
  bool finite() const;
};

Image clamp01(const Image& img);

// Bilinear resize with half-pixel sample mapping; exact identity when the
// output shape equals the input shape.
Image resize_bilinear(const Image& in, int out_h, int out_w);

// Accumulates d(resize)/d(in) into din given upstream grads on the output.
void resize_bilinear_backward(const Image& din_shape_ref, Image& din, const Image& dout);

// --- file I/O -------------------------------------------------------------

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file_atomic(const std::string& path, const void* bytes, size_t len);
void write_file_atomic(const std::string& path, const std::string& text);

// Sniffs PNG / JPEG / PPM(P6) by magic bytes.
Image decode_image(const std::vector<std::uint8_t>& bytes);
Image load_image(const std::string& path);

// Lossless PNG, bit_depth 8 or 16.
std::vector<std::uint8_t> encode_png(const Image& img, int bit_depth);
void save_png(const std::string& path, const Image& img, int bit_depth);

// JPEG round trip used by the compression defense.
std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality);

}  // namespace vfa
