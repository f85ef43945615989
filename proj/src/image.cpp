#include "vfa/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <jpeglib.h>
#include <png.h>

namespace vfa {

bool Image::finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Image clamp01(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = std::min(1.0, std::max(0.0, v));
  return out;
}

Image resize_bilinear(const Image& in, int out_h, int out_w) {
  if (in.h <= 0 || in.w <= 0) throw ShapeError("resize_bilinear: empty input");
  Image out(out_h, out_w, in.c);
  const double sy_scale = double(in.h) / out_h;
  const double sx_scale = double(in.w) / out_w;
  for (int oy = 0; oy < out_h; ++oy) {
    double sy = (oy + 0.5) * sy_scale - 0.5;
    int y0 = int(std::floor(sy));
    double fy = sy - y0;
    int y0c = std::clamp(y0, 0, in.h - 1);
    int y1c = std::clamp(y0 + 1, 0, in.h - 1);
    for (int ox = 0; ox < out_w; ++ox) {
      double sx = (ox + 0.5) * sx_scale - 0.5;
      int x0 = int(std::floor(sx));
      double fx = sx - x0;
      int x0c = std::clamp(x0, 0, in.w - 1);
      int x1c = std::clamp(x0 + 1, 0, in.w - 1);
      for (int ch = 0; ch < in.c; ++ch) {
        double v = (1 - fy) * ((1 - fx) * in.at(y0c, x0c, ch) + fx * in.at(y0c, x1c, ch)) +
                   fy * ((1 - fx) * in.at(y1c, x0c, ch) + fx * in.at(y1c, x1c, ch));
        out.at(oy, ox, ch) = v;
      }
    }
  }
  return out;
}

void resize_bilinear_backward(const Image& din_shape_ref, Image& din, const Image& dout) {
  if (!din.same_shape(din_shape_ref)) din = Image(din_shape_ref.h, din_shape_ref.w, din_shape_ref.c);
  const int in_h = din.h, in_w = din.w;
  const double sy_scale = double(in_h) / dout.h;
  const double sx_scale = double(in_w) / dout.w;
  for (int oy = 0; oy < dout.h; ++oy) {
    double sy = (oy + 0.5) * sy_scale - 0.5;
    int y0 = int(std::floor(sy));
    double fy = sy - y0;
    int y0c = std::clamp(y0, 0, in_h - 1);
    int y1c = std::clamp(y0 + 1, 0, in_h - 1);
    for (int ox = 0; ox < dout.w; ++ox) {
      double sx = (ox + 0.5) * sx_scale - 0.5;
      int x0 = int(std::floor(sx));
      double fx = sx - x0;
      int x0c = std::clamp(x0, 0, in_w - 1);
      int x1c = std::clamp(x0 + 1, 0, in_w - 1);
      for (int ch = 0; ch < dout.c; ++ch) {
        double g = dout.at(oy, ox, ch);
        din.at(y0c, x0c, ch) += (1 - fy) * (1 - fx) * g;
        din.at(y0c, x1c, ch) += (1 - fy) * fx * g;
        din.at(y1c, x0c, ch) += fy * (1 - fx) * g;
        din.at(y1c, x1c, ch) += fy * fx * g;
      }
    }
  }
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_atomic(const std::string& path, const void* bytes, size_t len) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp);
    f.write(reinterpret_cast<const char*>(bytes), std::streamsize(len));
    if (!f) throw IoError("short write to " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("rename failed for " + path + ": " + ec.message());
  }
}

void write_file_atomic(const std::string& path, const std::string& text) {
  write_file_atomic(path, text.data(), text.size());
}

// --- PNG ------------------------------------------------------------------

namespace {

struct PngReadCtx {
  const std::uint8_t* p;
  size_t remaining;
};

void png_read_cb(png_structp png, png_bytep out, png_size_t len) {
  auto* ctx = static_cast<PngReadCtx*>(png_get_io_ptr(png));
  if (len > ctx->remaining) png_error(png, "truncated png");
  std::memcpy(out, ctx->p, len);
  ctx->p += len;
  ctx->remaining -= len;
}

void png_write_cb(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void png_flush_cb(png_structp) {}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png init failed");
  }
  std::vector<std::vector<png_byte>> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png decode failed");
  }
  PngReadCtx ctx{bytes.data(), bytes.size()};
  png_set_read_fn(png, &ctx, png_read_cb);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  bit_depth = png_get_bit_depth(png, info);
  size_t rowbytes = png_get_rowbytes(png, info);
  rows.assign(h, std::vector<png_byte>(rowbytes));
  std::vector<png_bytep> row_ptrs(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = rows[y].data();
  png_read_image(png, row_ptrs.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(int(h), int(w), 3);
  if (bit_depth == 16) {
    for (png_uint_32 y = 0; y < h; ++y)
      for (png_uint_32 x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          size_t off = (size_t(x) * 3 + ch) * 2;
          std::uint16_t v = std::uint16_t(rows[y][off] << 8 | rows[y][off + 1]);
          img.at(int(y), int(x), ch) = v / 65535.0;
        }
  } else {
    for (png_uint_32 y = 0; y < h; ++y)
      for (png_uint_32 x = 0; x < w; ++x)
        for (int ch = 0; ch < 3; ++ch) img.at(int(y), int(x), ch) = rows[y][size_t(x) * 3 + ch] / 255.0;
  }
  return img;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img, int bit_depth) {
  if (img.c != 3) throw ShapeError("encode_png expects 3 channels");
  if (bit_depth != 8 && bit_depth != 16) throw ConfigError("png bit depth must be 8 or 16");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed");
  }
  png_set_write_fn(png, &out, png_write_cb, png_flush_cb);
  png_set_IHDR(png, info, img.w, img.h, bit_depth, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  if (bit_depth == 16) {
    std::vector<png_byte> row(size_t(img.w) * 6);
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          double v = std::min(1.0, std::max(0.0, img.at(y, x, ch)));
          auto q = std::uint16_t(std::lround(v * 65535.0));
          row[(size_t(x) * 3 + ch) * 2] = png_byte(q >> 8);
          row[(size_t(x) * 3 + ch) * 2 + 1] = png_byte(q & 0xff);
        }
      png_write_row(png, row.data());
    }
  } else {
    std::vector<png_byte> row(size_t(img.w) * 3);
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          double v = std::min(1.0, std::max(0.0, img.at(y, x, ch)));
          row[size_t(x) * 3 + ch] = png_byte(std::lround(v * 255.0));
        }
      png_write_row(png, row.data());
    }
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
  return out;
}

void save_png(const std::string& path, const Image& img, int bit_depth) {
  auto bytes = encode_png(img, bit_depth);
  write_file_atomic(path, bytes.data(), bytes.size());
}

// --- JPEG -----------------------------------------------------------------

namespace {

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  longjmp(mgr->jump, 1);
}

Image decode_jpeg_bytes(const std::vector<std::uint8_t>& bytes) {
  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("jpeg decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  Image img(int(cinfo.output_height), int(cinfo.output_width), 3);
  std::vector<JSAMPLE> row(size_t(cinfo.output_width) * 3);
  JSAMPROW rp = row.data();
  int y = 0;
  while (cinfo.output_scanline < cinfo.output_height) {
    jpeg_read_scanlines(&cinfo, &rp, 1);
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = row[size_t(x) * 3 + ch] / 255.0;
    ++y;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

std::vector<std::uint8_t> encode_jpeg(const Image& img, int quality) {
  if (img.c != 3) throw ShapeError("encode_jpeg expects 3 channels");
  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  unsigned char* buf = nullptr;
  unsigned long buf_len = 0;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    if (buf) free(buf);
    throw IoError("jpeg encode failed");
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &buf_len);
  cinfo.image_width = JDIMENSION(img.w);
  cinfo.image_height = JDIMENSION(img.h);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  std::vector<JSAMPLE> row(size_t(img.w) * 3);
  JSAMPROW rp = row.data();
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double v = std::min(1.0, std::max(0.0, img.at(y, x, ch)));
        row[size_t(x) * 3 + ch] = JSAMPLE(std::lround(v * 255.0));
      }
    jpeg_write_scanlines(&cinfo, &rp, 1);
  }
  jpeg_finish_compress(&cinfo);
  std::vector<std::uint8_t> out(buf, buf + buf_len);
  jpeg_destroy_compress(&cinfo);
  free(buf);
  return out;
}

// --- PPM + dispatch ---------------------------------------------------------

namespace {

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  // binary P6 only; enough for test fixtures
  size_t pos = 0;
  auto token = [&]() -> std::string {
    while (pos < bytes.size() && (std::isspace(bytes[pos]) || bytes[pos] == '#')) {
      if (bytes[pos] == '#')
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      else
        ++pos;
    }
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(char(bytes[pos++]));
    return t;
  };
  if (token() != "P6") throw IoError("unsupported ppm variant");
  int w = std::stoi(token());
  int h = std::stoi(token());
  int maxv = std::stoi(token());
  if (maxv != 255) throw IoError("ppm maxval must be 255");
  ++pos;  // single whitespace after maxval
  if (bytes.size() - pos < size_t(w) * h * 3) throw IoError("truncated ppm");
  Image img(h, w, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = bytes[pos++] / 255.0;
  return img;
}

}  // namespace

Image decode_image(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() >= 8 && bytes[0] == 0x89 && bytes[1] == 'P' && bytes[2] == 'N' && bytes[3] == 'G')
    return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
    return decode_jpeg_bytes(bytes);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  throw IoError("unrecognized raster format");
}

Image load_image(const std::string& path) { return decode_image(read_file(path)); }

}  // namespace vfa
