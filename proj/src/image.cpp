#include "promptseg/image.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <csetjmp>
#include <cstring>
#include <memory>

#include <jpeglib.h>

namespace promptseg {

const std::array<Rgb8, 12>& label_palette() {
  static const std::array<Rgb8, 12> palette = {{
      {230, 25, 75},    // red
      {60, 180, 75},    // green
      {0, 130, 200},    // blue
      {255, 225, 25},   // yellow
      {145, 30, 180},   // purple
      {70, 240, 240},   // cyan
      {245, 130, 48},   // orange
      {240, 50, 230},   // magenta
      {210, 245, 60},   // lime
      {0, 128, 128},    // teal
      {170, 110, 40},   // brown
      {128, 128, 0},    // olive
  }};
  return palette;
}

Image hflip(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float* s = img.pixel(y, img.width - 1 - x);
      float* d = out.pixel(y, x);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
    }
  return out;
}

FloatField hflip(const FloatField& f) {
  FloatField out(f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) out.at(y, x) = f.at(y, f.width - 1 - x);
  return out;
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
  if (x0 < 0 || y0 < 0 || x0 + w > img.width || y0 + h > img.height || w <= 0 || h <= 0)
    fail(ErrorCode::invalid_argument, "crop box out of bounds");
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    std::memcpy(out.pixel(y, 0), img.pixel(y0 + y, x0), size_t(w) * 3 * sizeof(float));
  return out;
}

Image adjust_contrast(const Image& img, float factor) {
  double mean = 0.0;
  for (float v : img.rgb) mean += v;
  mean /= std::max<size_t>(1, img.rgb.size());
  Image out(img.height, img.width);
  for (size_t i = 0; i < img.rgb.size(); ++i) {
    float v = float(mean + (img.rgb[i] - mean) * factor);
    out.rgb[i] = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

FloatField box_blur(const FloatField& f, int radius) {
  if (radius <= 0) return f;
  FloatField tmp(f.height, f.width);
  // horizontal pass
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      int lo = std::max(0, x - radius), hi = std::min(f.width - 1, x + radius);
      double s = 0.0;
      for (int i = lo; i <= hi; ++i) s += f.at(y, i);
      tmp.at(y, x) = float(s / (hi - lo + 1));
    }
  FloatField out(f.height, f.width);
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      int lo = std::max(0, y - radius), hi = std::min(f.height - 1, y + radius);
      double s = 0.0;
      for (int i = lo; i <= hi; ++i) s += tmp.at(i, x);
      out.at(y, x) = float(s / (hi - lo + 1));
    }
  return out;
}

// ----------------------------- PNG -----------------------------

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

bool has_suffix(const std::string& s, const std::string& suf) {
  if (s.size() < suf.size()) return false;
  std::string tail = s.substr(s.size() - suf.size());
  std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
  return tail == suf;
}

void read_png_rows(const std::string& path, bool expand_to_rgb, int& height, int& width,
                   std::vector<uint8_t>& out, int& channels) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorCode::missing_file, "cannot open PNG: " + path);

  uint8_t sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    fail(ErrorCode::io_error, "not a PNG file: " + path);

  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  r.info = png_create_info_struct(r.png);
  if (!r.png || !r.info) fail(ErrorCode::io_error, "libpng init failed");
  if (setjmp(png_jmpbuf(r.png))) fail(ErrorCode::io_error, "PNG decode failed: " + path);

  png_init_io(r.png, fp.get());
  png_set_sig_bytes(r.png, 8);
  png_read_info(r.png, r.info);

  png_uint_32 w = png_get_image_width(r.png, r.info);
  png_uint_32 h = png_get_image_height(r.png, r.info);
  int bit_depth = png_get_bit_depth(r.png, r.info);
  int color_type = png_get_color_type(r.png, r.info);

  if (bit_depth == 16) png_set_strip_16(r.png);
  if (expand_to_rgb) {
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(r.png);
    png_set_strip_alpha(r.png);
  } else {
    // Raw indices/gray values. Palette stays as index data.
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
    if (bit_depth < 8) png_set_packing(r.png);
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA)
      fail(ErrorCode::io_error, "expected single-channel PNG mask: " + path);
    if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(r.png);
  }
  png_read_update_info(r.png, r.info);

  channels = int(png_get_channels(r.png, r.info));
  height = int(h);
  width = int(w);
  out.resize(size_t(h) * w * channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.data() + size_t(y) * w * channels;
  png_read_image(r.png, rows.data());
  png_read_end(r.png, nullptr);
}

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  jmp_buf jump;
  char msg[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  JpegErrorMgr* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->msg);
  longjmp(err->jump, 1);
}

Image decode_jpeg(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorCode::missing_file, "cannot open JPEG: " + path);

  jpeg_decompress_struct cinfo{};
  JpegErrorMgr jerr{};
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  jpeg_create_decompress(&cinfo);

  // longjmp skips destructors, so cleanup stays manual inside this frame
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorCode::io_error, std::string("JPEG decode failed: ") + jerr.msg);
  }

  jpeg_stdio_src(&cinfo, fp.get());
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  Image img(int(cinfo.output_height), int(cinfo.output_width));
  std::vector<uint8_t> row(size_t(cinfo.output_width) * 3);
  uint8_t* rowp = row.data();
  while (cinfo.output_scanline < cinfo.output_height) {
    int y = int(cinfo.output_scanline);
    jpeg_read_scanlines(&cinfo, &rowp, 1);
    float* dst = img.pixel(y, 0);
    for (size_t i = 0; i < row.size(); ++i) dst[i] = row[i] / 255.0f;
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  if (has_suffix(path, ".jpg") || has_suffix(path, ".jpeg")) return decode_jpeg(path);

  int h = 0, w = 0, ch = 0;
  std::vector<uint8_t> raw;
  read_png_rows(path, /*expand_to_rgb=*/true, h, w, raw, ch);
  if (ch != 3) fail(ErrorCode::io_error, "unexpected channel count in " + path);
  Image img(h, w);
  for (size_t i = 0; i < raw.size(); ++i) img.rgb[i] = raw[i] / 255.0f;
  return img;
}

ByteField load_png_gray(const std::string& path) {
  int h = 0, w = 0, ch = 0;
  std::vector<uint8_t> raw;
  read_png_rows(path, /*expand_to_rgb=*/false, h, w, raw, ch);
  if (ch != 1) fail(ErrorCode::io_error, "expected 1 channel in " + path);
  ByteField f(h, w);
  f.data = std::move(raw);
  return f;
}

namespace {

void write_png(const std::string& path, int height, int width, int color_type,
               const uint8_t* data, int channels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(ErrorCode::io_error, "cannot write PNG: " + path);

  PngWriter wtr;
  wtr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  wtr.info = png_create_info_struct(wtr.png);
  if (!wtr.png || !wtr.info) fail(ErrorCode::io_error, "libpng init failed");
  if (setjmp(png_jmpbuf(wtr.png))) fail(ErrorCode::io_error, "PNG encode failed: " + path);

  png_init_io(wtr.png, fp.get());
  png_set_IHDR(wtr.png, wtr.info, png_uint_32(width), png_uint_32(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wtr.png, wtr.info);
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<uint8_t*>(data) + size_t(y) * width * channels;
  png_write_image(wtr.png, rows.data());
  png_write_end(wtr.png, nullptr);
}

uint8_t to_byte(float v) { return uint8_t(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f); }

}  // namespace

void save_png_rgb(const std::string& path, const Image& img) {
  std::vector<uint8_t> raw(img.rgb.size());
  for (size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img.rgb[i]);
  write_png(path, img.height, img.width, PNG_COLOR_TYPE_RGB, raw.data(), 3);
}

void save_png_gray(const std::string& path, const ByteField& mask) {
  write_png(path, mask.height, mask.width, PNG_COLOR_TYPE_GRAY, mask.data.data(), 1);
}

void save_heatmap_png(const std::string& path, const FloatField& map) {
  Image img(map.height, map.width);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      float v = std::clamp(map.at(y, x), 0.0f, 1.0f);
      float* p = img.pixel(y, x);
      // blue (0) -> red (1) ramp through purple
      p[0] = v;
      p[1] = 0.1f * (1.0f - std::abs(2.0f * v - 1.0f));
      p[2] = 1.0f - v;
    }
  save_png_rgb(path, img);
}

Image render_overlay(const Image& img, const ByteField& labels, float alpha) {
  if (img.height != labels.height || img.width != labels.width)
    fail(ErrorCode::shape_mismatch, "overlay: image and labels differ in shape");
  Image out = img;
  const auto& palette = label_palette();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      uint8_t lbl = labels.at(y, x);
      if (lbl == 0) continue;
      const Rgb8& c = palette[(lbl - 1) % palette.size()];
      float* p = out.pixel(y, x);
      p[0] = (1 - alpha) * p[0] + alpha * c.r / 255.0f;
      p[1] = (1 - alpha) * p[1] + alpha * c.g / 255.0f;
      p[2] = (1 - alpha) * p[2] + alpha * c.b / 255.0f;
    }
  return out;
}

}  // namespace promptseg
