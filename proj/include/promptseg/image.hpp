#pragma once

#include <array>
#include <string>

#include "promptseg/common.hpp"

namespace promptseg {

// Interleaved RGB raster, values in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;  // size h*w*3, row-major

  Image() = default;
  Image(int h, int w) : height(h), width(w), rgb(size_t(h) * w * 3, 0.0f) {}

  float* pixel(int y, int x) { return &rgb[(size_t(y) * width + x) * 3]; }
  const float* pixel(int y, int x) const { return &rgb[(size_t(y) * width + x) * 3]; }

  bool empty() const { return rgb.empty(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }
};

struct Rgb8 {
  uint8_t r, g, b;
};

// Distinct overlay colors for labels 1..N (label 0 stays unpainted).
const std::array<Rgb8, 12>& label_palette();

// --- geometry / photometry primitives used by the augmentation views ---

Image hflip(const Image& img);
FloatField hflip(const FloatField& f);
Image crop(const Image& img, int x0, int y0, int w, int h);
// Contrast scaling about the per-image mean, clamped to [0,1].
Image adjust_contrast(const Image& img, float factor);

// Separable box blur of radius r (window 2r+1, renormalized at borders).
FloatField box_blur(const FloatField& f, int radius);

// --- file IO (PNG via libpng, JPEG via libjpeg) ---

Image load_image(const std::string& path);
void save_png_rgb(const std::string& path, const Image& img);

// 8-bit single-channel PNG. Palette PNGs decode to their raw indices,
// which is what VOC-style label masks require.
ByteField load_png_gray(const std::string& path);
void save_png_gray(const std::string& path, const ByteField& mask);

// Relevance heatmap rendered with a blue-to-red ramp.
void save_heatmap_png(const std::string& path, const FloatField& map);

// Label overlay: image blended with per-label colors at the given alpha.
Image render_overlay(const Image& img, const ByteField& labels, float alpha = 0.5f);

}  // namespace promptseg
