#pragma once

#include <string>
#include <vector>

#include "promptseg/common.hpp"
#include "promptseg/image.hpp"

namespace promptseg {

enum class ViewKind { identity, hflip, contrast, crop };

std::string to_string(ViewKind kind);
ViewKind view_kind_from_string(const std::string& s);
// Parses a comma-separated list like "identity,hflip,contrast,crop".
std::vector<ViewKind> parse_view_kinds(const std::string& csv);

// Crop-grid parameters for the crop view and its probability gate.
struct CropGridSpec {
  int crop_size = 224;
  int stride = 50;
  double gate_threshold = 0.3;

  void validate() const;
};

// Grid start positions along one axis: 0, stride, 2*stride, ... with a
// final position clamped so the last crop fits fully inside the image.
std::vector<int> grid_positions(int image_dim, int crop_size, int stride);

// An invertible image-space transformation. forward() produces the view;
// backward_relevance() maps relevance computed on the view back onto the
// original pixel grid together with a mask of observed pixels.
struct ViewTransform {
  ViewKind kind = ViewKind::identity;
  float contrast_factor = 1.0f;  // contrast views
  int crop_x = 0, crop_y = 0, crop_w = 0, crop_h = 0;  // crop views

  Image forward(const Image& image) const;

  struct AlignedRelevance {
    FloatField scores;   // zero outside the observed region
    ByteField validity;  // 1 where the view observed the pixel
  };
  AlignedRelevance backward_relevance(const FloatField& view_scores, int orig_h,
                                      int orig_w) const;
};

// One transform per non-crop kind; the crop kind expands into the full
// clamped grid. The contrast factor is drawn from the seeded generator
// in [0.5, 1.5].
std::vector<ViewTransform> make_views(const Image& image, const std::vector<ViewKind>& kinds,
                                      const CropGridSpec& grid, uint64_t seed);

}  // namespace promptseg
