#include "promptseg/views.hpp"

#include <algorithm>
#include <sstream>

namespace promptseg {

std::string to_string(ViewKind kind) {
  switch (kind) {
    case ViewKind::identity: return "identity";
    case ViewKind::hflip: return "hflip";
    case ViewKind::contrast: return "contrast";
    case ViewKind::crop: return "crop";
  }
  return "?";
}

ViewKind view_kind_from_string(const std::string& s) {
  if (s == "identity") return ViewKind::identity;
  if (s == "hflip" || s == "flip") return ViewKind::hflip;
  if (s == "contrast") return ViewKind::contrast;
  if (s == "crop") return ViewKind::crop;
  fail(ErrorCode::invalid_argument, "unknown view kind: " + s);
}

std::vector<ViewKind> parse_view_kinds(const std::string& csv) {
  std::vector<ViewKind> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(view_kind_from_string(item));
  }
  return out;
}

void CropGridSpec::validate() const {
  if (stride <= 0 || stride > crop_size)
    fail(ErrorCode::invalid_argument, "crop grid requires 0 < stride <= crop_size");
  if (gate_threshold < 0.0 || gate_threshold >= 1.0)
    fail(ErrorCode::invalid_argument, "gate_threshold must be in [0, 1)");
}

std::vector<int> grid_positions(int image_dim, int crop_size, int stride) {
  if (image_dim <= crop_size) return {0};
  std::vector<int> pos;
  for (int p = 0; p + crop_size <= image_dim; p += stride) pos.push_back(p);
  if (pos.back() != image_dim - crop_size) pos.push_back(image_dim - crop_size);
  return pos;
}

Image ViewTransform::forward(const Image& image) const {
  switch (kind) {
    case ViewKind::identity: return image;
    case ViewKind::hflip: return hflip(image);
    case ViewKind::contrast: return adjust_contrast(image, contrast_factor);
    case ViewKind::crop: return crop(image, crop_x, crop_y, crop_w, crop_h);
  }
  fail(ErrorCode::invalid_argument, "bad view kind");
}

ViewTransform::AlignedRelevance ViewTransform::backward_relevance(const FloatField& view_scores,
                                                                  int orig_h, int orig_w) const {
  AlignedRelevance out;
  switch (kind) {
    case ViewKind::identity:
    case ViewKind::contrast: {
      if (view_scores.height != orig_h || view_scores.width != orig_w)
        fail(ErrorCode::shape_mismatch, "whole-image view relevance has wrong shape");
      out.scores = view_scores;
      out.validity = ByteField(orig_h, orig_w, 1);
      return out;
    }
    case ViewKind::hflip: {
      if (view_scores.height != orig_h || view_scores.width != orig_w)
        fail(ErrorCode::shape_mismatch, "hflip view relevance has wrong shape");
      out.scores = hflip(view_scores);
      out.validity = ByteField(orig_h, orig_w, 1);
      return out;
    }
    case ViewKind::crop: {
      if (view_scores.height != crop_h || view_scores.width != crop_w)
        fail(ErrorCode::shape_mismatch, "crop view relevance does not match crop box");
      out.scores = FloatField(orig_h, orig_w, 0.0f);
      out.validity = ByteField(orig_h, orig_w, 0);
      for (int y = 0; y < crop_h; ++y)
        for (int x = 0; x < crop_w; ++x) {
          out.scores.at(crop_y + y, crop_x + x) = view_scores.at(y, x);
          out.validity.at(crop_y + y, crop_x + x) = 1;
        }
      return out;
    }
  }
  fail(ErrorCode::invalid_argument, "bad view kind");
}

std::vector<ViewTransform> make_views(const Image& image, const std::vector<ViewKind>& kinds,
                                      const CropGridSpec& grid, uint64_t seed) {
  if (kinds.empty()) fail(ErrorCode::empty_view_set, "no augmentation views requested");
  if (image.empty()) fail(ErrorCode::invalid_image, "make_views: empty image");
  grid.validate();

  // Deduplicate while keeping a canonical order.
  auto has = [&](ViewKind k) { return std::find(kinds.begin(), kinds.end(), k) != kinds.end(); };

  std::vector<ViewTransform> out;
  if (has(ViewKind::identity)) out.push_back({ViewKind::identity});
  if (has(ViewKind::hflip)) out.push_back({ViewKind::hflip});
  if (has(ViewKind::contrast)) {
    Rng rng(derive_seed(seed, "view.contrast"));
    ViewTransform t{ViewKind::contrast};
    t.contrast_factor = float(rng.uniform(0.5, 1.5));
    out.push_back(t);
  }
  if (has(ViewKind::crop)) {
    const int cw = std::min(grid.crop_size, image.width);
    const int ch = std::min(grid.crop_size, image.height);
    for (int y : grid_positions(image.height, ch, grid.stride))
      for (int x : grid_positions(image.width, cw, grid.stride)) {
        ViewTransform t{ViewKind::crop};
        t.crop_x = x;
        t.crop_y = y;
        t.crop_w = cw;
        t.crop_h = ch;
        out.push_back(t);
      }
  }
  return out;
}

}  // namespace promptseg
