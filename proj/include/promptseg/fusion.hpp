#pragma once

#include "promptseg/tta.hpp"

namespace promptseg {

// Per-category relevance stacked into one field plus the derived
// background channel: background(p) = max(0, 1 - max_c SS[p][c]).
struct MultiClassRelevance {
  int height = 0;
  int width = 0;
  std::vector<std::string> categories;  // labels 1..K
  std::vector<FloatField> channels;     // SS, one field per category
  FloatField background;

  size_t num_categories() const { return channels.size(); }
  // Channel for label 0..K (0 = background).
  const FloatField& channel_for_label(size_t label) const {
    return label == 0 ? background : channels[label - 1];
  }
};

MultiClassRelevance fuse(const RefinedRelevance& refined);

// Sampled (pixel, label) pseudo-annotations; label 0 = background.
struct PseudoLabelBatch {
  std::vector<std::pair<Pixel, int>> samples;
  double temperature = 0.1;
  uint64_t seed = 0;
  bool low_confidence = false;  // source channel was all-zero; fell back to uniform
};

// Draws n pixels i.i.d. with replacement from Softmax(channel / tau)
// taken over all pixels. label selects the channel: 0 for background,
// 1..K for the prompt categories.
PseudoLabelBatch sample(const MultiClassRelevance& relevance, int label, int n, double tau,
                        uint64_t seed);

struct SegmentationMask {
  ByteField labels;  // 0 background, 1..K categories
  std::vector<std::string> categories;
};

// label(p) = argmax_c SS[p][c] when the max clears the threshold and
// beats the background channel, else 0.
SegmentationMask binarize(const MultiClassRelevance& relevance, double threshold);

// Mask persistence: 8-bit grayscale PNG plus a JSON sidecar mapping
// label index -> category prompt.
void save_mask(const std::string& png_path, const std::string& sidecar_path,
               const SegmentationMask& mask);
SegmentationMask load_mask(const std::string& png_path, const std::string& sidecar_path);

}  // namespace promptseg
