#pragma once

#include "promptseg/backend.hpp"
#include "promptseg/views.hpp"

namespace promptseg {

// Relevance for one prompt on one view, aligned back to the original
// pixel grid.
ViewTransform::AlignedRelevance view_relevance(const Backend& backend, const Image& image,
                                               const std::string& prompt,
                                               const ViewTransform& view);

// Distractor calibration: subtracts the mean of {map} ∪ distractor_maps
// from map and clips at zero. An empty distractor list leaves the map
// unchanged.
FloatField calibrate(const FloatField& map, const std::vector<FloatField>& distractor_maps);

struct AggregateResult {
  FloatField map;          // min-max normalized over covered pixels, 0 elsewhere
  FloatField raw_average;  // accumulator / counter, before normalization
  Field<int> coverage;     // number of passing crops covering each pixel
  int crops_total = 0;
  int crops_passed = 0;
  bool low_confidence = false;  // no passing crop, or degenerate normalization
};

// Crop-grid aggregation for one query category: every grid crop whose
// class probability clears the gate contributes its calibrated relevance
// to a per-pixel running average.
AggregateResult aggregate_crops(const Backend& backend, const Image& image,
                                const PromptSet& prompts, size_t category_index,
                                const CropGridSpec& grid);

struct RefinedRelevance {
  int height = 0;
  int width = 0;
  std::vector<std::string> categories;
  std::vector<FloatField> maps;      // one per category, normalized to [0,1]
  std::vector<bool> low_confidence;  // per category: every view was degenerate
  std::vector<ViewKind> views_used;
  std::vector<std::string> calibration;  // distractor labels applied
};

// View-averaged, calibrated, per-category relevance. Each view's
// calibrated map is normalized to [0,1] before the views are averaged
// (the crop grid counts as a single view), and the average is normalized
// again. Raises no_signal if every view of every category is degenerate.
RefinedRelevance refine(const Backend& backend, const Image& image, const PromptSet& prompts,
                        const std::vector<ViewKind>& view_kinds, const CropGridSpec& grid,
                        uint64_t seed);

// Fallback distractors when the user supplies none: the illustrative
// calibration categories minus any query labels.
std::vector<std::string> default_distractors(const std::vector<std::string>& queries);

}  // namespace promptseg
