#include "promptseg/tta.hpp"

#include <algorithm>

namespace promptseg {

ViewTransform::AlignedRelevance view_relevance(const Backend& backend, const Image& image,
                                               const std::string& prompt,
                                               const ViewTransform& view) {
  Image view_image = view.forward(image);
  RelevanceMap map = backend.relevance(view_image, prompt);
  validate_relevance(map, "view " + to_string(view.kind));
  return view.backward_relevance(map.scores, image.height, image.width);
}

FloatField calibrate(const FloatField& map, const std::vector<FloatField>& distractor_maps) {
  if (distractor_maps.empty()) return map;
  for (const auto& d : distractor_maps) require_same_shape(map, d, "calibrate");

  FloatField out(map.height, map.width);
  const double inv_n = 1.0 / double(distractor_maps.size() + 1);
  for (size_t i = 0; i < map.data.size(); ++i) {
    double mean = map.data[i];
    for (const auto& d : distractor_maps) mean += d.data[i];
    mean *= inv_n;
    out.data[i] = float(std::max(0.0, double(map.data[i]) - mean));
  }
  return out;
}

AggregateResult aggregate_crops(const Backend& backend, const Image& image,
                                const PromptSet& prompts, size_t category_index,
                                const CropGridSpec& grid) {
  prompts.validate();
  grid.validate();
  if (category_index >= prompts.queries.size())
    fail(ErrorCode::invalid_argument, "aggregate_crops: category index out of range");

  const std::string query_prompt = prompts.format(prompts.queries[category_index]);
  std::vector<std::string> distractor_prompts;
  for (const auto& d : prompts.distractors) distractor_prompts.push_back(prompts.format(d));

  AggregateResult result;
  result.coverage = Field<int>(image.height, image.width, 0);
  FloatField accum(image.height, image.width, 0.0f);

  const int cw = std::min(grid.crop_size, image.width);
  const int ch = std::min(grid.crop_size, image.height);
  for (int y0 : grid_positions(image.height, ch, grid.stride)) {
    for (int x0 : grid_positions(image.width, cw, grid.stride)) {
      ++result.crops_total;
      Image crop_img = crop(image, x0, y0, cw, ch);

      std::vector<double> probs = backend.class_probabilities(crop_img, prompts);
      if (!(probs[category_index] > grid.gate_threshold)) continue;
      ++result.crops_passed;

      RelevanceMap rel = backend.relevance(crop_img, query_prompt);
      validate_relevance(rel, "crop relevance");
      std::vector<FloatField> distractor_maps;
      distractor_maps.reserve(distractor_prompts.size());
      for (const auto& dp : distractor_prompts) {
        RelevanceMap dm = backend.relevance(crop_img, dp);
        validate_relevance(dm, "crop distractor relevance");
        distractor_maps.push_back(std::move(dm.scores));
      }
      FloatField calibrated = calibrate(rel.scores, distractor_maps);

      for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
          accum.at(y0 + y, x0 + x) += calibrated.at(y, x);
          result.coverage.at(y0 + y, x0 + x) += 1;
        }
    }
  }

  result.raw_average = FloatField(image.height, image.width, 0.0f);
  for (size_t i = 0; i < accum.data.size(); ++i) {
    if (result.coverage.data[i] > 0)
      result.raw_average.data[i] = accum.data[i] / float(result.coverage.data[i]);
  }

  if (result.crops_passed == 0) {
    result.map = FloatField(image.height, image.width, 0.0f);
    result.low_confidence = true;
    return result;
  }

  // Min-max over covered pixels only; pixels no passing crop observed
  // stay at zero and are excluded from the statistics.
  float lo = std::numeric_limits<float>::max();
  float hi = std::numeric_limits<float>::lowest();
  for (size_t i = 0; i < accum.data.size(); ++i) {
    if (result.coverage.data[i] > 0) {
      lo = std::min(lo, result.raw_average.data[i]);
      hi = std::max(hi, result.raw_average.data[i]);
    }
  }
  result.map = FloatField(image.height, image.width, 0.0f);
  if (!(hi > lo)) {
    result.low_confidence = true;
    return result;
  }
  const float scale = 1.0f / (hi - lo);
  for (size_t i = 0; i < accum.data.size(); ++i) {
    if (result.coverage.data[i] > 0)
      result.map.data[i] = (result.raw_average.data[i] - lo) * scale;
  }
  return result;
}

RefinedRelevance refine(const Backend& backend, const Image& image, const PromptSet& prompts,
                        const std::vector<ViewKind>& view_kinds, const CropGridSpec& grid,
                        uint64_t seed) {
  prompts.validate();
  if (image.empty()) fail(ErrorCode::invalid_image, "refine: empty image");
  std::vector<ViewTransform> views = make_views(image, view_kinds, grid, seed);

  const bool use_crop =
      std::find(view_kinds.begin(), view_kinds.end(), ViewKind::crop) != view_kinds.end();

  RefinedRelevance out;
  out.height = image.height;
  out.width = image.width;
  out.categories = prompts.queries;
  out.calibration = prompts.distractors;
  for (ViewKind k : {ViewKind::identity, ViewKind::hflip, ViewKind::contrast, ViewKind::crop}) {
    if (std::find(view_kinds.begin(), view_kinds.end(), k) != view_kinds.end())
      out.views_used.push_back(k);
  }

  std::vector<std::string> distractor_prompts;
  for (const auto& d : prompts.distractors) distractor_prompts.push_back(prompts.format(d));

  bool any_signal = false;
  for (size_t c = 0; c < prompts.queries.size(); ++c) {
    const std::string query_prompt = prompts.format(prompts.queries[c]);
    std::vector<FloatField> view_maps;
    bool any_view_ok = false;

    for (const auto& view : views) {
      if (view.kind == ViewKind::crop) continue;  // the grid aggregates into one view below
      auto aligned = view_relevance(backend, image, query_prompt, view);
      std::vector<FloatField> distractor_maps;
      distractor_maps.reserve(distractor_prompts.size());
      for (const auto& dp : distractor_prompts)
        distractor_maps.push_back(view_relevance(backend, image, dp, view).scores);
      FloatField calibrated = calibrate(aligned.scores, distractor_maps);
      bool ok = minmax_normalize(calibrated);
      any_view_ok = any_view_ok || ok;
      view_maps.push_back(std::move(calibrated));
    }

    if (use_crop) {
      AggregateResult agg = aggregate_crops(backend, image, prompts, c, grid);
      any_view_ok = any_view_ok || !agg.low_confidence;
      view_maps.push_back(std::move(agg.map));
    }

    // Degenerate (all-zero) views only rescale the mean, which the final
    // normalization undoes, so they can stay in the average.
    FloatField mean(image.height, image.width, 0.0f);
    const float inv_v = 1.0f / float(view_maps.size());
    for (const auto& vm : view_maps)
      for (size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += vm.data[i] * inv_v;

    bool ok = minmax_normalize(mean);
    out.maps.push_back(std::move(mean));
    out.low_confidence.push_back(!ok);
    any_signal = any_signal || (ok && any_view_ok);
  }

  if (!any_signal)
    fail(ErrorCode::no_signal, "refine: every view of every category is low-confidence");
  return out;
}

std::vector<std::string> default_distractors(const std::vector<std::string>& queries) {
  static const std::vector<std::string> pool = {"bird", "cat", "boat", "bus", "person"};
  std::vector<std::string> out;
  for (const auto& p : pool)
    if (std::find(queries.begin(), queries.end(), p) == queries.end()) out.push_back(p);
  return out;
}

}  // namespace promptseg
