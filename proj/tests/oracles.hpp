#pragma once

// Brute-force oracles, written straight from the operation definitions
// with plain loops. They deliberately share no code with the library
// implementations they check.

#include <map>
#include <set>

#include "promptseg/backend.hpp"
#include "promptseg/views.hpp"

namespace promptseg::testing {

// Per-pixel crop aggregation: enumerate the clamped grid, gate each crop
// on its class probability, calibrate by subtracting the mean over
// {query} ∪ distractors and clipping at zero, average overlapping
// contributions, then min-max normalize over covered pixels.
inline FloatField aggregate_oracle(const Backend& backend, const Image& image,
                                   const PromptSet& prompts, size_t category,
                                   const CropGridSpec& grid, bool* low_confidence) {
  const int H = image.height, W = image.width;
  const int cw = std::min(grid.crop_size, W);
  const int ch = std::min(grid.crop_size, H);

  std::vector<int> xs, ys;
  for (int x = 0; x + cw <= W; x += grid.stride) xs.push_back(x);
  if (W > cw && xs.back() != W - cw) xs.push_back(W - cw);
  if (W <= cw) xs = {0};
  for (int y = 0; y + ch <= H; y += grid.stride) ys.push_back(y);
  if (H > ch && ys.back() != H - ch) ys.push_back(H - ch);
  if (H <= ch) ys = {0};

  std::vector<double> sum(size_t(H) * W, 0.0);
  std::vector<int> count(size_t(H) * W, 0);

  for (int y0 : ys)
    for (int x0 : xs) {
      Image patch(ch, cw);
      for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x)
          for (int b = 0; b < 3; ++b)
            patch.pixel(y, x)[b] = image.pixel(y0 + y, x0 + x)[b];

      std::vector<double> probs = backend.class_probabilities(patch, prompts);
      if (!(probs[category] > grid.gate_threshold)) continue;

      FloatField query = backend.relevance(patch, prompts.format(prompts.queries[category])).scores;
      std::vector<FloatField> dmaps;
      for (const auto& d : prompts.distractors)
        dmaps.push_back(backend.relevance(patch, prompts.format(d)).scores);

      for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
          double v = query.at(y, x);
          if (!dmaps.empty()) {
            double mean = query.at(y, x);
            for (const auto& d : dmaps) mean += d.at(y, x);
            mean /= double(dmaps.size() + 1);
            v = std::max(0.0, double(query.at(y, x)) - mean);
          }
          sum[size_t(y0 + y) * W + (x0 + x)] += v;
          count[size_t(y0 + y) * W + (x0 + x)] += 1;
        }
    }

  FloatField out(H, W, 0.0f);
  double lo = 1e300, hi = -1e300;
  bool any = false;
  for (size_t i = 0; i < sum.size(); ++i) {
    if (count[i] > 0) {
      double v = sum[i] / count[i];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      any = true;
    }
  }
  if (!any || !(hi > lo)) {
    if (low_confidence) *low_confidence = true;
    return out;
  }
  if (low_confidence) *low_confidence = false;
  for (size_t i = 0; i < sum.size(); ++i)
    if (count[i] > 0) out.data[i] = float((sum[i] / count[i] - lo) / (hi - lo));
  return out;
}

// Best-match mean IoU by exhaustive double loop over (GT segment,
// predicted segment) pairs.
inline double miou_oracle(const ByteField& gt, const ByteField& pred, int ignore = 255) {
  std::set<int> gt_classes, pred_classes;
  for (uint8_t v : gt.data)
    if (v != 0 && int(v) != ignore) gt_classes.insert(v);
  for (uint8_t v : pred.data)
    if (v != 0 && int(v) != ignore) pred_classes.insert(v);

  double total = 0.0;
  for (int g : gt_classes) {
    double best = 0.0;
    for (int p : pred_classes) {
      double inter = 0, uni = 0;
      for (size_t i = 0; i < gt.data.size(); ++i) {
        if (int(gt.data[i]) == ignore) continue;
        bool a = gt.data[i] == g, b = pred.data[i] == p;
        if (a && b) inter += 1;
        if (a || b) uni += 1;
      }
      if (uni > 0) best = std::max(best, inter / uni);
    }
    total += best;
  }
  return total / double(gt_classes.size());
}

}  // namespace promptseg::testing
