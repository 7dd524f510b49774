#include "promptseg/fusion.hpp"

#include <fstream>

namespace promptseg {

MultiClassRelevance fuse(const RefinedRelevance& refined) {
  if (refined.maps.empty()) fail(ErrorCode::invalid_argument, "fuse: no category maps");
  for (const auto& m : refined.maps) {
    if (m.height != refined.height || m.width != refined.width)
      fail(ErrorCode::shape_mismatch, "fuse: category maps disagree on shape");
  }

  MultiClassRelevance out;
  out.height = refined.height;
  out.width = refined.width;
  out.categories = refined.categories;
  out.channels = refined.maps;
  out.background = FloatField(out.height, out.width, 1.0f);
  for (size_t i = 0; i < out.background.data.size(); ++i) {
    float hi = 0.0f;
    for (const auto& ch : out.channels) hi = std::max(hi, ch.data[i]);
    out.background.data[i] = std::max(0.0f, 1.0f - hi);
  }
  return out;
}

PseudoLabelBatch sample(const MultiClassRelevance& relevance, int label, int n, double tau,
                        uint64_t seed) {
  if (n < 1) fail(ErrorCode::invalid_argument, "sample: n must be >= 1");
  if (!(tau > 0.0)) fail(ErrorCode::invalid_argument, "sample: temperature must be > 0");
  if (label < 0 || size_t(label) > relevance.num_categories())
    fail(ErrorCode::invalid_argument, "sample: label out of range");

  const FloatField& channel = relevance.channel_for_label(size_t(label));

  PseudoLabelBatch batch;
  batch.temperature = tau;
  batch.seed = seed;

  const size_t count = channel.data.size();
  std::vector<double> cdf(count);

  float hi = channel.data[0];
  bool all_zero = true;
  for (float v : channel.data) {
    hi = std::max(hi, v);
    all_zero = all_zero && v == 0.0f;
  }

  if (all_zero) {
    // Degenerate channel: uniform fallback, flagged for the caller.
    batch.low_confidence = true;
    double acc = 0.0;
    for (size_t i = 0; i < count; ++i) cdf[i] = (acc += 1.0);
  } else {
    double acc = 0.0;
    for (size_t i = 0; i < count; ++i) cdf[i] = (acc += std::exp((channel.data[i] - hi) / tau));
  }
  const double total = cdf.back();

  Rng rng(seed);
  batch.samples.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform() * total;
    size_t idx = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    if (idx >= count) idx = count - 1;
    batch.samples.emplace_back(Pixel{int(idx % channel.width), int(idx / channel.width)}, label);
  }
  return batch;
}

SegmentationMask binarize(const MultiClassRelevance& relevance, double threshold) {
  if (threshold < 0.0 || threshold > 1.0)
    fail(ErrorCode::invalid_argument, "binarize: threshold must be in [0,1]");

  SegmentationMask mask;
  mask.categories = relevance.categories;
  mask.labels = ByteField(relevance.height, relevance.width, 0);
  for (size_t i = 0; i < mask.labels.data.size(); ++i) {
    float best = -1.0f;
    int best_c = -1;
    for (size_t c = 0; c < relevance.channels.size(); ++c) {
      float v = relevance.channels[c].data[i];
      if (v > best) {  // ties resolve toward the lower category index
        best = v;
        best_c = int(c);
      }
    }
    // Strict comparison: confidence must exceed the threshold, so a 1.0
    // threshold blanks even min-max-normalized maps (whose plateaus sit
    // at exactly 1.0).
    if (best_c >= 0 && best > float(threshold) && best > relevance.background.data[i])
      mask.labels.data[i] = uint8_t(best_c + 1);
  }
  return mask;
}

void save_mask(const std::string& png_path, const std::string& sidecar_path,
               const SegmentationMask& mask) {
  save_png_gray(png_path, mask.labels);
  nlohmann::json j;
  j["0"] = "background";
  for (size_t c = 0; c < mask.categories.size(); ++c)
    j[std::to_string(c + 1)] = mask.categories[c];
  std::ofstream f(sidecar_path, std::ios::trunc);
  if (!f) fail(ErrorCode::io_error, "cannot write mask sidecar: " + sidecar_path);
  f << j.dump(2) << "\n";
}

SegmentationMask load_mask(const std::string& png_path, const std::string& sidecar_path) {
  SegmentationMask mask;
  mask.labels = load_png_gray(png_path);
  std::ifstream f(sidecar_path);
  if (!f) fail(ErrorCode::missing_file, "cannot open mask sidecar: " + sidecar_path);
  nlohmann::json j = nlohmann::json::parse(f);
  size_t k = j.size() > 0 ? j.size() - 1 : 0;  // entry "0" is background
  mask.categories.resize(k);
  for (size_t c = 1; c <= k; ++c) mask.categories[c - 1] = j.at(std::to_string(c));
  return mask;
}

}  // namespace promptseg
