#include "promptseg/backend.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace promptseg {

// ----------------------------- PromptSet -----------------------------

void PromptSet::validate() const {
  if (queries.empty()) fail(ErrorCode::invalid_argument, "prompt set needs at least one query");
  for (size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].empty()) fail(ErrorCode::invalid_argument, "empty query prompt");
    for (size_t j = i + 1; j < queries.size(); ++j)
      if (queries[i] == queries[j])
        fail(ErrorCode::invalid_argument, "duplicate query prompt: " + queries[i]);
  }
  for (const auto& d : distractors) {
    if (std::find(queries.begin(), queries.end(), d) != queries.end())
      fail(ErrorCode::invalid_argument, "distractor overlaps queries: " + d);
  }
  if (prompt_template.find("{label}") == std::string::npos)
    fail(ErrorCode::invalid_argument, "prompt template must contain {label}");
}

std::string PromptSet::format(const std::string& label) const {
  std::string out = prompt_template;
  size_t pos = out.find("{label}");
  out.replace(pos, 7, label);
  return out;
}

std::vector<std::string> PromptSet::all_formatted() const {
  std::vector<std::string> out;
  out.reserve(queries.size() + distractors.size());
  for (const auto& q : queries) out.push_back(format(q));
  for (const auto& d : distractors) out.push_back(format(d));
  return out;
}

// ----------------------------- descriptor / shared helpers -----------------------------

void BackendDescriptor::validate() const {
  if (input_resolution <= 0) fail(ErrorCode::invalid_argument, "input_resolution must be > 0");
  if (patch_grid_h <= 0 || patch_grid_w <= 0 || input_resolution % patch_grid_h != 0 ||
      input_resolution % patch_grid_w != 0)
    fail(ErrorCode::invalid_argument, "patch grid must divide input_resolution evenly");
}

void validate_relevance(const RelevanceMap& map, const std::string& context) {
  if (!all_finite(map.scores))
    fail(ErrorCode::non_finite_relevance,
         "non-finite relevance for '" + map.category + "' (" + context + ")");
}

FloatField bilinear_resize(const FloatField& src, int out_h, int out_w) {
  if (src.empty() || out_h <= 0 || out_w <= 0)
    fail(ErrorCode::invalid_argument, "bilinear_resize: empty input or bad output shape");
  FloatField out(out_h, out_w);
  const double sy = double(src.height) / out_h;
  const double sx = double(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    int y0 = int(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, src.height - 1);
    int y1c = std::clamp(y0 + 1, 0, src.height - 1);
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      int x0 = int(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, src.width - 1);
      int x1c = std::clamp(x0 + 1, 0, src.width - 1);
      double top = src.at(y0c, x0c) * (1 - wx) + src.at(y0c, x1c) * wx;
      double bot = src.at(y1c, x0c) * (1 - wx) + src.at(y1c, x1c) * wx;
      out.at(y, x) = float(top * (1 - wy) + bot * wy);
    }
  }
  return out;
}

std::vector<FloatField> Backend::image_features(const Image& image) const {
  std::vector<FloatField> planes(3, FloatField(image.height, image.width));
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const float* p = image.pixel(y, x);
      planes[0].at(y, x) = p[0];
      planes[1].at(y, x) = p[1];
      planes[2].at(y, x) = p[2];
    }
  return planes;
}

// ----------------------------- softmax -----------------------------

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
  double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

}  // namespace

// ----------------------------- MockBackend -----------------------------

MockBackend::MockBackend(Scene scene, MockBackendConfig config)
    : scene_(std::move(scene)), config_(config) {
  scene_.validate();
  if (config_.noise_sigma < 0) fail(ErrorCode::invalid_argument, "noise_sigma must be >= 0");
  if (config_.blur_radius < 0) fail(ErrorCode::invalid_argument, "blur_radius must be >= 0");

  // Mean color per region on the reference image; index 0 is background.
  const size_t k = scene_.masks.size();
  signatures_.assign(k + 1, {0.0f, 0.0f, 0.0f});
  std::vector<double> counts(k + 1, 0.0);
  std::vector<std::array<double, 3>> sums(k + 1, {0.0, 0.0, 0.0});
  for (int y = 0; y < scene_.image.height; ++y)
    for (int x = 0; x < scene_.image.width; ++x) {
      size_t idx = 0;
      for (size_t c = 0; c < k; ++c)
        if (scene_.masks[c].at(y, x)) idx = c + 1;
      const float* p = scene_.image.pixel(y, x);
      for (int ch = 0; ch < 3; ++ch) sums[idx][ch] += p[ch];
      counts[idx] += 1.0;
    }
  signature_valid_.assign(k + 1, false);
  for (size_t i = 0; i <= k; ++i) {
    if (counts[i] > 0) {
      for (int ch = 0; ch < 3; ++ch) signatures_[i][ch] = float(sums[i][ch] / counts[i]);
      signature_valid_[i] = true;
    }
  }
}

BackendDescriptor MockBackend::descriptor() const {
  // Without grid emulation the mock answers at full pixel granularity,
  // so its native grid is the input grid itself.
  const int g = config_.patch_grid_emulation;
  if (g > 0 && 224 % g == 0) return BackendDescriptor{"mock", 224, g, g};
  return BackendDescriptor{"mock", 224, 224, 224};
}

int MockBackend::signature_index(const float* rgb) const {
  int best = 0;
  float best_d = std::numeric_limits<float>::max();
  for (size_t i = 0; i < signatures_.size(); ++i) {
    if (!signature_valid_[i]) continue;  // empty region: no color evidence
    float d = 0;
    for (int ch = 0; ch < 3; ++ch) {
      float diff = rgb[ch] - signatures_[i][ch];
      d += diff * diff;
    }
    if (d < best_d) {
      best_d = d;
      best = int(i);
    }
  }
  return best;
}

int MockBackend::category_of_prompt(const std::string& prompt) const {
  for (size_t c = 0; c < scene_.categories.size(); ++c) {
    const std::string& name = scene_.categories[c];
    if (prompt == name || prompt.find(name) != std::string::npos) return int(c);
  }
  return -1;
}

ByteField MockBackend::recover_mask(const Image& image, const std::string& prompt) const {
  ByteField mask(image.height, image.width, 0);
  int cat = category_of_prompt(prompt);
  if (cat < 0) return mask;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (signature_index(image.pixel(y, x)) == cat + 1) mask.at(y, x) = 1;
  return mask;
}

std::vector<double> MockBackend::class_probabilities(const Image& image,
                                                     const PromptSet& prompts) const {
  if (image.empty()) fail(ErrorCode::invalid_image, "class_probabilities: empty image");
  prompts.validate();

  // Area fraction per signature region in this view.
  std::vector<double> area(signatures_.size(), 0.0);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) area[signature_index(image.pixel(y, x))] += 1.0;
  const double total = double(image.height) * image.width;
  for (double& a : area) a /= total;

  std::vector<double> logits;
  for (const auto& prompt : prompts.all_formatted()) {
    int cat = category_of_prompt(prompt);
    double frac = cat >= 0 ? area[cat + 1] : 0.0;
    logits.push_back(frac / config_.prob_temperature);
  }
  return softmax(logits);
}

RelevanceMap MockBackend::relevance(const Image& image, const std::string& prompt) const {
  if (image.empty()) fail(ErrorCode::invalid_image, "relevance: empty image");

  ByteField mask = recover_mask(image, prompt);
  FloatField map(image.height, image.width, 0.0f);
  bool any = false;
  for (size_t i = 0; i < mask.data.size(); ++i) {
    map.data[i] = float(mask.data[i]);
    any = any || mask.data[i] != 0;
  }
  // No signal in view: flat zero, no synthetic noise on top.
  if (!any) return RelevanceMap{std::move(map), prompt};

  const int g = config_.patch_grid_emulation;
  if (g > 0 && (image.height > g || image.width > g)) {
    // Token-grid coarseness: average-pool onto a fixed g x g grid per
    // view, then upsample. Whole-image views come back blurry; small
    // crops keep their detail.
    const int gh = std::min(g, image.height), gw = std::min(g, image.width);
    FloatField coarse(gh, gw, 0.0f);
    for (int cy = 0; cy < gh; ++cy)
      for (int cx = 0; cx < gw; ++cx) {
        const int y0 = cy * image.height / gh, y1 = (cy + 1) * image.height / gh;
        const int x0 = cx * image.width / gw, x1 = (cx + 1) * image.width / gw;
        double sum = 0.0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) sum += map.at(y, x);
        coarse.at(cy, cx) = float(sum / std::max(1, (y1 - y0) * (x1 - x0)));
      }
    map = bilinear_resize(coarse, image.height, image.width);
  }

  map = box_blur(map, config_.blur_radius);

  if (config_.noise_sigma > 0) {
    // Noise keyed on (seed, prompt, view content): identical calls are
    // bit-identical, different views decorrelate.
    uint64_t view_hash = hash_bytes(image.rgb.data(), image.rgb.size() * sizeof(float));
    Rng rng(derive_seed(config_.seed, prompt + "#" + std::to_string(view_hash)));
    for (float& v : map.data) v = float(v + rng.gaussian(0.0, config_.noise_sigma));
  }
  for (float& v : map.data) v = std::clamp(v, 0.0f, 1.0f);
  return RelevanceMap{std::move(map), prompt};
}

std::vector<FloatField> MockBackend::image_features(const Image& image) const {
  // RGB planes plus one soft region-indicator plane per category:
  // a stand-in for the embedding planes a real image tower would give.
  auto planes = Backend::image_features(image);
  for (const auto& name : scene_.categories) {
    ByteField mask = recover_mask(image, name);
    FloatField plane(image.height, image.width);
    for (size_t i = 0; i < plane.data.size(); ++i) plane.data[i] = float(mask.data[i]);
    planes.push_back(box_blur(plane, 1));
  }
  return planes;
}

// ----------------------------- registry -----------------------------

BackendRegistry& BackendRegistry::instance() {
  static BackendRegistry reg;
  return reg;
}

void BackendRegistry::register_factory(const std::string& name, BackendFactory factory) {
  for (auto& [n, f] : factories_) {
    if (n == name) {
      f = std::move(factory);
      return;
    }
  }
  factories_.emplace_back(name, std::move(factory));
}

std::unique_ptr<Backend> BackendRegistry::make(const std::string& name,
                                               const nlohmann::json& config) const {
  for (const auto& [n, f] : factories_)
    if (n == name) return f(config);
  std::string known;
  for (const auto& [n, f] : factories_) known += (known.empty() ? "" : ", ") + n;
  fail(ErrorCode::backend_unavailable, "unknown backend '" + name + "' (known: " + known + ")");
}

std::vector<std::string> BackendRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [n, f] : factories_) out.push_back(n);
  return out;
}

namespace {

Scene scene_from_json(const nlohmann::json& cfg) {
  Scene scene;
  scene.image = load_image(cfg.at("image").get<std::string>());
  ByteField labels = load_png_gray(cfg.at("labels").get<std::string>());
  scene.categories = cfg.at("categories").get<std::vector<std::string>>();
  for (size_t c = 0; c < scene.categories.size(); ++c) {
    ByteField mask(labels.height, labels.width, 0);
    for (size_t i = 0; i < labels.data.size(); ++i)
      mask.data[i] = labels.data[i] == uint8_t(c + 1) ? 1 : 0;
    scene.masks.push_back(std::move(mask));
  }
  return scene;
}

void register_mock_backend() {
  BackendRegistry::instance().register_factory("mock", [](const nlohmann::json& cfg) {
    if (!cfg.contains("scene"))
      fail(ErrorCode::backend_unavailable,
           "mock backend requires a 'scene' config block (image, labels, categories)");
    MockBackendConfig mc;
    mc.noise_sigma = cfg.value("noise_sigma", mc.noise_sigma);
    mc.blur_radius = cfg.value("blur_radius", mc.blur_radius);
    mc.seed = cfg.value("seed", mc.seed);
    mc.prob_temperature = cfg.value("prob_temperature", mc.prob_temperature);
    mc.patch_grid_emulation = cfg.value("patch_grid_emulation", mc.patch_grid_emulation);
    return std::make_unique<MockBackend>(scene_from_json(cfg.at("scene")), mc);
  });
}

}  // namespace

void register_external_backend();  // external_backend.cpp

std::unique_ptr<Backend> make_backend(const std::string& name, const nlohmann::json& config) {
  static const bool registered = [] {
    register_mock_backend();
    register_external_backend();
    return true;
  }();
  (void)registered;
  return BackendRegistry::instance().make(name, config);
}

}  // namespace promptseg
