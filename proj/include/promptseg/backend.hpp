#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptseg/common.hpp"
#include "promptseg/image.hpp"
#include "promptseg/scene.hpp"

namespace promptseg {

// ----------------------------- prompt set -----------------------------

struct PromptSet {
  std::vector<std::string> queries;     // raw category labels, K >= 1
  std::vector<std::string> distractors; // raw labels, disjoint from queries
  std::string prompt_template = "a photo of a {label}";

  void validate() const;
  std::string format(const std::string& label) const;
  // Formatted prompts: queries first, then distractors. Probability
  // vectors returned by a backend follow this order.
  std::vector<std::string> all_formatted() const;
  size_t num_queries() const { return queries.size(); }
};

// ----------------------------- backend contract -----------------------------

struct BackendDescriptor {
  std::string name;
  int input_resolution = 224;
  int patch_grid_h = 7;
  int patch_grid_w = 7;

  void validate() const;
};

struct RelevanceMap {
  FloatField scores;     // values in [0,1]
  std::string category;  // the prompt this map answers
};

// A vision-language model plus its interpretability method, reduced to
// two calls. Implementations are deterministic for fixed inputs; an
// instance is not assumed safe for simultaneous calls unless documented.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual BackendDescriptor descriptor() const = 0;

  // Softmax-normalized probabilities over queries then distractors.
  virtual std::vector<double> class_probabilities(const Image& image,
                                                  const PromptSet& prompts) const = 0;

  // Dense per-pixel relevance for a single prompt, values in [0,1],
  // at the resolution of the given image.
  virtual RelevanceMap relevance(const Image& image, const std::string& prompt) const = 0;

  // Per-pixel embedding planes for feature-driven segmenters.
  // Default: the three RGB planes.
  virtual std::vector<FloatField> image_features(const Image& image) const;
};

// Raises non_finite_relevance if propagation produced NaN/Inf; a broken
// map must never flow silently into aggregation.
void validate_relevance(const RelevanceMap& map, const std::string& context);

// Bilinear upsampling used to lift patch-grid relevance to image size.
FloatField bilinear_resize(const FloatField& src, int out_h, int out_w);

// ----------------------------- mock backend -----------------------------

struct MockBackendConfig {
  double noise_sigma = 0.0;
  int blur_radius = 0;
  uint64_t seed = 0;
  // Softmax temperature applied to per-category area fractions.
  double prob_temperature = 0.25;
  // When > 0, emulates a transformer backend's native relevance
  // granularity: the recovered region is pooled to a fixed g x g token
  // grid per view and upsampled back, so small crops see sharper maps
  // than whole-image views (the property that makes the crop view
  // worthwhile). 0 keeps exact per-pixel maps.
  int patch_grid_emulation = 0;
};

// Deterministic, weight-free stand-in. Category regions are recovered
// from pixel colors (nearest signature color learned from the reference
// scene), so the mock stays consistent under flips, crops, and mild
// contrast changes. relevance = clamp(blur(mask) + noise, 0, 1);
// class probabilities = softmax over recovered area fractions.
// Stateless after construction; safe to share across threads read-only.
class MockBackend : public Backend {
 public:
  MockBackend(Scene scene, MockBackendConfig config);

  BackendDescriptor descriptor() const override;
  std::vector<double> class_probabilities(const Image& image,
                                          const PromptSet& prompts) const override;
  RelevanceMap relevance(const Image& image, const std::string& prompt) const override;
  std::vector<FloatField> image_features(const Image& image) const override;

  // Region of the named category as seen in the given image (empty
  // field if the prompt matches no scene category).
  ByteField recover_mask(const Image& image, const std::string& prompt) const;

 private:
  int signature_index(const float* rgb) const;  // 0 = background, 1..K categories
  int category_of_prompt(const std::string& prompt) const;

  Scene scene_;
  MockBackendConfig config_;
  std::vector<std::array<float, 3>> signatures_;  // [0] background, [i] category i
  std::vector<bool> signature_valid_;             // false for empty regions
};

// ----------------------------- registry -----------------------------

using BackendFactory = std::function<std::unique_ptr<Backend>(const nlohmann::json& config)>;

// Backends are created by name so mock and real implementations stay
// interchangeable; the pipeline never inspects model internals.
class BackendRegistry {
 public:
  static BackendRegistry& instance();

  void register_factory(const std::string& name, BackendFactory factory);
  std::unique_ptr<Backend> make(const std::string& name, const nlohmann::json& config) const;
  std::vector<std::string> names() const;

 private:
  std::vector<std::pair<std::string, BackendFactory>> factories_;
};

std::unique_ptr<Backend> make_backend(const std::string& name, const nlohmann::json& config);

}  // namespace promptseg
