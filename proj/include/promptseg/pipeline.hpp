#pragma once

#include <optional>

#include "promptseg/cluster.hpp"
#include "promptseg/interactive.hpp"
#include "promptseg/rmz.hpp"

namespace promptseg {

enum class Method { threshold, cluster, interactive };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

// Everything needed to turn one image plus prompts into a mask.
// Serializes to JSON; CLI flags override file values field by field.
struct PipelineConfig {
  std::string backend = "mock";
  nlohmann::json backend_config = nlohmann::json::object();
  std::vector<ViewKind> views = {ViewKind::identity, ViewKind::hflip, ViewKind::contrast,
                                 ViewKind::crop};
  CropGridSpec grid;
  std::vector<std::string> distractors;  // empty -> default list minus queries
  Method method = Method::cluster;
  double threshold = 0.5;  // threshold method binarization level
  ClusterConfig cluster;
  struct InteractiveOptions {
    std::string model = "mock-region-grower";
    nlohmann::json model_config = nlohmann::json::object();
    int n_pos = 3;
    int n_neg = 3;
    double tau = 0.05;
  } interactive;
  uint64_t seed = 0;

  nlohmann::json to_json() const;
  static PipelineConfig from_json(const nlohmann::json& j);
  void validate() const;
};

struct PipelineResult {
  RefinedRelevance refined;
  MultiClassRelevance fused;
  SegmentationMask mask;
  std::optional<SegmentResult> cluster_result;
  nlohmann::json click_transcript = nlohmann::json::array();
  // Categories whose relevance carried no signal (skipped by the
  // interactive method).
  std::vector<std::string> low_confidence_categories;
};

// refine -> fuse -> segment with the configured method. The distractor
// default is applied here when the prompt set carries none.
PipelineResult run_pipeline(const Backend& backend, const Image& image, PromptSet prompts,
                            const PipelineConfig& config);

}  // namespace promptseg
