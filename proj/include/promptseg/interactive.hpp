#pragma once

#include <functional>
#include <memory>

#include "promptseg/fusion.hpp"
#include "promptseg/scene.hpp"

namespace promptseg {

// Synthetic clicks standing in for a human annotator.
struct ClickPlan {
  std::vector<Pixel> positive;
  std::vector<Pixel> negative;
  uint64_t seed = 0;
};

struct BinaryMask {
  ByteField mask;         // confidence >= 0.5 unless the model says otherwise
  FloatField confidence;  // model's soft output in [0,1]
};

// Click-driven segmenter contract: clicks accumulate until reset().
class InteractiveModel {
 public:
  virtual ~InteractiveModel() = default;
  virtual void load(const std::string& weights_path) = 0;
  virtual void click(Pixel p, bool positive) = 0;
  virtual BinaryMask result() = 0;
  virtual void reset(const Image& image) = 0;
};

// CI stand-in: flood-fills near-uniform color regions from each positive
// click; a negative click inside a grown region suppresses that region.
class MockRegionGrower : public InteractiveModel {
 public:
  explicit MockRegionGrower(float color_tolerance = 0.05f);

  void load(const std::string& weights_path) override;
  void click(Pixel p, bool positive) override;
  BinaryMask result() override;
  void reset(const Image& image) override;

 private:
  ByteField grow_from(Pixel p) const;

  float tolerance_;
  Image image_;
  std::vector<std::pair<Pixel, bool>> clicks_;
};

using InteractiveFactory =
    std::function<std::unique_ptr<InteractiveModel>(const nlohmann::json& config)>;

class InteractiveRegistry {
 public:
  static InteractiveRegistry& instance();
  void register_factory(const std::string& name, InteractiveFactory factory);
  std::unique_ptr<InteractiveModel> make(const std::string& name,
                                         const nlohmann::json& config) const;

 private:
  std::vector<std::pair<std::string, InteractiveFactory>> factories_;
};

std::unique_ptr<InteractiveModel> make_interactive_model(const std::string& name,
                                                         const nlohmann::json& config);

// Positive clicks sampled from channel c, negative clicks from the
// background channel; colliding picks are re-drawn until the sets are
// disjoint (bounded retries).
ClickPlan plan_clicks(const MultiClassRelevance& relevance, int category, int n_pos, int n_neg,
                      double tau, uint64_t seed);

// Submits positives then negatives and returns the model's soft output.
// Appends each click to transcript (JSON) when one is supplied.
BinaryMask segment_category(InteractiveModel& model, const Image& image, const ClickPlan& plan,
                            nlohmann::json* transcript = nullptr);

// Pixel label = category of the highest-confidence covering mask; ties
// resolve toward the lower category index; uncovered pixels stay 0.
SegmentationMask merge(const std::vector<std::pair<std::string, BinaryMask>>& masks);

}  // namespace promptseg
