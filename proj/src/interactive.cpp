#include "promptseg/interactive.hpp"

#include <deque>

namespace promptseg {

// ----------------------------- mock region grower -----------------------------

MockRegionGrower::MockRegionGrower(float color_tolerance) : tolerance_(color_tolerance) {}

void MockRegionGrower::load(const std::string&) {}  // nothing to load

void MockRegionGrower::reset(const Image& image) {
  image_ = image;
  clicks_.clear();
}

void MockRegionGrower::click(Pixel p, bool positive) {
  if (image_.empty()) fail(ErrorCode::invalid_argument, "click before reset(image)");
  if (p.x < 0 || p.x >= image_.width || p.y < 0 || p.y >= image_.height)
    fail(ErrorCode::invalid_argument, "click out of bounds");
  clicks_.emplace_back(p, positive);
}

ByteField MockRegionGrower::grow_from(Pixel p) const {
  ByteField region(image_.height, image_.width, 0);
  const float* seed_color = image_.pixel(p.y, p.x);
  const float tol2 = tolerance_ * tolerance_;
  std::deque<Pixel> queue{p};
  region.at(p.y, p.x) = 1;
  while (!queue.empty()) {
    Pixel cur = queue.front();
    queue.pop_front();
    const int dy[4] = {0, 0, -1, 1};
    const int dx[4] = {-1, 1, 0, 0};
    for (int i = 0; i < 4; ++i) {
      int ny = cur.y + dy[i], nx = cur.x + dx[i];
      if (ny < 0 || ny >= image_.height || nx < 0 || nx >= image_.width) continue;
      if (region.at(ny, nx)) continue;
      const float* c = image_.pixel(ny, nx);
      float d = 0;
      for (int ch = 0; ch < 3; ++ch) {
        float diff = c[ch] - seed_color[ch];
        d += diff * diff;
      }
      if (d <= tol2) {
        region.at(ny, nx) = 1;
        queue.push_back({nx, ny});
      }
    }
  }
  return region;
}

BinaryMask MockRegionGrower::result() {
  if (image_.empty()) fail(ErrorCode::invalid_argument, "result before reset(image)");
  BinaryMask out;
  out.mask = ByteField(image_.height, image_.width, 0);
  out.confidence = FloatField(image_.height, image_.width, 0.0f);

  for (const auto& [p, positive] : clicks_) {
    if (!positive) continue;
    ByteField region = grow_from(p);
    // A negative click landing inside this region vetoes it.
    bool vetoed = false;
    for (const auto& [np, npos] : clicks_) {
      if (!npos && region.at(np.y, np.x)) {
        vetoed = true;
        break;
      }
    }
    if (vetoed) continue;
    for (size_t i = 0; i < region.data.size(); ++i) {
      if (region.data[i]) {
        out.mask.data[i] = 1;
        out.confidence.data[i] = 1.0f;
      }
    }
  }
  return out;
}

// ----------------------------- registry -----------------------------

InteractiveRegistry& InteractiveRegistry::instance() {
  static InteractiveRegistry reg;
  return reg;
}

void InteractiveRegistry::register_factory(const std::string& name, InteractiveFactory factory) {
  for (auto& [n, f] : factories_) {
    if (n == name) {
      f = std::move(factory);
      return;
    }
  }
  factories_.emplace_back(name, std::move(factory));
}

std::unique_ptr<InteractiveModel> InteractiveRegistry::make(const std::string& name,
                                                            const nlohmann::json& config) const {
  for (const auto& [n, f] : factories_)
    if (n == name) return f(config);
  std::string known;
  for (const auto& [n, f] : factories_) known += (known.empty() ? "" : ", ") + n;
  fail(ErrorCode::model_unavailable,
       "unknown interactive model '" + name + "' (known: " + known + ")");
}

std::unique_ptr<InteractiveModel> make_interactive_model(const std::string& name,
                                                         const nlohmann::json& config) {
  static const bool registered = [] {
    InteractiveRegistry::instance().register_factory(
        "mock-region-grower", [](const nlohmann::json& cfg) {
          float tol = cfg.value("color_tolerance", 0.05f);
          return std::make_unique<MockRegionGrower>(tol);
        });
    return true;
  }();
  (void)registered;
  return InteractiveRegistry::instance().make(name, config);
}

// ----------------------------- click planning -----------------------------

ClickPlan plan_clicks(const MultiClassRelevance& relevance, int category, int n_pos, int n_neg,
                      double tau, uint64_t seed) {
  if (n_pos < 1) fail(ErrorCode::invalid_argument, "plan_clicks: need at least one positive click");
  if (n_neg < 0) fail(ErrorCode::invalid_argument, "plan_clicks: negative click count < 0");
  if (category < 1 || size_t(category) > relevance.num_categories())
    fail(ErrorCode::invalid_argument, "plan_clicks: category out of range");

  const FloatField& channel = relevance.channel_for_label(size_t(category));
  bool all_zero = true;
  for (float v : channel.data) all_zero = all_zero && v == 0.0f;
  if (all_zero)
    fail(ErrorCode::low_confidence_channel,
         "plan_clicks: channel for category " + std::to_string(category) +
             " is all-zero; use the low-confidence path");

  ClickPlan plan;
  plan.seed = seed;

  auto contains = [](const std::vector<Pixel>& v, Pixel p) {
    return std::find(v.begin(), v.end(), p) != v.end();
  };

  // Positives may repeat (a near-deterministic sampler sends them all to
  // the argmax pixel); only the positive/negative sets must be disjoint.
  PseudoLabelBatch pos = sample(relevance, category, n_pos, tau, derive_seed(seed, "pos"));
  for (const auto& [px, label] : pos.samples) plan.positive.push_back(px);

  constexpr int kMaxRetries = 128;
  int draw = 0;
  while (int(plan.negative.size()) < n_neg) {
    PseudoLabelBatch b =
        sample(relevance, 0, 1, tau, derive_seed(seed, "neg." + std::to_string(draw++)));
    Pixel p = b.samples[0].first;
    if (!contains(plan.positive, p)) plan.negative.push_back(p);
    if (draw > n_neg + kMaxRetries)
      fail(ErrorCode::click_collision,
           "plan_clicks: cannot draw negatives disjoint from the positives");
  }
  return plan;
}

BinaryMask segment_category(InteractiveModel& model, const Image& image, const ClickPlan& plan,
                            nlohmann::json* transcript) {
  if (plan.positive.empty())
    fail(ErrorCode::invalid_argument, "segment_category: plan has no positive clicks");
  model.reset(image);
  auto log_click = [&](Pixel p, bool positive) {
    if (!transcript) return;
    transcript->push_back({{"x", p.x}, {"y", p.y}, {"polarity", positive ? "pos" : "neg"}});
  };
  for (Pixel p : plan.positive) {
    model.click(p, true);
    log_click(p, true);
  }
  for (Pixel p : plan.negative) {
    model.click(p, false);
    log_click(p, false);
  }
  return model.result();
}

SegmentationMask merge(const std::vector<std::pair<std::string, BinaryMask>>& masks) {
  SegmentationMask out;
  if (masks.empty()) return out;
  const int h = masks[0].second.mask.height, w = masks[0].second.mask.width;
  for (const auto& [name, bm] : masks) {
    out.categories.push_back(name);
    if (bm.mask.height != h || bm.mask.width != w || bm.confidence.height != h ||
        bm.confidence.width != w)
      fail(ErrorCode::shape_mismatch, "merge: masks must share one shape");
  }
  out.labels = ByteField(h, w, 0);
  for (size_t i = 0; i < out.labels.data.size(); ++i) {
    float best = -1.0f;
    int best_c = 0;
    for (size_t c = 0; c < masks.size(); ++c) {
      const BinaryMask& bm = masks[c].second;
      if (!bm.mask.data[i]) continue;
      if (bm.confidence.data[i] > best) {  // strict: ties keep the lower index
        best = bm.confidence.data[i];
        best_c = int(c) + 1;
      }
    }
    out.labels.data[i] = uint8_t(best_c);
  }
  return out;
}

}  // namespace promptseg
