#pragma once

#include <optional>

#include "promptseg/backend.hpp"
#include "promptseg/fusion.hpp"

namespace promptseg {

// ----------------------------- logits container -----------------------------

// Channel-major stack of q planes over an h x w grid.
template <typename S>
struct Grid3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<S> data;

  Grid3() = default;
  Grid3(int c, int h, int w, S fill = S{})
      : channels(c), height(h), width(w), data(size_t(c) * h * w, fill) {}

  S& at(int c, int y, int x) { return data[(size_t(c) * height + y) * width + x]; }
  const S& at(int c, int y, int x) const { return data[(size_t(c) * height + y) * width + x]; }
  size_t plane() const { return size_t(height) * width; }
};

template <typename S>
std::vector<int> argmax_labels(const Grid3<S>& logits) {
  std::vector<int> labels(logits.plane());
  for (int y = 0; y < logits.height; ++y)
    for (int x = 0; x < logits.width; ++x) {
      int best = 0;
      S best_v = logits.at(0, y, x);
      for (int c = 1; c < logits.channels; ++c) {
        if (logits.at(c, y, x) > best_v) {
          best_v = logits.at(c, y, x);
          best = c;
        }
      }
      labels[size_t(y) * logits.width + x] = best;
    }
  return labels;
}

// ----------------------------- losses -----------------------------
// All three return the loss and, via the *_grad variants, the gradient
// with respect to the logits in the same layout. Templated so tests can
// run them in double precision against finite differences.

// Mean L1 difference between horizontally adjacent response vectors plus
// the mean over vertically adjacent ones.
template <typename S>
S continuity_loss(const Grid3<S>& logits) {
  const int h = logits.height, w = logits.width, q = logits.channels;
  if (h < 1 || w < 1) fail(ErrorCode::invalid_argument, "continuity_loss: empty field");
  S horiz{}, vert{};
  for (int c = 0; c < q; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x + 1 < w; ++x)
        horiz += std::abs(logits.at(c, y, x) - logits.at(c, y, x + 1));
  for (int c = 0; c < q; ++c)
    for (int y = 0; y + 1 < h; ++y)
      for (int x = 0; x < w; ++x)
        vert += std::abs(logits.at(c, y, x) - logits.at(c, y + 1, x));
  const S nh = S(h) * S(w - 1), nv = S(h - 1) * S(w);
  S loss{};
  if (nh > 0) loss += horiz / nh;
  if (nv > 0) loss += vert / nv;
  return loss;
}

template <typename S>
Grid3<S> continuity_grad(const Grid3<S>& logits) {
  const int h = logits.height, w = logits.width, q = logits.channels;
  Grid3<S> grad(q, h, w, S{});
  const S nh = S(h) * S(w - 1), nv = S(h - 1) * S(w);
  auto sgn = [](S v) -> S { return v > S{} ? S{1} : (v < S{} ? S{-1} : S{}); };
  if (nh > 0) {
    const S inv = S{1} / nh;
    for (int c = 0; c < q; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x + 1 < w; ++x) {
          S s = sgn(logits.at(c, y, x) - logits.at(c, y, x + 1)) * inv;
          grad.at(c, y, x) += s;
          grad.at(c, y, x + 1) -= s;
        }
  }
  if (nv > 0) {
    const S inv = S{1} / nv;
    for (int c = 0; c < q; ++c)
      for (int y = 0; y + 1 < h; ++y)
        for (int x = 0; x < w; ++x) {
          S s = sgn(logits.at(c, y, x) - logits.at(c, y + 1, x)) * inv;
          grad.at(c, y, x) += s;
          grad.at(c, y + 1, x) -= s;
        }
  }
  return grad;
}

// Mean softmax cross-entropy against fixed per-pixel targets.
template <typename S>
S cross_entropy_vs_targets(const Grid3<S>& logits, const std::vector<int>& targets) {
  const int h = logits.height, w = logits.width, q = logits.channels;
  S loss{};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      S hi = logits.at(0, y, x);
      for (int c = 1; c < q; ++c) hi = std::max(hi, logits.at(c, y, x));
      S sum{};
      for (int c = 0; c < q; ++c) sum += std::exp(logits.at(c, y, x) - hi);
      int t = targets[size_t(y) * w + x];
      loss += std::log(sum) - (logits.at(t, y, x) - hi);
    }
  return loss / (S(h) * S(w));
}

template <typename S>
Grid3<S> cross_entropy_vs_targets_grad(const Grid3<S>& logits, const std::vector<int>& targets) {
  const int h = logits.height, w = logits.width, q = logits.channels;
  Grid3<S> grad(q, h, w, S{});
  const S inv_n = S{1} / (S(h) * S(w));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      S hi = logits.at(0, y, x);
      for (int c = 1; c < q; ++c) hi = std::max(hi, logits.at(c, y, x));
      S sum{};
      for (int c = 0; c < q; ++c) sum += std::exp(logits.at(c, y, x) - hi);
      int t = targets[size_t(y) * w + x];
      for (int c = 0; c < q; ++c) {
        S p = std::exp(logits.at(c, y, x) - hi) / sum;
        grad.at(c, y, x) = (p - (c == t ? S{1} : S{})) * inv_n;
      }
    }
  return grad;
}

// Self-distillation: cross-entropy of the soft predictions against their
// own argmax, with the argmax treated as fixed targets.
template <typename S>
S self_distill_loss(const Grid3<S>& logits) {
  return cross_entropy_vs_targets(logits, argmax_labels(logits));
}

template <typename S>
Grid3<S> self_distill_grad(const Grid3<S>& logits) {
  return cross_entropy_vs_targets_grad(logits, argmax_labels(logits));
}

// Mean cross-entropy at the sampled pixels against their mapped cluster
// indices. label_map[label] gives the target cluster for batch label
// 0..K; by construction prompt category c occupies cluster c and the
// background occupies cluster 0. An empty batch contributes zero.
template <typename S>
S scribble_loss(const Grid3<S>& logits, const PseudoLabelBatch& batch,
                const std::vector<int>& label_map) {
  if (batch.samples.empty()) return S{};
  const int q = logits.channels;
  S loss{};
  for (const auto& [px, label] : batch.samples) {
    if (!(px.y >= 0 && px.y < logits.height && px.x >= 0 && px.x < logits.width))
      fail(ErrorCode::invalid_argument, "scribble_loss: sample out of bounds");
    int t = label_map.at(size_t(label));
    if (t < 0 || t >= q) fail(ErrorCode::invalid_argument, "scribble_loss: target cluster out of range");
    S hi = logits.at(0, px.y, px.x);
    for (int c = 1; c < q; ++c) hi = std::max(hi, logits.at(c, px.y, px.x));
    S sum{};
    for (int c = 0; c < q; ++c) sum += std::exp(logits.at(c, px.y, px.x) - hi);
    loss += std::log(sum) - (logits.at(t, px.y, px.x) - hi);
  }
  return loss / S(batch.samples.size());
}

template <typename S>
Grid3<S> scribble_grad(const Grid3<S>& logits, const PseudoLabelBatch& batch,
                       const std::vector<int>& label_map) {
  Grid3<S> grad(logits.channels, logits.height, logits.width, S{});
  if (batch.samples.empty()) return grad;
  const int q = logits.channels;
  const S inv_n = S{1} / S(batch.samples.size());
  for (const auto& [px, label] : batch.samples) {
    int t = label_map.at(size_t(label));
    S hi = logits.at(0, px.y, px.x);
    for (int c = 1; c < q; ++c) hi = std::max(hi, logits.at(c, px.y, px.x));
    S sum{};
    for (int c = 0; c < q; ++c) sum += std::exp(logits.at(c, px.y, px.x) - hi);
    for (int c = 0; c < q; ++c) {
      S p = std::exp(logits.at(c, px.y, px.x) - hi) / sum;
      grad.at(c, px.y, px.x) += (p - (c == t ? S{1} : S{})) * inv_n;
    }
  }
  return grad;
}

// ----------------------------- configuration -----------------------------

enum class FeatureSource { rgb, backend_features };

struct ClusterConfig {
  int max_labels = 12;   // q: output channel count
  int max_iters = 200;
  int min_labels = 0;    // stop target; 0 resolves to K+1 at run time
  struct {
    double feature_similarity = 1.0;
    double continuity = 5.0;
    double scribble = 0.5;
  } weights;
  double learning_rate = 0.1;
  double momentum = 0.9;
  int samples_per_iter = 64;  // per category, fresh every iteration
  double tau = 0.1;
  uint64_t seed = 0;
  FeatureSource feature_source = FeatureSource::rgb;
  // Soft runtime cap: stops iterating once exceeded (0 = unlimited).
  int64_t time_budget_ms = 0;

  void validate(size_t num_categories) const;
};

struct IterationLog {
  int iter = 0;
  double total = 0, feature_similarity = 0, continuity = 0, scribble = 0;
  int distinct_labels = 0;
};

struct SegmentResult {
  SegmentationMask mask;
  bool degenerate = false;  // clusters collapsed to a single label
  bool used_fallback = false;  // zero iteration budget: binarized relevance
  int iterations_run = 0;
  std::vector<IterationLog> log;
};

// Per-image clustering segmentation: optimizes a small convolutional
// labeling network under self-distillation, spatial continuity, and
// stochastic scribble losses, then maps surviving clusters to prompt
// categories by sampled-label majority vote. With scribble weight 0 the
// relevance input is never consulted and the output is the raw
// unsupervised clustering.
SegmentResult segment(const Image& image, const MultiClassRelevance& relevance,
                      const ClusterConfig& cfg, const Backend* feature_backend = nullptr);

void write_run_log(const std::string& path, const SegmentResult& result, uint64_t seed);

}  // namespace promptseg
