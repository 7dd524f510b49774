#include "promptseg/cluster.hpp"

#include <chrono>
#include <fstream>

namespace promptseg {

void ClusterConfig::validate(size_t num_categories) const {
  const int resolved_min = min_labels > 0 ? min_labels : int(num_categories) + 1;
  if (resolved_min < 1) fail(ErrorCode::invalid_argument, "min_labels must be >= 1");
  if (max_labels < resolved_min)
    fail(ErrorCode::invalid_argument, "max_labels must be >= min_labels");
  if (weights.feature_similarity < 0 || weights.continuity < 0 || weights.scribble < 0)
    fail(ErrorCode::invalid_argument, "loss weights must be >= 0");
  if (weights.scribble > 0 && max_labels < int(num_categories) + 1)
    fail(ErrorCode::invalid_argument,
         "scribble supervision reserves cluster c for category c; max_labels must be >= K+1");
  if (learning_rate <= 0) fail(ErrorCode::invalid_argument, "learning_rate must be > 0");
  if (samples_per_iter < 1) fail(ErrorCode::invalid_argument, "samples_per_iter must be >= 1");
  if (!(tau > 0)) fail(ErrorCode::invalid_argument, "tau must be > 0");
  if (max_iters < 0) fail(ErrorCode::invalid_argument, "max_iters must be >= 0");
}

namespace {

using Planes = Grid3<float>;

// ----------------------------- layers -----------------------------

struct Conv3x3 {
  int in_ch = 0, out_ch = 0;
  std::vector<float> weight;  // [oc][ic][3][3]
  std::vector<float> bias;    // [oc]
  std::vector<float> wgrad, bgrad;

  Conv3x3(int in, int out, Rng& rng) : in_ch(in), out_ch(out) {
    weight.resize(size_t(out) * in * 9);
    bias.resize(size_t(out));
    wgrad.assign(weight.size(), 0.0f);
    bgrad.assign(bias.size(), 0.0f);
    const double bound = 1.0 / std::sqrt(double(in) * 9.0);
    for (float& w : weight) w = float(rng.uniform(-bound, bound));
    for (float& b : bias) b = float(rng.uniform(-bound, bound));
  }

  float w_at(int oc, int ic, int ky, int kx) const {
    return weight[((size_t(oc) * in_ch + ic) * 3 + ky) * 3 + kx];
  }
  float& wg_at(int oc, int ic, int ky, int kx) {
    return wgrad[((size_t(oc) * in_ch + ic) * 3 + ky) * 3 + kx];
  }

  Planes forward(const Planes& in) const {
    const int h = in.height, w = in.width;
    Planes out(out_ch, h, w);
    for (int oc = 0; oc < out_ch; ++oc) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          float acc = bias[oc];
          for (int ic = 0; ic < in_ch; ++ic)
            for (int ky = -1; ky <= 1; ++ky) {
              int yy = y + ky;
              if (yy < 0 || yy >= h) continue;
              for (int kx = -1; kx <= 1; ++kx) {
                int xx = x + kx;
                if (xx < 0 || xx >= w) continue;
                acc += w_at(oc, ic, ky + 1, kx + 1) * in.at(ic, yy, xx);
              }
            }
          out.at(oc, y, x) = acc;
        }
    }
    return out;
  }

  Planes backward(const Planes& in, const Planes& dout) {
    const int h = in.height, w = in.width;
    Planes din(in_ch, h, w, 0.0f);
    for (int oc = 0; oc < out_ch; ++oc) {
      double bacc = 0.0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const float g = dout.at(oc, y, x);
          bacc += g;
          for (int ic = 0; ic < in_ch; ++ic)
            for (int ky = -1; ky <= 1; ++ky) {
              int yy = y + ky;
              if (yy < 0 || yy >= h) continue;
              for (int kx = -1; kx <= 1; ++kx) {
                int xx = x + kx;
                if (xx < 0 || xx >= w) continue;
                wg_at(oc, ic, ky + 1, kx + 1) += g * in.at(ic, yy, xx);
                din.at(ic, yy, xx) += g * w_at(oc, ic, ky + 1, kx + 1);
              }
            }
        }
      bgrad[oc] += float(bacc);
    }
    return din;
  }
};

// Per-channel normalization over spatial positions with learnable
// affine, the single-image analogue of batch normalization.
struct ChannelNorm {
  static constexpr float kEps = 1e-5f;
  int channels = 0;
  std::vector<float> gamma, beta;
  std::vector<float> ggrad, bgrad;
  // saved forward state
  std::vector<float> inv_std;
  Planes xhat;

  explicit ChannelNorm(int ch) : channels(ch) {
    gamma.assign(size_t(ch), 1.0f);
    beta.assign(size_t(ch), 0.0f);
    ggrad.assign(size_t(ch), 0.0f);
    bgrad.assign(size_t(ch), 0.0f);
  }

  Planes forward(const Planes& in) {
    const size_t n = in.plane();
    Planes out(in.channels, in.height, in.width);
    xhat = Planes(in.channels, in.height, in.width);
    inv_std.assign(size_t(channels), 0.0f);
    for (int c = 0; c < channels; ++c) {
      const float* src = &in.data[size_t(c) * n];
      double mu = 0.0;
      for (size_t i = 0; i < n; ++i) mu += src[i];
      mu /= double(n);
      double var = 0.0;
      for (size_t i = 0; i < n; ++i) {
        double d = src[i] - mu;
        var += d * d;
      }
      var /= double(n);
      const float is = float(1.0 / std::sqrt(var + kEps));
      inv_std[size_t(c)] = is;
      float* xh = &xhat.data[size_t(c) * n];
      float* dst = &out.data[size_t(c) * n];
      for (size_t i = 0; i < n; ++i) {
        xh[i] = (src[i] - float(mu)) * is;
        dst[i] = gamma[size_t(c)] * xh[i] + beta[size_t(c)];
      }
    }
    return out;
  }

  Planes backward(const Planes& dout) {
    const size_t n = dout.plane();
    Planes din(dout.channels, dout.height, dout.width);
    for (int c = 0; c < channels; ++c) {
      const float* dy = &dout.data[size_t(c) * n];
      const float* xh = &xhat.data[size_t(c) * n];
      double sum_dy = 0.0, sum_dy_xh = 0.0;
      for (size_t i = 0; i < n; ++i) {
        sum_dy += dy[i];
        sum_dy_xh += dy[i] * xh[i];
      }
      ggrad[size_t(c)] += float(sum_dy_xh);
      bgrad[size_t(c)] += float(sum_dy);
      const float g = gamma[size_t(c)];
      const float is = inv_std[size_t(c)];
      float* dx = &din.data[size_t(c) * n];
      const float inv_n = 1.0f / float(n);
      for (size_t i = 0; i < n; ++i) {
        dx[i] = g * is * (dy[i] - float(sum_dy) * inv_n - xh[i] * float(sum_dy_xh) * inv_n);
      }
    }
    return din;
  }
};

Planes relu(const Planes& in) {
  Planes out = in;
  for (float& v : out.data) v = std::max(v, 0.0f);
  return out;
}

Planes relu_backward(const Planes& pre, const Planes& dout) {
  Planes din = dout;
  for (size_t i = 0; i < din.data.size(); ++i)
    if (pre.data[i] <= 0.0f) din.data[i] = 0.0f;
  return din;
}

// ----------------------------- network -----------------------------

// Three 3x3 convolutions with per-channel normalization after each and
// ReLU between them; the final normalized response is the logit field.
struct LabelingNet {
  Conv3x3 c1, c2, c3;
  ChannelNorm n1, n2, n3;

  // forward cache
  Planes in_, a1_, h1_, r1_, a2_, h2_, r2_, a3_;

  LabelingNet(int in_ch, int q, Rng& rng)
      : c1(in_ch, q, rng), c2(q, q, rng), c3(q, q, rng), n1(q), n2(q), n3(q) {}

  Planes forward(const Planes& in) {
    in_ = in;
    a1_ = c1.forward(in_);
    h1_ = n1.forward(a1_);
    r1_ = relu(h1_);
    a2_ = c2.forward(r1_);
    h2_ = n2.forward(a2_);
    r2_ = relu(h2_);
    a3_ = c3.forward(r2_);
    return n3.forward(a3_);
  }

  void zero_grad() {
    std::fill(c1.wgrad.begin(), c1.wgrad.end(), 0.0f);
    std::fill(c1.bgrad.begin(), c1.bgrad.end(), 0.0f);
    std::fill(c2.wgrad.begin(), c2.wgrad.end(), 0.0f);
    std::fill(c2.bgrad.begin(), c2.bgrad.end(), 0.0f);
    std::fill(c3.wgrad.begin(), c3.wgrad.end(), 0.0f);
    std::fill(c3.bgrad.begin(), c3.bgrad.end(), 0.0f);
    std::fill(n1.ggrad.begin(), n1.ggrad.end(), 0.0f);
    std::fill(n1.bgrad.begin(), n1.bgrad.end(), 0.0f);
    std::fill(n2.ggrad.begin(), n2.ggrad.end(), 0.0f);
    std::fill(n2.bgrad.begin(), n2.bgrad.end(), 0.0f);
    std::fill(n3.ggrad.begin(), n3.ggrad.end(), 0.0f);
    std::fill(n3.bgrad.begin(), n3.bgrad.end(), 0.0f);
  }

  void backward(const Planes& dlogits) {
    Planes d = n3.backward(dlogits);
    d = c3.backward(r2_, d);
    d = relu_backward(h2_, d);
    d = n2.backward(d);
    d = c2.backward(r1_, d);
    d = relu_backward(h1_, d);
    d = n1.backward(d);
    c1.backward(in_, d);
  }
};

// SGD with momentum in the v = m*v + g, p -= lr*v convention.
struct Sgd {
  double lr, momentum;
  std::vector<std::pair<std::vector<float>*, std::vector<float>*>> params;  // (param, grad)
  std::vector<std::vector<float>> velocity;

  Sgd(LabelingNet& net, double lr_, double momentum_) : lr(lr_), momentum(momentum_) {
    auto add = [&](std::vector<float>& p, std::vector<float>& g) {
      params.emplace_back(&p, &g);
      velocity.emplace_back(p.size(), 0.0f);
    };
    add(net.c1.weight, net.c1.wgrad);
    add(net.c1.bias, net.c1.bgrad);
    add(net.c2.weight, net.c2.wgrad);
    add(net.c2.bias, net.c2.bgrad);
    add(net.c3.weight, net.c3.wgrad);
    add(net.c3.bias, net.c3.bgrad);
    add(net.n1.gamma, net.n1.ggrad);
    add(net.n1.beta, net.n1.bgrad);
    add(net.n2.gamma, net.n2.ggrad);
    add(net.n2.beta, net.n2.bgrad);
    add(net.n3.gamma, net.n3.ggrad);
    add(net.n3.beta, net.n3.bgrad);
  }

  void step() {
    for (size_t i = 0; i < params.size(); ++i) {
      auto& [p, g] = params[i];
      auto& v = velocity[i];
      for (size_t j = 0; j < p->size(); ++j) {
        v[j] = float(momentum * v[j] + (*g)[j]);
        (*p)[j] -= float(lr * v[j]);
      }
    }
  }
};

Planes features_from(const Image& image, const MultiClassRelevance& relevance,
                     const ClusterConfig& cfg, const Backend* backend) {
  std::vector<FloatField> planes;
  if (cfg.feature_source == FeatureSource::rgb || backend == nullptr) {
    if (cfg.feature_source == FeatureSource::backend_features && backend == nullptr)
      fail(ErrorCode::invalid_argument, "backend features requested but no backend supplied");
    planes.resize(3, FloatField(image.height, image.width));
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const float* p = image.pixel(y, x);
        planes[0].at(y, x) = p[0];
        planes[1].at(y, x) = p[1];
        planes[2].at(y, x) = p[2];
      }
  } else {
    planes = backend->image_features(image);
  }
  if (planes.empty()) fail(ErrorCode::invalid_argument, "no feature planes");
  for (const auto& p : planes)
    if (p.height != relevance.height || p.width != relevance.width)
      fail(ErrorCode::shape_mismatch, "feature planes must match relevance shape");

  Planes out(int(planes.size()), image.height, image.width);
  for (size_t c = 0; c < planes.size(); ++c)
    std::copy(planes[c].data.begin(), planes[c].data.end(),
              out.data.begin() + ptrdiff_t(c * out.plane()));
  return out;
}

int count_distinct(const std::vector<int>& labels, int q) {
  std::vector<uint8_t> seen(size_t(q), 0);
  int distinct = 0;
  for (int l : labels) {
    if (!seen[size_t(l)]) {
      seen[size_t(l)] = 1;
      ++distinct;
    }
  }
  return distinct;
}

}  // namespace

SegmentResult segment(const Image& image, const MultiClassRelevance& relevance,
                      const ClusterConfig& cfg, const Backend* feature_backend) {
  if (image.height != relevance.height || image.width != relevance.width)
    fail(ErrorCode::shape_mismatch, "segment: relevance shape must match image");
  const size_t K = relevance.num_categories();
  cfg.validate(K);
  const int min_labels = cfg.min_labels > 0 ? cfg.min_labels : int(K) + 1;
  const int q = cfg.max_labels;

  SegmentResult result;
  result.mask.categories = relevance.categories;

  if (cfg.max_iters == 0) {
    // Zero optimization budget: fall back to direct binarization.
    result.mask = binarize(relevance, 0.5);
    result.used_fallback = true;
    return result;
  }

  const bool use_scribble = cfg.weights.scribble > 0.0;
  Planes features = features_from(image, relevance, cfg, feature_backend);

  Rng init_rng(derive_seed(cfg.seed, "cluster.init"));
  LabelingNet net(features.channels, q, init_rng);
  Sgd opt(net, cfg.learning_rate, cfg.momentum);

  // Identity label map: category c trains cluster c, background cluster 0.
  std::vector<int> label_map(K + 1);
  for (size_t i = 0; i <= K; ++i) label_map[i] = int(i);

  const auto start = std::chrono::steady_clock::now();
  std::vector<int> labels;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    Planes logits = net.forward(features);
    labels = argmax_labels(logits);

    IterationLog entry;
    entry.iter = iter;
    entry.distinct_labels = count_distinct(labels, q);

    entry.feature_similarity = cross_entropy_vs_targets(logits, labels);
    Planes dlogits = cross_entropy_vs_targets_grad(logits, labels);
    for (float& v : dlogits.data) v *= float(cfg.weights.feature_similarity);

    // continuity_loss sums the L1 over channels; the published weight of
    // the clustering baseline was calibrated for a per-element mean, so
    // the weight lands on that scale (divide by channel count).
    const double continuity_scale = cfg.weights.continuity / double(q);
    entry.continuity = continuity_loss(logits);
    Planes cgrad = continuity_grad(logits);
    for (size_t i = 0; i < dlogits.data.size(); ++i)
      dlogits.data[i] += float(continuity_scale) * cgrad.data[i];

    if (use_scribble) {
      PseudoLabelBatch batch;
      batch.temperature = cfg.tau;
      for (size_t c = 0; c <= K; ++c) {
        uint64_t s = derive_seed(cfg.seed, "scribble." + std::to_string(iter) + "." +
                                               std::to_string(c));
        PseudoLabelBatch part = sample(relevance, int(c), cfg.samples_per_iter, cfg.tau, s);
        batch.samples.insert(batch.samples.end(), part.samples.begin(), part.samples.end());
      }
      entry.scribble = scribble_loss(logits, batch, label_map);
      Planes sgrad = scribble_grad(logits, batch, label_map);
      for (size_t i = 0; i < dlogits.data.size(); ++i)
        dlogits.data[i] += float(cfg.weights.scribble) * sgrad.data[i];
    }

    entry.total = cfg.weights.feature_similarity * entry.feature_similarity +
                  continuity_scale * entry.continuity + cfg.weights.scribble * entry.scribble;
    if (!std::isfinite(entry.total))
      fail(ErrorCode::divergence,
           "segment: non-finite loss at iteration " + std::to_string(iter));

    result.log.push_back(entry);
    result.iterations_run = iter + 1;

    if (entry.distinct_labels <= min_labels) break;
    if (cfg.time_budget_ms > 0) {
      auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
      if (elapsed >= cfg.time_budget_ms) break;
    }

    net.zero_grad();
    net.backward(dlogits);
    opt.step();
  }

  // Final labeling from the trained network.
  Planes logits = net.forward(features);
  labels = argmax_labels(logits);
  const int distinct = count_distinct(labels, q);
  result.degenerate = distinct <= 1;

  result.mask.labels = ByteField(image.height, image.width, 0);

  if (!use_scribble) {
    // Unsupervised baseline: clusters are reported as-is (compacted by
    // ascending cluster id); no category semantics attach to them.
    std::vector<int> compact(size_t(q), 0);
    int next = 1;
    for (int c = 0; c < q; ++c) {
      bool present = false;
      for (int l : labels)
        if (l == c) {
          present = true;
          break;
        }
      if (present) compact[size_t(c)] = next++;
    }
    for (size_t i = 0; i < labels.size(); ++i)
      result.mask.labels.data[i] = uint8_t(compact[size_t(labels[i])]);
    return result;
  }

  // Majority vote of sampled pseudo-labels per surviving cluster; ties
  // resolve toward the lower label index, empty clusters to background.
  std::vector<std::vector<int>> votes(size_t(q), std::vector<int>(K + 1, 0));
  for (size_t c = 0; c <= K; ++c) {
    uint64_t s = derive_seed(cfg.seed, "assign." + std::to_string(c));
    PseudoLabelBatch part = sample(relevance, int(c), cfg.samples_per_iter, cfg.tau, s);
    for (const auto& [px, label] : part.samples) {
      int cluster = labels[size_t(px.y) * size_t(image.width) + size_t(px.x)];
      votes[size_t(cluster)][size_t(label)] += 1;
    }
  }
  std::vector<uint8_t> cluster_to_label(size_t(q), 0);
  for (int c = 0; c < q; ++c) {
    int best_label = 0, best_votes = 0;
    for (size_t l = 0; l <= K; ++l) {
      if (votes[size_t(c)][l] > best_votes) {
        best_votes = votes[size_t(c)][l];
        best_label = int(l);
      }
    }
    cluster_to_label[size_t(c)] = uint8_t(best_label);
  }
  for (size_t i = 0; i < labels.size(); ++i)
    result.mask.labels.data[i] = cluster_to_label[size_t(labels[i])];
  return result;
}

void write_run_log(const std::string& path, const SegmentResult& result, uint64_t seed) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) fail(ErrorCode::io_error, "cannot write run log: " + path);
  nlohmann::json head;
  head["seed"] = seed;
  head["iterations_run"] = result.iterations_run;
  head["degenerate"] = result.degenerate;
  head["used_fallback"] = result.used_fallback;
  f << head.dump() << "\n";
  for (const auto& e : result.log) {
    nlohmann::json j;
    j["iter"] = e.iter;
    j["total"] = e.total;
    j["feature_similarity"] = e.feature_similarity;
    j["continuity"] = e.continuity;
    j["scribble"] = e.scribble;
    j["distinct_labels"] = e.distinct_labels;
    f << j.dump() << "\n";
  }
}

}  // namespace promptseg
