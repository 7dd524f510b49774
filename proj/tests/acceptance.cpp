// Acceptance suite: weight-free, mock-backed checks of the complete
// toolkit. Each criterion prints one PASS/FAIL line; the process exits
// nonzero if any criterion fails.
#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "promptseg/eval.hpp"
#include "promptseg/rmz.hpp"
#include "test_support.hpp"

using namespace promptseg;
using promptseg::testing::aggregate_oracle;
using promptseg::testing::gradcheck;
using promptseg::testing::miou_oracle;
using promptseg::testing::random_logits;
using promptseg::testing::TempDir;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  criterion " << criterion << ": " << name;
  if (!detail.empty()) std::cout << "  [" << detail << "]";
  std::cout << "\n";
  if (!ok) ++g_failures;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// ----------------------------------------------------------------------
// 1. Crop-aggregation oracle on 50 random mock scenes <= 64x64, 1e-6.

void criterion_1() {
  double worst = 0.0;
  int scenes = 0, maps = 0;
  for (uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(derive_seed(seed, "accept1"));
    SyntheticSpec spec;
    spec.height = 24 + int(rng.below(41));  // 24..64
    spec.width = 24 + int(rng.below(41));
    Scene scene = make_scene(seed * 31 + 1, spec);

    MockBackendConfig mc;
    mc.noise_sigma = 0.05;
    mc.blur_radius = 1;
    mc.seed = seed;
    MockBackend backend(scene, mc);

    PromptSet prompts;
    prompts.queries = scene.categories;
    prompts.distractors = default_distractors(scene.categories);

    CropGridSpec grid;
    grid.crop_size = 12 + int(rng.below(25));  // 12..36
    grid.stride = 4 + int(rng.below(uint64_t(grid.crop_size - 3)));
    grid.gate_threshold = 0.1 + 0.4 * rng.uniform();

    ++scenes;
    for (size_t c = 0; c < prompts.queries.size(); ++c) {
      AggregateResult agg = aggregate_crops(backend, scene.image, prompts, c, grid);
      bool oracle_low = false;
      FloatField expect = aggregate_oracle(backend, scene.image, prompts, c, grid, &oracle_low);
      if (agg.low_confidence != oracle_low) {
        report(1, "crop-aggregation oracle", false, "low-confidence flag mismatch");
        return;
      }
      for (size_t i = 0; i < expect.data.size(); ++i)
        worst = std::max(worst, double(std::abs(agg.map.data[i] - expect.data[i])));
      ++maps;
    }
  }
  report(1, "crop-aggregation oracle", worst < 1e-6,
         std::to_string(scenes) + " scenes, " + std::to_string(maps) +
             " maps, max |diff| = " + fmt(worst));
}

// ----------------------------------------------------------------------
// 2. Sampler statistics: KL(empirical || softmax) < 0.01 at 100k draws
//    on 16x16 maps; tau -> 0 sends all draws to the argmax, exactly.

void criterion_2() {
  // KL check over a few random maps and temperatures
  double worst_kl = 0.0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    FloatField m(16, 16);
    Rng rng(derive_seed(seed, "accept2"));
    for (float& v : m.data) v = float(rng.uniform());
    RefinedRelevance refined;
    refined.height = 16;
    refined.width = 16;
    refined.maps = {m};
    refined.categories = {"x"};
    refined.low_confidence = {false};
    MultiClassRelevance mc = fuse(refined);

    for (double tau : {0.25, 1.0}) {
      const int n = 100000;
      PseudoLabelBatch batch = sample(mc, 1, n, tau, seed * 5 + 17);

      std::vector<double> target(m.data.size());
      double hi = *std::max_element(m.data.begin(), m.data.end());
      double z = 0;
      for (size_t i = 0; i < m.data.size(); ++i) {
        target[i] = std::exp((m.data[i] - hi) / tau);
        z += target[i];
      }
      for (double& t : target) t /= z;

      std::vector<double> freq(m.data.size(), 0.0);
      for (const auto& [px, label] : batch.samples)
        freq[size_t(px.y) * 16 + size_t(px.x)] += 1.0 / n;

      double kl = 0.0;
      for (size_t i = 0; i < freq.size(); ++i)
        if (freq[i] > 0) kl += freq[i] * std::log(freq[i] / target[i]);
      worst_kl = std::max(worst_kl, kl);
    }
  }

  // exact tau-limit: unique maximum takes every draw
  FloatField m(16, 16, 0.25f);
  m.at(9, 4) = 0.9f;
  RefinedRelevance refined;
  refined.height = 16;
  refined.width = 16;
  refined.maps = {m};
  refined.categories = {"x"};
  refined.low_confidence = {false};
  MultiClassRelevance mc = fuse(refined);
  PseudoLabelBatch batch = sample(mc, 1, 10000, 1e-6, 3);
  bool all_at_argmax = true;
  for (const auto& [px, label] : batch.samples)
    all_at_argmax = all_at_argmax && px.x == 4 && px.y == 9;

  report(2, "sampler statistics", worst_kl < 0.01 && all_at_argmax,
         "max KL = " + fmt(worst_kl) + ", tau-limit exact = " +
             (all_at_argmax ? "yes" : "no"));
}

// ----------------------------------------------------------------------
// 3. Gradient checks: three losses vs central differences, 20 seeds,
//    random 6x6 fields, relative error < 1e-4.

void criterion_3() {
  double worst = 0.0;
  bool ok = true;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const int q = 3 + int(seed % 3);
    Grid3<double> g = random_logits(q, 6, 6, derive_seed(seed, "accept3"));

    auto r1 = gradcheck(
        g, [](const Grid3<double>& x) { return continuity_loss(x); }, continuity_grad(g));
    const std::vector<int> targets = argmax_labels(g);
    auto r2 = gradcheck(
        g, [&](const Grid3<double>& x) { return cross_entropy_vs_targets(x, targets); },
        self_distill_grad(g));

    Rng rng(seed);
    PseudoLabelBatch batch;
    for (int i = 0; i < 16; ++i)
      batch.samples.emplace_back(Pixel{int(rng.below(6)), int(rng.below(6))},
                                 int(rng.below(3)));
    std::vector<int> label_map = {0, 1, 2};
    auto r3 = gradcheck(
        g, [&](const Grid3<double>& x) { return scribble_loss(x, batch, label_map); },
        scribble_grad(g, batch, label_map));

    ok = ok && r1.ok && r2.ok && r3.ok;
    worst = std::max({worst, r1.worst_rel, r2.worst_rel, r3.worst_rel});
  }
  report(3, "loss gradient checks", ok, "20 seeds, worst relative error = " + fmt(worst));
}

// ----------------------------------------------------------------------
// 4. Metric oracle: 200 random mask pairs <= 16x16, exact agreement;
//    identity -> 1.0; disjoint -> 0.0.

void criterion_4() {
  int compared = 0;
  bool exact = true;
  for (uint64_t seed = 0; seed < 400 && compared < 200; ++seed) {
    Rng rng(derive_seed(seed, "accept4"));
    int h = 2 + int(rng.below(15)), w = 2 + int(rng.below(15));
    ByteField gt(h, w), pred(h, w);
    for (uint8_t& v : gt.data)
      v = rng.uniform() < 0.06 ? 255 : uint8_t(rng.below(5));
    for (uint8_t& v : pred.data) v = uint8_t(rng.below(5));

    auto iou = best_match_miou(gt, pred);
    bool has_fg = false;
    for (uint8_t v : gt.data) has_fg = has_fg || (v != 0 && v != 255);
    if (!has_fg) {
      exact = exact && !iou.has_value();
      continue;
    }
    exact = exact && iou.has_value() && *iou == miou_oracle(gt, pred);
    ++compared;
  }

  ByteField m(8, 8, 0);
  m.at(1, 1) = 1;
  m.at(5, 5) = 2;
  auto same = best_match_miou(m, m);
  bool identity_one = same.has_value() && *same == 1.0;

  ByteField a(4, 4, 0), b(4, 4, 0);
  a.at(0, 0) = 1;
  b.at(3, 3) = 1;
  auto disj = best_match_miou(a, b);
  bool disjoint_zero = disj.has_value() && *disj == 0.0;

  report(4, "best-match mIoU oracle", exact && identity_one && disjoint_zero,
         std::to_string(compared) + " pairs exact, identity = " +
             (identity_one ? "1.0" : "bad") + ", disjoint = " + (disjoint_zero ? "0.0" : "bad"));
}

// ----------------------------------------------------------------------
// 5. End-to-end mock pipeline on the bundled 10-image synthetic dataset:
//    cluster >= 0.85, mock interactive >= 0.90, both seed-deterministic.

EvalConfig e2e_config(Method method) {
  EvalConfig cfg;
  cfg.dataset = "synthetic";
  cfg.pipeline.method = method;
  cfg.pipeline.grid.crop_size = 32;
  cfg.pipeline.grid.stride = 16;
  cfg.master_seed = 7;
  cfg.mock_noise_sigma = 0.05;
  cfg.mock_blur_radius = 1;
  return cfg;
}

void criterion_5() {
  auto records = load_synthetic(0, 10);

  EvalReport cluster1 = run_benchmark(records, e2e_config(Method::cluster));
  EvalReport cluster2 = run_benchmark(records, e2e_config(Method::cluster));
  EvalReport inter1 = run_benchmark(records, e2e_config(Method::interactive));
  EvalReport inter2 = run_benchmark(records, e2e_config(Method::interactive));

  const bool deterministic = cluster1.to_json().dump() == cluster2.to_json().dump() &&
                             inter1.to_json().dump() == inter2.to_json().dump();
  const bool thresholds = cluster1.mean_iou >= 0.85 && inter1.mean_iou >= 0.90;
  report(5, "end-to-end mock pipeline",
         thresholds && deterministic && cluster1.scored == 10 && inter1.scored == 10,
         "cluster mean IoU = " + fmt(cluster1.mean_iou) + " (>= 0.85), interactive = " +
             fmt(inter1.mean_iou) + " (>= 0.90), deterministic = " +
             (deterministic ? "yes" : "no"));
}

// ----------------------------------------------------------------------
// 6. Ablation shape on the synthetic dataset (threshold method):
//    full view set >= identity-only; crop-only >= identity+flip+contrast.
//    The mock emulates the backend's 7x7 token grid here: whole-image
//    views come back coarse while crops stay sharp, the property that
//    makes the crop view carry the ablation.

double ablation_miou(const std::vector<DatasetRecord>& records,
                     const std::vector<ViewKind>& views) {
  EvalConfig cfg = e2e_config(Method::threshold);
  cfg.pipeline.views = views;
  cfg.mock_patch_grid = 7;
  cfg.mock_blur_radius = 0;
  EvalReport report = run_benchmark(records, cfg);
  return report.mean_iou;
}

void criterion_6() {
  auto records = load_synthetic(0, 10);
  const double full = ablation_miou(records, {ViewKind::identity, ViewKind::hflip,
                                              ViewKind::contrast, ViewKind::crop});
  const double identity_only = ablation_miou(records, {ViewKind::identity});
  const double crop_only = ablation_miou(records, {ViewKind::crop});
  const double whole_views =
      ablation_miou(records, {ViewKind::identity, ViewKind::hflip, ViewKind::contrast});

  const bool ok = full >= identity_only && crop_only >= whole_views;
  report(6, "view-ablation shape", ok,
         "full = " + fmt(full) + " >= identity " + fmt(identity_only) + "; crop = " +
             fmt(crop_only) + " >= id+flip+contrast " + fmt(whole_views));
}

// ----------------------------------------------------------------------
// 7. Baseline degeneracy: scribble weight 0 makes the cluster output
//    independent of the relevance archive (bit-equal masks, same seed).

void criterion_7() {
  Scene scene = promptseg::testing::two_box_scene(48, 48);
  MockBackend backend(scene, {});
  PromptSet prompts;
  prompts.queries = scene.categories;
  prompts.distractors = default_distractors(scene.categories);

  // two different relevance archives (round-tripped through .rmz)
  TempDir dir("accept7");
  RefinedRelevance real =
      refine(backend, scene.image, prompts, {ViewKind::identity}, CropGridSpec{}, 1);
  RmzMeta meta{backend.descriptor(), CropGridSpec{}, 1};
  save_rmz(dir.str("real.rmz"), real, meta);

  RefinedRelevance scrambled = real;
  for (auto& m : scrambled.maps) {
    Rng rng(99);
    for (float& v : m.data) v = float(rng.uniform());
    minmax_normalize(m);
  }
  save_rmz(dir.str("scrambled.rmz"), scrambled, meta);

  ClusterConfig cfg;
  cfg.weights.scribble = 0.0;
  cfg.seed = 21;
  SegmentResult r1 = segment(scene.image, fuse(load_rmz(dir.str("real.rmz")).refined), cfg);
  SegmentResult r2 = segment(scene.image, fuse(load_rmz(dir.str("scrambled.rmz")).refined), cfg);

  const bool bit_equal = r1.mask.labels.data == r2.mask.labels.data;
  report(7, "scribble-free baseline ignores relevance", bit_equal,
         bit_equal ? "masks bit-equal across different archives" : "masks differ");
}

// ----------------------------------------------------------------------
// 8. Serialization: .rmz and mask PNG round-trips bit-exact; config
//    round-trip identity.

void criterion_8() {
  TempDir dir("accept8");
  bool ok = true;
  std::string detail;

  Scene scene = make_scene(3, {});
  MockBackendConfig mc;
  mc.noise_sigma = 0.05;
  mc.seed = 3;
  MockBackend backend(scene, mc);
  PromptSet prompts;
  prompts.queries = scene.categories;
  prompts.distractors = default_distractors(scene.categories);
  RefinedRelevance refined = refine(backend, scene.image, prompts,
                                    {ViewKind::identity, ViewKind::hflip}, CropGridSpec{}, 5);
  RmzMeta meta{backend.descriptor(), CropGridSpec{}, 5};
  save_rmz(dir.str("maps.rmz"), refined, meta);
  RmzArchive back = load_rmz(dir.str("maps.rmz"));
  for (size_t c = 0; c < refined.maps.size(); ++c) {
    if (std::memcmp(refined.maps[c].data.data(), back.refined.maps[c].data.data(),
                    refined.maps[c].data.size() * sizeof(float)) != 0) {
      ok = false;
      detail = "rmz payload mismatch";
    }
  }
  if (back.refined.categories != refined.categories) ok = false;

  // archives with identical content are byte-identical on disk
  save_rmz(dir.str("maps2.rmz"), refined, meta);
  {
    std::ifstream fa(dir.str("maps.rmz"), std::ios::binary);
    std::ifstream fb(dir.str("maps2.rmz"), std::ios::binary);
    std::vector<char> a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::vector<char> b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    if (a != b || a.empty()) {
      ok = false;
      detail = "rmz archives not byte-deterministic";
    }
  }

  SegmentationMask mask;
  mask.labels = ByteField(20, 17);
  Rng rng(4);
  for (uint8_t& v : mask.labels.data) v = uint8_t(rng.below(5));
  mask.categories = {"a", "b", "c", "d"};
  save_mask(dir.str("m.png"), dir.str("m.json"), mask);
  SegmentationMask mask_back = load_mask(dir.str("m.png"), dir.str("m.json"));
  if (mask_back.labels.data != mask.labels.data || mask_back.categories != mask.categories) {
    ok = false;
    detail = "mask round-trip mismatch";
  }

  PipelineConfig cfg;
  cfg.method = Method::interactive;
  cfg.views = {ViewKind::crop};
  cfg.grid.stride = 31;
  cfg.cluster.max_labels = 9;
  cfg.interactive.n_pos = 5;
  cfg.seed = 99;
  nlohmann::json j1 = cfg.to_json();
  nlohmann::json j2 = PipelineConfig::from_json(j1).to_json();
  if (j1.dump() != j2.dump()) {
    ok = false;
    detail = "config round-trip not identity";
  }

  report(8, "serialization round-trips", ok, ok ? "rmz + mask PNG + config identical" : detail);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  const double dt =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT") << " ("
            << g_failures << " failed, " << dt << " s)\n";
  return g_failures == 0 ? 0 : 1;
}
