#include <doctest.h>

#include "promptseg/fusion.hpp"
#include "promptseg/tta.hpp"
#include "test_support.hpp"

using namespace promptseg;
using promptseg::testing::two_box_scene;

namespace {

MultiClassRelevance from_channels(std::vector<FloatField> channels,
                                  std::vector<std::string> names) {
  RefinedRelevance refined;
  refined.height = channels[0].height;
  refined.width = channels[0].width;
  refined.maps = std::move(channels);
  refined.categories = std::move(names);
  refined.low_confidence.assign(refined.maps.size(), false);
  return fuse(refined);
}

}  // namespace

TEST_CASE("fuse: background is the complement of the channel maximum") {
  FloatField a(1, 2), b(1, 2);
  a.at(0, 0) = 0.9f;
  b.at(0, 0) = 0.2f;
  a.at(0, 1) = 0.0f;
  b.at(0, 1) = 0.0f;
  auto mc = from_channels({a, b}, {"a", "b"});
  CHECK(mc.background.at(0, 0) == doctest::Approx(0.1f));
  CHECK(mc.background.at(0, 1) == doctest::Approx(1.0f));
}

TEST_CASE("fuse: single all-zero map gives an all-one background") {
  auto mc = from_channels({FloatField(3, 3, 0.0f)}, {"a"});
  for (float v : mc.background.data) CHECK(v == 1.0f);
}

TEST_CASE("fuse rejects shape mismatches") {
  RefinedRelevance refined;
  refined.height = 2;
  refined.width = 2;
  refined.maps = {FloatField(2, 2), FloatField(3, 3)};
  refined.categories = {"a", "b"};
  refined.low_confidence = {false, false};
  CHECK_THROWS_AS(fuse(refined), Error);
}

TEST_CASE("fuse + binarize recover disjoint noise-free mock categories exactly") {
  Scene scene = two_box_scene();
  MockBackend backend(scene, {});
  PromptSet prompts;
  prompts.queries = scene.categories;
  prompts.distractors = {"bird"};
  auto refined = refine(backend, scene.image, prompts, {ViewKind::identity}, CropGridSpec{}, 0);
  auto fused = fuse(refined);
  SegmentationMask mask = binarize(fused, 0.5);
  ByteField expected = scene.labels();
  CHECK(mask.labels.data == expected.data);
}

TEST_CASE("sample: tiny temperature sends every draw to the argmax pixel") {
  FloatField m(4, 4, 0.1f);
  m.at(2, 3) = 0.9f;  // unique maximum
  auto mc = from_channels({m}, {"a"});
  PseudoLabelBatch batch = sample(mc, 1, 500, 1e-6, 7);
  REQUIRE(batch.samples.size() == 500);
  for (const auto& [px, label] : batch.samples) {
    CHECK(px.x == 3);
    CHECK(px.y == 2);
    CHECK(label == 1);
  }
}

TEST_CASE("sample: uniform map passes a chi-square uniformity test on an 8x8 grid") {
  auto mc = from_channels({FloatField(8, 8, 0.4f)}, {"a"});
  const int n = 10000;
  PseudoLabelBatch batch = sample(mc, 1, n, 1.0, 123);
  std::vector<int> counts(64, 0);
  for (const auto& [px, label] : batch.samples) counts[size_t(px.y) * 8 + px.x] += 1;
  const double expected = n / 64.0;
  double chi2 = 0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  // 63 degrees of freedom, significance 0.01 -> critical value 92.010
  CHECK(chi2 < 92.010);
}

TEST_CASE("sample: two-pixel map converges to the closed-form softmax ratio") {
  FloatField m(1, 2);
  m.at(0, 0) = 1.0f;
  m.at(0, 1) = 0.0f;
  auto mc = from_channels({m}, {"a"});
  const int n = 10000;
  PseudoLabelBatch batch = sample(mc, 1, n, 1.0, 99);
  int hits = 0;
  for (const auto& [px, label] : batch.samples) hits += px.x == 0;
  const double expected = std::exp(1.0) / (std::exp(1.0) + 1.0);  // ~0.7311
  CHECK(std::abs(double(hits) / n - expected) < 0.02);
}

TEST_CASE("sample: identical inputs and seed give identical batches") {
  FloatField m(6, 6);
  Rng rng(1);
  for (float& v : m.data) v = float(rng.uniform());
  auto mc = from_channels({m}, {"a"});
  auto b1 = sample(mc, 1, 200, 0.3, 5);
  auto b2 = sample(mc, 1, 200, 0.3, 5);
  CHECK(b1.samples == b2.samples);
  auto b3 = sample(mc, 1, 200, 0.3, 6);
  CHECK(b1.samples != b3.samples);
}

TEST_CASE("sample: all-zero channel falls back to uniform with a flag") {
  auto mc = from_channels({FloatField(4, 4, 0.0f)}, {"a"});
  PseudoLabelBatch batch = sample(mc, 1, 64, 0.1, 7);
  CHECK(batch.low_confidence);
  CHECK(batch.samples.size() == 64);
}

TEST_CASE("sample: the background label draws from the background channel") {
  FloatField m(2, 2, 1.0f);
  m.at(0, 0) = 0.0f;  // background probability 1 only at (0,0)
  auto mc = from_channels({m}, {"a"});
  PseudoLabelBatch batch = sample(mc, 0, 100, 1e-6, 3);
  for (const auto& [px, label] : batch.samples) {
    CHECK(label == 0);
    CHECK(px.x == 0);
    CHECK(px.y == 0);
  }
}

TEST_CASE("sample: argmax mass never drops when the temperature is lowered") {
  FloatField m(5, 5);
  Rng rng(8);
  for (float& v : m.data) v = float(rng.uniform());
  auto mc = from_channels({m}, {"a"});

  size_t arg = 0;
  for (size_t i = 1; i < m.data.size(); ++i)
    if (m.data[i] > m.data[arg]) arg = i;

  const int n = 20000;
  auto mass_at = [&](double tau) {
    PseudoLabelBatch b = sample(mc, 1, n, tau, 17);
    int hits = 0;
    for (const auto& [px, label] : b.samples)
      hits += size_t(px.y) * 5 + size_t(px.x) == arg;
    return double(hits) / n;
  };
  CHECK(mass_at(0.05) >= mass_at(0.2) - 0.01);
  CHECK(mass_at(0.2) >= mass_at(1.0) - 0.01);
}

TEST_CASE("sample argument validation") {
  auto mc = from_channels({FloatField(2, 2, 0.5f)}, {"a"});
  CHECK_THROWS_AS(sample(mc, 1, 0, 0.1, 0), Error);
  CHECK_THROWS_AS(sample(mc, 1, 1, 0.0, 0), Error);
  CHECK_THROWS_AS(sample(mc, 2, 1, 0.1, 0), Error);  // only labels 0..1 exist
}

TEST_CASE("binarize: zero threshold and zero background reduce to pure argmax") {
  FloatField a(2, 2), b(2, 2);
  a.at(0, 0) = 0.9f;
  b.at(0, 0) = 0.3f;
  a.at(0, 1) = 0.2f;
  b.at(0, 1) = 0.7f;
  a.at(1, 0) = 0.6f;
  b.at(1, 0) = 0.1f;
  a.at(1, 1) = 0.1f;
  b.at(1, 1) = 0.8f;
  auto mc = from_channels({a, b}, {"a", "b"});
  mc.background = FloatField(2, 2, 0.0f);  // force zero background
  SegmentationMask mask = binarize(mc, 0.0);
  CHECK(mask.labels.at(0, 0) == 1);
  CHECK(mask.labels.at(0, 1) == 2);
  CHECK(mask.labels.at(1, 0) == 1);
  CHECK(mask.labels.at(1, 1) == 2);
}

TEST_CASE("binarize: threshold 1.0 over sub-unit maps blanks the mask") {
  FloatField a(3, 3, 0.9f);
  auto mc = from_channels({a}, {"a"});
  SegmentationMask mask = binarize(mc, 1.0);
  for (uint8_t v : mask.labels.data) CHECK(v == 0);
}

TEST_CASE("binarize: common positive rescaling of channels keeps the argmax labels") {
  FloatField a(5, 5), b(5, 5);
  Rng rng(31);
  for (float& v : a.data) v = float(rng.uniform());
  for (float& v : b.data) v = float(rng.uniform());
  minmax_normalize(a);
  minmax_normalize(b);
  auto mc1 = from_channels({a, b}, {"a", "b"});

  FloatField a2 = a, b2 = b;
  for (float& v : a2.data) v *= 2.75f;
  for (float& v : b2.data) v *= 2.75f;
  minmax_normalize(a2);  // re-normalization restores the original scale
  minmax_normalize(b2);
  auto mc2 = from_channels({a2, b2}, {"a", "b"});

  SegmentationMask m1 = binarize(mc1, 0.25);
  SegmentationMask m2 = binarize(mc2, 0.25);
  CHECK(m1.labels.data == m2.labels.data);
}

TEST_CASE("binarize validates the threshold range") {
  auto mc = from_channels({FloatField(2, 2, 0.5f)}, {"a"});
  CHECK_THROWS_AS(binarize(mc, -0.1), Error);
  CHECK_THROWS_AS(binarize(mc, 1.1), Error);
}
