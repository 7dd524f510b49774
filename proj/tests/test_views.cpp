#include <doctest.h>

#include "promptseg/views.hpp"
#include "test_support.hpp"

using namespace promptseg;

namespace {

Image noise_image(int h, int w, uint64_t seed) {
  Image img(h, w);
  Rng rng(seed);
  for (float& v : img.rgb) v = float(rng.uniform());
  return img;
}

}  // namespace

TEST_CASE("grid positions follow the clamped-stride rule") {
  // 400-pixel axis, crop 224, stride 50: last regular start is 150
  // (150+224=374 <= 400), then the clamp appends 400-224=176.
  CHECK(grid_positions(400, 224, 50) == std::vector<int>{0, 50, 100, 150, 176});
  // exact fit: no extra clamp position
  CHECK(grid_positions(224, 224, 50) == std::vector<int>{0});
  CHECK(grid_positions(274, 224, 50) == std::vector<int>{0, 50});
  // image smaller than the crop: single origin placement
  CHECK(grid_positions(64, 224, 50) == std::vector<int>{0});
}

TEST_CASE("make_views: 400x400 image with 224/50 grid yields 25 crops") {
  Image img = noise_image(400, 400, 1);
  CropGridSpec grid;  // 224 / 50
  auto views = make_views(img, {ViewKind::crop}, grid, 0);
  CHECK(views.size() == 25);
  for (const auto& v : views) {
    CHECK(v.kind == ViewKind::crop);
    CHECK(v.crop_w == 224);
    CHECK(v.crop_h == 224);
    CHECK(v.crop_x + v.crop_w <= 400);
    CHECK(v.crop_y + v.crop_h <= 400);
  }
}

TEST_CASE("make_views: identity only") {
  Image img = noise_image(16, 16, 1);
  auto views = make_views(img, {ViewKind::identity}, CropGridSpec{}, 0);
  REQUIRE(views.size() == 1);
  CHECK(views[0].kind == ViewKind::identity);
  Image fwd = views[0].forward(img);
  CHECK(fwd.rgb == img.rgb);
}

TEST_CASE("make_views: empty view set is an error") {
  Image img = noise_image(8, 8, 1);
  try {
    make_views(img, {}, CropGridSpec{}, 0);
    FAIL("expected empty_view_set");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::empty_view_set);
  }
}

TEST_CASE("contrast view: seeded factor is reproducible and in range") {
  Image img = noise_image(8, 8, 1);
  auto v1 = make_views(img, {ViewKind::contrast}, CropGridSpec{}, 42);
  auto v2 = make_views(img, {ViewKind::contrast}, CropGridSpec{}, 42);
  auto v3 = make_views(img, {ViewKind::contrast}, CropGridSpec{}, 43);
  REQUIRE(v1.size() == 1);
  CHECK(v1[0].contrast_factor == v2[0].contrast_factor);
  CHECK(v1[0].contrast_factor != v3[0].contrast_factor);
  CHECK(v1[0].contrast_factor >= 0.5f);
  CHECK(v1[0].contrast_factor <= 1.5f);
}

TEST_CASE("hflip view: backward of forward relevance is the identity") {
  FloatField map(6, 9);
  Rng rng(5);
  for (float& v : map.data) v = float(rng.uniform());

  ViewTransform flip{ViewKind::hflip};
  // relevance computed on the flipped view equals the flipped map;
  // aligning it back must reproduce the original exactly
  FloatField on_view = hflip(map);
  auto aligned = flip.backward_relevance(on_view, 6, 9);
  CHECK(aligned.scores.data == map.data);
  for (uint8_t v : aligned.validity.data) CHECK(v == 1);
}

TEST_CASE("crop view at the origin marks exactly its block valid") {
  ViewTransform crop_view{ViewKind::crop};
  crop_view.crop_x = 0;
  crop_view.crop_y = 0;
  crop_view.crop_w = 224;
  crop_view.crop_h = 224;

  FloatField on_view(224, 224, 0.5f);
  auto aligned = crop_view.backward_relevance(on_view, 448, 448);
  for (int y = 0; y < 448; ++y)
    for (int x = 0; x < 448; ++x) {
      const bool inside = y < 224 && x < 224;
      CHECK(aligned.validity.at(y, x) == (inside ? 1 : 0));
      CHECK(aligned.scores.at(y, x) == (inside ? 0.5f : 0.0f));
    }
}

TEST_CASE("crop grid spec validation") {
  CropGridSpec bad;
  bad.stride = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = CropGridSpec{};
  bad.stride = bad.crop_size + 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = CropGridSpec{};
  bad.gate_threshold = 1.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("view kind parsing") {
  auto kinds = parse_view_kinds("identity,hflip,contrast,crop");
  CHECK(kinds.size() == 4);
  CHECK_THROWS_AS(view_kind_from_string("zoom"), Error);
  CHECK(to_string(ViewKind::hflip) == "hflip");
}
