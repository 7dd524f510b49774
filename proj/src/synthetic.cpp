#include "promptseg/synthetic.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "promptseg/backend.hpp"

namespace promptseg {

namespace {

struct ShapeSpec {
  bool ellipse = false;
  int cx = 0, cy = 0, rx = 0, ry = 0;  // ellipse: center + radii; box: center + half extents
};

ByteField rasterize(const ShapeSpec& s, int h, int w) {
  ByteField mask(h, w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool inside;
      if (s.ellipse) {
        double dx = double(x - s.cx) / s.rx;
        double dy = double(y - s.cy) / s.ry;
        inside = dx * dx + dy * dy <= 1.0;
      } else {
        inside = std::abs(x - s.cx) <= s.rx && std::abs(y - s.cy) <= s.ry;
      }
      if (inside) mask.at(y, x) = 1;
    }
  return mask;
}

bool overlaps(const ByteField& a, const ByteField& b) {
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] && b.data[i]) return true;
  return false;
}

// Saturated, widely separated colors so region recovery stays robust
// under the contrast view.
const std::vector<std::array<float, 3>>& region_colors() {
  static const std::vector<std::array<float, 3>> colors = {
      {0.95f, 0.10f, 0.10f}, {0.10f, 0.85f, 0.15f}, {0.10f, 0.25f, 0.95f},
      {0.95f, 0.90f, 0.10f}, {0.90f, 0.15f, 0.90f}, {0.10f, 0.90f, 0.90f},
  };
  return colors;
}

const std::vector<std::string>& object_names() {
  static const std::vector<std::string> names = {"disc", "box",  "ring",
                                                 "wedge", "blob", "stripe"};
  return names;
}

}  // namespace

Scene make_scene(uint64_t seed, const SyntheticSpec& spec) {
  Rng rng(derive_seed(seed, "synthetic.scene"));
  const int h = spec.height, w = spec.width;
  const int k = rng.uniform_int(spec.min_categories, spec.max_categories);

  Scene scene;
  scene.image = Image(h, w);
  // flat dark background
  const std::array<float, 3> bg = {0.18f, 0.18f, 0.18f};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float* p = scene.image.pixel(y, x);
      p[0] = bg[0];
      p[1] = bg[1];
      p[2] = bg[2];
    }

  // choose k distinct names/colors for this scene
  std::vector<int> order(object_names().size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
  for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const double min_area = spec.min_region_fraction * h * w;
  for (int c = 0; c < k; ++c) {
    ByteField mask;
    for (int attempt = 0; attempt < 200; ++attempt) {
      ShapeSpec s;
      s.ellipse = rng.uniform() < 0.5;
      s.rx = rng.uniform_int(w / 8, w / 4);
      s.ry = rng.uniform_int(h / 8, h / 4);
      s.cx = rng.uniform_int(s.rx + 1, w - s.rx - 2);
      s.cy = rng.uniform_int(s.ry + 1, h - s.ry - 2);
      ByteField candidate = rasterize(s, h, w);

      double area = 0;
      for (uint8_t v : candidate.data) area += v;
      if (area < min_area) continue;

      bool clash = false;
      for (const auto& existing : scene.masks) clash = clash || overlaps(candidate, existing);
      if (!clash) {
        mask = std::move(candidate);
        break;
      }
    }
    if (mask.empty()) break;  // canvas too crowded; keep what fits

    const auto& color = region_colors()[size_t(order[size_t(c)])];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (mask.at(y, x)) {
          float* p = scene.image.pixel(y, x);
          p[0] = color[0];
          p[1] = color[1];
          p[2] = color[2];
        }
    scene.categories.push_back(object_names()[size_t(order[size_t(c)])]);
    scene.masks.push_back(std::move(mask));
  }

  if (scene.categories.empty())
    fail(ErrorCode::invalid_argument, "make_scene: could not place any region");
  scene.validate();
  return scene;
}

std::vector<SyntheticRecord> make_synthetic_dataset(uint64_t master_seed, int count,
                                                    const SyntheticSpec& spec) {
  std::vector<SyntheticRecord> out;
  for (int i = 0; i < count; ++i) {
    SyntheticRecord rec;
    rec.id = "synthetic_" + std::to_string(i);
    rec.scene = make_scene(derive_seed(master_seed, rec.id), spec);
    rec.ground_truth = rec.scene.labels();
    out.push_back(std::move(rec));
  }
  return out;
}

std::string export_scene(const Scene& scene, const std::string& dir, const std::string& stem,
                         double noise_sigma, int blur_radius, uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string image_path = (fs::path(dir) / (stem + ".png")).string();
  const std::string labels_path = (fs::path(dir) / (stem + "_labels.png")).string();
  const std::string scene_path = (fs::path(dir) / (stem + "_scene.json")).string();

  save_png_rgb(image_path, scene.image);
  save_png_gray(labels_path, scene.labels());

  nlohmann::json j;
  j["scene"] = {{"image", image_path}, {"labels", labels_path}, {"categories", scene.categories}};
  j["noise_sigma"] = noise_sigma;
  j["blur_radius"] = blur_radius;
  j["seed"] = seed;
  std::ofstream f(scene_path, std::ios::trunc);
  if (!f) fail(ErrorCode::io_error, "cannot write scene json: " + scene_path);
  f << j.dump(2) << "\n";
  return scene_path;
}

}  // namespace promptseg
