#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <tuple>

#include "promptseg/scene.hpp"

namespace promptseg::testing {

// Unique scratch directory under the system temp root, removed on
// destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("promptseg_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string str(const std::string& name = "") const {
    return name.empty() ? path.string() : (path / name).string();
  }
};

// Hand-built scene: flat background with axis-aligned colored boxes.
// Deterministic and easy to reason about in assertions.
inline Scene box_scene(int h, int w,
                       const std::vector<std::tuple<std::string, std::array<float, 3>, int, int,
                                                    int, int>>& boxes) {
  Scene scene;
  scene.image = Image(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float* p = scene.image.pixel(y, x);
      p[0] = p[1] = p[2] = 0.18f;
    }
  for (const auto& [name, color, x0, y0, bw, bh] : boxes) {
    ByteField mask(h, w, 0);
    for (int y = std::max(0, y0); y < std::min(h, y0 + bh); ++y)
      for (int x = std::max(0, x0); x < std::min(w, x0 + bw); ++x) {
        mask.at(y, x) = 1;
        float* p = scene.image.pixel(y, x);
        p[0] = color[0];
        p[1] = color[1];
        p[2] = color[2];
      }
    scene.categories.push_back(name);
    scene.masks.push_back(std::move(mask));
  }
  return scene;
}

inline Scene two_box_scene(int h = 48, int w = 48) {
  return box_scene(h, w,
                   {{"alpha", {0.95f, 0.1f, 0.1f}, 6, 6, 12, 12},
                    {"beta", {0.1f, 0.2f, 0.95f}, 28, 26, 14, 14}});
}

}  // namespace promptseg::testing
