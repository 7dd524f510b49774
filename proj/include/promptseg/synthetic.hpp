#pragma once

#include "promptseg/scene.hpp"

namespace promptseg {

// Procedural scenes with flat, well-separated region colors: the ground
// truth the weight-free test fixtures and the bundled evaluation dataset
// are built from.
struct SyntheticSpec {
  int height = 64;
  int width = 64;
  int min_categories = 2;
  int max_categories = 3;
  // Shapes are rejected until they avoid each other; each covers at
  // least this fraction of the image.
  double min_region_fraction = 0.05;
};

Scene make_scene(uint64_t seed, const SyntheticSpec& spec = {});

struct SyntheticRecord {
  std::string id;
  Scene scene;
  ByteField ground_truth;  // 0 background, 1..K per scene category order
};

// The bundled dataset: `count` scenes derived deterministically from the
// master seed.
std::vector<SyntheticRecord> make_synthetic_dataset(uint64_t master_seed, int count,
                                                    const SyntheticSpec& spec = {});

// Materializes a scene for CLI use: image PNG, labels PNG, and a mock
// backend scene JSON. Returns the scene JSON path.
std::string export_scene(const Scene& scene, const std::string& dir, const std::string& stem,
                         double noise_sigma, int blur_radius, uint64_t seed);

}  // namespace promptseg
