#pragma once

#include "promptseg/tta.hpp"

namespace promptseg {

// Provenance recorded alongside the maps in the archive.
struct RmzMeta {
  BackendDescriptor backend;
  CropGridSpec grid;
  uint64_t seed = 0;
};

// The .rmz archive: a standard zip holding meta.json plus one
// cat_<index>.f32 entry per category (row-major little-endian float32,
// h*w values). Round-trips bit-exactly.
void save_rmz(const std::string& path, const RefinedRelevance& refined, const RmzMeta& meta);

struct RmzArchive {
  RefinedRelevance refined;
  RmzMeta meta;
};

RmzArchive load_rmz(const std::string& path);

}  // namespace promptseg
