#pragma once

#include <string>
#include <vector>

#include "promptseg/common.hpp"
#include "promptseg/image.hpp"

namespace promptseg {

// A synthetic ground-truth scene: an image plus one binary mask per
// category. Drives the mock backend, the mock interactive segmenter,
// and the bundled evaluation dataset.
struct Scene {
  Image image;
  std::vector<std::string> categories;  // names for labels 1..K
  std::vector<ByteField> masks;         // one 0/1 mask per category

  void validate() const;

  // Combined label field: 0 background, 1..K categories. Later
  // categories win where masks overlap (generators keep them disjoint).
  ByteField labels() const;
};

}  // namespace promptseg
