#include "promptseg/scene.hpp"

namespace promptseg {

void Scene::validate() const {
  if (image.empty()) fail(ErrorCode::invalid_image, "scene image is empty");
  if (categories.size() != masks.size())
    fail(ErrorCode::invalid_argument, "scene category/mask count mismatch");
  for (const auto& m : masks) {
    if (m.height != image.height || m.width != image.width)
      fail(ErrorCode::shape_mismatch, "scene masks must share the image shape");
  }
}

ByteField Scene::labels() const {
  ByteField out(image.height, image.width, 0);
  for (size_t c = 0; c < masks.size(); ++c) {
    for (size_t i = 0; i < out.data.size(); ++i)
      if (masks[c].data[i]) out.data[i] = uint8_t(c + 1);
  }
  return out;
}

}  // namespace promptseg
