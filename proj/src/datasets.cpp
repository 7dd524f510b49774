#include <filesystem>
#include <fstream>

#include "promptseg/eval.hpp"

namespace fs = std::filesystem;

namespace promptseg {

std::optional<double> best_match_miou(const ByteField& gt, const ByteField& pred,
                                      int ignore_label) {
  if (!gt.same_shape(pred)) fail(ErrorCode::shape_mismatch, "best_match_miou: shape mismatch");

  // Distinct class values present (nonzero, non-ignore).
  auto classes_of = [&](const ByteField& m) {
    std::vector<uint8_t> present(256, 0);
    for (uint8_t v : m.data) present[v] = 1;
    std::vector<int> out;
    for (int v = 1; v < 256; ++v)
      if (present[size_t(v)] && v != ignore_label) out.push_back(v);
    return out;
  };
  const std::vector<int> gt_classes = classes_of(gt);
  if (gt_classes.empty()) return std::nullopt;
  const std::vector<int> pred_classes = classes_of(pred);

  double sum = 0.0;
  for (int g : gt_classes) {
    double best = 0.0;
    for (int p : pred_classes) {
      size_t inter = 0, uni = 0;
      for (size_t i = 0; i < gt.data.size(); ++i) {
        if (int(gt.data[i]) == ignore_label) continue;
        const bool in_g = int(gt.data[i]) == g;
        const bool in_p = int(pred.data[i]) == p;
        if (in_g && in_p) ++inter;
        if (in_g || in_p) ++uni;
      }
      if (uni > 0) best = std::max(best, double(inter) / double(uni));
    }
    sum += best;
  }
  return sum / double(gt_classes.size());
}

const std::vector<std::string>& voc_class_names() {
  static const std::vector<std::string> names = {
      "aeroplane", "bicycle", "bird",  "boat",      "bottle", "bus",
      "car",       "cat",     "chair", "cow",       "diningtable", "dog",
      "horse",     "motorbike", "person", "pottedplant", "sheep",  "sofa",
      "train",     "tvmonitor"};
  return names;
}

namespace {

fs::path resolve_voc_root(const std::string& root) {
  const fs::path candidates[] = {fs::path(root), fs::path(root) / "VOC2012",
                                 fs::path(root) / "VOCdevkit" / "VOC2012"};
  for (const fs::path& candidate : candidates) {
    if (fs::exists(candidate / "ImageSets" / "Segmentation")) return candidate;
  }
  fail(ErrorCode::dataset_not_found,
       "no VOC layout under '" + root + "' (looked for ImageSets/Segmentation in ., VOC2012, "
       "VOCdevkit/VOC2012)");
}

}  // namespace

std::vector<DatasetRecord> load_voc(const std::string& root, const std::string& split) {
  const fs::path base = resolve_voc_root(root);
  const fs::path list_path = base / "ImageSets" / "Segmentation" / (split + ".txt");
  std::ifstream list(list_path);
  if (!list) fail(ErrorCode::missing_file, "missing split list: " + list_path.string());

  std::vector<std::string> ids;
  std::string line;
  while (std::getline(list, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }

  std::vector<std::string> missing;
  std::vector<DatasetRecord> records;
  records.reserve(ids.size());
  for (const auto& id : ids) {
    const fs::path image_path = base / "JPEGImages" / (id + ".jpg");
    const fs::path mask_path = base / "SegmentationClass" / (id + ".png");
    if (!fs::exists(image_path)) missing.push_back(image_path.string());
    if (!fs::exists(mask_path)) missing.push_back(mask_path.string());
    if (!missing.empty()) continue;

    DatasetRecord rec;
    rec.id = id;
    rec.dataset = "voc";
    rec.image_path = image_path.string();
    rec.ground_truth = load_png_gray(mask_path.string());

    std::vector<uint8_t> present(256, 0);
    for (uint8_t v : rec.ground_truth.data) present[v] = 1;
    for (int v = 1; v <= int(voc_class_names().size()); ++v)
      if (present[size_t(v)]) rec.categories.push_back(voc_class_names()[size_t(v) - 1]);

    // Remap raw VOC ids to the per-record compact order so label i
    // matches categories[i-1]; 255 stays the ignore band.
    std::vector<uint8_t> remap(256, 0);
    remap[255] = 255;
    uint8_t next = 1;
    for (int v = 1; v <= int(voc_class_names().size()); ++v)
      if (present[size_t(v)]) remap[size_t(v)] = next++;
    for (uint8_t& v : rec.ground_truth.data) v = remap[v];

    records.push_back(std::move(rec));
  }

  if (!missing.empty()) {
    std::string msg = "VOC files missing (" + std::to_string(missing.size()) + "):";
    for (size_t i = 0; i < missing.size() && i < 10; ++i) msg += "\n  " + missing[i];
    if (missing.size() > 10) msg += "\n  ...";
    fail(ErrorCode::missing_file, msg);
  }
  return records;
}

std::vector<DatasetRecord> load_imagenet_seg(const std::string& root) {
  const fs::path base(root);
  const fs::path index_path = base / "index.txt";
  std::ifstream index(index_path);
  if (!index)
    fail(ErrorCode::dataset_not_found,
         "no ImageNet-Segmentation layout under '" + root + "' (expected index.txt)");

  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(index, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      fail(ErrorCode::io_error, "index.txt line lacks <id>\\t<category>: " + line);
    entries.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }

  std::vector<std::string> missing;
  std::vector<DatasetRecord> records;
  for (const auto& [id, category] : entries) {
    fs::path image_path = base / "images" / (id + ".png");
    if (!fs::exists(image_path)) image_path = base / "images" / (id + ".jpg");
    const fs::path mask_path = base / "masks" / (id + ".png");
    if (!fs::exists(image_path)) missing.push_back((base / "images" / (id + ".*")).string());
    if (!fs::exists(mask_path)) missing.push_back(mask_path.string());
    if (!missing.empty()) continue;

    DatasetRecord rec;
    rec.id = id;
    rec.dataset = "imagenet-seg";
    rec.image_path = image_path.string();
    rec.ground_truth = load_png_gray(mask_path.string());
    // Single-object binary masks; any nonzero value marks the object.
    for (uint8_t& v : rec.ground_truth.data) v = v ? 1 : 0;
    rec.categories = {category};
    records.push_back(std::move(rec));
  }

  if (!missing.empty()) {
    std::string msg = "ImageNet-Segmentation files missing (" + std::to_string(missing.size()) +
                      "):";
    for (size_t i = 0; i < missing.size() && i < 10; ++i) msg += "\n  " + missing[i];
    if (missing.size() > 10) msg += "\n  ...";
    fail(ErrorCode::missing_file, msg);
  }
  return records;
}

std::vector<DatasetRecord> load_synthetic(uint64_t master_seed, int count,
                                          const SyntheticSpec& spec) {
  std::vector<DatasetRecord> records;
  for (auto& rec : make_synthetic_dataset(master_seed, count, spec)) {
    DatasetRecord r;
    r.id = rec.id;
    r.dataset = "synthetic";
    r.image = std::move(rec.scene.image);
    r.ground_truth = std::move(rec.ground_truth);
    r.categories = std::move(rec.scene.categories);
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<DatasetRecord> select_subset(std::vector<DatasetRecord> records, int subset,
                                         uint64_t seed) {
  if (subset <= 0 || size_t(subset) >= records.size()) return records;
  // Seeded Fisher-Yates prefix, then restore id order for determinism.
  Rng rng(derive_seed(seed, "subset"));
  for (int i = 0; i < subset; ++i) {
    size_t j = size_t(i) + rng.below(records.size() - size_t(i));
    std::swap(records[size_t(i)], records[j]);
  }
  records.resize(size_t(subset));
  std::sort(records.begin(), records.end(),
            [](const DatasetRecord& a, const DatasetRecord& b) { return a.id < b.id; });
  return records;
}

}  // namespace promptseg
