#pragma once

#include <optional>

#include "promptseg/pipeline.hpp"
#include "promptseg/synthetic.hpp"

namespace promptseg {

// One evaluation image: ground truth plus either an on-disk image path
// or an inline raster (bundled synthetic data).
struct DatasetRecord {
  std::string id;
  std::string dataset;     // "voc" | "imagenet-seg" | "synthetic"
  std::string image_path;  // empty when `image` is inline
  Image image;
  ByteField ground_truth;               // 0 bg, 1..K, 255 ignore (VOC boundary band)
  std::vector<std::string> categories;  // names for the labels present, GT order
};

// Best-match mean IoU: each nonzero GT class is one segment; every
// segment scores against the predicted class region with the largest
// IoU; the mean over GT segments is returned. Pixels equal to
// ignore_label in the GT are excluded from intersections and unions.
// Returns nullopt when the GT has no foreground segment.
std::optional<double> best_match_miou(const ByteField& gt, const ByteField& pred,
                                      int ignore_label = 255);

const std::vector<std::string>& voc_class_names();  // the 20 VOC categories

// Standard VOC layout (root may point at VOCdevkit, VOC2012, or their
// parent). Raises missing_file listing every absent path.
std::vector<DatasetRecord> load_voc(const std::string& root, const std::string& split);

// Flat layout: <root>/index.txt with "<id>\t<category>" lines,
// <root>/images/<id>.(png|jpg), <root>/masks/<id>.png (binary).
std::vector<DatasetRecord> load_imagenet_seg(const std::string& root);

// The bundled deterministic synthetic dataset.
std::vector<DatasetRecord> load_synthetic(uint64_t master_seed, int count,
                                          const SyntheticSpec& spec = {});

// How per-image prompt lists are chosen.
enum class KMode { gt, one, automatic };
std::string to_string(KMode m);
KMode k_mode_from_string(const std::string& s);

struct EvalConfig {
  PipelineConfig pipeline;
  std::string dataset = "synthetic";
  KMode k_mode = KMode::gt;
  double k_auto_cutoff = 0.3;  // automatic mode keeps P(category) > cutoff
  uint64_t master_seed = 0;
  int workers = 1;
  std::string cache_dir;  // empty disables the result cache
  // Mock backend parameters applied when pipeline.backend == "mock"
  // (the scene comes from each record's ground truth).
  double mock_noise_sigma = 0.05;
  int mock_blur_radius = 1;
  int mock_patch_grid = 0;  // token-grid emulation, 0 = per-pixel maps

  // Stable identity for cache keys: hash of the canonical JSON form.
  std::string config_hash() const;
  nlohmann::json to_json() const;
};

struct PerImageResult {
  std::string id;
  double iou = 0.0;
  bool ok = false;
  bool skipped = false;  // GT had no foreground segment
  std::string error;
  double runtime_ms = 0.0;
  bool from_cache = false;
};

struct EvalReport {
  std::string dataset;
  std::string config_hash;
  nlohmann::json config;
  std::vector<PerImageResult> per_image;  // sorted by id
  double mean_iou = 0.0;                  // over scored images
  int scored = 0;
  int failed = 0;
  int skipped = 0;
  double total_runtime_ms = 0.0;

  nlohmann::json to_json() const;
  std::string table() const;  // human-readable summary
};

EvalReport run_benchmark(const std::vector<DatasetRecord>& records, const EvalConfig& config);
std::vector<EvalReport> run_benchmark_grid(const std::vector<DatasetRecord>& records,
                                           const std::vector<EvalConfig>& grid);

// Seeded subset selection used by `evaluate --subset`.
std::vector<DatasetRecord> select_subset(std::vector<DatasetRecord> records, int subset,
                                         uint64_t seed);

}  // namespace promptseg
