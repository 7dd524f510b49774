#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "promptseg/eval.hpp"

namespace fs = std::filesystem;

namespace promptseg {

std::string to_string(KMode m) {
  switch (m) {
    case KMode::gt: return "gt";
    case KMode::one: return "one";
    case KMode::automatic: return "auto";
  }
  return "?";
}

KMode k_mode_from_string(const std::string& s) {
  if (s == "gt") return KMode::gt;
  if (s == "one" || s == "1") return KMode::one;
  if (s == "auto" || s == "automatic") return KMode::automatic;
  fail(ErrorCode::invalid_argument, "unknown k mode: " + s);
}

nlohmann::json EvalConfig::to_json() const {
  nlohmann::json j;
  j["pipeline"] = pipeline.to_json();
  j["dataset"] = dataset;
  j["k_mode"] = to_string(k_mode);
  j["k_auto_cutoff"] = k_auto_cutoff;
  j["master_seed"] = master_seed;
  j["mock_noise_sigma"] = mock_noise_sigma;
  j["mock_blur_radius"] = mock_blur_radius;
  j["mock_patch_grid"] = mock_patch_grid;
  // workers and cache_dir affect scheduling and storage, not results,
  // so they stay out of the identity hash.
  return j;
}

std::string EvalConfig::config_hash() const {
  const std::string canonical = to_json().dump();
  uint64_t h = hash_bytes(canonical.data(), canonical.size());
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

// Vocabulary the k-mode prompt selection draws from.
std::vector<std::string> dataset_vocabulary(const std::string& dataset,
                                            const std::vector<DatasetRecord>& records) {
  if (dataset == "voc") return voc_class_names();
  std::vector<std::string> vocab;
  for (const auto& r : records)
    for (const auto& c : r.categories)
      if (std::find(vocab.begin(), vocab.end(), c) == vocab.end()) vocab.push_back(c);
  std::sort(vocab.begin(), vocab.end());
  return vocab;
}

Scene scene_from_record(const DatasetRecord& rec, const Image& image) {
  Scene scene;
  scene.image = image;
  scene.categories = rec.categories;
  for (size_t c = 0; c < rec.categories.size(); ++c) {
    ByteField mask(rec.ground_truth.height, rec.ground_truth.width, 0);
    for (size_t i = 0; i < mask.data.size(); ++i)
      mask.data[i] = rec.ground_truth.data[i] == uint8_t(c + 1) ? 1 : 0;
    scene.masks.push_back(std::move(mask));
  }
  return scene;
}

std::unique_ptr<Backend> backend_for_record(const EvalConfig& cfg, const DatasetRecord& rec,
                                            const Image& image) {
  if (cfg.pipeline.backend == "mock") {
    MockBackendConfig mc;
    mc.noise_sigma = cfg.mock_noise_sigma;
    mc.blur_radius = cfg.mock_blur_radius;
    mc.patch_grid_emulation = cfg.mock_patch_grid;
    mc.seed = derive_seed(cfg.master_seed, "mock." + rec.id);
    return std::make_unique<MockBackend>(scene_from_record(rec, image), mc);
  }
  return make_backend(cfg.pipeline.backend, cfg.pipeline.backend_config);
}

PromptSet prompts_for_record(const EvalConfig& cfg, const DatasetRecord& rec,
                             const Backend& backend, const Image& image,
                             const std::vector<std::string>& vocabulary) {
  PromptSet prompts;
  switch (cfg.k_mode) {
    case KMode::gt:
      prompts.queries = rec.categories;
      break;
    case KMode::one: {
      if (rec.categories.size() == 1) {
        prompts.queries = {rec.categories[0]};
        break;
      }
      // Most probable single category over the dataset vocabulary.
      PromptSet probe;
      probe.queries = vocabulary;
      std::vector<double> p = backend.class_probabilities(image, probe);
      size_t best = 0;
      for (size_t i = 1; i < vocabulary.size(); ++i)
        if (p[i] > p[best]) best = i;
      prompts.queries = {vocabulary[best]};
      break;
    }
    case KMode::automatic: {
      PromptSet probe;
      probe.queries = vocabulary;
      std::vector<double> p = backend.class_probabilities(image, probe);
      size_t best = 0;
      for (size_t i = 0; i < vocabulary.size(); ++i) {
        if (p[i] > p[best]) best = i;
        if (p[i] > cfg.k_auto_cutoff) prompts.queries.push_back(vocabulary[i]);
      }
      if (prompts.queries.empty()) prompts.queries = {vocabulary[best]};
      break;
    }
  }
  return prompts;
}

PerImageResult evaluate_record(const EvalConfig& cfg, const DatasetRecord& rec,
                               const std::vector<std::string>& vocabulary) {
  PerImageResult out;
  out.id = rec.id;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Image image = rec.image_path.empty() ? rec.image : load_image(rec.image_path);
    std::unique_ptr<Backend> backend = backend_for_record(cfg, rec, image);
    PromptSet prompts = prompts_for_record(cfg, rec, *backend, image, vocabulary);

    PipelineConfig pipe = cfg.pipeline;
    pipe.seed = derive_seed(cfg.master_seed, "image." + rec.id);
    PipelineResult result = run_pipeline(*backend, image, prompts, pipe);

    std::optional<double> iou = best_match_miou(rec.ground_truth, result.mask.labels);
    if (!iou.has_value()) {
      out.skipped = true;
      out.error = "ground truth has no foreground segment";
    } else {
      out.iou = *iou;
      out.ok = true;
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                       .count();
  return out;
}

// ----------------------------- cache -----------------------------

fs::path cache_file(const EvalConfig& cfg, const std::string& id) {
  return fs::path(cfg.cache_dir) / cfg.config_hash() / (id + ".json");
}

std::optional<PerImageResult> cache_load(const EvalConfig& cfg, const std::string& id) {
  if (cfg.cache_dir.empty()) return std::nullopt;
  std::ifstream f(cache_file(cfg, id));
  if (!f) return std::nullopt;
  nlohmann::json j = nlohmann::json::parse(f, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) return std::nullopt;
  PerImageResult r;
  r.id = j.value("id", id);
  r.iou = j.value("iou", 0.0);
  r.ok = j.value("ok", false);
  r.skipped = j.value("skipped", false);
  r.error = j.value("error", std::string());
  r.runtime_ms = j.value("runtime_ms", 0.0);
  r.from_cache = true;
  return r;
}

void cache_store(const EvalConfig& cfg, const PerImageResult& r) {
  if (cfg.cache_dir.empty()) return;
  const fs::path path = cache_file(cfg, r.id);
  fs::create_directories(path.parent_path());
  nlohmann::json j;
  j["id"] = r.id;
  j["iou"] = r.iou;
  j["ok"] = r.ok;
  j["skipped"] = r.skipped;
  j["error"] = r.error;
  j["runtime_ms"] = r.runtime_ms;
  // Single writer per key: write to a private temp name, then rename.
  const fs::path tmp = path.string() + ".tmp" + std::to_string(uint64_t(
                           std::hash<std::thread::id>{}(std::this_thread::get_id())));
  {
    std::ofstream f(tmp, std::ios::trunc);
    f << j.dump() << "\n";
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
}

}  // namespace

EvalReport run_benchmark(const std::vector<DatasetRecord>& records, const EvalConfig& config) {
  EvalReport report;
  report.dataset = config.dataset;
  report.config = config.to_json();
  report.config_hash = config.config_hash();
  report.per_image.resize(records.size());

  const std::vector<std::string> vocabulary = dataset_vocabulary(config.dataset, records);

  const int workers = std::max(1, config.workers);
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
      if (auto cached = cache_load(config, records[i].id)) {
        report.per_image[i] = *cached;
        continue;
      }
      PerImageResult r = evaluate_record(config, records[i], vocabulary);
      cache_store(config, r);
      report.per_image[i] = r;
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::sort(report.per_image.begin(), report.per_image.end(),
            [](const PerImageResult& a, const PerImageResult& b) { return a.id < b.id; });

  double sum = 0.0;
  for (const auto& r : report.per_image) {
    if (r.ok) {
      sum += r.iou;
      ++report.scored;
    } else if (r.skipped) {
      ++report.skipped;
    } else {
      ++report.failed;
    }
    // Summed per-image time rather than wall time: cache reruns then
    // reproduce the report byte for byte.
    report.total_runtime_ms += r.runtime_ms;
  }
  report.mean_iou = report.scored > 0 ? sum / report.scored : 0.0;
  return report;
}

std::vector<EvalReport> run_benchmark_grid(const std::vector<DatasetRecord>& records,
                                           const std::vector<EvalConfig>& grid) {
  std::vector<EvalReport> reports;
  reports.reserve(grid.size());
  for (const auto& cfg : grid) reports.push_back(run_benchmark(records, cfg));
  return reports;
}

// Wall-clock numbers stay out of the JSON: two runs of the same config,
// seed, and inputs must produce byte-identical reports. Runtimes show up
// in the human-readable table instead.
nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["config_hash"] = config_hash;
  j["config"] = config;
  j["mean_iou"] = mean_iou;
  j["scored"] = scored;
  j["failed"] = failed;
  j["skipped"] = skipped;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : per_image) {
    nlohmann::json e;
    e["id"] = r.id;
    e["iou"] = r.iou;
    e["ok"] = r.ok;
    e["skipped"] = r.skipped;
    e["error"] = r.error;
    per.push_back(e);
  }
  j["per_image"] = per;
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << "dataset: " << dataset << "   config: " << config_hash << "\n";
  os << std::left << std::setw(28) << "image" << std::right << std::setw(10) << "IoU"
     << "  status\n";
  for (const auto& r : per_image) {
    os << std::left << std::setw(28) << r.id;
    if (r.ok)
      os << std::right << std::setw(10) << std::fixed << std::setprecision(4) << r.iou
         << "  ok" << (r.from_cache ? " (cached)" : "") << "\n";
    else
      os << std::right << std::setw(10) << "-" << "  " << (r.skipped ? "skipped" : "FAILED")
         << (r.error.empty() ? "" : ": " + r.error) << "\n";
  }
  os << std::left << std::setw(28) << "mean" << std::right << std::setw(10) << std::fixed
     << std::setprecision(4) << mean_iou << "  (" << scored << " scored, " << skipped
     << " skipped, " << failed << " failed, " << std::setprecision(1) << total_runtime_ms / 1000.0
     << " s)\n";
  return os.str();
}

}  // namespace promptseg
