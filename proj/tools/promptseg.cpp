// promptseg: zero-shot multi-class segmentation from text prompts.
//
// Subcommands:
//   segment    image + prompts -> mask PNG, sidecar, .rmz, overlay, run log
//   relevance  image + prompts -> .rmz archive (optionally rendered)
//   evaluate   dataset benchmark with per-image result caching
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "promptseg/eval.hpp"
#include "promptseg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace promptseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalidArgs = 2;
constexpr int kExitBackendFailure = 3;
constexpr int kExitNoSignal = 4;
constexpr int kExitDatasetNotFound = 5;

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    while (!item.empty() && item.back() == ' ') item.pop_back();
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int exit_code_for(const Error& e, bool evaluating) {
  switch (e.code()) {
    case ErrorCode::backend_unavailable:
    case ErrorCode::model_unavailable:
    case ErrorCode::non_finite_relevance:
      return kExitBackendFailure;
    case ErrorCode::no_signal:
      return kExitNoSignal;
    case ErrorCode::dataset_not_found:
      return kExitDatasetNotFound;
    case ErrorCode::missing_file:
      return evaluating ? kExitDatasetNotFound : kExitInvalidArgs;
    default:
      return kExitInvalidArgs;
  }
}

struct CommonArgs {
  std::string config_path;
  std::string image_path;
  std::string prompts_csv;
  std::string backend;
  std::string scene_path;
  std::string views_csv;
  std::string distractors_csv;
  std::string out_dir = "promptseg_out";
  uint64_t seed = 0;
  bool seed_set = false;
};

void add_common_options(CLI::App* cmd, CommonArgs& args, bool needs_image) {
  cmd->add_option("--config", args.config_path, "JSON config file (flags override its values)");
  if (needs_image) {
    cmd->add_option("--image", args.image_path, "input image (PNG or JPEG)")->required();
    cmd->add_option("--prompts", args.prompts_csv, "comma-separated category prompts")
        ->required();
  }
  cmd->add_option("--backend", args.backend, "backend name (mock, external)");
  cmd->add_option("--scene", args.scene_path,
                  "mock scene JSON (becomes the backend config; see `export_scene`)");
  cmd->add_option("--views", args.views_csv, "views: identity,hflip,contrast,crop");
  cmd->add_option("--distractors", args.distractors_csv, "calibration prompts");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
}

PipelineConfig resolve_config(const CommonArgs& args) {
  PipelineConfig config;
  if (!args.config_path.empty()) {
    std::ifstream f(args.config_path);
    if (!f) fail(ErrorCode::missing_file, "config file not found: " + args.config_path);
    config = PipelineConfig::from_json(nlohmann::json::parse(f));
  }
  if (!args.backend.empty()) config.backend = args.backend;
  if (!args.scene_path.empty()) {
    std::ifstream f(args.scene_path);
    if (!f) fail(ErrorCode::missing_file, "scene file not found: " + args.scene_path);
    config.backend_config = nlohmann::json::parse(f);
    if (config.backend.empty()) config.backend = "mock";
  }
  if (!args.views_csv.empty()) config.views = parse_view_kinds(args.views_csv);
  if (!args.distractors_csv.empty()) config.distractors = split_csv(args.distractors_csv);
  if (args.seed_set) config.seed = args.seed;
  return config;
}

Image load_input_image(const std::string& path) {
  if (!fs::exists(path)) fail(ErrorCode::missing_file, "image not found: " + path);
  return load_image(path);
}

void write_resolved_config(const PipelineConfig& config, const fs::path& out_dir) {
  std::ofstream f(out_dir / "config.json", std::ios::trunc);
  f << config.to_json().dump(2) << "\n";
}

// ----------------------------- segment -----------------------------

int cmd_segment(const CommonArgs& args, const PipelineConfig& config) {
  fs::create_directories(args.out_dir);
  Image image = load_input_image(args.image_path);

  PromptSet prompts;
  prompts.queries = split_csv(args.prompts_csv);

  auto backend = make_backend(config.backend, config.backend_config);
  PipelineResult result = run_pipeline(*backend, image, prompts, config);

  const fs::path out(args.out_dir);
  save_mask((out / "mask.png").string(), (out / "mask.json").string(), result.mask);
  save_rmz((out / "relevance.rmz").string(), result.refined,
           RmzMeta{backend->descriptor(), config.grid, config.seed});
  save_png_rgb((out / "overlay.png").string(), render_overlay(image, result.mask.labels));
  if (result.cluster_result)
    write_run_log((out / "runlog.jsonl").string(), *result.cluster_result, config.seed);
  if (config.method == Method::interactive) {
    std::ofstream f(out / "clicks.json", std::ios::trunc);
    f << result.click_transcript.dump(2) << "\n";
  }
  write_resolved_config(config, out);

  for (const auto& name : result.low_confidence_categories)
    std::cerr << "warning: no relevance signal for category '" << name << "'\n";
  std::cout << "wrote " << (out / "mask.png").string() << "\n";
  return kExitOk;
}

// ----------------------------- relevance -----------------------------

int cmd_relevance(const CommonArgs& args, const PipelineConfig& config, bool render) {
  fs::create_directories(args.out_dir);
  Image image = load_input_image(args.image_path);

  PromptSet prompts;
  prompts.queries = split_csv(args.prompts_csv);
  if (prompts.distractors.empty())
    prompts.distractors = config.distractors.empty() ? default_distractors(prompts.queries)
                                                     : config.distractors;

  auto backend = make_backend(config.backend, config.backend_config);
  RefinedRelevance refined =
      refine(*backend, image, prompts, config.views, config.grid, config.seed);

  const fs::path out(args.out_dir);
  save_rmz((out / "relevance.rmz").string(), refined,
           RmzMeta{backend->descriptor(), config.grid, config.seed});
  if (render) {
    for (size_t c = 0; c < refined.maps.size(); ++c)
      save_heatmap_png((out / ("cat_" + std::to_string(c) + ".png")).string(), refined.maps[c]);
  }
  write_resolved_config(config, out);
  std::cout << "wrote " << (out / "relevance.rmz").string() << "\n";
  return kExitOk;
}

// ----------------------------- evaluate -----------------------------

struct EvaluateArgs {
  std::string dataset = "synthetic";
  std::string root;
  std::string split = "val";
  std::string k_mode = "gt";
  std::string method;
  std::string cache_dir;
  int subset = 0;
  int workers = 1;
  int count = 10;  // synthetic dataset size
  double noise_sigma = 0.05;
  int blur_radius = 1;
};

int cmd_evaluate(const CommonArgs& args, PipelineConfig config, const EvaluateArgs& eargs) {
  fs::create_directories(args.out_dir);

  std::vector<DatasetRecord> records;
  if (eargs.dataset == "synthetic") {
    records = load_synthetic(args.seed_set ? args.seed : 0, eargs.count);
  } else if (eargs.dataset == "voc") {
    std::string root = eargs.root;
    if (root.empty() && std::getenv("PROMPTSEG_VOC_ROOT")) root = std::getenv("PROMPTSEG_VOC_ROOT");
    if (root.empty()) fail(ErrorCode::dataset_not_found, "no VOC root (--root or PROMPTSEG_VOC_ROOT)");
    records = load_voc(root, eargs.split);
  } else if (eargs.dataset == "imagenet-seg") {
    std::string root = eargs.root;
    if (root.empty() && std::getenv("PROMPTSEG_IMAGENETSEG_ROOT"))
      root = std::getenv("PROMPTSEG_IMAGENETSEG_ROOT");
    if (root.empty())
      fail(ErrorCode::dataset_not_found, "no root (--root or PROMPTSEG_IMAGENETSEG_ROOT)");
    records = load_imagenet_seg(root);
  } else {
    fail(ErrorCode::invalid_argument, "unknown dataset: " + eargs.dataset);
  }

  EvalConfig config_eval;
  config_eval.pipeline = config;
  config_eval.dataset = eargs.dataset;
  config_eval.k_mode = k_mode_from_string(eargs.k_mode);
  config_eval.master_seed = args.seed_set ? args.seed : 0;
  config_eval.workers = eargs.workers;
  config_eval.cache_dir = eargs.cache_dir.empty()
                              ? (fs::path(args.out_dir) / "cache").string()
                              : eargs.cache_dir;
  config_eval.mock_noise_sigma = eargs.noise_sigma;
  config_eval.mock_blur_radius = eargs.blur_radius;

  records = select_subset(std::move(records), eargs.subset, config_eval.master_seed);
  std::cerr << "evaluating " << records.size() << " images from " << eargs.dataset << "\n";

  EvalReport report = run_benchmark(records, config_eval);

  const fs::path report_path =
      fs::path(args.out_dir) / ("report_" + report.config_hash + ".json");
  std::ofstream f(report_path, std::ios::trunc);
  f << report.to_json().dump(2) << "\n";
  std::ofstream t(fs::path(args.out_dir) / ("report_" + report.config_hash + ".txt"),
                  std::ios::trunc);
  t << report.table();
  std::cout << report.table();
  std::cout << "report: " << report_path.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"promptseg: text-prompted zero-shot semantic segmentation"};
  app.require_subcommand(1);

  CommonArgs seg_args, rel_args, eval_args;
  EvaluateArgs eargs;
  bool render = false;
  std::string method_flag, threshold_flag, budget_flag;

  auto* seg = app.add_subcommand("segment", "segment one image from text prompts");
  add_common_options(seg, seg_args, /*needs_image=*/true);
  seg->add_option("--method", method_flag, "threshold | cluster | interactive");
  seg->add_option("--threshold", threshold_flag, "binarization threshold (threshold method)");
  seg->add_option("--budget", budget_flag, "soft runtime budget in seconds (cluster method)");

  auto* rel = app.add_subcommand("relevance", "compute and archive refined relevance maps");
  add_common_options(rel, rel_args, /*needs_image=*/true);
  rel->add_flag("--render", render, "also render per-category heatmap PNGs");

  auto* eva = app.add_subcommand("evaluate", "run a dataset benchmark");
  add_common_options(eva, eval_args, /*needs_image=*/false);
  eva->add_option("--dataset", eargs.dataset, "synthetic | voc | imagenet-seg");
  eva->add_option("--root", eargs.root, "dataset root directory");
  eva->add_option("--split", eargs.split, "VOC split (default val)");
  eva->add_option("--subset", eargs.subset, "evaluate a seeded subset of this size");
  eva->add_option("--workers", eargs.workers, "parallel image workers");
  eva->add_option("--k-mode", eargs.k_mode, "gt | one | auto");
  eva->add_option("--cache", eargs.cache_dir, "result cache directory");
  eva->add_option("--count", eargs.count, "synthetic dataset size");
  eva->add_option("--noise-sigma", eargs.noise_sigma, "mock backend noise");
  eva->add_option("--blur-radius", eargs.blur_radius, "mock backend blur");
  eva->add_option("--method", method_flag, "threshold | cluster | interactive");
  eva->add_option("--threshold", threshold_flag, "binarization threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInvalidArgs;
  }

  const bool evaluating = eva->parsed();
  try {
    CommonArgs& args = seg->parsed() ? seg_args : (rel->parsed() ? rel_args : eval_args);
    PipelineConfig config = resolve_config(args);
    if (!method_flag.empty()) config.method = method_from_string(method_flag);
    if (!threshold_flag.empty()) config.threshold = std::stod(threshold_flag);
    if (!budget_flag.empty())
      config.cluster.time_budget_ms = int64_t(std::stod(budget_flag) * 1000.0);

    if (seg->parsed()) return cmd_segment(seg_args, config);
    if (rel->parsed()) return cmd_relevance(rel_args, config, render);
    return cmd_evaluate(eval_args, config, eargs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e, evaluating);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalidArgs;
  }
}
