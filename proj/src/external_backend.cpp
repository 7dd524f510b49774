#include "promptseg/external_backend.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace promptseg {

namespace {

std::atomic<uint64_t> g_request_counter{0};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  out += "'";
  return out;
}

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("promptseg_" + tag + "_" + std::to_string(uint64_t(::getpid())) + "_" +
            std::to_string(g_request_counter.fetch_add(1)));
    fs::create_directories(path);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

}  // namespace

ExternalProcessBackend::ExternalProcessBackend(ExternalBackendConfig config)
    : config_(std::move(config)) {
  if (config_.command.empty())
    fail(ErrorCode::backend_unavailable, "external backend: no command configured");
  descriptor().validate();
}

BackendDescriptor ExternalProcessBackend::descriptor() const {
  return BackendDescriptor{config_.name, config_.input_resolution, config_.patch_grid_h,
                           config_.patch_grid_w};
}

std::string ExternalProcessBackend::run_request(const Image& image,
                                                const nlohmann::json& request) const {
  if (image.empty()) fail(ErrorCode::invalid_image, "external backend: empty image");

  ScratchDir dir("ext");
  save_png_rgb((dir.path / "image.png").string(), image);

  nlohmann::json req = request;
  req["image"] = "image.png";
  req["height"] = image.height;
  req["width"] = image.width;
  req["weights"] = config_.weights;
  {
    std::ofstream f(dir.path / "request.json");
    f << req.dump(2) << "\n";
  }

  const std::string cmd = config_.command + " " + shell_quote(dir.path.string());
  int rc = std::system(cmd.c_str());
  if (rc != 0)
    fail(ErrorCode::backend_unavailable,
         "external backend command failed (exit " + std::to_string(rc) + "): " + config_.command);

  // Caller reads its reply file before the scratch dir is torn down.
  std::string kept = dir.path.string();
  dir.path.clear();  // hand ownership to caller
  return kept;
}

std::vector<double> ExternalProcessBackend::class_probabilities(const Image& image,
                                                                const PromptSet& prompts) const {
  prompts.validate();
  nlohmann::json req;
  req["op"] = "probabilities";
  req["prompts"] = prompts.all_formatted();

  std::string dir = run_request(image, req);
  struct Cleanup {
    std::string d;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(d, ec);
    }
  } cleanup{dir};

  std::ifstream f(fs::path(dir) / "probabilities.json");
  if (!f) fail(ErrorCode::backend_unavailable, "external backend wrote no probabilities.json");
  nlohmann::json reply = nlohmann::json::parse(f, nullptr, /*allow_exceptions=*/false);
  if (reply.is_discarded() || !reply.is_array() ||
      reply.size() != prompts.all_formatted().size())
    fail(ErrorCode::backend_unavailable, "external backend: malformed probabilities.json");

  std::vector<double> probs = reply.get<std::vector<double>>();
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p))
      fail(ErrorCode::backend_unavailable, "external backend: negative or non-finite probability");
    sum += p;
  }
  if (sum <= 0.0) fail(ErrorCode::backend_unavailable, "external backend: zero probability mass");
  for (double& p : probs) p /= sum;
  return probs;
}

RelevanceMap ExternalProcessBackend::relevance(const Image& image,
                                               const std::string& prompt) const {
  nlohmann::json req;
  req["op"] = "relevance";
  req["prompt"] = prompt;

  std::string dir = run_request(image, req);
  struct Cleanup {
    std::string d;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(d, ec);
    }
  } cleanup{dir};

  std::ifstream f(fs::path(dir) / "relevance.f32", std::ios::binary);
  if (!f) fail(ErrorCode::backend_unavailable, "external backend wrote no relevance.f32");
  std::vector<char> raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  const size_t full = size_t(image.height) * image.width;
  const size_t grid = size_t(config_.patch_grid_h) * config_.patch_grid_w;
  const size_t n = raw.size() / sizeof(float);
  if (raw.size() % sizeof(float) != 0 || (n != full && n != grid))
    fail(ErrorCode::backend_unavailable,
         "external backend: relevance.f32 has " + std::to_string(n) +
             " floats, expected " + std::to_string(full) + " or " + std::to_string(grid));

  FloatField map;
  if (n == grid && n != full) {
    FloatField coarse(config_.patch_grid_h, config_.patch_grid_w);
    std::memcpy(coarse.data.data(), raw.data(), raw.size());
    RelevanceMap probe{std::move(coarse), prompt};
    validate_relevance(probe, "external backend patch grid");
    map = bilinear_resize(probe.scores, image.height, image.width);
  } else {
    map = FloatField(image.height, image.width);
    std::memcpy(map.data.data(), raw.data(), raw.size());
  }

  RelevanceMap out{std::move(map), prompt};
  validate_relevance(out, "external backend");
  // Raw interpretability scores arrive at arbitrary scale; clip the
  // negative part and rescale into the map contract.
  for (float& v : out.scores.data) v = std::max(v, 0.0f);
  minmax_normalize(out.scores);
  return out;
}

void register_external_backend() {
  BackendRegistry::instance().register_factory("external", [](const nlohmann::json& cfg) {
    ExternalBackendConfig ec;
    ec.command = cfg.value("command", std::string());
    ec.weights = cfg.value("weights", std::string());
    ec.name = cfg.value("name", ec.name);
    ec.input_resolution = cfg.value("input_resolution", ec.input_resolution);
    if (cfg.contains("patch_grid")) {
      ec.patch_grid_h = cfg["patch_grid"].at(0).get<int>();
      ec.patch_grid_w = cfg["patch_grid"].at(1).get<int>();
    }
    return std::make_unique<ExternalProcessBackend>(ec);
  });
}

}  // namespace promptseg
