#include "promptseg/pipeline.hpp"

namespace promptseg {

std::string to_string(Method m) {
  switch (m) {
    case Method::threshold: return "threshold";
    case Method::cluster: return "cluster";
    case Method::interactive: return "interactive";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  if (s == "threshold") return Method::threshold;
  if (s == "cluster") return Method::cluster;
  if (s == "interactive") return Method::interactive;
  fail(ErrorCode::invalid_argument, "unknown method: " + s);
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j;
  j["backend"] = backend;
  j["backend_config"] = backend_config;
  std::vector<std::string> view_names;
  for (ViewKind k : views) view_names.push_back(to_string(k));
  j["views"] = view_names;
  j["grid"] = {{"crop_size", grid.crop_size},
               {"stride", grid.stride},
               {"gate_threshold", grid.gate_threshold}};
  j["distractors"] = distractors;
  j["method"] = to_string(method);
  j["threshold"] = threshold;
  j["cluster"] = {{"max_labels", cluster.max_labels},
                  {"max_iters", cluster.max_iters},
                  {"min_labels", cluster.min_labels},
                  {"weights",
                   {{"feature_similarity", cluster.weights.feature_similarity},
                    {"continuity", cluster.weights.continuity},
                    {"scribble", cluster.weights.scribble}}},
                  {"learning_rate", cluster.learning_rate},
                  {"momentum", cluster.momentum},
                  {"samples_per_iter", cluster.samples_per_iter},
                  {"tau", cluster.tau},
                  {"feature_source",
                   cluster.feature_source == FeatureSource::rgb ? "rgb" : "backend"},
                  {"time_budget_ms", cluster.time_budget_ms}};
  j["interactive"] = {{"model", interactive.model},
                      {"model_config", interactive.model_config},
                      {"n_pos", interactive.n_pos},
                      {"n_neg", interactive.n_neg},
                      {"tau", interactive.tau}};
  j["seed"] = seed;
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.backend = j.value("backend", c.backend);
  if (j.contains("backend_config")) c.backend_config = j["backend_config"];
  if (j.contains("views")) {
    c.views.clear();
    for (const auto& v : j["views"]) c.views.push_back(view_kind_from_string(v));
  }
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    c.grid.crop_size = g.value("crop_size", c.grid.crop_size);
    c.grid.stride = g.value("stride", c.grid.stride);
    c.grid.gate_threshold = g.value("gate_threshold", c.grid.gate_threshold);
  }
  if (j.contains("distractors")) c.distractors = j["distractors"].get<std::vector<std::string>>();
  if (j.contains("method")) c.method = method_from_string(j["method"]);
  c.threshold = j.value("threshold", c.threshold);
  if (j.contains("cluster")) {
    const auto& k = j["cluster"];
    c.cluster.max_labels = k.value("max_labels", c.cluster.max_labels);
    c.cluster.max_iters = k.value("max_iters", c.cluster.max_iters);
    c.cluster.min_labels = k.value("min_labels", c.cluster.min_labels);
    if (k.contains("weights")) {
      const auto& w = k["weights"];
      c.cluster.weights.feature_similarity =
          w.value("feature_similarity", c.cluster.weights.feature_similarity);
      c.cluster.weights.continuity = w.value("continuity", c.cluster.weights.continuity);
      c.cluster.weights.scribble = w.value("scribble", c.cluster.weights.scribble);
    }
    c.cluster.learning_rate = k.value("learning_rate", c.cluster.learning_rate);
    c.cluster.momentum = k.value("momentum", c.cluster.momentum);
    c.cluster.samples_per_iter = k.value("samples_per_iter", c.cluster.samples_per_iter);
    c.cluster.tau = k.value("tau", c.cluster.tau);
    if (k.contains("feature_source"))
      c.cluster.feature_source = k["feature_source"] == "backend" ? FeatureSource::backend_features
                                                                  : FeatureSource::rgb;
    c.cluster.time_budget_ms = k.value("time_budget_ms", c.cluster.time_budget_ms);
  }
  if (j.contains("interactive")) {
    const auto& i = j["interactive"];
    c.interactive.model = i.value("model", c.interactive.model);
    if (i.contains("model_config")) c.interactive.model_config = i["model_config"];
    c.interactive.n_pos = i.value("n_pos", c.interactive.n_pos);
    c.interactive.n_neg = i.value("n_neg", c.interactive.n_neg);
    c.interactive.tau = i.value("tau", c.interactive.tau);
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

void PipelineConfig::validate() const {
  grid.validate();
  if (views.empty()) fail(ErrorCode::empty_view_set, "config lists no views");
  if (threshold < 0.0 || threshold > 1.0)
    fail(ErrorCode::invalid_argument, "threshold must be in [0,1]");
  if (interactive.n_pos < 1)
    fail(ErrorCode::invalid_argument, "interactive.n_pos must be >= 1");
  if (interactive.n_neg < 0)
    fail(ErrorCode::invalid_argument, "interactive.n_neg must be >= 0");
  if (!(interactive.tau > 0.0)) fail(ErrorCode::invalid_argument, "interactive.tau must be > 0");
}

PipelineResult run_pipeline(const Backend& backend, const Image& image, PromptSet prompts,
                            const PipelineConfig& config) {
  config.validate();
  if (prompts.distractors.empty())
    prompts.distractors = config.distractors.empty() ? default_distractors(prompts.queries)
                                                     : config.distractors;
  prompts.validate();

  PipelineResult result;
  result.refined = refine(backend, image, prompts, config.views, config.grid, config.seed);
  result.fused = fuse(result.refined);

  switch (config.method) {
    case Method::threshold: {
      result.mask = binarize(result.fused, config.threshold);
      break;
    }
    case Method::cluster: {
      ClusterConfig cc = config.cluster;
      cc.seed = derive_seed(config.seed, "cluster");
      result.cluster_result = segment(image, result.fused, cc, &backend);
      result.mask = result.cluster_result->mask;
      break;
    }
    case Method::interactive: {
      auto model = make_interactive_model(config.interactive.model,
                                          config.interactive.model_config);
      std::vector<std::pair<std::string, BinaryMask>> masks;
      for (size_t c = 0; c < prompts.queries.size(); ++c) {
        const std::string& name = prompts.queries[c];
        if (result.refined.low_confidence[c]) {
          result.low_confidence_categories.push_back(name);
          BinaryMask empty;
          empty.mask = ByteField(image.height, image.width, 0);
          empty.confidence = FloatField(image.height, image.width, 0.0f);
          masks.emplace_back(name, std::move(empty));
          continue;
        }
        ClickPlan plan =
            plan_clicks(result.fused, int(c) + 1, config.interactive.n_pos,
                        config.interactive.n_neg, config.interactive.tau,
                        derive_seed(config.seed, "clicks." + std::to_string(c)));
        nlohmann::json transcript = nlohmann::json::array();
        BinaryMask bm = segment_category(*model, image, plan, &transcript);
        result.click_transcript.push_back(
            {{"category", name}, {"clicks", std::move(transcript)}});
        masks.emplace_back(name, std::move(bm));
      }
      result.mask = merge(masks);
      break;
    }
  }
  result.mask.categories = prompts.queries;
  return result;
}

}  // namespace promptseg
