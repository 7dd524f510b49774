#pragma once

#include "promptseg/backend.hpp"

namespace promptseg {

// Bridges to a real vision-language model through a user-supplied
// command, keeping heavyweight model runtimes out of this process.
//
// Per request the backend creates a scratch directory containing
// `image.png` and `request.json`, runs `<command> <dir>`, and reads the
// reply back:
//   op "relevance"      -> <dir>/relevance.f32, row-major little-endian
//                          float32, either image-sized or sized to the
//                          declared patch grid (then upsampled bilinearly)
//   op "probabilities"  -> <dir>/probabilities.json, one number per prompt
//
// The configured weights path is forwarded verbatim in request.json.
struct ExternalBackendConfig {
  std::string command;
  std::string weights;
  std::string name = "external";
  int input_resolution = 224;
  int patch_grid_h = 7;
  int patch_grid_w = 7;
};

class ExternalProcessBackend : public Backend {
 public:
  explicit ExternalProcessBackend(ExternalBackendConfig config);

  BackendDescriptor descriptor() const override;
  std::vector<double> class_probabilities(const Image& image,
                                          const PromptSet& prompts) const override;
  RelevanceMap relevance(const Image& image, const std::string& prompt) const override;

 private:
  std::string run_request(const Image& image, const nlohmann::json& request) const;

  ExternalBackendConfig config_;
};

void register_external_backend();

}  // namespace promptseg
