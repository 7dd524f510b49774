#include "promptseg/rmz.hpp"

#include <bit>
#include <cstring>

#include "promptseg/zipfile.hpp"

namespace promptseg {

namespace {

// Little-endian float payload. The build targets little-endian hosts;
// the static_assert trips anywhere that assumption breaks.
static_assert(std::endian::native == std::endian::little,
              "rmz payloads are little-endian; add byte swapping for this platform");

std::vector<uint8_t> float_bytes(const FloatField& f) {
  std::vector<uint8_t> out(f.data.size() * sizeof(float));
  std::memcpy(out.data(), f.data.data(), out.size());
  return out;
}

}  // namespace

void save_rmz(const std::string& path, const RefinedRelevance& refined, const RmzMeta& meta) {
  nlohmann::json j;
  j["height"] = refined.height;
  j["width"] = refined.width;
  j["categories"] = refined.categories;
  std::vector<std::string> views;
  for (ViewKind k : refined.views_used) views.push_back(to_string(k));
  j["views"] = views;
  j["calibration"] = refined.calibration;
  j["low_confidence"] = refined.low_confidence;
  j["grid"] = {{"crop_size", meta.grid.crop_size},
               {"stride", meta.grid.stride},
               {"gate_threshold", meta.grid.gate_threshold}};
  j["backend"] = {{"name", meta.backend.name},
                  {"input_resolution", meta.backend.input_resolution},
                  {"patch_grid", {meta.backend.patch_grid_h, meta.backend.patch_grid_w}}};
  j["seed"] = meta.seed;

  std::vector<ZipEntry> entries;
  std::string meta_str = j.dump(2) + "\n";
  entries.push_back({"meta.json", std::vector<uint8_t>(meta_str.begin(), meta_str.end())});
  for (size_t c = 0; c < refined.maps.size(); ++c)
    entries.push_back({"cat_" + std::to_string(c) + ".f32", float_bytes(refined.maps[c])});
  write_zip(path, entries);
}

RmzArchive load_rmz(const std::string& path) {
  std::vector<ZipEntry> entries = read_zip(path);

  const ZipEntry* meta_entry = nullptr;
  for (const auto& e : entries)
    if (e.name == "meta.json") meta_entry = &e;
  if (!meta_entry) fail(ErrorCode::io_error, "rmz archive missing meta.json: " + path);

  nlohmann::json j = nlohmann::json::parse(meta_entry->data.begin(), meta_entry->data.end());

  RmzArchive out;
  out.refined.height = j.at("height").get<int>();
  out.refined.width = j.at("width").get<int>();
  out.refined.categories = j.at("categories").get<std::vector<std::string>>();
  for (const auto& v : j.at("views")) out.refined.views_used.push_back(view_kind_from_string(v));
  out.refined.calibration = j.at("calibration").get<std::vector<std::string>>();
  out.refined.low_confidence = j.at("low_confidence").get<std::vector<bool>>();
  out.meta.grid.crop_size = j.at("grid").at("crop_size").get<int>();
  out.meta.grid.stride = j.at("grid").at("stride").get<int>();
  out.meta.grid.gate_threshold = j.at("grid").at("gate_threshold").get<double>();
  out.meta.backend.name = j.at("backend").at("name").get<std::string>();
  out.meta.backend.input_resolution = j.at("backend").at("input_resolution").get<int>();
  out.meta.backend.patch_grid_h = j.at("backend").at("patch_grid").at(0).get<int>();
  out.meta.backend.patch_grid_w = j.at("backend").at("patch_grid").at(1).get<int>();
  out.meta.seed = j.at("seed").get<uint64_t>();

  const size_t plane = size_t(out.refined.height) * size_t(out.refined.width);
  for (size_t c = 0; c < out.refined.categories.size(); ++c) {
    std::string name = "cat_" + std::to_string(c) + ".f32";
    const ZipEntry* entry = nullptr;
    for (const auto& e : entries)
      if (e.name == name) entry = &e;
    if (!entry) fail(ErrorCode::io_error, "rmz archive missing " + name);
    if (entry->data.size() != plane * sizeof(float))
      fail(ErrorCode::io_error, "rmz entry " + name + " has wrong size");
    FloatField f(out.refined.height, out.refined.width);
    std::memcpy(f.data.data(), entry->data.data(), entry->data.size());
    out.refined.maps.push_back(std::move(f));
  }
  return out;
}

}  // namespace promptseg
