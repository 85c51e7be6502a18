#include "reperfq/config.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "reperfq/io.hpp"

namespace reperfq {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(),
                                [&](const char* k) { return key == k; });
    require(ok, ErrorCode::ParseError, where + ": unknown key '" + key + "'");
  }
}

}  // namespace

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), ErrorCode::ParseError, "invalid JSON in " + path.string());
  require(j.is_object(), ErrorCode::ParseError, path.string() + ": config must be an object");
  reject_unknown(j, {"registration", "frangi", "quantification", "model", "atlas_dir", "seed"},
                 path.string());

  PipelineConfig cfg;
  try {
    if (j.contains("registration")) {
      const json& r = j["registration"];
      reject_unknown(r,
                     {"histogram_bins", "samples_per_iter", "pyramid_factors",
                      "iterations_per_level", "step_a", "step_A", "step_alpha",
                      "fd_epsilon_matrix", "fd_epsilon_translation", "rng_seed"},
                     path.string() + ": registration");
      MIConfig& mi = cfg.score.mi;
      if (r.contains("histogram_bins")) mi.histogram_bins = r["histogram_bins"].get<int>();
      if (r.contains("samples_per_iter")) mi.samples_per_iter = r["samples_per_iter"].get<int>();
      if (r.contains("pyramid_factors"))
        mi.pyramid_factors = r["pyramid_factors"].get<std::vector<int>>();
      if (r.contains("iterations_per_level"))
        mi.iterations_per_level = r["iterations_per_level"].get<int>();
      if (r.contains("step_a")) mi.step_a = r["step_a"].get<double>();
      if (r.contains("step_A")) mi.step_A = r["step_A"].get<double>();
      if (r.contains("step_alpha")) mi.step_alpha = r["step_alpha"].get<double>();
      if (r.contains("fd_epsilon_matrix"))
        mi.fd_epsilon_matrix = r["fd_epsilon_matrix"].get<double>();
      if (r.contains("fd_epsilon_translation"))
        mi.fd_epsilon_translation = r["fd_epsilon_translation"].get<double>();
      if (r.contains("rng_seed")) mi.rng_seed = r["rng_seed"].get<uint64_t>();
    }
    if (j.contains("frangi")) {
      const json& f = j["frangi"];
      reject_unknown(f, {"sigmas", "blobness", "structureness_gamma", "response_threshold"},
                     path.string() + ": frangi");
      seg::FrangiConfig& fr = cfg.score.frangi;
      if (f.contains("sigmas")) fr.sigmas = f["sigmas"].get<std::vector<double>>();
      if (f.contains("blobness")) fr.blobness = f["blobness"].get<double>();
      if (f.contains("structureness_gamma"))
        fr.structureness_gamma = f["structureness_gamma"].get<double>();
      if (f.contains("response_threshold"))
        fr.response_threshold = f["response_threshold"].get<double>();
    }
    if (j.contains("quantification")) {
      const json& q = j["quantification"];
      reject_unknown(q, {"include_vessels_as_perfused", "min_tdt_pixels"},
                     path.string() + ": quantification");
      if (q.contains("include_vessels_as_perfused"))
        cfg.score.quant.include_vessels_as_perfused =
            q["include_vessels_as_perfused"].get<bool>();
      if (q.contains("min_tdt_pixels"))
        cfg.score.quant.min_tdt_pixels = q["min_tdt_pixels"].get<int64_t>();
    }
    if (j.contains("model")) cfg.model_path = j["model"].get<std::string>();
    if (j.contains("atlas_dir")) cfg.atlas_dir = j["atlas_dir"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  cfg.score.mi.validate();
  cfg.score.frangi.validate();
  cfg.score.quant.validate();
  return cfg;
}

std::vector<Atlas> load_atlas_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorCode::MissingFile,
          "atlas directory does not exist: " + dir.string());
  std::vector<fs::path> images;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path p = entry.path();
    const std::string stem = p.stem().string();
    const std::string ext = p.extension().string();
    if ((ext == ".pgm" || ext == ".png") && !stem.ends_with("_mask")) images.push_back(p);
  }
  std::sort(images.begin(), images.end());

  std::vector<Atlas> atlases;
  for (const fs::path& img : images) {
    fs::path mask_path = img.parent_path() / (img.stem().string() + "_mask.pgm");
    if (!fs::exists(mask_path)) {
      mask_path = img.parent_path() / (img.stem().string() + "_mask.png");
    }
    if (!fs::exists(mask_path)) continue;  // image without a mask is not an atlas
    Atlas atlas;
    atlas.image = load_image(img);
    atlas.mask = load_mask(mask_path);
    require(atlas.mask.width == atlas.image.width && atlas.mask.height == atlas.image.height,
            ErrorCode::DimensionMismatch, "atlas mask dimensions differ for " + img.string());
    atlases.push_back(std::move(atlas));
  }
  require(!atlases.empty(), ErrorCode::EmptyAtlasSet,
          "no atlas image/mask pairs found in " + dir.string());
  return atlases;
}

}  // namespace reperfq
