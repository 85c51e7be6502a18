#include <fstream>

#include <json.hpp>

#include "reperfq/io.hpp"
#include "reperfq/phase.hpp"

namespace reperfq {
namespace phase {

using nlohmann::json;

PhaseModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), ErrorCode::ParseError, "invalid JSON in " + path.string());
  try {
    PhaseModel model;
    model.feature_schema = j.at("feature_schema").get<std::string>();
    require(model.feature_schema == PhaseModel().feature_schema, ErrorCode::ParseError,
            path.string() + ": unsupported feature schema '" + model.feature_schema + "'");
    const auto weights = j.at("weights").get<std::vector<double>>();
    require(weights.size() == static_cast<size_t>(kPhaseCount) * kFeatureDim,
            ErrorCode::ParseError, path.string() + ": weights must be 4 x feature dimension");
    for (int k = 0; k < kPhaseCount; ++k) {
      for (int d = 0; d < kFeatureDim; ++d) {
        model.weights[k][d] = weights[static_cast<size_t>(k) * kFeatureDim + d];
      }
    }
    const auto bias = j.at("bias").get<std::vector<double>>();
    const auto means = j.at("feature_means").get<std::vector<double>>();
    const auto stds = j.at("feature_stds").get<std::vector<double>>();
    require(bias.size() == kPhaseCount && means.size() == kFeatureDim &&
                stds.size() == kFeatureDim,
            ErrorCode::ParseError, path.string() + ": wrong bias or statistics length");
    std::copy(bias.begin(), bias.end(), model.bias.begin());
    std::copy(means.begin(), means.end(), model.feature_means.begin());
    std::copy(stds.begin(), stds.end(), model.feature_stds.begin());
    for (double s : model.feature_stds) {
      require(s > 0.0, ErrorCode::ParseError, path.string() + ": feature stds must be positive");
    }
    return model;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

void save_model(const PhaseModel& model, const std::filesystem::path& path) {
  json j;
  j["feature_schema"] = model.feature_schema;
  std::vector<double> weights;
  weights.reserve(static_cast<size_t>(kPhaseCount) * kFeatureDim);
  for (int k = 0; k < kPhaseCount; ++k) {
    weights.insert(weights.end(), model.weights[k].begin(), model.weights[k].end());
  }
  j["weights"] = weights;
  j["bias"] = std::vector<double>(model.bias.begin(), model.bias.end());
  j["feature_means"] = std::vector<double>(model.feature_means.begin(), model.feature_means.end());
  j["feature_stds"] = std::vector<double>(model.feature_stds.begin(), model.feature_stds.end());
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace phase
}  // namespace reperfq
