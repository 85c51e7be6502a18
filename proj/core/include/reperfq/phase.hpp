#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <vector>

#include "reperfq/types.hpp"

namespace reperfq {
namespace phase {

/// Binary frame-to-frame transition constraints. The default matrix allows
/// exactly non-contrast->arterial->parenchymal->venous->non-contrast plus
/// self loops, the order contrast physically passes through the brain.
struct TransitionMatrix {
  std::array<std::array<uint8_t, kPhaseCount>, kPhaseCount> allowed{};

  /// The pipeline's fixed transition logic; all allowed transitions carry
  /// equal weight.
  static TransitionMatrix standard();

  bool is_allowed(int from, int to) const { return allowed[from][to] != 0; }
  bool permits(const std::vector<PhaseLabel>& labels) const;
};

/// Number of scalar features describing one 3-frame window (see
/// extract_features for the layout).
inline constexpr int kFeatureDim = 34;

using FeatureVector = std::array<double, kFeatureDim>;

/// Linear softmax classifier over window features, plus the feature
/// standardization fitted at training time.
struct PhaseModel {
  std::array<std::array<double, kFeatureDim>, kPhaseCount> weights{};
  std::array<double, kPhaseCount> bias{};
  std::array<double, kFeatureDim> feature_means{};
  std::array<double, kFeatureDim> feature_stds{};  // strictly positive
  std::string feature_schema = "window-features-v1";

  PhaseModel();
};

/// Describes one window-feature block per frame: summary statistics of the
/// previous/current/next frames (edges duplicate the boundary frame) plus
/// temporal differences of mean intensity and dark fraction.
///
/// Per window frame (10 values): mean, std, 5th percentile, dark fraction
/// (< 0.5), dark-mass row/column centroid in [0,1], dark fraction per
/// quadrant (TL, TR, BL, BR). Then 4 temporal diffs: d(mean), d(dark
/// fraction) for prev->cur and cur->next.
FeatureVector extract_features(const Acquisition& acq, size_t index);

/// Softmax probabilities for every frame of the acquisition.
std::vector<PhaseProbabilities> predict_probabilities(const PhaseModel& model,
                                                      const Acquisition& acq);

/// Maximum-likelihood label sequence under the transition constraints:
/// maximizes sum of log p_t(l_t) over sequences with every consecutive
/// transition allowed, uniform prior over initial states. Ties prefer the
/// smaller phase index at the final frame and at every backtrack step.
/// log(0) is clamped at -1e30.
std::vector<PhaseLabel> decode_constrained(const std::vector<PhaseProbabilities>& probabilities,
                                           const TransitionMatrix& transitions);

/// Border frame indices per phase; absent when the phase never occurs.
PhaseBoundaries phase_boundaries(const std::vector<PhaseLabel>& labels);

/// Everything drawn for one augmentation pass. Sampled by draw_augment_params
/// but also constructible directly, which keeps tests deterministic.
struct AugmentParams {
  bool flip_horizontal = false;
  bool rotate = false;
  double angle_rad = 0.0;  // in [-10, +10] degrees when drawn
  bool jitter = false;
  double translate_x = 0.0;  // pixels
  double translate_y = 0.0;
  double scale = 1.0;  // in [0.8, 1.2] when drawn
};

/// Each effect toggles on with independent probability 0.5; parameters are
/// drawn in a fixed order so a seed fully determines the result.
AugmentParams draw_augment_params(const Frame& frame, std::mt19937& rng);

/// No-op params return the input bit-for-bit; the flip is an exact index
/// swap; rotation/jitter resample bilinearly with out-of-bounds fill 1.0.
Frame augment(const Frame& frame, const AugmentParams& params);
Frame augment(const Frame& frame, std::mt19937& rng);

struct TrainConfig {
  int epochs = 100;
  double initial_learning_rate = 1e-3;  // halved every 10 epochs
  int halve_every = 10;
  /// Extra augmented copies of each training acquisition, generated up
  /// front from the seed (0 = train on the originals only).
  int augment_copies = 0;
};

struct TrainingSample {
  Acquisition acquisition;
  std::vector<PhaseLabel> labels;
};

/// Full-batch gradient descent on the mean softmax cross-entropy, with the
/// learning-rate schedule from TrainConfig. Each step is line-checked
/// (halve the step until the loss does not increase), so the loss is
/// non-increasing over epochs. Deterministic for a fixed seed.
PhaseModel train(const TrainConfig& config, const std::vector<TrainingSample>& dataset,
                 uint64_t rng_seed);

/// Convenience: predict + decode with the standard transition matrix.
PhaseSequence classify(const PhaseModel& model, const Acquisition& acq);

/// Model file: JSON with row-major 4xD weights, bias, feature means/stds and
/// the feature schema version.
PhaseModel load_model(const std::filesystem::path& path);
void save_model(const PhaseModel& model, const std::filesystem::path& path);

}  // namespace phase
}  // namespace reperfq
