#pragma once

#include <optional>
#include <vector>

#include "reperfq/types.hpp"

namespace reperfq {

/// Knobs for the Mattes mutual-information metric and the adaptive
/// stochastic gradient descent driving it.
struct MIConfig {
  int histogram_bins = 32;
  int samples_per_iter = 2048;
  std::vector<int> pyramid_factors = {4, 2, 1};  // strictly decreasing, ends at 1
  int iterations_per_level = 300;
  double step_a = 1.0;
  double step_A = 20.0;
  double step_alpha = 0.6;
  double fd_epsilon_matrix = 1e-3;       // finite-difference step, matrix entries
  double fd_epsilon_translation = 0.5;   // finite-difference step, pixels
  uint64_t rng_seed = 0;

  void validate() const;
};

struct RegistrationResult {
  AffineTransform2D transform;
  double final_mi = 0.0;  // nats, on the held-out evaluation sample set
  int iterations_used = 0;
};

/// Mattes mutual information between `fixed` and `moving` composed with `t`,
/// in nats. The estimate uses samples_per_iter uniformly random positions in
/// the fixed image (seeded by cfg.rng_seed), a cubic B-spline Parzen window
/// along the moving-intensity axis and a linear window along the fixed axis.
/// Samples mapping outside the moving image (or outside `mask`, which lives
/// on the moving image) are discarded; fewer than 64 survivors return 0.
double mattes_mi(const Frame& fixed, const Frame& moving, const AffineTransform2D& t,
                 const MIConfig& cfg, const BrainMask* mask = nullptr);

/// Multi-resolution affine registration maximizing Mattes MI with adaptive
/// stochastic gradient descent: finite-difference gradients on a fresh
/// sample set per iteration (common random numbers within each central
/// difference), step a/(A + t_k)^alpha with sign-agreement adaptation of
/// t_k, and best-transform tracking on a fixed held-out sample set per
/// level. The returned transform maps fixed coordinates to moving
/// coordinates. Throws Diverged if a parameter leaves the finite range.
RegistrationResult register_affine(const Frame& fixed, const Frame& moving, const MIConfig& cfg,
                                   const BrainMask* mask = nullptr);

/// Bilinear resampling of `image` at t-mapped coordinates; out-of-bounds
/// fill 1.0 (bright, so filled areas never read as contrast).
Frame warp(const Frame& image, const AffineTransform2D& t);

/// Nearest-neighbor warps for label and mask fields; out-of-bounds pixels
/// become NonPerfused / outside.
SegmentationMap warp_labels(const SegmentationMap& seg, const AffineTransform2D& t);
BrainMask warp_mask(const BrainMask& mask, const AffineTransform2D& t, int out_width,
                    int out_height);

/// Keeps only arterial and parenchymal frames, registers each to the middle
/// kept frame and returns the warped frames in their original order.
/// Throws NoUsableFrames when no frame survives the phase filter.
Acquisition motion_correct(const Acquisition& acq, const PhaseSequence& phases,
                           const MIConfig& cfg);

struct Atlas {
  Frame image;
  BrainMask mask;
};

/// Registers every atlas to `target` (atlas as moving image, its brain mask
/// as moving mask) and returns the index and result with maximal final MI;
/// ties resolve to the smallest index.
std::pair<size_t, RegistrationResult> select_atlas(const std::vector<Atlas>& atlases,
                                                   const Frame& target, const MIConfig& cfg);

}  // namespace reperfq
