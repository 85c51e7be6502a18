#pragma once

#include <filesystem>
#include <vector>

#include "reperfq/types.hpp"

namespace reperfq {
namespace phantom {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct VesselSegment {
  std::vector<Point> points;  // polyline, pixel coordinates
  double width_px = 4.0;      // 3..8
};

/// Frame counts per phase, in contrast-passage order.
struct PhasePlan {
  int non_contrast = 2;
  int arterial = 3;
  int parenchymal = 4;
  int venous = 3;

  int total() const { return non_contrast + arterial + parenchymal + venous; }
};

/// Everything needed to render a pre/post pair with known ground truth.
struct PhantomSpec {
  int width = 256;
  int height = 256;
  int n_frames = 12;
  PhasePlan plan;
  std::vector<VesselSegment> vessels;  // empty = built-in tree
  std::vector<Point> territory;        // empty = built-in wedge polygon
  double reperfused_fraction = 1.0;
  double jitter_px = 2.0;
  double noise_sigma = 0.01;
  uint64_t rng_seed = 0;
  View view = View::AP;
  std::string patient_id = "phantom";

  void validate() const;
};

struct PhantomOutput {
  Acquisition pre;
  Acquisition post;
  std::vector<PhaseLabel> labels_pre;
  std::vector<PhaseLabel> labels_post;
  BrainMask mask;
  std::vector<uint8_t> territory;   // rendered TDT analogue, 0/1 per pixel
  std::vector<uint8_t> reperfused;  // the designed f-fraction of the territory
  Frame atlas;                      // clean fully-perfused MINIP lookalike
  double reperfused_fraction = 0.0;
};

/// Renders both stages with piecewise-linear time-intensity ramps, per-frame
/// translation jitter and additive Gaussian noise (clipped to [0,1]).
/// Deterministic for a fixed spec.
PhantomOutput generate(const PhantomSpec& spec);

/// JSON spec document (unknown keys rejected); the schema mirrors
/// PhantomSpec field for field.
PhantomSpec spec_from_json_file(const std::filesystem::path& path);

/// Writes manifests, frames, atlas, masks and ground truth under dir and
/// returns the paths of the two manifests (pre, post).
std::pair<std::filesystem::path, std::filesystem::path> write_phantom(
    const PhantomOutput& output, const std::filesystem::path& dir);

}  // namespace phantom
}  // namespace reperfq
