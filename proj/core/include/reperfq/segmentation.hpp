#pragma once

#include <optional>
#include <span>
#include <vector>

#include "reperfq/io.hpp"
#include "reperfq/types.hpp"

namespace reperfq {
namespace seg {

/// Multi-scale vesselness parameters. The filter runs on intensities
/// rescaled to 0-255 so structureness_gamma keeps its conventional meaning.
struct FrangiConfig {
  std::vector<double> sigmas = {2.0, 4.0, 6.0, 8.0, 10.0, 12.0};  // pixels
  double blobness = 0.5;
  double structureness_gamma = 15.0;  // on the 0-255 intensity scale
  double response_threshold = 0.08;

  void validate() const;
};

/// Eigenvalues of the scale-normalized Hessian, sorted |first| <= |second|.
struct HessianEigenvalues {
  int width = 0;
  int height = 0;
  std::vector<double> lambda1;  // smaller magnitude
  std::vector<double> lambda2;  // larger magnitude
};

/// Gaussian-derivative Hessian at one scale on a 0-255 intensity field,
/// gamma-normalized by sigma^2. Kernels truncate at 4*sigma; boundaries
/// reflect.
HessianEigenvalues hessian_at_scale(const Frame& image_0_255, double sigma);

/// Dark-on-bright Frangi response in [0,1]: zero where lambda2 <= 0, else
/// exp(-R_B^2 / 2 blobness^2) * (1 - exp(-S^2 / 2 gamma^2)) maximized over
/// scales. Input intensities are the pipeline's [0,1]; the 0-255 conversion
/// happens inside.
Frame frangi_vesselness(const Frame& image, const FrangiConfig& cfg);

/// Histogram-based Otsu: returns the bin-edge threshold maximizing the
/// between-class variance, ties to the smallest edge. A single occupied bin
/// (no informative split) returns the minimum input value.
double otsu_threshold(std::span<const double> values, int bins = 256);

/// Vessel pixels from the vesselness threshold; Otsu over the remaining
/// intensities (background included) splits Perfused (strictly below) from
/// NonPerfused.
SegmentationMap segment_minip(const Frame& minip, const FrangiConfig& cfg);

/// Optional quantification overlays for the colormap.
struct Overlay {
  const BrainMask* mask = nullptr;            // outline drawn in dark red
  const std::vector<uint8_t>* tdt = nullptr;  // white
  const std::vector<uint8_t>* reperfused = nullptr;  // orange, on top
};

/// Fixed palette: vessel (220,40,40), perfused (40,180,70), non-perfused
/// (50,80,200), TDT (255,255,255), reperfused (255,150,40), mask outline
/// (180,0,0).
RgbImage render_colormap(const SegmentationMap& seg, const Overlay& overlay = {});

}  // namespace seg
}  // namespace reperfq
