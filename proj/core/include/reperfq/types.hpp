#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reperfq/error.hpp"

namespace reperfq {

/// One grayscale frame. Intensities live in [0,1] with 0 = dark (contrast)
/// and 1 = bright background; that convention is fixed at load time and
/// every downstream stage relies on it.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<double> intensities;  // row-major, width*height
  std::optional<double> time_s;     // acquisition time, often missing

  Frame() = default;
  Frame(int w, int h, double fill = 0.0)
      : width(w), height(h), intensities(static_cast<size_t>(w) * h, fill) {}

  double& at(int x, int y) { return intensities[static_cast<size_t>(y) * width + x]; }
  double at(int x, int y) const { return intensities[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return intensities.size(); }
  bool same_shape(const Frame& other) const {
    return width == other.width && height == other.height;
  }
};

enum class View { AP, Lateral };
enum class Stage { PreEVT, PostEVT };

std::string_view to_string(View v);
std::string_view to_string(Stage s);
View view_from_string(std::string_view s);
Stage stage_from_string(std::string_view s);

/// An ordered, timed DSA run for one view and one treatment stage.
struct Acquisition {
  std::vector<Frame> frames;
  View view = View::AP;
  Stage stage = Stage::PreEVT;
  std::string patient_id;

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  size_t frame_count() const { return frames.size(); }
};

/// Contrast-passage phases with fixed integer codes.
enum class PhaseLabel : int {
  NonContrast = 0,
  Arterial = 1,
  Parenchymal = 2,
  Venous = 3,
};

inline constexpr int kPhaseCount = 4;

/// Per-frame class probabilities over the four phases.
using PhaseProbabilities = std::array<double, kPhaseCount>;

/// Decoded phase labels plus the probabilities they were decoded from.
struct PhaseSequence {
  std::vector<PhaseProbabilities> probabilities;
  std::vector<PhaseLabel> labels;
};

/// Planar affine map p' = A*(p - c) + c + t, used both as the resampling map
/// (output pixel -> input position) and as the registration result (fixed
/// coordinates -> moving coordinates).
struct AffineTransform2D {
  double a11 = 1.0, a12 = 0.0;
  double a21 = 0.0, a22 = 1.0;
  double tx = 0.0, ty = 0.0;
  double cx = 0.0, cy = 0.0;

  static AffineTransform2D identity(double cx = 0.0, double cy = 0.0) {
    AffineTransform2D t;
    t.cx = cx;
    t.cy = cy;
    return t;
  }

  static AffineTransform2D translation(double dx, double dy) {
    AffineTransform2D t;
    t.tx = dx;
    t.ty = dy;
    return t;
  }

  /// Rotation by `radians` about (cx, cy); positive angle turns +x toward +y.
  static AffineTransform2D rotation(double radians, double cx, double cy);

  void apply(double x, double y, double& ox, double& oy) const {
    const double dx = x - cx;
    const double dy = y - cy;
    ox = a11 * dx + a12 * dy + cx + tx;
    oy = a21 * dx + a22 * dy + cy + ty;
  }

  double det() const { return a11 * a22 - a12 * a21; }
  AffineTransform2D inverse() const;
  /// this(other(p)) for every p; both maps must share the same center.
  AffineTransform2D compose(const AffineTransform2D& other) const;
};

enum class PixelClass : uint8_t { Vessel = 0, Perfused = 1, NonPerfused = 2 };

/// Per-pixel segmentation of a MINIP into vessel / perfused / non-perfused.
struct SegmentationMap {
  int width = 0;
  int height = 0;
  std::vector<PixelClass> classes;

  SegmentationMap() = default;
  SegmentationMap(int w, int h, PixelClass fill = PixelClass::NonPerfused)
      : width(w), height(h), classes(static_cast<size_t>(w) * h, fill) {}

  PixelClass& at(int x, int y) { return classes[static_cast<size_t>(y) * width + x]; }
  PixelClass at(int x, int y) const { return classes[static_cast<size_t>(y) * width + x]; }
  size_t size() const { return classes.size(); }
};

/// Binary in-skull mask.
struct BrainMask {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> inside;  // 0/1

  BrainMask() = default;
  BrainMask(int w, int h, bool fill = false)
      : width(w), height(h), inside(static_cast<size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return inside[static_cast<size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { inside[static_cast<size_t>(y) * width + x] = v ? 1 : 0; }
  size_t count_inside() const;
};

/// Frame indices of the phase borders used in reporting; a missing phase
/// leaves its boundary absent.
struct PhaseBoundaries {
  std::optional<int> first_arterial;
  std::optional<int> last_arterial;
  std::optional<int> last_parenchymal;

  bool operator==(const PhaseBoundaries&) const = default;
};

/// One scored pre/post pair for a single view.
struct ViewScore {
  View view = View::AP;
  double auto_tici = 0.0;
  int64_t tdt_pre_pixels = 0;
  int64_t reperfused_pixels = 0;
  PhaseBoundaries boundaries_pre;
  PhaseBoundaries boundaries_post;
  double registration_mi = 0.0;  // final MI of the pre->post MINIP registration
  double atlas_mi = 0.0;         // MI of the selected atlas registration
  int atlas_index = -1;
};

/// Full per-patient result; combined score is the mean of available views.
struct ScoreReport {
  std::string patient_id;
  std::vector<ViewScore> per_view;
  double combined_auto_tici = 0.0;
  std::optional<uint64_t> seed;  // echoed into the JSON report for provenance
};

/// Checks every Acquisition invariant and returns the input unchanged.
/// Idempotent by construction. Throws Error on the first violated invariant:
/// TooShort (< 6 frames), DimensionMismatch, NonMonotonicTimes,
/// OutOfRangeIntensity (non-finite or outside [0,1], or width/height < 8).
const Acquisition& validate_acquisition(const Acquisition& acq);

}  // namespace reperfq
