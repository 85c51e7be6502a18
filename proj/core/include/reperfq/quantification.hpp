#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "reperfq/phase.hpp"
#include "reperfq/registration.hpp"
#include "reperfq/segmentation.hpp"
#include "reperfq/types.hpp"

namespace reperfq {
namespace quant {

struct QuantConfig {
  /// A recanalized vessel inside the former target territory evidences
  /// flow, so vessel pixels count as perfused by default; disable for the
  /// strict tissue-only reading.
  bool include_vessels_as_perfused = true;
  /// Below this TDT size the pre-EVT study shows no measurable occlusion.
  int64_t min_tdt_pixels = 500;

  void validate() const;
};

/// Everything score_view needs across the stages.
struct ScoreConfig {
  MIConfig mi;
  seg::FrangiConfig frangi;
  QuantConfig quant;
};

/// Target downstream territory: pixels inside the brain mask classified
/// NonPerfused in the (already warped) pre-EVT segmentation. Stored as a
/// 0/1 field aligned with the mask.
std::vector<uint8_t> compute_tdt(const SegmentationMap& pre_seg_in_post_space,
                                 const BrainMask& mask);

struct AutoTiciResult {
  double score = 0.0;
  int64_t tdt_pixels = 0;
  int64_t reperfused_pixels = 0;
  std::vector<uint8_t> tdt;         // 0/1 per pixel
  std::vector<uint8_t> reperfused;  // TDT intersected with post perfusion
};

/// The reperfusion ratio: |TDT intersect P_post| / |TDT|. Throws TdtTooSmall
/// when the territory is below cfg.min_tdt_pixels.
AutoTiciResult compute_autotici(const SegmentationMap& pre_in_post_space,
                                const SegmentationMap& post, const BrainMask& mask,
                                const QuantConfig& cfg);

/// Optional colormap sink for one scored view.
struct ViewArtifacts {
  Frame pre_minip;
  Frame post_minip;
  SegmentationMap pre_seg;   // in post space
  SegmentationMap post_seg;
  BrainMask mask;
  std::vector<uint8_t> tdt;
  std::vector<uint8_t> reperfused;
};

/// Runs the full per-view pipeline: phase classification, motion
/// correction, MINIP, segmentation, pre-to-post and atlas registration,
/// and the reperfusion ratio.
ViewScore score_view(const Acquisition& pre, const Acquisition& post,
                     const std::vector<Atlas>& atlases, const phase::PhaseModel& model,
                     const ScoreConfig& cfg, ViewArtifacts* artifacts = nullptr);

/// Scores every complete (pre, post) view pair and combines them by
/// unweighted mean. Acquisitions missing a counterpart are ignored; with no
/// complete pair the call fails with NoCompleteViewPair.
ScoreReport score_patient(const std::vector<Acquisition>& acquisitions,
                          const std::vector<Atlas>& atlases, const phase::PhaseModel& model,
                          const ScoreConfig& cfg);

}  // namespace quant
}  // namespace reperfq
