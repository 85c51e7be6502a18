#include "reperfq/quantification.hpp"

#include <algorithm>
#include <cmath>

#include "reperfq/parallel.hpp"
#include "reperfq/projection.hpp"

namespace reperfq {
namespace quant {

void QuantConfig::validate() const {
  require(min_tdt_pixels >= 1, ErrorCode::InvalidConfig, "min_tdt_pixels must be >= 1");
}

std::vector<uint8_t> compute_tdt(const SegmentationMap& pre_seg_in_post_space,
                                 const BrainMask& mask) {
  require(pre_seg_in_post_space.width == mask.width &&
              pre_seg_in_post_space.height == mask.height,
          ErrorCode::DimensionMismatch, "segmentation and mask dimensions differ");
  std::vector<uint8_t> tdt(mask.inside.size(), 0);
  for (size_t i = 0; i < tdt.size(); ++i) {
    tdt[i] = mask.inside[i] && pre_seg_in_post_space.classes[i] == PixelClass::NonPerfused;
  }
  return tdt;
}

AutoTiciResult compute_autotici(const SegmentationMap& pre_in_post_space,
                                const SegmentationMap& post, const BrainMask& mask,
                                const QuantConfig& cfg) {
  cfg.validate();
  require(post.width == pre_in_post_space.width && post.height == pre_in_post_space.height,
          ErrorCode::DimensionMismatch, "pre and post segmentations have different dimensions");

  AutoTiciResult result;
  result.tdt = compute_tdt(pre_in_post_space, mask);
  result.reperfused.assign(result.tdt.size(), 0);
  for (size_t i = 0; i < result.tdt.size(); ++i) {
    if (!result.tdt[i]) continue;
    ++result.tdt_pixels;
    const PixelClass c = post.classes[i];
    const bool perfused =
        c == PixelClass::Perfused || (cfg.include_vessels_as_perfused && c == PixelClass::Vessel);
    if (perfused) {
      result.reperfused[i] = 1;
      ++result.reperfused_pixels;
    }
  }
  require(result.tdt_pixels >= cfg.min_tdt_pixels, ErrorCode::TdtTooSmall,
          "target territory of " + std::to_string(result.tdt_pixels) +
              " pixels is below the minimum of " + std::to_string(cfg.min_tdt_pixels));
  result.score = static_cast<double>(result.reperfused_pixels) / result.tdt_pixels;
  return result;
}

namespace {

struct StageOutput {
  Frame minip_image;
  PhaseBoundaries boundaries;
};

StageOutput process_stage(const Acquisition& acq, const phase::PhaseModel& model,
                          const ScoreConfig& cfg) {
  const PhaseSequence phases = phase::classify(model, acq);
  Acquisition corrected = motion_correct(acq, phases, cfg.mi);
  // Snap resampled frames to the 16-bit grid intermediates carry on disk, so
  // a run composed from the per-stage commands reproduces this pipeline bit
  // for bit.
  for (Frame& f : corrected.frames) {
    for (double& v : f.intensities) {
      v = std::lround(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0;
    }
  }
  StageOutput out;
  out.minip_image = minip(corrected.frames);
  out.boundaries = phase::phase_boundaries(phases.labels);
  return out;
}

}  // namespace

ViewScore score_view(const Acquisition& pre, const Acquisition& post,
                     const std::vector<Atlas>& atlases, const phase::PhaseModel& model,
                     const ScoreConfig& cfg, ViewArtifacts* artifacts) {
  require(pre.view == post.view, ErrorCode::InvalidConfig,
          "score_view needs both stages of the same view");
  require(!atlases.empty(), ErrorCode::EmptyAtlasSet, "atlas set is empty");

  StageOutput pre_out, post_out;
  // The two stages are independent until the cross-stage registration.
  parallel_for(2, [&](size_t i) {
    if (i == 0) {
      pre_out = process_stage(pre, model, cfg);
    } else {
      post_out = process_stage(post, model, cfg);
    }
  });

  const SegmentationMap pre_seg = seg::segment_minip(pre_out.minip_image, cfg.frangi);
  const SegmentationMap post_seg = seg::segment_minip(post_out.minip_image, cfg.frangi);

  // Fixed = post MINIP: TDT and perfusion are counted in post space.
  const RegistrationResult pre_to_post =
      register_affine(post_out.minip_image, pre_out.minip_image, cfg.mi);
  const SegmentationMap pre_seg_in_post = warp_labels(pre_seg, pre_to_post.transform);

  const auto [atlas_index, atlas_reg] = select_atlas(atlases, post_out.minip_image, cfg.mi);
  const BrainMask mask = warp_mask(atlases[atlas_index].mask, atlas_reg.transform,
                                   post_out.minip_image.width, post_out.minip_image.height);
  require(mask.count_inside() * 100 >= mask.inside.size(), ErrorCode::EmptyMask,
          "registered atlas mask covers less than 1% of the image");

  const AutoTiciResult tici = compute_autotici(pre_seg_in_post, post_seg, mask, cfg.quant);

  ViewScore score;
  score.view = pre.view;
  score.auto_tici = tici.score;
  score.tdt_pre_pixels = tici.tdt_pixels;
  score.reperfused_pixels = tici.reperfused_pixels;
  score.boundaries_pre = pre_out.boundaries;
  score.boundaries_post = post_out.boundaries;
  score.registration_mi = pre_to_post.final_mi;
  score.atlas_mi = atlas_reg.final_mi;
  score.atlas_index = static_cast<int>(atlas_index);

  if (artifacts) {
    artifacts->pre_minip = pre_out.minip_image;
    artifacts->post_minip = post_out.minip_image;
    artifacts->pre_seg = pre_seg_in_post;
    artifacts->post_seg = post_seg;
    artifacts->mask = mask;
    artifacts->tdt = tici.tdt;
    artifacts->reperfused = tici.reperfused;
  }
  return score;
}

ScoreReport score_patient(const std::vector<Acquisition>& acquisitions,
                          const std::vector<Atlas>& atlases, const phase::PhaseModel& model,
                          const ScoreConfig& cfg) {
  const Acquisition* slots[2][2] = {{nullptr, nullptr}, {nullptr, nullptr}};
  std::string patient_id;
  for (const Acquisition& acq : acquisitions) {
    slots[acq.view == View::Lateral][acq.stage == Stage::PostEVT] = &acq;
    if (patient_id.empty()) patient_id = acq.patient_id;
  }

  std::vector<std::pair<const Acquisition*, const Acquisition*>> pairs;
  for (int v = 0; v < 2; ++v) {
    if (slots[v][0] && slots[v][1]) pairs.emplace_back(slots[v][0], slots[v][1]);
  }
  require(!pairs.empty(), ErrorCode::NoCompleteViewPair,
          "no view has both a pre-EVT and a post-EVT acquisition");

  ScoreReport report;
  report.patient_id = patient_id;
  double sum = 0.0;
  for (const auto& [pre, post] : pairs) {
    const ViewScore vs = score_view(*pre, *post, atlases, model, cfg);
    sum += vs.auto_tici;
    report.per_view.push_back(vs);
  }
  report.combined_auto_tici = sum / static_cast<double>(report.per_view.size());
  return report;
}

}  // namespace quant
}  // namespace reperfq
