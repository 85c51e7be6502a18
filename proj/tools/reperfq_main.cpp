// reperfq: quantitative brain reperfusion scoring from pre/post-treatment
// DSA sequences. Subcommands cover the full pipeline plus the synthetic
// corpus generator, training and evaluation harnesses.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "reperfq/config.hpp"
#include "reperfq/io.hpp"
#include "reperfq/metrics.hpp"
#include "reperfq/phantom.hpp"
#include "reperfq/phase.hpp"
#include "reperfq/projection.hpp"
#include "reperfq/quantification.hpp"
#include "reperfq/registration.hpp"
#include "reperfq/segmentation.hpp"
#include "reperfq/types.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reperfq;

namespace {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return 2;
    case ErrorKind::Pipeline: return 3;
    case ErrorKind::Io: return 4;
  }
  return 1;
}

PhaseSequence sequence_from_labels(std::vector<PhaseLabel> labels) {
  PhaseSequence seq;
  seq.labels = std::move(labels);
  return seq;
}

/// Keeps only arterial and parenchymal frames (the projection input set).
std::vector<Frame> kept_frames(const Acquisition& acq, const std::vector<PhaseLabel>& labels) {
  require(labels.size() == acq.frames.size(), ErrorCode::LabelLengthMismatch,
          "labels do not match the acquisition frame count");
  std::vector<Frame> kept;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == PhaseLabel::Arterial || labels[i] == PhaseLabel::Parenchymal) {
      kept.push_back(acq.frames[i]);
    }
  }
  require(!kept.empty(), ErrorCode::NoUsableFrames, "no arterial or parenchymal frames");
  return kept;
}

struct ScoreInputs {
  std::vector<Acquisition> acquisitions;
  std::vector<Atlas> atlases;
  phase::PhaseModel model;
  PipelineConfig cfg;
};

ScoreReport run_score(const ScoreInputs& in, const fs::path* colormap_dir) {
  ScoreReport report;
  const quant::ScoreConfig& cfg = in.cfg.score;

  const Acquisition* slots[2][2] = {{nullptr, nullptr}, {nullptr, nullptr}};
  for (const Acquisition& acq : in.acquisitions) {
    slots[acq.view == View::Lateral][acq.stage == Stage::PostEVT] = &acq;
    if (report.patient_id.empty()) report.patient_id = acq.patient_id;
  }
  double sum = 0.0;
  int pairs = 0;
  for (int v = 0; v < 2; ++v) {
    if (!slots[v][0] || !slots[v][1]) continue;
    quant::ViewArtifacts artifacts;
    const ViewScore vs =
        quant::score_view(*slots[v][0], *slots[v][1], in.atlases, in.model, cfg,
                          colormap_dir ? &artifacts : nullptr);
    report.per_view.push_back(vs);
    sum += vs.auto_tici;
    ++pairs;
    if (colormap_dir) {
      const std::string view = std::string(to_string(vs.view));
      seg::Overlay overlay;
      overlay.mask = &artifacts.mask;
      overlay.tdt = &artifacts.tdt;
      overlay.reperfused = &artifacts.reperfused;
      save_rgb(seg::render_colormap(artifacts.pre_seg, {.mask = &artifacts.mask}),
               *colormap_dir / (view + "_pre.png"));
      save_rgb(seg::render_colormap(artifacts.post_seg, overlay),
               *colormap_dir / (view + "_post.png"));
    }
  }
  require(pairs > 0, ErrorCode::NoCompleteViewPair,
          "no view has both a pre-EVT and a post-EVT acquisition");
  report.combined_auto_tici = sum / pairs;
  report.seed = in.cfg.seed;
  return report;
}

int cmd_phases(const fs::path& manifest, const std::string& model_path, const std::string& out) {
  const Acquisition acq = load_acquisition(manifest);
  validate_acquisition(acq);
  phase::PhaseModel model;
  if (!model_path.empty()) model = phase::load_model(model_path);
  const PhaseSequence seq = phase::classify(model, acq);
  if (out.empty()) {
    json j = json::array();
    for (PhaseLabel l : seq.labels) j.push_back(static_cast<int>(l));
    std::cout << j.dump() << "\n";
  } else {
    save_labels(seq.labels, out);
  }
  return 0;
}

int cmd_motion(const fs::path& manifest, const fs::path& labels_path, const fs::path& out_dir,
               const PipelineConfig& cfg) {
  const Acquisition acq = load_acquisition(manifest);
  validate_acquisition(acq);
  const PhaseSequence seq = sequence_from_labels(load_labels(labels_path));
  Acquisition corrected = motion_correct(acq, seq, cfg.score.mi);
  fs::create_directories(out_dir);
  // 16-bit frames so a later minip over the files reproduces the in-memory
  // pipeline exactly.
  save_acquisition(corrected, out_dir, "motion", 65535);
  return 0;
}

int cmd_minip(const fs::path& manifest, const std::string& labels_path, const fs::path& out) {
  const Acquisition acq = load_acquisition(manifest);
  std::vector<Frame> frames;
  if (!labels_path.empty()) {
    frames = kept_frames(acq, load_labels(labels_path));
  } else {
    frames = acq.frames;
  }
  save_image(minip(frames), out, 65535);
  return 0;
}

int cmd_segment(const fs::path& image_path, const std::string& out_map,
                const std::string& out_json, const PipelineConfig& cfg) {
  const Frame image = load_image(image_path);
  const SegmentationMap seg_map = seg::segment_minip(image, cfg.score.frangi);
  if (!out_map.empty()) save_rgb(seg::render_colormap(seg_map), out_map);
  if (!out_json.empty()) {
    int64_t counts[3] = {0, 0, 0};
    for (PixelClass c : seg_map.classes) ++counts[static_cast<int>(c)];
    json j;
    j["vessel"] = counts[0];
    j["perfused"] = counts[1];
    j["non_perfused"] = counts[2];
    write_file_atomic(out_json, j.dump(2) + "\n");
  }
  return 0;
}

int cmd_synth(const fs::path& spec_path, const fs::path& out_dir) {
  const phantom::PhantomSpec spec = phantom::spec_from_json_file(spec_path);
  const phantom::PhantomOutput output = phantom::generate(spec);
  phantom::write_phantom(output, out_dir);
  return 0;
}

int cmd_train(const fs::path& corpus_dir, const fs::path& out, uint64_t seed, int augment_copies) {
  require(fs::is_directory(corpus_dir), ErrorCode::MissingFile,
          "corpus directory does not exist: " + corpus_dir.string());
  std::vector<fs::path> manifests;
  for (const auto& entry : fs::recursive_directory_iterator(corpus_dir)) {
    if (entry.is_regular_file() && entry.path().string().ends_with(".manifest.json")) {
      manifests.push_back(entry.path());
    }
  }
  std::sort(manifests.begin(), manifests.end());
  std::vector<phase::TrainingSample> dataset;
  for (const fs::path& path : manifests) {
    const AcquisitionManifest m = load_manifest(path);
    if (!m.reference_labels) continue;
    phase::TrainingSample sample;
    sample.acquisition = load_acquisition(path);
    for (int code : *m.reference_labels) sample.labels.push_back(static_cast<PhaseLabel>(code));
    dataset.push_back(std::move(sample));
  }
  phase::TrainConfig config;
  config.augment_copies = augment_copies;
  const phase::PhaseModel model = phase::train(config, dataset, seed);
  phase::save_model(model, out);
  return 0;
}

std::vector<std::vector<PhaseLabel>> load_label_sets(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded() && j.is_array(), ErrorCode::ParseError,
          path.string() + ": expected a JSON array");
  std::vector<std::vector<PhaseLabel>> sets;
  auto parse_one = [&](const json& arr) {
    std::vector<PhaseLabel> labels;
    for (const json& v : arr) {
      require(v.is_number_integer(), ErrorCode::ParseError, "labels must be integers");
      const int code = v.get<int>();
      require(code >= 0 && code < kPhaseCount, ErrorCode::ParseError, "label code out of range");
      labels.push_back(static_cast<PhaseLabel>(code));
    }
    sets.push_back(std::move(labels));
  };
  if (!j.empty() && j.front().is_array()) {
    for (const json& arr : j) parse_one(arr);
  } else {
    parse_one(j);
  }
  return sets;
}

json boundary_stats_json(const metrics::BoundaryStats& s) {
  json j;
  j["exact_accuracy"] = s.exact_accuracy;
  j["mean_offset_frames"] = s.mean_offset_frames;
  j["std_offset_frames"] = s.std_offset_frames;
  if (s.mean_offset_seconds) j["mean_offset_seconds"] = *s.mean_offset_seconds;
  if (s.std_offset_seconds) j["std_offset_seconds"] = *s.std_offset_seconds;
  j["fraction_over_one_frame"] = s.fraction_over_one_frame;
  j["absence_mismatches"] = s.absence_mismatches;
  j["compared_pairs"] = s.compared_pairs;
  return j;
}

int cmd_eval_labels(const fs::path& pred_path, const fs::path& ref_path, const std::string& out) {
  const auto pred_sets = load_label_sets(pred_path);
  const auto ref_sets = load_label_sets(ref_path);
  require(pred_sets.size() == ref_sets.size(), ErrorCode::LengthMismatch,
          "prediction and reference corpora differ in sequence count");

  std::vector<PhaseLabel> pred_flat, ref_flat;
  std::vector<PhaseBoundaries> pred_bounds, ref_bounds;
  for (size_t i = 0; i < pred_sets.size(); ++i) {
    require(pred_sets[i].size() == ref_sets[i].size(), ErrorCode::LengthMismatch,
            "sequence " + std::to_string(i) + " length mismatch");
    pred_flat.insert(pred_flat.end(), pred_sets[i].begin(), pred_sets[i].end());
    ref_flat.insert(ref_flat.end(), ref_sets[i].begin(), ref_sets[i].end());
    pred_bounds.push_back(phase::phase_boundaries(pred_sets[i]));
    ref_bounds.push_back(phase::phase_boundaries(ref_sets[i]));
  }

  json j;
  j["average_accuracy"] = metrics::average_accuracy(pred_flat, ref_flat);
  j["weighted_f1"] = metrics::weighted_f1(pred_flat, ref_flat);
  const metrics::OffsetStats offsets = metrics::boundary_offsets(pred_bounds, ref_bounds);
  j["first_arterial"] = boundary_stats_json(offsets.first_arterial);
  j["last_arterial"] = boundary_stats_json(offsets.last_arterial);
  j["last_parenchymal"] = boundary_stats_json(offsets.last_parenchymal);

  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
  return 0;
}

std::vector<metrics::OutcomeRecord> load_outcomes_csv(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::ParseError,
          path.string() + ": empty CSV");
  auto split = [](const std::string& s) {
    std::vector<std::string> fields;
    std::string field;
    for (char c : s) {
      if (c == ',') {
        fields.push_back(field);
        field.clear();
      } else if (c != '\r') {
        field.push_back(c);
      }
    }
    fields.push_back(field);
    return fields;
  };
  const std::vector<std::string> header = split(line);
  const std::vector<std::string> expected = {"patient_id", "auto_tici_ap", "auto_tici_lat",
                                             "etici",      "mrs",          "nihss_bl",
                                             "nihss_fu"};
  require(header == expected, ErrorCode::ParseError,
          path.string() + ": header must be patient_id,auto_tici_ap,auto_tici_lat,etici,mrs,"
                          "nihss_bl,nihss_fu");
  std::vector<metrics::OutcomeRecord> records;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    require(fields.size() == expected.size(), ErrorCode::ParseError,
            path.string() + ": wrong column count on line " + std::to_string(line_no));
    try {
      metrics::OutcomeRecord r;
      r.patient_id = fields[0];
      r.auto_tici_ap = std::stod(fields[1]);
      r.auto_tici_lat = std::stod(fields[2]);
      r.etici = fields[3];
      metrics::etici_rank(r.etici);  // validates the grade
      r.mrs = std::stoi(fields[4]);
      require(r.mrs >= 0 && r.mrs <= 6, ErrorCode::ParseError, "mRS out of range");
      r.nihss_bl = std::stoi(fields[5]);
      r.nihss_fu = std::stoi(fields[6]);
      records.push_back(std::move(r));
    } catch (const std::invalid_argument&) {
      fail(ErrorCode::ParseError,
           path.string() + ": malformed number on line " + std::to_string(line_no));
    }
  }
  return records;
}

int cmd_eval_outcomes(const fs::path& csv_path, const std::string& out, uint64_t seed) {
  const auto records = load_outcomes_csv(csv_path);
  require(records.size() >= 3, ErrorCode::LengthMismatch,
          "need at least 3 outcome records");

  std::vector<double> combined, etici_ranks, nihss_shifts, nihss_fu;
  std::vector<int> etici_success, mrs_favorable;
  std::vector<std::vector<double>> tici_features;
  for (const auto& r : records) {
    combined.push_back(0.5 * (r.auto_tici_ap + r.auto_tici_lat));
    const int rank = metrics::etici_rank(r.etici);
    etici_ranks.push_back(rank);
    etici_success.push_back(rank >= 3 ? 1 : 0);  // 2B or better
    mrs_favorable.push_back(r.mrs <= 2 ? 1 : 0);
    nihss_shifts.push_back(metrics::nihss_shift(r.nihss_bl, r.nihss_fu));
    nihss_fu.push_back(r.nihss_fu);
    tici_features.push_back({r.auto_tici_ap, r.auto_tici_lat});
  }

  json j;
  const auto sp_etici = metrics::spearman(combined, etici_ranks, 10000, seed);
  j["spearman_etici"] = {{"rho", sp_etici.rho}, {"p_value", sp_etici.p_value}};
  const auto sp_shift = metrics::spearman(combined, nihss_shifts, 10000, seed);
  j["spearman_nihss_shift"] = {{"rho", sp_shift.rho}, {"p_value", sp_shift.p_value}};
  const auto sp_fu = metrics::spearman(combined, nihss_fu, 10000, seed);
  j["spearman_nihss_fu"] = {{"rho", sp_fu.rho}, {"p_value", sp_fu.p_value}};

  j["auc_dichotomized_etici"] = metrics::roc_auc(combined, etici_success);
  const auto lr_etici = metrics::logistic_loocv(tici_features, etici_success);
  j["logistic_dichotomized_etici"] = {{"auc", lr_etici.auc},
                                      {"accuracy", lr_etici.accuracy},
                                      {"odds_ratios", lr_etici.odds_ratios}};
  const auto lr_mrs = metrics::logistic_loocv(tici_features, mrs_favorable);
  j["logistic_mrs_favorable"] = {{"auc", lr_mrs.auc},
                                 {"accuracy", lr_mrs.accuracy},
                                 {"odds_ratios", lr_mrs.odds_ratios}};
  j["seed"] = seed;

  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantitative brain reperfusion scoring on DSA sequences"};
  app.require_subcommand(1);

  std::string config_path, model_path, atlas_dir, labels_path, out_path, out_dir, out_map,
      out_json, pred_labels, ref_labels, outcomes_csv;
  std::string manifest, spec_path, image_path;
  std::string pre_ap, post_ap, pre_lat, post_lat, colormap_dir;
  uint64_t seed = 0;
  bool seed_given = false;
  int augment_copies = 0;

  auto* phases = app.add_subcommand("phases", "Predict and decode phase labels");
  phases->add_option("manifest", manifest)->required();
  phases->add_option("--model", model_path);
  phases->add_option("--out", out_path);

  auto* motion = app.add_subcommand("motion", "Motion-correct arterial/parenchymal frames");
  motion->add_option("manifest", manifest)->required();
  motion->add_option("--labels", labels_path)->required();
  motion->add_option("--out-dir", out_dir)->required();
  motion->add_option("--config", config_path);
  motion->add_option("--seed", seed);

  auto* minip_cmd = app.add_subcommand("minip", "Minimum-intensity projection");
  minip_cmd->add_option("manifest", manifest)->required();
  minip_cmd->add_option("--labels", labels_path);
  minip_cmd->add_option("--out", out_path)->required();

  auto* segment = app.add_subcommand("segment", "Segment a MINIP image");
  segment->add_option("minip", image_path)->required();
  segment->add_option("--out-map", out_map);
  segment->add_option("--out-json", out_json);
  segment->add_option("--config", config_path);

  auto* score = app.add_subcommand("score", "Full reperfusion scoring pipeline");
  score->add_option("--pre-ap", pre_ap);
  score->add_option("--post-ap", post_ap);
  score->add_option("--pre-lat", pre_lat);
  score->add_option("--post-lat", post_lat);
  score->add_option("--atlas-dir", atlas_dir);
  score->add_option("--model", model_path);
  score->add_option("--config", config_path);
  score->add_option("--out", out_path)->required();
  score->add_option("--emit-colormaps", colormap_dir);
  score->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });

  auto* synth = app.add_subcommand("synth", "Generate a phantom patient");
  synth->add_option("spec", spec_path)->required();
  synth->add_option("--out-dir", out_dir)->required();

  std::string corpus_dir;
  auto* train = app.add_subcommand("train", "Train the phase classifier");
  train->add_option("--corpus-dir", corpus_dir)->required();
  train->add_option("--out", out_path)->required();
  train->add_option("--seed", seed);
  train->add_option("--augment-copies", augment_copies);

  auto* eval = app.add_subcommand("eval", "Evaluation metrics");
  eval->add_option("--pred-labels", pred_labels);
  eval->add_option("--ref-labels", ref_labels);
  eval->add_option("--outcomes", outcomes_csv);
  eval->add_option("--out", out_path);
  eval->add_option("--seed", seed);

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_pipeline_config(config_path);
    if (seed_given) cfg.seed = seed;
    // The registration seed follows the top-level seed unless the config
    // file pinned one explicitly.
    if (cfg.score.mi.rng_seed == 0) cfg.score.mi.rng_seed = cfg.seed;

    if (phases->parsed()) return cmd_phases(manifest, model_path, out_path);
    if (motion->parsed()) return cmd_motion(manifest, labels_path, out_dir, cfg);
    if (minip_cmd->parsed()) return cmd_minip(manifest, labels_path, out_path);
    if (segment->parsed()) return cmd_segment(image_path, out_map, out_json, cfg);
    if (synth->parsed()) return cmd_synth(spec_path, out_dir);
    if (train->parsed()) return cmd_train(corpus_dir, out_path, seed, augment_copies);
    if (eval->parsed()) {
      if (!outcomes_csv.empty()) return cmd_eval_outcomes(outcomes_csv, out_path, seed);
      require(!pred_labels.empty() && !ref_labels.empty(), ErrorCode::InvalidConfig,
              "eval needs either --outcomes or both --pred-labels and --ref-labels");
      return cmd_eval_labels(pred_labels, ref_labels, out_path);
    }
    if (score->parsed()) {
      ScoreInputs inputs;
      inputs.cfg = cfg;
      if (!model_path.empty()) {
        inputs.model = phase::load_model(model_path);
      } else if (cfg.model_path) {
        inputs.model = phase::load_model(*cfg.model_path);
      }
      const std::string atlases = !atlas_dir.empty() ? atlas_dir : cfg.atlas_dir.value_or("");
      require(!atlases.empty(), ErrorCode::InvalidConfig,
              "score needs --atlas-dir or an atlas_dir config entry");
      inputs.atlases = load_atlas_dir(atlases);
      for (const std::string& m : {pre_ap, post_ap, pre_lat, post_lat}) {
        if (m.empty()) continue;
        Acquisition acq = load_acquisition(m);
        validate_acquisition(acq);
        inputs.acquisitions.push_back(std::move(acq));
      }
      std::optional<fs::path> cmap;
      if (!colormap_dir.empty()) {
        cmap = colormap_dir;
        fs::create_directories(*cmap);
      }
      const ScoreReport report = run_score(inputs, cmap ? &*cmap : nullptr);
      save_report(report, out_path);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
