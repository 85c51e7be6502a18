#include "reperfq/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "reperfq/io.hpp"
#include "reperfq/registration.hpp"

namespace reperfq {
namespace phantom {

namespace {

using nlohmann::json;

double point_segment_distance(double px, double py, const Point& a, const Point& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len_sq = dx * dx + dy * dy;
  double t = len_sq > 0.0 ? ((px - a.x) * dx + (py - a.y) * dy) / len_sq : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double cx = a.x + t * dx;
  const double cy = a.y + t * dy;
  return std::hypot(px - cx, py - cy);
}

bool point_in_polygon(double px, double py, const std::vector<Point>& poly) {
  bool inside = false;
  for (size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point& a = poly[i];
    const Point& b = poly[j];
    if ((a.y > py) != (b.y > py)) {
      const double x_cross = a.x + (py - a.y) / (b.y - a.y) * (b.x - a.x);
      if (px < x_cross) inside = !inside;
    }
  }
  return inside;
}

std::vector<VesselSegment> default_vessel_tree(int w, int h) {
  auto p = [&](double nx, double ny) { return Point{nx * w, ny * h}; };
  std::vector<VesselSegment> tree;
  // Main trunk rising from the skull base, then branches sweeping the right
  // hemisphere and the lower left; the upper-left wedge (the default
  // territory) stays clear of distal vessels, matching an occluded branch.
  tree.push_back({{p(0.50, 0.92), p(0.52, 0.70), p(0.50, 0.55)}, 8.0});
  tree.push_back({{p(0.50, 0.55), p(0.62, 0.42), p(0.72, 0.30), p(0.78, 0.22)}, 6.0});
  tree.push_back({{p(0.50, 0.55), p(0.64, 0.58), p(0.78, 0.52)}, 5.0});
  tree.push_back({{p(0.50, 0.55), p(0.58, 0.72), p(0.70, 0.78)}, 5.0});
  tree.push_back({{p(0.50, 0.55), p(0.40, 0.70), p(0.28, 0.76)}, 5.0});
  tree.push_back({{p(0.62, 0.42), p(0.58, 0.30), p(0.55, 0.20)}, 4.0});
  tree.push_back({{p(0.72, 0.30), p(0.64, 0.18)}, 3.0});
  tree.push_back({{p(0.40, 0.70), p(0.30, 0.60)}, 3.0});
  tree.push_back({{p(0.50, 0.55), p(0.44, 0.44)}, 4.0});  // occluded stub
  return tree;
}

std::vector<Point> default_territory(int w, int h) {
  auto p = [&](double nx, double ny) { return Point{nx * w, ny * h}; };
  // Wedge in the upper-left hemisphere, the downstream bed of the stub.
  return {p(0.44, 0.40), p(0.34, 0.22), p(0.18, 0.28), p(0.14, 0.46), p(0.30, 0.52)};
}

struct Geometry {
  BrainMask brain;
  std::vector<uint8_t> vessel;     // 0/1
  std::vector<uint8_t> territory;  // inside brain
  std::vector<uint8_t> sinus;
  std::vector<uint8_t> reperfused;  // leading f-fraction of the territory
};

Geometry build_geometry(const PhantomSpec& spec) {
  const int w = spec.width;
  const int h = spec.height;
  const double cx = (w - 1) / 2.0;
  const double cy = (h - 1) / 2.0;
  const double rx = 0.40 * w;
  const double ry = 0.44 * h;

  Geometry geo;
  geo.brain = BrainMask(w, h);
  geo.vessel.assign(static_cast<size_t>(w) * h, 0);
  geo.territory.assign(static_cast<size_t>(w) * h, 0);
  geo.sinus.assign(static_cast<size_t>(w) * h, 0);
  geo.reperfused.assign(static_cast<size_t>(w) * h, 0);

  const auto vessels = spec.vessels.empty() ? default_vessel_tree(w, h) : spec.vessels;
  const auto territory = spec.territory.empty() ? default_territory(w, h) : spec.territory;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      const double ex = (x - cx) / rx;
      const double ey = (y - cy) / ry;
      const bool in_brain = ex * ex + ey * ey <= 1.0;
      geo.brain.inside[i] = in_brain;
      if (!in_brain) continue;

      for (const VesselSegment& seg : vessels) {
        bool hit = false;
        for (size_t k = 0; k + 1 < seg.points.size() && !hit; ++k) {
          hit = point_segment_distance(x, y, seg.points[k], seg.points[k + 1]) <=
                seg.width_px / 2.0;
        }
        if (hit) {
          geo.vessel[i] = 1;
          break;
        }
      }
      if (point_in_polygon(x, y, territory)) geo.territory[i] = 1;

      if (spec.view == View::AP) {
        // Superior sagittal sinus: a midline strip in the upper brain.
        if (std::abs(x - cx) <= 0.03 * w && y <= cy - 0.08 * h) geo.sinus[i] = 1;
      } else {
        // Lateral projection: the sinus hugs the top of the skull.
        if (y <= cy - 0.78 * ry) geo.sinus[i] = 1;
      }
    }
  }

  // The reperfused part is the leading f-fraction of the territory in a
  // left-to-right column sweep, so its pixel count matches the requested
  // fraction to within one pixel.
  std::vector<size_t> territory_pixels;
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (geo.territory[i]) territory_pixels.push_back(i);
    }
  }
  const auto target =
      static_cast<size_t>(std::lround(spec.reperfused_fraction * territory_pixels.size()));
  for (size_t k = 0; k < target && k < territory_pixels.size(); ++k) {
    geo.reperfused[territory_pixels[k]] = 1;
  }
  return geo;
}

/// Per-frame darkening levels for one layer; index = position in its phase.
double ramp(const std::vector<double>& levels, int pos) {
  if (pos < 0) return 1.0;
  return levels[std::min<size_t>(pos, levels.size() - 1)];
}

struct LayerValues {
  double vessel = 1.0;
  double tissue = 1.0;
  double sinus = 1.0;
};

LayerValues layer_values(const PhasePlan& plan, int frame) {
  const int art_start = plan.non_contrast;
  const int par_start = art_start + plan.arterial;
  const int ven_start = par_start + plan.parenchymal;

  LayerValues v;
  if (frame >= ven_start) {
    const int pos = frame - ven_start;
    v.vessel = ramp({0.70, 0.88, 0.95}, pos);  // contrast clears the arteries
    v.tissue = ramp({0.85, 0.94, 0.97}, pos);
    v.sinus = ramp({0.35, 0.25, 0.25}, pos);
  } else if (frame >= par_start) {
    const int pos = frame - par_start;
    v.vessel = 0.20;
    v.tissue = ramp({0.62, 0.55, 0.55}, pos);  // parenchymal blush
  } else if (frame >= art_start) {
    const int pos = frame - art_start;
    v.vessel = ramp({0.40, 0.22, 0.20}, pos);  // sharp contrast arrival
  }
  return v;
}

Frame render_frame(const Geometry& geo, const LayerValues& values, const PhantomSpec& spec,
                   bool post_stage) {
  Frame f(spec.width, spec.height, 1.0);
  for (size_t i = 0; i < f.size(); ++i) {
    if (!geo.brain.inside[i]) continue;
    double v = 1.0;
    const bool perfused_here =
        !geo.territory[i] || (post_stage && geo.reperfused[i]);
    if (perfused_here) v = std::min(v, values.tissue);
    if (geo.vessel[i]) v = std::min(v, values.vessel);
    if (geo.sinus[i]) v = std::min(v, values.sinus);
    f.intensities[i] = v;
  }
  return f;
}

Acquisition render_stage(const Geometry& geo, const PhantomSpec& spec, bool post_stage,
                         std::mt19937& jitter_rng, std::mt19937& noise_rng) {
  Acquisition acq;
  acq.view = spec.view;
  acq.stage = post_stage ? Stage::PostEVT : Stage::PreEVT;
  acq.patient_id = spec.patient_id;
  std::uniform_real_distribution<double> jitter(-spec.jitter_px, spec.jitter_px);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  for (int i = 0; i < spec.n_frames; ++i) {
    Frame clean = render_frame(geo, layer_values(spec.plan, i), spec, post_stage);
    const double dx = spec.jitter_px > 0.0 ? jitter(jitter_rng) : 0.0;
    const double dy = spec.jitter_px > 0.0 ? jitter(jitter_rng) : 0.0;
    Frame frame = (dx != 0.0 || dy != 0.0)
                      ? warp(clean, AffineTransform2D::translation(dx, dy))
                      : std::move(clean);
    if (spec.noise_sigma > 0.0) {
      for (double& v : frame.intensities) v = std::clamp(v + noise(noise_rng), 0.0, 1.0);
    }
    frame.time_s = 0.5 * i;
    acq.frames.push_back(std::move(frame));
  }
  return acq;
}

std::vector<PhaseLabel> plan_labels(const PhasePlan& plan) {
  std::vector<PhaseLabel> labels;
  labels.insert(labels.end(), plan.non_contrast, PhaseLabel::NonContrast);
  labels.insert(labels.end(), plan.arterial, PhaseLabel::Arterial);
  labels.insert(labels.end(), plan.parenchymal, PhaseLabel::Parenchymal);
  labels.insert(labels.end(), plan.venous, PhaseLabel::Venous);
  return labels;
}

}  // namespace

void PhantomSpec::validate() const {
  require(width >= 32 && height >= 32, ErrorCode::InvalidSpec,
          "phantom must be at least 32x32");
  require(plan.non_contrast >= 0 && plan.arterial >= 1 && plan.parenchymal >= 1 &&
              plan.venous >= 0,
          ErrorCode::InvalidSpec, "phase plan needs arterial and parenchymal frames");
  require(plan.total() == n_frames, ErrorCode::InvalidSpec,
          "phase plan counts must sum to n_frames");
  require(n_frames >= 6, ErrorCode::InvalidSpec, "phantom sequences need at least 6 frames");
  require(reperfused_fraction >= 0.0 && reperfused_fraction <= 1.0, ErrorCode::InvalidSpec,
          "reperfused_fraction must be in [0,1]");
  require(jitter_px >= 0.0 && jitter_px <= 10.0, ErrorCode::InvalidSpec,
          "jitter must be in [0,10] pixels");
  require(noise_sigma >= 0.0, ErrorCode::InvalidSpec, "noise sigma must be non-negative");
  for (const VesselSegment& seg : vessels) {
    require(seg.points.size() >= 2, ErrorCode::InvalidSpec,
            "vessel polylines need at least two points");
    require(seg.width_px >= 3.0 && seg.width_px <= 8.0, ErrorCode::InvalidSpec,
            "vessel widths must be in [3,8] pixels");
  }
  require(territory.empty() || territory.size() >= 3, ErrorCode::InvalidSpec,
          "territory polygon needs at least three points");
}

PhantomOutput generate(const PhantomSpec& spec) {
  spec.validate();
  const Geometry geo = build_geometry(spec);

  // Independent substreams keep content identical when only jitter or noise
  // settings change.
  std::mt19937 jitter_pre(static_cast<uint32_t>(spec.rng_seed * 4 + 1));
  std::mt19937 noise_pre(static_cast<uint32_t>(spec.rng_seed * 4 + 2));
  std::mt19937 jitter_post(static_cast<uint32_t>(spec.rng_seed * 4 + 3));
  std::mt19937 noise_post(static_cast<uint32_t>(spec.rng_seed * 4 + 4));

  PhantomOutput out;
  out.pre = render_stage(geo, spec, false, jitter_pre, noise_pre);
  out.post = render_stage(geo, spec, true, jitter_post, noise_post);
  out.labels_pre = plan_labels(spec.plan);
  out.labels_post = out.labels_pre;
  out.mask = geo.brain;
  out.territory = geo.territory;
  out.reperfused = geo.reperfused;
  out.reperfused_fraction = spec.reperfused_fraction;

  // Healthy-brain atlas: every tissue pixel perfused, no occlusion, no noise.
  Geometry healthy = geo;
  std::fill(healthy.territory.begin(), healthy.territory.end(), 0);
  LayerValues atlas_values;
  atlas_values.vessel = 0.20;
  atlas_values.tissue = 0.55;
  atlas_values.sinus = 1.0;
  out.atlas = render_frame(healthy, atlas_values, spec, false);
  return out;
}

PhantomSpec spec_from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  require(!j.is_discarded(), ErrorCode::ParseError, "invalid JSON in " + path.string());
  require(j.is_object(), ErrorCode::ParseError, path.string() + ": spec must be a JSON object");

  static const std::vector<std::string> known = {
      "width",  "height",    "n_frames",  "phase_plan", "vessels",   "territory",
      "reperfused_fraction", "jitter_px", "noise_sigma", "seed",     "view",
      "patient_id"};
  for (const auto& [key, value] : j.items()) {
    require(std::find(known.begin(), known.end(), key) != known.end(), ErrorCode::ParseError,
            path.string() + ": unknown key '" + key + "'");
  }

  try {
    PhantomSpec spec;
    if (j.contains("width")) spec.width = j["width"].get<int>();
    if (j.contains("height")) spec.height = j["height"].get<int>();
    if (j.contains("phase_plan")) {
      const json& p = j["phase_plan"];
      spec.plan.non_contrast = p.at("non_contrast").get<int>();
      spec.plan.arterial = p.at("arterial").get<int>();
      spec.plan.parenchymal = p.at("parenchymal").get<int>();
      spec.plan.venous = p.at("venous").get<int>();
    }
    spec.n_frames = j.contains("n_frames") ? j["n_frames"].get<int>() : spec.plan.total();
    if (j.contains("vessels")) {
      for (const json& s : j["vessels"]) {
        VesselSegment seg;
        for (const json& pt : s.at("points")) {
          seg.points.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        }
        seg.width_px = s.at("width").get<double>();
        spec.vessels.push_back(std::move(seg));
      }
    }
    if (j.contains("territory")) {
      for (const json& pt : j["territory"]) {
        spec.territory.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
      }
    }
    if (j.contains("reperfused_fraction"))
      spec.reperfused_fraction = j["reperfused_fraction"].get<double>();
    if (j.contains("jitter_px")) spec.jitter_px = j["jitter_px"].get<double>();
    if (j.contains("noise_sigma")) spec.noise_sigma = j["noise_sigma"].get<double>();
    if (j.contains("seed")) spec.rng_seed = j["seed"].get<uint64_t>();
    if (j.contains("view")) spec.view = view_from_string(j["view"].get<std::string>());
    if (j.contains("patient_id")) spec.patient_id = j["patient_id"].get<std::string>();
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

std::pair<std::filesystem::path, std::filesystem::path> write_phantom(
    const PhantomOutput& output, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::vector<int> labels_pre, labels_post;
  for (PhaseLabel l : output.labels_pre) labels_pre.push_back(static_cast<int>(l));
  for (PhaseLabel l : output.labels_post) labels_post.push_back(static_cast<int>(l));

  const fs::path pre = save_acquisition(output.pre, dir, "pre", 255, labels_pre);
  const fs::path post = save_acquisition(output.post, dir, "post", 255, labels_post);
  save_image(output.atlas, dir / "atlas.pgm");
  save_mask(output.mask, dir / "atlas_mask.pgm");

  Frame territory(output.mask.width, output.mask.height);
  for (size_t i = 0; i < output.territory.size(); ++i) {
    territory.intensities[i] = output.territory[i] ? 1.0 : 0.0;
  }
  save_image(territory, dir / "territory.pgm");

  nlohmann::json truth;
  truth["reperfused_fraction"] = output.reperfused_fraction;
  truth["labels_pre"] = labels_pre;
  truth["labels_post"] = labels_post;
  write_file_atomic(dir / "truth.json", truth.dump(2) + "\n");
  return {pre, post};
}

}  // namespace phantom
}  // namespace reperfq
