#include "reperfq/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "reperfq/parallel.hpp"

namespace reperfq {

namespace {

constexpr int kMinSurvivingSamples = 64;

double bilinear(const Frame& img, double x, double y, double fill) {
  if (x < 0.0 || y < 0.0 || x > img.width - 1 || y > img.height - 1) return fill;
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  if (x0 > img.width - 2) x0 = img.width - 2;
  if (y0 > img.height - 2) y0 = img.height - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const double fx = x - x0;
  const double fy = y - y0;
  const double v00 = img.at(x0, y0);
  const double v10 = x0 + 1 < img.width ? img.at(x0 + 1, y0) : fill;
  const double v01 = y0 + 1 < img.height ? img.at(x0, y0 + 1) : fill;
  const double v11 = (x0 + 1 < img.width && y0 + 1 < img.height) ? img.at(x0 + 1, y0 + 1) : fill;
  return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
}

// Cubic B-spline kernel, support (-2, 2), partition of unity.
double bspline3(double u) {
  const double a = std::abs(u);
  if (a < 1.0) return (4.0 - 6.0 * a * a + 3.0 * a * a * a) / 6.0;
  if (a < 2.0) {
    const double b = 2.0 - a;
    return b * b * b / 6.0;
  }
  return 0.0;
}

struct Sample {
  double x, y;
};

// Samples sit on fixed-image pixel centers: the fixed intensity needs no
// interpolation, only the mapped moving position does.
std::vector<Sample> draw_positions(std::mt19937_64& rng, int count, int width, int height) {
  std::uniform_int_distribution<int> ux(0, width - 1);
  std::uniform_int_distribution<int> uy(0, height - 1);
  std::vector<Sample> out(count);
  for (auto& s : out) {
    s.x = ux(rng);
    s.y = uy(rng);
  }
  return out;
}

void min_max(const Frame& img, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (double v : img.intensities) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(hi - lo > 1e-12)) hi = lo + 1.0;  // constant image: one occupied bin
}

/// Mattes MI estimator bound to one fixed/moving pair; intensity ranges and
/// scratch histograms are computed once and reused across evaluations.
class MattesEvaluator {
 public:
  MattesEvaluator(const Frame& fixed, const Frame& moving, int bins, const BrainMask* mask)
      : fixed_(fixed), moving_(moving), bins_(bins), mask_(mask), joint_(bins * bins) {
    min_max(fixed_, fixed_min_, fixed_max_);
    min_max(moving_, moving_min_, moving_max_);
    fixed_scale_ = (bins_ - 1) / (fixed_max_ - fixed_min_);
    moving_scale_ = (bins_ - 3) / (moving_max_ - moving_min_);
  }

  double evaluate(const AffineTransform2D& t, const std::vector<Sample>& positions) {
    std::fill(joint_.begin(), joint_.end(), 0.0);
    int survivors = 0;
    for (const Sample& s : positions) {
      double mx, my;
      t.apply(s.x, s.y, mx, my);
      if (mx < 0.0 || my < 0.0 || mx > moving_.width - 1 || my > moving_.height - 1) continue;
      if (mask_) {
        const int nx = static_cast<int>(std::lround(mx));
        const int ny = static_cast<int>(std::lround(my));
        if (!mask_->at(std::clamp(nx, 0, mask_->width - 1), std::clamp(ny, 0, mask_->height - 1)))
          continue;
      }
      const double fv = bilinear(fixed_, s.x, s.y, 1.0);
      const double mv = bilinear(moving_, mx, my, 1.0);
      accumulate(fv, mv);
      ++survivors;
    }
    if (survivors < kMinSurvivingSamples) return 0.0;
    return reduce(survivors);
  }

 private:
  void accumulate(double fv, double mv) {
    // Linear Parzen window along the fixed axis, cubic along the moving axis.
    double uf = (fv - fixed_min_) * fixed_scale_;
    uf = std::clamp(uf, 0.0, static_cast<double>(bins_ - 1));
    int f0 = std::min(static_cast<int>(uf), bins_ - 2);
    const double df = uf - f0;

    double um = 1.0 + (mv - moving_min_) * moving_scale_;
    um = std::clamp(um, 1.0, static_cast<double>(bins_ - 2));
    const int m0 = static_cast<int>(um) - 1;
    double* row0 = joint_.data() + static_cast<size_t>(f0) * bins_;
    double* row1 = row0 + bins_;
    for (int k = 0; k < 4; ++k) {
      const int m = m0 + k;
      if (m < 0 || m >= bins_) continue;
      const double wm = bspline3(um - m);
      row0[m] += (1.0 - df) * wm;
      row1[m] += df * wm;
    }
  }

  double reduce(int survivors) const {
    const double inv_total = 1.0 / survivors;
    std::vector<double> pf(bins_, 0.0), pm(bins_, 0.0);
    for (int f = 0; f < bins_; ++f) {
      const double* row = joint_.data() + static_cast<size_t>(f) * bins_;
      for (int m = 0; m < bins_; ++m) {
        pf[f] += row[m];
        pm[m] += row[m];
      }
    }
    double mi = 0.0;
    for (int f = 0; f < bins_; ++f) {
      if (pf[f] <= 0.0) continue;
      const double* row = joint_.data() + static_cast<size_t>(f) * bins_;
      for (int m = 0; m < bins_; ++m) {
        if (row[m] <= 0.0) continue;
        const double p = row[m] * inv_total;
        mi += p * std::log(p / (pf[f] * inv_total * (pm[m] * inv_total)));
      }
    }
    return mi;
  }

  const Frame& fixed_;
  const Frame& moving_;
  int bins_;
  const BrainMask* mask_;
  double fixed_min_ = 0.0, fixed_max_ = 1.0, fixed_scale_ = 1.0;
  double moving_min_ = 0.0, moving_max_ = 1.0, moving_scale_ = 1.0;
  std::vector<double> joint_;
};

Frame downsample(const Frame& img, int factor) {
  if (factor == 1) return img;
  const int w = std::max(1, img.width / factor);
  const int h = std::max(1, img.height / factor);
  Frame out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const int sx = x * factor + dx;
          const int sy = y * factor + dy;
          if (sx < img.width && sy < img.height) {
            sum += img.at(sx, sy);
            ++count;
          }
        }
      }
      out.at(x, y) = sum / count;
    }
  }
  return out;
}

BrainMask downsample_mask(const BrainMask& mask, int factor) {
  if (factor == 1) return mask;
  const int w = std::max(1, mask.width / factor);
  const int h = std::max(1, mask.height / factor);
  BrainMask out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int inside = 0, total = 0;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const int sx = x * factor + dx;
          const int sy = y * factor + dy;
          if (sx < mask.width && sy < mask.height) {
            inside += mask.at(sx, sy) ? 1 : 0;
            ++total;
          }
        }
      }
      out.set(x, y, inside * 2 >= total);
    }
  }
  return out;
}

// Affine parameters in optimizer order: a11, a12, a21, a22, tx, ty.
using Params = std::array<double, 6>;

AffineTransform2D params_to_transform(const Params& p, double cx, double cy) {
  AffineTransform2D t;
  t.a11 = p[0];
  t.a12 = p[1];
  t.a21 = p[2];
  t.a22 = p[3];
  t.tx = p[4];
  t.ty = p[5];
  t.cx = cx;
  t.cy = cy;
  return t;
}

bool params_finite(const Params& p) {
  for (double v : p) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

/// Rescales a full-resolution transform into level coordinates where level
/// pixel p_l sits at full position factor*p_l + (factor-1)/2. The matrix
/// part is scale invariant; center and translation shrink by the factor.
AffineTransform2D to_level(const AffineTransform2D& t, int factor) {
  if (factor == 1) return t;
  const double off = (factor - 1) / 2.0;
  AffineTransform2D s = t;
  s.cx = (t.cx - off) / factor;
  s.cy = (t.cy - off) / factor;
  s.tx = t.tx / factor;
  s.ty = t.ty / factor;
  return s;
}

}  // namespace

void MIConfig::validate() const {
  require(histogram_bins >= 8, ErrorCode::InvalidConfig, "histogram_bins must be >= 8");
  require(samples_per_iter >= 256, ErrorCode::InvalidConfig, "samples_per_iter must be >= 256");
  require(!pyramid_factors.empty() && pyramid_factors.back() == 1, ErrorCode::InvalidConfig,
          "pyramid_factors must end at 1");
  for (size_t i = 1; i < pyramid_factors.size(); ++i) {
    require(pyramid_factors[i] < pyramid_factors[i - 1], ErrorCode::InvalidConfig,
            "pyramid_factors must be strictly decreasing");
  }
  require(pyramid_factors.front() >= 1, ErrorCode::InvalidConfig, "pyramid factors must be >= 1");
  require(iterations_per_level > 0, ErrorCode::InvalidConfig, "iterations_per_level must be > 0");
}

double mattes_mi(const Frame& fixed, const Frame& moving, const AffineTransform2D& t,
                 const MIConfig& cfg, const BrainMask* mask) {
  cfg.validate();
  require(fixed.size() > 0 && moving.size() > 0, ErrorCode::DimensionMismatch,
          "mattes_mi needs non-empty images");
  if (mask) {
    require(mask->width == moving.width && mask->height == moving.height,
            ErrorCode::DimensionMismatch, "moving mask dimensions must match the moving image");
  }
  MattesEvaluator eval(fixed, moving, cfg.histogram_bins, mask);
  std::mt19937_64 rng(cfg.rng_seed);
  const auto positions = draw_positions(rng, cfg.samples_per_iter, fixed.width, fixed.height);
  return eval.evaluate(t, positions);
}

RegistrationResult register_affine(const Frame& fixed, const Frame& moving, const MIConfig& cfg,
                                   const BrainMask* mask) {
  cfg.validate();
  require(fixed.size() > 0 && moving.size() > 0, ErrorCode::DimensionMismatch,
          "register_affine needs non-empty images");

  const double cx = (fixed.width - 1) / 2.0;
  const double cy = (fixed.height - 1) / 2.0;
  // Characteristic length making matrix entries commensurate with pixels of
  // translation; the optimizer walks the rescaled space.
  const double length = 0.5 * std::hypot(fixed.width - 1.0, fixed.height - 1.0);

  Params params = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0};
  std::mt19937_64 iter_rng(cfg.rng_seed ^ 0xda3e39cb94b95bdbULL);
  int iterations_total = 0;
  double final_mi = 0.0;

  for (size_t level = 0; level < cfg.pyramid_factors.size(); ++level) {
    const int factor = cfg.pyramid_factors[level];
    const Frame fixed_l = downsample(fixed, factor);
    const Frame moving_l = downsample(moving, factor);
    BrainMask mask_l;
    const BrainMask* mask_ptr = nullptr;
    if (mask) {
      mask_l = downsample_mask(*mask, factor);
      mask_ptr = &mask_l;
    }
    MattesEvaluator eval(fixed_l, moving_l, cfg.histogram_bins, mask_ptr);

    const bool last_level = level + 1 == cfg.pyramid_factors.size();
    // The last level's held-out set replicates mattes_mi's own sampling, so
    // the reported final_mi is directly comparable to user metric calls.
    std::mt19937_64 holdout_rng(last_level
                                    ? cfg.rng_seed
                                    : cfg.rng_seed + 0x9e3779b97f4a7c15ULL * (level + 1));
    const auto holdout = draw_positions(holdout_rng, cfg.samples_per_iter, fixed_l.width,
                                        fixed_l.height);

    auto holdout_mi = [&](const Params& p) {
      return eval.evaluate(to_level(params_to_transform(p, cx, cy), factor), holdout);
    };

    Params best = params;
    double best_mi = holdout_mi(params);

    // Probe and step sizes live in full-resolution pixels; scaling them by
    // the level factor keeps their effect constant relative to the level's
    // own pixel grid, so coarse levels cover distance instead of crawling.
    const double level_scale = factor;
    const std::array<double, 6> eps = {
        cfg.fd_epsilon_matrix * level_scale,      cfg.fd_epsilon_matrix * level_scale,
        cfg.fd_epsilon_matrix * level_scale,      cfg.fd_epsilon_matrix * level_scale,
        cfg.fd_epsilon_translation * level_scale, cfg.fd_epsilon_translation * level_scale};
    double adaptive_time = 0.0;
    const double time_cap = 2.0 * cfg.iterations_per_level;
    std::array<double, 6> prev_grad{};
    bool have_prev = false;

    for (int k = 0; k < cfg.iterations_per_level; ++k, ++iterations_total) {
      const auto positions =
          draw_positions(iter_rng, cfg.samples_per_iter, fixed_l.width, fixed_l.height);
      auto cost = [&](const Params& p) {
        return -eval.evaluate(to_level(params_to_transform(p, cx, cy), factor), positions);
      };

      // Central differences with common random numbers, then rescale the
      // matrix components so the gradient lives in the commensurate space.
      std::array<double, 6> grad;
      for (int i = 0; i < 6; ++i) {
        Params plus = params, minus = params;
        plus[i] += eps[i];
        minus[i] -= eps[i];
        grad[i] = (cost(plus) - cost(minus)) / (2.0 * eps[i]);
        if (i < 4) grad[i] /= length;
      }
      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);

      if (norm > 1e-14) {
        for (double& g : grad) g /= norm;
        if (have_prev) {
          double dot = 0.0;
          for (int i = 0; i < 6; ++i) dot += grad[i] * prev_grad[i];
          if (dot > 0.0) {
            adaptive_time = std::max(0.0, adaptive_time - 1.0);
          } else if (dot < 0.0) {
            adaptive_time = std::min(time_cap, adaptive_time + 1.0);
          }
        }
        prev_grad = grad;
        have_prev = true;

        const double gamma =
            level_scale * cfg.step_a / std::pow(cfg.step_A + adaptive_time, cfg.step_alpha);
        for (int i = 0; i < 6; ++i) {
          params[i] -= gamma * grad[i] * (i < 4 ? 1.0 / length : 1.0);
        }
        require(params_finite(params), ErrorCode::Diverged,
                "registration diverged: non-finite parameter");
      } else {
        adaptive_time = std::min(time_cap, adaptive_time + 1.0);
      }

      const double mi = holdout_mi(params);
      if (mi > best_mi) {
        best_mi = mi;
        best = params;
      }
    }

    params = best;
    final_mi = best_mi;
  }

  RegistrationResult result;
  result.transform = params_to_transform(params, cx, cy);
  result.final_mi = final_mi;
  result.iterations_used = iterations_total;
  return result;
}

Frame warp(const Frame& image, const AffineTransform2D& t) {
  Frame out(image.width, image.height);
  out.time_s = image.time_s;
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      double sx, sy;
      t.apply(static_cast<double>(x), static_cast<double>(y), sx, sy);
      out.at(x, y) = bilinear(image, sx, sy, 1.0);
    }
  }
  return out;
}

SegmentationMap warp_labels(const SegmentationMap& seg, const AffineTransform2D& t) {
  SegmentationMap out(seg.width, seg.height, PixelClass::NonPerfused);
  for (int y = 0; y < seg.height; ++y) {
    for (int x = 0; x < seg.width; ++x) {
      double sx, sy;
      t.apply(static_cast<double>(x), static_cast<double>(y), sx, sy);
      const int nx = static_cast<int>(std::lround(sx));
      const int ny = static_cast<int>(std::lround(sy));
      if (nx >= 0 && ny >= 0 && nx < seg.width && ny < seg.height) {
        out.at(x, y) = seg.at(nx, ny);
      }
    }
  }
  return out;
}

BrainMask warp_mask(const BrainMask& mask, const AffineTransform2D& t, int out_width,
                    int out_height) {
  BrainMask out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      double sx, sy;
      t.apply(static_cast<double>(x), static_cast<double>(y), sx, sy);
      const int nx = static_cast<int>(std::lround(sx));
      const int ny = static_cast<int>(std::lround(sy));
      if (nx >= 0 && ny >= 0 && nx < mask.width && ny < mask.height) {
        out.set(x, y, mask.at(nx, ny));
      }
    }
  }
  return out;
}

Acquisition motion_correct(const Acquisition& acq, const PhaseSequence& phases,
                           const MIConfig& cfg) {
  require(phases.labels.size() == acq.frames.size(), ErrorCode::LabelLengthMismatch,
          "phase labels must match the frame count");
  std::vector<size_t> kept;
  for (size_t i = 0; i < phases.labels.size(); ++i) {
    if (phases.labels[i] == PhaseLabel::Arterial || phases.labels[i] == PhaseLabel::Parenchymal) {
      kept.push_back(i);
    }
  }
  require(!kept.empty(), ErrorCode::NoUsableFrames,
          "no arterial or parenchymal frames to motion correct");

  // Middle kept frame as reference: minimizes the maximum temporal distance.
  const size_t ref = kept[(kept.size() - 1) / 2];
  const Frame& reference = acq.frames[ref];

  Acquisition out;
  out.view = acq.view;
  out.stage = acq.stage;
  out.patient_id = acq.patient_id;
  out.frames.resize(kept.size());

  parallel_for(kept.size(), [&](size_t j) {
    const size_t i = kept[j];
    if (i == ref) {
      out.frames[j] = acq.frames[i];
      return;
    }
    MIConfig frame_cfg = cfg;
    frame_cfg.rng_seed = cfg.rng_seed + i + 1;  // derived, reproducible per frame
    const RegistrationResult reg = register_affine(reference, acq.frames[i], frame_cfg);
    out.frames[j] = warp(acq.frames[i], reg.transform);
    out.frames[j].time_s = acq.frames[i].time_s;
  });
  return out;
}

std::pair<size_t, RegistrationResult> select_atlas(const std::vector<Atlas>& atlases,
                                                   const Frame& target, const MIConfig& cfg) {
  require(!atlases.empty(), ErrorCode::EmptyAtlasSet, "atlas set is empty");
  std::vector<RegistrationResult> results(atlases.size());
  parallel_for(atlases.size(), [&](size_t i) {
    results[i] = register_affine(target, atlases[i].image, cfg, &atlases[i].mask);
  });
  size_t best = 0;
  for (size_t i = 1; i < results.size(); ++i) {
    if (results[i].final_mi > results[best].final_mi) best = i;  // ties keep the smaller index
  }
  return {best, results[best]};
}

}  // namespace reperfq
