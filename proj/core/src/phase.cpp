#include "reperfq/phase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "reperfq/registration.hpp"

namespace reperfq {
namespace phase {

namespace {

constexpr double kLogClamp = -1e30;
constexpr double kPi = 3.14159265358979323846;

double clamped_log(double p) { return p > 0.0 ? std::log(p) : kLogClamp; }

struct FrameStats {
  double mean = 0.0;
  double stddev = 0.0;
  double p5 = 0.0;
  double dark_fraction = 0.0;
  double centroid_row = 0.5;
  double centroid_col = 0.5;
  std::array<double, 4> quadrant_dark{};  // TL, TR, BL, BR
};

FrameStats frame_stats(const Frame& f) {
  FrameStats s;
  const size_t n = f.size();
  double sum = 0.0, sum_sq = 0.0;
  double dark_mass = 0.0, mass_row = 0.0, mass_col = 0.0;
  size_t dark = 0;
  std::array<size_t, 4> quad_dark{};
  std::array<size_t, 4> quad_total{};
  const int half_w = f.width / 2;
  const int half_h = f.height / 2;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      const double v = f.at(x, y);
      sum += v;
      sum_sq += v * v;
      const double w = 1.0 - v;
      dark_mass += w;
      mass_row += w * y;
      mass_col += w * x;
      const int quad = (y < half_h ? 0 : 2) + (x < half_w ? 0 : 1);
      ++quad_total[quad];
      if (v < 0.5) {
        ++dark;
        ++quad_dark[quad];
      }
    }
  }
  s.mean = sum / n;
  s.stddev = std::sqrt(std::max(0.0, sum_sq / n - s.mean * s.mean));
  s.dark_fraction = static_cast<double>(dark) / n;
  if (dark_mass > 1e-12) {
    s.centroid_row = f.height > 1 ? (mass_row / dark_mass) / (f.height - 1) : 0.5;
    s.centroid_col = f.width > 1 ? (mass_col / dark_mass) / (f.width - 1) : 0.5;
  }
  for (int q = 0; q < 4; ++q) {
    s.quadrant_dark[q] = quad_total[q] ? static_cast<double>(quad_dark[q]) / quad_total[q] : 0.0;
  }
  // 5th percentile with linear interpolation between closest ranks.
  std::vector<double> sorted(f.intensities);
  std::sort(sorted.begin(), sorted.end());
  const double rank = 0.05 * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  s.p5 = lo + 1 < sorted.size() ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac : sorted[lo];
  return s;
}

void write_stats(FeatureVector& out, size_t offset, const FrameStats& s) {
  out[offset + 0] = s.mean;
  out[offset + 1] = s.stddev;
  out[offset + 2] = s.p5;
  out[offset + 3] = s.dark_fraction;
  out[offset + 4] = s.centroid_row;
  out[offset + 5] = s.centroid_col;
  out[offset + 6] = s.quadrant_dark[0];
  out[offset + 7] = s.quadrant_dark[1];
  out[offset + 8] = s.quadrant_dark[2];
  out[offset + 9] = s.quadrant_dark[3];
}

}  // namespace

TransitionMatrix TransitionMatrix::standard() {
  TransitionMatrix t;
  const int nc = 0, art = 1, par = 2, ven = 3;
  t.allowed[nc][nc] = 1;
  t.allowed[nc][art] = 1;
  t.allowed[art][art] = 1;
  t.allowed[art][par] = 1;
  t.allowed[par][par] = 1;
  t.allowed[par][ven] = 1;
  t.allowed[ven][ven] = 1;
  t.allowed[ven][nc] = 1;
  return t;
}

bool TransitionMatrix::permits(const std::vector<PhaseLabel>& labels) const {
  for (size_t i = 1; i < labels.size(); ++i) {
    if (!is_allowed(static_cast<int>(labels[i - 1]), static_cast<int>(labels[i]))) return false;
  }
  return true;
}

PhaseModel::PhaseModel() { feature_stds.fill(1.0); }

FeatureVector extract_features(const Acquisition& acq, size_t index) {
  require(index < acq.frames.size(), ErrorCode::IndexOutOfRange,
          "frame index " + std::to_string(index) + " out of range");
  const size_t prev = index > 0 ? index - 1 : index;
  const size_t next = index + 1 < acq.frames.size() ? index + 1 : index;
  const FrameStats sp = frame_stats(acq.frames[prev]);
  const FrameStats sc = frame_stats(acq.frames[index]);
  const FrameStats sn = frame_stats(acq.frames[next]);
  FeatureVector out{};
  write_stats(out, 0, sp);
  write_stats(out, 10, sc);
  write_stats(out, 20, sn);
  out[30] = sc.mean - sp.mean;
  out[31] = sc.dark_fraction - sp.dark_fraction;
  out[32] = sn.mean - sc.mean;
  out[33] = sn.dark_fraction - sc.dark_fraction;
  return out;
}

namespace {

PhaseProbabilities softmax_scores(const PhaseModel& model, const FeatureVector& features) {
  std::array<double, kPhaseCount> z;
  for (int k = 0; k < kPhaseCount; ++k) {
    double acc = model.bias[k];
    for (int d = 0; d < kFeatureDim; ++d) {
      acc += model.weights[k][d] * (features[d] - model.feature_means[d]) / model.feature_stds[d];
    }
    z[k] = acc;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  PhaseProbabilities p;
  for (int k = 0; k < kPhaseCount; ++k) {
    p[k] = std::exp(z[k] - zmax);
    total += p[k];
  }
  for (int k = 0; k < kPhaseCount; ++k) p[k] /= total;
  return p;
}

}  // namespace

std::vector<PhaseProbabilities> predict_probabilities(const PhaseModel& model,
                                                      const Acquisition& acq) {
  for (double s : model.feature_stds) {
    require(s > 0.0, ErrorCode::InvalidConfig, "model feature stds must be strictly positive");
  }
  std::vector<PhaseProbabilities> out;
  out.reserve(acq.frames.size());
  for (size_t i = 0; i < acq.frames.size(); ++i) {
    out.push_back(softmax_scores(model, extract_features(acq, i)));
  }
  return out;
}

std::vector<PhaseLabel> decode_constrained(const std::vector<PhaseProbabilities>& probabilities,
                                           const TransitionMatrix& transitions) {
  const size_t n = probabilities.size();
  require(n > 0, ErrorCode::EmptySequence, "cannot decode an empty probability sequence");

  constexpr double kUnreachable = -std::numeric_limits<double>::infinity();
  std::vector<std::array<double, kPhaseCount>> score(n);
  std::vector<std::array<int, kPhaseCount>> back(n);

  for (int j = 0; j < kPhaseCount; ++j) {
    score[0][j] = clamped_log(probabilities[0][j]);  // uniform initial prior
    back[0][j] = -1;
  }
  for (size_t t = 1; t < n; ++t) {
    for (int j = 0; j < kPhaseCount; ++j) {
      double best = kUnreachable;
      int best_prev = -1;
      for (int i = 0; i < kPhaseCount; ++i) {  // ascending: ties keep the smaller index
        if (!transitions.is_allowed(i, j)) continue;
        if (score[t - 1][i] > best) {
          best = score[t - 1][i];
          best_prev = i;
        }
      }
      score[t][j] = best_prev < 0 ? kUnreachable : best + clamped_log(probabilities[t][j]);
      back[t][j] = best_prev;
    }
  }

  double best = kUnreachable;
  int state = -1;
  for (int j = 0; j < kPhaseCount; ++j) {
    if (score[n - 1][j] > best) {
      best = score[n - 1][j];
      state = j;
    }
  }
  require(state >= 0, ErrorCode::NoValidPath,
          "no label sequence satisfies the transition matrix");

  std::vector<PhaseLabel> labels(n);
  for (size_t t = n; t-- > 0;) {
    labels[t] = static_cast<PhaseLabel>(state);
    state = back[t][state];
  }
  return labels;
}

PhaseBoundaries phase_boundaries(const std::vector<PhaseLabel>& labels) {
  PhaseBoundaries b;
  for (size_t i = 0; i < labels.size(); ++i) {
    const int idx = static_cast<int>(i);
    if (labels[i] == PhaseLabel::Arterial) {
      if (!b.first_arterial) b.first_arterial = idx;
      b.last_arterial = idx;
    } else if (labels[i] == PhaseLabel::Parenchymal) {
      b.last_parenchymal = idx;
    }
  }
  return b;
}

AugmentParams draw_augment_params(const Frame& frame, std::mt19937& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  AugmentParams p;
  p.flip_horizontal = coin(rng) < 0.5;
  p.rotate = coin(rng) < 0.5;
  p.jitter = coin(rng) < 0.5;
  if (p.rotate) {
    std::uniform_real_distribution<double> angle(-10.0, 10.0);
    p.angle_rad = angle(rng) * kPi / 180.0;
  }
  if (p.jitter) {
    std::uniform_real_distribution<double> dx(-0.1 * frame.width, 0.1 * frame.width);
    std::uniform_real_distribution<double> dy(-0.1 * frame.height, 0.1 * frame.height);
    std::uniform_real_distribution<double> sc(0.8, 1.2);
    p.translate_x = dx(rng);
    p.translate_y = dy(rng);
    p.scale = sc(rng);
  }
  return p;
}

Frame augment(const Frame& frame, const AugmentParams& params) {
  Frame working = frame;
  if (params.flip_horizontal) {
    for (int y = 0; y < frame.height; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        working.at(x, y) = frame.at(frame.width - 1 - x, y);
      }
    }
  }
  if (!params.rotate && !params.jitter) return working;

  // Content map: q' = s * R(angle) * (q - c) + c + t. Resampling needs the
  // inverse, expressed in the p' = A*(p-c) + c + t form warp() consumes.
  const double cx = (frame.width - 1) / 2.0;
  const double cy = (frame.height - 1) / 2.0;
  const double angle = params.rotate ? params.angle_rad : 0.0;
  const double scale = params.jitter ? params.scale : 1.0;
  const double c = std::cos(angle) / scale;
  const double s = std::sin(angle) / scale;
  AffineTransform2D inv;
  inv.a11 = c;
  inv.a12 = s;
  inv.a21 = -s;
  inv.a22 = c;
  const double tx = params.jitter ? params.translate_x : 0.0;
  const double ty = params.jitter ? params.translate_y : 0.0;
  inv.tx = -(inv.a11 * tx + inv.a12 * ty);
  inv.ty = -(inv.a21 * tx + inv.a22 * ty);
  inv.cx = cx;
  inv.cy = cy;
  return warp(working, inv);
}

Frame augment(const Frame& frame, std::mt19937& rng) {
  return augment(frame, draw_augment_params(frame, rng));
}

namespace {

struct Dataset {
  std::vector<FeatureVector> features;
  std::vector<int> labels;
};

double loss_and_gradient(const Dataset& data,
                         const std::array<std::array<double, kFeatureDim>, kPhaseCount>& weights,
                         const std::array<double, kPhaseCount>& bias,
                         std::array<std::array<double, kFeatureDim>, kPhaseCount>* grad_w,
                         std::array<double, kPhaseCount>* grad_b) {
  const size_t n = data.features.size();
  if (grad_w) {
    for (auto& row : *grad_w) row.fill(0.0);
    grad_b->fill(0.0);
  }
  double loss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const FeatureVector& x = data.features[i];
    std::array<double, kPhaseCount> z;
    for (int k = 0; k < kPhaseCount; ++k) {
      double acc = bias[k];
      for (int d = 0; d < kFeatureDim; ++d) acc += weights[k][d] * x[d];
      z[k] = acc;
    }
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    std::array<double, kPhaseCount> p;
    for (int k = 0; k < kPhaseCount; ++k) {
      p[k] = std::exp(z[k] - zmax);
      total += p[k];
    }
    for (int k = 0; k < kPhaseCount; ++k) p[k] /= total;
    loss -= std::log(std::max(p[data.labels[i]], 1e-300));
    if (grad_w) {
      for (int k = 0; k < kPhaseCount; ++k) {
        const double g = (p[k] - (k == data.labels[i] ? 1.0 : 0.0)) / n;
        (*grad_b)[k] += g;
        for (int d = 0; d < kFeatureDim; ++d) (*grad_w)[k][d] += g * x[d];
      }
    }
  }
  return loss / n;
}

}  // namespace

PhaseModel train(const TrainConfig& config, const std::vector<TrainingSample>& dataset,
                 uint64_t rng_seed) {
  require(!dataset.empty(), ErrorCode::EmptyDataset, "training dataset is empty");
  for (const auto& sample : dataset) {
    require(sample.labels.size() == sample.acquisition.frames.size(),
            ErrorCode::LabelLengthMismatch,
            "reference labels must match the frame count");
  }

  std::mt19937 rng(static_cast<uint32_t>(rng_seed));
  Dataset data;
  auto append = [&data](const Acquisition& acq, const std::vector<PhaseLabel>& labels) {
    for (size_t i = 0; i < acq.frames.size(); ++i) {
      data.features.push_back(extract_features(acq, i));
      data.labels.push_back(static_cast<int>(labels[i]));
    }
  };
  for (const auto& sample : dataset) append(sample.acquisition, sample.labels);
  for (int copy = 0; copy < config.augment_copies; ++copy) {
    for (const auto& sample : dataset) {
      Acquisition aug = sample.acquisition;
      for (Frame& f : aug.frames) f = augment(f, rng);
      append(aug, sample.labels);
    }
  }

  // Standardize features; the statistics travel with the model.
  PhaseModel model;
  const size_t n = data.features.size();
  for (int d = 0; d < kFeatureDim; ++d) {
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& x : data.features) {
      sum += x[d];
      sum_sq += x[d] * x[d];
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    model.feature_means[d] = mean;
    model.feature_stds[d] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  for (auto& x : data.features) {
    for (int d = 0; d < kFeatureDim; ++d) {
      x[d] = (x[d] - model.feature_means[d]) / model.feature_stds[d];
    }
  }

  std::array<std::array<double, kFeatureDim>, kPhaseCount> weights{};
  std::array<double, kPhaseCount> bias{};
  std::array<std::array<double, kFeatureDim>, kPhaseCount> grad_w;
  std::array<double, kPhaseCount> grad_b;
  double loss = loss_and_gradient(data, weights, bias, &grad_w, &grad_b);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double step = config.initial_learning_rate *
                  std::pow(0.5, epoch / std::max(1, config.halve_every));
    for (int attempt = 0; attempt < 40; ++attempt) {
      std::array<std::array<double, kFeatureDim>, kPhaseCount> cand_w = weights;
      std::array<double, kPhaseCount> cand_b = bias;
      for (int k = 0; k < kPhaseCount; ++k) {
        cand_b[k] -= step * grad_b[k];
        for (int d = 0; d < kFeatureDim; ++d) cand_w[k][d] -= step * grad_w[k][d];
      }
      const double cand_loss = loss_and_gradient(data, cand_w, cand_b, nullptr, nullptr);
      if (cand_loss <= loss) {
        weights = cand_w;
        bias = cand_b;
        break;
      }
      step *= 0.5;  // line check: never accept an increasing step
    }
    loss = loss_and_gradient(data, weights, bias, &grad_w, &grad_b);
  }

  model.weights = weights;
  model.bias = bias;
  return model;
}

PhaseSequence classify(const PhaseModel& model, const Acquisition& acq) {
  PhaseSequence seq;
  seq.probabilities = predict_probabilities(model, acq);
  seq.labels = decode_constrained(seq.probabilities, TransitionMatrix::standard());
  return seq;
}

}  // namespace phase
}  // namespace reperfq
