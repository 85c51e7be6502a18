#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "reperfq/phase.hpp"
#include "test_support.hpp"

using namespace reperfq;
using namespace reperfq::phase;

namespace {

PhaseProbabilities probs(double nc, double art, double par, double ven) {
  return {nc, art, par, ven};
}

std::vector<PhaseProbabilities> random_probs(std::mt19937& rng, size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<PhaseProbabilities> out(n);
  for (auto& p : out) {
    double total = 0.0;
    for (double& v : p) {
      v = u(rng) + 1e-6;
      total += v;
    }
    for (double& v : p) v /= total;
  }
  return out;
}

}  // namespace

TEST_CASE("transition matrix encodes the contrast-passage cycle") {
  const TransitionMatrix t = TransitionMatrix::standard();
  const int allowed[][2] = {{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}, {3, 0}};
  int count = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) count += t.is_allowed(i, j);
  }
  CHECK(count == 8);
  for (const auto& [i, j] : allowed) CHECK(t.is_allowed(i, j));
}

TEST_CASE("features of a uniform bright frame") {
  Acquisition acq = test::simple_acquisition(6, 16, 16, 1.0);
  const FeatureVector f = extract_features(acq, 2);
  CHECK(f[10] == 1.0);   // mean of the middle window frame
  CHECK(f[11] == 0.0);   // std
  CHECK(f[13] == 0.0);   // dark fraction
  CHECK(f[14] == 0.5);   // centroid row defaults to center for empty mass
  CHECK(f[15] == 0.5);
  for (int d = 30; d < 34; ++d) CHECK(f[d] == 0.0);  // identical frames
}

TEST_CASE("quadrant dark fractions isolate the top-left quadrant") {
  Acquisition acq = test::simple_acquisition(6, 16, 16, 1.0);
  Frame& f = acq.frames[3];
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) f.at(x, y) = 0.0;
  }
  const FeatureVector v = extract_features(acq, 3);
  CHECK(v[13] == doctest::Approx(0.25));  // global dark fraction
  CHECK(v[16] == doctest::Approx(1.0));   // TL
  CHECK(v[17] == doctest::Approx(0.0));   // TR
  CHECK(v[18] == doctest::Approx(0.0));   // BL
  CHECK(v[19] == doctest::Approx(0.0));   // BR
}

TEST_CASE("out-of-range frame index throws") {
  Acquisition acq = test::simple_acquisition(6);
  try {
    extract_features(acq, 6);
    FAIL("expected IndexOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IndexOutOfRange);
  }
}

TEST_CASE("zero model predicts uniform probabilities") {
  Acquisition acq = test::simple_acquisition(6);
  const PhaseModel model;
  const auto probabilities = predict_probabilities(model, acq);
  for (const auto& p : probabilities) {
    for (double v : p) CHECK(v == doctest::Approx(0.25));
  }
}

TEST_CASE("large bias dominates the softmax") {
  Acquisition acq = test::simple_acquisition(6);
  PhaseModel model;
  model.bias[0] = 10.0;
  const auto probabilities = predict_probabilities(model, acq);
  for (const auto& p : probabilities) {
    CHECK(p[0] > 0.999);
    double total = 0.0;
    for (double v : p) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("confident arterial probabilities decode to all arterial") {
  std::vector<PhaseProbabilities> p(5, probs(0.01, 0.97, 0.01, 0.01));
  const auto labels = decode_constrained(p, TransitionMatrix::standard());
  for (PhaseLabel l : labels) CHECK(l == PhaseLabel::Arterial);
}

TEST_CASE("invalid argmax path is rerouted through the transition matrix") {
  std::vector<PhaseProbabilities> p = {
      probs(1.0 / 30, 0.9, 1.0 / 30, 1.0 / 30),
      probs(1.0 / 30, 1.0 / 30, 0.9, 1.0 / 30),
      probs(0.125, 0.4, 0.35, 0.125),
  };
  const auto labels = decode_constrained(p, TransitionMatrix::standard());
  const std::vector<PhaseLabel> expected = {PhaseLabel::Arterial, PhaseLabel::Parenchymal,
                                            PhaseLabel::Parenchymal};
  CHECK(labels == expected);
  // agreement with exhaustive enumeration
  const auto brute = test::brute_force_decode(p, TransitionMatrix::standard());
  CHECK(brute.labels == expected);
}

TEST_CASE("uniform probabilities tie-break to non-contrast") {
  std::vector<PhaseProbabilities> p(4, probs(0.25, 0.25, 0.25, 0.25));
  const auto labels = decode_constrained(p, TransitionMatrix::standard());
  for (PhaseLabel l : labels) CHECK(l == PhaseLabel::NonContrast);
}

TEST_CASE("decoder matches exhaustive enumeration on random sequences") {
  const TransitionMatrix t = TransitionMatrix::standard();
  std::mt19937 rng(123);
  std::uniform_int_distribution<size_t> len(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_probs(rng, len(rng));
    const auto labels = decode_constrained(p, t);
    CHECK(t.permits(labels));
    double score = 0.0;
    for (size_t i = 0; i < p.size(); ++i) score += std::log(p[i][static_cast<int>(labels[i])]);
    const auto brute = test::brute_force_decode(p, t);
    CHECK(score == brute.score);
  }
}

TEST_CASE("decode is invariant to positive per-frame rescaling") {
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_probs(rng, 7);
    const auto labels = decode_constrained(p, TransitionMatrix::standard());
    for (auto& frame : p) {
      const double s = scale(rng);
      for (double& v : frame) v *= s;
    }
    CHECK(decode_constrained(p, TransitionMatrix::standard()) == labels);
  }
}

TEST_CASE("empty probability sequence throws") {
  try {
    decode_constrained({}, TransitionMatrix::standard());
    FAIL("expected EmptySequence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySequence);
  }
}

TEST_CASE("caller-supplied matrix without a valid path reports NoValidPath") {
  TransitionMatrix t;  // all transitions forbidden, including self loops
  std::vector<PhaseProbabilities> p(2, probs(0.25, 0.25, 0.25, 0.25));
  try {
    decode_constrained(p, t);
    FAIL("expected NoValidPath");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoValidPath);
  }
}

TEST_CASE("phase boundaries from decoded labels") {
  using PL = PhaseLabel;
  const std::vector<PL> a = {PL::NonContrast, PL::NonContrast, PL::Arterial, PL::Arterial,
                             PL::Parenchymal, PL::Parenchymal, PL::Venous};
  const PhaseBoundaries ba = phase_boundaries(a);
  CHECK(ba.first_arterial == 2);
  CHECK(ba.last_arterial == 3);
  CHECK(ba.last_parenchymal == 5);

  const std::vector<PL> b = {PL::Arterial, PL::Arterial, PL::Arterial};
  const PhaseBoundaries bb = phase_boundaries(b);
  CHECK(bb.first_arterial == 0);
  CHECK(bb.last_arterial == 2);
  CHECK(!bb.last_parenchymal.has_value());

  const std::vector<PL> c = {PL::NonContrast, PL::NonContrast, PL::NonContrast};
  const PhaseBoundaries bc = phase_boundaries(c);
  CHECK(!bc.first_arterial.has_value());
  CHECK(!bc.last_arterial.has_value());
  CHECK(!bc.last_parenchymal.has_value());
}

TEST_CASE("no-op augmentation params return the input bit for bit") {
  Acquisition acq = test::simple_acquisition(6, 24, 20, 0.8);
  acq.frames[0].at(5, 7) = 0.1;
  const Frame out = augment(acq.frames[0], AugmentParams{});
  CHECK(out.intensities == acq.frames[0].intensities);
}

TEST_CASE("flip-only augmentation mirrors pixels exactly") {
  Frame f(16, 12, 1.0);
  f.at(3, 5) = 0.2;
  AugmentParams params;
  params.flip_horizontal = true;
  const Frame out = augment(f, params);
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) CHECK(out.at(x, y) == f.at(f.width - 1 - x, y));
  }
}

TEST_CASE("ten-degree rotation moves a dot centroid by ten degrees") {
  const int w = 64, h = 64;
  Frame f(w, h, 1.0);
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const int dot_x = 48, dot_y = 31;  // off-center dark dot
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) f.at(dot_x + dx, dot_y + dy) = 0.0;
  }
  AugmentParams params;
  params.rotate = true;
  params.angle_rad = 10.0 * M_PI / 180.0;
  const Frame out = augment(f, params);

  double mass = 0.0, mx = 0.0, my = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double wgt = 1.0 - out.at(x, y);
      mass += wgt;
      mx += wgt * x;
      my += wgt * y;
    }
  }
  REQUIRE(mass > 0.0);
  mx /= mass;
  my /= mass;
  const double c = std::cos(params.angle_rad), s = std::sin(params.angle_rad);
  const double ex = c * (dot_x - cx) - s * (dot_y - cy) + cx;
  const double ey = s * (dot_x - cx) + c * (dot_y - cy) + cy;
  CHECK(std::hypot(mx - ex, my - ey) < 0.75);
}

TEST_CASE("training separates two feature clusters") {
  // Two acquisitions whose frames are constant bright vs dark-ish: bright
  // labelled arterial, dark labelled venous. Linearly separable.
  TrainingSample bright, dark;
  bright.acquisition = test::simple_acquisition(8, 16, 16, 0.9);
  bright.labels.assign(8, PhaseLabel::Arterial);
  dark.acquisition = test::simple_acquisition(8, 16, 16, 0.2);
  dark.labels.assign(8, PhaseLabel::Venous);

  TrainConfig cfg;
  const PhaseModel model = train(cfg, {bright, dark}, 0);
  const auto pb = predict_probabilities(model, bright.acquisition);
  const auto pd = predict_probabilities(model, dark.acquisition);
  for (const auto& p : pb) {
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 1);
  }
  for (const auto& p : pd) {
    CHECK(std::max_element(p.begin(), p.end()) - p.begin() == 3);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  TrainingSample s;
  s.acquisition = test::simple_acquisition(8, 16, 16, 0.6);
  for (int i = 0; i < 4; ++i) s.acquisition.frames[i + 4] = Frame(16, 16, 0.3);
  s.labels.assign(4, PhaseLabel::NonContrast);
  s.labels.insert(s.labels.end(), 4, PhaseLabel::Arterial);

  TrainConfig cfg;
  cfg.augment_copies = 2;
  const PhaseModel a = train(cfg, {s}, 42);
  const PhaseModel b = train(cfg, {s}, 42);
  CHECK(a.weights == b.weights);
  CHECK(a.bias == b.bias);
  CHECK(a.feature_means == b.feature_means);
  CHECK(a.feature_stds == b.feature_stds);
}

TEST_CASE("label length mismatch is rejected at training time") {
  TrainingSample s;
  s.acquisition = test::simple_acquisition(8);
  s.labels.assign(5, PhaseLabel::Arterial);
  try {
    train(TrainConfig{}, {s}, 0);
    FAIL("expected LabelLengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LabelLengthMismatch);
  }
}

TEST_CASE("empty dataset is rejected") {
  try {
    train(TrainConfig{}, {}, 0);
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
}
