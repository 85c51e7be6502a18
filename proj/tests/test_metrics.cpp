#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "reperfq/metrics.hpp"

using namespace reperfq;
using namespace reperfq::metrics;
using PL = PhaseLabel;

TEST_CASE("exact predictions give accuracy and weighted F1 of one") {
  const std::vector<PL> labels = {PL::NonContrast, PL::Arterial, PL::Parenchymal, PL::Venous};
  CHECK(average_accuracy(labels, labels) == 1.0);
  CHECK(weighted_f1(labels, labels) == 1.0);
}

TEST_CASE("weighted F1 hand example: supports 3 and 1") {
  // class Arterial: P=1, R=2/3 -> F1 0.8; class Venous: F1 1; class
  // Parenchymal has no reference support and is excluded.
  const std::vector<PL> ref = {PL::Arterial, PL::Arterial, PL::Arterial, PL::Venous};
  const std::vector<PL> pred = {PL::Arterial, PL::Arterial, PL::Parenchymal, PL::Venous};
  CHECK(weighted_f1(pred, ref) == doctest::Approx(0.85).epsilon(1e-12));
}

TEST_CASE("weighted F1 matches the confusion-matrix oracle on random labelings") {
  std::mt19937 rng(19);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<PL> pred(200), ref(200);
    for (size_t i = 0; i < pred.size(); ++i) {
      pred[i] = static_cast<PL>(cls(rng));
      ref[i] = static_cast<PL>(cls(rng));
    }
    CHECK(weighted_f1(pred, ref) ==
          doctest::Approx(test::confusion_weighted_f1(pred, ref)).epsilon(1e-12));
    size_t correct = 0;
    for (size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ref[i];
    CHECK(average_accuracy(pred, ref) == static_cast<double>(correct) / pred.size());
  }
}

TEST_CASE("boundary offsets: identical, shifted, absent") {
  PhaseBoundaries a;
  a.first_arterial = 2;
  a.last_arterial = 4;
  a.last_parenchymal = 6;

  SUBCASE("identical boundaries are exact") {
    const std::vector<PhaseBoundaries> v = {a, a};
    const OffsetStats stats = boundary_offsets(v, v);
    CHECK(stats.first_arterial.exact_accuracy == 1.0);
    CHECK(stats.first_arterial.mean_offset_frames == 0.0);
    CHECK(stats.last_parenchymal.exact_accuracy == 1.0);
  }

  SUBCASE("one-frame shift yields offset one") {
    PhaseBoundaries b = a;
    b.first_arterial = 3;
    const std::vector<PhaseBoundaries> pred = {b};
    const std::vector<PhaseBoundaries> ref = {a};
    const OffsetStats stats = boundary_offsets(pred, ref);
    CHECK(stats.first_arterial.mean_offset_frames == 1.0);
    CHECK(stats.first_arterial.exact_accuracy == 0.0);
    CHECK(stats.first_arterial.fraction_over_one_frame == 0.0);
  }

  SUBCASE("phase absent on one side is an absence mismatch, excluded from means") {
    PhaseBoundaries b = a;
    b.last_parenchymal.reset();
    const std::vector<PhaseBoundaries> pred = {b, a};
    const std::vector<PhaseBoundaries> ref = {a, a};
    const OffsetStats stats = boundary_offsets(pred, ref);
    CHECK(stats.last_parenchymal.absence_mismatches == 1);
    CHECK(stats.last_parenchymal.compared_pairs == 1);
    CHECK(stats.last_parenchymal.mean_offset_frames == 0.0);
    CHECK(stats.last_parenchymal.exact_accuracy == 0.5);
  }

  SUBCASE("seconds use frame times when available") {
    PhaseBoundaries b = a;
    b.first_arterial = 3;
    const std::vector<PhaseBoundaries> pred = {b};
    const std::vector<PhaseBoundaries> ref = {a};
    const std::vector<std::vector<double>> times = {{0.0, 0.5, 1.0, 1.75, 2.5, 3.5, 4.5}};
    const OffsetStats stats = boundary_offsets(pred, ref, times);
    REQUIRE(stats.first_arterial.mean_offset_seconds.has_value());
    CHECK(*stats.first_arterial.mean_offset_seconds == doctest::Approx(0.75));
  }
}

TEST_CASE("spearman of monotone relations") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<double> y_up = {2.0, 4.0, 5.0, 7.0, 11.0};
  std::vector<double> y_down = y_up;
  std::reverse(y_down.begin(), y_down.end());
  CHECK(spearman(x, y_up, 100, 0).rho == doctest::Approx(1.0));
  CHECK(spearman(x, y_down, 100, 0).rho == doctest::Approx(-1.0));
}

TEST_CASE("spearman rho matches the rank-then-pearson oracle") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> tie(0, 5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> x(20), y(20);
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] = tie(rng) / 5.0;  // ties on purpose
      y[i] = u(rng);
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    const SpearmanResult r = spearman(x, y, 10, trial);
    CHECK(r.rho == doctest::Approx(test::rank_pearson_rho(x, y)).epsilon(1e-12));
    CHECK(r.p_value > 0.0);
    CHECK(r.p_value <= 1.0);
  }
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(15), y(15);
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = u(rng);
    y[i] = u(rng);
  }
  const double base = spearman(x, y, 10, 0).rho;
  std::vector<double> xt = x;
  for (double& v : xt) v = std::exp(3.0 * v);
  CHECK(spearman(xt, y, 10, 0).rho == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("degenerate rank variance throws") {
  const std::vector<double> x = {1.0, 1.0, 1.0};
  const std::vector<double> y = {1.0, 2.0, 3.0};
  try {
    spearman(x, y, 10, 0);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateInput);
  }
}

TEST_CASE("roc_auc basics") {
  const std::vector<double> sep = {0.1, 0.2, 0.8, 0.9};
  const std::vector<int> labels = {0, 0, 1, 1};
  CHECK(roc_auc(sep, labels) == 1.0);
  const std::vector<double> ties = {0.5, 0.5, 0.5, 0.5};
  CHECK(roc_auc(ties, labels) == 0.5);
  try {
    roc_auc(sep, std::vector<int>{1, 1, 1, 1});
    FAIL("expected SingleClass");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClass);
  }
}

TEST_CASE("roc_auc equals the pairwise oracle and is rank invariant") {
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> scores(50);
    std::vector<int> labels(50);
    int pos = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      scores[i] = std::round(u(rng) * 20.0) / 20.0;  // ties likely
      labels[i] = coin(rng);
      pos += labels[i];
    }
    if (pos == 0 || pos == 50) continue;
    const double auc = roc_auc(scores, labels);
    CHECK(auc == doctest::Approx(test::pairwise_auc(scores, labels)).epsilon(1e-12));
    std::vector<double> transformed = scores;
    for (double& s : transformed) s = std::atan(5.0 * s);  // strictly increasing
    CHECK(roc_auc(transformed, labels) == doctest::Approx(auc).epsilon(1e-12));
  }
}

TEST_CASE("logistic LOOCV separates 1D separable data") {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) {
    x.push_back({static_cast<double>(i)});
    y.push_back(i >= 6 ? 1 : 0);
  }
  const LogisticResult r = logistic_loocv(x, y);
  CHECK(r.auc == 1.0);
  CHECK(r.accuracy >= 0.9);
}

TEST_CASE("logistic LOOCV on independent labels sits near chance") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    x.push_back({u(rng), u(rng)});
    y.push_back(i % 2);
  }
  const LogisticResult r = logistic_loocv(x, y);
  CHECK(r.auc > 0.3);
  CHECK(r.auc < 0.7);
}

TEST_CASE("zero-variance feature keeps an odds ratio of one") {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const double v = u(rng);
    x.push_back({v, 7.0});  // second feature constant
    y.push_back(v > 0.5 ? 1 : 0);
  }
  const LogisticResult r = logistic_loocv(x, y);
  REQUIRE(r.odds_ratios.size() == 2);
  CHECK(r.odds_ratios[1] == 1.0);
  CHECK(r.odds_ratios[0] > 1.0);
}

TEST_CASE("logistic LOOCV AUC tolerates affine feature rescaling") {
  std::mt19937 rng(47);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> x, x_scaled;
  std::vector<int> y;
  for (int i = 0; i < 30; ++i) {
    const double a = g(rng), b = g(rng);
    const int label = a + 0.5 * b + 0.3 * g(rng) > 0 ? 1 : 0;
    x.push_back({a, b});
    x_scaled.push_back({200.0 * a - 17.0, -0.01 * b + 3.0});
    y.push_back(label);
  }
  const double auc = logistic_loocv(x, y).auc;
  const double auc_scaled = logistic_loocv(x_scaled, y).auc;
  CHECK(auc_scaled == doctest::Approx(auc).epsilon(1e-3));
}

TEST_CASE("nihss shift arithmetic and range") {
  CHECK(nihss_shift(10, 4) == 6);
  CHECK(nihss_shift(5, 5) == 0);
  CHECK(nihss_shift(0, 42) == -42);
  try {
    nihss_shift(43, 0);
    FAIL("expected OutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfRange);
  }
}

TEST_CASE("etici grades map to ordinal ranks") {
  CHECK(etici_rank("0") == 0);
  CHECK(etici_rank("2A") == 2);
  CHECK(etici_rank("2B") == 3);
  CHECK(etici_rank("3") == 5);
  CHECK_THROWS_AS(etici_rank("2D"), Error);
}
