#include "reperfq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace reperfq {
namespace metrics {

namespace {

std::vector<double> midranks(std::span<const double> values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::DegenerateInput,
          "zero rank variance: correlation undefined");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

int etici_rank(const std::string& grade) {
  if (grade == "0") return 0;
  if (grade == "1") return 1;
  if (grade == "2A") return 2;
  if (grade == "2B") return 3;
  if (grade == "2C") return 4;
  if (grade == "3") return 5;
  fail(ErrorCode::ParseError, "unknown eTICI grade '" + grade + "'");
}

double average_accuracy(std::span<const PhaseLabel> predicted,
                        std::span<const PhaseLabel> reference) {
  require(predicted.size() == reference.size(), ErrorCode::LengthMismatch,
          "label sequences differ in length");
  require(!predicted.empty(), ErrorCode::EmptyInput, "empty label sequences");
  size_t correct = 0;
  for (size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == reference[i];
  return static_cast<double>(correct) / predicted.size();
}

double weighted_f1(std::span<const PhaseLabel> predicted, std::span<const PhaseLabel> reference) {
  require(predicted.size() == reference.size(), ErrorCode::LengthMismatch,
          "label sequences differ in length");
  require(!predicted.empty(), ErrorCode::EmptyInput, "empty label sequences");
  std::array<int64_t, kPhaseCount> tp{}, fp{}, fn{}, support{};
  for (size_t i = 0; i < predicted.size(); ++i) {
    const int p = static_cast<int>(predicted[i]);
    const int r = static_cast<int>(reference[i]);
    ++support[r];
    if (p == r) {
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[r];
    }
  }
  double weighted = 0.0;
  int64_t total_support = 0;
  for (int c = 0; c < kPhaseCount; ++c) {
    if (support[c] == 0) continue;  // classes absent from the reference are excluded
    const double precision = tp[c] + fp[c] > 0 ? static_cast<double>(tp[c]) / (tp[c] + fp[c]) : 0.0;
    const double recall = static_cast<double>(tp[c]) / (tp[c] + fn[c]);
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    weighted += static_cast<double>(support[c]) * f1;
    total_support += support[c];
  }
  return weighted / static_cast<double>(total_support);
}

namespace {

void accumulate_boundary(BoundaryStats& stats, std::span<const PhaseBoundaries> predicted,
                         std::span<const PhaseBoundaries> reference,
                         std::span<const std::vector<double>> times,
                         std::optional<int> PhaseBoundaries::* field) {
  const size_t n = predicted.size();
  int matches = 0;
  std::vector<double> offsets;
  std::vector<double> offsets_sec;
  int over_one = 0;
  for (size_t i = 0; i < n; ++i) {
    const auto& p = predicted[i].*field;
    const auto& r = reference[i].*field;
    if (!p && !r) {
      ++matches;
      continue;
    }
    if (!p || !r) {
      ++stats.absence_mismatches;
      continue;
    }
    const int offset = std::abs(*p - *r);
    if (offset == 0) ++matches;
    if (offset > 1) ++over_one;
    offsets.push_back(offset);
    if (i < times.size() && !times[i].empty()) {
      const auto& t = times[i];
      if (*p >= 0 && *r >= 0 && static_cast<size_t>(*p) < t.size() &&
          static_cast<size_t>(*r) < t.size()) {
        offsets_sec.push_back(std::abs(t[*p] - t[*r]));
      }
    }
  }
  stats.exact_accuracy = n > 0 ? static_cast<double>(matches) / n : 0.0;
  stats.compared_pairs = static_cast<int>(offsets.size());
  if (!offsets.empty()) {
    const double mean = std::accumulate(offsets.begin(), offsets.end(), 0.0) / offsets.size();
    double var = 0.0;
    for (double o : offsets) var += (o - mean) * (o - mean);
    stats.mean_offset_frames = mean;
    stats.std_offset_frames = std::sqrt(var / offsets.size());
    stats.fraction_over_one_frame = static_cast<double>(over_one) / offsets.size();
  }
  if (!offsets_sec.empty()) {
    const double mean =
        std::accumulate(offsets_sec.begin(), offsets_sec.end(), 0.0) / offsets_sec.size();
    double var = 0.0;
    for (double o : offsets_sec) var += (o - mean) * (o - mean);
    stats.mean_offset_seconds = mean;
    stats.std_offset_seconds = std::sqrt(var / offsets_sec.size());
  }
}

}  // namespace

OffsetStats boundary_offsets(std::span<const PhaseBoundaries> predicted,
                             std::span<const PhaseBoundaries> reference,
                             std::span<const std::vector<double>> times) {
  require(predicted.size() == reference.size(), ErrorCode::LengthMismatch,
          "boundary lists differ in length");
  OffsetStats stats;
  accumulate_boundary(stats.first_arterial, predicted, reference, times,
                      &PhaseBoundaries::first_arterial);
  accumulate_boundary(stats.last_arterial, predicted, reference, times,
                      &PhaseBoundaries::last_arterial);
  accumulate_boundary(stats.last_parenchymal, predicted, reference, times,
                      &PhaseBoundaries::last_parenchymal);
  return stats;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y,
                        int n_permutations, uint64_t seed) {
  require(x.size() == y.size(), ErrorCode::LengthMismatch, "series differ in length");
  require(x.size() >= 3, ErrorCode::LengthMismatch, "spearman needs at least 3 samples");
  const std::vector<double> rx = midranks(x);
  std::vector<double> ry = midranks(y);

  SpearmanResult result;
  result.rho = pearson(rx, ry);

  std::mt19937_64 rng(seed);
  int at_least = 0;
  const double target = std::abs(result.rho);
  for (int p = 0; p < n_permutations; ++p) {
    std::shuffle(ry.begin(), ry.end(), rng);
    if (std::abs(pearson(rx, ry)) >= target) ++at_least;
  }
  result.p_value = (1.0 + at_least) / (n_permutations + 1.0);
  return result;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size(), ErrorCode::LengthMismatch,
          "scores and labels differ in length");
  int64_t positives = 0, negatives = 0;
  for (int l : labels) (l != 0 ? positives : negatives)++;
  require(positives > 0 && negatives > 0, ErrorCode::SingleClass,
          "roc_auc needs both classes present");
  const std::vector<double> ranks = midranks(scores);
  double rank_sum = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) rank_sum += ranks[i];
  }
  const double u = rank_sum - static_cast<double>(positives) * (positives + 1) / 2.0;
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

namespace {

struct FitResult {
  std::vector<double> weights;  // standardized space
  double bias = 0.0;
  std::vector<double> means;
  std::vector<double> stds;
};

constexpr double kL2 = 1e-4;

FitResult fit_logistic(const std::vector<std::vector<double>>& x, std::span<const int> y,
                       const std::vector<size_t>& rows) {
  const size_t d = x.front().size();
  const size_t n = rows.size();

  FitResult fit;
  fit.means.assign(d, 0.0);
  fit.stds.assign(d, 0.0);
  for (size_t j = 0; j < d; ++j) {
    double sum = 0.0, sum_sq = 0.0;
    for (size_t r : rows) {
      sum += x[r][j];
      sum_sq += x[r][j] * x[r][j];
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    fit.means[j] = mean;
    // Zero-variance guard: the standardized column becomes all zero and its
    // coefficient stays exactly 0.
    fit.stds[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  std::vector<int> yy(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) z[i][j] = (x[rows[i]][j] - fit.means[j]) / fit.stds[j];
    yy[i] = y[rows[i]] != 0 ? 1 : 0;
  }

  std::vector<double> w(d, 0.0);
  double b = 0.0;
  auto objective_grad = [&](const std::vector<double>& wv, double bv,
                            std::vector<double>* gw, double* gb) {
    double obj = 0.0;
    if (gw) {
      std::fill(gw->begin(), gw->end(), 0.0);
      *gb = 0.0;
    }
    for (size_t i = 0; i < n; ++i) {
      double s = bv;
      for (size_t j = 0; j < d; ++j) s += wv[j] * z[i][j];
      // log(1 + e^s) evaluated stably
      const double log1pe = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
      obj += log1pe - yy[i] * s;
      if (gw) {
        const double p = 1.0 / (1.0 + std::exp(-s));
        const double g = (p - yy[i]) / n;
        *gb += g;
        for (size_t j = 0; j < d; ++j) (*gw)[j] += g * z[i][j];
      }
    }
    obj /= n;
    for (size_t j = 0; j < d; ++j) obj += 0.5 * kL2 * wv[j] * wv[j];
    obj += 0.5 * kL2 * bv * bv;
    if (gw) {
      for (size_t j = 0; j < d; ++j) (*gw)[j] += kL2 * wv[j];
      *gb += kL2 * bv;
    }
    return obj;
  };

  std::vector<double> gw(d);
  double gb = 0.0;
  double obj = objective_grad(w, b, &gw, &gb);
  double step = 1.0;
  const int max_iters = 5000;
  double grad_norm = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    grad_norm = gb * gb;
    for (double g : gw) grad_norm += g * g;
    grad_norm = std::sqrt(grad_norm);
    if (grad_norm <= 1e-6) break;

    std::vector<double> w_new(d);
    double b_new = 0.0;
    double obj_new = 0.0;
    for (;;) {
      for (size_t j = 0; j < d; ++j) w_new[j] = w[j] - step * gw[j];
      b_new = b - step * gb;
      obj_new = objective_grad(w_new, b_new, nullptr, nullptr);
      if (obj_new <= obj - 1e-4 * step * grad_norm * grad_norm || step < 1e-12) break;
      step *= 0.5;
    }
    w = w_new;
    b = b_new;
    obj = objective_grad(w, b, &gw, &gb);
    step = std::min(step * 2.0, 64.0);
  }
  grad_norm = gb * gb;
  for (double g : gw) grad_norm += g * g;
  grad_norm = std::sqrt(grad_norm);
  require(grad_norm <= 1e-4, ErrorCode::NonConvergence,
          "logistic regression did not converge");

  fit.weights = w;
  fit.bias = b;
  return fit;
}

double predict_logistic(const FitResult& fit, const std::vector<double>& x) {
  double s = fit.bias;
  for (size_t j = 0; j < x.size(); ++j) {
    s += fit.weights[j] * (x[j] - fit.means[j]) / fit.stds[j];
  }
  return 1.0 / (1.0 + std::exp(-s));
}

}  // namespace

LogisticResult logistic_loocv(const std::vector<std::vector<double>>& features,
                              std::span<const int> labels) {
  const size_t n = features.size();
  require(n == labels.size(), ErrorCode::LengthMismatch,
          "features and labels differ in length");
  require(n >= 10, ErrorCode::EmptyInput, "logistic_loocv needs at least 10 samples");
  int positives = 0;
  for (int l : labels) positives += l != 0;
  require(positives > 0 && positives < static_cast<int>(n), ErrorCode::SingleClass,
          "logistic_loocv needs both classes present");
  const size_t d = features.front().size();
  for (const auto& row : features) {
    require(row.size() == d, ErrorCode::LengthMismatch, "ragged feature matrix");
  }

  std::vector<double> loo_probs(n);
  std::vector<size_t> rows;
  rows.reserve(n - 1);
  for (size_t held = 0; held < n; ++held) {
    rows.clear();
    for (size_t i = 0; i < n; ++i) {
      if (i != held) rows.push_back(i);
    }
    const FitResult fit = fit_logistic(features, labels, rows);
    loo_probs[held] = predict_logistic(fit, features[held]);
  }

  LogisticResult result;
  std::vector<int> binary(labels.begin(), labels.end());
  result.auc = roc_auc(loo_probs, binary);
  int correct = 0;
  for (size_t i = 0; i < n; ++i) {
    correct += (loo_probs[i] >= 0.5 ? 1 : 0) == (labels[i] != 0 ? 1 : 0);
  }
  result.accuracy = static_cast<double>(correct) / n;

  std::vector<size_t> all(n);
  std::iota(all.begin(), all.end(), size_t{0});
  const FitResult full = fit_logistic(features, labels, all);
  result.odds_ratios.reserve(d);
  for (double w : full.weights) result.odds_ratios.push_back(std::exp(w));
  return result;
}

int nihss_shift(int baseline, int followup) {
  require(baseline >= 0 && baseline <= 42 && followup >= 0 && followup <= 42,
          ErrorCode::OutOfRange, "NIHSS scores must be in [0,42]");
  return baseline - followup;
}

}  // namespace metrics
}  // namespace reperfq
