#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reperfq/types.hpp"

namespace reperfq {
namespace metrics {

/// Aggregate border-offset statistics for one boundary kind across a corpus.
struct BoundaryStats {
  double exact_accuracy = 0.0;     // both absent counts as a match
  double mean_offset_frames = 0.0; // over pairs where both sides have the phase
  double std_offset_frames = 0.0;
  std::optional<double> mean_offset_seconds;  // only over sequences with times
  std::optional<double> std_offset_seconds;
  double fraction_over_one_frame = 0.0;
  int absence_mismatches = 0;  // exactly one side lacks the phase
  int compared_pairs = 0;      // both sides have the phase
};

struct OffsetStats {
  BoundaryStats first_arterial;
  BoundaryStats last_arterial;
  BoundaryStats last_parenchymal;
};

/// One patient row of the outcome CSV.
struct OutcomeRecord {
  std::string patient_id;
  double auto_tici_ap = 0.0;
  double auto_tici_lat = 0.0;
  std::string etici;  // one of 0, 1, 2A, 2B, 2C, 3
  int mrs = 0;        // 0..6
  int nihss_bl = 0;
  int nihss_fu = 0;
};

/// Ordinal rank of an eTICI grade (0,1,2A,2B,2C,3 -> 0..5).
int etici_rank(const std::string& grade);

double average_accuracy(std::span<const PhaseLabel> predicted,
                        std::span<const PhaseLabel> reference);

/// Support-weighted mean of per-class F1 scores; classes absent from the
/// reference are excluded, and a class with no predictions and no recall
/// scores 0.
double weighted_f1(std::span<const PhaseLabel> predicted, std::span<const PhaseLabel> reference);

/// Border offsets over a corpus. times[i], when non-empty, are frame
/// acquisition times for sequence i; sequences without times are excluded
/// from the seconds averages. Pairs where exactly one side lacks a phase
/// count as absence mismatches and stay out of the offset means.
OffsetStats boundary_offsets(std::span<const PhaseBoundaries> predicted,
                             std::span<const PhaseBoundaries> reference,
                             std::span<const std::vector<double>> times = {});

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Midrank Spearman correlation with a seeded two-sided permutation test:
/// p = (1 + #{|rho_perm| >= |rho|}) / (n_permutations + 1).
SpearmanResult spearman(std::span<const double> x, std::span<const double> y,
                        int n_permutations = 10000, uint64_t seed = 0);

/// Rank-based (Mann-Whitney) AUC with midrank tie handling; labels are
/// 0/1 and both classes must be present.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct LogisticResult {
  double auc = 0.0;
  double accuracy = 0.0;              // 0.5-threshold accuracy of LOO probabilities
  std::vector<double> odds_ratios;    // exp of full-data standardized coefficients
};

/// L2-regularized (1e-4) binary logistic regression fit by gradient descent
/// with per-fold feature standardization, scored by leave-one-out
/// cross-validation.
LogisticResult logistic_loocv(const std::vector<std::vector<double>>& features,
                              std::span<const int> labels);

/// Baseline minus follow-up; both must lie in [0,42].
int nihss_shift(int baseline, int followup);

}  // namespace metrics
}  // namespace reperfq
