#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace maculab {

/// The unit of every evaluation statistic: one scored image with its truth
/// and (optionally) the underlying thickness.
struct ScoredCase {
  std::string patient_id;
  std::string image_id;
  double score = 0;
  int truth = 0;
  std::optional<double> thickness_um;
};

struct ConfusionCounts {
  long tp = 0, fp = 0, fn = 0, tn = 0;
  long total() const { return tp + fp + fn + tn; }
};

struct RocPoint {
  double fpr = 0, tpr = 0, threshold = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // fpr ascending, (0,0) and (1,1) included
  double auc = 0;
};

/// Sweeps every distinct score as a threshold (predict positive iff
/// score >= t) and integrates by the trapezoid rule. Tied pairs contribute
/// one half, so the area equals the Mann-Whitney pair statistic. Throws on
/// single-class input.
RocCurve roc_and_auc(const std::vector<ScoredCase>& cases);

/// Positive prediction iff score >= threshold (inclusive).
ConfusionCounts confusion_at(const std::vector<ScoredCase>& cases, double threshold);

/// Metrics with undefined denominators are flagged absent, never reported
/// as zero.
struct SummaryMetrics {
  std::optional<double> sensitivity, specificity, ppv, npv, accuracy;
};
SummaryMetrics summary_metrics(const ConfusionCounts& counts);

/// Cohen's kappa from the 2x2 table; nullopt when the chance agreement is
/// degenerate (p_e = 1).
std::optional<double> cohens_kappa(const ConfusionCounts& counts);

enum class MatchKind { sensitivity, specificity };

struct OperatingPoint {
  double threshold = 0;
  double achieved_sensitivity = 0;
  double achieved_specificity = 0;
  bool target_attained = true;
};

/// Sensitivity matching returns the largest threshold whose sensitivity is
/// still >= target (which maximizes specificity subject to that floor);
/// specificity matching is the symmetric rule.
OperatingPoint match_operating_point(const std::vector<ScoredCase>& cases, MatchKind kind,
                                     double target);

using CaseMetric = std::function<std::optional<double>(const std::vector<ScoredCase>&)>;

struct BootstrapResult {
  double point_estimate = 0;
  double ci_low = 0, ci_high = 0;
  int replicates = 0;
  uint64_t seed = 0;
};

/// Patient-level bootstrap: each replicate resamples patients (not images)
/// with replacement, carrying all of a patient's images. CI bounds are the
/// nearest-rank 2.5 / 97.5 percentiles of the replicate distribution.
/// Replicates are evaluated in parallel with per-replicate streams; the
/// result is identical for any thread count.
BootstrapResult bootstrap_ci(const std::vector<ScoredCase>& cases, const CaseMetric& metric,
                             int replicates = 2000, uint64_t seed = 0, int n_threads = 0);

using BinaryMetric =
    std::function<std::optional<double>(const std::vector<int>& predictions,
                                        const std::vector<int>& truth)>;

struct PermutationResult {
  double observed_difference = 0;
  double p_value = 1;
  int permutations = 0;
  uint64_t seed = 0;
};

/// Paired label-swap permutation test on the common case set: each
/// permutation independently swaps the (model, grader) prediction pair per
/// case with probability one half. p = (1 + #{|perm| >= |observed|}) /
/// (1 + permutations), so p is never zero.
PermutationResult permutation_test(const std::vector<int>& model_pred,
                                   const std::vector<int>& grader_pred,
                                   const std::vector<int>& truth, const BinaryMetric& metric,
                                   int permutations = 2000, uint64_t seed = 0, int n_threads = 0);

/// Majority fusion over gradable votes (nullopt = ungradable); positive on
/// ties (conservative referral). Throws when no vote is gradable.
bool majority_vote(const std::vector<std::optional<bool>>& votes);

struct ErrorThicknessProfile {
  std::optional<double> fp_fraction_above;  // FPs with thickness > fp_cut
  std::optional<double> fn_fraction_below;  // FNs with thickness < fn_cut
  long fp_count = 0;
  long fn_count = 0;
};

/// Thickness distribution of the errors at a fixed score threshold; every
/// case must carry a thickness.
ErrorThicknessProfile error_thickness_profile(const std::vector<ScoredCase>& cases,
                                              double threshold, double fp_cut_um = 225,
                                              double fn_cut_um = 275);

/// Nearest-rank percentile: the value at rank ceil(p/100 * n) of the sorted
/// sample (1-based), clamped to the ends.
double nearest_rank_percentile(std::vector<double> values, double percentile);

}  // namespace maculab
