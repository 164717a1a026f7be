#include "maculab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "maculab/parallel.hpp"
#include "maculab/rng.hpp"

namespace maculab {

namespace {

void require_two_classes(const std::vector<ScoredCase>& cases, const char* who) {
  long pos = 0, neg = 0;
  for (const auto& c : cases) (c.truth ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw std::invalid_argument(std::string(who) + ": needs at least one positive and one negative");
}

}  // namespace

RocCurve roc_and_auc(const std::vector<ScoredCase>& cases) {
  if (cases.empty()) throw std::invalid_argument("roc_and_auc: no cases");
  require_two_classes(cases, "roc_and_auc");

  std::vector<std::pair<double, int>> scored;
  scored.reserve(cases.size());
  long n_pos = 0, n_neg = 0;
  for (const auto& c : cases) {
    if (!std::isfinite(c.score)) throw std::invalid_argument("roc_and_auc: non-finite score");
    scored.emplace_back(c.score, c.truth);
    (c.truth ? n_pos : n_neg)++;
  }
  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, scored.front().first + 1.0});  // nothing predicted positive

  long cum_tp = 0, cum_fp = 0;
  size_t i = 0;
  while (i < scored.size()) {
    const double s = scored[i].first;
    while (i < scored.size() && scored[i].first == s) {
      (scored[i].second ? cum_tp : cum_fp)++;
      ++i;
    }
    curve.points.push_back({static_cast<double>(cum_fp) / n_neg,
                            static_cast<double>(cum_tp) / n_pos, s});
  }

  double auc = 0.0;
  for (size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

ConfusionCounts confusion_at(const std::vector<ScoredCase>& cases, double threshold) {
  if (cases.empty()) throw std::invalid_argument("confusion_at: no cases");
  ConfusionCounts c;
  for (const auto& sc : cases) {
    const bool pred = sc.score >= threshold;
    if (pred && sc.truth)
      c.tp++;
    else if (pred && !sc.truth)
      c.fp++;
    else if (!pred && sc.truth)
      c.fn++;
    else
      c.tn++;
  }
  return c;
}

SummaryMetrics summary_metrics(const ConfusionCounts& c) {
  SummaryMetrics m;
  auto ratio = [](long num, long den) -> std::optional<double> {
    if (den <= 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.ppv = ratio(c.tp, c.tp + c.fp);
  m.npv = ratio(c.tn, c.tn + c.fn);
  m.accuracy = ratio(c.tp + c.tn, c.total());
  return m;
}

std::optional<double> cohens_kappa(const ConfusionCounts& c) {
  const long n = c.total();
  if (n <= 0) throw std::invalid_argument("cohens_kappa: empty table");
  const double nd = static_cast<double>(n);
  const double p_o = static_cast<double>(c.tp + c.tn) / nd;
  const double pred_pos = static_cast<double>(c.tp + c.fp) / nd;
  const double truth_pos = static_cast<double>(c.tp + c.fn) / nd;
  const double p_e = pred_pos * truth_pos + (1.0 - pred_pos) * (1.0 - truth_pos);
  if (p_e >= 1.0) return std::nullopt;  // degenerate marginals
  return (p_o - p_e) / (1.0 - p_e);
}

OperatingPoint match_operating_point(const std::vector<ScoredCase>& cases, MatchKind kind,
                                     double target) {
  if (target < 0.0 || target > 1.0)
    throw std::invalid_argument("match_operating_point: target must be in [0,1]");
  require_two_classes(cases, "match_operating_point");

  // Candidate thresholds: every distinct score plus one above the maximum.
  std::vector<double> thresholds;
  thresholds.reserve(cases.size() + 1);
  for (const auto& c : cases) thresholds.push_back(c.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(thresholds.back() + 1.0);

  std::optional<OperatingPoint> best;
  for (const double t : thresholds) {
    const SummaryMetrics m = summary_metrics(confusion_at(cases, t));
    OperatingPoint op{t, m.sensitivity.value_or(0.0), m.specificity.value_or(0.0), true};
    if (kind == MatchKind::sensitivity) {
      // sensitivity is non-increasing in t: keep the largest t on the floor
      if (op.achieved_sensitivity >= target) best = op;
    } else {
      // specificity is non-decreasing in t: keep the smallest t on the floor
      if (op.achieved_specificity >= target && !best) best = op;
    }
  }
  if (best) return *best;

  // Unattainable target; return the friendliest boundary, flagged.
  const double t = kind == MatchKind::sensitivity ? thresholds.front() : thresholds.back();
  const SummaryMetrics m = summary_metrics(confusion_at(cases, t));
  return {t, m.sensitivity.value_or(0.0), m.specificity.value_or(0.0), false};
}

double nearest_rank_percentile(std::vector<double> values, double percentile) {
  if (values.empty()) throw std::invalid_argument("nearest_rank_percentile: empty sample");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  long rank = static_cast<long>(std::ceil(percentile / 100.0 * n));
  rank = std::max<long>(1, std::min<long>(rank, values.size()));
  return values[static_cast<size_t>(rank - 1)];
}

BootstrapResult bootstrap_ci(const std::vector<ScoredCase>& cases, const CaseMetric& metric,
                             int replicates, uint64_t seed, int n_threads) {
  if (replicates < 1) throw std::invalid_argument("bootstrap_ci: replicates must be >= 1");

  // Patients in first-appearance order, each owning its image indices.
  std::vector<std::vector<size_t>> patient_cases;
  {
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < cases.size(); ++i) {
      const auto [it, inserted] = index.emplace(cases[i].patient_id, patient_cases.size());
      if (inserted) patient_cases.emplace_back();
      patient_cases[it->second].push_back(i);
    }
  }
  if (patient_cases.size() < 2)
    throw std::invalid_argument("bootstrap_ci: needs at least 2 distinct patients");

  const auto point = metric(cases);
  if (!point) throw std::invalid_argument("bootstrap_ci: metric undefined on the full sample");

  const size_t n_patients = patient_cases.size();
  std::vector<std::optional<double>> values(static_cast<size_t>(replicates));
  parallel_for(replicates, n_threads, [&](int r) {
    Rng rng = Rng(seed).derive("replicate", static_cast<uint64_t>(r));
    std::vector<ScoredCase> sample;
    sample.reserve(cases.size());
    for (size_t p = 0; p < n_patients; ++p) {
      const auto& idxs = patient_cases[rng.uniform_int(n_patients)];
      for (const size_t i : idxs) sample.push_back(cases[i]);
    }
    values[static_cast<size_t>(r)] = metric(sample);
  });

  std::vector<double> defined;
  defined.reserve(values.size());
  for (const auto& v : values)
    if (v) defined.push_back(*v);
  const auto undefined = static_cast<double>(values.size() - defined.size());
  if (undefined > 0.2 * static_cast<double>(replicates))
    throw std::runtime_error("bootstrap_ci: metric undefined on more than 20% of replicates");

  BootstrapResult out;
  out.point_estimate = *point;
  out.ci_low = nearest_rank_percentile(defined, 2.5);
  out.ci_high = nearest_rank_percentile(defined, 97.5);
  out.replicates = replicates;
  out.seed = seed;
  return out;
}

PermutationResult permutation_test(const std::vector<int>& model_pred,
                                   const std::vector<int>& grader_pred,
                                   const std::vector<int>& truth, const BinaryMetric& metric,
                                   int permutations, uint64_t seed, int n_threads) {
  const size_t n = model_pred.size();
  if (n == 0) throw std::invalid_argument("permutation_test: empty case intersection");
  if (grader_pred.size() != n || truth.size() != n)
    throw std::invalid_argument("permutation_test: prediction sets must cover the same cases");
  if (permutations < 1) throw std::invalid_argument("permutation_test: permutations must be >= 1");

  const auto m_model = metric(model_pred, truth);
  const auto m_grader = metric(grader_pred, truth);
  if (!m_model || !m_grader)
    throw std::invalid_argument("permutation_test: metric undefined on the observed data");
  const double observed = *m_model - *m_grader;

  std::vector<int> exceed(static_cast<size_t>(permutations), 0);
  parallel_for(permutations, n_threads, [&](int r) {
    Rng rng = Rng(seed).derive("perm", static_cast<uint64_t>(r));
    std::vector<int> a(n), b(n);
    for (size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.5)) {
        a[i] = grader_pred[i];
        b[i] = model_pred[i];
      } else {
        a[i] = model_pred[i];
        b[i] = grader_pred[i];
      }
    }
    const auto pa = metric(a, truth);
    const auto pb = metric(b, truth);
    if (!pa || !pb) return;  // undefined permutation never counts as exceeding
    if (std::fabs(*pa - *pb) >= std::fabs(observed)) exceed[static_cast<size_t>(r)] = 1;
  });

  long count = 0;
  for (const int e : exceed) count += e;

  PermutationResult out;
  out.observed_difference = observed;
  out.p_value = static_cast<double>(1 + count) / static_cast<double>(1 + permutations);
  out.permutations = permutations;
  out.seed = seed;
  return out;
}

bool majority_vote(const std::vector<std::optional<bool>>& votes) {
  long gradable = 0, positive = 0;
  for (const auto& v : votes) {
    if (!v) continue;
    ++gradable;
    if (*v) ++positive;
  }
  if (gradable == 0) throw std::invalid_argument("majority_vote: no gradable assessment");
  // strictly more than half is positive; an even split refers (conservative)
  return 2 * positive >= gradable;
}

ErrorThicknessProfile error_thickness_profile(const std::vector<ScoredCase>& cases,
                                              double threshold, double fp_cut_um,
                                              double fn_cut_um) {
  ErrorThicknessProfile out;
  long fp_above = 0, fn_below = 0;
  for (const auto& c : cases) {
    if (!c.thickness_um)
      throw std::invalid_argument("error_thickness_profile: case lacks thickness: " + c.image_id);
    const bool pred = c.score >= threshold;
    if (pred && !c.truth) {
      out.fp_count++;
      if (*c.thickness_um > fp_cut_um) fp_above++;
    } else if (!pred && c.truth) {
      out.fn_count++;
      if (*c.thickness_um < fn_cut_um) fn_below++;
    }
  }
  if (out.fp_count > 0)
    out.fp_fraction_above = static_cast<double>(fp_above) / static_cast<double>(out.fp_count);
  if (out.fn_count > 0)
    out.fn_fraction_below = static_cast<double>(fn_below) / static_cast<double>(out.fn_count);
  return out;
}

}  // namespace maculab
