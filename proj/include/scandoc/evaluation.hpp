#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scandoc/segmenter.hpp"

namespace scandoc::eval {

struct ScoredInstance {
  seg::Instance instance;
  std::array<double, 3> prob{};  // [AHI, SaO2, Other]
  seg::Label gold = seg::Label::kOther;
};

// Argmax with class-order precedence AHI > SaO2 > Other on ties.
int predicted_class(const std::array<double, 3>& prob);

struct SegmentMetrics {
  double recall = 0.0;
  bool recall_defined = true;
  double precision = 0.0;
  bool precision_defined = true;
  std::size_t tp = 0, fp = 0, fn = 0;
};

SegmentMetrics segment_metrics(const std::vector<ScoredInstance>& scored, seg::Label cls);

// Pair-counting AUC with the 0.5 tie convention (Mann-Whitney).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// (fpr, tpr) points of the empirical ROC curve, one per distinct threshold.
std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels);

// DeLong placement values (fast midrank path): V10 per positive, V01 per negative.
struct PlacementValues {
  std::vector<double> v10;
  std::vector<double> v01;
  double auc = 0.0;
};
PlacementValues placement_values(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

struct DelongResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double cov_ab = 0.0;
  double var_diff = 0.0;
  double z = 0.0;
  double p_two_sided = 1.0;
};

// Paired comparison of correlated AUROCs over identical instances.
DelongResult delong(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                    const std::vector<int>& labels);

// AUC confidence interval from the DeLong variance, clipped to [0,1].
std::pair<double, double> delong_ci(const std::vector<double>& scores,
                                    const std::vector<int>& labels, double level = 0.95);

// Highest prob[cls] wins; ties go to the earliest reading order (page, order key).
const ScoredInstance& select_document_value(const std::vector<ScoredInstance>& report_scored,
                                            seg::Label cls);

struct DocumentAccuracy {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// selections: report_id -> extracted value (nullopt when nothing was extracted).
DocumentAccuracy document_accuracy(
    const std::map<std::string, std::optional<double>>& selections,
    const std::vector<seg::GoldRecord>& gold, seg::Label cls, double epsilon = 1e-6);

DocumentAccuracy binomial_accuracy(std::size_t correct, std::size_t total, double level = 0.95);

struct ChiSquare {
  double statistic = 0.0;
  double p = 1.0;
};

// Pearson 2x2 without continuity correction.
ChiSquare chi_square_2x2(std::size_t correct_a, std::size_t n_a, std::size_t correct_b,
                         std::size_t n_b);

std::vector<double> bonferroni(const std::vector<double>& p_values);

// Standard normal helpers used by the tests as well.
double normal_cdf(double x);
double normal_quantile(double p);
double chi2_sf_1df(double x);

struct ClassReport {
  double recall = 0.0;
  bool recall_defined = true;
  double precision = 0.0;
  bool precision_defined = true;
  double auroc = 0.0;
  double auroc_ci_low = 0.0;
  double auroc_ci_high = 0.0;
  DocumentAccuracy document;
};

struct Comparison {
  std::string pair;
  std::string metric;  // "auroc:AHI", "docacc:SaO2", ...
  double statistic = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
};

struct EvalReport {
  std::map<std::string, ClassReport> per_class;  // keys "AHI", "SaO2"
  std::vector<Comparison> comparisons;

  std::string to_json() const;
  static EvalReport from_json(const std::string& json_text);
  std::string to_text() const;
};

}  // namespace scandoc::eval
