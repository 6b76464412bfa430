#include "scandoc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "scandoc/errors.hpp"
#include "scandoc/text.hpp"

namespace scandoc::eval {

using nlohmann::json;

int predicted_class(const std::array<double, 3>& prob) {
  int best = 0;
  for (int c = 1; c < 3; ++c) {
    if (prob[c] > prob[best]) best = c;
  }
  return best;
}

SegmentMetrics segment_metrics(const std::vector<ScoredInstance>& scored, seg::Label cls) {
  SegmentMetrics m;
  const int target = static_cast<int>(cls);
  for (const auto& s : scored) {
    const int pred = predicted_class(s.prob);
    const bool gold_pos = static_cast<int>(s.gold) == target;
    const bool pred_pos = pred == target;
    if (gold_pos && pred_pos) ++m.tp;
    else if (!gold_pos && pred_pos) ++m.fp;
    else if (gold_pos && !pred_pos) ++m.fn;
  }
  if (m.tp + m.fn == 0) {
    m.recall_defined = false;
  } else {
    m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  }
  if (m.tp + m.fp == 0) {
    m.precision_defined = false;
  } else {
    m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  return m;
}

namespace {

// Midranks (1-based, ties averaged) of v; exact halves, no fp surprises.
std::vector<double> midranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

void check_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw InvalidInputError("roc: scores/labels size mismatch or empty");
  }
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y == 1) has_pos = true;
    else if (y == 0) has_neg = true;
    else throw InvalidInputError("roc: labels must be 0/1");
  }
  if (!has_pos || !has_neg) {
    throw InvalidInputError("roc: both classes must be present");
  }
}

// Sample covariance with the 1/(n-1) convention used by DeLong.
double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (a[i] - ma) * (b[i] - mb);
  return acc / static_cast<double>(n - 1);
}

}  // namespace

PlacementValues placement_values(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  check_binary(scores, labels);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (labels[i] == 1 ? pos : neg).push_back(scores[i]);
  }
  const double n1 = static_cast<double>(pos.size());
  const double n0 = static_cast<double>(neg.size());

  std::vector<double> combined = pos;
  combined.insert(combined.end(), neg.begin(), neg.end());
  const auto rank_all = midranks(combined);
  const auto rank_pos = midranks(pos);
  const auto rank_neg = midranks(neg);

  PlacementValues out;
  out.v10.resize(pos.size());
  out.v01.resize(neg.size());
  double sum_rank_pos = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    out.v10[i] = (rank_all[i] - rank_pos[i]) / n0;
    sum_rank_pos += rank_all[i];
  }
  for (std::size_t j = 0; j < neg.size(); ++j) {
    out.v01[j] = 1.0 - (rank_all[pos.size() + j] - rank_neg[j]) / n1;
  }
  out.auc = (sum_rank_pos - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
  return out;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  return placement_values(scores, labels).auc;
}

std::vector<std::pair<double, double>> roc_points(const std::vector<double>& scores,
                                                  const std::vector<int>& labels) {
  check_binary(scores, labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double n_pos = 0.0, n_neg = 0.0;
  for (int y : labels) (y == 1 ? n_pos : n_neg) += 1.0;

  std::vector<std::pair<double, double>> points{{0.0, 0.0}};
  double tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      (labels[order[i]] == 1 ? tp : fp) += 1.0;
      ++i;
    }
    points.emplace_back(fp / n_neg, tp / n_pos);
  }
  return points;
}

DelongResult delong(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                    const std::vector<int>& labels) {
  if (scores_a.size() != scores_b.size()) {
    throw InvalidInputError("delong: score vectors must be paired");
  }
  const auto pa = placement_values(scores_a, labels);
  const auto pb = placement_values(scores_b, labels);
  const double n1 = static_cast<double>(pa.v10.size());
  const double n0 = static_cast<double>(pa.v01.size());

  DelongResult r;
  r.auc_a = pa.auc;
  r.auc_b = pb.auc;
  const double s10_aa = sample_cov(pa.v10, pa.v10);
  const double s10_bb = sample_cov(pb.v10, pb.v10);
  const double s10_ab = sample_cov(pa.v10, pb.v10);
  const double s01_aa = sample_cov(pa.v01, pa.v01);
  const double s01_bb = sample_cov(pb.v01, pb.v01);
  const double s01_ab = sample_cov(pa.v01, pb.v01);
  r.var_a = s10_aa / n1 + s01_aa / n0;
  r.var_b = s10_bb / n1 + s01_bb / n0;
  r.cov_ab = s10_ab / n1 + s01_ab / n0;
  r.var_diff = r.var_a + r.var_b - 2.0 * r.cov_ab;

  const double diff = r.auc_a - r.auc_b;
  if (r.var_diff <= 0.0) {
    if (diff == 0.0) {
      r.z = 0.0;
      r.p_two_sided = 1.0;  // identical models by convention
      return r;
    }
    throw NumericError("delong: zero variance of the AUC difference with unequal AUCs");
  }
  r.z = diff / std::sqrt(r.var_diff);
  r.p_two_sided = 2.0 * (1.0 - normal_cdf(std::fabs(r.z)));
  return r;
}

std::pair<double, double> delong_ci(const std::vector<double>& scores,
                                    const std::vector<int>& labels, double level) {
  const auto p = placement_values(scores, labels);
  const double n1 = static_cast<double>(p.v10.size());
  const double n0 = static_cast<double>(p.v01.size());
  const double var = sample_cov(p.v10, p.v10) / n1 + sample_cov(p.v01, p.v01) / n0;
  const double z = normal_quantile(0.5 + level / 2.0);
  const double half = z * std::sqrt(std::max(var, 0.0));
  return {std::max(0.0, p.auc - half), std::min(1.0, p.auc + half)};
}

const ScoredInstance& select_document_value(const std::vector<ScoredInstance>& report_scored,
                                            seg::Label cls) {
  if (report_scored.empty()) {
    throw InvalidInputError("select_document_value: report has no instances");
  }
  const int target = static_cast<int>(cls);
  const ScoredInstance* best = &report_scored.front();
  for (const auto& s : report_scored) {
    if (s.prob[target] > best->prob[target]) {
      best = &s;
    } else if (s.prob[target] == best->prob[target]) {
      const auto key = [](const ScoredInstance& si) {
        return std::tuple(si.instance.page, si.instance.order_key);
      };
      if (key(s) < key(*best)) best = &s;
    }
  }
  return *best;
}

DocumentAccuracy binomial_accuracy(std::size_t correct, std::size_t total, double level) {
  if (total == 0) throw InvalidInputError("document_accuracy: empty test set");
  DocumentAccuracy acc;
  acc.correct = correct;
  acc.total = total;
  acc.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  const double z = normal_quantile(0.5 + level / 2.0);
  const double half = z * std::sqrt(acc.accuracy * (1.0 - acc.accuracy) / static_cast<double>(total));
  acc.ci_low = std::max(0.0, acc.accuracy - half);
  acc.ci_high = std::min(1.0, acc.accuracy + half);
  return acc;
}

DocumentAccuracy document_accuracy(
    const std::map<std::string, std::optional<double>>& selections,
    const std::vector<seg::GoldRecord>& gold, seg::Label cls, double epsilon) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& g : gold) {
    const auto it = selections.find(g.report_id);
    if (it == selections.end()) {
      throw InvalidInputError("document_accuracy: no selection for report " + g.report_id);
    }
    const auto& values = cls == seg::Label::kAhi ? g.ahi_values : g.sao2_values;
    ++total;
    if (it->second.has_value()) {
      const double v = *it->second;
      if (std::any_of(values.begin(), values.end(),
                      [&](double gv) { return std::fabs(gv - v) <= epsilon; })) {
        ++correct;
      }
    }
  }
  return binomial_accuracy(correct, total);
}

ChiSquare chi_square_2x2(std::size_t correct_a, std::size_t n_a, std::size_t correct_b,
                         std::size_t n_b) {
  if (n_a == 0 || n_b == 0) throw InvalidInputError("chi_square_2x2: empty group");
  if (correct_a > n_a || correct_b > n_b) {
    throw InvalidInputError("chi_square_2x2: correct count exceeds group size");
  }
  const double obs[2][2] = {
      {static_cast<double>(correct_a), static_cast<double>(n_a - correct_a)},
      {static_cast<double>(correct_b), static_cast<double>(n_b - correct_b)}};
  const double row[2] = {obs[0][0] + obs[0][1], obs[1][0] + obs[1][1]};
  const double col[2] = {obs[0][0] + obs[1][0], obs[0][1] + obs[1][1]};
  const double n = row[0] + row[1];

  ChiSquare out;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double expected = row[i] * col[j] / n;
      if (expected == 0.0) throw NumericError("chi_square_2x2: degenerate table (zero expected cell)");
      const double d = obs[i][j] - expected;
      out.statistic += d * d / expected;
    }
  }
  out.p = chi2_sf_1df(out.statistic);
  return out;
}

std::vector<double> bonferroni(const std::vector<double>& p_values) {
  const double m = static_cast<double>(p_values.size());
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (p < 0.0 || p > 1.0) throw InvalidInputError("bonferroni: p-value outside [0,1]");
    out.push_back(std::min(1.0, m * p));
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double chi2_sf_1df(double x) { return std::erfc(std::sqrt(x / 2.0)); }

// Acklam's rational approximation, |relative error| < 1.15e-9.
double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw InvalidInputError("normal_quantile: p must be in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double q, r, x;
  if (p < p_low) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  return x;
}

namespace {

json class_report_to_json(const ClassReport& r) {
  json j;
  j["recall"] = r.recall_defined ? json(r.recall) : json(nullptr);
  j["precision"] = r.precision_defined ? json(r.precision) : json(nullptr);
  j["auroc"] = r.auroc;
  j["auroc_ci"] = {r.auroc_ci_low, r.auroc_ci_high};
  j["document_accuracy"] = r.document.accuracy;
  j["document_accuracy_ci"] = {r.document.ci_low, r.document.ci_high};
  j["document_correct"] = r.document.correct;
  j["document_total"] = r.document.total;
  return j;
}

ClassReport class_report_from_json(const json& j) {
  ClassReport r;
  r.recall_defined = !j.at("recall").is_null();
  if (r.recall_defined) r.recall = j.at("recall").get<double>();
  r.precision_defined = !j.at("precision").is_null();
  if (r.precision_defined) r.precision = j.at("precision").get<double>();
  r.auroc = j.at("auroc").get<double>();
  r.auroc_ci_low = j.at("auroc_ci")[0].get<double>();
  r.auroc_ci_high = j.at("auroc_ci")[1].get<double>();
  r.document.accuracy = j.at("document_accuracy").get<double>();
  r.document.ci_low = j.at("document_accuracy_ci")[0].get<double>();
  r.document.ci_high = j.at("document_accuracy_ci")[1].get<double>();
  r.document.correct = j.at("document_correct").get<std::size_t>();
  r.document.total = j.at("document_total").get<std::size_t>();
  return r;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string EvalReport::to_json() const {
  json j;
  json classes = json::object();
  for (const auto& [name, report] : per_class) classes[name] = class_report_to_json(report);
  j["per_class"] = std::move(classes);
  json comps = json::array();
  for (const auto& c : comparisons) {
    comps.push_back({{"pair", c.pair},
                     {"metric", c.metric},
                     {"statistic", c.statistic},
                     {"p_raw", c.p_raw},
                     {"p_adjusted", c.p_adjusted}});
  }
  j["comparisons"] = std::move(comps);
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& json_text) {
  const auto j = json::parse(json_text);
  EvalReport report;
  for (const auto& [name, value] : j.at("per_class").items()) {
    report.per_class[name] = class_report_from_json(value);
  }
  for (const auto& c : j.at("comparisons")) {
    report.comparisons.push_back({c.at("pair").get<std::string>(),
                                  c.at("metric").get<std::string>(),
                                  c.at("statistic").get<double>(),
                                  c.at("p_raw").get<double>(),
                                  c.at("p_adjusted").get<double>()});
  }
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "Class   Recall   Precision  AUROC (95% CI)            Document accuracy (95% CI)\n";
  for (const auto& [name, r] : per_class) {
    out << name << std::string(name.size() < 8 ? 8 - name.size() : 1, ' ')
        << (r.recall_defined ? fmt4(r.recall) : "  n/a ") << "   "
        << (r.precision_defined ? fmt4(r.precision) : "  n/a ") << "     "
        << fmt4(r.auroc) << " (" << fmt4(r.auroc_ci_low) << " - " << fmt4(r.auroc_ci_high) << ")  "
        << fmt4(r.document.accuracy * 100.0) << "% (" << fmt4(r.document.ci_low * 100.0)
        << " - " << fmt4(r.document.ci_high * 100.0) << ")\n";
  }
  if (!comparisons.empty()) {
    out << "\npair,metric,statistic,p_raw,p_adjusted\n";
    for (const auto& c : comparisons) {
      out << c.pair << "," << c.metric << "," << format_double(c.statistic) << ","
          << fmt4(c.p_raw) << "," << fmt4(c.p_adjusted) << "\n";
    }
  }
  return out.str();
}

}  // namespace scandoc::eval
