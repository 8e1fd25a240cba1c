#include "phqens/metrics.hpp"

#include "phqens/domain.hpp"
#include "phqens/errors.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace phqens {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DomainError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                      std::to_string(b) + ")");
  }
}

double ratio_or_zero(double num, double den) { return den > 0.0 ? num / den : 0.0; }

double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size() - 1);
}

}  // namespace

ClassificationReport macro_f1(std::span<const int> truth, std::span<const int> predicted,
                              std::span<const int> label_set) {
  require_same_length(truth.size(), predicted.size(), "macro_f1");
  if (truth.empty()) throw DomainError("macro_f1: no samples");
  if (label_set.empty()) throw DomainError("macro_f1: empty label set");

  std::unordered_map<int, std::size_t> slot;
  for (std::size_t i = 0; i < label_set.size(); ++i) {
    if (!slot.emplace(label_set[i], i).second) throw DomainError("macro_f1: duplicate label");
  }
  const auto lookup = [&](int label) {
    auto it = slot.find(label);
    if (it == slot.end()) throw DomainError("macro_f1: label outside label set");
    return it->second;
  };

  std::vector<int> tp(label_set.size()), fp(label_set.size()), fn(label_set.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = lookup(truth[i]);
    const auto p = lookup(predicted[i]);
    if (t == p) {
      ++tp[t];
    } else {
      ++fp[p];
      ++fn[t];
    }
  }

  ClassificationReport report;
  report.label_set.assign(label_set.begin(), label_set.end());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < label_set.size(); ++c) {
    ClassScores s;
    s.label = label_set[c];
    s.precision = ratio_or_zero(tp[c], tp[c] + fp[c]);
    s.recall = ratio_or_zero(tp[c], tp[c] + fn[c]);
    s.f1 = ratio_or_zero(2.0 * s.precision * s.recall, s.precision + s.recall);
    s.support = tp[c] + fn[c];
    f1_sum += s.f1;
    report.per_class.push_back(s);
  }
  report.macro_f1 = f1_sum / static_cast<double>(label_set.size());
  return report;
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x.size(), y.size(), "pearson");
  if (x.size() < 2) throw DomainError("pearson: needs at least 2 pairs");
  const auto n = static_cast<Eigen::Index>(x.size());
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), n);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  if (!xv.allFinite() || !yv.allFinite()) throw NumericError("pearson: non-finite input");

  Correlation result;
  result.n = x.size();
  const Eigen::VectorXd dx = xv.array() - xv.mean();
  const Eigen::VectorXd dy = yv.array() - yv.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) return result;

  const double r = std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
  result.r = r;
  if (x.size() < 3) return result;

  const double dof = static_cast<double>(x.size() - 2);
  const double one_minus_r2 = 1.0 - r * r;
  if (one_minus_r2 <= 0.0) {
    result.p_value = 0.0;
  } else {
    const double t2 = r * r * dof / one_minus_r2;
    // Two-sided Student-t tail: I_{dof/(dof+t^2)}(dof/2, 1/2).
    result.p_value = boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + t2));
  }
  return result;
}

RegressionReport regression_metrics(std::span<const double> truth,
                                     std::span<const double> predicted) {
  require_same_length(truth.size(), predicted.size(), "regression_metrics");
  if (truth.empty()) throw DomainError("regression_metrics: no samples");
  const auto n = static_cast<Eigen::Index>(truth.size());
  const Eigen::Map<const Eigen::ArrayXd> t(truth.data(), n);
  const Eigen::Map<const Eigen::ArrayXd> p(predicted.data(), n);
  const Eigen::ArrayXd err = p - t;

  RegressionReport report;
  report.mae = err.abs().mean();
  report.rmse = std::sqrt(err.square().mean());
  if (truth.size() >= 2) {
    report.correlation = pearson(truth, predicted);
  } else {
    report.correlation.n = truth.size();
  }
  return report;
}

std::optional<double> cronbach_alpha(const Eigen::MatrixXd& items) {
  if (items.rows() < 2) throw DomainError("cronbach_alpha: needs at least 2 respondents");
  if (items.cols() < 2) throw DomainError("cronbach_alpha: needs at least 2 items");
  if (!items.allFinite()) throw NumericError("cronbach_alpha: non-finite input");

  const double k = static_cast<double>(items.cols());
  double item_variance_sum = 0.0;
  for (Eigen::Index c = 0; c < items.cols(); ++c) item_variance_sum += sample_variance(items.col(c));
  const double total_variance = sample_variance(items.rowwise().sum());
  if (total_variance == 0.0) return std::nullopt;
  return k / (k - 1.0) * (1.0 - item_variance_sum / total_variance);
}

std::vector<ItemRow> per_item_report(const Eigen::MatrixXd& truth_items,
                                     const Eigen::MatrixXd& predicted_items) {
  if (truth_items.rows() != predicted_items.rows() ||
      truth_items.cols() != predicted_items.cols()) {
    throw DomainError("per_item_report: shape mismatch");
  }
  if (truth_items.cols() != kItemCount) throw DomainError("per_item_report: expected 8 items");
  if (truth_items.rows() < 2) throw DomainError("per_item_report: needs at least 2 speakers");

  std::vector<ItemRow> rows;
  for (Eigen::Index k = 0; k < kItemCount; ++k) {
    const Eigen::VectorXd t = truth_items.col(k);
    const Eigen::VectorXd p = predicted_items.col(k);
    rows.push_back({std::string(kItemNames[static_cast<std::size_t>(k)]),
                    regression_metrics({t.data(), static_cast<std::size_t>(t.size())},
                                       {p.data(), static_cast<std::size_t>(p.size())})});
  }
  return rows;
}

std::vector<FeatureCorrelation> feature_correlation_report(
    std::span<const std::string> speaker_ids, std::span<const double> predicted_totals,
    const FeatureTable& features) {
  require_same_length(speaker_ids.size(), predicted_totals.size(), "feature_correlation_report");
  if (features.values.rows() != static_cast<Eigen::Index>(features.speaker_ids.size()) ||
      features.values.cols() != static_cast<Eigen::Index>(features.feature_names.size())) {
    throw DomainError("feature table shape does not match its ids and names");
  }

  std::unordered_map<std::string, double> predicted;
  for (std::size_t i = 0; i < speaker_ids.size(); ++i) {
    predicted.emplace(speaker_ids[i], predicted_totals[i]);
  }
  std::vector<std::pair<Eigen::Index, double>> matched;  // feature row, predicted total
  for (std::size_t row = 0; row < features.speaker_ids.size(); ++row) {
    auto it = predicted.find(features.speaker_ids[row]);
    if (it != predicted.end()) matched.emplace_back(static_cast<Eigen::Index>(row), it->second);
  }
  if (matched.empty()) throw DomainError("feature table shares no speakers with predictions");

  std::vector<FeatureCorrelation> report;
  for (Eigen::Index c = 0; c < features.values.cols(); ++c) {
    std::vector<double> xs, ys;
    for (const auto& [row, total] : matched) {
      const double v = features.values(row, c);
      if (std::isnan(v)) continue;
      xs.push_back(total);
      ys.push_back(v);
    }
    FeatureCorrelation fc{features.feature_names[static_cast<std::size_t>(c)], {}};
    if (xs.size() >= 3) {
      fc.correlation = pearson(xs, ys);
    } else {
      fc.correlation.n = xs.size();
    }
    report.push_back(std::move(fc));
  }
  return report;
}

std::vector<ScatterRow> scatter_export(std::span<const double> truth_totals,
                                       std::span<const double> predicted_totals,
                                       std::span<const std::string> speaker_ids) {
  require_same_length(truth_totals.size(), predicted_totals.size(), "scatter_export");
  require_same_length(truth_totals.size(), speaker_ids.size(), "scatter_export");
  std::vector<ScatterRow> rows;
  rows.reserve(truth_totals.size());
  for (std::size_t i = 0; i < truth_totals.size(); ++i) {
    rows.push_back({0, speaker_ids[i], truth_totals[i], predicted_totals[i]});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const ScatterRow& a, const ScatterRow& b) {
    if (a.actual != b.actual) return a.actual < b.actual;
    return a.speaker_id < b.speaker_id;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = i + 1;
  return rows;
}

}  // namespace phqens
