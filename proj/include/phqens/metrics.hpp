#pragma once

// Evaluation statistics. Undefined statistics are returned as empty
// optionals rather than zeros.

#include <Eigen/Core>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phqens {

struct ClassScores {
  int label = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;
};

struct ClassificationReport {
  std::vector<ClassScores> per_class;  // in label_set order
  double macro_f1 = 0.0;
  std::vector<int> label_set;
};

/// Per-class F1 with 0 on empty denominators; the macro mean runs over every
/// class of label_set, including classes with no support.
ClassificationReport macro_f1(std::span<const int> truth, std::span<const int> predicted,
                              std::span<const int> label_set);

struct Correlation {
  std::optional<double> r;        // empty when either input is constant
  std::optional<double> p_value;  // two-sided t-test with n - 2 dof; empty when n < 3
  std::size_t n = 0;

  bool defined() const { return r.has_value(); }
};

/// Pearson product-moment correlation. Throws DomainError when n < 2.
Correlation pearson(std::span<const double> x, std::span<const double> y);

struct RegressionReport {
  double mae = 0.0;
  double rmse = 0.0;
  Correlation correlation;
};

RegressionReport regression_metrics(std::span<const double> truth,
                                    std::span<const double> predicted);

/// Cronbach's alpha of an N x K item matrix (sample variances). Empty when
/// the row totals have zero variance.
std::optional<double> cronbach_alpha(const Eigen::MatrixXd& items);

struct ItemRow {
  std::string item;
  RegressionReport metrics;
};

/// Column-wise regression metrics over N x 8 item matrices, in item order.
std::vector<ItemRow> per_item_report(const Eigen::MatrixXd& truth_items,
                                     const Eigen::MatrixXd& predicted_items);

/// Per-speaker named features; NaN marks a missing value.
struct FeatureTable {
  std::vector<std::string> feature_names;
  std::vector<std::string> speaker_ids;
  Eigen::MatrixXd values;  // speakers x features
};

struct FeatureCorrelation {
  std::string feature;
  Correlation correlation;
};

/// Correlates predicted totals with each feature column, matching speakers
/// by id and dropping missing values pairwise. Features with fewer than
/// three complete pairs report an undefined correlation.
std::vector<FeatureCorrelation> feature_correlation_report(
    std::span<const std::string> speaker_ids, std::span<const double> predicted_totals,
    const FeatureTable& features);

struct ScatterRow {
  std::size_t rank = 0;  // 1-based
  std::string speaker_id;
  double actual = 0.0;
  double predicted = 0.0;
};

/// Rows sorted by (actual, speaker_id).
std::vector<ScatterRow> scatter_export(std::span<const double> truth_totals,
                                       std::span<const double> predicted_totals,
                                       std::span<const std::string> speaker_ids);

}  // namespace phqens
