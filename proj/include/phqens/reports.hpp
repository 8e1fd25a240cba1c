#pragma once

// Prediction tables and evaluation report files (comma-separated, fixed
// headers).

#include "phqens/data_io.hpp"
#include "phqens/domain.hpp"
#include "phqens/metrics.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phqens {

/// Header: speaker_id,system,total,binary,severity,q1..q8,expert. Bottom-up
/// rows leave expert empty; top-down rows leave q1..q8 empty.
void write_predictions(std::ostream& out, std::span<const Prediction> predictions);
void write_predictions(const std::filesystem::path& path,
                       std::span<const Prediction> predictions);

/// Parses a prediction table and rejects rows whose binary, severity, total
/// or band fields disagree (ValidationError).
std::vector<Prediction> read_predictions(std::istream& in,
                                         const std::string& source = "predictions");
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

/// Header: speaker_id followed by feature names. Empty, "NA" or "nan"
/// cells are missing values.
FeatureTable read_feature_table(std::istream& in, const std::string& source = "features");
FeatureTable read_feature_table(const std::filesystem::path& path);

std::string format_optional(const std::optional<double>& value);

struct EvaluationInputs {
  std::vector<Prediction> predictions;
  std::vector<SpeakerLabel> truth;  // aligned with predictions
};

/// Pairs every prediction with its label. Throws ValidationError when a
/// predicted speaker has no label.
EvaluationInputs align_with_labels(std::vector<Prediction> predictions,
                                   std::span<const LabelRecord> labels);

struct EvaluationFiles {
  std::vector<std::filesystem::path> written;
};

/// Writes metrics.csv, classification.csv, cronbach.csv, scatter.csv and,
/// when every prediction is bottom-up, per_item.csv into `dir`.
EvaluationFiles write_evaluation(const EvaluationInputs& inputs, const std::filesystem::path& dir,
                                 const std::optional<std::string>& model_fingerprint);

void write_feature_report(const std::filesystem::path& path,
                          std::span<const FeatureCorrelation> rows);

}  // namespace phqens
