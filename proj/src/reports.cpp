#include "phqens/reports.hpp"

#include "csv.hpp"
#include "phqens/errors.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

namespace phqens {

using csv::next_line;
using csv::open_input;
using csv::open_output;
using csv::parse_int;
using csv::split_fields;

namespace {

std::string predictions_header() {
  std::string h = "speaker_id,system,total,binary,severity";
  for (int k = 1; k <= kItemCount; ++k) h += ",q" + std::to_string(k);
  return h + ",expert";
}

std::vector<double> totals_of(std::span<const Prediction> predictions) {
  std::vector<double> out;
  for (const auto& p : predictions) out.push_back(p.total());
  return out;
}

}  // namespace

std::string format_optional(const std::optional<double>& value) {
  return value ? format_double(*value) : std::string("undefined");
}

void write_predictions(std::ostream& out, std::span<const Prediction> predictions) {
  out << predictions_header() << '\n';
  for (const auto& p : predictions) {
    out << p.speaker_id() << ',' << (p.is_bottom_up() ? "bottom-up" : "top-down") << ','
        << p.total() << ',' << (p.binary() ? 1 : 0) << ',' << to_string(p.severity());
    if (const auto* bu = std::get_if<BottomUpSource>(&p.source())) {
      for (int v : bu->predicted_items.values()) out << ',' << v;
      out << ",\n";
    } else {
      const auto& td = std::get<TopDownSource>(p.source());
      for (int k = 0; k < kItemCount; ++k) out << ',';
      out << ',' << to_string(td.expert) << '\n';
    }
  }
}

void write_predictions(const std::filesystem::path& path,
                       std::span<const Prediction> predictions) {
  auto out = open_output(path);
  write_predictions(out, predictions);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Prediction> read_predictions(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!next_line(in, line) || line != predictions_header()) {
    throw ParseError(source, 1, "expected header '" + predictions_header() + "'");
  }
  constexpr std::size_t kColumns = 5 + kItemCount + 1;
  std::vector<Prediction> out;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != kColumns) {
      throw ParseError(source, line_no, "expected " + std::to_string(kColumns) +
                                            " columns, found " + std::to_string(f.size()));
    }
    const std::string id(f[0]);
    const auto where = source + ":" + std::to_string(line_no) + ": speaker " + id + ": ";
    int total = 0, binary = 0;
    Severity severity{};
    try {
      total = parse_int(f[2]);
      binary = parse_int(f[3]);
      severity = parse_severity(f[4]);
    } catch (const DomainError& e) {
      throw ParseError(source, line_no, e.what());
    }
    try {
      if (total < 0 || total > kMaxTotal) throw DomainError("total out of range");
      if ((binary == 1) != binary_of(total) || (binary != 0 && binary != 1)) {
        throw DomainError("binary flag disagrees with total");
      }
      if (severity != severity_of(total)) throw DomainError("severity disagrees with total");
      if (f[1] == "bottom-up") {
        std::array<int, kItemCount> items{};
        for (std::size_t k = 0; k < kItemCount; ++k) items[k] = parse_int(f[5 + k]);
        const Phq8Items parsed(items);
        if (parsed.total() != total) throw DomainError("total differs from item sum");
        out.push_back(Prediction::bottom_up(id, parsed));
      } else if (f[1] == "top-down") {
        out.push_back(Prediction::top_down(id, parse_severity(f[5 + kItemCount]), total));
      } else {
        throw DomainError("unknown system '" + std::string(f[1]) + "'");
      }
    } catch (const DomainError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return out;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_predictions(in, path.string());
}

FeatureTable read_feature_table(std::istream& in, const std::string& source) {
  std::string line;
  if (!next_line(in, line)) throw ParseError(source, 1, "missing header");
  const auto header = split_fields(line);
  if (header.size() < 2 || header[0] != "speaker_id") {
    throw ParseError(source, 1, "header must be speaker_id followed by feature names");
  }
  FeatureTable table;
  for (std::size_t c = 1; c < header.size(); ++c) table.feature_names.emplace_back(header[c]);

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      throw ParseError(source, line_no, "expected " + std::to_string(header.size()) +
                                            " columns, found " + std::to_string(f.size()));
    }
    table.speaker_ids.emplace_back(f[0]);
    std::vector<double> values;
    for (std::size_t c = 1; c < f.size(); ++c) {
      if (f[c].empty() || f[c] == "NA" || f[c] == "nan" || f[c] == "NaN") {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        const double v = parse_double(f[c]);
        if (!std::isfinite(v)) throw DomainError("non-finite feature value");
        values.push_back(v);
      } catch (const DomainError& e) {
        throw ParseError(source, line_no, e.what());
      }
    }
    rows.push_back(std::move(values));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.feature_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

FeatureTable read_feature_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_feature_table(in, path.string());
}

EvaluationInputs align_with_labels(std::vector<Prediction> predictions,
                                   std::span<const LabelRecord> labels) {
  std::unordered_map<std::string, const SpeakerLabel*> by_id;
  for (const auto& r : labels) by_id.emplace(r.label.speaker_id, &r.label);
  EvaluationInputs inputs;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.speaker_id());
    if (it == by_id.end()) {
      throw ValidationError("predicted speaker " + p.speaker_id() + " has no label");
    }
    inputs.truth.push_back(*it->second);
  }
  if (predictions.empty()) throw ValidationError("prediction table is empty");
  inputs.predictions = std::move(predictions);
  return inputs;
}

EvaluationFiles write_evaluation(const EvaluationInputs& inputs, const std::filesystem::path& dir,
                                 const std::optional<std::string>& model_fingerprint) {
  const auto& preds = inputs.predictions;
  const auto& truth = inputs.truth;
  const std::size_t n = preds.size();

  std::vector<int> true_binary, pred_binary, true_five, pred_five;
  std::vector<double> true_totals, pred_totals = totals_of(preds);
  std::vector<std::string> ids;
  bool all_bottom_up = true;
  bool any_bottom_up = false;
  for (std::size_t i = 0; i < n; ++i) {
    true_binary.push_back(truth[i].binary ? 1 : 0);
    pred_binary.push_back(preds[i].binary() ? 1 : 0);
    true_five.push_back(severity_index(truth[i].severity));
    pred_five.push_back(severity_index(preds[i].severity()));
    true_totals.push_back(truth[i].total);
    ids.push_back(preds[i].speaker_id());
    all_bottom_up = all_bottom_up && preds[i].is_bottom_up();
    any_bottom_up = any_bottom_up || preds[i].is_bottom_up();
  }

  const std::vector<int> binary_labels{0, 1};
  const std::vector<int> five_labels{0, 1, 2, 3, 4};
  const auto binary_report = macro_f1(true_binary, pred_binary, binary_labels);
  const auto five_report = macro_f1(true_five, pred_five, five_labels);
  const auto regression = regression_metrics(true_totals, pred_totals);

  std::filesystem::create_directories(dir);
  EvaluationFiles files;
  const auto open = [&](const char* name) {
    files.written.push_back(dir / name);
    return open_output(files.written.back());
  };

  {
    auto out = open("metrics.csv");
    out << "metric,value\n";
    out << "system," << (all_bottom_up ? "bottom-up" : any_bottom_up ? "mixed" : "top-down")
        << '\n';
    out << "n_speakers," << n << '\n';
    out << "binary_macro_f1," << format_double(binary_report.macro_f1) << '\n';
    out << "fiveway_macro_f1," << format_double(five_report.macro_f1) << '\n';
    out << "mae," << format_double(regression.mae) << '\n';
    out << "rmse," << format_double(regression.rmse) << '\n';
    out << "pearson_r," << format_optional(regression.correlation.r) << '\n';
    out << "pearson_p," << format_optional(regression.correlation.p_value) << '\n';
    out << "binary_f1_average,macro over labels 0 and 1\n";
    if (model_fingerprint) out << "model_data_fingerprint," << *model_fingerprint << '\n';
  }
  {
    auto out = open("classification.csv");
    out << "task,label,precision,recall,f1,support\n";
    for (const auto& s : binary_report.per_class) {
      out << "binary," << s.label << ',' << format_double(s.precision) << ','
          << format_double(s.recall) << ',' << format_double(s.f1) << ',' << s.support << '\n';
    }
    for (const auto& s : five_report.per_class) {
      out << "fiveway," << to_string(severity_from_index(s.label)) << ','
          << format_double(s.precision) << ',' << format_double(s.recall) << ','
          << format_double(s.f1) << ',' << s.support << '\n';
    }
  }

  Eigen::MatrixXd true_items(static_cast<Eigen::Index>(n), kItemCount);
  Eigen::MatrixXd pred_items(static_cast<Eigen::Index>(n), kItemCount);
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kItemCount; ++k) {
      const auto r = static_cast<Eigen::Index>(i);
      true_items(r, k) = truth[i].items[static_cast<std::size_t>(k)];
      if (const auto* bu = std::get_if<BottomUpSource>(&preds[i].source())) {
        pred_items(r, k) = bu->predicted_items[static_cast<std::size_t>(k)];
      }
    }
  }
  {
    auto out = open("cronbach.csv");
    out << "source,alpha\n";
    out << "true_items," << (n >= 2 ? format_optional(cronbach_alpha(true_items)) : "undefined")
        << '\n';
    out << "predicted_items,"
        << (all_bottom_up && n >= 2 ? format_optional(cronbach_alpha(pred_items)) : "undefined")
        << '\n';
  }
  if (all_bottom_up && n >= 2) {
    auto out = open("per_item.csv");
    out << "item,pearson_r,pearson_p,mae,rmse\n";
    for (const auto& row : per_item_report(true_items, pred_items)) {
      out << row.item << ',' << format_optional(row.metrics.correlation.r) << ','
          << format_optional(row.metrics.correlation.p_value) << ','
          << format_double(row.metrics.mae) << ',' << format_double(row.metrics.rmse) << '\n';
    }
  }
  {
    auto out = open("scatter.csv");
    out << "rank,speaker_id,actual,predicted\n";
    for (const auto& row : scatter_export(true_totals, pred_totals, ids)) {
      out << row.rank << ',' << row.speaker_id << ',' << format_double(row.actual) << ','
          << format_double(row.predicted) << '\n';
    }
  }
  return files;
}

void write_feature_report(const std::filesystem::path& path,
                          std::span<const FeatureCorrelation> rows) {
  auto out = open_output(path);
  out << "feature,n,pearson_r,pearson_p\n";
  for (const auto& row : rows) {
    out << row.feature << ',' << row.correlation.n << ',' << format_optional(row.correlation.r)
        << ',' << format_optional(row.correlation.p_value) << '\n';
  }
}

}  // namespace phqens
