#include "phqens/cli.hpp"

#include "csv.hpp"
#include "phqens/archive.hpp"
#include "phqens/data_io.hpp"
#include "phqens/ensemble.hpp"
#include "phqens/errors.hpp"
#include "phqens/reports.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace phqens::cli {

namespace fs = std::filesystem;

namespace {

/// Removes every registered output that did not exist beforehand unless
/// the command commits.
class OutputGuard {
 public:
  void track(const fs::path& path) {
    if (!fs::exists(path)) created_.push_back(path);
  }
  void commit() { created_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) fs::remove(*it, ec);
  }

 private:
  std::vector<fs::path> created_;
};

/// Reads key=value lines ('#' comments, blank lines ignored) and turns them
/// into --key=value arguments.
std::vector<std::string> config_arguments(const fs::path& path) {
  auto in = csv::open_input(path);
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  while (csv::next_line(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#' || line[first] == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(path.string(), line_no, "expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\"");
      const auto e = s.find_last_not_of(" \t\"");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    args.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  return args;
}

/// Splices the contents of `--config FILE` ahead of the explicit arguments
/// so command-line flags win.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::vector<std::string> explicit_args;
  std::vector<std::string> from_file;
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string value;
    if (args[i] == "--config" && i + 1 < args.size()) {
      value = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      value = args[i].substr(9);
    } else {
      explicit_args.push_back(args[i]);
      continue;
    }
    if (!fs::exists(value)) throw CLI::ValidationError("--config", "file not found: " + value);
    auto parsed = config_arguments(value);
    from_file.insert(from_file.end(), parsed.begin(), parsed.end());
  }
  std::vector<std::string> out{args.front()};
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), explicit_args.begin(), explicit_args.end());
  return out;
}

std::array<int, kSeverityCount> parse_counts(const std::string& text) {
  const auto fields = csv::split_fields(text);
  if (fields.size() != kSeverityCount) {
    throw DomainError("expected 5 comma-separated counts, got '" + text + "'");
  }
  std::array<int, kSeverityCount> counts{};
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = csv::parse_int(fields[i]);
  return counts;
}

std::string join_counts(const std::array<int, kSeverityCount>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    s += (i ? "," : "") + std::to_string(counts[i]);
  }
  return s;
}

struct TrainingOptions {
  TrainConfig train;
  std::optional<int> epochs;
  AugmentConfig augment;
  std::optional<double> noise_sigma;
};

void add_training_options(CLI::App& cmd, TrainingOptions& o) {
  cmd.add_option("--epochs", o.epochs, "Training epochs (bottom-up 5, top-down 10)")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--learning-rate", o.train.learning_rate, "Adam learning rate")
      ->capture_default_str();
  cmd.add_option("--batch-size", o.train.batch_size, "Mini-batch size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd.add_option("--seed", o.train.seed, "Training seed")->capture_default_str();
  cmd.add_option("--perturb-count", o.augment.perturb_count)->capture_default_str();
  cmd.add_option("--preserve-count", o.augment.preserve_count)->capture_default_str();
  cmd.add_option("--noise-sigma", o.noise_sigma,
                 "Absolute augmentation noise (default: relative to data spread)");
  cmd.add_option("--relative-noise", o.augment.relative_noise)->capture_default_str();
  cmd.add_option("--augment-seed", o.augment.seed)->capture_default_str();
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  SyntheticConfig config;
  std::string train_counts = "47,29,20,7,4";
  std::string dev_counts = "17,6,5,6,1";
};

void run_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticConfig config = a.config;
  config.train_counts = parse_counts(a.train_counts);
  config.dev_counts = parse_counts(a.dev_counts);
  const auto cohort = synth_cohort(config);

  OutputGuard guard;
  guard.track(a.out);
  fs::create_directories(a.out);
  const fs::path files[] = {a.out / "train_labels.csv", a.out / "train_embeddings.csv",
                            a.out / "dev_labels.csv", a.out / "dev_embeddings.csv"};
  for (const auto& f : files) guard.track(f);
  write_labels(files[0], label_records(cohort.train));
  write_embeddings(files[1], cohort.train.embeddings);
  write_labels(files[2], label_records(cohort.dev));
  write_embeddings(files[3], cohort.dev.embeddings);
  guard.commit();
  out << "synth: train " << join_counts(config.train_counts) << ", dev "
      << join_counts(config.dev_counts) << " -> " << a.out.string() << '\n';
}

struct TrainArgs {
  std::string system;
  fs::path labels, embeddings, out;
  std::optional<std::string> split;
  TrainingOptions options;
};

void run_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const auto kind = parse_system_kind(a.system);
  std::optional<Split> split;
  if (a.split) split = parse_split(*a.split);
  const Cohort cohort = load_cohort(a.labels, a.embeddings, split);

  TrainConfig train = kind == SystemKind::BottomUp ? bottom_up_defaults() : top_down_defaults();
  train.learning_rate = a.options.train.learning_rate;
  train.batch_size = a.options.train.batch_size;
  train.seed = a.options.train.seed;
  if (a.options.epochs) train.epochs = *a.options.epochs;
  AugmentConfig augment = a.options.augment;
  augment.noise_sigma = a.options.noise_sigma;

  ModelArchive archive;
  const fs::path inputs[] = {a.labels, a.embeddings};
  archive.data_fingerprint = fingerprint_files(inputs);
  if (kind == SystemKind::BottomUp) {
    archive.models = train_bottom_up(cohort, train, augment);
  } else {
    auto result = train_top_down(cohort, train, augment);
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    archive.models = std::move(result.moe);
  }

  OutputGuard guard;
  guard.track(a.out);
  save_model(archive, a.out);
  guard.commit();
  out << "train: " << to_string(kind) << " on " << cohort.labels.size() << " speakers, "
      << cohort.embeddings.size() << " groups -> " << a.out.string() << '\n';
}

struct PredictArgs {
  fs::path model, embeddings, out;
  std::optional<std::string> system;
};

void run_predict(const PredictArgs& a, std::ostream& out) {
  std::optional<SystemKind> expected;
  if (a.system) expected = parse_system_kind(*a.system);
  const auto archive = load_model(a.model, expected);
  const auto embeddings = read_embeddings(a.embeddings);
  for (const auto& g : embeddings) {
    if (g.vector.size() != kEmbeddingDim) throw ValidationError("embedding has wrong dimension");
  }

  std::vector<Prediction> predictions;
  for (const auto& groups : group_by_speaker(embeddings)) {
    predictions.push_back(std::visit(
        [&groups](const auto& models) -> Prediction {
          if constexpr (std::is_same_v<std::decay_t<decltype(models)>, BottomUpEnsemble>) {
            return predict_bottom_up(models, groups);
          } else {
            return predict_top_down(models, groups);
          }
        },
        archive.models));
  }

  OutputGuard guard;
  guard.track(a.out);
  write_predictions(a.out, predictions);
  guard.commit();
  out << "predict: " << predictions.size() << " speakers -> " << a.out.string() << '\n';
}

struct EvaluateArgs {
  fs::path predictions, labels, out;
  std::optional<fs::path> model;
};

void run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  auto inputs = align_with_labels(read_predictions(a.predictions), read_labels(a.labels));
  std::optional<std::string> fingerprint;
  if (a.model) fingerprint = load_model(*a.model).data_fingerprint;

  OutputGuard guard;
  guard.track(a.out);
  fs::create_directories(a.out);
  for (const char* name :
       {"metrics.csv", "classification.csv", "cronbach.csv", "per_item.csv", "scatter.csv"}) {
    guard.track(a.out / name);
  }
  const auto files = write_evaluation(inputs, a.out, fingerprint);
  guard.commit();
  out << "evaluate: " << inputs.predictions.size() << " speakers, " << files.written.size()
      << " reports -> " << a.out.string() << '\n';
}

struct ReportArgs {
  fs::path predictions, features, out;
};

void run_report(const ReportArgs& a, std::ostream& out) {
  const auto predictions = read_predictions(a.predictions);
  const auto features = read_feature_table(a.features);
  std::vector<std::string> ids;
  std::vector<double> totals;
  for (const auto& p : predictions) {
    ids.push_back(p.speaker_id());
    totals.push_back(p.total());
  }
  const auto rows = feature_correlation_report(ids, totals, features);

  OutputGuard guard;
  guard.track(a.out);
  fs::create_directories(a.out);
  const auto path = a.out / "feature_correlations.csv";
  guard.track(path);
  write_feature_report(path, rows);
  guard.commit();
  out << "report: " << rows.size() << " features -> " << path.string() << '\n';
}

struct MelArgs {
  fs::path wav, out;
  std::size_t offset = 0;
};

void run_mel(const MelArgs& a, std::ostream& out) {
  const auto audio = read_wav(a.wav);
  if (audio.channels != 1) throw DomainError("mel: audio must be single-channel");
  if (audio.sample_rate != kSampleRate) throw DomainError("mel: audio must be sampled at 16 kHz");
  if (a.offset + kPatchSamples > audio.samples.size()) {
    throw DomainError("mel: fewer than 4000 samples after offset");
  }
  const auto patch = mel_patch(std::span(audio.samples).subspan(a.offset, kPatchSamples));

  OutputGuard guard;
  guard.track(a.out);
  auto file = csv::open_output(a.out);
  file << "band";
  for (int t = 0; t < kPatchFrames; ++t) file << ",f" << t;
  file << '\n';
  for (Eigen::Index m = 0; m < patch.rows(); ++m) {
    file << m;
    for (Eigen::Index t = 0; t < patch.cols(); ++t) file << ',' << format_double(patch(m, t));
    file << '\n';
  }
  file.close();
  if (!file) throw IoError("failed writing " + a.out.string());
  guard.commit();
  out << "mel: " << patch.rows() << "x" << patch.cols() << " -> " << a.out.string() << '\n';
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '"', '\'');
  return text;
}

int fail(std::ostream& err, const char* kind, const std::string& message, int code) {
  err << "error kind=" << kind << " message=\"" << one_line(message) << "\"\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ensemble depression screening over utterance-group embeddings", "phqens"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string ignored_config;

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic cohort");
  synth_cmd->add_option("--config", ignored_config, "key=value file (flags win)");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--seed", synth.config.seed)->capture_default_str();
  synth_cmd->add_option("--train-counts", synth.train_counts, "Speakers per severity band")
      ->capture_default_str();
  synth_cmd->add_option("--dev-counts", synth.dev_counts)->capture_default_str();
  synth_cmd->add_option("--groups-per-speaker", synth.config.groups_per_speaker)
      ->capture_default_str();
  synth_cmd->add_option("--within-speaker-noise-sigma", synth.config.within_speaker_noise_sigma)
      ->capture_default_str();
  synth_cmd->add_option("--separation-scale", synth.config.separation_scale)
      ->capture_default_str();

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train an ensemble and write a model archive");
  train_cmd->add_option("--config", ignored_config, "key=value file (flags win)");
  train_cmd->add_option("--system", train.system)
      ->required()
      ->check(CLI::IsMember({"bottom-up", "top-down"}));
  train_cmd->add_option("--labels", train.labels)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--embeddings", train.embeddings)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Model archive path")->required();
  train_cmd->add_option("--split", train.split, "Use only label rows of this split")
      ->check(CLI::IsMember({"train", "dev"}));
  add_training_options(*train_cmd, train.options);

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "Predict per-speaker scores");
  predict_cmd->add_option("--config", ignored_config, "key=value file (flags win)");
  predict_cmd->add_option("--model", predict.model)->required()->check(CLI::ExistingFile);
  predict_cmd->add_option("--embeddings", predict.embeddings)
      ->required()
      ->check(CLI::ExistingFile);
  predict_cmd->add_option("--out", predict.out)->required();
  predict_cmd->add_option("--system", predict.system, "Expected archive kind")
      ->check(CLI::IsMember({"bottom-up", "top-down"}));

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Write evaluation reports");
  evaluate_cmd->add_option("--config", ignored_config, "key=value file (flags win)");
  evaluate_cmd->add_option("--pred", evaluate.predictions)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--labels", evaluate.labels)->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--out", evaluate.out, "Report directory")->required();
  evaluate_cmd->add_option("--model", evaluate.model, "Archive whose data fingerprint to record")
      ->check(CLI::ExistingFile);

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Correlate predictions with speaker features");
  report_cmd->add_option("--config", ignored_config, "key=value file (flags win)");
  report_cmd->add_option("--pred", report.predictions)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--features", report.features)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report.out, "Report directory")->required();

  MelArgs mel;
  auto* mel_cmd = app.add_subcommand("mel", "Log-mel patch of 4000 samples from a WAV file");
  mel_cmd->add_option("--config", ignored_config, "key=value file (flags win)");
  mel_cmd->add_option("--wav", mel.wav)->required()->check(CLI::ExistingFile);
  mel_cmd->add_option("--offset", mel.offset, "First sample")->capture_default_str();
  mel_cmd->add_option("--out", mel.out)->required();

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, "usage", e.what(), kUsage);
  } catch (const std::exception& e) {
    return fail(err, "usage", e.what(), kUsage);
  }

  try {
    if (*synth_cmd) run_synth(synth, out);
    else if (*train_cmd) run_train(train, out, err);
    else if (*predict_cmd) run_predict(predict, out);
    else if (*evaluate_cmd) run_evaluate(evaluate, out);
    else if (*report_cmd) run_report(report, out);
    else if (*mel_cmd) run_mel(mel, out);
    return kOk;
  } catch (const ParseError& e) {
    return fail(err, "parse", e.what(), kData);
  } catch (const ValidationError& e) {
    return fail(err, "validation", e.what(), kData);
  } catch (const DomainError& e) {
    return fail(err, "domain", e.what(), kData);
  } catch (const NumericError& e) {
    return fail(err, "numeric", e.what(), kData);
  } catch (const IntegrityError& e) {
    return fail(err, "integrity", e.what(), kData);
  } catch (const VersionError& e) {
    return fail(err, "version", e.what(), kData);
  } catch (const KindMismatchError& e) {
    return fail(err, "kind_mismatch", e.what(), kData);
  } catch (const IoError& e) {
    return fail(err, "io", e.what(), kData);
  } catch (const std::exception& e) {
    return fail(err, "internal", e.what(), kInternal);
  }
}

}  // namespace phqens::cli
