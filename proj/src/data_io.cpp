#include "phqens/data_io.hpp"

#include "csv.hpp"
#include "phqens/errors.hpp"
#include "phqens/random.hpp"

#include <fftw3.h>

#include <charconv>
#include <cstring>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <unordered_set>

namespace phqens {

using csv::next_line;
using csv::open_input;
using csv::open_output;
using csv::parse_int;
using csv::split_fields;

std::string format_double(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw NumericError("cannot format value");
  return std::string(buf.data(), end);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw DomainError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

namespace {

std::string labels_header() {
  std::string h = "speaker_id,split";
  for (int k = 1; k <= kItemCount; ++k) h += ",q" + std::to_string(k);
  return h + ",total,binary";
}

std::string embeddings_header() {
  std::string h = "speaker_id,group_index";
  for (int d = 0; d < kEmbeddingDim; ++d) {
    h += (d < 10 ? ",e0" : ",e") + std::to_string(d);
  }
  return h;
}

void check_speaker_id(const std::string& id) {
  if (id.empty() || id.find_first_of(",\n\r") != std::string::npos) {
    throw DomainError("speaker_id must be non-empty without commas or newlines: '" + id + "'");
  }
}

}  // namespace

std::vector<LabelRecord> read_labels(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!next_line(in, line)) throw ParseError(source, 1, "missing header");
  if (line != labels_header()) {
    throw ParseError(source, 1, "unexpected header, expected '" + labels_header() + "'");
  }
  constexpr std::size_t kColumns = 2 + kItemCount + 2;

  std::vector<LabelRecord> rows;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != kColumns) {
      throw ParseError(source, line_no, "expected " + std::to_string(kColumns) +
                                            " columns, found " + std::to_string(fields.size()));
    }
    LabelRecord rec;
    std::array<int, kItemCount> items{};
    int binary = 0;
    try {
      rec.label.speaker_id = std::string(fields[0]);
      check_speaker_id(rec.label.speaker_id);
      rec.split = parse_split(fields[1]);
      for (std::size_t k = 0; k < kItemCount; ++k) items[k] = parse_int(fields[2 + k]);
      rec.label.total = parse_int(fields[2 + kItemCount]);
      binary = parse_int(fields[3 + kItemCount]);
      if (binary != 0 && binary != 1) throw DomainError("binary must be 0 or 1");
    } catch (const DomainError& e) {
      throw ParseError(source, line_no, e.what());
    }
    try {
      rec.label.items = Phq8Items(items);
    } catch (const DomainError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": speaker " +
                            rec.label.speaker_id + ": " + e.what());
    }
    rec.label.binary = binary == 1;
    const int item_sum = rec.label.items.total();
    if (rec.label.total != item_sum) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": speaker " +
                            rec.label.speaker_id + ": total " + std::to_string(rec.label.total) +
                            " != item sum " + std::to_string(item_sum));
    }
    if (rec.label.binary != binary_of(rec.label.total)) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": speaker " +
                            rec.label.speaker_id + ": binary flag inconsistent with total");
    }
    rec.label.severity = severity_of(rec.label.total);
    rows.push_back(std::move(rec));
  }
  return rows;
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_labels(in, path.string());
}

void write_labels(std::ostream& out, std::span<const LabelRecord> rows) {
  out << labels_header() << '\n';
  for (const auto& r : rows) {
    check_speaker_id(r.label.speaker_id);
    out << r.label.speaker_id << ',' << to_string(r.split);
    for (int v : r.label.items.values()) out << ',' << v;
    out << ',' << r.label.total << ',' << (r.label.binary ? 1 : 0) << '\n';
  }
}

void write_labels(const std::filesystem::path& path, std::span<const LabelRecord> rows) {
  auto out = open_output(path);
  write_labels(out, rows);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<GroupEmbedding> read_embeddings(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!next_line(in, line)) throw ParseError(source, 1, "missing header");
  if (line != embeddings_header()) {
    throw ParseError(source, 1, "unexpected header, expected speaker_id,group_index,e00..e63");
  }
  std::vector<GroupEmbedding> rows;
  while (next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != static_cast<std::size_t>(2 + kEmbeddingDim)) {
      throw ParseError(source, line_no,
                       "expected 64 value columns, found " + std::to_string(fields.size() - 2));
    }
    GroupEmbedding g;
    g.speaker_id = std::string(fields[0]);
    g.vector.resize(kEmbeddingDim);
    try {
      check_speaker_id(g.speaker_id);
      const int index = parse_int(fields[1]);
      if (index < 0) throw DomainError("group_index must be non-negative");
      g.group_index = index;
      for (Eigen::Index d = 0; d < kEmbeddingDim; ++d) {
        g.vector(d) = parse_double(fields[static_cast<std::size_t>(2 + d)]);
      }
    } catch (const DomainError& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (!g.vector.allFinite()) throw ParseError(source, line_no, "non-finite embedding value");
    rows.push_back(std::move(g));
  }
  return rows;
}

std::vector<GroupEmbedding> read_embeddings(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_embeddings(in, path.string());
}

void write_embeddings(std::ostream& out, std::span<const GroupEmbedding> rows) {
  out << embeddings_header() << '\n';
  for (const auto& g : rows) {
    check_speaker_id(g.speaker_id);
    if (g.vector.size() != kEmbeddingDim) throw DomainError("embedding must have 64 components");
    out << g.speaker_id << ',' << g.group_index;
    for (Eigen::Index d = 0; d < kEmbeddingDim; ++d) out << ',' << format_double(g.vector(d));
    out << '\n';
  }
}

void write_embeddings(const std::filesystem::path& path, std::span<const GroupEmbedding> rows) {
  auto out = open_output(path);
  write_embeddings(out, rows);
  if (!out) throw IoError("failed writing " + path.string());
}

Cohort load_cohort(const std::filesystem::path& labels, const std::filesystem::path& embeddings,
                   std::optional<Split> split) {
  const auto records = read_labels(labels);
  auto groups = read_embeddings(embeddings);

  Cohort cohort;
  std::unordered_set<std::string> excluded;
  for (const auto& r : records) {
    if (split && r.split != *split) {
      excluded.insert(r.label.speaker_id);
      continue;
    }
    cohort.labels.push_back(r.label);
  }
  if (split) cohort.split = *split;
  else if (!records.empty()) cohort.split = records.front().split;
  for (auto& g : groups) {
    if (!excluded.contains(g.speaker_id)) cohort.embeddings.push_back(std::move(g));
  }
  require_valid(cohort);
  return cohort;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
T read_le(const std::vector<char>& bytes, std::size_t offset, const std::string& source) {
  T value{};
  if (offset + sizeof(T) > bytes.size()) throw ParseError(source, 0, "truncated WAV file");
  std::memcpy(&value, bytes.data() + offset, sizeof(T));
  return value;
}

}  // namespace

Audio read_wav(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::string_view(bytes.data(), 4) != "RIFF" ||
      std::string_view(bytes.data() + 8, 4) != "WAVE") {
    throw ParseError(source, 0, "not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_format = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string_view id(bytes.data() + pos, 4);
    const auto size = read_le<std::uint32_t>(bytes, pos + 4, source);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      format = read_le<std::uint16_t>(bytes, body, source);
      channels = read_le<std::uint16_t>(bytes, body + 2, source);
      rate = read_le<std::uint32_t>(bytes, body + 4, source);
      bits = read_le<std::uint16_t>(bytes, body + 14, source);
      if (format == 0xFFFE) format = read_le<std::uint16_t>(bytes, body + 24, source);
      have_format = true;
    } else if (id == "data") {
      if (!have_format) throw ParseError(source, 0, "data chunk before fmt chunk");
      if (body + size > bytes.size()) throw ParseError(source, 0, "truncated data chunk");
      Audio audio{static_cast<int>(rate), static_cast<int>(channels), {}};
      if (format == 1 && bits == 16) {
        for (std::size_t off = body; off + 2 <= body + size; off += 2) {
          audio.samples.push_back(read_le<std::int16_t>(bytes, off, source) / 32768.0);
        }
      } else if (format == 3 && bits == 32) {
        for (std::size_t off = body; off + 4 <= body + size; off += 4) {
          audio.samples.push_back(read_le<float>(bytes, off, source));
        }
      } else {
        throw ParseError(source, 0, "unsupported WAV encoding (need 16-bit PCM or float)");
      }
      return audio;
    }
    pos = body + size + (size & 1U);
  }
  throw ParseError(source, 0, "no data chunk");
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::VectorXd mel_edges() {
  const double top = hz_to_mel(kSampleRate / 2.0);
  Eigen::VectorXd edges(kMelBands + 2);
  for (int i = 0; i < kMelBands + 2; ++i) {
    edges(i) = mel_to_hz(top * i / static_cast<double>(kMelBands + 1));
  }
  return edges;
}

Eigen::MatrixXd build_filterbank() {
  constexpr int bins = kFftSize / 2 + 1;
  const Eigen::VectorXd edges = mel_edges();
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(kMelBands, bins);
  for (int m = 0; m < kMelBands; ++m) {
    const double lo = edges(m), center = edges(m + 1), hi = edges(m + 2);
    const double norm = 2.0 / (hi - lo);
    for (int k = 0; k < bins; ++k) {
      const double f = k * static_cast<double>(kSampleRate) / kFftSize;
      const double w = std::min((f - lo) / (center - lo), (hi - f) / (hi - center));
      if (w > 0.0) fb(m, k) = w * norm;
    }
  }
  return fb;
}

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

const Eigen::MatrixXd& mel_filterbank() {
  static const Eigen::MatrixXd fb = build_filterbank();
  return fb;
}

Eigen::VectorXd mel_center_frequencies() { return mel_edges().segment(1, kMelBands); }

Eigen::MatrixXd mel_patch(std::span<const double> samples) {
  if (samples.size() != static_cast<std::size_t>(kPatchSamples)) {
    throw DomainError("mel_patch needs exactly 4000 samples, got " +
                      std::to_string(samples.size()));
  }
  for (double s : samples) {
    if (!std::isfinite(s)) throw NumericError("mel_patch: non-finite sample");
  }

  constexpr int bins = kFftSize / 2 + 1;
  auto* frame = static_cast<double*>(fftw_malloc(sizeof(double) * kFftSize));
  auto* spectrum = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins));
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(kFftSize, frame, spectrum, FFTW_ESTIMATE);
  }

  Eigen::VectorXd window(kFftSize);
  for (int n = 0; n < kFftSize; ++n) {
    window(n) = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / kFftSize);
  }

  Eigen::MatrixXd power(bins, kPatchFrames);
  for (int t = 0; t < kPatchFrames; ++t) {
    for (int n = 0; n < kFftSize; ++n) {
      frame[n] = samples[static_cast<std::size_t>(t * kHopLength + n)] * window(n);
    }
    fftw_execute(plan);
    for (int k = 0; k < bins; ++k) {
      power(k, t) = spectrum[k][0] * spectrum[k][0] + spectrum[k][1] * spectrum[k][1];
    }
  }
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(frame);
  fftw_free(spectrum);

  return (mel_filterbank() * power).unaryExpr([](double e) {
    return std::log(std::max(e, kLogFloor));
  });
}

// ---------------------------------------------------------------------------

void SyntheticConfig::validate() const {
  int nonzero = 0;
  for (const auto* counts : {&train_counts, &dev_counts}) {
    for (int c : *counts) {
      if (c < 0) throw DomainError("speaker counts must be >= 0");
      nonzero += c;
    }
  }
  if (nonzero == 0) throw DomainError("at least one speaker count must be nonzero");
  if (groups_per_speaker < 1) throw DomainError("groups_per_speaker must be >= 1");
  if (!(within_speaker_noise_sigma >= 0.0)) throw DomainError("noise sigma must be >= 0");
  if (!std::isfinite(separation_scale)) throw DomainError("separation_scale must be finite");
}

namespace {

// ways[n][s]: compositions of s into n parts, each 0..3.
using CompositionTable = std::array<std::array<double, kMaxTotal + 1>, kItemCount + 1>;

const CompositionTable& composition_counts() {
  static const CompositionTable table = [] {
    CompositionTable ways{};
    ways[0][0] = 1.0;
    for (int n = 1; n <= kItemCount; ++n) {
      for (int s = 0; s <= kMaxTotal; ++s) {
        for (int v = 0; v <= kMaxItemScore && v <= s; ++v) ways[n][s] += ways[n - 1][s - v];
      }
    }
    return ways;
  }();
  return table;
}

Phq8Items random_composition(int total, Rng& rng) {
  const auto& ways = composition_counts();
  std::array<int, kItemCount> items{};
  int remaining = total;
  for (int k = 0; k < kItemCount; ++k) {
    const int parts_left = kItemCount - k - 1;
    double u = rng.uniform() * ways[parts_left + 1][remaining];
    int chosen = 0;
    for (int v = 0; v <= kMaxItemScore && v <= remaining; ++v) {
      const double w = ways[parts_left][remaining - v];
      chosen = w > 0.0 ? v : chosen;
      if (u < w) break;
      u -= w;
    }
    items[k] = chosen;
    remaining -= chosen;
  }
  return Phq8Items(items);
}

Cohort synth_split(const std::array<int, kSeverityCount>& counts, Split split,
                   const SyntheticConfig& config, const Eigen::MatrixXd& item_map,
                   std::uint64_t stream) {
  Rng rng(derive_seed(config.seed, stream));
  std::vector<Severity> bands;
  for (Severity s : kAllSeverities) {
    bands.insert(bands.end(), static_cast<std::size_t>(counts[severity_index(s)]), s);
  }
  rng.shuffle(bands);

  Cohort cohort;
  cohort.split = split;
  const std::string prefix = split == Split::Train ? "tr" : "dv";
  for (std::size_t i = 0; i < bands.size(); ++i) {
    std::string id = std::to_string(i + 1);
    id = prefix + std::string(id.size() < 3 ? 3 - id.size() : 0, '0') + id;
    const int total = band_start(bands[i]) + static_cast<int>(rng.index(kBandWidth));
    const Phq8Items items = random_composition(total, rng);

    Eigen::VectorXd item_vec(kItemCount);
    for (int k = 0; k < kItemCount; ++k) item_vec(k) = items[static_cast<std::size_t>(k)] - 1.5;
    const Eigen::VectorXd mean = config.separation_scale * item_map * item_vec;
    for (int g = 0; g < config.groups_per_speaker; ++g) {
      Eigen::VectorXd v(kEmbeddingDim);
      for (Eigen::Index d = 0; d < kEmbeddingDim; ++d) {
        v(d) = mean(d) + rng.normal(0.0, config.within_speaker_noise_sigma);
      }
      cohort.embeddings.push_back({id, g, std::move(v)});
    }
    cohort.labels.push_back(SpeakerLabel::from_items(std::move(id), items));
  }
  return cohort;
}

}  // namespace

SyntheticCohort synth_cohort(const SyntheticConfig& config) {
  config.validate();
  Rng map_rng(derive_seed(config.seed, 0));
  Eigen::MatrixXd item_map(kEmbeddingDim, kItemCount);
  for (Eigen::Index c = 0; c < item_map.cols(); ++c) {
    for (Eigen::Index r = 0; r < item_map.rows(); ++r) item_map(r, c) = map_rng.normal();
  }
  SyntheticCohort out;
  out.item_map = item_map;
  out.train = synth_split(config.train_counts, Split::Train, config, item_map, 1);
  out.dev = synth_split(config.dev_counts, Split::Dev, config, item_map, 2);
  return out;
}

std::vector<LabelRecord> label_records(const Cohort& cohort) {
  std::vector<LabelRecord> rows;
  rows.reserve(cohort.labels.size());
  for (const auto& l : cohort.labels) rows.push_back({l, cohort.split});
  return rows;
}

}  // namespace phqens
