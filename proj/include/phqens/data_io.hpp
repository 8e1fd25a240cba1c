#pragma once

// Label and embedding file schemas, WAV input, the log-mel front end and the
// seeded synthetic cohort generator.

#include "phqens/domain.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phqens {

// ---------------------------------------------------------------------------
// Text formatting

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

// ---------------------------------------------------------------------------
// Label files: speaker_id,split,q1,...,q8,total,binary

struct LabelRecord {
  SpeakerLabel label;
  Split split = Split::Train;

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

/// Parses and validates every row. Malformed rows raise ParseError;
/// rows whose total or flags disagree with the items raise ValidationError.
std::vector<LabelRecord> read_labels(std::istream& in, const std::string& source = "labels");
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);
void write_labels(std::ostream& out, std::span<const LabelRecord> rows);
void write_labels(const std::filesystem::path& path, std::span<const LabelRecord> rows);

// ---------------------------------------------------------------------------
// Embedding files: speaker_id,group_index,e00..e63

std::vector<GroupEmbedding> read_embeddings(std::istream& in,
                                            const std::string& source = "embeddings");
std::vector<GroupEmbedding> read_embeddings(const std::filesystem::path& path);
void write_embeddings(std::ostream& out, std::span<const GroupEmbedding> rows);
void write_embeddings(const std::filesystem::path& path, std::span<const GroupEmbedding> rows);

/// Builds a validated cohort from label and embedding files. With a split
/// filter, only labels of that split are kept and embeddings belonging to
/// speakers of other splits are dropped.
Cohort load_cohort(const std::filesystem::path& labels, const std::filesystem::path& embeddings,
                   std::optional<Split> split = std::nullopt);

// ---------------------------------------------------------------------------
// Audio front end

inline constexpr int kSampleRate = 16000;
inline constexpr int kPatchSamples = 4000;
inline constexpr int kFftSize = 512;
inline constexpr int kHopLength = 128;
inline constexpr int kMelBands = 128;
inline constexpr int kPatchFrames = (kPatchSamples - kFftSize) / kHopLength + 1;
inline constexpr double kLogFloor = 1e-10;

struct Audio {
  int sample_rate = 0;
  int channels = 0;
  std::vector<double> samples;  // interleaved, scaled to [-1, 1]
};

/// Reads RIFF/WAVE with 16-bit integer or 32-bit float PCM.
Audio read_wav(const std::filesystem::path& path);

/// HTK-mel triangular, area-normalised filterbank spanning 0..8000 Hz.
/// Shape kMelBands x (kFftSize / 2 + 1).
const Eigen::MatrixXd& mel_filterbank();

/// Center frequency in Hz of every mel band.
Eigen::VectorXd mel_center_frequencies();

/// Log-mel patch of 4000 samples at 16 kHz: Hann-windowed 512-point power
/// spectra every 128 samples (no padding), 128 mel bands, natural log
/// floored at 1e-10. Shape 128 x 28.
Eigen::MatrixXd mel_patch(std::span<const double> samples);

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct SyntheticConfig {
  std::array<int, kSeverityCount> train_counts{47, 29, 20, 7, 4};
  std::array<int, kSeverityCount> dev_counts{17, 6, 5, 6, 1};
  int groups_per_speaker = 20;
  double within_speaker_noise_sigma = 0.5;
  double separation_scale = 2.0;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticCohort {
  Cohort train;
  Cohort dev;
  Eigen::MatrixXd item_map;  // 64 x 8
};

/// Exact per-class speaker counts; totals uniform within each band; item
/// vectors uniform over compositions of the total with items capped at 3;
/// group embeddings scattered around separation_scale * A * (items - 1.5).
SyntheticCohort synth_cohort(const SyntheticConfig& config);

/// Label records of a cohort tagged with its split.
std::vector<LabelRecord> label_records(const Cohort& cohort);

}  // namespace phqens
