#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace phqens {

inline constexpr int kItemCount = 8;
inline constexpr int kMaxItemScore = 3;
inline constexpr int kMaxTotal = kItemCount * kMaxItemScore;
inline constexpr int kBinaryCutoff = 10;
inline constexpr int kSeverityCount = 5;
inline constexpr int kBandWidth = 5;
inline constexpr Eigen::Index kEmbeddingDim = 64;

/// Item names in questionnaire column order.
inline constexpr std::array<std::string_view, kItemCount> kItemNames = {
    "NoInterest", "Depressed", "Sleep",          "Tired",
    "Appetite",   "Failure",   "Concentrating", "Moving"};

using Embedding = Eigen::VectorXd;

/// Eight item scores, each 0..3. Construction rejects out-of-range scores.
class Phq8Items {
 public:
  Phq8Items() = default;
  explicit Phq8Items(const std::array<int, kItemCount>& items);

  int operator[](std::size_t k) const { return items_[k]; }
  const std::array<int, kItemCount>& values() const { return items_; }
  int total() const;

  friend bool operator==(const Phq8Items&, const Phq8Items&) = default;

 private:
  std::array<int, kItemCount> items_{};
};

enum class Severity : std::uint8_t { None, Mild, Moderate, ModeratelySevere, Severe };

inline constexpr std::array<Severity, kSeverityCount> kAllSeverities = {
    Severity::None, Severity::Mild, Severity::Moderate, Severity::ModeratelySevere,
    Severity::Severe};

Severity severity_of(int total);
bool binary_of(int total);

constexpr int severity_index(Severity s) { return static_cast<int>(s); }
Severity severity_from_index(int index);

/// Inclusive score range of a severity band.
constexpr int band_start(Severity s) { return severity_index(s) * kBandWidth; }
constexpr int band_end(Severity s) { return band_start(s) + kBandWidth - 1; }

std::string_view to_string(Severity s);
Severity parse_severity(std::string_view name);

enum class Split : std::uint8_t { Train, Dev };

std::string_view to_string(Split s);
Split parse_split(std::string_view name);

/// Speaker-level ground truth. Fields are stored independently so that
/// inconsistent rows read from disk can be represented and reported.
struct SpeakerLabel {
  std::string speaker_id;
  Phq8Items items;
  int total = 0;
  bool binary = false;
  Severity severity = Severity::None;

  static SpeakerLabel from_items(std::string speaker_id, const Phq8Items& items);

  friend bool operator==(const SpeakerLabel&, const SpeakerLabel&) = default;
};

struct GroupEmbedding {
  std::string speaker_id;
  std::int64_t group_index = 0;
  Embedding vector;

  friend bool operator==(const GroupEmbedding& a, const GroupEmbedding& b) {
    return a.speaker_id == b.speaker_id && a.group_index == b.group_index &&
           a.vector.size() == b.vector.size() && a.vector == b.vector;
  }
};

struct Cohort {
  std::vector<SpeakerLabel> labels;
  std::vector<GroupEmbedding> embeddings;
  Split split = Split::Train;

  const SpeakerLabel* find_label(std::string_view speaker_id) const;

  friend bool operator==(const Cohort&, const Cohort&) = default;
};

struct Violation {
  std::string speaker_id;
  std::string rule;
  std::string detail;
};

/// Rules: "total", "binary", "severity", "duplicate_speaker",
/// "orphan_embedding", "no_embeddings", "embedding_dim", "embedding_finite".
std::vector<Violation> validate_cohort(const Cohort& cohort);

/// Throws ValidationError with the first violation when the report is non-empty.
void require_valid(const Cohort& cohort);

/// Groups of each speaker, in order of first appearance in `embeddings`.
std::vector<std::vector<GroupEmbedding>> group_by_speaker(
    const std::vector<GroupEmbedding>& embeddings);

struct BottomUpSource {
  Phq8Items predicted_items;
  friend bool operator==(const BottomUpSource&, const BottomUpSource&) = default;
};

struct TopDownSource {
  Severity expert = Severity::None;
  friend bool operator==(const TopDownSource&, const TopDownSource&) = default;
};

/// Speaker-level output of either ensemble. Binary and severity labels are
/// always derived from the total; the factories reject inconsistent input.
class Prediction {
 public:
  using Source = std::variant<BottomUpSource, TopDownSource>;

  static Prediction bottom_up(std::string speaker_id, const Phq8Items& items);
  static Prediction top_down(std::string speaker_id, Severity expert, int total);

  const std::string& speaker_id() const { return speaker_id_; }
  int total() const { return total_; }
  bool binary() const { return binary_; }
  Severity severity() const { return severity_; }
  const Source& source() const { return source_; }
  bool is_bottom_up() const { return std::holds_alternative<BottomUpSource>(source_); }

  friend bool operator==(const Prediction&, const Prediction&) = default;

 private:
  Prediction(std::string speaker_id, int total, Source source);

  std::string speaker_id_;
  int total_ = 0;
  bool binary_ = false;
  Severity severity_ = Severity::None;
  Source source_;
};

}  // namespace phqens
