#pragma once

// Class-balancing oversampler and saliency-preserving perturbation.

#include "phqens/domain.hpp"
#include "phqens/errors.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace phqens {

struct AugmentConfig {
  int perturb_count = 6;
  int preserve_count = 21;
  /// Absolute per-component noise standard deviation. When unset, each
  /// component uses relative_noise times that component's sample standard
  /// deviation over the reference data.
  std::optional<double> noise_sigma;
  double relative_noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

/// Units of one utterance group with one saliency score per unit.
struct SalientGroup {
  std::vector<Eigen::VectorXd> units;
  std::vector<double> saliency;

  /// Saliency defaults to each unit's Euclidean norm.
  static SalientGroup with_norm_saliency(std::vector<Eigen::VectorXd> units);
};

/// One output slot of the oversampler: which input it copies and whether it
/// is an added replica (false for the single retained original).
struct OversampleDraw {
  std::size_t source = 0;
  bool duplicate = false;
};

/// Every class is brought to the majority count n_max. Each class is
/// replicated ceil(n_max / n_c) times, the replicas beyond the originals are
/// cut to a seeded random subset so exactly n_max remain, and the whole
/// output is shuffled. Every original appears exactly once.
std::vector<OversampleDraw> oversample_plan(std::span<const int> labels, std::uint64_t seed);

template <typename Sample>
std::vector<std::pair<Sample, int>> oversample(std::span<const std::pair<Sample, int>> samples,
                                               std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.second);
  std::vector<std::pair<Sample, int>> out;
  for (const auto& draw : oversample_plan(labels, seed)) out.push_back(samples[draw.source]);
  return out;
}

/// Indices of units ordered by saliency, highest first, ties by lower index.
std::vector<std::size_t> saliency_ranking(std::span<const double> saliency);

/// Indices of the units perturb_group would modify, ascending.
std::vector<std::size_t> perturbed_units(const SalientGroup& group, const AugmentConfig& config);

/// Keeps the preserve_count most salient units bit-identical and adds
/// Gaussian noise to up to perturb_count of the least salient remaining
/// units. Unit order is unchanged.
SalientGroup perturb_group(const SalientGroup& group, const AugmentConfig& config);

/// Per-component noise standard deviation implied by `config` for `reference`.
Eigen::VectorXd resolve_noise_sigma(const AugmentConfig& config,
                                    std::span<const Eigen::VectorXd> reference);

struct AugmentedSample {
  Embedding x;
  int label = 0;
  std::string speaker_id;
  std::size_t source = 0;  // index into the cohort's embedding list
  bool duplicate = false;

  friend bool operator==(const AugmentedSample& a, const AugmentedSample& b) {
    return a.label == b.label && a.speaker_id == b.speaker_id && a.source == b.source &&
           a.duplicate == b.duplicate && a.x == b.x;
  }
};

using LabelExtractor = std::function<int(const SpeakerLabel&)>;

/// Oversamples the cohort's group embeddings on the extracted labels and
/// jitters only the replicas. Originals are carried over unchanged.
std::vector<AugmentedSample> augment_cohort(const Cohort& cohort, const LabelExtractor& label_of,
                                            const AugmentConfig& config);

}  // namespace phqens
