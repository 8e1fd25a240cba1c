#pragma once

// Bottom-up item ensemble and top-down router/expert mixture.

#include "phqens/augmentation.hpp"
#include "phqens/domain.hpp"
#include "phqens/optim.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace phqens {

/// Most frequent value; ties go to the smallest value.
int mode(std::span<const int> values);

/// Sums per-group probability vectors and returns the argmax class
/// (smallest index on ties).
int soft_vote(std::span<const Eigen::VectorXd> probabilities);

inline constexpr int kItemClassCount = kMaxItemScore + 1;

TrainConfig bottom_up_defaults();
TrainConfig top_down_defaults();

// ---------------------------------------------------------------------------
// Bottom-up: one 4-class model per questionnaire item.

struct BottomUpEnsemble {
  std::array<LinearSoftmaxModel, kItemCount> item_models;
  TrainConfig train_config;
  AugmentConfig augment_config;

  void validate() const;
  friend bool operator==(const BottomUpEnsemble&, const BottomUpEnsemble&) = default;
};

/// Item k (1-based) trains with seeds config.seed ^ k and augment.seed ^ k.
BottomUpEnsemble train_bottom_up(const Cohort& cohort, const TrainConfig& config,
                                 const AugmentConfig& augment);

/// Item scores of a single group embedding.
Phq8Items predict_items(const BottomUpEnsemble& ensemble, const Embedding& x);

Prediction predict_bottom_up(const BottomUpEnsemble& ensemble,
                             std::span<const GroupEmbedding> groups);

// ---------------------------------------------------------------------------
// Top-down: a 5-way severity router and one 5-class expert per band. Expert
// class c maps to score band_start(band) + c.

struct TopDownMoE {
  LinearSoftmaxModel router;
  std::array<LinearSoftmaxModel, kSeverityCount> experts;
  std::array<bool, kSeverityCount> expert_trained{};
  TrainConfig train_config;
  AugmentConfig augment_config;

  void validate() const;
  const LinearSoftmaxModel& expert(Severity band) const {
    return experts[static_cast<std::size_t>(severity_index(band))];
  }
  friend bool operator==(const TopDownMoE&, const TopDownMoE&) = default;
};

struct TopDownTraining {
  TopDownMoE moe;
  std::vector<std::string> warnings;
};

/// Router and experts are trained independently. A band without speakers
/// leaves its expert as a uniform predictor and records a warning.
TopDownTraining train_top_down(const Cohort& cohort, const TrainConfig& config,
                               const AugmentConfig& augment);

/// Router argmax per group, then the mode.
Severity select_expert(const TopDownMoE& moe, std::span<const GroupEmbedding> groups);

Prediction predict_top_down(const TopDownMoE& moe, std::span<const GroupEmbedding> groups);

/// Speaker id shared by all groups; throws on empty or mixed input.
const std::string& single_speaker(std::span<const GroupEmbedding> groups);

}  // namespace phqens
