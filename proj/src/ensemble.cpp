#include "phqens/ensemble.hpp"

#include <future>
#include <map>

namespace phqens {

int mode(std::span<const int> values) {
  if (values.empty()) throw DomainError("mode of an empty list");
  std::map<int, int> counts;
  for (int v : values) ++counts[v];
  int best = counts.begin()->first;
  int best_count = 0;
  for (const auto& [value, count] : counts) {
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

int soft_vote(std::span<const Eigen::VectorXd> probabilities) {
  if (probabilities.empty()) throw DomainError("soft_vote of an empty list");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(probabilities.front().size());
  for (const auto& p : probabilities) {
    if (p.size() != sum.size()) throw DomainError("soft_vote: probability lengths differ");
    sum += p;
  }
  return argmax(sum);
}

TrainConfig bottom_up_defaults() { return TrainConfig{0.001, 5, 32, 0}; }
TrainConfig top_down_defaults() { return TrainConfig{0.001, 10, 32, 0}; }

const std::string& single_speaker(std::span<const GroupEmbedding> groups) {
  if (groups.empty()) throw DomainError("no groups supplied for speaker");
  const auto& id = groups.front().speaker_id;
  for (const auto& g : groups) {
    if (g.speaker_id != id) {
      throw DomainError("groups from several speakers: " + id + ", " + g.speaker_id);
    }
  }
  return id;
}

namespace {

void require_classes(const LinearSoftmaxModel& model, int class_count, const std::string& what) {
  model.validate();
  if (model.class_count() != class_count) {
    throw DomainError(what + " must have " + std::to_string(class_count) + " classes");
  }
  if (model.input_dim() != kEmbeddingDim) {
    throw DomainError(what + " must take " + std::to_string(kEmbeddingDim) + "-dim input");
  }
}

std::vector<LabeledEmbedding> to_training_samples(const std::vector<AugmentedSample>& augmented) {
  std::vector<LabeledEmbedding> samples;
  samples.reserve(augmented.size());
  for (const auto& a : augmented) samples.push_back({a.x, a.label});
  return samples;
}

LinearSoftmaxModel train_augmented(const Cohort& cohort, const LabelExtractor& label_of,
                                   int class_count, TrainConfig config, AugmentConfig augment,
                                   std::uint64_t stream) {
  config.seed ^= stream;
  augment.seed ^= stream;
  const auto samples = to_training_samples(augment_cohort(cohort, label_of, augment));
  return train(class_count, samples, config);
}

}  // namespace

void BottomUpEnsemble::validate() const {
  for (std::size_t k = 0; k < item_models.size(); ++k) {
    require_classes(item_models[k], kItemClassCount,
                    "item model " + std::string(kItemNames[k]));
  }
}

BottomUpEnsemble train_bottom_up(const Cohort& cohort, const TrainConfig& config,
                                 const AugmentConfig& augment) {
  config.validate();
  augment.validate();
  require_valid(cohort);
  if (cohort.labels.empty()) throw DomainError("train_bottom_up: empty cohort");

  std::array<std::future<LinearSoftmaxModel>, kItemCount> jobs;
  for (std::size_t k = 0; k < kItemCount; ++k) {
    jobs[k] = std::async(std::launch::async, [&, k] {
      return train_augmented(
          cohort, [k](const SpeakerLabel& l) { return l.items[k]; }, kItemClassCount, config,
          augment, k + 1);
    });
  }
  BottomUpEnsemble ensemble{{}, config, augment};
  for (std::size_t k = 0; k < kItemCount; ++k) ensemble.item_models[k] = jobs[k].get();
  return ensemble;
}

Phq8Items predict_items(const BottomUpEnsemble& ensemble, const Embedding& x) {
  std::array<int, kItemCount> items{};
  for (std::size_t k = 0; k < kItemCount; ++k) {
    items[k] = predict_class(ensemble.item_models[k], x);
  }
  return Phq8Items(items);
}

Prediction predict_bottom_up(const BottomUpEnsemble& ensemble,
                             std::span<const GroupEmbedding> groups) {
  const auto& speaker = single_speaker(groups);
  std::array<std::vector<int>, kItemCount> votes;
  for (const auto& g : groups) {
    const auto items = predict_items(ensemble, g.vector);
    for (std::size_t k = 0; k < kItemCount; ++k) votes[k].push_back(items[k]);
  }
  std::array<int, kItemCount> modes{};
  for (std::size_t k = 0; k < kItemCount; ++k) modes[k] = mode(votes[k]);
  return Prediction::bottom_up(speaker, Phq8Items(modes));
}

void TopDownMoE::validate() const {
  require_classes(router, kSeverityCount, "router");
  for (Severity band : kAllSeverities) {
    require_classes(expert(band), kBandWidth, "expert " + std::string(to_string(band)));
  }
}

TopDownTraining train_top_down(const Cohort& cohort, const TrainConfig& config,
                               const AugmentConfig& augment) {
  config.validate();
  augment.validate();
  require_valid(cohort);
  if (cohort.labels.empty()) throw DomainError("train_top_down: empty cohort");

  auto router_job = std::async(std::launch::async, [&] {
    return train_augmented(
        cohort, [](const SpeakerLabel& l) { return severity_index(l.severity); },
        kSeverityCount, config, augment, 0);
  });

  TopDownTraining result;
  std::array<std::future<LinearSoftmaxModel>, kSeverityCount> expert_jobs;
  std::array<Cohort, kSeverityCount> subsets;
  for (Severity band : kAllSeverities) {
    const auto j = static_cast<std::size_t>(severity_index(band));
    auto& subset = subsets[j];
    subset.split = cohort.split;
    for (const auto& l : cohort.labels) {
      if (l.severity == band) subset.labels.push_back(l);
    }
    for (const auto& g : cohort.embeddings) {
      const auto* l = cohort.find_label(g.speaker_id);
      if (l->severity == band) subset.embeddings.push_back(g);
    }
    if (subset.labels.empty()) {
      result.warnings.push_back("expert " + std::string(to_string(band)) +
                                " has no training speakers; using a uniform predictor");
      continue;
    }
    expert_jobs[j] = std::async(std::launch::async, [&subset, band, &config, &augment, j] {
      return train_augmented(
          subset, [band](const SpeakerLabel& l) { return l.total - band_start(band); },
          kBandWidth, config, augment, j + 1);
    });
  }

  auto& moe = result.moe;
  moe.train_config = config;
  moe.augment_config = augment;
  moe.router = router_job.get();
  for (std::size_t j = 0; j < kSeverityCount; ++j) {
    moe.expert_trained[j] = expert_jobs[j].valid();
    moe.experts[j] = moe.expert_trained[j] ? expert_jobs[j].get()
                                           : LinearSoftmaxModel::zeros(kBandWidth);
  }
  return result;
}

Severity select_expert(const TopDownMoE& moe, std::span<const GroupEmbedding> groups) {
  single_speaker(groups);
  std::vector<int> votes;
  votes.reserve(groups.size());
  for (const auto& g : groups) votes.push_back(predict_class(moe.router, g.vector));
  return severity_from_index(mode(votes));
}

Prediction predict_top_down(const TopDownMoE& moe, std::span<const GroupEmbedding> groups) {
  const auto& speaker = single_speaker(groups);
  const Severity band = select_expert(moe, groups);
  std::vector<Eigen::VectorXd> probabilities;
  probabilities.reserve(groups.size());
  for (const auto& g : groups) probabilities.push_back(predict_proba(moe.expert(band), g.vector));
  return Prediction::top_down(speaker, band, band_start(band) + soft_vote(probabilities));
}

}  // namespace phqens
