#include "phqens/augmentation.hpp"

#include "phqens/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

namespace phqens {

void AugmentConfig::validate() const {
  if (perturb_count < 0) throw DomainError("perturb_count must be >= 0");
  if (preserve_count < 0) throw DomainError("preserve_count must be >= 0");
  if (noise_sigma && (!(*noise_sigma >= 0.0) || !std::isfinite(*noise_sigma))) {
    throw DomainError("noise_sigma must be a finite value >= 0");
  }
  if (!(relative_noise >= 0.0) || !std::isfinite(relative_noise)) {
    throw DomainError("relative_noise must be a finite value >= 0");
  }
}

SalientGroup SalientGroup::with_norm_saliency(std::vector<Eigen::VectorXd> units) {
  SalientGroup group{std::move(units), {}};
  group.saliency.reserve(group.units.size());
  for (const auto& u : group.units) group.saliency.push_back(u.norm());
  return group;
}

std::vector<OversampleDraw> oversample_plan(std::span<const int> labels, std::uint64_t seed) {
  if (labels.empty()) throw DomainError("oversample: empty input");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::size_t n_max = 0;
  for (const auto& [label, members] : by_class) n_max = std::max(n_max, members.size());

  Rng rng(seed);
  std::vector<OversampleDraw> out;
  out.reserve(n_max * by_class.size());
  for (const auto& [label, members] : by_class) {
    const std::size_t n = members.size();
    const std::size_t copies = (n_max + n - 1) / n;
    for (std::size_t idx : members) out.push_back({idx, false});

    std::vector<std::size_t> replicas;
    replicas.reserve((copies - 1) * n);
    for (std::size_t c = 1; c < copies; ++c) {
      replicas.insert(replicas.end(), members.begin(), members.end());
    }
    // Truncate to a seeded random subset of exactly n_max - n replicas.
    rng.shuffle(replicas);
    replicas.resize(n_max - n);
    std::sort(replicas.begin(), replicas.end());
    for (std::size_t idx : replicas) out.push_back({idx, true});
  }
  rng.shuffle(out);
  return out;
}

std::vector<std::size_t> saliency_ranking(std::span<const double> saliency) {
  auto order = iota_indices(saliency.size());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });
  return order;
}

std::vector<std::size_t> perturbed_units(const SalientGroup& group, const AugmentConfig& config) {
  config.validate();
  if (group.saliency.size() != group.units.size()) {
    throw DomainError("saliency length differs from unit count");
  }
  for (double s : group.saliency) {
    if (!std::isfinite(s)) throw NumericError("saliency is not finite");
  }
  const auto ranking = saliency_ranking(group.saliency);
  const std::size_t preserved =
      std::min(ranking.size(), static_cast<std::size_t>(config.preserve_count));
  const std::size_t remainder = ranking.size() - preserved;
  const std::size_t perturbed =
      std::min(remainder, static_cast<std::size_t>(config.perturb_count));
  std::vector<std::size_t> out(ranking.end() - static_cast<std::ptrdiff_t>(perturbed),
                               ranking.end());
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::VectorXd resolve_noise_sigma(const AugmentConfig& config,
                                    std::span<const Eigen::VectorXd> reference) {
  config.validate();
  if (reference.empty()) throw DomainError("noise reference set is empty");
  const Eigen::Index dim = reference.front().size();
  if (config.noise_sigma) return Eigen::VectorXd::Constant(dim, *config.noise_sigma);
  if (reference.size() < 2) return Eigen::VectorXd::Zero(dim);

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const auto& v : reference) mean += v;
  mean /= static_cast<double>(reference.size());
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  for (const auto& v : reference) sq += (v - mean).cwiseAbs2();
  return config.relative_noise * (sq / static_cast<double>(reference.size() - 1)).cwiseSqrt();
}

namespace {

void add_noise(Eigen::VectorXd& v, const Eigen::VectorXd& sigma, Rng& rng) {
  for (Eigen::Index d = 0; d < v.size(); ++d) {
    if (sigma(d) > 0.0) v(d) += rng.normal(0.0, sigma(d));
  }
}

}  // namespace

SalientGroup perturb_group(const SalientGroup& group, const AugmentConfig& config) {
  const auto targets = perturbed_units(group, config);
  SalientGroup out = group;
  if (targets.empty()) return out;
  for (const auto& u : group.units) {
    if (u.size() != group.units.front().size()) throw DomainError("unit dimensions differ");
  }
  const Eigen::VectorXd sigma = resolve_noise_sigma(config, group.units);
  Rng rng(config.seed);
  for (std::size_t idx : targets) add_noise(out.units[idx], sigma, rng);
  return out;
}

std::vector<AugmentedSample> augment_cohort(const Cohort& cohort, const LabelExtractor& label_of,
                                            const AugmentConfig& config) {
  config.validate();
  require_valid(cohort);
  if (cohort.embeddings.empty()) throw DomainError("augment_cohort: cohort has no embeddings");

  std::unordered_map<std::string, int> speaker_label;
  for (const auto& label : cohort.labels) speaker_label.emplace(label.speaker_id, label_of(label));

  std::vector<int> labels;
  std::vector<Eigen::VectorXd> reference;
  labels.reserve(cohort.embeddings.size());
  reference.reserve(cohort.embeddings.size());
  for (const auto& g : cohort.embeddings) {
    labels.push_back(speaker_label.at(g.speaker_id));
    reference.push_back(g.vector);
  }
  const Eigen::VectorXd sigma = resolve_noise_sigma(config, reference);

  std::vector<AugmentedSample> out;
  const auto plan = oversample_plan(labels, config.seed);
  out.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& draw = plan[i];
    const auto& g = cohort.embeddings[draw.source];
    AugmentedSample sample{g.vector, labels[draw.source], g.speaker_id, draw.source,
                           draw.duplicate};
    if (draw.duplicate) {
      Rng rng(derive_seed(config.seed, i));
      add_noise(sample.x, sigma, rng);
    }
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace phqens
