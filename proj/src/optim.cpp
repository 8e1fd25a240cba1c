#include "phqens/optim.hpp"

#include <algorithm>

namespace phqens {

LinearSoftmaxModel train(int class_count, std::span<const LabeledEmbedding> samples,
                         const TrainConfig& config) {
  config.validate();
  if (samples.empty()) throw DomainError("train: empty sample list");
  const Eigen::Index dim = samples.front().x.size();
  for (const auto& s : samples) {
    if (s.label < 0 || s.label >= class_count) {
      throw DomainError("train: label " + std::to_string(s.label) + " >= class_count " +
                        std::to_string(class_count));
    }
    if (s.x.size() != dim) throw DomainError("train: inconsistent input dimensions");
    if (!s.x.allFinite()) throw NumericError("train: non-finite input");
  }

  auto model = LinearSoftmaxModel::zeros(class_count, dim);
  auto state = AdamState<double>::for_model(model);
  auto batch_grad = LinearSoftmaxModel::zeros(class_count, dim);
  Rng rng(config.seed);
  auto order = iota_indices(samples.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      batch_grad.weights.setZero();
      batch_grad.bias.setZero();
      for (std::size_t i = start; i < stop; ++i) {
        const auto& s = samples[order[i]];
        Eigen::VectorXd residual = softmax(model.weights * s.x + model.bias);
        residual(s.label) -= 1.0;
        batch_grad.weights.noalias() += residual * s.x.transpose();
        batch_grad.bias += residual;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      batch_grad.weights *= inv;
      batch_grad.bias *= inv;
      adam_step(model, batch_grad, state, config.learning_rate);
    }
  }
  return model;
}

double accuracy(const LinearSoftmaxModel& model, std::span<const LabeledEmbedding> samples) {
  if (samples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : samples) {
    if (predict_class(model, s.x) == s.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

}  // namespace phqens
