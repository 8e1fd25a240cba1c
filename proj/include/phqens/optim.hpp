#pragma once

// Multinomial linear-softmax classifier trained with cross-entropy and Adam.
// Every learned component of both ensembles is one of these.

#include "phqens/domain.hpp"
#include "phqens/errors.hpp"
#include "phqens/random.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace phqens {

inline constexpr double kProbabilityFloor = 1e-12;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Numerically stable softmax (max-subtracted).
template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() < 2) throw DomainError("softmax needs at least 2 classes");
  if (!logits.allFinite()) throw NumericError("softmax input is not finite");
  Vec<Scalar> out = (logits.array() - logits.maxCoeff()).exp().matrix();
  out /= out.sum();
  return out;
}

/// -log(p[true_class]) with p floored at 1e-12.
template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& probabilities,
                                       int true_class) {
  using Scalar = typename Derived::Scalar;
  if (true_class < 0 || true_class >= probabilities.size()) {
    throw DomainError("true class " + std::to_string(true_class) + " outside 0.." +
                      std::to_string(probabilities.size() - 1));
  }
  using std::log;
  using std::max;
  return -log(max(probabilities(true_class), Scalar(kProbabilityFloor)));
}

/// Index of the largest coefficient; ties go to the smallest index.
template <typename Derived>
int argmax(const Eigen::MatrixBase<Derived>& values) {
  int best = 0;
  for (Eigen::Index c = 1; c < values.size(); ++c) {
    if (values(c) > values(best)) best = static_cast<int>(c);
  }
  return best;
}

template <typename Scalar>
struct LinearSoftmax {
  Mat<Scalar> weights;  // class_count x input_dim
  Vec<Scalar> bias;     // class_count

  static LinearSoftmax zeros(int class_count, Eigen::Index input_dim = kEmbeddingDim) {
    if (class_count < 2) throw DomainError("class_count must be >= 2");
    return {Mat<Scalar>::Zero(class_count, input_dim), Vec<Scalar>::Zero(class_count)};
  }

  int class_count() const { return static_cast<int>(bias.size()); }
  Eigen::Index input_dim() const { return weights.cols(); }

  void validate() const {
    if (bias.size() < 2) throw DomainError("model needs at least 2 classes");
    if (weights.rows() != bias.size()) throw DomainError("weights rows != bias length");
    if (!weights.allFinite() || !bias.allFinite()) throw NumericError("model not finite");
  }

  friend bool operator==(const LinearSoftmax& a, const LinearSoftmax& b) {
    return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
           a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
  }
};

using LinearSoftmaxModel = LinearSoftmax<double>;

template <typename Scalar, typename Derived>
void check_input(const LinearSoftmax<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.input_dim()) {
    throw DomainError("input has " + std::to_string(x.size()) + " components, model expects " +
                      std::to_string(model.input_dim()));
  }
  if (!x.allFinite()) throw NumericError("input embedding is not finite");
}

template <typename Scalar, typename Derived>
Vec<Scalar> predict_proba(const LinearSoftmax<Scalar>& model,
                          const Eigen::MatrixBase<Derived>& x) {
  check_input(model, x);
  return softmax(model.weights * x + model.bias);
}

template <typename Scalar, typename Derived>
int predict_class(const LinearSoftmax<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  return argmax(predict_proba(model, x));
}

template <typename Scalar, typename Derived>
Scalar loss(const LinearSoftmax<Scalar>& model, const Eigen::MatrixBase<Derived>& x,
            int true_class) {
  return cross_entropy(predict_proba(model, x), true_class);
}

/// Gradients with the same shapes as the model parameters.
template <typename Scalar>
using SoftmaxGradients = LinearSoftmax<Scalar>;

/// Analytic gradient of cross-entropy: row c of dW is (p_c - [c == y]) x.
template <typename Scalar, typename Derived>
SoftmaxGradients<Scalar> grad(const LinearSoftmax<Scalar>& model,
                              const Eigen::MatrixBase<Derived>& x, int true_class) {
  Vec<Scalar> residual = predict_proba(model, x);
  if (true_class < 0 || true_class >= residual.size()) {
    throw DomainError("true class " + std::to_string(true_class) + " out of range");
  }
  residual(true_class) -= Scalar(1);
  return {residual * x.transpose(), residual};
}

template <typename Scalar>
struct AdamState {
  LinearSoftmax<Scalar> first_moment;
  LinearSoftmax<Scalar> second_moment;
  std::int64_t step_count = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);

  static AdamState for_model(const LinearSoftmax<Scalar>& model) {
    AdamState s;
    s.first_moment = LinearSoftmax<Scalar>::zeros(model.class_count(), model.input_dim());
    s.second_moment = s.first_moment;
    return s;
  }
};

namespace detail {

template <typename A, typename B>
bool same_shape(const A& a, const B& b) {
  return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
         a.bias.size() == b.bias.size();
}

template <typename Scalar, typename P, typename G, typename M>
void adam_update(P&& param, const G& g, M&& m, M&& v, const AdamState<Scalar>& s,
                 Scalar learning_rate) {
  m = s.beta1 * m + (Scalar(1) - s.beta1) * g;
  v = s.beta2 * v + (Scalar(1) - s.beta2) * g.cwiseAbs2();
  const auto t = static_cast<Scalar>(s.step_count);
  const Scalar m_scale = Scalar(1) / (Scalar(1) - std::pow(s.beta1, t));
  const Scalar v_scale = Scalar(1) / (Scalar(1) - std::pow(s.beta2, t));
  param.array() -= learning_rate * (m.array() * m_scale) /
                   ((v.array() * v_scale).sqrt() + s.epsilon);
}

}  // namespace detail

/// One bias-corrected Adam update, in place. Increments step_count.
template <typename Scalar>
void adam_step(LinearSoftmax<Scalar>& params, const SoftmaxGradients<Scalar>& grads,
               AdamState<Scalar>& state, Scalar learning_rate) {
  if (!detail::same_shape(params, grads) || !detail::same_shape(params, state.first_moment) ||
      !detail::same_shape(params, state.second_moment)) {
    throw DomainError("adam_step: parameter, gradient and moment shapes differ");
  }
  if (state.step_count < 0) throw DomainError("adam_step: negative step count");
  ++state.step_count;
  detail::adam_update(params.weights, grads.weights, state.first_moment.weights,
                      state.second_moment.weights, state, learning_rate);
  detail::adam_update(params.bias, grads.bias, state.first_moment.bias,
                      state.second_moment.bias, state, learning_rate);
}

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 5;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw DomainError("learning_rate must be positive");
    }
    if (epochs < 1) throw DomainError("epochs must be >= 1");
    if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LabeledEmbedding {
  Embedding x;
  int label = 0;
};

/// Zero-initialised parameters, seeded per-epoch shuffle, mini-batch
/// mean-gradient Adam steps. Pure function of its arguments.
LinearSoftmaxModel train(int class_count, std::span<const LabeledEmbedding> samples,
                         const TrainConfig& config);

/// Fraction of samples whose argmax class equals the label.
double accuracy(const LinearSoftmaxModel& model, std::span<const LabeledEmbedding> samples);

}  // namespace phqens
