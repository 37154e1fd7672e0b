#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "diana/types.hpp"

namespace diana {

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs_per_round = 30;
  int batch_size = 32;
  double lambda_c = 0.5;
  double lambda_e = 0.1;
  double aug_noise_sigma = 0.1;
  double aug_dropout_p = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning_rate must be > 0");
    if (epochs_per_round < 0) throw std::invalid_argument("epochs_per_round must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (!(aug_noise_sigma >= 0)) throw std::invalid_argument("aug_noise_sigma must be >= 0");
    if (!(aug_dropout_p >= 0 && aug_dropout_p < 1))
      throw std::invalid_argument("aug_dropout_p must be in [0, 1)");
  }
};

/// One tanh hidden layer (the feature extractor) followed by a softmax head.
/// The same layout doubles as the gradient container.
template <typename Scalar>
struct Classifier {
  Mat<Scalar> w_hidden;  // d_feat x d_in
  Vec<Scalar> b_hidden;  // d_feat
  Mat<Scalar> w_out;     // C x d_feat
  Vec<Scalar> b_out;     // C

  int input_dim() const { return static_cast<int>(w_hidden.cols()); }
  int feature_dim() const { return static_cast<int>(w_hidden.rows()); }
  int num_classes() const { return static_cast<int>(w_out.rows()); }

  static Classifier zeros(int d_in, int d_feat, int num_classes) {
    return {Mat<Scalar>::Zero(d_feat, d_in), Vec<Scalar>::Zero(d_feat),
            Mat<Scalar>::Zero(num_classes, d_feat), Vec<Scalar>::Zero(num_classes)};
  }

  bool all_finite() const {
    return w_hidden.allFinite() && b_hidden.allFinite() && w_out.allFinite() &&
           b_out.allFinite();
  }

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(w_hidden.size() + b_hidden.size() + w_out.size() +
                                    b_out.size());
  }

  /// Flat view over all parameters, in the order w_hidden, b_hidden, w_out,
  /// b_out (column-major within each matrix).
  Scalar& parameter(std::size_t i) {
    auto idx = static_cast<Eigen::Index>(i);
    if (idx < w_hidden.size()) return w_hidden.data()[idx];
    idx -= w_hidden.size();
    if (idx < b_hidden.size()) return b_hidden.data()[idx];
    idx -= b_hidden.size();
    if (idx < w_out.size()) return w_out.data()[idx];
    idx -= w_out.size();
    return b_out.data()[idx];
  }
  Scalar parameter(std::size_t i) const { return const_cast<Classifier&>(*this).parameter(i); }

  Classifier& operator+=(const Classifier& o) {
    w_hidden += o.w_hidden;
    b_hidden += o.b_hidden;
    w_out += o.w_out;
    b_out += o.b_out;
    return *this;
  }
  Classifier& operator*=(Scalar s) {
    w_hidden *= s;
    b_hidden *= s;
    w_out *= s;
    b_out *= s;
    return *this;
  }
  friend Classifier operator*(Scalar s, Classifier c) { return c *= s; }
  friend Classifier operator+(Classifier a, const Classifier& b) { return a += b; }

  bool operator==(const Classifier&) const = default;
};

using Model = Classifier<double>;

template <typename Scalar>
Classifier<Scalar> make_classifier(int d_in, int d_feat, int num_classes, std::uint64_t seed) {
  if (d_in < 1 || d_feat < 1 || num_classes < 1)
    throw std::invalid_argument("make_classifier: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto c = Classifier<Scalar>::zeros(d_in, d_feat, num_classes);
  const double s_hidden = 1.0 / std::sqrt(static_cast<double>(d_in));
  const double s_out = 1.0 / std::sqrt(static_cast<double>(d_feat));
  for (Eigen::Index i = 0; i < c.w_hidden.size(); ++i)
    c.w_hidden.data()[i] = static_cast<Scalar>(s_hidden * normal(rng));
  for (Eigen::Index i = 0; i < c.w_out.size(); ++i)
    c.w_out.data()[i] = static_cast<Scalar>(s_out * normal(rng));
  return c;
}

template <typename Scalar>
struct ForwardResult {
  Vec<Scalar> feature;  // G(x)
  Vec<Scalar> probs;    // P(x)
};

template <typename Derived>
Vec<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = logits.maxCoeff();
  Vec<Scalar> e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const Classifier<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.input_dim()) throw std::invalid_argument("forward: dimension mismatch");
  if (!x.allFinite()) throw std::invalid_argument("forward: non-finite input");
  ForwardResult<Scalar> r;
  r.feature = (model.w_hidden * x + model.b_hidden).array().tanh().matrix();
  r.probs = softmax(model.w_out * r.feature + model.b_out);
  return r;
}

template <typename Scalar, typename Derived>
ClassIndex predict(const Classifier<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  Eigen::Index arg = 0;
  forward(model, x).probs.maxCoeff(&arg);
  return static_cast<ClassIndex>(arg);
}

/// Input with a target class: a ground-truth label for the supervised term,
/// a similarity-based label for the consistency term.
template <typename Scalar>
struct Example {
  Vec<Scalar> x;
  ClassIndex y = 0;
};

template <typename Scalar>
struct LossAndGradient {
  Scalar loss{0};
  Classifier<Scalar> grad;
};

namespace detail {

template <typename Scalar>
void check_label(const Classifier<Scalar>& m, ClassIndex y) {
  if (y < 0 || y >= m.num_classes()) throw std::invalid_argument("label out of range");
}

/// Accumulates d(loss)/d(params) given dL/dlogits for a single input.
template <typename Scalar>
void backprop(const Classifier<Scalar>& model, const Vec<Scalar>& x,
              const ForwardResult<Scalar>& fwd, const Vec<Scalar>& d_logits,
              Classifier<Scalar>& grad) {
  grad.w_out.noalias() += d_logits * fwd.feature.transpose();
  grad.b_out += d_logits;
  const Vec<Scalar> d_pre =
      ((model.w_out.transpose() * d_logits).array() * (1 - fwd.feature.array().square()))
          .matrix();
  grad.w_hidden.noalias() += d_pre * x.transpose();
  grad.b_hidden += d_pre;
}

template <typename Scalar>
LossAndGradient<Scalar> cross_entropy(const Classifier<Scalar>& model,
                                      std::span<const Example<Scalar>> batch, bool with_grad) {
  LossAndGradient<Scalar> out{
      Scalar(0), Classifier<Scalar>::zeros(model.input_dim(), model.feature_dim(),
                                           model.num_classes())};
  for (const auto& ex : batch) {
    check_label(model, ex.y);
    const auto fwd = forward(model, ex.x);
    out.loss -= std::log(fwd.probs[ex.y]);
    if (with_grad) {
      Vec<Scalar> d = fwd.probs;
      d[ex.y] -= 1;
      backprop(model, ex.x, fwd, d, out.grad);
    }
  }
  const Scalar n = static_cast<Scalar>(batch.size());
  out.loss /= n;
  out.grad *= Scalar(1) / n;
  return out;
}

template <typename Scalar>
Scalar entropy(const Vec<Scalar>& p) {
  return -(p.array() * p.array().log()).sum();
}

}  // namespace detail

/// Mean cross-entropy at the ground-truth labels.
template <typename Scalar>
Scalar loss_supervised(const Classifier<Scalar>& model, std::span<const Example<Scalar>> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_supervised: empty batch");
  return detail::cross_entropy(model, batch, false).loss;
}

template <typename Scalar>
LossAndGradient<Scalar> supervised_loss_and_gradient(const Classifier<Scalar>& model,
                                                     std::span<const Example<Scalar>> batch) {
  if (batch.empty()) throw std::invalid_argument("supervised loss: empty batch");
  return detail::cross_entropy(model, batch, true);
}

/// Coordinate dropout with probability aug_dropout_p followed by additive
/// Gaussian noise of standard deviation aug_noise_sigma.
template <typename Scalar, typename URBG>
Vec<Scalar> augment(const Vec<Scalar>& x, const TrainConfig& cfg, URBG& rng) {
  if (!x.allFinite()) throw std::invalid_argument("augment: non-finite input");
  Vec<Scalar> out = x;
  if (cfg.aug_dropout_p > 0) {
    std::bernoulli_distribution drop(cfg.aug_dropout_p);
    for (Eigen::Index i = 0; i < out.size(); ++i)
      if (drop(rng)) out[i] = 0;
  }
  if (cfg.aug_noise_sigma > 0) {
    std::normal_distribution<double> noise(0.0, cfg.aug_noise_sigma);
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += static_cast<Scalar>(noise(rng));
  }
  return out;
}

template <typename Scalar, typename URBG>
std::vector<Example<Scalar>> augment_batch(std::span<const Example<Scalar>> batch,
                                           const TrainConfig& cfg, URBG& rng) {
  std::vector<Example<Scalar>> out;
  out.reserve(batch.size());
  for (const auto& ex : batch) out.push_back({augment(ex.x, cfg, rng), ex.y});
  return out;
}

/// A loss term that may be absent because its partition was empty.
template <typename Scalar>
struct LossTerm {
  Scalar value{0};
  bool empty = true;
};

/// Cross-entropy of perturbed inputs at their similarity-based labels. The
/// labels are fixed targets.
template <typename Scalar, typename URBG>
LossTerm<Scalar> loss_consistency(const Classifier<Scalar>& model,
                                  std::span<const Example<Scalar>> batch_cc,
                                  const TrainConfig& cfg, URBG& rng) {
  if (batch_cc.empty()) return {Scalar(0), true};
  const auto perturbed = augment_batch(batch_cc, cfg, rng);
  return {detail::cross_entropy(model, std::span<const Example<Scalar>>(perturbed), false).loss,
          false};
}

/// Consistency loss and gradient on already-perturbed inputs.
template <typename Scalar>
LossAndGradient<Scalar> consistency_loss_and_gradient(
    const Classifier<Scalar>& model, std::span<const Example<Scalar>> perturbed) {
  if (perturbed.empty()) {
    return {Scalar(0), Classifier<Scalar>::zeros(model.input_dim(), model.feature_dim(),
                                                 model.num_classes())};
  }
  return detail::cross_entropy(model, perturbed, true);
}

/// Mean prediction entropy (nats).
template <typename Scalar>
LossTerm<Scalar> loss_entropy(const Classifier<Scalar>& model,
                              std::span<const Vec<Scalar>> batch_uc) {
  if (batch_uc.empty()) return {Scalar(0), true};
  Scalar sum(0);
  for (const auto& x : batch_uc) sum += detail::entropy(forward(model, x).probs);
  return {sum / static_cast<Scalar>(batch_uc.size()), false};
}

template <typename Scalar>
LossAndGradient<Scalar> entropy_loss_and_gradient(const Classifier<Scalar>& model,
                                                  std::span<const Vec<Scalar>> batch_uc) {
  LossAndGradient<Scalar> out{
      Scalar(0), Classifier<Scalar>::zeros(model.input_dim(), model.feature_dim(),
                                           model.num_classes())};
  if (batch_uc.empty()) return out;
  for (const auto& x : batch_uc) {
    const auto fwd = forward(model, x);
    const Scalar h = detail::entropy(fwd.probs);
    out.loss += h;
    // dH/dz_j = -p_j (log p_j + H)
    const Vec<Scalar> d = (-fwd.probs.array() * (fwd.probs.array().log() + h)).matrix();
    detail::backprop(model, x, fwd, d, out.grad);
  }
  const Scalar n = static_cast<Scalar>(batch_uc.size());
  out.loss /= n;
  out.grad *= Scalar(1) / n;
  return out;
}

template <typename Scalar>
struct TotalLoss {
  Scalar total{0};
  Scalar supervised{0};
  Scalar consistency{0};
  Scalar entropy{0};
  bool cc_empty = true;
  bool uc_empty = true;
};

/// L_sup + lambda_c * L_con + lambda_e * L_ent. Empty CC/UC batches
/// contribute zero and raise the matching flag.
template <typename Scalar, typename URBG>
TotalLoss<Scalar> total_loss(const Classifier<Scalar>& model,
                             std::span<const Example<Scalar>> labeled,
                             std::span<const Example<Scalar>> cc,
                             std::span<const Vec<Scalar>> uc, const TrainConfig& cfg, URBG& rng) {
  TotalLoss<Scalar> t;
  t.supervised = loss_supervised(model, labeled);
  const auto con = loss_consistency(model, cc, cfg, rng);
  const auto ent = loss_entropy(model, uc);
  t.consistency = con.value;
  t.entropy = ent.value;
  t.cc_empty = con.empty;
  t.uc_empty = ent.empty;
  t.total = t.supervised + static_cast<Scalar>(cfg.lambda_c) * t.consistency +
            static_cast<Scalar>(cfg.lambda_e) * t.entropy;
  return t;
}

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct StepResult {
  Classifier<Scalar> model;
  TotalLoss<Scalar> loss;  // evaluated before the update
};

/// One SGD step on the total loss. The CC batch is perturbed once with
/// `rng` (same draws as total_loss would make) and the perturbed inputs are
/// treated as constants. Throws NonFiniteGradient and leaves nothing
/// modified if the gradient is not finite.
template <typename Scalar, typename URBG>
StepResult<Scalar> backward_and_step(const Classifier<Scalar>& model,
                                     std::span<const Example<Scalar>> labeled,
                                     std::span<const Example<Scalar>> cc,
                                     std::span<const Vec<Scalar>> uc, const TrainConfig& cfg,
                                     URBG& rng) {
  const auto perturbed = augment_batch(cc, cfg, rng);
  const auto sup = supervised_loss_and_gradient(model, labeled);
  const auto con =
      consistency_loss_and_gradient(model, std::span<const Example<Scalar>>(perturbed));
  const auto ent = entropy_loss_and_gradient(model, uc);

  StepResult<Scalar> r{model, {}};
  r.loss.supervised = sup.loss;
  r.loss.consistency = con.loss;
  r.loss.entropy = ent.loss;
  r.loss.cc_empty = cc.empty();
  r.loss.uc_empty = uc.empty();
  const auto lc = static_cast<Scalar>(cfg.lambda_c);
  const auto le = static_cast<Scalar>(cfg.lambda_e);
  r.loss.total = sup.loss + lc * con.loss + le * ent.loss;

  Classifier<Scalar> grad = sup.grad;
  if (!cc.empty() && lc != Scalar(0)) grad += lc * con.grad;
  if (!uc.empty() && le != Scalar(0)) grad += le * ent.grad;
  if (!grad.all_finite()) throw NonFiniteGradient("backward_and_step: non-finite gradient");

  r.model += static_cast<Scalar>(-cfg.learning_rate) * grad;
  return r;
}

/// Training inputs for one round: labeled data with ground truth, CC
/// samples with similarity-based labels, UC samples.
template <typename Scalar>
struct TrainingSet {
  std::vector<Example<Scalar>> labeled;
  std::vector<Example<Scalar>> cc;
  std::vector<Vec<Scalar>> uc;
};

/// Minibatch SGD over `epochs` passes of the labeled set. Each labeled
/// minibatch is paired with batch_size CC and UC samples drawn uniformly with
/// replacement. Returns the mean total loss of the last epoch.
template <typename Scalar, typename URBG>
Scalar train_epochs(Classifier<Scalar>& model, const TrainingSet<Scalar>& data,
                    const TrainConfig& cfg, int epochs, URBG& rng) {
  cfg.validate();
  if (epochs <= 0) return Scalar(0);
  if (data.labeled.empty()) throw std::invalid_argument("train_epochs: no labeled data");

  const bool use_cc = !data.cc.empty() && cfg.lambda_c != 0;
  const bool use_uc = !data.uc.empty() && cfg.lambda_e != 0;
  std::vector<std::size_t> order(data.labeled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  std::vector<Example<Scalar>> lab_batch, cc_batch;
  std::vector<Vec<Scalar>> uc_batch;
  Scalar epoch_loss(0);
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      lab_batch.clear();
      cc_batch.clear();
      uc_batch.clear();
      const std::size_t end = std::min(order.size(), start + bs);
      for (std::size_t i = start; i < end; ++i) lab_batch.push_back(data.labeled[order[i]]);
      if (use_cc) {
        std::uniform_int_distribution<std::size_t> pick(0, data.cc.size() - 1);
        for (std::size_t i = 0; i < bs; ++i) cc_batch.push_back(data.cc[pick(rng)]);
      }
      if (use_uc) {
        std::uniform_int_distribution<std::size_t> pick(0, data.uc.size() - 1);
        for (std::size_t i = 0; i < bs; ++i) uc_batch.push_back(data.uc[pick(rng)]);
      }
      auto step = backward_and_step(model, std::span<const Example<Scalar>>(lab_batch),
                                    std::span<const Example<Scalar>>(cc_batch),
                                    std::span<const Vec<Scalar>>(uc_batch), cfg, rng);
      model = std::move(step.model);
      epoch_loss += step.loss.total;
      ++steps;
    }
    epoch_loss /= static_cast<Scalar>(steps);
  }
  return epoch_loss;
}

}  // namespace diana
