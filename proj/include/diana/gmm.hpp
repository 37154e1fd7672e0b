#pragma once

#include <optional>
#include <span>
#include <vector>

#include "diana/scoring.hpp"
#include "diana/types.hpp"

namespace diana {

constexpr double kVarianceFloor = 1e-6;

/// Four-component one-dimensional Gaussian mixture over informativeness
/// scores. Component k (0-based) models category k + 1.
struct GmmParams {
  Eigen::Array4d pi = Eigen::Array4d::Constant(0.25);
  Eigen::Array4d mu = Eigen::Array4d::Zero();
  Eigen::Array4d sigma2 = Eigen::Array4d::Ones();

  /// Σ pi = 1 within 1e-9, pi in [0, 1], sigma2 >= floor, all finite.
  bool valid() const;
  double max_abs_diff(const GmmParams& other) const;
};

struct GmmTrainSet {
  std::vector<LabeledScore> labeled;
  std::vector<double> unlabeled;
  double alpha = 1.0;  // weight of labeled terms; unlabeled get 1 - alpha

  /// alpha = |labeled| / (|labeled| + |unlabeled|) unless overridden.
  static GmmTrainSet make(std::vector<LabeledScore> labeled, std::vector<double> unlabeled,
                          std::optional<double> alpha_override = std::nullopt);
  void validate() const;
};

/// Smoothed counts for weights, per-component moments for means and
/// variances, with global moments standing in for empty components.
GmmParams init_from_labeled(std::span<const LabeledScore> labeled);

/// log(π_k N(score; μ_k, σ²_k)) for all k.
Eigen::Array4d log_weighted_densities(double score, const GmmParams& params);

/// Σ_k π_k N(score; μ_k, σ²_k), evaluated through log-sum-exp.
double gmm_density(double score, const GmmParams& params);
double gmm_log_density(double score, const GmmParams& params);

/// Pr(z = k | score, W).
Eigen::Array4d component_posterior(double score, const GmmParams& params);

struct Responsibilities {
  Eigen::MatrixX4d labeled;    // one-hot rows at the observation label
  Eigen::MatrixX4d unlabeled;  // posterior rows
};

Responsibilities e_step(const GmmTrainSet& data, const GmmParams& params);

/// Weighted closed-form updates. A component whose total weighted
/// responsibility is below 1e-12 keeps its previous mean and variance.
GmmParams m_step(const GmmTrainSet& data, const Responsibilities& resp,
                 const GmmParams& previous);

/// α Σ_i log(π_{q_i} N(ℓ_i; μ_{q_i}, σ²_{q_i})) + (1 − α) Σ_j log p(ℓ_j).
double weighted_log_likelihood(const GmmTrainSet& data, const GmmParams& params);

struct GmmFitOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;
};

struct GmmFit {
  GmmParams params;
  int iterations = 0;
  double objective = 0;
  std::vector<double> objective_trace;  // objective after init and after every M-step
  bool converged = false;
};

/// Alternates e_step / m_step from init_from_labeled until the largest
/// change among the 12 parameters drops below the tolerance.
GmmFit fit_gmm(const GmmTrainSet& data, const GmmFitOptions& options = {});

}  // namespace diana
