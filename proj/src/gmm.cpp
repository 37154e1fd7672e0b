#include "diana/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace diana {

namespace {

double log_normal(double x, double mu, double sigma2) {
  const double d = x - mu;
  return -0.5 * (std::log(2.0 * std::numbers::pi * sigma2) + d * d / sigma2);
}

double log_sum_exp(const Eigen::Array4d& a) {
  const double m = a.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((a - m).exp().sum());
}

}  // namespace

bool GmmParams::valid() const {
  return pi.allFinite() && mu.allFinite() && sigma2.allFinite() && (pi >= 0).all() &&
         (pi <= 1).all() && std::abs(pi.sum() - 1.0) <= 1e-9 && (sigma2 >= kVarianceFloor).all();
}

double GmmParams::max_abs_diff(const GmmParams& o) const {
  return std::max({(pi - o.pi).abs().maxCoeff(), (mu - o.mu).abs().maxCoeff(),
                   (sigma2 - o.sigma2).abs().maxCoeff()});
}

GmmTrainSet GmmTrainSet::make(std::vector<LabeledScore> labeled, std::vector<double> unlabeled,
                              std::optional<double> alpha_override) {
  GmmTrainSet s;
  const double nl = static_cast<double>(labeled.size());
  const double nu = static_cast<double>(unlabeled.size());
  s.alpha = alpha_override.value_or(nl + nu > 0 ? nl / (nl + nu) : 1.0);
  s.labeled = std::move(labeled);
  s.unlabeled = std::move(unlabeled);
  s.validate();
  return s;
}

void GmmTrainSet::validate() const {
  if (labeled.empty()) throw std::invalid_argument("GMM training set needs labeled anchors");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must be in [0, 1]");
  if (alpha == 0.0 && unlabeled.empty())
    throw std::invalid_argument("alpha = 0 requires unlabeled scores");
  for (const auto& l : labeled) {
    const int k = static_cast<int>(l.component);
    if (k < 1 || k > kNumComponents || !std::isfinite(l.score))
      throw std::invalid_argument("GMM training set: bad labeled entry");
  }
  for (double u : unlabeled)
    if (!std::isfinite(u)) throw std::invalid_argument("GMM training set: non-finite score");
}

GmmParams init_from_labeled(std::span<const LabeledScore> labeled) {
  if (labeled.empty()) throw std::invalid_argument("init_from_labeled: empty labeled set");
  const double n = static_cast<double>(labeled.size());

  double global_mean = 0;
  for (const auto& l : labeled) global_mean += l.score;
  global_mean /= n;
  double global_var = 0;
  for (const auto& l : labeled) global_var += (l.score - global_mean) * (l.score - global_mean);
  global_var = std::max(global_var / n, kVarianceFloor);

  Eigen::Array4d count = Eigen::Array4d::Zero(), sum = Eigen::Array4d::Zero();
  for (const auto& l : labeled) {
    const int k = component_index(l.component);
    count[k] += 1;
    sum[k] += l.score;
  }

  GmmParams p;
  p.pi = (count + 1.0) / (n + kNumComponents);
  for (int k = 0; k < kNumComponents; ++k) p.mu[k] = count[k] > 0 ? sum[k] / count[k] : global_mean;

  Eigen::Array4d sq = Eigen::Array4d::Zero();
  for (const auto& l : labeled) {
    const int k = component_index(l.component);
    sq[k] += (l.score - p.mu[k]) * (l.score - p.mu[k]);
  }
  for (int k = 0; k < kNumComponents; ++k)
    p.sigma2[k] = count[k] > 1 ? std::max(sq[k] / count[k], kVarianceFloor) : global_var;
  return p;
}

Eigen::Array4d log_weighted_densities(double score, const GmmParams& params) {
  Eigen::Array4d out;
  for (int k = 0; k < kNumComponents; ++k)
    out[k] = std::log(params.pi[k]) + log_normal(score, params.mu[k], params.sigma2[k]);
  return out;
}

double gmm_log_density(double score, const GmmParams& params) {
  return log_sum_exp(log_weighted_densities(score, params));
}

double gmm_density(double score, const GmmParams& params) {
  return std::exp(gmm_log_density(score, params));
}

Eigen::Array4d component_posterior(double score, const GmmParams& params) {
  const Eigen::Array4d lw = log_weighted_densities(score, params);
  const Eigen::Array4d w = (lw - log_sum_exp(lw)).exp();
  return w / w.sum();
}

Responsibilities e_step(const GmmTrainSet& data, const GmmParams& params) {
  Responsibilities r;
  r.labeled = Eigen::MatrixX4d::Zero(static_cast<Eigen::Index>(data.labeled.size()), 4);
  for (std::size_t i = 0; i < data.labeled.size(); ++i)
    r.labeled(static_cast<Eigen::Index>(i), component_index(data.labeled[i].component)) = 1.0;
  r.unlabeled.resize(static_cast<Eigen::Index>(data.unlabeled.size()), 4);
  for (std::size_t j = 0; j < data.unlabeled.size(); ++j)
    r.unlabeled.row(static_cast<Eigen::Index>(j)) =
        component_posterior(data.unlabeled[j], params).matrix().transpose();
  return r;
}

GmmParams m_step(const GmmTrainSet& data, const Responsibilities& resp,
                 const GmmParams& previous) {
  const double a = data.alpha;
  const double b = 1.0 - data.alpha;
  const Eigen::Index nl = resp.labeled.rows(), nu = resp.unlabeled.rows();
  if (nl != static_cast<Eigen::Index>(data.labeled.size()) ||
      nu != static_cast<Eigen::Index>(data.unlabeled.size()))
    throw std::invalid_argument("m_step: responsibilities do not match the training set");

  Eigen::VectorXd lscore(nl), uscore(nu);
  for (Eigen::Index i = 0; i < nl; ++i) lscore[i] = data.labeled[i].score;
  for (Eigen::Index j = 0; j < nu; ++j) uscore[j] = data.unlabeled[j];

  const Eigen::Array4d mass = (a * resp.labeled.colwise().sum().transpose() +
                               b * resp.unlabeled.colwise().sum().transpose())
                                  .array();
  const double total = a * static_cast<double>(nl) + b * static_cast<double>(nu);

  GmmParams p;
  p.pi = mass / total;
  for (int k = 0; k < kNumComponents; ++k) {
    if (mass[k] < 1e-12) {
      p.mu[k] = previous.mu[k];
      p.sigma2[k] = previous.sigma2[k];
      continue;
    }
    const double s1 = a * resp.labeled.col(k).dot(lscore) + b * resp.unlabeled.col(k).dot(uscore);
    p.mu[k] = s1 / mass[k];
    const double s2 =
        a * resp.labeled.col(k).dot((lscore.array() - p.mu[k]).square().matrix()) +
        b * resp.unlabeled.col(k).dot((uscore.array() - p.mu[k]).square().matrix());
    p.sigma2[k] = std::max(s2 / mass[k], kVarianceFloor);
  }
  return p;
}

double weighted_log_likelihood(const GmmTrainSet& data, const GmmParams& params) {
  double lab = 0, unl = 0;
  for (const auto& l : data.labeled) {
    const int k = component_index(l.component);
    lab += std::log(params.pi[k]) + log_normal(l.score, params.mu[k], params.sigma2[k]);
  }
  for (double u : data.unlabeled) unl += gmm_log_density(u, params);
  // 0 * (-inf) would poison the sum when one side carries no weight.
  double obj = 0;
  if (data.alpha != 0) obj += data.alpha * lab;
  if (data.alpha != 1) obj += (1.0 - data.alpha) * unl;
  return obj;
}

GmmFit fit_gmm(const GmmTrainSet& data, const GmmFitOptions& options) {
  data.validate();
  GmmFit fit;
  fit.params = init_from_labeled(data.labeled);
  fit.objective_trace.push_back(weighted_log_likelihood(data, fit.params));
  for (int it = 0; it < options.max_iterations; ++it) {
    const auto resp = e_step(data, fit.params);
    GmmParams next = m_step(data, resp, fit.params);
    const double delta = next.max_abs_diff(fit.params);
    fit.params = next;
    fit.iterations = it + 1;
    fit.objective_trace.push_back(weighted_log_likelihood(data, fit.params));
    if (delta < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.objective = fit.objective_trace.back();
  return fit;
}

}  // namespace diana
