#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "diana/datapool.hpp"
#include "diana/gmm.hpp"
#include "diana/scoring.hpp"

namespace diana {

/// The min(b, n) ids with the highest UI-component posterior, in descending
/// posterior order; equal posteriors put the smaller id first.
std::vector<SampleId> select_active_batch(std::span<const ScoredSample> unlabeled,
                                          const GmmParams& params, std::size_t b);

/// Category of every remaining unlabeled sample by argmax of its component
/// posterior (smallest component wins ties).
struct PartitionAssignment {
  std::map<SampleId, Category> category;
  std::array<std::size_t, kNumComponents> counts{};

  std::size_t size(Category c) const { return counts[component_index(c)]; }
  std::size_t total() const { return category.size(); }
  std::vector<SampleId> members(Category c) const;
};

Category argmax_category(const Eigen::Array4d& posterior);

PartitionAssignment partition_scores(std::span<const ScoredSample> remaining,
                                     const GmmParams& params);

/// Scores `remaining` under the model and centroids, then partitions.
PartitionAssignment partition_unlabeled(std::span<const Sample> remaining, const Model& model,
                                        const CentroidSet& centroids, const GmmParams& params,
                                        int k);

/// Adaptive thresholds for the source-free variant.
struct SfdaConfig {
  double t_v_init = 0.95;
  double t_v_step = 0.1;
  std::optional<double> t_c_init;  // 1/C + 1e-5 when unset
  double t_c_step = 0.1;

  double t_c_start(int num_classes) const {
    return t_c_init.value_or(1.0 / num_classes + 1e-5);
  }
  void validate() const;
};

/// Confident target predictions standing in for labeled data.
struct PseudoLabelSet {
  std::vector<SampleId> ids;
  std::vector<Example<double>> examples;  // (x, predicted label)
  double t_v = 0;
  int relaxations = 0;
};

/// Lowers t_v from t_v_init by t_v_step (floored at 0) until the predicted
/// labels of {x : max P(x) >= t_v} cover every class. Throws if even t_v = 0
/// leaves a class uncovered.
PseudoLabelSet build_pseudo_labeled(const Model& model, std::span<const Sample> unlabeled,
                                    const SfdaConfig& cfg);

/// Samples whose prediction disagrees with the similarity-based label and
/// whose max probability is at most t_c.
struct UncertainInconsistent {
  std::vector<SampleId> candidates;  // every member at the final t_c, by id
  std::vector<SampleId> active;      // at most b, most uncertain first
  double t_c = 0;
  int raises = 0;
};

/// Raises t_c from its start by t_c_step until at least b samples qualify
/// or t_c reaches 1. Truncates to b by ascending max probability (then id).
UncertainInconsistent select_uncertain_inconsistent(const Model& model,
                                                    std::span<const Sample> unlabeled,
                                                    const SimilarityIndex& index,
                                                    const SfdaConfig& cfg, std::size_t b);

struct SfdaResult {
  PseudoLabelSet pseudo;
  CentroidSet centroids;
  UncertainInconsistent selection;
};

/// Source-free bootstrap: pseudo-labeled proxy set, centroids over it, then
/// the uncertain-inconsistent active batch.
SfdaResult sfda_bootstrap(const Model& model, std::span<const Sample> unlabeled,
                          const SfdaConfig& cfg, std::size_t b, int k);

/// Fraction of `inputs` whose predicted class equals the similarity label.
double consistency_rate(const Model& model, const SimilarityIndex& index,
                        std::span<const VectorXd> inputs);

/// Indices of losses at or below the q-quantile point (well learnt) and
/// above it (underfitted). The quantile point is the element of rank
/// floor(q * (n - 1)) in ascending order.
struct LossSplit {
  std::vector<std::size_t> well_learnt;
  std::vector<std::size_t> underfitted;
  double threshold = 0;
};
LossSplit split_by_loss_quantile(std::span<const double> losses, double q);

}  // namespace diana
