#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "diana/classifier.hpp"
#include "diana/types.hpp"

namespace diana {

/// Probability floor applied before taking logs of softmax outputs.
constexpr double kProbFloor = 1e-12;

/// Per-class mean features of the labeled data; row c is A^c.
struct CentroidSet {
  MatrixXd centroids;       // C x d_feat
  std::vector<int> counts;  // labeled samples per class

  int num_classes() const { return static_cast<int>(centroids.rows()); }
  int feature_dim() const { return static_cast<int>(centroids.cols()); }
};

/// Mean of G(x) per class over `labeled`. Throws if any class in
/// [0, num_classes) has no sample.
CentroidSet compute_centroids(const Model& model, std::span<const Example<double>> labeled,
                              int num_classes);

/// Indices of the k largest |v_i|, returned in ascending index order. Equal
/// magnitudes rank the smaller index first.
std::vector<int> topk_indices(const Eigen::Ref<const VectorXd>& v, int k);

/// |a ∩ b| / |a ∪ b| for index sets given in ascending order.
double iou(std::span<const int> a, std::span<const int> b);

/// Centroids together with their cached top-k index sets.
class SimilarityIndex {
 public:
  SimilarityIndex(const CentroidSet& centroids, int k);

  /// argmax_c IoU(topk(feature), topk(A^c)); smallest class wins ties.
  ClassIndex label(const Eigen::Ref<const VectorXd>& feature) const;
  int k() const { return k_; }
  std::span<const int> centroid_topk(ClassIndex c) const { return topk_[c]; }

 private:
  int k_;
  int feature_dim_;
  std::vector<std::vector<int>> topk_;
};

ClassIndex similarity_label(const Eigen::Ref<const VectorXd>& feature,
                            const CentroidSet& centroids, int k);

/// -log max(P_y, floor): the informativeness score at reference label y.
double cross_entropy_at(const Eigen::Ref<const VectorXd>& probs, ClassIndex y);

/// Score of an unlabeled sample: cross-entropy at its similarity-based label.
double info_score_unlabeled(const Model& model, const CentroidSet& centroids,
                            const Eigen::Ref<const VectorXd>& x, int k);

/// Score of a labeled sample: cross-entropy at its ground-truth label.
double info_score_labeled(const Model& model, const Eigen::Ref<const VectorXd>& x, ClassIndex y);

/// Confident (max P >= tau) x consistent (y == argmax P) quadrant.
Category observation_label(const Eigen::Ref<const VectorXd>& probs, ClassIndex y, double tau);
Category observation_label(const Model& model, const Eigen::Ref<const VectorXd>& x, ClassIndex y,
                           double tau);

/// Everything the round pipeline needs about one unlabeled sample.
struct ScoredSample {
  SampleId id = 0;
  double info_score = 0;
  ClassIndex sim_label = 0;
  ClassIndex pred_label = 0;
  double max_prob = 0;
  double entropy = 0;
};

ScoredSample score_unlabeled(const Model& model, const SimilarityIndex& index, SampleId id,
                             const Eigen::Ref<const VectorXd>& x);

/// Score of a labeled sample together with its observation label.
struct LabeledScore {
  double score = 0;
  Category component = Category::CC;
};

LabeledScore score_labeled(const Model& model, const Eigen::Ref<const VectorXd>& x, ClassIndex y,
                           double tau);

/// CSV `id,info_score,sim_label,pred_label,max_prob,obs_or_component`; the
/// last column is the category name for each row.
void write_score_dump(std::ostream& out, std::span<const ScoredSample> scores,
                      std::span<const Category> categories);

}  // namespace diana
