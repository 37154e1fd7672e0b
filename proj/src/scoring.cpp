#include "diana/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace diana {

CentroidSet compute_centroids(const Model& model, std::span<const Example<double>> labeled,
                              int num_classes) {
  if (num_classes != model.num_classes())
    throw std::invalid_argument("compute_centroids: class count mismatch");
  CentroidSet set{MatrixXd::Zero(num_classes, model.feature_dim()),
                  std::vector<int>(num_classes, 0)};
  for (const auto& ex : labeled) {
    if (ex.y < 0 || ex.y >= num_classes)
      throw std::invalid_argument("compute_centroids: label out of range");
    set.centroids.row(ex.y) += forward(model, ex.x).feature.transpose();
    ++set.counts[ex.y];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (set.counts[c] == 0)
      throw std::invalid_argument("compute_centroids: class " + std::to_string(c) +
                                  " has no labeled sample");
    set.centroids.row(c) /= static_cast<double>(set.counts[c]);
  }
  return set;
}

std::vector<int> topk_indices(const Eigen::Ref<const VectorXd>& v, int k) {
  const int n = static_cast<int>(v.size());
  if (k < 0 || k > n) throw std::invalid_argument("topk_indices: k exceeds dimension");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    const double ma = std::abs(v[a]), mb = std::abs(v[b]);
    return ma > mb || (ma == mb && a < b);
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double iou(std::span<const int> a, std::span<const int> b) {
  std::size_t inter = 0, i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter, ++i, ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SimilarityIndex::SimilarityIndex(const CentroidSet& centroids, int k)
    : k_(k), feature_dim_(centroids.feature_dim()) {
  if (k < 1 || k > feature_dim_)
    throw std::invalid_argument("similarity: k must be in [1, feature dimension]");
  topk_.reserve(centroids.num_classes());
  for (int c = 0; c < centroids.num_classes(); ++c)
    topk_.push_back(topk_indices(centroids.centroids.row(c).transpose(), k));
}

ClassIndex SimilarityIndex::label(const Eigen::Ref<const VectorXd>& feature) const {
  if (feature.size() != feature_dim_) throw std::invalid_argument("similarity: dimension mismatch");
  const auto f = topk_indices(feature, k_);
  ClassIndex best = 0;
  double best_iou = -1;
  for (std::size_t c = 0; c < topk_.size(); ++c) {
    const double v = iou(f, topk_[c]);
    if (v > best_iou) {
      best_iou = v;
      best = static_cast<ClassIndex>(c);
    }
  }
  return best;
}

ClassIndex similarity_label(const Eigen::Ref<const VectorXd>& feature,
                            const CentroidSet& centroids, int k) {
  return SimilarityIndex(centroids, k).label(feature);
}

double cross_entropy_at(const Eigen::Ref<const VectorXd>& probs, ClassIndex y) {
  if (y < 0 || y >= probs.size()) throw std::invalid_argument("label out of range");
  return -std::log(std::max(probs[y], kProbFloor));
}

double info_score_unlabeled(const Model& model, const CentroidSet& centroids,
                            const Eigen::Ref<const VectorXd>& x, int k) {
  const auto fwd = forward(model, x);
  return cross_entropy_at(fwd.probs, similarity_label(fwd.feature, centroids, k));
}

double info_score_labeled(const Model& model, const Eigen::Ref<const VectorXd>& x, ClassIndex y) {
  return cross_entropy_at(forward(model, x).probs, y);
}

Category observation_label(const Eigen::Ref<const VectorXd>& probs, ClassIndex y, double tau) {
  if (y < 0 || y >= probs.size()) throw std::invalid_argument("label out of range");
  Eigen::Index arg = 0;
  const double max_p = probs.maxCoeff(&arg);
  const bool confident = max_p >= tau;
  const bool consistent = y == static_cast<ClassIndex>(arg);
  if (confident) return consistent ? Category::CC : Category::CI;
  return consistent ? Category::UC : Category::UI;
}

Category observation_label(const Model& model, const Eigen::Ref<const VectorXd>& x, ClassIndex y,
                           double tau) {
  return observation_label(forward(model, x).probs, y, tau);
}

ScoredSample score_unlabeled(const Model& model, const SimilarityIndex& index, SampleId id,
                             const Eigen::Ref<const VectorXd>& x) {
  const auto fwd = forward(model, x);
  ScoredSample s;
  s.id = id;
  s.sim_label = index.label(fwd.feature);
  s.info_score = cross_entropy_at(fwd.probs, s.sim_label);
  Eigen::Index arg = 0;
  s.max_prob = fwd.probs.maxCoeff(&arg);
  s.pred_label = static_cast<ClassIndex>(arg);
  s.entropy = -(fwd.probs.array() * fwd.probs.array().max(kProbFloor).log()).sum();
  return s;
}

LabeledScore score_labeled(const Model& model, const Eigen::Ref<const VectorXd>& x, ClassIndex y,
                           double tau) {
  const auto probs = forward(model, x).probs;
  return {cross_entropy_at(probs, y), observation_label(probs, y, tau)};
}

void write_score_dump(std::ostream& out, std::span<const ScoredSample> scores,
                      std::span<const Category> categories) {
  if (categories.size() != scores.size())
    throw std::invalid_argument("write_score_dump: one category per score required");
  out << "id,info_score,sim_label,pred_label,max_prob,obs_or_component\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    out << s.id << ',' << s.info_score << ',' << s.sim_label << ',' << s.pred_label << ','
        << s.max_prob << ',' << to_string(categories[i]) << '\n';
  }
}

}  // namespace diana
