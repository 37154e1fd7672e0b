#include "diana/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace diana {

std::vector<SampleId> select_active_batch(std::span<const ScoredSample> unlabeled,
                                          const GmmParams& params, std::size_t b) {
  std::vector<std::pair<double, SampleId>> ranked;
  ranked.reserve(unlabeled.size());
  for (const auto& s : unlabeled)
    ranked.emplace_back(component_posterior(s.info_score, params)[component_index(Category::UI)],
                        s.id);
  const std::size_t n = std::min(b, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), ranked.end(),
                    [](const auto& a, const auto& c) {
                      return a.first > c.first || (a.first == c.first && a.second < c.second);
                    });
  std::vector<SampleId> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(ranked[i].second);
  return out;
}

std::vector<SampleId> PartitionAssignment::members(Category c) const {
  std::vector<SampleId> out;
  for (const auto& [id, cat] : category)
    if (cat == c) out.push_back(id);
  return out;
}

Category argmax_category(const Eigen::Array4d& posterior) {
  Eigen::Index arg = 0;
  posterior.maxCoeff(&arg);
  return category_from_index(static_cast<int>(arg));
}

PartitionAssignment partition_scores(std::span<const ScoredSample> remaining,
                                     const GmmParams& params) {
  PartitionAssignment p;
  for (const auto& s : remaining) {
    const Category c = argmax_category(component_posterior(s.info_score, params));
    if (!p.category.emplace(s.id, c).second)
      throw std::invalid_argument("partition: duplicate sample id");
    ++p.counts[component_index(c)];
  }
  return p;
}

PartitionAssignment partition_unlabeled(std::span<const Sample> remaining, const Model& model,
                                        const CentroidSet& centroids, const GmmParams& params,
                                        int k) {
  const SimilarityIndex index(centroids, k);
  std::vector<ScoredSample> scores;
  scores.reserve(remaining.size());
  for (const auto& s : remaining) scores.push_back(score_unlabeled(model, index, s.id, s.x));
  return partition_scores(scores, params);
}

void SfdaConfig::validate() const {
  if (!(t_v_step > 0) || !(t_c_step > 0)) throw std::invalid_argument("SFDA steps must be > 0");
}

PseudoLabelSet build_pseudo_labeled(const Model& model, std::span<const Sample> unlabeled,
                                    const SfdaConfig& cfg) {
  cfg.validate();
  if (unlabeled.empty()) throw std::invalid_argument("SFDA bootstrap: empty unlabeled pool");
  const int num_classes = model.num_classes();

  std::vector<double> max_prob(unlabeled.size());
  std::vector<ClassIndex> pred(unlabeled.size());
  for (std::size_t i = 0; i < unlabeled.size(); ++i) {
    Eigen::Index arg = 0;
    max_prob[i] = forward(model, unlabeled[i].x).probs.maxCoeff(&arg);
    pred[i] = static_cast<ClassIndex>(arg);
  }

  for (int step = 0;; ++step) {
    const double t_v = std::max(cfg.t_v_init - step * cfg.t_v_step, 0.0);
    std::vector<bool> covered(num_classes, false);
    for (std::size_t i = 0; i < unlabeled.size(); ++i)
      if (max_prob[i] >= t_v) covered[pred[i]] = true;
    if (std::all_of(covered.begin(), covered.end(), [](bool c) { return c; })) {
      PseudoLabelSet out;
      out.t_v = t_v;
      out.relaxations = step;
      for (std::size_t i = 0; i < unlabeled.size(); ++i) {
        if (max_prob[i] >= t_v) {
          out.ids.push_back(unlabeled[i].id);
          out.examples.push_back({unlabeled[i].x, pred[i]});
        }
      }
      return out;
    }
    if (t_v == 0.0)
      throw std::runtime_error("SFDA bootstrap: predictions never cover every class");
  }
}

UncertainInconsistent select_uncertain_inconsistent(const Model& model,
                                                    std::span<const Sample> unlabeled,
                                                    const SimilarityIndex& index,
                                                    const SfdaConfig& cfg, std::size_t b) {
  cfg.validate();
  struct Entry {
    SampleId id;
    double max_prob;
    bool inconsistent;
  };
  std::vector<Entry> entries;
  entries.reserve(unlabeled.size());
  for (const auto& s : unlabeled) {
    const auto sc = score_unlabeled(model, index, s.id, s.x);
    entries.push_back({s.id, sc.max_prob, sc.pred_label != sc.sim_label});
  }

  UncertainInconsistent out;
  const double start = cfg.t_c_start(model.num_classes());
  for (int step = 0;; ++step) {
    const double t_c = start + step * cfg.t_c_step;
    std::vector<Entry> members;
    for (const auto& e : entries)
      if (e.inconsistent && e.max_prob <= t_c) members.push_back(e);
    if (members.size() >= b || t_c >= 1.0) {
      out.t_c = t_c;
      out.raises = step;
      std::sort(members.begin(), members.end(),
                [](const Entry& a, const Entry& c) { return a.id < c.id; });
      for (const auto& m : members) out.candidates.push_back(m.id);
      std::sort(members.begin(), members.end(), [](const Entry& a, const Entry& c) {
        return a.max_prob < c.max_prob || (a.max_prob == c.max_prob && a.id < c.id);
      });
      for (std::size_t i = 0; i < std::min(b, members.size()); ++i)
        out.active.push_back(members[i].id);
      return out;
    }
  }
}

SfdaResult sfda_bootstrap(const Model& model, std::span<const Sample> unlabeled,
                          const SfdaConfig& cfg, std::size_t b, int k) {
  SfdaResult r;
  r.pseudo = build_pseudo_labeled(model, unlabeled, cfg);
  r.centroids = compute_centroids(model, r.pseudo.examples, model.num_classes());
  r.selection =
      select_uncertain_inconsistent(model, unlabeled, SimilarityIndex(r.centroids, k), cfg, b);
  return r;
}

double consistency_rate(const Model& model, const SimilarityIndex& index,
                        std::span<const VectorXd> inputs) {
  if (inputs.empty()) throw std::invalid_argument("consistency_rate: empty subset");
  std::size_t agree = 0;
  for (const auto& x : inputs) {
    const auto fwd = forward(model, x);
    Eigen::Index arg = 0;
    fwd.probs.maxCoeff(&arg);
    if (static_cast<ClassIndex>(arg) == index.label(fwd.feature)) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(inputs.size());
}

LossSplit split_by_loss_quantile(std::span<const double> losses, double q) {
  if (losses.empty()) throw std::invalid_argument("split_by_loss_quantile: no losses");
  if (!(q >= 0 && q <= 1)) throw std::invalid_argument("quantile must be in [0, 1]");
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());
  LossSplit s;
  s.threshold = sorted[static_cast<std::size_t>(std::floor(q * (sorted.size() - 1)))];
  for (std::size_t i = 0; i < losses.size(); ++i)
    (losses[i] <= s.threshold ? s.well_learnt : s.underfitted).push_back(i);
  return s;
}

}  // namespace diana
