#include "diana/harness.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "diana/scoring.hpp"

namespace diana {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::DiaNA: return "diana";
    case Strategy::Random: return "random";
    case Strategy::Entropy: return "entropy";
    case Strategy::LeastConfidence: return "least_confidence";
  }
  return "diana";
}

Strategy strategy_from_string(const std::string& name) {
  if (name == "diana") return Strategy::DiaNA;
  if (name == "random") return Strategy::Random;
  if (name == "entropy") return Strategy::Entropy;
  if (name == "least_confidence" || name == "leastconfidence" || name == "conf")
    return Strategy::LeastConfidence;
  throw std::invalid_argument("unknown strategy: " + name);
}

void LoopConfig::validate() const {
  if (budget < 0) throw std::invalid_argument("budget must be >= 0");
  if (budget > 0) {
    if (rounds < 1) throw std::invalid_argument("rounds must be positive");
    if (budget % rounds != 0) throw std::invalid_argument("rounds must divide the budget");
  }
  if (!(tau > 0 && tau < 1)) throw std::invalid_argument("tau must be in (0, 1)");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be positive");
  if (k < 1 || k > feature_dim) throw std::invalid_argument("k must be in [1, feature_dim]");
  if (pretrain_epochs < 0) throw std::invalid_argument("pretrain_epochs must be >= 0");
  if (gmm_alpha && !(*gmm_alpha >= 0 && *gmm_alpha <= 1))
    throw std::invalid_argument("gmm_alpha must be in [0, 1]");
  if (sfda) sfda->validate();
  train.validate();
}

std::uint64_t stream_seed(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::vector<Example<double>> source_examples(const DataPool& pool) {
  std::vector<Example<double>> out;
  out.reserve(pool.source_labeled().size());
  for (const auto& ls : pool.source_labeled()) out.push_back({ls.sample.x, ls.label});
  return out;
}

std::vector<Example<double>> labeled_examples(const DataPool& pool) {
  auto out = source_examples(pool);
  for (const auto& ls : pool.target_labeled()) out.push_back({ls.sample.x, ls.label});
  return out;
}

Model pretrain_source(Model model, const DataPool& pool, const TrainConfig& cfg, int epochs) {
  if (epochs <= 0) return model;
  TrainingSet<double> data;
  data.labeled = source_examples(pool);
  std::mt19937_64 rng(stream_seed(cfg.seed, Stream::Pretrain));
  train_epochs(model, data, cfg, epochs, rng);
  return model;
}

double evaluate(const Model& model, const DataPool& pool) {
  const std::size_t n = pool.target_labeled().size() + pool.target_unlabeled().size();
  if (n == 0) throw std::invalid_argument("evaluate: empty target set");
  std::size_t correct = 0;
  for (const auto& ls : pool.target_labeled())
    if (predict(model, ls.sample.x) == ls.label) ++correct;
  for (const auto& s : pool.target_unlabeled())
    if (predict(model, s.x) == pool.oracle_label(s.id)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

template <typename Key>
std::vector<SampleId> top_by(std::span<const ScoredSample> unlabeled, std::size_t b, Key key) {
  std::vector<const ScoredSample*> ptrs;
  ptrs.reserve(unlabeled.size());
  for (const auto& s : unlabeled) ptrs.push_back(&s);
  const std::size_t n = std::min(b, ptrs.size());
  std::partial_sort(ptrs.begin(), ptrs.begin() + static_cast<std::ptrdiff_t>(n), ptrs.end(),
                    [&](const ScoredSample* a, const ScoredSample* c) {
                      const double ka = key(*a), kc = key(*c);
                      return ka > kc || (ka == kc && a->id < c->id);
                    });
  std::vector<SampleId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(ptrs[i]->id);
  return out;
}

}  // namespace

std::vector<SampleId> select_random(std::span<const ScoredSample> unlabeled, std::size_t b,
                                    std::mt19937_64& rng) {
  std::vector<SampleId> ids;
  ids.reserve(unlabeled.size());
  for (const auto& s : unlabeled) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(std::min(b, ids.size()));
  return ids;
}

std::vector<SampleId> select_entropy(std::span<const ScoredSample> unlabeled, std::size_t b) {
  return top_by(unlabeled, b, [](const ScoredSample& s) { return s.entropy; });
}

std::vector<SampleId> select_least_confidence(std::span<const ScoredSample> unlabeled,
                                              std::size_t b) {
  return top_by(unlabeled, b, [](const ScoredSample& s) { return -s.max_prob; });
}

namespace {

bool covers_all_classes(std::span<const LabeledSample> labeled, int num_classes) {
  std::vector<bool> seen(num_classes, false);
  for (const auto& ls : labeled) seen[ls.label] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
}

/// The labeled reference set of a round: S ∪ T normally; in the source-free
/// variant T once it covers every class, else the pseudo-labeled proxy.
std::vector<Example<double>> reference_set(const LoopConfig& cfg, const Model& model,
                                           const DataPool& pool) {
  if (!cfg.sfda) return labeled_examples(pool);
  if (covers_all_classes(pool.target_labeled(), pool.num_classes())) {
    std::vector<Example<double>> out;
    for (const auto& ls : pool.target_labeled()) out.push_back({ls.sample.x, ls.label});
    return out;
  }
  return build_pseudo_labeled(model, pool.target_unlabeled(), *cfg.sfda).examples;
}

void check_round_invariants(const DataPool& pool, std::span<const SampleId> selected,
                            std::size_t expected, const PartitionSizes& sizes,
                            std::unordered_set<SampleId>& annotated) {
  if (selected.size() != expected)
    throw InvariantViolation("round selected " + std::to_string(selected.size()) +
                             " samples, expected " + std::to_string(expected));
  for (SampleId id : selected)
    if (!annotated.insert(id).second)
      throw InvariantViolation("sample " + std::to_string(id) + " annotated twice");
  if (sizes.total() != pool.target_unlabeled().size())
    throw InvariantViolation("partition does not cover the unlabeled pool");
  if (pool.target_labeled().size() != annotated.size())
    throw InvariantViolation("annotation count drifted from the budget ledger");
  pool.check_invariants();
}

}  // namespace

RunResult run_active_loop(const LoopConfig& cfg_in, DataPool pool) {
  cfg_in.validate();
  LoopConfig cfg = cfg_in;
  if (cfg.strategy != Strategy::DiaNA) {
    cfg.train.lambda_c = 0;
    cfg.train.lambda_e = 0;
  }
  if (cfg.k > cfg.feature_dim) throw std::invalid_argument("k exceeds feature dimension");
  pool.check_invariants();
  const std::size_t b = static_cast<std::size_t>(cfg.per_round());
  if (static_cast<std::size_t>(cfg.budget) > pool.target_unlabeled().size())
    throw std::invalid_argument("budget exceeds the unlabeled pool");
  const std::size_t initial_total = pool.total_size();

  TrainConfig train = cfg.train;
  train.seed = cfg.seed;
  RunResult result;
  result.strategy = cfg.strategy;
  result.model = make_classifier<double>(pool.input_dim(), cfg.feature_dim, pool.num_classes(),
                                         stream_seed(cfg.seed, Stream::ModelInit));
  result.model = pretrain_source(std::move(result.model), pool, train, cfg.pretrain_epochs);
  result.initial_accuracy = evaluate(result.model, pool);

  std::mt19937_64 selection_rng(stream_seed(cfg.seed, Stream::Selection));
  std::mt19937_64 train_rng(stream_seed(cfg.seed, Stream::Training));
  std::unordered_set<SampleId> annotated;
  Model& model = result.model;

  for (int round = 0; round < cfg.effective_rounds(); ++round) {
    RoundReport rep;
    rep.round = round + 1;

    // Centroids and scores under the current model.
    const auto reference = reference_set(cfg, model, pool);
    const CentroidSet centroids = compute_centroids(model, reference, pool.num_classes());
    const SimilarityIndex index(centroids, cfg.k);

    std::vector<LabeledScore> labeled_scores;
    labeled_scores.reserve(reference.size());
    for (const auto& ex : reference)
      labeled_scores.push_back(score_labeled(model, ex.x, ex.y, cfg.tau));

    std::vector<ScoredSample> scores;
    std::vector<double> unlabeled_scores;
    scores.reserve(pool.target_unlabeled().size());
    for (const auto& s : pool.target_unlabeled()) {
      scores.push_back(score_unlabeled(model, index, s.id, s.x));
      unlabeled_scores.push_back(scores.back().info_score);
    }

    const GmmFit fit = fit_gmm(
        GmmTrainSet::make(std::move(labeled_scores), std::move(unlabeled_scores), cfg.gmm_alpha));
    if (!fit.params.valid()) throw InvariantViolation("mixture parameters left the simplex");
    rep.gmm = fit.params;
    rep.gmm_iterations = fit.iterations;
    rep.gmm_objective = fit.objective;

    // Selection.
    std::vector<SampleId> selected;
    if (cfg.sfda && cfg.strategy == Strategy::DiaNA) {
      selected = select_uncertain_inconsistent(model, pool.target_unlabeled(), index, *cfg.sfda, b)
                     .active;
      if (selected.size() < b) {
        // Too few uncertain-inconsistent samples even at t_c = 1: fill up
        // with the least confident of the rest.
        std::unordered_set<SampleId> taken(selected.begin(), selected.end());
        std::vector<ScoredSample> rest;
        for (const auto& s : scores)
          if (!taken.contains(s.id)) rest.push_back(s);
        for (SampleId id : select_least_confidence(rest, b - selected.size()))
          selected.push_back(id);
      }
    } else {
      switch (cfg.strategy) {
        case Strategy::DiaNA: selected = select_active_batch(scores, fit.params, b); break;
        case Strategy::Random: selected = select_random(scores, b, selection_rng); break;
        case Strategy::Entropy: selected = select_entropy(scores, b); break;
        case Strategy::LeastConfidence: selected = select_least_confidence(scores, b); break;
      }
    }

    std::unordered_map<SampleId, const ScoredSample*> by_id;
    for (const auto& s : scores) by_id.emplace(s.id, &s);
    std::size_t wrong = 0;
    for (SampleId id : selected) {
      const ScoredSample& s = *by_id.at(id);
      const bool miss = s.pred_label != pool.oracle_label(id);
      wrong += miss ? 1 : 0;
      rep.selected.push_back(
          {id, component_posterior(s.info_score, fit.params)[component_index(Category::UI)],
           miss});
    }
    rep.selected_error_rate =
        selected.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(selected.size());

    pool.annotate_batch(selected);

    // Partition of the remainder with the same fitted mixture.
    const std::unordered_set<SampleId> just_selected(selected.begin(), selected.end());
    std::vector<ScoredSample> remaining;
    remaining.reserve(scores.size() - selected.size());
    for (const auto& s : scores)
      if (!just_selected.contains(s.id)) remaining.push_back(s);
    const PartitionAssignment partition = partition_scores(remaining, fit.params);
    rep.partition = {partition.size(Category::CC), partition.size(Category::UC),
                     partition.size(Category::UI), partition.size(Category::CI)};

    check_round_invariants(pool, selected, b, rep.partition, annotated);

    // Customized training.
    TrainingSet<double> data;
    if (cfg.sfda) {
      for (const auto& ls : pool.target_labeled()) data.labeled.push_back({ls.sample.x, ls.label});
    } else {
      data.labeled = labeled_examples(pool);
    }
    if (cfg.strategy == Strategy::DiaNA) {
      for (const auto& s : remaining) {
        const Category c = partition.category.at(s.id);
        if (c == Category::CC && train.lambda_c != 0)
          data.cc.push_back({pool.unlabeled_sample(s.id).x, s.sim_label});
        else if (c == Category::UC && train.lambda_e != 0)
          data.uc.push_back(pool.unlabeled_sample(s.id).x);
      }
    }
    rep.cc_empty = data.cc.empty();
    rep.uc_empty = data.uc.empty();
    rep.train_loss = train_epochs(model, data, train, train.epochs_per_round, train_rng);

    rep.accuracy = evaluate(model, pool);
    rep.target_labeled = pool.target_labeled().size();
    rep.target_unlabeled = pool.target_unlabeled().size();
    result.rounds.push_back(std::move(rep));
  }

  if (annotated.size() != static_cast<std::size_t>(cfg.budget) && cfg.effective_rounds() > 0)
    throw InvariantViolation("run annotated " + std::to_string(annotated.size()) +
                             " samples, budget is " + std::to_string(cfg.budget));
  if (pool.total_size() != initial_total) throw InvariantViolation("pool lost samples");
  return result;
}

ConsistencyDiagnostic consistency_by_loss(const Model& model, const DataPool& pool,
                                          const CentroidSet& centroids, int k, double q) {
  const auto unlabeled = pool.target_unlabeled();
  std::vector<double> losses;
  losses.reserve(unlabeled.size());
  for (const auto& s : unlabeled)
    losses.push_back(cross_entropy_at(forward(model, s.x).probs, pool.oracle_label(s.id)));
  const LossSplit split = split_by_loss_quantile(losses, q);
  const SimilarityIndex index(centroids, k);

  auto rate = [&](const std::vector<std::size_t>& members) -> std::optional<double> {
    if (members.empty()) return std::nullopt;
    std::vector<VectorXd> xs;
    xs.reserve(members.size());
    for (std::size_t i : members) xs.push_back(unlabeled[i].x);
    return consistency_rate(model, index, xs);
  };
  ConsistencyDiagnostic d;
  d.k = k;
  d.quantile = q;
  d.loss_threshold = split.threshold;
  d.n_well_learnt = split.well_learnt.size();
  d.n_underfitted = split.underfitted.size();
  d.rate_well_learnt = rate(split.well_learnt);
  d.rate_underfitted = rate(split.underfitted);
  return d;
}

RunResult run_baseline(const LoopConfig& cfg, DataPool pool) {
  if (cfg.strategy == Strategy::DiaNA)
    throw std::invalid_argument("run_baseline: strategy must not be DiaNA");
  return run_active_loop(cfg, std::move(pool));
}

}  // namespace diana
