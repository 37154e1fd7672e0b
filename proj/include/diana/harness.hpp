#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "diana/classifier.hpp"
#include "diana/datapool.hpp"
#include "diana/gmm.hpp"
#include "diana/sampler.hpp"

namespace diana {

enum class Strategy { DiaNA, Random, Entropy, LeastConfidence };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct LoopConfig {
  int budget = 100;
  int rounds = 5;
  double tau = 0.95;
  int k = 8;             // top-k size; feature_dim / 8 by default
  int feature_dim = 64;
  int pretrain_epochs = 30;
  TrainConfig train;
  Strategy strategy = Strategy::DiaNA;
  std::optional<SfdaConfig> sfda;       // source-free variant when set
  std::optional<double> gmm_alpha;      // overrides |D_L| / (|D_L| + |D_U|)
  std::uint64_t seed = 0;

  /// Annotations per round, B / R (0 when B = 0).
  int per_round() const { return budget == 0 ? 0 : budget / rounds; }
  int effective_rounds() const { return budget == 0 ? 0 : rounds; }
  void validate() const;
};

struct PartitionSizes {
  std::size_t cc = 0;
  std::size_t uc = 0;
  std::size_t ui_residual = 0;
  std::size_t ci = 0;

  std::size_t total() const { return cc + uc + ui_residual + ci; }
};

struct SelectedSample {
  SampleId id = 0;
  double posterior_ui = 0;   // Pr(z = UI) under the round's mixture
  bool misclassified = false;
};

struct RoundReport {
  int round = 0;
  double accuracy = 0;
  PartitionSizes partition;
  GmmParams gmm;
  int gmm_iterations = 0;
  double gmm_objective = 0;
  std::vector<SelectedSample> selected;
  double selected_error_rate = 0;
  std::size_t target_labeled = 0;
  std::size_t target_unlabeled = 0;
  double train_loss = 0;
  bool cc_empty = true;
  bool uc_empty = true;
};

struct RunResult {
  Strategy strategy = Strategy::DiaNA;
  double initial_accuracy = 0;
  std::vector<RoundReport> rounds;
  Model model;

  double final_accuracy() const {
    return rounds.empty() ? initial_accuracy : rounds.back().accuracy;
  }
};

/// Deterministic sub-seeds for the independent random streams of a run.
enum class Stream : std::uint64_t { ModelInit = 1, Pretrain = 2, Selection = 3, Training = 4 };
std::uint64_t stream_seed(std::uint64_t seed, Stream stream);

std::vector<Example<double>> source_examples(const DataPool& pool);
std::vector<Example<double>> labeled_examples(const DataPool& pool);  // S ∪ T

/// Supervised training on the source pool for `epochs`.
Model pretrain_source(Model model, const DataPool& pool, const TrainConfig& cfg, int epochs);

/// Fraction of all target samples (annotated or not) predicted correctly.
double evaluate(const Model& model, const DataPool& pool);

/// Uniform draw without replacement: the ids are sorted, shuffled with
/// `rng` and the first b are taken.
std::vector<SampleId> select_random(std::span<const ScoredSample> unlabeled, std::size_t b,
                                    std::mt19937_64& rng);
/// Highest prediction entropy first; smaller id on ties.
std::vector<SampleId> select_entropy(std::span<const ScoredSample> unlabeled, std::size_t b);
/// Lowest max-probability first; smaller id on ties.
std::vector<SampleId> select_least_confidence(std::span<const ScoredSample> unlabeled,
                                              std::size_t b);

/// Source pretraining followed by R rounds of
/// centroids -> scores -> mixture fit -> select -> annotate -> partition ->
/// train. Throws InvariantViolation if a structural invariant breaks.
RunResult run_active_loop(const LoopConfig& cfg, DataPool pool);

/// Consistency rates of the well-learnt and underfitted parts of U, split at
/// the q-quantile of the per-sample cross-entropy against the true label.
/// A rate is empty when its subset is.
struct ConsistencyDiagnostic {
  int k = 0;
  double quantile = 0;
  double loss_threshold = 0;
  std::size_t n_well_learnt = 0;
  std::size_t n_underfitted = 0;
  std::optional<double> rate_well_learnt;
  std::optional<double> rate_underfitted;
};
ConsistencyDiagnostic consistency_by_loss(const Model& model, const DataPool& pool,
                                          const CentroidSet& centroids, int k, double q);

/// run_active_loop for a non-DiaNA strategy; trains with L_sup only.
RunResult run_baseline(const LoopConfig& cfg, DataPool pool);

}  // namespace diana
