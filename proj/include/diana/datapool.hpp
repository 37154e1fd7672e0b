#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "diana/types.hpp"

namespace diana {

enum class Domain { Source, Target };

struct Sample {
  SampleId id = 0;
  VectorXd x;
  Domain domain = Domain::Source;
};

struct LabeledSample {
  Sample sample;
  ClassIndex label = 0;
};

enum class ShiftKind { Rotation, Translation, CovarianceScale, Mixed };

std::string to_string(ShiftKind kind);
ShiftKind shift_kind_from_string(const std::string& name);

struct ShiftConfig {
  int num_classes = 5;
  int input_dim = 8;
  int n_source = 500;
  int n_target = 2000;
  ShiftKind shift_kind = ShiftKind::Rotation;
  double shift_magnitude = 0.5;
  // Distance of each class mean from the origin and per-coordinate noise
  // of the class-conditional Gaussians.
  double class_separation = 3.0;
  double class_noise = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Source-labeled, target-labeled and target-unlabeled pools. Hidden labels
/// of unlabeled target samples are reachable only through oracle_label().
///
/// Mutation (annotate_batch) is single-writer; const access is reentrant.
class DataPool {
 public:
  DataPool(int num_classes, int input_dim);

  void add_source(Sample s, ClassIndex label);
  void add_target_unlabeled(Sample s, ClassIndex hidden_label);

  int num_classes() const { return num_classes_; }
  int input_dim() const { return input_dim_; }

  std::span<const LabeledSample> source_labeled() const { return source_; }
  std::span<const LabeledSample> target_labeled() const { return target_labeled_; }
  std::span<const Sample> target_unlabeled() const { return target_unlabeled_; }

  std::size_t total_size() const {
    return source_.size() + target_labeled_.size() + target_unlabeled_.size();
  }

  bool is_unlabeled(SampleId id) const { return unlabeled_index_.contains(id); }
  const Sample& unlabeled_sample(SampleId id) const;

  /// Hidden label of an unlabeled target sample. Throws if `id` is unknown
  /// or already annotated.
  ClassIndex oracle_label(SampleId id) const;

  /// Moves `ids` from the unlabeled pool into the target-labeled pool with
  /// their oracle labels. All-or-nothing: on error the pool is unchanged.
  void annotate_batch(std::span<const SampleId> ids);

  /// Checks disjointness, label ranges and source class coverage.
  void check_invariants() const;

 private:
  int num_classes_;
  int input_dim_;
  std::vector<LabeledSample> source_;
  std::vector<LabeledSample> target_labeled_;
  std::vector<Sample> target_unlabeled_;
  std::unordered_map<SampleId, std::size_t> unlabeled_index_;
  std::unordered_map<SampleId, ClassIndex> hidden_labels_;
  std::unordered_map<SampleId, Domain> all_ids_;

  void check_new_sample(const Sample& s, ClassIndex label);
};

/// Class-conditional Gaussians with means on a scaled simplex; target samples
/// are drawn from the same Gaussians passed through the configured shift.
/// Pure function of `cfg` (including the seed).
DataPool generate_shifted_dataset(const ShiftConfig& cfg);

/// Reads `d_in,C` followed by `id,domain,label,f_0,...` lines.
DataPool load_dataset_file(const std::filesystem::path& path);

/// Writes the full dataset (including hidden target labels) in the same
/// format load_dataset_file() reads.
void save_dataset_file(const DataPool& pool, const std::filesystem::path& path);

}  // namespace diana
