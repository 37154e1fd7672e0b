#include "diana/datapool.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <unordered_set>

#include <unsupported/Eigen/MatrixFunctions>

namespace diana {

std::string to_string(ShiftKind kind) {
  switch (kind) {
    case ShiftKind::Rotation: return "rotation";
    case ShiftKind::Translation: return "translation";
    case ShiftKind::CovarianceScale: return "covariance_scale";
    case ShiftKind::Mixed: return "mixed";
  }
  return "rotation";
}

ShiftKind shift_kind_from_string(const std::string& name) {
  if (name == "rotation") return ShiftKind::Rotation;
  if (name == "translation") return ShiftKind::Translation;
  if (name == "covariance_scale") return ShiftKind::CovarianceScale;
  if (name == "mixed") return ShiftKind::Mixed;
  throw std::invalid_argument("unknown shift kind: " + name);
}

void ShiftConfig::validate() const {
  if (num_classes < 1) throw std::invalid_argument("num_classes must be positive");
  if (input_dim < 1) throw std::invalid_argument("input_dim must be positive");
  if (n_source <= 0 || n_target <= 0)
    throw std::invalid_argument("sample counts must be positive");
  if (n_source < num_classes)
    throw std::invalid_argument("n_source must cover every class at least once");
  if (!(shift_magnitude >= 0.0)) throw std::invalid_argument("shift_magnitude must be >= 0");
  if (!(class_separation >= 0.0) || !(class_noise >= 0.0))
    throw std::invalid_argument("class_separation and class_noise must be >= 0");
}

DataPool::DataPool(int num_classes, int input_dim)
    : num_classes_(num_classes), input_dim_(input_dim) {
  if (num_classes < 1 || input_dim < 1)
    throw std::invalid_argument("DataPool: class count and dimension must be positive");
}

void DataPool::check_new_sample(const Sample& s, ClassIndex label) {
  if (s.x.size() != input_dim_) throw std::invalid_argument("sample dimension mismatch");
  if (label < 0 || label >= num_classes_) throw std::invalid_argument("label out of range");
  if (all_ids_.contains(s.id))
    throw std::invalid_argument("duplicate sample id " + std::to_string(s.id));
}

void DataPool::add_source(Sample s, ClassIndex label) {
  s.domain = Domain::Source;
  check_new_sample(s, label);
  all_ids_.emplace(s.id, Domain::Source);
  source_.push_back({std::move(s), label});
}

void DataPool::add_target_unlabeled(Sample s, ClassIndex hidden_label) {
  s.domain = Domain::Target;
  check_new_sample(s, hidden_label);
  all_ids_.emplace(s.id, Domain::Target);
  hidden_labels_.emplace(s.id, hidden_label);
  unlabeled_index_.emplace(s.id, target_unlabeled_.size());
  target_unlabeled_.push_back(std::move(s));
}

const Sample& DataPool::unlabeled_sample(SampleId id) const {
  auto it = unlabeled_index_.find(id);
  if (it == unlabeled_index_.end())
    throw std::out_of_range("sample " + std::to_string(id) + " is not in the unlabeled pool");
  return target_unlabeled_[it->second];
}

ClassIndex DataPool::oracle_label(SampleId id) const {
  if (!all_ids_.contains(id)) throw std::out_of_range("unknown sample id " + std::to_string(id));
  if (!unlabeled_index_.contains(id))
    throw std::invalid_argument("sample " + std::to_string(id) + " is not in the unlabeled pool");
  return hidden_labels_.at(id);
}

void DataPool::annotate_batch(std::span<const SampleId> ids) {
  std::unordered_set<SampleId> seen;
  for (SampleId id : ids) {
    if (!seen.insert(id).second)
      throw std::invalid_argument("duplicate id " + std::to_string(id) + " in annotation batch");
    oracle_label(id);  // throws on unknown / already annotated
  }
  if (ids.empty()) return;

  for (SampleId id : ids) {
    const std::size_t pos = unlabeled_index_.at(id);
    target_labeled_.push_back({target_unlabeled_[pos], hidden_labels_.at(id)});
  }
  std::erase_if(target_unlabeled_, [&](const Sample& s) { return seen.contains(s.id); });
  unlabeled_index_.clear();
  for (std::size_t i = 0; i < target_unlabeled_.size(); ++i)
    unlabeled_index_.emplace(target_unlabeled_[i].id, i);
}

void DataPool::check_invariants() const {
  std::unordered_set<SampleId> ids;
  auto insert = [&](SampleId id) {
    if (!ids.insert(id).second)
      throw InvariantViolation("sample " + std::to_string(id) + " appears in two pools");
  };
  std::vector<bool> covered(num_classes_, false);
  for (const auto& ls : source_) {
    insert(ls.sample.id);
    if (ls.label < 0 || ls.label >= num_classes_) throw InvariantViolation("label out of range");
    covered[ls.label] = true;
  }
  for (const auto& ls : target_labeled_) {
    insert(ls.sample.id);
    if (ls.label < 0 || ls.label >= num_classes_) throw InvariantViolation("label out of range");
  }
  for (const auto& s : target_unlabeled_) insert(s.id);
  if (ids.size() != all_ids_.size()) throw InvariantViolation("pool sizes do not add up");
  if (!source_.empty() && std::find(covered.begin(), covered.end(), false) != covered.end())
    throw InvariantViolation("source pool does not cover every class");
}

namespace {

MatrixXd simplex_means(int num_classes, int dim, double scale, std::mt19937_64& rng) {
  MatrixXd means(dim, num_classes);
  if (num_classes <= dim) {
    // Vertices e_c of the standard simplex, centered, then scaled.
    MatrixXd e = MatrixXd::Identity(dim, num_classes);
    const VectorXd center = e.rowwise().mean();
    for (int c = 0; c < num_classes; ++c) {
      VectorXd v = e.col(c) - center;
      const double n = v.norm();
      means.col(c) = n > 0 ? VectorXd(scale * v / n) : VectorXd::Zero(dim);
    }
  } else {
    std::normal_distribution<double> normal;
    for (int c = 0; c < num_classes; ++c) {
      VectorXd v(dim);
      for (int i = 0; i < dim; ++i) v[i] = normal(rng);
      means.col(c) = scale * v / v.norm();
    }
  }
  return means;
}

struct TargetShift {
  MatrixXd rotation;
  VectorXd offset;
  double noise_scale = 1.0;
};

TargetShift draw_shift(const ShiftConfig& cfg, std::mt19937_64& rng) {
  const int d = cfg.input_dim;
  std::normal_distribution<double> normal;

  // Random skew-symmetric generator scaled to a quarter-turn spectral radius;
  // exp(t S) walks from the identity (t = 0) along a geodesic of SO(d).
  MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = normal(rng);
  MatrixXd skew = 0.5 * (a - a.transpose());
  VectorXd dir(d);
  for (int i = 0; i < d; ++i) dir[i] = normal(rng);
  dir /= dir.norm();

  TargetShift shift{MatrixXd::Identity(d, d), VectorXd::Zero(d), 1.0};
  const double t = cfg.shift_magnitude;
  const bool rotate = cfg.shift_kind == ShiftKind::Rotation || cfg.shift_kind == ShiftKind::Mixed;
  const bool translate =
      cfg.shift_kind == ShiftKind::Translation || cfg.shift_kind == ShiftKind::Mixed;
  const bool rescale =
      cfg.shift_kind == ShiftKind::CovarianceScale || cfg.shift_kind == ShiftKind::Mixed;

  if (rotate && t > 0 && d > 1) {
    const double radius = Eigen::SelfAdjointEigenSolver<MatrixXd>(skew.transpose() * skew)
                              .eigenvalues()
                              .maxCoeff();
    if (radius > 0) {
      skew *= (std::numbers::pi / 2.0) / std::sqrt(radius);
      shift.rotation = MatrixXd(t * skew).exp();
    }
  }
  if (translate) shift.offset = t * cfg.class_separation * dir;
  if (rescale) shift.noise_scale = 1.0 + t;
  return shift;
}

}  // namespace

DataPool generate_shifted_dataset(const ShiftConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const int d = cfg.input_dim;
  const MatrixXd means = simplex_means(cfg.num_classes, d, cfg.class_separation, rng);
  const TargetShift shift = draw_shift(cfg, rng);

  std::normal_distribution<double> normal;
  auto draw = [&](ClassIndex c, double noise) {
    VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = noise * normal(rng);
    return VectorXd(x + means.col(c));
  };

  DataPool pool(cfg.num_classes, d);
  SampleId next_id = 0;
  for (int i = 0; i < cfg.n_source; ++i) {
    const ClassIndex c = i % cfg.num_classes;
    pool.add_source({next_id++, draw(c, cfg.class_noise), Domain::Source}, c);
  }
  for (int i = 0; i < cfg.n_target; ++i) {
    const ClassIndex c = i % cfg.num_classes;
    VectorXd x = shift.rotation * draw(c, cfg.class_noise * shift.noise_scale) + shift.offset;
    pool.add_target_unlabeled({next_id++, std::move(x), Domain::Target}, c);
  }
  return pool;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

DataPool load_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty");
  const auto header = split_csv(line);
  if (header.size() != 2) throw std::runtime_error("dataset header must be `d_in,C`");
  const int d_in = std::stoi(header[0]);
  const int num_classes = std::stoi(header[1]);
  DataPool pool(num_classes, d_in);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line.back() == '\r') line.pop_back();
    const auto cells = split_csv(line);
    if (cells.size() != static_cast<std::size_t>(3 + d_in))
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": expected " +
                               std::to_string(3 + d_in) + " fields");
    Sample s;
    s.id = std::stoll(cells[0]);
    const ClassIndex label = std::stoi(cells[2]);
    s.x.resize(d_in);
    for (int i = 0; i < d_in; ++i) s.x[i] = std::stod(cells[3 + i]);
    if (!s.x.allFinite())
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": non-finite feature");
    if (cells[1] == "S") {
      pool.add_source(std::move(s), label);
    } else if (cells[1] == "T") {
      pool.add_target_unlabeled(std::move(s), label);
    } else {
      throw std::runtime_error("dataset line " + std::to_string(line_no) +
                               ": domain must be S or T");
    }
  }
  pool.check_invariants();
  return pool;
}

void save_dataset_file(const DataPool& pool, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file " + path.string());
  out.precision(17);
  out << pool.input_dim() << ',' << pool.num_classes() << '\n';
  auto row = [&](const Sample& s, char domain, ClassIndex label) {
    out << s.id << ',' << domain << ',' << label;
    for (Eigen::Index i = 0; i < s.x.size(); ++i) out << ',' << s.x[i];
    out << '\n';
  };
  for (const auto& ls : pool.source_labeled()) row(ls.sample, 'S', ls.label);
  for (const auto& ls : pool.target_labeled()) row(ls.sample, 'T', ls.label);
  for (const auto& s : pool.target_unlabeled()) row(s, 'T', pool.oracle_label(s.id));
}

}  // namespace diana
