#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace diana {

using SampleId = std::int64_t;
using ClassIndex = int;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;

/// The four target-data categories. The numeric value is the 1-based
/// Gaussian component index of the score mixture.
enum class Category : int { CC = 1, UC = 2, UI = 3, CI = 4 };

constexpr int kNumComponents = 4;

constexpr int component_index(Category c) { return static_cast<int>(c) - 1; }
constexpr Category category_from_index(int k) { return static_cast<Category>(k + 1); }

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::CC: return "CC";
    case Category::UC: return "UC";
    case Category::UI: return "UI";
    case Category::CI: return "CI";
  }
  return "?";
}

/// Raised when a run-time structural invariant (budget, partition,
/// disjointness) is observed to be broken.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace diana
