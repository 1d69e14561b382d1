#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hpoviz/encoding.hpp"

namespace hpoviz {

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;  // population variance across trees
};

/// Anything that produces an ensemble of predictions for an encoded vector.
/// Analyses that only need predictions (LPI, ablation, PDP) accept this.
class Surrogate {
 public:
  virtual ~Surrogate() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> predict_members(std::span<const double> x) const = 0;

  Prediction predict(std::span<const double> x) const;
};

/// Encoded-space extent of one column. Categorical columns cover codes
/// 0..n_codes-1; numeric columns cover [lower, upper].
struct DimBounds {
  bool categorical = false;
  double lower = 0.0;
  double upper = 1.0;
  std::size_t n_codes = 0;
};

std::vector<DimBounds> encoded_bounds(std::span<const Column> columns);

struct TreeNode {
  std::int32_t left = -1;  // -1 for leaves
  std::int32_t right = -1;
  std::int32_t split_dim = -1;
  bool categorical = false;
  double threshold = 0.0;            // numeric: x <= threshold goes left
  std::vector<int> left_codes;       // categorical: sorted codes going left
  double mean = 0.0;
  std::size_t count = 0;

  bool is_leaf() const { return left < 0; }

  static TreeNode leaf(double mean, std::size_t count = 1);
  static TreeNode numeric_split(int dim, double threshold, int left, int right);
  static TreeNode categorical_split(int dim, std::vector<int> codes, int left, int right);
};

/// Binary regression tree. nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  bool goes_left(const TreeNode& node, double value) const;
  double predict(std::span<const double> x) const;
  std::size_t depth() const;
  std::size_t leaf_count() const;
};

/// Axis-aligned region of a leaf, clipped to the encoded bounds. Numeric
/// columns use [lo, hi]; categorical columns use `codes` flags.
struct LeafBox {
  double mean = 0.0;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::vector<char>> codes;

  /// Fraction of the column's extent covered by the box.
  double fraction(std::size_t dim, const DimBounds& b) const;
};

std::vector<LeafBox> leaf_boxes(const Tree& tree, std::span<const DimBounds> bounds);

/// Exact prediction of `tree` with columns `dims` fixed to `values` and every
/// other column integrated out uniformly over its bounds. An empty `dims`
/// yields the volume-weighted mean of the leaves.
double tree_marginal(const Tree& tree, std::span<const DimBounds> bounds,
                     std::span<const std::size_t> dims, std::span<const double> values);

struct ForestParams {
  std::size_t n_trees = 16;
  std::size_t max_depth = 64;
  std::size_t min_samples_leaf = 1;
  bool bootstrap = true;
  double max_features_ratio = 5.0 / 6.0;  // features tried per node: ceil(ratio * d)
  std::uint64_t seed = 0;
};

class Forest : public Surrogate {
 public:
  Forest() = default;
  Forest(std::vector<Tree> trees, std::vector<DimBounds> bounds, std::uint64_t seed = 0)
      : trees_(std::move(trees)), bounds_(std::move(bounds)), seed_(seed) {}

  std::size_t dim() const override { return bounds_.size(); }
  std::vector<double> predict_members(std::span<const double> x) const override;

  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<DimBounds>& bounds() const { return bounds_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<Tree> trees_;
  std::vector<DimBounds> bounds_;
  std::uint64_t seed_ = 0;
};

/// CART forest on a row-major n x d design matrix. Deterministic for a given
/// seed. Throws InsufficientData for n < 2.
Forest fit_forest(std::span<const double> x, std::size_t n, std::size_t d, std::span<const double> y,
                  std::span<const Column> columns, const ForestParams& params);

/// Fits on the matrix rows with finite y.
Forest fit_forest(const EncodedMatrix& matrix, const ForestParams& params);

}  // namespace hpoviz
