#include "hpoviz/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hpoviz/errors.hpp"
#include "hpoviz/random.hpp"

namespace hpoviz {

Prediction Surrogate::predict(std::span<const double> x) const {
  auto members = predict_members(x);
  Prediction p;
  if (members.empty()) return p;
  double n = static_cast<double>(members.size());
  p.mean = std::accumulate(members.begin(), members.end(), 0.0) / n;
  double ss = 0.0;
  for (double m : members) ss += (m - p.mean) * (m - p.mean);
  p.variance = ss / n;
  return p;
}

std::vector<DimBounds> encoded_bounds(std::span<const Column> columns) {
  std::vector<DimBounds> out;
  out.reserve(columns.size());
  for (const auto& c : columns) {
    if (c.categorical()) {
      out.push_back({true, 0.0, static_cast<double>(c.n_choices) - 1.0, c.n_choices});
    } else {
      out.push_back({false, 0.0, 1.0, 0});
    }
  }
  return out;
}

TreeNode TreeNode::leaf(double mean, std::size_t count) {
  TreeNode n;
  n.mean = mean;
  n.count = count;
  return n;
}

TreeNode TreeNode::numeric_split(int dim, double threshold, int left, int right) {
  TreeNode n;
  n.split_dim = dim;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return n;
}

TreeNode TreeNode::categorical_split(int dim, std::vector<int> codes, int left, int right) {
  TreeNode n;
  n.split_dim = dim;
  n.categorical = true;
  std::sort(codes.begin(), codes.end());
  n.left_codes = std::move(codes);
  n.left = left;
  n.right = right;
  return n;
}

bool Tree::goes_left(const TreeNode& node, double value) const {
  if (node.categorical) {
    int code = static_cast<int>(std::llround(value));
    return std::binary_search(node.left_codes.begin(), node.left_codes.end(), code);
  }
  return value <= node.threshold;
}

double Tree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& node = nodes[i];
    i = static_cast<std::size_t>(goes_left(node, x[static_cast<std::size_t>(node.split_dim)]) ? node.left
                                                                                              : node.right);
  }
  return nodes[i].mean;
}

std::size_t Tree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[i].is_leaf()) {
      stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
      stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
    }
  }
  return best;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double LeafBox::fraction(std::size_t dim, const DimBounds& b) const {
  if (b.categorical) {
    if (b.n_codes == 0) return 0.0;
    auto k = std::count(codes[dim].begin(), codes[dim].end(), char{1});
    return static_cast<double>(k) / static_cast<double>(b.n_codes);
  }
  double width = b.upper - b.lower;
  if (width <= 0.0) return 1.0;
  return std::max(0.0, hi[dim] - lo[dim]) / width;
}

namespace {

// Shared traversal state: the current box while walking down the tree.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<std::vector<char>> codes;

  explicit Box(std::span<const DimBounds> bounds)
      : lo(bounds.size()), hi(bounds.size()), codes(bounds.size()) {
    for (std::size_t j = 0; j < bounds.size(); ++j) {
      lo[j] = bounds[j].lower;
      hi[j] = bounds[j].upper;
      if (bounds[j].categorical) codes[j].assign(bounds[j].n_codes, 1);
    }
  }
};

std::size_t count_codes(const std::vector<char>& flags, const std::vector<int>& left_codes,
                        bool want_left) {
  std::size_t k = 0;
  for (std::size_t c = 0; c < flags.size(); ++c) {
    if (!flags[c]) continue;
    bool left = std::binary_search(left_codes.begin(), left_codes.end(), static_cast<int>(c));
    if (left == want_left) ++k;
  }
  return k;
}

void restrict_codes(std::vector<char>& flags, const std::vector<int>& left_codes, bool keep_left) {
  for (std::size_t c = 0; c < flags.size(); ++c) {
    bool left = std::binary_search(left_codes.begin(), left_codes.end(), static_cast<int>(c));
    if (left != keep_left) flags[c] = 0;
  }
}

void collect_boxes(const Tree& tree, std::size_t i, Box& box, std::vector<LeafBox>& out) {
  const auto& node = tree.nodes[i];
  if (node.is_leaf()) {
    out.push_back({node.mean, box.lo, box.hi, box.codes});
    return;
  }
  auto dim = static_cast<std::size_t>(node.split_dim);
  if (node.categorical) {
    auto saved = box.codes[dim];
    restrict_codes(box.codes[dim], node.left_codes, true);
    collect_boxes(tree, static_cast<std::size_t>(node.left), box, out);
    box.codes[dim] = saved;
    restrict_codes(box.codes[dim], node.left_codes, false);
    collect_boxes(tree, static_cast<std::size_t>(node.right), box, out);
    box.codes[dim] = std::move(saved);
  } else {
    double lo = box.lo[dim];
    double hi = box.hi[dim];
    box.hi[dim] = std::min(hi, node.threshold);
    collect_boxes(tree, static_cast<std::size_t>(node.left), box, out);
    box.hi[dim] = hi;
    box.lo[dim] = std::max(lo, node.threshold);
    collect_boxes(tree, static_cast<std::size_t>(node.right), box, out);
    box.lo[dim] = lo;
  }
}

struct MarginalWalk {
  const Tree& tree;
  std::span<const DimBounds> bounds;
  std::vector<char> fixed;
  std::vector<double> value;
  Box box;

  double visit(std::size_t i, double weight) {
    if (weight <= 0.0) return 0.0;
    const auto& node = tree.nodes[i];
    if (node.is_leaf()) return weight * node.mean;
    auto dim = static_cast<std::size_t>(node.split_dim);
    auto left = static_cast<std::size_t>(node.left);
    auto right = static_cast<std::size_t>(node.right);
    if (fixed[dim]) return visit(tree.goes_left(node, value[dim]) ? left : right, weight);

    if (node.categorical) {
      std::size_t nl = count_codes(box.codes[dim], node.left_codes, true);
      std::size_t nr = count_codes(box.codes[dim], node.left_codes, false);
      if (nl + nr == 0) return 0.0;
      double total = static_cast<double>(nl + nr);
      auto saved = box.codes[dim];
      restrict_codes(box.codes[dim], node.left_codes, true);
      double acc = visit(left, weight * static_cast<double>(nl) / total);
      box.codes[dim] = saved;
      restrict_codes(box.codes[dim], node.left_codes, false);
      acc += visit(right, weight * static_cast<double>(nr) / total);
      box.codes[dim] = std::move(saved);
      return acc;
    }
    double lo = box.lo[dim];
    double hi = box.hi[dim];
    double width = hi - lo;
    if (width <= 0.0) return 0.0;
    double cut = std::clamp(node.threshold, lo, hi);
    box.hi[dim] = cut;
    double acc = visit(left, weight * (cut - lo) / width);
    box.hi[dim] = hi;
    box.lo[dim] = cut;
    acc += visit(right, weight * (hi - cut) / width);
    box.lo[dim] = lo;
    return acc;
  }
};

}  // namespace

std::vector<LeafBox> leaf_boxes(const Tree& tree, std::span<const DimBounds> bounds) {
  std::vector<LeafBox> out;
  if (tree.nodes.empty()) return out;
  Box box(bounds);
  collect_boxes(tree, 0, box, out);
  return out;
}

double tree_marginal(const Tree& tree, std::span<const DimBounds> bounds,
                     std::span<const std::size_t> dims, std::span<const double> values) {
  if (dims.size() != values.size()) throw_invalid("values", "tree_marginal: dims/values length mismatch");
  MarginalWalk walk{tree, bounds, std::vector<char>(bounds.size(), 0),
                    std::vector<double>(bounds.size(), 0.0), Box(bounds)};
  for (std::size_t k = 0; k < dims.size(); ++k) {
    std::size_t dim = dims[k];
    if (dim >= bounds.size()) throw_invalid("dims", "tree_marginal: dimension out of range");
    if (walk.fixed[dim]) throw_invalid("dims", "tree_marginal: repeated dimension");
    const auto& b = bounds[dim];
    double v = values[k];
    bool inside = b.categorical ? (v >= 0.0 && v <= static_cast<double>(b.n_codes) - 1.0 &&
                                   std::floor(v) == v)
                                : (v >= b.lower && v <= b.upper);
    if (!inside) throw_invalid("values", "tree_marginal: value outside bounds of dimension " + std::to_string(dim));
    walk.fixed[dim] = 1;
    walk.value[dim] = v;
  }
  if (tree.nodes.empty()) return 0.0;
  return walk.visit(0, 1.0);
}

std::vector<double> Forest::predict_members(std::span<const double> x) const {
  if (x.size() != bounds_.size()) throw_invalid("x", "predict: dimension mismatch");
  std::vector<double> out;
  out.reserve(trees_.size());
  for (const auto& t : trees_) out.push_back(t.predict(x));
  return out;
}

namespace {

struct SplitChoice {
  bool found = false;
  double score = 0.0;
  std::size_t dim = 0;
  bool categorical = false;
  double threshold = 0.0;
  std::vector<int> left_codes;
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const double> x, std::size_t d, std::span<const double> y,
              std::span<const Column> columns, const ForestParams& params, Rng& rng)
      : x_(x), d_(d), y_(y), columns_(columns), params_(params), rng_(rng) {
    n_features_ = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(params.max_features_ratio * static_cast<double>(d) - 1e-9)));
    n_features_ = std::min(n_features_, d);
    features_.resize(d);
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  Tree build(std::vector<std::size_t> sample) {
    tree_.nodes.clear();
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  double at(std::size_t row, std::size_t col) const { return x_[row * d_ + col]; }

  int grow(std::vector<std::size_t>& idx, std::size_t depth) {
    int id = static_cast<int>(tree_.nodes.size());
    double mean = 0.0;
    for (std::size_t r : idx) mean += y_[r];
    mean /= static_cast<double>(idx.size());
    tree_.nodes.push_back(TreeNode::leaf(mean, idx.size()));

    double sse = 0.0;
    for (std::size_t r : idx) sse += (y_[r] - mean) * (y_[r] - mean);
    // Exact test: the mean of equal values can round away from them.
    bool constant = std::all_of(idx.begin(), idx.end(), [&](std::size_t r) { return y_[r] == y_[idx.front()]; });
    if (depth >= params_.max_depth || idx.size() < 2 * params_.min_samples_leaf || constant || sse <= 0.0) {
      return id;
    }

    SplitChoice best;
    // Scores within this margin are ties and keep the earlier candidate, so
    // the tree does not depend on rounding of the accumulated sums.
    tie_margin_ = 1e-12 * sse;
    // Partial Fisher-Yates: the first n_features_ entries are the candidates.
    for (std::size_t k = 0; k < n_features_; ++k) {
      std::size_t pick = k + static_cast<std::size_t>(uniform_index(rng_, d_ - k));
      std::swap(features_[k], features_[pick]);
    }
    for (std::size_t k = 0; k < n_features_; ++k) {
      std::size_t dim = features_[k];
      if (columns_[dim].categorical()) {
        categorical_split(idx, dim, mean, best);
      } else {
        numeric_split(idx, dim, mean, best);
      }
    }
    // Centered scores: the gain is the reduction in squared error.
    if (!best.found || best.score <= 1e-10 * sse) return id;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    TreeNode probe = best.categorical
                         ? TreeNode::categorical_split(static_cast<int>(best.dim), best.left_codes, 0, 0)
                         : TreeNode::numeric_split(static_cast<int>(best.dim), best.threshold, 0, 0);
    for (std::size_t r : idx) {
      (tree_.goes_left(probe, at(r, best.dim)) ? left : right).push_back(r);
    }
    const std::size_t node_count = idx.size();
    idx.clear();
    idx.shrink_to_fit();
    int l = grow(left, depth + 1);
    int rr = grow(right, depth + 1);
    probe.left = l;
    probe.right = rr;
    probe.mean = tree_.nodes[static_cast<std::size_t>(id)].mean;
    probe.count = node_count;
    tree_.nodes[static_cast<std::size_t>(id)] = std::move(probe);
    return id;
  }

  // Score = between-children sum of squares of centered responses.
  void numeric_split(const std::vector<std::size_t>& idx, std::size_t dim, double mean,
                     SplitChoice& best) {
    order_.assign(idx.begin(), idx.end());
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      double va = at(a, dim);
      double vb = at(b, dim);
      return va < vb || (va == vb && a < b);
    });
    const std::size_t n = order_.size();
    double total = 0.0;
    for (std::size_t r : order_) total += y_[r] - mean;
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += y_[order_[i]] - mean;
      std::size_t nl = i + 1;
      std::size_t nr = n - nl;
      if (nl < params_.min_samples_leaf) continue;
      if (nr < params_.min_samples_leaf) break;
      double a = at(order_[i], dim);
      double b = at(order_[i + 1], dim);
      if (!(a < b)) continue;
      double right_sum = total - left_sum;
      double score = left_sum * left_sum / static_cast<double>(nl) +
                     right_sum * right_sum / static_cast<double>(nr);
      if (!best.found || score > best.score + tie_margin_) {
        double t = a + (b - a) / 2.0;
        if (!(t < b)) t = a;
        best.found = true;
        best.score = score;
        best.dim = dim;
        best.categorical = false;
        best.threshold = t;
        best.left_codes.clear();
      }
    }
  }

  // Categories (including the inactive sentinel) ordered by mean response;
  // the best prefix of that order goes left.
  void categorical_split(const std::vector<std::size_t>& idx, std::size_t dim, double mean,
                         SplitChoice& best) {
    struct Stat {
      int code;
      double sum = 0.0;
      std::size_t count = 0;
    };
    std::vector<Stat> stats;
    for (std::size_t r : idx) {
      int code = static_cast<int>(std::llround(at(r, dim)));
      auto it = std::find_if(stats.begin(), stats.end(), [&](const Stat& s) { return s.code == code; });
      if (it == stats.end()) {
        stats.push_back({code});
        it = stats.end() - 1;
      }
      it->sum += y_[r] - mean;
      ++it->count;
    }
    if (stats.size() < 2) return;
    std::sort(stats.begin(), stats.end(), [](const Stat& a, const Stat& b) {
      double ma = a.sum / static_cast<double>(a.count);
      double mb = b.sum / static_cast<double>(b.count);
      return ma < mb || (ma == mb && a.code < b.code);
    });
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& s : stats) {
      total += s.sum;
      n += s.count;
    }
    double left_sum = 0.0;
    std::size_t nl = 0;
    for (std::size_t k = 0; k + 1 < stats.size(); ++k) {
      left_sum += stats[k].sum;
      nl += stats[k].count;
      std::size_t nr = n - nl;
      if (nl < params_.min_samples_leaf || nr < params_.min_samples_leaf) continue;
      double right_sum = total - left_sum;
      double score = left_sum * left_sum / static_cast<double>(nl) +
                     right_sum * right_sum / static_cast<double>(nr);
      if (!best.found || score > best.score + tie_margin_) {
        best.found = true;
        best.score = score;
        best.dim = dim;
        best.categorical = true;
        best.left_codes.clear();
        for (std::size_t q = 0; q <= k; ++q) best.left_codes.push_back(stats[q].code);
        std::sort(best.left_codes.begin(), best.left_codes.end());
      }
    }
  }

  std::span<const double> x_;
  std::size_t d_;
  double tie_margin_ = 0.0;
  std::span<const double> y_;
  std::span<const Column> columns_;
  const ForestParams& params_;
  Rng& rng_;
  std::size_t n_features_ = 1;
  std::vector<std::size_t> features_;
  std::vector<std::size_t> order_;
  Tree tree_;
};

}  // namespace

Forest fit_forest(std::span<const double> x, std::size_t n, std::size_t d, std::span<const double> y,
                  std::span<const Column> columns, const ForestParams& params) {
  if (n < 2) throw_insufficient("need at least 2 observations to fit a forest, got " + std::to_string(n));
  if (d == 0) throw_insufficient("configuration space has no hyperparameters");
  if (x.size() != n * d || y.size() != n || columns.size() != d) {
    throw_invalid("matrix", "fit_forest: inconsistent matrix shape");
  }
  if (params.n_trees == 0) throw_invalid("n_trees", "n_trees must be >= 1");
  if (params.min_samples_leaf == 0) throw_invalid("min_samples_leaf", "min_samples_leaf must be >= 1");
  if (!(params.max_features_ratio > 0.0 && params.max_features_ratio <= 1.0)) {
    throw_invalid("max_features_ratio", "max_features_ratio must be in (0, 1]");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw_invalid("y", "fit_forest: non-finite response");
  }
  std::vector<Tree> trees;
  trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    Rng rng(mix_seed(params.seed, t));
    std::vector<std::size_t> sample(n);
    if (params.bootstrap) {
      for (auto& s : sample) s = static_cast<std::size_t>(uniform_index(rng, n));
    } else {
      std::iota(sample.begin(), sample.end(), std::size_t{0});
    }
    TreeBuilder builder(x, d, y, columns, params, rng);
    trees.push_back(builder.build(std::move(sample)));
  }
  return Forest(std::move(trees), encoded_bounds(columns), params.seed);
}

Forest fit_forest(const EncodedMatrix& matrix, const ForestParams& params) {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t n = 0;
  for (std::size_t i = 0; i < matrix.n; ++i) {
    if (!std::isfinite(matrix.y[i])) continue;
    auto row = matrix.row(i);
    x.insert(x.end(), row.begin(), row.end());
    y.push_back(matrix.y[i]);
    ++n;
  }
  return fit_forest(x, n, matrix.d, y, matrix.columns, params);
}

}  // namespace hpoviz
