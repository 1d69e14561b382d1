#pragma once

#include <unistd.h>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hpoviz/converters.hpp"
#include "hpoviz/encoding.hpp"
#include "hpoviz/run_model.hpp"
#include "hpoviz/surrogate.hpp"

namespace testing {

using namespace hpoviz;
namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("hpoviz_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline void append_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  out << text;
}

inline Hyperparameter float_hp(std::string name, double lo = 0.0, double hi = 1.0, bool log = false) {
  Hyperparameter hp;
  hp.name = std::move(name);
  hp.kind = HpKind::Float;
  hp.lower = lo;
  hp.upper = hi;
  hp.log_scale = log;
  hp.default_value = log ? std::sqrt(lo * hi) : (lo + hi) / 2.0;
  return hp;
}

inline Hyperparameter int_hp(std::string name, std::int64_t lo, std::int64_t hi) {
  Hyperparameter hp;
  hp.name = std::move(name);
  hp.kind = HpKind::Integer;
  hp.lower = static_cast<double>(lo);
  hp.upper = static_cast<double>(hi);
  hp.default_value = lo;
  return hp;
}

inline Hyperparameter cat_hp(std::string name, std::vector<std::string> choices, HpKind kind = HpKind::Categorical) {
  Hyperparameter hp;
  hp.name = std::move(name);
  hp.kind = kind;
  hp.choices = std::move(choices);
  hp.default_value = hp.choices.front();
  return hp;
}

inline Objective objective(std::string name, Direction dir = Direction::Minimize) {
  return Objective{std::move(name), dir, std::nullopt};
}

/// Space of `d` unit floats named x1..xd.
inline ConfigurationSpace unit_space(std::size_t d) {
  ConfigurationSpace space;
  for (std::size_t j = 0; j < d; ++j) space.hyperparameters.push_back(float_hp("x" + std::to_string(j + 1)));
  return space;
}

inline TrialRecord record(Config cfg, std::map<std::string, std::optional<double>> objs, double budget = 1.0,
                          TrialStatus status = TrialStatus::Success, double start = 0.0,
                          std::optional<double> end = std::nullopt) {
  TrialRecord r;
  r.config = std::move(cfg);
  r.objectives = std::move(objs);
  r.budget = budget;
  r.status = status;
  r.start_time = start;
  r.end_time = end;
  return r;
}

/// Run over a unit space where every trial is a successful evaluation of
/// f(x) at budget 1, with end times 1, 2, ...
template <typename F>
Run synthetic_run(std::size_t d, std::size_t n, std::uint64_t seed, F f, std::string name = "synthetic") {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ConfigurationSpace space = unit_space(d);
  std::vector<TrialRecord> records;
  for (std::size_t i = 0; i < n; ++i) {
    Config cfg;
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = u(rng);
      cfg[space.at(j).name] = x[j];
    }
    records.push_back(record(cfg, {{"loss", f(x)}}, 1.0, TrialStatus::Success, static_cast<double>(i),
                             static_cast<double>(i + 1)));
  }
  return ingest_records(std::move(name), space, {objective("loss")}, {1.0}, records, {{"optimizer", "random"}});
}

/// Randomized valid run mixing every hyperparameter kind, a conditional
/// child, several budgets, absent seeds and end times, and failed trials.
inline Run random_run(std::uint64_t seed, std::size_t n_trials = 30) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto coin = [&](double p) { return u(rng) < p; };

  ConfigurationSpace space;
  space.hyperparameters.push_back(float_hp("lr", 1e-5, 1.0, true));
  space.hyperparameters.push_back(float_hp("momentum", 0.0, 0.99));
  space.hyperparameters.push_back(int_hp("layers", 1, 8));
  space.hyperparameters.push_back(cat_hp("optimizer", {"adam", "sgd", "rmsprop"}));
  space.hyperparameters.push_back(cat_hp("size", {"small", "medium", "large"}, HpKind::Ordinal));
  Hyperparameter beta = float_hp("beta", 0.5, 0.999);
  beta.condition = Condition{"optimizer", {std::string("adam"), std::string("rmsprop")}};
  space.hyperparameters.push_back(beta);
  Hyperparameter nest = cat_hp("nesterov", {"yes", "no"});
  nest.condition = Condition{"optimizer", {std::string("sgd")}};
  space.hyperparameters.push_back(nest);
  Hyperparameter c;
  c.name = "tag";
  c.kind = HpKind::Constant;
  c.default_value = std::string("v1");
  space.hyperparameters.push_back(c);

  std::vector<double> budgets{1.0, 3.0, 9.0};
  std::vector<Objective> objectives{objective("loss"), objective("accuracy", Direction::Maximize)};
  objectives[1].bounds = std::make_pair(0.0, 1.0);

  std::vector<TrialRecord> records;
  std::vector<Config> pool;
  double clock = 0.0;
  for (std::size_t i = 0; i < n_trials; ++i) {
    Config cfg;
    if (!pool.empty() && coin(0.3)) {
      cfg = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
    } else {
      cfg["lr"] = std::pow(10.0, -5.0 + 5.0 * u(rng));
      cfg["momentum"] = 0.99 * u(rng);
      cfg["layers"] = static_cast<std::int64_t>(1 + std::uniform_int_distribution<int>(0, 7)(rng));
      std::string opt = space.at(3).choices[std::uniform_int_distribution<int>(0, 2)(rng)];
      cfg["optimizer"] = opt;
      cfg["size"] = space.at(4).choices[std::uniform_int_distribution<int>(0, 2)(rng)];
      if (opt != "sgd") cfg["beta"] = 0.5 + 0.499 * u(rng);
      if (opt == "sgd") cfg["nesterov"] = coin(0.5) ? std::string("yes") : std::string("no");
      cfg["tag"] = std::string("v1");
      pool.push_back(cfg);
    }
    double r = u(rng);
    TrialStatus status = r < 0.75   ? TrialStatus::Success
                         : r < 0.85 ? TrialStatus::Crashed
                         : r < 0.92 ? TrialStatus::Timeout
                                    : TrialStatus::Running;
    std::map<std::string, std::optional<double>> objs;
    if (status == TrialStatus::Success) {
      objs["loss"] = u(rng);
      objs["accuracy"] = u(rng);
    } else {
      objs["loss"] = coin(0.5) ? std::optional<double>(u(rng)) : std::nullopt;
      objs["accuracy"] = std::nullopt;
    }
    double start = clock;
    clock += 0.5 + u(rng);
    std::optional<double> end;
    if (status != TrialStatus::Running && coin(0.9)) end = clock;
    TrialRecord rec = record(cfg, objs, budgets[std::uniform_int_distribution<int>(0, 2)(rng)], status, start, end);
    if (coin(0.7)) rec.seed = static_cast<std::int64_t>(std::uniform_int_distribution<int>(0, 1000)(rng));
    records.push_back(std::move(rec));
  }
  return ingest_records("random-" + std::to_string(seed), space, objectives, budgets, records,
                        {{"optimizer", "fuzz"}, {"note", "seed " + std::to_string(seed)}});
}

inline RunPtr share(Run run) { return std::make_shared<const Run>(std::move(run)); }

// ---- oracles ----

/// O(n^2) dominance check.
inline std::vector<bool> brute_pareto(const std::vector<std::pair<double, double>>& pts, Direction da, Direction db) {
  auto at_least = [](double x, double y, Direction d) { return d == Direction::Minimize ? x <= y : x >= y; };
  auto strictly = [](double x, double y, Direction d) { return d == Direction::Minimize ? x < y : x > y; };
  std::vector<bool> out(pts.size(), true);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const auto& p = pts[j];
      const auto& q = pts[i];
      if (at_least(p.first, q.first, da) && at_least(p.second, q.second, db) &&
          (strictly(p.first, q.first, da) || strictly(p.second, q.second, db))) {
        out[i] = false;
        break;
      }
    }
  }
  return out;
}

/// Spearman for tie-free data: 1 - 6 sum d^2 / (n (n^2 - 1)).
inline double spearman_no_ties(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t k = 0; k < idx.size(); ++k) r[idx[k]] = static_cast<double>(k + 1);
    return r;
  };
  auto ra = ranks(a);
  auto rb = ranks(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  double n = static_cast<double>(a.size());
  return 1.0 - 6.0 * s / (n * (n * n - 1.0));
}

/// Pearson correlation of explicit average ranks, computed independently.
inline double spearman_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        if (w < v[i]) ++less;
        if (w == v[i]) ++equal;
      }
      r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
  };
  auto ra = ranks(a);
  auto rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= a.size();
  mb /= b.size();
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

/// Random tree of bounded depth over `bounds`; numeric splits at uniform
/// thresholds inside the current cell, categorical splits on random subsets.
inline Tree random_tree(std::mt19937_64& rng, const std::vector<DimBounds>& bounds, int max_depth) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tree tree;
  struct Frame {
    int node;
    int depth;
    std::vector<double> lo, hi;
  };
  tree.nodes.push_back(TreeNode::leaf(0.0));
  std::vector<Frame> stack;
  std::vector<double> lo, hi;
  for (const auto& b : bounds) {
    lo.push_back(b.lower);
    hi.push_back(b.upper);
  }
  stack.push_back({0, 0, lo, hi});
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    if (f.depth >= max_depth || u(rng) < 0.2) {
      tree.nodes[f.node] = TreeNode::leaf(std::round(u(rng) * 100.0) / 100.0);
      continue;
    }
    int dim = static_cast<int>(rng() % bounds.size());
    int left = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode::leaf(0.0));
    tree.nodes.push_back(TreeNode::leaf(0.0));
    Frame l = f, r = f;
    l.node = left;
    r.node = left + 1;
    l.depth = r.depth = f.depth + 1;
    if (bounds[dim].categorical) {
      std::vector<int> codes;
      for (std::size_t c = 0; c < bounds[dim].n_codes; ++c) {
        if (u(rng) < 0.5) codes.push_back(static_cast<int>(c));
      }
      if (codes.empty()) codes.push_back(0);
      tree.nodes[f.node] = TreeNode::categorical_split(dim, codes, left, left + 1);
    } else {
      double t = f.lo[dim] + (f.hi[dim] - f.lo[dim]) * (0.1 + 0.8 * u(rng));
      tree.nodes[f.node] = TreeNode::numeric_split(dim, t, left, left + 1);
      l.hi[dim] = t;
      r.lo[dim] = t;
    }
    stack.push_back(l);
    stack.push_back(r);
  }
  return tree;
}

/// Monte-Carlo marginal: average of tree predictions over uniform draws of the
/// free columns with `dims` pinned to `values`.
inline double mc_marginal(const Tree& tree, const std::vector<DimBounds>& bounds, const std::vector<std::size_t>& dims,
                          const std::vector<double>& values, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(bounds.size());
  double sum = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t j = 0; j < bounds.size(); ++j) {
      if (bounds[j].categorical) {
        x[j] = static_cast<double>(rng() % bounds[j].n_codes);
      } else {
        x[j] = bounds[j].lower + (bounds[j].upper - bounds[j].lower) * u(rng);
      }
    }
    for (std::size_t k = 0; k < dims.size(); ++k) x[dims[k]] = values[k];
    sum += tree.predict(x);
  }
  return sum / static_cast<double>(samples);
}

/// Row-major Euclidean distance matrix of 2-D points.
inline std::vector<double> distance_matrix(const std::vector<std::array<double, 2>>& pts) {
  std::size_t n = pts.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      d[i * n + j] = std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]);
    }
  }
  return d;
}

/// Stub surrogate: y = sum_j w_j x_j, identical across `members` trees.
class LinearStub : public Surrogate {
 public:
  explicit LinearStub(std::vector<double> w, std::size_t members = 4) : w_(std::move(w)), members_(members) {}
  std::size_t dim() const override { return w_.size(); }
  std::vector<double> predict_members(std::span<const double> x) const override {
    double y = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j) y += w_[j] * x[j];
    return std::vector<double>(members_, y);
  }

 private:
  std::vector<double> w_;
  std::size_t members_;
};

/// Trees that each predict a constant.
class ConstantStub : public Surrogate {
 public:
  ConstantStub(std::size_t d, std::vector<double> values) : d_(d), values_(std::move(values)) {}
  std::size_t dim() const override { return d_; }
  std::vector<double> predict_members(std::span<const double>) const override { return values_; }

 private:
  std::size_t d_;
  std::vector<double> values_;
};

}  // namespace testing
