#include "hpoviz/hp_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hpoviz/encoding.hpp"
#include "hpoviz/errors.hpp"
#include "hpoviz/random.hpp"

namespace hpoviz {

std::string_view to_string(ImportanceMethod method) {
  return method == ImportanceMethod::Fanova ? "fanova" : "lpi";
}

namespace {

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_variance(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) { return std::sqrt(population_variance(v)); }

// Variances below this fraction of the squared prediction scale are rounding
// noise from averaging identical values.
bool negligible(double variance, double scale) {
  return variance <= 1e-24 * std::max(scale * scale, 1e-300);
}

double abs_max(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<double> finite_rows(const EncodedMatrix& m) {
  std::vector<double> out;
  for (double y : m.y) {
    if (std::isfinite(y)) out.push_back(y);
  }
  return out;
}

// First-order variance shares of one tree, or empty when the tree is constant
// over the box.
std::vector<double> tree_shares(const Tree& tree, std::span<const DimBounds> bounds) {
  const std::size_t d = bounds.size();
  auto boxes = leaf_boxes(tree, bounds);
  struct Leaf {
    const LeafBox* box;
    std::vector<double> frac;
    double volume;
  };
  std::vector<Leaf> leaves;
  double scale = 0.0;
  for (const auto& b : boxes) {
    Leaf leaf{&b, std::vector<double>(d), 1.0};
    for (std::size_t j = 0; j < d; ++j) {
      leaf.frac[j] = b.fraction(j, bounds[j]);
      leaf.volume *= leaf.frac[j];
    }
    if (leaf.volume > 0.0) {
      scale = std::max(scale, std::abs(b.mean));
      leaves.push_back(std::move(leaf));
    }
  }
  double mu = 0.0;
  for (const auto& l : leaves) mu += l.volume * l.box->mean;
  double total = 0.0;
  for (const auto& l : leaves) total += l.volume * (l.box->mean - mu) * (l.box->mean - mu);
  if (leaves.empty() || negligible(total, scale)) return {};

  std::vector<double> shares(d, 0.0);
  for (std::size_t u = 0; u < d; ++u) {
    double vu = 0.0;
    if (bounds[u].categorical) {
      const std::size_t k = bounds[u].n_codes;
      std::vector<double> f(k, 0.0);
      for (const auto& l : leaves) {
        double other = l.volume / l.frac[u];
        for (std::size_t c = 0; c < k; ++c) {
          if (l.box->codes[u][c]) f[c] += l.box->mean * other;
        }
      }
      for (double fc : f) vu += (fc - mu) * (fc - mu) / static_cast<double>(k);
    } else {
      std::vector<double> cuts{bounds[u].lower, bounds[u].upper};
      for (const auto& l : leaves) {
        cuts.push_back(l.box->lo[u]);
        cuts.push_back(l.box->hi[u]);
      }
      std::sort(cuts.begin(), cuts.end());
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
      const std::size_t cells = cuts.size() - 1;
      std::vector<double> diff(cells + 1, 0.0);
      for (const auto& l : leaves) {
        auto first = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), l.box->lo[u]) - cuts.begin());
        auto last = static_cast<std::size_t>(std::lower_bound(cuts.begin(), cuts.end(), l.box->hi[u]) - cuts.begin());
        double add = l.box->mean * l.volume / l.frac[u];
        diff[first] += add;
        diff[last] -= add;
      }
      double width = bounds[u].upper - bounds[u].lower;
      double running = 0.0;
      for (std::size_t c = 0; c < cells; ++c) {
        running += diff[c];
        double w = (cuts[c + 1] - cuts[c]) / width;
        vu += w * (running - mu) * (running - mu);
      }
    }
    shares[u] = vu / total;
  }
  return shares;
}

struct Prepared {
  EncodedMatrix matrix;
  Forest forest;
};

// `standardize` fits on z-scored targets so that shares do not depend on the
// scale of the objective down to the last bit.
Prepared prepare(const Run& run, const std::string& objective, const BudgetSelector& budget,
                 const ForestParams& params, std::size_t min_rows, bool standardize = false) {
  EncodedMatrix matrix = encode_run(run, objective, budget);
  std::size_t usable = finite_rows(matrix).size();
  if (usable < min_rows) {
    throw_insufficient("need at least " + std::to_string(min_rows) + " successful trials, got " +
                       std::to_string(usable));
  }
  if (standardize) {
    auto ys = finite_rows(matrix);
    double mu = mean_of(ys);
    double sd = population_std(ys);
    for (double& y : matrix.y) {
      if (std::isfinite(y)) y = sd > 0.0 ? (y - mu) / sd : 0.0;
    }
  }
  Forest forest = fit_forest(matrix, params);
  return {std::move(matrix), std::move(forest)};
}

std::vector<double> encoded_incumbent(const Run& run, const std::string& objective,
                                      const BudgetSelector& budget) {
  auto inc = incumbent(run, objective, budget);
  if (!inc) throw_empty_selection("no incumbent for objective '" + objective + "'");
  return encode_config(run.space, run.configs.at(inc->config_id));
}

}  // namespace

std::vector<Importance> fanova_importances(const Forest& forest, std::span<const Column> columns) {
  const std::size_t d = forest.dim();
  std::vector<std::vector<double>> per_tree;
  for (const auto& tree : forest.trees()) {
    auto shares = tree_shares(tree, forest.bounds());
    if (!shares.empty()) per_tree.push_back(std::move(shares));
  }
  std::vector<Importance> out;
  for (std::size_t u = 0; u < d; ++u) {
    std::vector<double> s;
    for (const auto& t : per_tree) s.push_back(t[u]);
    out.push_back({columns[u].name, mean_of(s), population_std(s)});
  }
  return out;
}

ImportanceReport fanova(const Run& run, const std::string& objective, const BudgetSelector& budget,
                        const ForestParams& params) {
  auto prepared = prepare(run, objective, budget, params, std::max<std::size_t>(2, run.space.size() + 1), true);
  return {ImportanceMethod::Fanova, objective, budget,
          fanova_importances(prepared.forest, prepared.matrix.columns)};
}

std::vector<double> sweep_grid(const Column& column, std::size_t grid_size) {
  std::vector<double> grid;
  if (column.categorical()) {
    for (std::size_t c = 0; c < column.n_choices; ++c) grid.push_back(static_cast<double>(c));
  } else if (column.kind == HpKind::Constant) {
    grid.push_back(0.0);
  } else if (grid_size <= 1) {
    grid.push_back(0.5);
  } else {
    for (std::size_t i = 0; i < grid_size; ++i) {
      grid.push_back(static_cast<double>(i) / static_cast<double>(grid_size - 1));
    }
  }
  return grid;
}

std::vector<Importance> lpi_importances(const Surrogate& surrogate, std::span<const Column> columns,
                                        std::span<const double> incumbent, std::size_t grid_size) {
  const std::size_t d = columns.size();
  if (incumbent.size() != d || surrogate.dim() != d) throw_invalid("incumbent", "lpi: dimension mismatch");
  std::vector<double> forest_var(d, 0.0);
  std::vector<std::vector<double>> tree_var;  // [tree][dim]
  double scale = 0.0;
  std::vector<double> x(incumbent.begin(), incumbent.end());
  for (std::size_t u = 0; u < d; ++u) {
    if (incumbent[u] == kInactive) continue;
    std::vector<double> means;
    std::vector<std::vector<double>> members;  // [grid][tree]
    for (double g : sweep_grid(columns[u], grid_size)) {
      x[u] = g;
      members.push_back(surrogate.predict_members(x));
      means.push_back(mean_of(members.back()));
      scale = std::max(scale, abs_max(members.back()));
    }
    x[u] = incumbent[u];
    forest_var[u] = population_variance(means);
    if (negligible(forest_var[u], scale)) forest_var[u] = 0.0;
    const std::size_t n_members = members.front().size();
    if (tree_var.size() < n_members) tree_var.resize(n_members, std::vector<double>(d, 0.0));
    for (std::size_t t = 0; t < n_members; ++t) {
      std::vector<double> column;
      for (const auto& m : members) column.push_back(m[t]);
      tree_var[t][u] = population_variance(column);
    }
  }

  double total = std::accumulate(forest_var.begin(), forest_var.end(), 0.0);
  std::vector<Importance> out;
  bool zero = negligible(total, scale);
  std::vector<std::vector<double>> shares;
  for (const auto& tv : tree_var) {
    double t_total = std::accumulate(tv.begin(), tv.end(), 0.0);
    if (negligible(t_total, scale)) continue;
    std::vector<double> s(d);
    for (std::size_t u = 0; u < d; ++u) s[u] = tv[u] / t_total;
    shares.push_back(std::move(s));
  }
  for (std::size_t u = 0; u < d; ++u) {
    std::vector<double> su;
    for (const auto& s : shares) su.push_back(s[u]);
    out.push_back({columns[u].name, zero ? 0.0 : forest_var[u] / total, zero ? 0.0 : population_std(su)});
  }
  return out;
}

ImportanceReport lpi(const Run& run, const std::string& objective, const BudgetSelector& budget,
                     const ForestParams& params, std::size_t grid_size) {
  auto prepared = prepare(run, objective, budget, params, 2);
  auto inc = encoded_incumbent(run, objective, budget);
  return {ImportanceMethod::Lpi, objective, budget,
          lpi_importances(prepared.forest, prepared.matrix.columns, inc, grid_size)};
}

AblationPath ablation_path(const Surrogate& surrogate, const ConfigurationSpace& space,
                           Direction direction, std::span<const double> origin,
                           std::span<const double> target) {
  const std::size_t d = space.size();
  if (origin.size() != d || target.size() != d) throw_invalid("config", "ablation: dimension mismatch");
  Objective obj{"", direction, std::nullopt};

  AblationPath path;
  path.origin = decode_config(space, origin);
  path.target = decode_config(space, target);
  std::vector<double> current(origin.begin(), origin.end());
  double current_pred = surrogate.predict(current).mean;
  path.origin_prediction = current_pred;
  path.target_prediction = surrogate.predict(target).mean;

  for (std::size_t step = 0; step <= d; ++step) {
    std::optional<std::size_t> best;
    std::vector<double> best_vec;
    double best_pred = 0.0;
    std::vector<std::string> best_implied;
    for (std::size_t u = 0; u < d; ++u) {
      if (current[u] == target[u] || current[u] == kInactive || target[u] == kInactive) continue;
      std::vector<double> cand = current;
      cand[u] = target[u];
      std::vector<std::string> implied;
      // Children whose activation flips follow their parent in the same step.
      for (std::size_t pass = 0; pass <= d; ++pass) {
        bool changed = false;
        for (std::size_t j = 0; j < d; ++j) {
          if (j == u) continue;
          bool now_active = encoded_active(space, cand, j);
          bool was_active = cand[j] != kInactive;
          if (now_active == was_active) continue;
          cand[j] = now_active ? target[j] : kInactive;
          implied.push_back(space.at(j).name);
          changed = true;
        }
        if (!changed) break;
      }
      double pred = surrogate.predict(cand).mean;
      if (!best || obj.better(pred, best_pred)) {
        best = u;
        best_vec = std::move(cand);
        best_pred = pred;
        best_implied = std::move(implied);
      }
    }
    if (!best) break;
    double improvement = direction == Direction::Minimize ? current_pred - best_pred : best_pred - current_pred;
    path.steps.push_back({space.at(*best).name, decode_value(space.at(*best), target[*best]), best_pred,
                          improvement, std::move(best_implied)});
    current = std::move(best_vec);
    current_pred = best_pred;
  }
  path.final_encoding = current;
  return path;
}

AblationPath ablation_path(const Run& run, const std::string& objective, const BudgetSelector& budget,
                           const ForestParams& params) {
  auto inc = encoded_incumbent(run, objective, budget);
  auto origin = encode_config(run.space, default_config(run.space));
  auto prepared = prepare(run, objective, budget, params, 2);
  return ablation_path(prepared.forest, run.space, run.objective(objective).direction, origin, inc);
}

PdpCurve partial_dependence(const Surrogate& surrogate, const ConfigurationSpace& space,
                            std::size_t column, std::size_t grid_size, std::size_t n_samples,
                            std::uint64_t seed) {
  const std::size_t d = space.size();
  if (column >= d) throw_invalid("hp", "pdp: column out of range");
  if (n_samples == 0) throw_invalid("n_samples", "n_samples must be >= 1");
  auto columns = columns_of(space);

  Rng rng(mix_seed(seed, 0x504450));
  std::vector<std::vector<double>> samples(n_samples, std::vector<double>(d, 0.0));
  for (auto& s : samples) {
    for (std::size_t j = 0; j < d; ++j) {
      if (columns[j].categorical()) {
        s[j] = static_cast<double>(uniform_index(rng, columns[j].n_choices));
      } else if (columns[j].kind == HpKind::Constant) {
        s[j] = 0.0;
      } else {
        s[j] = uniform01(rng);
      }
    }
  }

  PdpCurve curve;
  curve.name = space.at(column).name;
  curve.grid = sweep_grid(columns[column], grid_size);
  for (double g : curve.grid) {
    double mean_acc = 0.0;
    double std_acc = 0.0;
    for (auto& s : samples) {
      double saved = s[column];
      s[column] = g;
      Prediction p = surrogate.predict(s);
      s[column] = saved;
      mean_acc += p.mean;
      std_acc += std::sqrt(std::max(0.0, p.variance));
    }
    curve.display.push_back(decode_value(space.at(column), g));
    curve.mean.push_back(mean_acc / static_cast<double>(n_samples));
    curve.std.push_back(std_acc / static_cast<double>(n_samples));
  }
  return curve;
}

PdpCurve pdp(const Run& run, const std::string& objective, const BudgetSelector& budget,
             const std::string& hp, const ForestParams& params, std::size_t grid_size,
             std::size_t n_samples, std::uint64_t seed) {
  auto column = run.space.index_of(hp);
  if (!column) throw_invalid("hp", "unknown hyperparameter '" + hp + "'");
  auto prepared = prepare(run, objective, budget, params, 2);
  return partial_dependence(prepared.forest, run.space, *column, grid_size, n_samples, seed);
}

ParallelCoordsData parallel_coordinates(const Run& run, const std::string& objective,
                                        const BudgetSelector& budget,
                                        const std::vector<std::string>& hps, std::size_t max_lines,
                                        const ForestParams& params) {
  const Objective& obj = run.objective(objective);
  std::vector<std::size_t> selected;
  if (hps.empty()) {
    selected.resize(run.space.size());
    std::iota(selected.begin(), selected.end(), std::size_t{0});
  } else {
    for (const auto& name : hps) {
      auto idx = run.space.index_of(name);
      if (!idx) throw_invalid("hps", "unknown hyperparameter '" + name + "'");
      if (std::find(selected.begin(), selected.end(), *idx) == selected.end()) selected.push_back(*idx);
    }
  }

  auto values = best_values(run, objective, budget);
  if (values.empty()) {
    throw_empty_selection("no successful trials for objective '" + objective + "' at budget " +
                          budget.to_json().dump());
  }

  ParallelCoordsData out;
  try {
    auto report = fanova(run, objective, budget, params);
    std::stable_sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
      return report.entries[a].importance > report.entries[b].importance;
    });
    out.ordered_by_importance = true;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientData) throw;
  }

  std::vector<std::pair<std::string, double>> ranked(values.begin(), values.end());
  std::stable_sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    return obj.better(a.second, b.second);
  });
  if (ranked.size() > max_lines) ranked.resize(max_lines);

  for (std::size_t j : selected) out.axes.push_back(run.space.at(j).name);
  out.axes.push_back(objective);
  for (const auto& [id, v] : ranked) {
    const Config& cfg = run.configs.at(id);
    ParallelLine line{id, {}, v};
    for (std::size_t j : selected) {
      auto it = cfg.find(run.space.at(j).name);
      line.values.push_back(it == cfg.end() ? std::nullopt : std::optional<HpValue>(it->second));
    }
    out.lines.push_back(std::move(line));
  }
  return out;
}

}  // namespace hpoviz
