#include "hpoviz/footprint.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_set>

#include "hpoviz/encoding.hpp"
#include "hpoviz/errors.hpp"
#include "hpoviz/random.hpp"

namespace hpoviz {

std::string_view to_string(PointKind kind) {
  switch (kind) {
    case PointKind::Evaluated: return "evaluated";
    case PointKind::Incumbent: return "incumbent";
    case PointKind::Border: return "border";
    case PointKind::RandomSupport: return "random";
  }
  return "evaluated";
}

namespace {

std::uint64_t space_seed(const ConfigurationSpace& space) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= 0xff;
    h *= 0x100000001b3ULL;
  };
  for (const auto& hp : space.hyperparameters) {
    feed(hp.name);
    feed(to_string(hp.kind));
    for (const auto& c : hp.choices) feed(c);
  }
  return h;
}

std::vector<double> corner_values(const Column& c) {
  if (c.categorical()) {
    std::vector<double> v;
    for (std::size_t k = 0; k < c.n_choices; ++k) v.push_back(static_cast<double>(k));
    return v;
  }
  if (c.kind == HpKind::Constant) return {0.0};
  return {0.0, 1.0};
}

}  // namespace

std::vector<std::vector<double>> border_configs(const ConfigurationSpace& space, std::size_t cap) {
  auto columns = columns_of(space);
  std::vector<std::vector<double>> radix;
  for (const auto& c : columns) radix.push_back(corner_values(c));

  std::vector<std::vector<double>> out;
  if (cap == 0 || space.size() == 0) return out;

  // Total corner count, saturating.
  bool overflow = false;
  std::uint64_t total = 1;
  for (const auto& r : radix) {
    if (total > std::numeric_limits<std::uint64_t>::max() / r.size()) {
      overflow = true;
      break;
    }
    total *= r.size();
  }

  auto decode = [&](std::uint64_t index) {
    std::vector<double> v(radix.size());
    for (std::size_t j = radix.size(); j-- > 0;) {
      v[j] = radix[j][index % radix[j].size()];
      index /= radix[j].size();
    }
    return v;
  };

  Rng rng(mix_seed(space_seed(space), 0xB0D3));
  if (!overflow && total <= cap) {
    for (std::uint64_t i = 0; i < total; ++i) out.push_back(decode(i));
  } else if (!overflow) {
    // Floyd's sampling of `cap` distinct indices, emitted in enumeration order.
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = total - cap; j < total; ++j) {
      std::uint64_t t = uniform_index(rng, j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    for (std::uint64_t i : chosen) out.push_back(decode(i));
  } else {
    std::set<std::vector<double>> chosen;
    while (chosen.size() < cap) {
      std::vector<double> v(radix.size());
      for (std::size_t j = 0; j < radix.size(); ++j) v[j] = radix[j][uniform_index(rng, radix[j].size())];
      chosen.insert(std::move(v));
    }
    out.assign(chosen.begin(), chosen.end());
  }
  for (auto& v : out) apply_activation(space, v);
  return out;
}

double normalized_stress(std::span<const double> distances, std::size_t n,
                         std::span<const std::array<double, 2>> coords) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = distances[i * n + j];
      double dx = coords[i][0] - coords[j][0];
      double dy = coords[i][1] - coords[j][1];
      double e = std::sqrt(dx * dx + dy * dy);
      num += (d - e) * (d - e);
      den += d * d;
    }
  }
  if (den == 0.0) return 0.0;
  return std::sqrt(num / den);
}

namespace {

void check_distances(std::span<const double> dist, std::size_t n) {
  if (dist.size() != n * n) throw_invalid("distances", "distance matrix must be n x n");
  double scale = 0.0;
  for (double v : dist) {
    if (!std::isfinite(v)) throw_invalid("distances", "distance matrix has non-finite entries");
    if (v < 0.0) throw_invalid("distances", "distance matrix has negative entries");
    scale = std::max(scale, v);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i * n + i] != 0.0) throw_invalid("distances", "distance matrix diagonal must be zero");
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(dist[i * n + j] - dist[j * n + i]) > 1e-12 * std::max(scale, 1.0)) {
        throw_invalid("distances", "distance matrix is not symmetric");
      }
    }
  }
}

void center(std::vector<std::array<double, 2>>& coords) {
  if (coords.empty()) return;
  double mx = 0.0;
  double my = 0.0;
  for (const auto& p : coords) {
    mx += p[0];
    my += p[1];
  }
  mx /= static_cast<double>(coords.size());
  my /= static_cast<double>(coords.size());
  for (auto& p : coords) {
    p[0] -= mx;
    p[1] -= my;
  }
}

std::vector<std::array<double, 2>> classical_scaling(std::span<const double> dist, std::size_t n,
                                                     double& second_ratio) {
  Eigen::MatrixXd b(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) b(i, j) = dist[i * n + j] * dist[i * n + j];
  }
  // Double centering: B = -1/2 J D^2 J.
  Eigen::VectorXd row_mean = b.rowwise().mean();
  double grand = row_mean.mean();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      b(i, j) = -0.5 * (b(i, j) - row_mean(i) - row_mean(j) + grand);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  const auto& values = solver.eigenvalues();  // ascending
  const auto& vectors = solver.eigenvectors();
  std::vector<std::array<double, 2>> coords(n, {0.0, 0.0});
  double l1 = n >= 1 ? std::max(0.0, values(n - 1)) : 0.0;
  double l2 = n >= 2 ? std::max(0.0, values(n - 2)) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    coords[i][0] = n >= 1 ? vectors(i, n - 1) * std::sqrt(l1) : 0.0;
    coords[i][1] = n >= 2 ? vectors(i, n - 2) * std::sqrt(l2) : 0.0;
  }
  second_ratio = l1 > 0.0 ? l2 / l1 : 0.0;
  return coords;
}

double raw_stress(std::span<const double> dist, std::size_t n,
                  const std::vector<std::array<double, 2>>& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dx = x[i][0] - x[j][0];
      double dy = x[i][1] - x[j][1];
      double e = std::sqrt(dx * dx + dy * dy) - dist[i * n + j];
      s += e * e;
    }
  }
  return s;
}

}  // namespace

MdsResult mds_embed(std::span<const double> distances, std::size_t n, std::uint64_t seed) {
  check_distances(distances, n);
  MdsResult result;
  if (n == 0) return result;

  double total_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) total_sq += distances[i * n + j] * distances[i * n + j];
  }
  if (total_sq == 0.0) {
    result.coords.assign(n, {0.0, 0.0});
    result.stress_history.push_back(0.0);
    return result;
  }

  double second_ratio = 0.0;
  auto x = classical_scaling(distances, n, second_ratio);
  double stress = raw_stress(distances, n, x);
  // A collapsed second axis cannot be recovered by the Guttman transform, so
  // give it a small seeded spread when the start is not already exact.
  if (second_ratio < 1e-10 && stress > 1e-12 * total_sq) {
    Rng rng(mix_seed(seed, 0x4D4453));
    double spread = std::sqrt(total_sq / static_cast<double>(n * n)) * 1e-3;
    for (auto& p : x) p[1] += (uniform01(rng) - 0.5) * spread;
    center(x);
    stress = raw_stress(distances, n, x);
  }
  result.stress_history.push_back(std::sqrt(stress / total_sq));

  std::vector<std::array<double, 2>> next(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t iter = 0; iter < 300; ++iter) {
    if (stress <= 1e-30 * total_sq) break;
    // Guttman transform with unit weights: X <- (1/n) B(X) X.
    for (std::size_t i = 0; i < n; ++i) {
      double sx = 0.0;
      double sy = 0.0;
      double diag = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        double dx = x[i][0] - x[j][0];
        double dy = x[i][1] - x[j][1];
        double e = std::sqrt(dx * dx + dy * dy);
        if (e <= 0.0) continue;
        double bij = -distances[i * n + j] / e;
        sx += bij * x[j][0];
        sy += bij * x[j][1];
        diag -= bij;
      }
      next[i][0] = inv_n * (sx + diag * x[i][0]);
      next[i][1] = inv_n * (sy + diag * x[i][1]);
    }
    x.swap(next);
    double updated = raw_stress(distances, n, x);
    ++result.iterations;
    result.stress_history.push_back(std::sqrt(updated / total_sq));
    double relative = stress > 0.0 ? (stress - updated) / stress : 0.0;
    stress = updated;
    if (relative < 1e-6) break;
  }
  center(x);
  result.coords = std::move(x);
  result.stress = normalized_stress(distances, n, result.coords);
  return result;
}

FootprintResult compute_footprint(const Run& run, const std::string& objective,
                                  const BudgetSelector& budget, std::size_t border_cap,
                                  std::size_t n_support, std::uint64_t seed) {
  auto values = best_values(run, objective, budget);
  if (values.empty()) {
    throw_empty_selection("no evaluated configurations for objective '" + objective + "' at budget " +
                          budget.to_json().dump());
  }
  auto inc = incumbent(run, objective, budget);
  auto columns = columns_of(run.space);

  std::vector<std::vector<double>> vectors;
  FootprintResult out;
  for (const auto& [id, v] : values) {
    vectors.push_back(encode_config(run.space, run.configs.at(id)));
    PointKind kind = inc && inc->config_id == id ? PointKind::Incumbent : PointKind::Evaluated;
    out.points.push_back({0.0, 0.0, kind, id, v});
  }
  for (auto& b : border_configs(run.space, border_cap)) {
    vectors.push_back(std::move(b));
    out.points.push_back({0.0, 0.0, PointKind::Border, std::nullopt, std::nullopt});
  }
  Rng rng(mix_seed(seed, 0x5355));
  for (std::size_t s = 0; s < n_support; ++s) {
    std::vector<double> v(columns.size(), 0.0);
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (columns[j].categorical()) {
        v[j] = static_cast<double>(uniform_index(rng, columns[j].n_choices));
      } else if (columns[j].kind != HpKind::Constant) {
        v[j] = uniform01(rng);
      }
    }
    apply_activation(run.space, v);
    vectors.push_back(std::move(v));
    out.points.push_back({0.0, 0.0, PointKind::RandomSupport, std::nullopt, std::nullopt});
  }

  const std::size_t n = vectors.size();
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = config_distance(columns, vectors[i], vectors[j]);
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  }
  auto mds = mds_embed(dist, n, seed);
  for (std::size_t i = 0; i < n; ++i) {
    out.points[i].x = mds.coords[i][0];
    out.points[i].y = mds.coords[i][1];
  }
  out.stress = mds.stress;
  return out;
}

}  // namespace hpoviz
