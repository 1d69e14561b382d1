#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpoviz/run_model.hpp"

namespace hpoviz {

enum class PointKind { Evaluated, Incumbent, Border, RandomSupport };

std::string_view to_string(PointKind kind);

struct FootprintPoint {
  double x = 0.0;
  double y = 0.0;
  PointKind kind = PointKind::Evaluated;
  std::optional<std::string> config_id;
  std::optional<double> value;
};

struct FootprintResult {
  std::vector<FootprintPoint> points;
  double stress = 0.0;
};

/// Corner configurations: every combination of per-column extremes (0/1 for
/// numeric columns, every code for categorical ones), in mixed-radix order
/// with the last column varying fastest. When there are more than `cap`
/// corners a uniform subsample of exactly `cap` distinct corners is drawn with
/// a seed derived from the space.
std::vector<std::vector<double>> border_configs(const ConfigurationSpace& space, std::size_t cap);

struct MdsResult {
  std::vector<std::array<double, 2>> coords;
  double stress = 0.0;                // normalized
  std::vector<double> stress_history; // normalized stress after init and each iteration
  std::size_t iterations = 0;
};

/// Normalized stress sqrt(sum (d_ij - |p_i - p_j|)^2 / sum d_ij^2) over i < j.
double normalized_stress(std::span<const double> distances, std::size_t n,
                         std::span<const std::array<double, 2>> coords);

/// Two-dimensional metric MDS: classical scaling for the start, then SMACOF
/// until the relative stress decrease drops below 1e-6 or 300 iterations.
/// `distances` is a row-major n x n matrix. Output is centered at the origin.
MdsResult mds_embed(std::span<const double> distances, std::size_t n, std::uint64_t seed);

FootprintResult compute_footprint(const Run& run, const std::string& objective,
                                  const BudgetSelector& budget, std::size_t border_cap,
                                  std::size_t n_support, std::uint64_t seed);

}  // namespace hpoviz
