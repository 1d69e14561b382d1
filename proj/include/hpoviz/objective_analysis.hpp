#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpoviz/run_model.hpp"

namespace hpoviz {

enum class XAxis { Time, Trials };

std::string_view to_string(XAxis axis);

/// Incumbent step function. xs strictly increasing; ys monotone in the
/// objective's direction.
struct Trajectory {
  XAxis x_axis = XAxis::Trials;
  std::vector<double> xs;
  std::vector<double> ys;
  std::optional<std::vector<double>> std;   // groups only
  std::vector<std::string> incumbent_ids;   // single runs only
};

Trajectory cost_over_time(const Run& run, const std::string& objective, const BudgetSelector& budget,
                          XAxis axis);

/// Mean and population std across members on the union of member grids.
Trajectory cost_over_time(const RunGroup& group, const std::string& objective,
                          const BudgetSelector& budget, XAxis axis);

struct ParetoPoint {
  std::string config_id;
  std::size_t member = 0;
  double a = 0.0;
  double b = 0.0;
  bool frontier = false;
};

struct ParetoResult {
  std::string objective_a;
  std::string objective_b;
  std::vector<ParetoPoint> points;
};

/// Frontier membership for 2-D points. A point leaves the frontier when some
/// other point is at least as good in both coordinates and strictly better in
/// one; exact duplicates therefore stay together. O(n log n).
std::vector<bool> pareto_flags(std::span<const std::pair<double, double>> points, Direction da,
                               Direction db);

ParetoResult pareto_front(const Run& run, const std::string& objective_a,
                          const std::string& objective_b, const BudgetSelector& budget);
ParetoResult pareto_front(const RunGroup& group, const std::string& objective_a,
                          const std::string& objective_b, const BudgetSelector& budget);

}  // namespace hpoviz
