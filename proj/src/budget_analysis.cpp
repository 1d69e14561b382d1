#include "hpoviz/budget_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hpoviz/errors.hpp"

namespace hpoviz {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n);
  for (std::size_t k = 0; k < n;) {
    std::size_t end = k;
    while (end < n && values[order[end]] == values[order[k]]) ++end;
    double avg = (static_cast<double>(k + 1) + static_cast<double>(end)) / 2.0;
    for (std::size_t q = k; q < end; ++q) ranks[order[q]] = avg;
    k = end;
  }
  return ranks;
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw_invalid("values", "spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;  // same for both rank vectors
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double da = ra[i] - mean;
    double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

BudgetCorrelation budget_correlation(const Run& run, const std::string& objective) {
  run.objective(objective);
  if (run.budgets.size() < 2) {
    throw_invalid("budget", "budget correlation needs at least 2 budgets, run has " +
                                std::to_string(run.budgets.size()));
  }
  BudgetCorrelation out;
  out.objective = objective;
  out.budgets = run.budgets;
  const std::size_t k = run.budgets.size();
  std::vector<std::map<std::string, double>> per_budget;
  for (double b : run.budgets) per_budget.push_back(best_values(run, objective, BudgetSelector::at(b)));

  out.matrix.assign(k, std::vector<CorrelationCell>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      std::vector<double> a;
      std::vector<double> b;
      for (const auto& [id, v] : per_budget[i]) {
        auto it = per_budget[j].find(id);
        if (it == per_budget[j].end()) continue;
        a.push_back(v);
        b.push_back(it->second);
      }
      CorrelationCell cell{spearman(a, b), a.size()};
      out.matrix[i][j] = cell;
      out.matrix[j][i] = cell;
    }
  }
  return out;
}

}  // namespace hpoviz
