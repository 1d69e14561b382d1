#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpoviz/run_model.hpp"

namespace hpoviz {

struct CorrelationCell {
  std::optional<double> rho;  // absent when undefined
  std::size_t n_common = 0;
};

struct BudgetCorrelation {
  std::string objective;
  std::vector<double> budgets;
  std::vector<std::vector<CorrelationCell>> matrix;
};

/// 1-based ranks; tied values share the average of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation with average-rank ties. Undefined for fewer than
/// two pairs or when either side has no rank variance.
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

/// Pairwise rank correlation of per-configuration best values between budgets.
BudgetCorrelation budget_correlation(const Run& run, const std::string& objective);

}  // namespace hpoviz
