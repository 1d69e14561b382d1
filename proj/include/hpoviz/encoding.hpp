#pragma once

#include <span>
#include <string>
#include <vector>

#include "hpoviz/run_model.hpp"

namespace hpoviz {

/// Encoded value of an inactive hyperparameter. Lies outside every active range.
inline constexpr double kInactive = -1.0;

/// Per-column normalization descriptor.
struct Column {
  std::string name;
  HpKind kind = HpKind::Float;
  std::size_t n_choices = 0;  // categorical/ordinal only

  bool categorical() const { return kind == HpKind::Categorical || kind == HpKind::Ordinal; }
};

std::vector<Column> columns_of(const ConfigurationSpace& space);

double encode_value(const Hyperparameter& hp, const HpValue& value);
HpValue decode_value(const Hyperparameter& hp, double encoded);

std::vector<double> encode_config(const ConfigurationSpace& space, const Config& config);
Config decode_config(const ConfigurationSpace& space, std::span<const double> encoded);

/// Activation of column `index` evaluated on an encoded vector.
bool encoded_active(const ConfigurationSpace& space, std::span<const double> encoded,
                    std::size_t index);

/// Sets every column that is inactive under the space's conditions to
/// kInactive. Columns are visited parents-first.
void apply_activation(const ConfigurationSpace& space, std::vector<double>& encoded);

struct EncodedMatrix {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> values;  // row-major n x d
  std::vector<std::string> config_ids;
  std::vector<std::size_t> trial_indices;
  std::vector<Column> columns;
  std::vector<double> y;
  std::string objective;
  BudgetSelector budget;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * d, d}; }
};

/// One row per trial that passes the budget and status filters. y keeps the
/// objective's own sign; absent values are NaN.
EncodedMatrix encode_run(const Run& run, const std::string& objective, const BudgetSelector& budget,
                         std::span<const TrialStatus> statuses = std::span<const TrialStatus>(
                             kAllStatuses, 1));

/// Mixed-space distance in [0, 1]: root-mean-square over columns of per-column
/// discrepancies (absolute difference for numeric columns, mismatch indicator
/// for categorical ones, 1 when exactly one side is inactive).
double config_distance(std::span<const Column> columns, std::span<const double> a,
                       std::span<const double> b);
double config_distance(const ConfigurationSpace& space, std::span<const double> a,
                       std::span<const double> b);

}  // namespace hpoviz
