#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpoviz/run_model.hpp"
#include "hpoviz/surrogate.hpp"

namespace hpoviz {

enum class ImportanceMethod { Fanova, Lpi };

std::string_view to_string(ImportanceMethod method);

struct Importance {
  std::string name;
  double importance = 0.0;
  double spread = 0.0;  // std across trees
};

/// Entries follow the order of the configuration space.
struct ImportanceReport {
  ImportanceMethod method = ImportanceMethod::Fanova;
  std::string objective;
  BudgetSelector budget;
  std::vector<Importance> entries;
};

/// First-order fANOVA shares of a fitted forest. Per tree, the variance of the
/// prediction over the uniform encoded box is decomposed exactly from the leaf
/// boxes; importance is the mean share over trees with non-zero variance.
std::vector<Importance> fanova_importances(const Forest& forest, std::span<const Column> columns);

ImportanceReport fanova(const Run& run, const std::string& objective, const BudgetSelector& budget,
                        const ForestParams& params);

/// Grid of encoded values swept for one column: all codes for categorical
/// columns, the single value 0 for constants, `grid_size` evenly spaced points
/// over [0, 1] otherwise.
std::vector<double> sweep_grid(const Column& column, std::size_t grid_size);

std::vector<Importance> lpi_importances(const Surrogate& surrogate, std::span<const Column> columns,
                                        std::span<const double> incumbent, std::size_t grid_size);

ImportanceReport lpi(const Run& run, const std::string& objective, const BudgetSelector& budget,
                     const ForestParams& params, std::size_t grid_size);

struct AblationStep {
  std::string name;
  HpValue value;
  double prediction = 0.0;
  double improvement = 0.0;          // positive when the step helps
  std::vector<std::string> implied;  // children whose activation flipped
};

struct AblationPath {
  Config origin;
  Config target;
  double origin_prediction = 0.0;
  double target_prediction = 0.0;
  std::vector<AblationStep> steps;
  std::vector<double> final_encoding;
};

/// Greedy path from `origin` to `target` in encoded space, switching one
/// hyperparameter per step to the value that gives the best prediction.
AblationPath ablation_path(const Surrogate& surrogate, const ConfigurationSpace& space,
                           Direction direction, std::span<const double> origin,
                           std::span<const double> target);

AblationPath ablation_path(const Run& run, const std::string& objective, const BudgetSelector& budget,
                           const ForestParams& params);

struct PdpCurve {
  std::string name;
  std::vector<double> grid;      // encoded
  std::vector<HpValue> display;  // decoded grid values
  std::vector<double> mean;
  std::vector<double> std;
};

PdpCurve partial_dependence(const Surrogate& surrogate, const ConfigurationSpace& space,
                            std::size_t column, std::size_t grid_size, std::size_t n_samples,
                            std::uint64_t seed);

PdpCurve pdp(const Run& run, const std::string& objective, const BudgetSelector& budget,
             const std::string& hp, const ForestParams& params, std::size_t grid_size,
             std::size_t n_samples, std::uint64_t seed);

struct ParallelLine {
  std::string config_id;
  std::vector<std::optional<HpValue>> values;  // per hyperparameter axis
  double objective = 0.0;
};

struct ParallelCoordsData {
  std::vector<std::string> axes;  // hyperparameters, then the objective
  bool ordered_by_importance = false;
  std::vector<ParallelLine> lines;
};

/// `hps` empty selects every hyperparameter.
ParallelCoordsData parallel_coordinates(const Run& run, const std::string& objective,
                                        const BudgetSelector& budget,
                                        const std::vector<std::string>& hps, std::size_t max_lines,
                                        const ForestParams& params);

}  // namespace hpoviz
