#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"

namespace hpoviz {

using Json = nlohmann::json;

/// A raw hyperparameter value as written by the optimizer.
using HpValue = std::variant<std::int64_t, double, std::string>;

std::optional<double> as_number(const HpValue& value);
Json to_json(const HpValue& value);
std::string describe(const HpValue& value);

enum class HpKind { Float, Integer, Categorical, Ordinal, Constant };

std::string_view to_string(HpKind kind);
std::optional<HpKind> parse_hp_kind(std::string_view text);

/// Single-parent activation: the child is active iff the parent is active and
/// its value is one of `active_when`.
struct Condition {
  std::string parent;
  std::vector<HpValue> active_when;

  bool operator==(const Condition&) const = default;
};

struct Hyperparameter {
  std::string name;
  HpKind kind = HpKind::Float;
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;
  std::vector<std::string> choices;
  HpValue default_value = 0.0;
  std::optional<Condition> condition;

  bool is_numeric() const { return kind == HpKind::Float || kind == HpKind::Integer; }
  bool has_choices() const { return kind == HpKind::Categorical || kind == HpKind::Ordinal; }

  bool operator==(const Hyperparameter&) const = default;
};

struct ConfigurationSpace {
  std::vector<Hyperparameter> hyperparameters;

  std::size_t size() const { return hyperparameters.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  const Hyperparameter& at(std::size_t i) const { return hyperparameters.at(i); }

  bool operator==(const ConfigurationSpace&) const = default;
};

/// Hyperparameter name -> value. Inactive hyperparameters are absent.
using Config = std::map<std::string, HpValue>;

/// Default configuration of the space with conditions applied.
Config default_config(const ConfigurationSpace& space);

bool is_active(const ConfigurationSpace& space, const Config& config, std::size_t index);

/// Coerces a value to the canonical alternative for the hyperparameter kind
/// (double for Float, int64 for Integer, string for choices). Returns nullopt
/// when the value has the wrong type.
std::optional<HpValue> coerce_value(const Hyperparameter& hp, const HpValue& value);

/// Human readable reason the value is not admissible, or nullopt.
std::optional<std::string> check_value(const Hyperparameter& hp, const HpValue& value);

enum class Direction { Minimize, Maximize };

struct Objective {
  std::string name;
  Direction direction = Direction::Minimize;
  std::optional<std::pair<double, double>> bounds;

  /// True when `a` is strictly better than `b`.
  bool better(double a, double b) const {
    return direction == Direction::Minimize ? a < b : a > b;
  }

  bool operator==(const Objective&) const = default;
};

enum class TrialStatus { Success, Timeout, MemoryOut, Crashed, Running, NotEvaluated };

inline constexpr TrialStatus kAllStatuses[] = {
    TrialStatus::Success, TrialStatus::Timeout,  TrialStatus::MemoryOut,
    TrialStatus::Crashed, TrialStatus::Running, TrialStatus::NotEvaluated};

std::string_view to_string(TrialStatus status);
std::optional<TrialStatus> parse_status(std::string_view text);

struct Trial {
  std::string config_id;
  double budget = 0.0;
  std::optional<std::int64_t> seed;
  std::map<std::string, std::optional<double>> objectives;
  TrialStatus status = TrialStatus::Success;
  double start_time = 0.0;
  std::optional<double> end_time;

  std::optional<double> objective(const std::string& name) const;

  bool operator==(const Trial&) const = default;
};

struct Run {
  /// Content hash over space, objectives, budgets, configs and trials.
  std::string id;
  std::string name;
  std::map<std::string, std::string> meta;
  ConfigurationSpace space;
  std::vector<Objective> objectives;
  std::vector<double> budgets;
  std::map<std::string, Config> configs;
  std::vector<Trial> trials;

  const Objective& objective(const std::string& name) const;
  std::optional<std::size_t> objective_index(const std::string& name) const;

  bool operator==(const Run&) const = default;
};

using RunPtr = std::shared_ptr<const Run>;

std::string compute_run_id(const Run& run);

/// Sets `run.id` from its content and returns the run.
Run seal(Run run);

std::vector<std::string> validate_run(const Run& run);

/// Budget filter. `Highest` resolves per configuration to the largest budget at
/// which it has a successful trial.
struct BudgetSelector {
  enum class Mode { Value, Highest, All };
  Mode mode = Mode::Highest;
  double value = 0.0;

  static BudgetSelector at(double budget) { return {Mode::Value, budget}; }
  static BudgetSelector highest() { return {Mode::Highest, 0.0}; }
  static BudgetSelector all() { return {Mode::All, 0.0}; }

  Json to_json() const;
  bool operator==(const BudgetSelector&) const = default;
};

/// Indices of trials passing the budget filter, in run order. With
/// `success_only` only successful trials are returned.
std::vector<std::size_t> select_trials(const Run& run, const BudgetSelector& budget,
                                       bool success_only);

struct Incumbent {
  std::string config_id;
  double value = 0.0;
  std::size_t member = 0;  // index into the group, 0 for a plain run
};

std::optional<Incumbent> incumbent(const Run& run, const std::string& objective,
                                   const BudgetSelector& budget);

/// Best value per configuration at the budget among successful trials.
std::map<std::string, double> best_values(const Run& run, const std::string& objective,
                                          const BudgetSelector& budget);

struct RunGroup {
  std::string name;
  std::vector<RunPtr> members;
};

RunGroup group_runs(std::string name, std::vector<RunPtr> runs);

std::optional<Incumbent> incumbent(const RunGroup& group, const std::string& objective,
                                   const BudgetSelector& budget);

std::map<TrialStatus, std::size_t> status_counts(const Run& run, const BudgetSelector& budget);

}  // namespace hpoviz
