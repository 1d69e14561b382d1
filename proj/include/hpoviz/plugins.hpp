#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpoviz/run_model.hpp"

namespace hpoviz {

enum class Plugin {
  Overview,
  Configurations,
  Footprint,
  CostOverTime,
  ParetoFront,
  ParallelCoordinates,
  Pdp,
  Importances,
  AblationPath,
  BudgetCorrelation,
};

inline constexpr Plugin kAllPlugins[] = {
    Plugin::Overview,     Plugin::Configurations,      Plugin::Footprint,
    Plugin::CostOverTime, Plugin::ParetoFront,         Plugin::ParallelCoordinates,
    Plugin::Pdp,          Plugin::Importances,         Plugin::AblationPath,
    Plugin::BudgetCorrelation};

std::string_view to_string(Plugin plugin);
std::optional<Plugin> parse_plugin(std::string_view id);

enum class ParamType { String, Number, Integer, Bool, Budget, StringList };

struct ParamSpec {
  std::string name;
  ParamType type = ParamType::String;
  Json default_value;  // null: derived from the run (objective names) or required
  bool required = false;
};

const std::vector<ParamSpec>& plugin_params(Plugin plugin);
std::string valid_param_list(Plugin plugin);

/// True for plugins that accept several runs (treated as a group).
bool accepts_groups(Plugin plugin);

/// Validates raw parameters against the plugin schema and the selected runs
/// and fills in defaults. The result is the canonical parameter object used
/// for cache keys and payload metadata. Throws InvalidArgument naming the
/// offending field.
Json resolve_params(Plugin plugin, std::span<const RunPtr> runs, const Json& raw);

/// Runs the plugin synchronously and returns the serialized payload. `params`
/// must come from resolve_params.
std::string run_plugin(Plugin plugin, std::span<const RunPtr> runs, const Json& params);

Json overview_payload(const Run& run);
Json config_detail_payload(const Run& run, const std::string& config_id);

}  // namespace hpoviz
