#include "hpoviz/plugins.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpoviz/budget_analysis.hpp"
#include "hpoviz/encoding.hpp"
#include "hpoviz/errors.hpp"
#include "hpoviz/footprint.hpp"
#include "hpoviz/hp_analysis.hpp"
#include "hpoviz/objective_analysis.hpp"

namespace hpoviz {

std::string_view to_string(Plugin plugin) {
  switch (plugin) {
    case Plugin::Overview: return "overview";
    case Plugin::Configurations: return "configurations";
    case Plugin::Footprint: return "footprint";
    case Plugin::CostOverTime: return "cost_over_time";
    case Plugin::ParetoFront: return "pareto_front";
    case Plugin::ParallelCoordinates: return "parallel_coordinates";
    case Plugin::Pdp: return "pdp";
    case Plugin::Importances: return "importances";
    case Plugin::AblationPath: return "ablation_path";
    case Plugin::BudgetCorrelation: return "budget_correlation";
  }
  return "overview";
}

std::optional<Plugin> parse_plugin(std::string_view id) {
  for (Plugin p : kAllPlugins) {
    if (to_string(p) == id) return p;
  }
  return std::nullopt;
}

namespace {

std::vector<ParamSpec> with_forest(std::vector<ParamSpec> specs) {
  specs.push_back({"n_trees", ParamType::Integer, 16});
  specs.push_back({"max_depth", ParamType::Integer, 64});
  specs.push_back({"min_samples_leaf", ParamType::Integer, 1});
  specs.push_back({"bootstrap", ParamType::Bool, true});
  specs.push_back({"max_features_ratio", ParamType::Number, 5.0 / 6.0});
  specs.push_back({"seed", ParamType::Integer, 0});
  return specs;
}

const ParamSpec kObjective{"objective", ParamType::String, nullptr};
const ParamSpec kBudget{"budget", ParamType::Budget, "highest"};

}  // namespace

const std::vector<ParamSpec>& plugin_params(Plugin plugin) {
  static const std::vector<ParamSpec> overview{};
  static const std::vector<ParamSpec> configurations{{"config_id", ParamType::String, nullptr, true}};
  static const std::vector<ParamSpec> footprint{kObjective,
                                                kBudget,
                                                {"border_cap", ParamType::Integer, 50},
                                                {"n_support", ParamType::Integer, 100},
                                                {"seed", ParamType::Integer, 0}};
  static const std::vector<ParamSpec> cost{kObjective, kBudget, {"x_axis", ParamType::String, "trials"}};
  static const std::vector<ParamSpec> pareto{
      {"objective_a", ParamType::String, nullptr}, {"objective_b", ParamType::String, nullptr}, kBudget};
  static const std::vector<ParamSpec> parallel = with_forest(
      {kObjective, kBudget, {"hps", ParamType::StringList, Json::array()}, {"max_lines", ParamType::Integer, 200}});
  static const std::vector<ParamSpec> pdp = with_forest({kObjective,
                                                         kBudget,
                                                         {"hp", ParamType::String, nullptr, true},
                                                         {"grid_size", ParamType::Integer, 20},
                                                         {"n_samples", ParamType::Integer, 50}});
  static const std::vector<ParamSpec> importances = with_forest(
      {kObjective, kBudget, {"method", ParamType::String, "fanova"}, {"grid_size", ParamType::Integer, 20}});
  static const std::vector<ParamSpec> ablation = with_forest({kObjective, kBudget});
  static const std::vector<ParamSpec> budget_corr{kObjective};
  switch (plugin) {
    case Plugin::Overview: return overview;
    case Plugin::Configurations: return configurations;
    case Plugin::Footprint: return footprint;
    case Plugin::CostOverTime: return cost;
    case Plugin::ParetoFront: return pareto;
    case Plugin::ParallelCoordinates: return parallel;
    case Plugin::Pdp: return pdp;
    case Plugin::Importances: return importances;
    case Plugin::AblationPath: return ablation;
    case Plugin::BudgetCorrelation: return budget_corr;
  }
  return overview;
}

std::string valid_param_list(Plugin plugin) {
  std::string out;
  for (const auto& spec : plugin_params(plugin)) {
    if (!out.empty()) out += ", ";
    out += spec.name;
  }
  return out.empty() ? "(none)" : out;
}

bool accepts_groups(Plugin plugin) {
  return plugin == Plugin::CostOverTime || plugin == Plugin::ParetoFront;
}

namespace {

Json coerce_param(const ParamSpec& spec, const Json& v) {
  auto bad = [&](const char* what) -> Json {
    throw_invalid(spec.name, "parameter '" + spec.name + "' must be " + what);
  };
  switch (spec.type) {
    case ParamType::String:
      return v.is_string() ? v : bad("a string");
    case ParamType::Number:
      return v.is_number() && std::isfinite(v.get<double>()) ? Json(v.get<double>()) : bad("a number");
    case ParamType::Integer:
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return Json(v.get<std::int64_t>());
      if (v.is_number_float()) {
        double d = v.get<double>();
        if (d >= 0.0 && std::floor(d) == d && d < 9e15) return Json(static_cast<std::int64_t>(d));
      }
      return bad("a non-negative integer");
    case ParamType::Bool:
      return v.is_boolean() ? v : bad("a boolean");
    case ParamType::Budget:
      if (v.is_number()) return Json(v.get<double>());
      if (v.is_string() && v.get<std::string>() == "highest") return v;
      return bad("a budget value or \"highest\"");
    case ParamType::StringList:
      if (!v.is_array()) return bad("a list of strings");
      for (const auto& item : v) {
        if (!item.is_string()) return bad("a list of strings");
      }
      return v;
  }
  return v;
}

void require_objective(std::span<const RunPtr> runs, const Json& params, const char* field) {
  const std::string name = params.at(field).get<std::string>();
  for (const auto& r : runs) {
    if (!r->objective_index(name)) throw_invalid(field, "unknown objective '" + name + "' in run '" + r->name + "'");
  }
}

BudgetSelector budget_of(const Json& params) {
  const Json& b = params.at("budget");
  if (b.is_number()) return BudgetSelector::at(b.get<double>());
  return BudgetSelector::highest();
}

ForestParams forest_of(const Json& p) {
  ForestParams f;
  f.n_trees = p.at("n_trees").get<std::size_t>();
  f.max_depth = p.at("max_depth").get<std::size_t>();
  f.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
  f.bootstrap = p.at("bootstrap").get<bool>();
  f.max_features_ratio = p.at("max_features_ratio").get<double>();
  f.seed = p.at("seed").get<std::uint64_t>();
  return f;
}

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json config_json(const Config& cfg) {
  Json out = Json::object();
  for (const auto& [k, v] : cfg) out[k] = to_json(v);
  return out;
}

Json space_summary(const ConfigurationSpace& space) {
  Json list = Json::array();
  for (const auto& hp : space.hyperparameters) {
    Json item{{"name", hp.name}, {"type", to_string(hp.kind)}, {"default", to_json(hp.default_value)}};
    if (hp.is_numeric()) {
      item["lower"] = hp.lower;
      item["upper"] = hp.upper;
      item["log"] = hp.log_scale;
    }
    if (hp.has_choices()) item["choices"] = hp.choices;
    if (hp.condition) {
      Json values = Json::array();
      for (const auto& v : hp.condition->active_when) values.push_back(to_json(v));
      item["condition"] = {{"parent", hp.condition->parent}, {"values", values}};
    } else {
      item["condition"] = nullptr;
    }
    list.push_back(std::move(item));
  }
  return list;
}

Json objectives_json(const Run& run) {
  Json list = Json::array();
  for (const auto& o : run.objectives) {
    list.push_back({{"name", o.name},
                    {"direction", o.direction == Direction::Minimize ? "min" : "max"},
                    {"lower", o.bounds ? Json(o.bounds->first) : Json(nullptr)},
                    {"upper", o.bounds ? Json(o.bounds->second) : Json(nullptr)}});
  }
  return list;
}

Json counts_json(const std::map<TrialStatus, std::size_t>& counts) {
  Json out = Json::object();
  for (const auto& [s, c] : counts) out[std::string(to_string(s))] = c;
  return out;
}

Json importance_json(const ImportanceReport& report) {
  Json list = Json::array();
  for (const auto& e : report.entries) {
    list.push_back({{"name", e.name}, {"importance", e.importance}, {"spread", e.spread}});
  }
  return {{"method", to_string(report.method)},
          {"objective", report.objective},
          {"budget", report.budget.to_json()},
          {"importances", list}};
}

Json run_one(Plugin plugin, std::span<const RunPtr> runs, const Json& p) {
  const Run& run = *runs.front();
  switch (plugin) {
    case Plugin::Overview:
      return overview_payload(run);
    case Plugin::Configurations:
      return config_detail_payload(run, p.at("config_id").get<std::string>());
    case Plugin::Footprint: {
      auto fp = compute_footprint(run, p.at("objective"), budget_of(p), p.at("border_cap").get<std::size_t>(),
                                  p.at("n_support").get<std::size_t>(), p.at("seed").get<std::uint64_t>());
      Json points = Json::array();
      for (const auto& pt : fp.points) {
        points.push_back({{"x", pt.x},
                          {"y", pt.y},
                          {"kind", to_string(pt.kind)},
                          {"config_id", pt.config_id ? Json(*pt.config_id) : Json(nullptr)},
                          {"value", optional_number(pt.value)}});
      }
      return {{"objective", p.at("objective")}, {"points", points}, {"stress", fp.stress}};
    }
    case Plugin::CostOverTime: {
      XAxis axis = p.at("x_axis") == "time" ? XAxis::Time : XAxis::Trials;
      const std::string objective = p.at("objective");
      Trajectory t;
      if (runs.size() == 1) {
        t = cost_over_time(run, objective, budget_of(p), axis);
      } else {
        auto group = group_runs("group", std::vector<RunPtr>(runs.begin(), runs.end()));
        t = cost_over_time(group, objective, budget_of(p), axis);
      }
      const Objective& obj = run.objective(objective);
      return {{"objective", objective},
              {"direction", obj.direction == Direction::Minimize ? "min" : "max"},
              {"x_axis", to_string(t.x_axis)},
              {"xs", t.xs},
              {"ys", t.ys},
              {"std", t.std ? Json(*t.std) : Json(nullptr)},
              {"incumbent_ids", t.incumbent_ids.empty() ? Json(nullptr) : Json(t.incumbent_ids)},
              {"members", runs.size()}};
    }
    case Plugin::ParetoFront: {
      const std::string a = p.at("objective_a");
      const std::string b = p.at("objective_b");
      ParetoResult res;
      if (runs.size() == 1) {
        res = pareto_front(run, a, b, budget_of(p));
      } else {
        auto group = group_runs("group", std::vector<RunPtr>(runs.begin(), runs.end()));
        res = pareto_front(group, a, b, budget_of(p));
      }
      Json points = Json::array();
      for (const auto& pt : res.points) {
        points.push_back({{"config_id", pt.config_id},
                          {"member", pt.member},
                          {"a", pt.a},
                          {"b", pt.b},
                          {"frontier", pt.frontier}});
      }
      auto dir = [&](const std::string& name) {
        return run.objective(name).direction == Direction::Minimize ? "min" : "max";
      };
      return {{"objective_a", a}, {"objective_b", b}, {"directions", {dir(a), dir(b)}}, {"points", points}};
    }
    case Plugin::ParallelCoordinates: {
      auto hps = p.at("hps").get<std::vector<std::string>>();
      auto data = parallel_coordinates(run, p.at("objective"), budget_of(p), hps,
                                       p.at("max_lines").get<std::size_t>(), forest_of(p));
      Json lines = Json::array();
      for (const auto& l : data.lines) {
        Json values = Json::array();
        for (const auto& v : l.values) values.push_back(v ? to_json(*v) : Json(nullptr));
        lines.push_back({{"config_id", l.config_id}, {"values", values}, {"objective", l.objective}});
      }
      return {{"axes", data.axes}, {"ordered_by_importance", data.ordered_by_importance}, {"lines", lines}};
    }
    case Plugin::Pdp: {
      auto curve = pdp(run, p.at("objective"), budget_of(p), p.at("hp"), forest_of(p),
                       p.at("grid_size").get<std::size_t>(), p.at("n_samples").get<std::size_t>(),
                       p.at("seed").get<std::uint64_t>());
      Json display = Json::array();
      for (const auto& v : curve.display) display.push_back(to_json(v));
      return {{"hp", curve.name}, {"grid", curve.grid}, {"display", display}, {"mean", curve.mean}, {"std", curve.std}};
    }
    case Plugin::Importances: {
      const std::string method = p.at("method");
      if (method == "lpi") {
        return importance_json(
            lpi(run, p.at("objective"), budget_of(p), forest_of(p), p.at("grid_size").get<std::size_t>()));
      }
      return importance_json(fanova(run, p.at("objective"), budget_of(p), forest_of(p)));
    }
    case Plugin::AblationPath: {
      auto path = ablation_path(run, p.at("objective"), budget_of(p), forest_of(p));
      Json steps = Json::array();
      for (const auto& s : path.steps) {
        steps.push_back({{"hp", s.name},
                         {"value", to_json(s.value)},
                         {"prediction", s.prediction},
                         {"improvement", s.improvement},
                         {"implied", s.implied}});
      }
      return {{"origin", config_json(path.origin)},
              {"target", config_json(path.target)},
              {"origin_prediction", path.origin_prediction},
              {"target_prediction", path.target_prediction},
              {"steps", steps}};
    }
    case Plugin::BudgetCorrelation: {
      auto corr = budget_correlation(run, p.at("objective"));
      Json matrix = Json::array();
      for (const auto& row : corr.matrix) {
        Json r = Json::array();
        for (const auto& cell : row) r.push_back({{"rho", optional_number(cell.rho)}, {"n_common", cell.n_common}});
        matrix.push_back(std::move(r));
      }
      return {{"objective", corr.objective}, {"budgets", corr.budgets}, {"matrix", matrix}};
    }
  }
  return nullptr;
}

}  // namespace

Json resolve_params(Plugin plugin, std::span<const RunPtr> runs, const Json& raw) {
  if (runs.empty()) throw_invalid("run_ids", "at least one run is required");
  if (runs.size() > 1 && !accepts_groups(plugin)) {
    throw_invalid("run_ids", "plugin '" + std::string(to_string(plugin)) + "' takes exactly one run");
  }
  if (!raw.is_null() && !raw.is_object()) throw_invalid("params", "params must be an object");
  const auto& specs = plugin_params(plugin);
  Json params = Json::object();
  if (raw.is_object()) {
    for (const auto& [name, value] : raw.items()) {
      auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == name; });
      if (it == specs.end()) {
        throw_invalid(name, "unknown parameter '" + name + "' for plugin '" + std::string(to_string(plugin)) +
                                "'; valid parameters: " + valid_param_list(plugin));
      }
      params[name] = coerce_param(*it, value);
    }
  }
  const Run& first = *runs.front();
  for (const auto& spec : specs) {
    if (params.contains(spec.name)) continue;
    if (spec.required) throw_invalid(spec.name, "missing required parameter '" + spec.name + "'");
    if (!spec.default_value.is_null()) {
      params[spec.name] = spec.default_value;
    } else if (spec.name == "objective" || spec.name == "objective_a") {
      if (first.objectives.empty()) throw_invalid(spec.name, "run declares no objectives");
      params[spec.name] = first.objectives[0].name;
    } else if (spec.name == "objective_b") {
      if (first.objectives.size() < 2) {
        throw_invalid("objective_b", "pareto front needs a second objective; run declares " +
                                         std::to_string(first.objectives.size()));
      }
      params[spec.name] = first.objectives[1].name;
    }
  }

  for (const char* field : {"objective", "objective_a", "objective_b"}) {
    if (params.contains(field)) require_objective(runs, params, field);
  }
  if (params.contains("budget") && params["budget"].is_number()) {
    double b = params["budget"].get<double>();
    for (const auto& r : runs) {
      if (std::find(r->budgets.begin(), r->budgets.end(), b) == r->budgets.end()) {
        throw_invalid("budget", "budget " + params["budget"].dump() + " not in run '" + r->name + "'");
      }
    }
  }
  if (params.contains("x_axis") && params["x_axis"] != "time" && params["x_axis"] != "trials") {
    throw_invalid("x_axis", "x_axis must be \"time\" or \"trials\"");
  }
  if (params.contains("method") && params["method"] != "fanova" && params["method"] != "lpi") {
    throw_invalid("method", "method must be \"fanova\" or \"lpi\"");
  }
  if (params.contains("hp") && !first.space.index_of(params["hp"].get<std::string>())) {
    throw_invalid("hp", "unknown hyperparameter '" + params["hp"].get<std::string>() + "'");
  }
  if (params.contains("hps")) {
    for (const auto& h : params["hps"]) {
      if (!first.space.index_of(h.get<std::string>())) {
        throw_invalid("hps", "unknown hyperparameter '" + h.get<std::string>() + "'");
      }
    }
  }
  if (params.contains("config_id") && !first.configs.count(params["config_id"].get<std::string>())) {
    throw Error(ErrorCode::NotFound, "config '" + params["config_id"].get<std::string>() + "' not found",
                "config_id");
  }
  for (const char* positive : {"n_trees", "min_samples_leaf", "n_samples", "grid_size"}) {
    if (params.contains(positive) && params[positive].get<std::int64_t>() < 1) {
      throw_invalid(positive, std::string("parameter '") + positive + "' must be >= 1");
    }
  }
  if (params.contains("max_features_ratio")) {
    double r = params["max_features_ratio"].get<double>();
    if (!(r > 0.0 && r <= 1.0)) throw_invalid("max_features_ratio", "max_features_ratio must be in (0, 1]");
  }
  return params;
}

std::string run_plugin(Plugin plugin, std::span<const RunPtr> runs, const Json& params) {
  Json hashes = Json::array();
  for (const auto& r : runs) hashes.push_back(r->id);
  Json meta{{"plugin", to_string(plugin)},
            {"params", params},
            {"seed", params.contains("seed") ? params["seed"] : Json(0)},
            {"run_hashes", hashes}};
  Json payload{{"meta", meta}, {"result", run_one(plugin, runs, params)}};
  return payload.dump();
}

Json overview_payload(const Run& run) {
  Json counts = Json::array();
  counts.push_back({{"budget", "all"}, {"counts", counts_json(status_counts(run, BudgetSelector::all()))}});
  for (double b : run.budgets) {
    counts.push_back({{"budget", b}, {"counts", counts_json(status_counts(run, BudgetSelector::at(b)))}});
  }
  Json best = Json::array();
  for (const auto& o : run.objectives) {
    auto inc = incumbent(run, o.name, BudgetSelector::highest());
    best.push_back({{"objective", o.name},
                    {"config_id", inc ? Json(inc->config_id) : Json(nullptr)},
                    {"value", inc ? Json(inc->value) : Json(nullptr)},
                    {"config", inc ? config_json(run.configs.at(inc->config_id)) : Json(nullptr)}});
  }
  std::optional<double> first_start;
  std::optional<double> last_end;
  for (const auto& t : run.trials) {
    first_start = first_start ? std::min(*first_start, t.start_time) : t.start_time;
    if (t.end_time) last_end = last_end ? std::max(*last_end, *t.end_time) : *t.end_time;
  }
  Json meta = Json::object();
  for (const auto& [k, v] : run.meta) meta[k] = v;
  auto opt = run.meta.find("optimizer");
  return {{"name", run.name},
          {"optimizer", opt == run.meta.end() ? Json(nullptr) : Json(opt->second)},
          {"meta", meta},
          {"content_hash", run.id},
          {"space", space_summary(run.space)},
          {"objectives", objectives_json(run)},
          {"budgets", run.budgets},
          {"n_trials", run.trials.size()},
          {"n_configs", run.configs.size()},
          {"status_counts", counts},
          {"best", best},
          {"duration", first_start && last_end ? Json(*last_end - *first_start) : Json(nullptr)}};
}

Json config_detail_payload(const Run& run, const std::string& config_id) {
  auto it = run.configs.find(config_id);
  if (it == run.configs.end()) throw_not_found("config '" + config_id + "'");
  Json trials = Json::array();
  for (const auto& t : run.trials) {
    if (t.config_id != config_id) continue;
    Json objs = Json::object();
    for (const auto& [k, v] : t.objectives) objs[k] = optional_number(v);
    trials.push_back({{"budget", t.budget},
                      {"seed", t.seed ? Json(*t.seed) : Json(nullptr)},
                      {"status", to_string(t.status)},
                      {"objectives", objs},
                      {"start", t.start_time},
                      {"end", optional_number(t.end_time)}});
  }
  Json incumbent_for = Json::array();
  for (const auto& o : run.objectives) {
    auto inc = incumbent(run, o.name, BudgetSelector::highest());
    if (inc && inc->config_id == config_id) incumbent_for.push_back(o.name);
  }
  Json columns = Json::array();
  for (const auto& hp : run.space.hyperparameters) columns.push_back(hp.name);
  return {{"config_id", config_id},
          {"values", config_json(it->second)},
          {"encoded", encode_config(run.space, it->second)},
          {"columns", columns},
          {"trials", trials},
          {"incumbent", !incumbent_for.empty()},
          {"incumbent_for", incumbent_for}};
}

}  // namespace hpoviz
