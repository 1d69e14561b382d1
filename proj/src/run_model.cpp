#include "hpoviz/run_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>

#include "hpoviz/errors.hpp"

namespace hpoviz {

std::optional<double> as_number(const HpValue& value) {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&value)) return *d;
  return std::nullopt;
}

Json to_json(const HpValue& value) {
  return std::visit([](const auto& v) { return Json(v); }, value);
}

std::string describe(const HpValue& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return to_json(value).dump();
}

std::string_view to_string(HpKind kind) {
  switch (kind) {
    case HpKind::Float: return "float";
    case HpKind::Integer: return "int";
    case HpKind::Categorical: return "categorical";
    case HpKind::Ordinal: return "ordinal";
    case HpKind::Constant: return "constant";
  }
  return "float";
}

std::optional<HpKind> parse_hp_kind(std::string_view text) {
  for (HpKind kind : {HpKind::Float, HpKind::Integer, HpKind::Categorical, HpKind::Ordinal,
                      HpKind::Constant}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::optional<std::size_t> ConfigurationSpace::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < hyperparameters.size(); ++i) {
    if (hyperparameters[i].name == name) return i;
  }
  return std::nullopt;
}

namespace {

bool values_equal(const HpValue& a, const HpValue& b) {
  auto na = as_number(a);
  auto nb = as_number(b);
  if (na && nb) return *na == *nb;
  return a == b;
}

// Hyperparameter indices ordered so that parents precede children. Cyclic or
// dangling conditions are left at the end in declaration order.
std::vector<std::size_t> topological_order(const ConfigurationSpace& space) {
  const std::size_t n = space.size();
  std::vector<std::size_t> order;
  std::vector<char> placed(n, 0);
  bool progress = true;
  while (progress && order.size() < n) {
    progress = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (placed[i]) continue;
      const auto& cond = space.at(i).condition;
      bool ready = !cond;
      if (cond) {
        auto parent = space.index_of(cond->parent);
        ready = parent && *parent != i && placed[*parent];
      }
      if (ready) {
        placed[i] = 1;
        order.push_back(i);
        progress = true;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!placed[i]) order.push_back(i);
  }
  return order;
}

}  // namespace

bool is_active(const ConfigurationSpace& space, const Config& config, std::size_t index) {
  // Walk up the parent chain; bounded by the space size to survive cycles.
  std::size_t current = index;
  for (std::size_t hops = 0; hops <= space.size(); ++hops) {
    const auto& cond = space.at(current).condition;
    if (!cond) return true;
    auto parent = space.index_of(cond->parent);
    if (!parent) return false;
    auto it = config.find(cond->parent);
    if (it == config.end()) return false;
    bool match = std::any_of(cond->active_when.begin(), cond->active_when.end(),
                             [&](const HpValue& v) { return values_equal(v, it->second); });
    if (!match) return false;
    current = *parent;
  }
  return false;
}

Config default_config(const ConfigurationSpace& space) {
  Config config;
  for (std::size_t i : topological_order(space)) {
    const auto& hp = space.at(i);
    if (is_active(space, config, i)) config[hp.name] = hp.default_value;
  }
  return config;
}

std::optional<HpValue> coerce_value(const Hyperparameter& hp, const HpValue& value) {
  switch (hp.kind) {
    case HpKind::Float:
      if (auto n = as_number(value)) return HpValue(*n);
      return std::nullopt;
    case HpKind::Integer: {
      if (std::holds_alternative<std::int64_t>(value)) return value;
      auto n = as_number(value);
      if (n && std::isfinite(*n) && std::floor(*n) == *n &&
          std::abs(*n) < 9.0e15) {
        return HpValue(static_cast<std::int64_t>(*n));
      }
      return std::nullopt;
    }
    case HpKind::Categorical:
    case HpKind::Ordinal:
      if (std::holds_alternative<std::string>(value)) return value;
      return std::nullopt;
    case HpKind::Constant:
      if (values_equal(value, hp.default_value)) return hp.default_value;
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<std::string> check_value(const Hyperparameter& hp, const HpValue& value) {
  auto coerced = coerce_value(hp, value);
  if (!coerced) {
    return "value " + describe(value) + " has wrong type for " + std::string(to_string(hp.kind)) +
           " hyperparameter '" + hp.name + "'";
  }
  if (hp.is_numeric()) {
    double v = *as_number(*coerced);
    if (!std::isfinite(v) || v < hp.lower || v > hp.upper) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "value %.17g outside bounds [%.17g, %.17g]", v, hp.lower,
                    hp.upper);
      return std::string(buf) + " of hyperparameter '" + hp.name + "'";
    }
  } else if (hp.has_choices()) {
    const auto& s = std::get<std::string>(*coerced);
    if (std::find(hp.choices.begin(), hp.choices.end(), s) == hp.choices.end()) {
      return "value '" + s + "' not among choices of hyperparameter '" + hp.name + "'";
    }
  }
  return std::nullopt;
}

std::string_view to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::Success: return "success";
    case TrialStatus::Timeout: return "timeout";
    case TrialStatus::MemoryOut: return "memoryout";
    case TrialStatus::Crashed: return "crashed";
    case TrialStatus::Running: return "running";
    case TrialStatus::NotEvaluated: return "not_evaluated";
  }
  return "success";
}

std::optional<TrialStatus> parse_status(std::string_view text) {
  for (TrialStatus s : kAllStatuses) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::optional<double> Trial::objective(const std::string& name) const {
  auto it = objectives.find(name);
  if (it == objectives.end()) return std::nullopt;
  return it->second;
}

const Objective& Run::objective(const std::string& name) const {
  auto idx = objective_index(name);
  if (!idx) throw_invalid("objective", "unknown objective '" + name + "'");
  return objectives[*idx];
}

std::optional<std::size_t> Run::objective_index(const std::string& name) const {
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    if (objectives[i].name == name) return i;
  }
  return std::nullopt;
}

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json content_json(const Run& run) {
  Json space = Json::array();
  for (const auto& hp : run.space.hyperparameters) {
    Json cond = nullptr;
    if (hp.condition) {
      Json values = Json::array();
      for (const auto& v : hp.condition->active_when) values.push_back(to_json(v));
      cond = {{"parent", hp.condition->parent}, {"values", values}};
    }
    space.push_back({{"name", hp.name},
                     {"type", to_string(hp.kind)},
                     {"lower", hp.lower},
                     {"upper", hp.upper},
                     {"log", hp.log_scale},
                     {"choices", hp.choices},
                     {"default", to_json(hp.default_value)},
                     {"condition", cond}});
  }
  Json objectives = Json::array();
  for (const auto& o : run.objectives) {
    objectives.push_back({{"name", o.name},
                          {"direction", o.direction == Direction::Minimize ? "min" : "max"},
                          {"bounds", o.bounds ? Json::array({o.bounds->first, o.bounds->second})
                                              : Json(nullptr)}});
  }
  Json configs = Json::object();
  for (const auto& [id, cfg] : run.configs) {
    Json c = Json::object();
    for (const auto& [k, v] : cfg) c[k] = to_json(v);
    configs[id] = c;
  }
  Json trials = Json::array();
  for (const auto& t : run.trials) {
    Json objs = Json::object();
    for (const auto& [k, v] : t.objectives) objs[k] = optional_json(v);
    trials.push_back({t.config_id, t.budget, t.seed ? Json(*t.seed) : Json(nullptr), objs,
                      to_string(t.status), t.start_time, optional_json(t.end_time)});
  }
  return {{"space", space},
          {"objectives", objectives},
          {"budgets", run.budgets},
          {"configs", configs},
          {"trials", trials}};
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string compute_run_id(const Run& run) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(content_json(run).dump())));
  return buf;
}

Run seal(Run run) {
  run.id = compute_run_id(run);
  return run;
}

std::vector<std::string> validate_run(const Run& run) {
  std::vector<std::string> out;
  const auto& space = run.space;

  std::set<std::string> names;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& hp = space.at(i);
    const std::string where = "hyperparameter '" + hp.name + "'";
    if (!names.insert(hp.name).second) out.push_back(where + ": duplicate name");
    if (hp.is_numeric()) {
      if (!(hp.lower < hp.upper)) out.push_back(where + ": lower must be < upper");
      if (hp.log_scale && !(hp.lower > 0.0)) out.push_back(where + ": log scale needs lower > 0");
    }
    if (hp.has_choices()) {
      if (hp.choices.empty()) out.push_back(where + ": choices empty");
      std::set<std::string> unique(hp.choices.begin(), hp.choices.end());
      if (unique.size() != hp.choices.size()) out.push_back(where + ": duplicate choices");
    }
    if (hp.kind != HpKind::Constant) {
      if (auto problem = check_value(hp, hp.default_value)) out.push_back(where + " default: " + *problem);
    }
    if (hp.condition) {
      auto parent = space.index_of(hp.condition->parent);
      if (!parent) {
        out.push_back(where + ": condition parent '" + hp.condition->parent + "' does not exist");
      } else if (*parent == i) {
        out.push_back(where + ": condition refers to itself");
      }
    }
  }
  // Cycle check on the single-parent graph.
  for (std::size_t i = 0; i < space.size(); ++i) {
    std::size_t current = i;
    for (std::size_t hops = 0; hops <= space.size(); ++hops) {
      const auto& cond = space.at(current).condition;
      if (!cond) break;
      auto parent = space.index_of(cond->parent);
      if (!parent || *parent == current) break;
      if (*parent == i) {
        out.push_back("hyperparameter '" + space.at(i).name + "': condition cycle");
        break;
      }
      current = *parent;
    }
  }

  std::set<std::string> objective_names;
  for (const auto& o : run.objectives) {
    if (!objective_names.insert(o.name).second) out.push_back("objective '" + o.name + "': duplicate name");
    if (o.bounds && !(o.bounds->first <= o.bounds->second)) {
      out.push_back("objective '" + o.name + "': lower bound exceeds upper bound");
    }
  }

  for (std::size_t i = 0; i < run.budgets.size(); ++i) {
    if (!std::isfinite(run.budgets[i]) || run.budgets[i] < 0.0) {
      out.push_back("budget " + Json(run.budgets[i]).dump() + ": must be finite and >= 0");
    }
    if (i > 0 && !(run.budgets[i - 1] < run.budgets[i])) {
      out.push_back("budgets: not strictly increasing at index " + std::to_string(i));
    }
  }

  for (const auto& [id, cfg] : run.configs) {
    const std::string where = "config '" + id + "'";
    for (const auto& [name, value] : cfg) {
      auto idx = space.index_of(name);
      if (!idx) {
        out.push_back(where + ": unknown hyperparameter '" + name + "'");
        continue;
      }
      if (auto problem = check_value(space.at(*idx), value)) out.push_back(where + ": " + *problem);
    }
    for (std::size_t h = 0; h < space.size(); ++h) {
      const auto& hp = space.at(h);
      bool present = cfg.count(hp.name) > 0;
      bool active = is_active(space, cfg, h);
      if (active && !present) out.push_back(where + ": active hyperparameter '" + hp.name + "' missing");
      if (!active && present) out.push_back(where + ": inactive hyperparameter '" + hp.name + "' present");
    }
  }

  for (std::size_t i = 0; i < run.trials.size(); ++i) {
    const auto& t = run.trials[i];
    const std::string where = "trial " + std::to_string(i) + " (config '" + t.config_id + "')";
    if (!run.configs.count(t.config_id)) {
      out.push_back(where + ": unknown config_id '" + t.config_id + "'");
    }
    if (std::find(run.budgets.begin(), run.budgets.end(), t.budget) == run.budgets.end()) {
      out.push_back(where + ": budget " + Json(t.budget).dump() + " not declared");
    }
    for (const auto& [name, value] : t.objectives) {
      if (!objective_names.count(name)) out.push_back(where + ": unknown objective '" + name + "'");
    }
    if (t.status == TrialStatus::Success) {
      for (const auto& o : run.objectives) {
        auto v = t.objective(o.name);
        if (!v || !std::isfinite(*v)) {
          out.push_back(where + ": successful trial lacks finite value for objective '" + o.name + "'");
        }
      }
    }
    if (!std::isfinite(t.start_time)) out.push_back(where + ": start time not finite");
    if (t.end_time && !(*t.end_time >= t.start_time)) out.push_back(where + ": end before start");
  }
  return out;
}

Json BudgetSelector::to_json() const {
  switch (mode) {
    case Mode::Value: return value;
    case Mode::Highest: return "highest";
    case Mode::All: return "all";
  }
  return nullptr;
}

std::vector<std::size_t> select_trials(const Run& run, const BudgetSelector& budget,
                                       bool success_only) {
  std::vector<std::size_t> out;
  std::map<std::string, double> highest;
  if (budget.mode == BudgetSelector::Mode::Highest) {
    for (const auto& t : run.trials) {
      if (t.status != TrialStatus::Success) continue;
      auto [it, inserted] = highest.emplace(t.config_id, t.budget);
      if (!inserted) it->second = std::max(it->second, t.budget);
    }
  }
  for (std::size_t i = 0; i < run.trials.size(); ++i) {
    const auto& t = run.trials[i];
    if (success_only && t.status != TrialStatus::Success) continue;
    switch (budget.mode) {
      case BudgetSelector::Mode::Value:
        if (t.budget != budget.value) continue;
        break;
      case BudgetSelector::Mode::Highest: {
        auto it = highest.find(t.config_id);
        if (it == highest.end() || it->second != t.budget) continue;
        break;
      }
      case BudgetSelector::Mode::All:
        break;
    }
    out.push_back(i);
  }
  return out;
}

namespace {

struct Candidate {
  const Trial* trial;
  double value;
  std::size_t member;
};

// Earlier end time wins, then lexicographic config id, then member order.
bool tie_break_less(const Candidate& a, const Candidate& b) {
  double ea = a.trial->end_time.value_or(std::numeric_limits<double>::infinity());
  double eb = b.trial->end_time.value_or(std::numeric_limits<double>::infinity());
  if (ea != eb) return ea < eb;
  if (a.trial->config_id != b.trial->config_id) return a.trial->config_id < b.trial->config_id;
  return a.member < b.member;
}

void collect(const Run& run, const std::string& objective, const BudgetSelector& budget,
             std::size_t member, const Objective& obj, std::optional<Candidate>& best) {
  for (std::size_t i : select_trials(run, budget, true)) {
    const auto& t = run.trials[i];
    auto v = t.objective(objective);
    if (!v || !std::isfinite(*v)) continue;
    Candidate c{&t, *v, member};
    if (!best || obj.better(c.value, best->value) ||
        (c.value == best->value && tie_break_less(c, *best))) {
      best = c;
    }
  }
}

}  // namespace

std::optional<Incumbent> incumbent(const Run& run, const std::string& objective,
                                   const BudgetSelector& budget) {
  const Objective& obj = run.objective(objective);
  std::optional<Candidate> best;
  collect(run, objective, budget, 0, obj, best);
  if (!best) return std::nullopt;
  return Incumbent{best->trial->config_id, best->value, 0};
}

std::optional<Incumbent> incumbent(const RunGroup& group, const std::string& objective,
                                   const BudgetSelector& budget) {
  std::optional<Candidate> best;
  for (std::size_t m = 0; m < group.members.size(); ++m) {
    const Run& run = *group.members[m];
    collect(run, objective, budget, m, run.objective(objective), best);
  }
  if (!best) return std::nullopt;
  return Incumbent{best->trial->config_id, best->value, best->member};
}

std::map<std::string, double> best_values(const Run& run, const std::string& objective,
                                          const BudgetSelector& budget) {
  const Objective& obj = run.objective(objective);
  std::map<std::string, double> out;
  for (std::size_t i : select_trials(run, budget, true)) {
    const auto& t = run.trials[i];
    auto v = t.objective(objective);
    if (!v || !std::isfinite(*v)) continue;
    auto [it, inserted] = out.emplace(t.config_id, *v);
    if (!inserted && obj.better(*v, it->second)) it->second = *v;
  }
  return out;
}

RunGroup group_runs(std::string name, std::vector<RunPtr> runs) {
  if (runs.empty()) throw_invalid("run_ids", "a group needs at least one run");
  const Run& first = *runs.front();
  for (std::size_t m = 1; m < runs.size(); ++m) {
    const Run& other = *runs[m];
    std::string mismatch;
    if (other.objectives.size() != first.objectives.size()) {
      mismatch = "objective count " + std::to_string(first.objectives.size()) + " vs " +
                 std::to_string(other.objectives.size());
    } else {
      for (std::size_t i = 0; i < first.objectives.size() && mismatch.empty(); ++i) {
        const auto& a = first.objectives[i];
        const auto& b = other.objectives[i];
        if (a.name != b.name) {
          mismatch = "objective name '" + a.name + "' vs '" + b.name + "'";
        } else if (a.direction != b.direction) {
          mismatch = "direction mismatch for objective '" + a.name + "'";
        }
      }
    }
    if (!mismatch.empty()) {
      throw Error(ErrorCode::Incompatible,
                  "runs '" + first.name + "' and '" + other.name + "' are incompatible: " + mismatch,
                  "run_ids");
    }
  }
  return RunGroup{std::move(name), std::move(runs)};
}

std::map<TrialStatus, std::size_t> status_counts(const Run& run, const BudgetSelector& budget) {
  if (budget.mode == BudgetSelector::Mode::Value &&
      std::find(run.budgets.begin(), run.budgets.end(), budget.value) == run.budgets.end()) {
    throw_invalid("budget", "budget " + Json(budget.value).dump() + " not in run");
  }
  std::map<TrialStatus, std::size_t> counts;
  for (TrialStatus s : kAllStatuses) counts[s] = 0;
  for (const auto& t : run.trials) {
    if (budget.mode == BudgetSelector::Mode::Value && t.budget != budget.value) continue;
    ++counts[t.status];
  }
  return counts;
}

}  // namespace hpoviz
