#include "hpoviz/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hpoviz/errors.hpp"

namespace hpoviz {

std::vector<Column> columns_of(const ConfigurationSpace& space) {
  std::vector<Column> out;
  out.reserve(space.size());
  for (const auto& hp : space.hyperparameters) {
    out.push_back({hp.name, hp.kind, hp.has_choices() ? hp.choices.size() : 0});
  }
  return out;
}

double encode_value(const Hyperparameter& hp, const HpValue& value) {
  if (auto problem = check_value(hp, value)) throw_invalid(hp.name, *problem);
  switch (hp.kind) {
    case HpKind::Float:
    case HpKind::Integer: {
      double v = *as_number(value);
      if (hp.log_scale) {
        double lo = std::log10(hp.lower);
        return std::clamp((std::log10(v) - lo) / (std::log10(hp.upper) - lo), 0.0, 1.0);
      }
      return std::clamp((v - hp.lower) / (hp.upper - hp.lower), 0.0, 1.0);
    }
    case HpKind::Categorical:
    case HpKind::Ordinal: {
      const auto& s = std::get<std::string>(value);
      auto it = std::find(hp.choices.begin(), hp.choices.end(), s);
      return static_cast<double>(it - hp.choices.begin());
    }
    case HpKind::Constant:
      return 0.0;
  }
  return 0.0;
}

HpValue decode_value(const Hyperparameter& hp, double encoded) {
  switch (hp.kind) {
    case HpKind::Float:
    case HpKind::Integer: {
      double u = std::clamp(encoded, 0.0, 1.0);
      double v;
      if (hp.log_scale) {
        double lo = std::log10(hp.lower);
        v = std::pow(10.0, lo + u * (std::log10(hp.upper) - lo));
      } else {
        v = hp.lower + u * (hp.upper - hp.lower);
      }
      v = std::clamp(v, hp.lower, hp.upper);
      if (hp.kind == HpKind::Integer) return HpValue(static_cast<std::int64_t>(std::llround(v)));
      return HpValue(v);
    }
    case HpKind::Categorical:
    case HpKind::Ordinal: {
      auto k = static_cast<long long>(hp.choices.size());
      long long idx = std::clamp<long long>(std::llround(encoded), 0, k - 1);
      return HpValue(hp.choices[static_cast<std::size_t>(idx)]);
    }
    case HpKind::Constant:
      return hp.default_value;
  }
  return hp.default_value;
}

std::vector<double> encode_config(const ConfigurationSpace& space, const Config& config) {
  std::vector<double> out(space.size(), kInactive);
  for (std::size_t j = 0; j < space.size(); ++j) {
    const auto& hp = space.at(j);
    auto it = config.find(hp.name);
    if (it != config.end()) out[j] = encode_value(hp, it->second);
  }
  return out;
}

Config decode_config(const ConfigurationSpace& space, std::span<const double> encoded) {
  Config out;
  for (std::size_t j = 0; j < space.size(); ++j) {
    if (encoded[j] == kInactive) continue;
    out[space.at(j).name] = decode_value(space.at(j), encoded[j]);
  }
  return out;
}

bool encoded_active(const ConfigurationSpace& space, std::span<const double> encoded,
                    std::size_t index) {
  std::size_t current = index;
  for (std::size_t hops = 0; hops <= space.size(); ++hops) {
    const auto& cond = space.at(current).condition;
    if (!cond) return true;
    auto parent = space.index_of(cond->parent);
    if (!parent) return false;
    double pv = encoded[*parent];
    if (pv == kInactive) return false;
    const auto& php = space.at(*parent);
    bool match = false;
    for (const auto& v : cond->active_when) {
      if (check_value(php, v)) continue;
      double ev = encode_value(php, v);
      if (php.has_choices() ? std::llround(pv) == std::llround(ev) : std::abs(pv - ev) <= 1e-12) {
        match = true;
        break;
      }
    }
    if (!match) return false;
    current = *parent;
  }
  return false;
}

void apply_activation(const ConfigurationSpace& space, std::vector<double>& encoded) {
  // Repeat until stable; depth of the condition forest bounds the passes.
  for (std::size_t pass = 0; pass <= space.size(); ++pass) {
    bool changed = false;
    for (std::size_t j = 0; j < space.size(); ++j) {
      if (encoded[j] != kInactive && !encoded_active(space, encoded, j)) {
        encoded[j] = kInactive;
        changed = true;
      }
    }
    if (!changed) break;
  }
}

EncodedMatrix encode_run(const Run& run, const std::string& objective, const BudgetSelector& budget,
                         std::span<const TrialStatus> statuses) {
  run.objective(objective);
  EncodedMatrix m;
  m.d = run.space.size();
  m.columns = columns_of(run.space);
  m.objective = objective;
  m.budget = budget;
  bool success_only = statuses.size() == 1 && statuses[0] == TrialStatus::Success;
  for (std::size_t i : select_trials(run, budget, success_only)) {
    const auto& t = run.trials[i];
    if (std::find(statuses.begin(), statuses.end(), t.status) == statuses.end()) continue;
    auto row = encode_config(run.space, run.configs.at(t.config_id));
    m.values.insert(m.values.end(), row.begin(), row.end());
    m.config_ids.push_back(t.config_id);
    m.trial_indices.push_back(i);
    m.y.push_back(t.objective(objective).value_or(std::numeric_limits<double>::quiet_NaN()));
    ++m.n;
  }
  if (m.n == 0) {
    throw_empty_selection("no trials for objective '" + objective + "' at budget " +
                          budget.to_json().dump());
  }
  return m;
}

double config_distance(std::span<const Column> columns, std::span<const double> a,
                       std::span<const double> b) {
  if (a.size() != b.size() || a.size() != columns.size()) {
    throw_invalid("vector", "config_distance: length mismatch");
  }
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    bool ia = a[j] == kInactive;
    bool ib = b[j] == kInactive;
    double delta;
    if (ia || ib) {
      delta = ia == ib ? 0.0 : 1.0;
    } else if (columns[j].categorical()) {
      delta = a[j] != b[j] ? 1.0 : 0.0;
    } else {
      delta = std::abs(a[j] - b[j]);
    }
    sum += delta * delta;
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

double config_distance(const ConfigurationSpace& space, std::span<const double> a,
                       std::span<const double> b) {
  auto cols = columns_of(space);
  return config_distance(cols, a, b);
}

}  // namespace hpoviz
