#include "hpoviz/objective_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hpoviz/errors.hpp"

namespace hpoviz {

std::string_view to_string(XAxis axis) { return axis == XAxis::Time ? "time" : "trials"; }

Trajectory cost_over_time(const Run& run, const std::string& objective, const BudgetSelector& budget,
                          XAxis axis) {
  const Objective& obj = run.objective(objective);
  struct Event {
    double x;
    double value;
    const std::string* config_id;
  };
  std::vector<Event> events;
  for (std::size_t i : select_trials(run, budget, true)) {
    const auto& t = run.trials[i];
    auto v = t.objective(objective);
    if (!v || !std::isfinite(*v)) continue;
    if (axis == XAxis::Time) {
      if (!t.end_time) continue;
      events.push_back({*t.end_time, *v, &t.config_id});
    } else {
      events.push_back({static_cast<double>(i + 1), *v, &t.config_id});
    }
  }
  if (events.empty()) {
    throw_empty_selection("no successful trials for objective '" + objective + "' at budget " +
                          budget.to_json().dump());
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.x < b.x; });

  Trajectory out;
  out.x_axis = axis;
  std::optional<double> best;
  const std::string* best_id = nullptr;
  for (std::size_t k = 0; k < events.size();) {
    // Events sharing an x collapse into one point.
    double x = events[k].x;
    bool improved = false;
    for (; k < events.size() && events[k].x == x; ++k) {
      if (!best || obj.better(events[k].value, *best)) {
        best = events[k].value;
        best_id = events[k].config_id;
        improved = true;
      }
    }
    // The trials axis keeps one point per evaluated trial.
    if (improved || axis == XAxis::Trials) {
      out.xs.push_back(x);
      out.ys.push_back(*best);
      out.incumbent_ids.push_back(*best_id);
    }
  }

  double terminal = -std::numeric_limits<double>::infinity();
  if (axis == XAxis::Time) {
    for (const auto& t : run.trials) {
      if (t.end_time) terminal = std::max(terminal, *t.end_time);
    }
  } else {
    terminal = static_cast<double>(run.trials.size());
  }
  if (terminal > out.xs.back()) {
    out.xs.push_back(terminal);
    out.ys.push_back(out.ys.back());
    out.incumbent_ids.push_back(out.incumbent_ids.back());
  }
  return out;
}

Trajectory cost_over_time(const RunGroup& group, const std::string& objective,
                          const BudgetSelector& budget, XAxis axis) {
  if (group.members.empty()) throw_empty_selection("empty run group");
  std::vector<Trajectory> parts;
  for (const auto& member : group.members) {
    try {
      parts.push_back(cost_over_time(*member, objective, budget, axis));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySelection) throw;
    }
  }
  if (parts.empty()) {
    throw_empty_selection("no member of group '" + group.name + "' has successful trials for '" +
                          objective + "'");
  }

  std::vector<double> grid;
  for (const auto& p : parts) grid.insert(grid.end(), p.xs.begin(), p.xs.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  Trajectory out;
  out.x_axis = axis;
  out.std.emplace();
  std::vector<std::size_t> cursor(parts.size(), 0);
  for (double x : grid) {
    double sum = 0.0;
    std::vector<double> vals;
    for (std::size_t m = 0; m < parts.size(); ++m) {
      const auto& p = parts[m];
      while (cursor[m] < p.xs.size() && p.xs[cursor[m]] <= x) ++cursor[m];
      if (cursor[m] == 0) continue;  // no incumbent yet
      double v = p.ys[cursor[m] - 1];
      vals.push_back(v);
      sum += v;
    }
    double mean = sum / static_cast<double>(vals.size());
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    out.xs.push_back(x);
    out.ys.push_back(vals.size() == 1 ? vals.front() : mean);
    out.std->push_back(std::sqrt(ss / static_cast<double>(vals.size())));
  }
  return out;
}

std::vector<bool> pareto_flags(std::span<const std::pair<double, double>> points, Direction da,
                               Direction db) {
  const std::size_t n = points.size();
  // Work in minimization coordinates.
  auto key = [&](std::size_t i) {
    double a = points[i].first;
    double b = points[i].second;
    return std::pair{da == Direction::Minimize ? a : -a, db == Direction::Minimize ? b : -b};
  };
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return key(i) < key(j); });

  std::vector<bool> flags(n, false);
  double best_b_before = std::numeric_limits<double>::infinity();  // over strictly smaller a
  for (std::size_t k = 0; k < n;) {
    double a = key(order[k]).first;
    double group_min_b = key(order[k]).second;  // sorted, so the first is the minimum
    std::size_t end = k;
    while (end < n && key(order[end]).first == a) ++end;
    for (std::size_t q = k; q < end; ++q) {
      double b = key(order[q]).second;
      flags[order[q]] = b == group_min_b && b < best_b_before;
    }
    best_b_before = std::min(best_b_before, group_min_b);
    k = end;
  }
  return flags;
}

namespace {

void collect_pareto(const Run& run, std::size_t member, const std::string& oa, const std::string& ob,
                    const BudgetSelector& budget, ParetoResult& out) {
  auto va = best_values(run, oa, budget);
  auto vb = best_values(run, ob, budget);
  for (const auto& [id, a] : va) {
    auto it = vb.find(id);
    if (it == vb.end()) continue;
    out.points.push_back({id, member, a, it->second, false});
  }
}

ParetoResult finish_pareto(ParetoResult out, const Objective& a, const Objective& b) {
  if (out.points.empty()) {
    throw_empty_selection("no configuration has values for both '" + a.name + "' and '" + b.name + "'");
  }
  std::vector<std::pair<double, double>> pts;
  pts.reserve(out.points.size());
  for (const auto& p : out.points) pts.emplace_back(p.a, p.b);
  auto flags = pareto_flags(pts, a.direction, b.direction);
  for (std::size_t i = 0; i < flags.size(); ++i) out.points[i].frontier = flags[i];
  return out;
}

void check_pair(const std::string& a, const std::string& b) {
  if (a == b) throw_invalid("objective_b", "pareto front needs two distinct objectives, got '" + a + "' twice");
}

}  // namespace

ParetoResult pareto_front(const Run& run, const std::string& objective_a,
                          const std::string& objective_b, const BudgetSelector& budget) {
  check_pair(objective_a, objective_b);
  const Objective& a = run.objective(objective_a);
  const Objective& b = run.objective(objective_b);
  ParetoResult out{objective_a, objective_b, {}};
  collect_pareto(run, 0, objective_a, objective_b, budget, out);
  return finish_pareto(std::move(out), a, b);
}

ParetoResult pareto_front(const RunGroup& group, const std::string& objective_a,
                          const std::string& objective_b, const BudgetSelector& budget) {
  check_pair(objective_a, objective_b);
  if (group.members.empty()) throw_empty_selection("empty run group");
  const Objective& a = group.members.front()->objective(objective_a);
  const Objective& b = group.members.front()->objective(objective_b);
  ParetoResult out{objective_a, objective_b, {}};
  for (std::size_t m = 0; m < group.members.size(); ++m) {
    collect_pareto(*group.members[m], m, objective_a, objective_b, budget, out);
  }
  return finish_pareto(std::move(out), a, b);
}

}  // namespace hpoviz
