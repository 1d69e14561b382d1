#include "doctest.h"
#include "hpoviz/errors.hpp"
#include "hpoviz/objective_analysis.hpp"
#include "support.hpp"

using namespace testing;

namespace {

Run loss_sequence(const std::vector<double>& losses, Direction dir = Direction::Minimize) {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    recs.push_back(record({{"x1", 0.01 * static_cast<double>(i)}}, {{"loss", losses[i]}}, 1.0,
                          TrialStatus::Success, static_cast<double>(i), static_cast<double>(i + 1)));
  }
  return ingest_records("seq", space, {objective("loss", dir)}, {1.0}, recs);
}

bool monotone(const std::vector<double>& ys, Direction dir) {
  for (std::size_t i = 1; i < ys.size(); ++i) {
    if (dir == Direction::Minimize ? ys[i] > ys[i - 1] : ys[i] < ys[i - 1]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("trials axis gives the running minimum") {
  auto t = cost_over_time(loss_sequence({0.9, 0.5, 0.7, 0.3}), "loss", BudgetSelector::highest(), XAxis::Trials);
  CHECK(t.ys == std::vector<double>{0.9, 0.5, 0.5, 0.3});
  CHECK(t.xs == std::vector<double>{1, 2, 3, 4});
  CHECK(t.incumbent_ids.size() == 4);
  CHECK_FALSE(t.std.has_value());
}

TEST_CASE("time axis steps at improvements and ends at the last result") {
  auto t = cost_over_time(loss_sequence({0.9, 0.5, 0.7, 0.3, 0.8}), "loss", BudgetSelector::highest(), XAxis::Time);
  CHECK(t.xs == std::vector<double>{1, 2, 4, 5});
  CHECK(t.ys == std::vector<double>{0.9, 0.5, 0.3, 0.3});
}

TEST_CASE("single trial yields equal values") {
  auto t = cost_over_time(loss_sequence({0.4}), "loss", BudgetSelector::highest(), XAxis::Time);
  REQUIRE(!t.ys.empty());
  for (double y : t.ys) CHECK(y == 0.4);
}

TEST_CASE("maximize trajectories are non-decreasing") {
  auto t = cost_over_time(loss_sequence({0.1, 0.5, 0.2, 0.9}, Direction::Maximize), "loss",
                          BudgetSelector::highest(), XAxis::Trials);
  CHECK(t.ys == std::vector<double>{0.1, 0.5, 0.5, 0.9});
}

TEST_CASE("empty selection is an error") {
  Run run = loss_sequence({0.1});
  for (auto& t : run.trials) t.status = TrialStatus::Crashed;
  try {
    cost_over_time(run, "loss", BudgetSelector::highest(), XAxis::Trials);
    FAIL("expected EmptySelection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySelection);
  }
}

TEST_CASE("group of identical runs has zero spread") {
  auto a = share(loss_sequence({0.9, 0.5, 0.7, 0.3}));
  auto b = share(loss_sequence({0.9, 0.5, 0.7, 0.3}));
  for (XAxis axis : {XAxis::Trials, XAxis::Time}) {
    auto single = cost_over_time(*a, "loss", BudgetSelector::highest(), axis);
    auto g = cost_over_time(group_runs("g", {a, b}), "loss", BudgetSelector::highest(), axis);
    CHECK(g.xs == single.xs);
    CHECK(g.ys == single.ys);
    REQUIRE(g.std);
    for (double s : *g.std) CHECK(s == 0.0);
  }
}

TEST_CASE("group aggregates on the union grid") {
  auto a = share(loss_sequence({1.0, 0.5}));
  auto b = share(loss_sequence({0.8, 0.8, 0.2}));
  auto g = cost_over_time(group_runs("g", {a, b}), "loss", BudgetSelector::highest(), XAxis::Trials);
  CHECK(g.xs == std::vector<double>{1, 2, 3});
  CHECK(g.ys[0] == doctest::Approx(0.9));
  CHECK(g.ys[1] == doctest::Approx(0.65));
  CHECK(g.ys[2] == doctest::Approx(0.35));
  CHECK((*g.std)[0] == doctest::Approx(0.1));
  CHECK((*g.std)[2] == doctest::Approx(0.15));
}

TEST_CASE("trajectories are monotone on random runs") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Run run = random_run(seed, 40);
    for (const auto& obj : run.objectives) {
      for (XAxis axis : {XAxis::Trials, XAxis::Time}) {
        Trajectory t;
        try {
          t = cost_over_time(run, obj.name, BudgetSelector::all(), axis);
        } catch (const Error&) {
          continue;
        }
        CHECK(monotone(t.ys, obj.direction));
        CHECK(t.xs.size() == t.ys.size());
        for (std::size_t i = 1; i < t.xs.size(); ++i) CHECK(t.xs[i] > t.xs[i - 1]);
      }
    }
  }
}

TEST_CASE("pareto examples") {
  std::vector<std::pair<double, double>> dominated{{1, 1}, {2, 2}};
  CHECK(pareto_flags(dominated, Direction::Minimize, Direction::Minimize) == std::vector<bool>{true, false});
  std::vector<std::pair<double, double>> tradeoff{{1, 2}, {2, 1}};
  CHECK(pareto_flags(tradeoff, Direction::Minimize, Direction::Minimize) == std::vector<bool>{true, true});
  std::vector<std::pair<double, double>> dup{{1, 1}, {1, 1}, {1, 2}};
  CHECK(pareto_flags(dup, Direction::Minimize, Direction::Minimize) == std::vector<bool>{true, true, false});
}

TEST_CASE("pareto matches the brute-force oracle") {
  std::mt19937_64 rng(17);
  for (int it = 0; it < 40; ++it) {
    std::size_t n = 1 + rng() % 200;
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid forces ties and duplicates
      pts.emplace_back(static_cast<double>(rng() % 20), static_cast<double>(rng() % 20));
    }
    Direction da = rng() % 2 ? Direction::Minimize : Direction::Maximize;
    Direction db = rng() % 2 ? Direction::Minimize : Direction::Maximize;
    CHECK(pareto_flags(pts, da, db) == brute_pareto(pts, da, db));
  }
}

TEST_CASE("pareto_front on runs") {
  Run run = random_run(4, 60);
  auto res = pareto_front(run, "loss", "accuracy", BudgetSelector::highest());
  REQUIRE(!res.points.empty());
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : res.points) pts.emplace_back(p.a, p.b);
  auto oracle = brute_pareto(pts, Direction::Minimize, Direction::Maximize);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(res.points[i].frontier == oracle[i]);
  CHECK_THROWS_AS(pareto_front(run, "loss", "loss", BudgetSelector::highest()), Error);
}
