#include "doctest.h"
#include "hpoviz/errors.hpp"
#include "support.hpp"

using namespace testing;

namespace {

Run two_config_run(Direction dir = Direction::Minimize) {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs{record({{"x1", 0.1}}, {{"loss", 0.5}}, 1.0, TrialStatus::Success, 0, 1),
                                record({{"x1", 0.2}}, {{"loss", 0.3}}, 1.0, TrialStatus::Success, 1, 2)};
  return ingest_records("two", space, {objective("loss", dir)}, {1.0}, recs);
}

}  // namespace

TEST_CASE("validate_run accepts a well-formed run") {
  CHECK(validate_run(two_config_run()).empty());
}

TEST_CASE("validate_run names an unknown config id") {
  Run run = two_config_run();
  run.trials[0].config_id = "c9";
  auto v = validate_run(run);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("c9") != std::string::npos);
}

TEST_CASE("validate_run reports an out-of-bounds value") {
  Run run = two_config_run();
  run.configs.begin()->second["x1"] = 10.0;
  auto v = validate_run(run);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("x1") != std::string::npos);
}

TEST_CASE("validate_run catches structural invariants") {
  Run run = two_config_run();
  SUBCASE("budget not declared") {
    run.trials[0].budget = 2.0;
    CHECK(validate_run(run).size() == 1);
  }
  SUBCASE("end before start") {
    run.trials[0].end_time = -1.0;
    CHECK(validate_run(run).size() == 1);
  }
  SUBCASE("success without objective") {
    run.trials[0].objectives["loss"] = std::nullopt;
    CHECK(validate_run(run).size() == 1);
  }
  SUBCASE("budgets not increasing") {
    run.budgets = {1.0, 1.0};
    CHECK(!validate_run(run).empty());
  }
  SUBCASE("log float with non-positive lower") {
    run.space.hyperparameters[0].log_scale = true;
    CHECK(!validate_run(run).empty());
  }
  SUBCASE("condition cycle") {
    Hyperparameter a = cat_hp("a", {"p", "q"});
    Hyperparameter b = cat_hp("b", {"p", "q"});
    a.condition = Condition{"b", {std::string("p")}};
    b.condition = Condition{"a", {std::string("p")}};
    run.space.hyperparameters.push_back(a);
    run.space.hyperparameters.push_back(b);
    CHECK(!validate_run(run).empty());
  }
  SUBCASE("inactive hyperparameter present") {
    Run r = random_run(3);
    for (auto& [id, cfg] : r.configs) {
      if (cfg.count("nesterov")) {
        cfg["beta"] = 0.7;
        break;
      }
    }
    CHECK(!validate_run(r).empty());
  }
}

TEST_CASE("incumbent follows the objective direction") {
  auto inc = incumbent(two_config_run(), "loss", BudgetSelector::highest());
  REQUIRE(inc);
  CHECK(inc->config_id == "c2");
  CHECK(inc->value == 0.3);
  auto max_inc = incumbent(two_config_run(Direction::Maximize), "loss", BudgetSelector::highest());
  REQUIRE(max_inc);
  CHECK(max_inc->config_id == "c1");
  CHECK(max_inc->value == 0.5);
}

TEST_CASE("incumbent is absent when nothing succeeded") {
  Run run = two_config_run();
  for (auto& t : run.trials) t.status = TrialStatus::Crashed;
  CHECK_FALSE(incumbent(run, "loss", BudgetSelector::highest()));
}

TEST_CASE("incumbent ties break on end time then config id") {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs{record({{"x1", 0.1}}, {{"loss", 0.3}}, 1.0, TrialStatus::Success, 0, 5),
                                record({{"x1", 0.2}}, {{"loss", 0.3}}, 1.0, TrialStatus::Success, 0, 2),
                                record({{"x1", 0.3}}, {{"loss", 0.3}}, 1.0, TrialStatus::Success, 0, 2)};
  Run run = ingest_records("tie", space, {objective("loss")}, {1.0}, recs);
  CHECK(incumbent(run, "loss", BudgetSelector::highest())->config_id == "c2");
}

TEST_CASE("incumbent rejects unknown objective") {
  CHECK_THROWS_AS(incumbent(two_config_run(), "nope", BudgetSelector::highest()), Error);
}

TEST_CASE("incumbent bounds every successful value") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Run run = random_run(seed);
    for (const auto& obj : run.objectives) {
      for (double b : run.budgets) {
        auto inc = incumbent(run, obj.name, BudgetSelector::at(b));
        for (const auto& t : run.trials) {
          if (t.status != TrialStatus::Success || t.budget != b) continue;
          REQUIRE(inc);
          CHECK_FALSE(obj.better(*t.objective(obj.name), inc->value));
        }
      }
    }
  }
}

TEST_CASE("highest budget resolves per configuration") {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs{record({{"x1", 0.1}}, {{"loss", 0.9}}, 1.0),
                                record({{"x1", 0.1}}, {{"loss", 0.4}}, 3.0),
                                record({{"x1", 0.2}}, {{"loss", 0.2}}, 1.0)};
  Run run = ingest_records("mf", space, {objective("loss")}, {1.0, 3.0}, recs);
  auto idx = select_trials(run, BudgetSelector::highest(), true);
  CHECK(idx == std::vector<std::size_t>{1, 2});
  CHECK(incumbent(run, "loss", BudgetSelector::highest())->config_id == "c2");
  CHECK(incumbent(run, "loss", BudgetSelector::at(3.0))->config_id == "c1");
}

TEST_CASE("group_runs checks objective compatibility") {
  auto a = share(two_config_run());
  auto b = share(two_config_run());
  auto g = group_runs("g", {a, b});
  CHECK(g.members.size() == 2);
  CHECK(g.members[0] == a);
  auto c = share(two_config_run(Direction::Maximize));
  try {
    group_runs("g", {a, c});
    FAIL("expected incompatibility");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Incompatible);
  }
  CHECK_THROWS_AS(group_runs("g", {}), Error);
}

TEST_CASE("status_counts partitions trials") {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(record({{"x1", 0.1 * i}}, {{"loss", 0.1}}));
  recs.push_back(record({{"x1", 0.5}}, {{"loss", std::nullopt}}, 1.0, TrialStatus::Crashed));
  Run run = ingest_records("s", space, {objective("loss")}, {1.0, 2.0}, recs);
  auto counts = status_counts(run, BudgetSelector::all());
  CHECK(counts[TrialStatus::Success] == 3);
  CHECK(counts[TrialStatus::Crashed] == 1);
  CHECK(counts[TrialStatus::Timeout] == 0);
  CHECK_THROWS_AS(status_counts(run, BudgetSelector::at(7.0)), Error);

  Run empty = ingest_records("e", space, {objective("loss")}, {1.0}, {});
  for (const auto& [s, c] : status_counts(empty, BudgetSelector::all())) CHECK(c == 0);
}

TEST_CASE("status_counts at a budget counts only that budget") {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs;
  for (int i = 0; i < 9; ++i) recs.push_back(record({{"x1", 0.1 * i}}, {{"loss", 0.1}}, i < 5 ? 1.0 : 2.0));
  Run run = ingest_records("s", space, {objective("loss")}, {1.0, 2.0}, recs);
  std::size_t total = 0;
  for (const auto& [s, c] : status_counts(run, BudgetSelector::at(1.0))) total += c;
  CHECK(total == 5);
  total = 0;
  for (const auto& [s, c] : status_counts(run, BudgetSelector::all())) total += c;
  CHECK(total == 9);
}

TEST_CASE("run id depends on content only") {
  Run a = two_config_run();
  Run b = two_config_run();
  CHECK(a.id == b.id);
  b.trials[0].objectives["loss"] = 0.55;
  CHECK(compute_run_id(b) != a.id);
}
