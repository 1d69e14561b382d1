#include "doctest.h"
#include "hpoviz/budget_analysis.hpp"
#include "hpoviz/errors.hpp"
#include "support.hpp"

using namespace testing;

namespace {

Run two_budget_run(const std::vector<double>& low, const std::vector<double>& high) {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs;
  for (std::size_t i = 0; i < low.size(); ++i) {
    Config cfg{{"x1", 0.1 * static_cast<double>(i)}};
    recs.push_back(record(cfg, {{"loss", low[i]}}, 1.0));
    recs.push_back(record(cfg, {{"loss", high[i]}}, 4.0));
  }
  return ingest_records("b", space, {objective("loss")}, {1.0, 4.0}, recs);
}

}  // namespace

TEST_CASE("spearman examples") {
  std::vector<double> a{1, 2, 3, 4, 5}, b{1, 2, 3, 5, 4}, r{5, 4, 3, 2, 1};
  CHECK(*spearman(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*spearman(a, r) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(*spearman(a, b) - 0.9) < 1e-9);
  CHECK(std::abs(*spearman(a, b) - spearman_no_ties(a, b)) < 1e-12);
  std::vector<double> flat{2, 2, 2, 2, 2};
  CHECK_FALSE(spearman(a, flat));
  std::vector<double> one{1};
  CHECK_FALSE(spearman(one, one));
}

TEST_CASE("average ranks share ties") {
  std::vector<double> v{10, 20, 20, 5};
  CHECK(average_ranks(v) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("spearman agrees with the rank-Pearson oracle and is rank invariant") {
  std::mt19937_64 rng(23);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 2 + rng() % 30;
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng() % 8);
      b[i] = static_cast<double>(rng() % 8);
    }
    auto rho = spearman(a, b);
    bool flat_a = std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; });
    bool flat_b = std::all_of(b.begin(), b.end(), [&](double x) { return x == b[0]; });
    if (flat_a || flat_b) {
      CHECK_FALSE(rho);
      continue;
    }
    REQUIRE(rho);
    CHECK(*rho == doctest::Approx(spearman_pearson(a, b)).epsilon(1e-12));
    std::vector<double> ta(n);
    for (std::size_t i = 0; i < n; ++i) ta[i] = std::exp(a[i]) * 3.0 - 1.0;
    CHECK(*spearman(ta, b) == doctest::Approx(*rho).epsilon(1e-12));
    CHECK(*spearman(b, a) == *rho);
  }
}

TEST_CASE("budget correlation on a run") {
  auto ident = budget_correlation(two_budget_run({1, 2, 3, 4, 5}, {1, 2, 3, 4, 5}), "loss");
  REQUIRE(ident.matrix.size() == 2);
  CHECK(std::abs(*ident.matrix[0][1].rho - 1.0) < 1e-9);
  CHECK(ident.matrix[0][1].n_common == 5);
  CHECK(*ident.matrix[0][0].rho == 1.0);

  auto rev = budget_correlation(two_budget_run({1, 2, 3, 4, 5}, {5, 4, 3, 2, 1}), "loss");
  CHECK(std::abs(*rev.matrix[1][0].rho + 1.0) < 1e-9);

  auto hand = budget_correlation(two_budget_run({1, 2, 3, 4, 5}, {1, 2, 3, 5, 4}), "loss");
  CHECK(std::abs(*hand.matrix[0][1].rho - 0.9) < 1e-9);
  CHECK(*hand.matrix[0][1].rho == *hand.matrix[1][0].rho);
}

TEST_CASE("budget correlation with too little overlap is undefined") {
  ConfigurationSpace space = unit_space(1);
  std::vector<TrialRecord> recs{record({{"x1", 0.1}}, {{"loss", 1.0}}, 1.0),
                                record({{"x1", 0.1}}, {{"loss", 2.0}}, 4.0),
                                record({{"x1", 0.2}}, {{"loss", 3.0}}, 1.0)};
  Run run = ingest_records("b", space, {objective("loss")}, {1.0, 4.0}, recs);
  auto c = budget_correlation(run, "loss");
  CHECK_FALSE(c.matrix[0][1].rho);
  CHECK(c.matrix[0][1].n_common == 1);
  CHECK(c.matrix[0][0].n_common == 2);
}

TEST_CASE("budget correlation needs two budgets") {
  Run run = two_budget_run({1, 2}, {1, 2});
  run.budgets = {1.0};
  CHECK_THROWS_AS(budget_correlation(run, "loss"), Error);
}
