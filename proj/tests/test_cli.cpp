#include <sys/wait.h>

#include <cstdlib>

#include "doctest.h"
#include "hpoviz/service.hpp"
#include "httplib.h"
#include "service_harness.hpp"
#include "support.hpp"

using namespace testing;

namespace {

struct Outcome {
  int code = -1;
  std::string err;
};

Outcome hpoviz_cli(const std::string& args, const TempDir& scratch) {
  fs::path err = scratch / "stderr.txt";
  std::string cmd = std::string(HPOVIZ_CLI) + " " + args + " > /dev/null 2> " + err.string();
  int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, read_file(err)};
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("convert round trips a tabular run") {
  TempDir dir;
  Run run = random_run(9);
  write_tabular(run, dir / "in");
  auto out = hpoviz_cli("convert --in " + q(dir / "in") + " --out " + q(dir / "out"), dir);
  CHECK(out.code == 0);
  CHECK(load_tabular(dir / "out") == run);
}

TEST_CASE("convert failure codes") {
  TempDir dir;
  fs::create_directories(dir / "empty");
  auto unknown = hpoviz_cli("convert --in " + q(dir / "empty") + " --out " + q(dir / "o1"), dir);
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find((dir / "empty").string()) != std::string::npos);
  CHECK(hpoviz_cli("convert --in " + q(dir / "missing") + " --out " + q(dir / "o2"), dir).code == 2);

  write_tabular(random_run(1), dir / "in");
  fs::create_directories(dir / "full");
  write_file(dir / "full" / "keep.txt", "x");
  CHECK(hpoviz_cli("convert --in " + q(dir / "in") + " --out " + q(dir / "full"), dir).code == 1);
  CHECK(read_file(dir / "full" / "keep.txt") == "x");
  CHECK(hpoviz_cli("convert --in", dir).code == 1);
}

TEST_CASE("analyze matches the service payload byte for byte") {
  TempDir runs, cache, scratch;
  write_tabular(random_run(12, 60), runs / "alpha");
  fs::path out = scratch / "pareto.json";
  auto res = hpoviz_cli("analyze pareto_front --run " + q(runs / "alpha") + " --out " + q(out), scratch);
  REQUIRE(res.code == 0);
  LiveService live(runs.path(), cache.path());
  std::string id = Json::parse(live.client()
                                   .Post("/api/jobs", R"({"plugin":"pareto_front","run_ids":["alpha"]})",
                                         "application/json")
                                   ->body)["job_id"];
  live.await(id);
  CHECK(*live.jobs().status(id).payload == read_file(out));

  fs::path out2 = scratch / "pdp.json";
  REQUIRE(hpoviz_cli("analyze pdp --run " + q(runs / "alpha") + " -p hp=lr -p grid_size=5 -p n_samples=8 --out " +
                         q(out2),
                     scratch)
              .code == 0);
  std::string id2 =
      Json::parse(live.client()
                      .Post("/api/jobs",
                            R"({"plugin":"pdp","run_ids":["alpha"],"params":{"hp":"lr","grid_size":5,"n_samples":8}})",
                            "application/json")
                      ->body)["job_id"];
  live.await(id2);
  CHECK(*live.jobs().status(id2).payload == read_file(out2));
}

TEST_CASE("analyze failure codes") {
  TempDir dir;
  write_tabular(random_run(1), dir / "run");
  auto bad = hpoviz_cli("analyze footprint --run " + q(dir / "run") + " -p colour=red", dir);
  CHECK(bad.code == 1);
  CHECK(bad.err.find("border_cap") != std::string::npos);
  CHECK(hpoviz_cli("analyze nonsense --run " + q(dir / "run"), dir).code == 1);

  ConfigurationSpace space = unit_space(1);
  Run crashy = ingest_records("crashy", space, {objective("loss")}, {1.0},
                              {record({{"x1", 0.3}}, {{"loss", std::nullopt}}, 1.0, TrialStatus::Crashed)});
  write_tabular(crashy, dir / "crashy");
  auto empty = hpoviz_cli("analyze cost_over_time --run " + q(dir / "crashy"), dir);
  CHECK(empty.code == 2);
  CHECK(empty.err.find("EmptySelection") != std::string::npos);
  CHECK(hpoviz_cli("analyze overview --run " + q(dir / "nothing"), dir).code == 2);
}

TEST_CASE("serve exit codes and port logging") {
  TempDir dir;
  fs::create_directories(dir / "runs");
  CHECK(hpoviz_cli("serve --runs-dir " + q(dir / "missing") + " --cache-dir " + q(dir / "c"), dir).code == 1);

  fs::path log = dir / "serve.log";
  std::string cmd = std::string(HPOVIZ_CLI) + " serve --runs-dir " + q(dir / "runs") + " --cache-dir " +
                    q(dir / "c") + " --port 0 2> " + q(log) + " & pid=$!; sleep 1; kill $pid; wait $pid";
  int raw = std::system(cmd.c_str());
  CHECK(WIFEXITED(raw));
  CHECK(WEXITSTATUS(raw) == 0);
  std::string text = read_file(log);
  CHECK(text.find("http://127.0.0.1:") != std::string::npos);
  CHECK(text.find("http://127.0.0.1:0\n") == std::string::npos);

  LiveService live(dir / "runs", dir / "c2");
  auto busy = hpoviz_cli("serve --runs-dir " + q(dir / "runs") + " --cache-dir " + q(dir / "c3") + " --port " +
                             std::to_string(live.port()),
                         dir);
  CHECK(busy.code == 1);
  CHECK(busy.err.find("port") != std::string::npos);
}
