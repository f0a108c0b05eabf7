#include <doctest.h>

#include "hessolve/cli.hpp"
#include "hessolve/model_file.hpp"
#include "hessolve/oracle.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hessolve;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome hessolve_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "hessolve");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / "hessolve_cli_test") {
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name, const std::string& text) const {
    const auto p = (path / name).string();
    std::ofstream(p) << text;
    return p;
  }
};

LevelVector from_json(const nlohmann::json& pi) {
  LevelVector out;
  for (const auto& seg : pi) {
    const auto v = seg.get<std::vector<double>>();
    out.segments.emplace_back(Eigen::Map<const RowVector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return out;
}

}  // namespace

TEST_CASE("solve the retrial queue") {
  const auto r = hessolve_cli({"solve", "--model", "mms-retrial", "--lambda", "1", "--mu", "1", "--s",
                               "2", "--eta", "1", "--epsilon", "1e-8"});
  CHECK(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["converged"] == true);
  CHECK(doc["model"] == "mms-retrial");
  CHECK(doc["tv"].back().get<double>() < 1e-8);
  CHECK(doc["error_bound"].is_null());
}

TEST_CASE("an unstable retrial file hits the cap") {
  TempDir tmp;
  std::ostringstream text;
  models::write_model(text, models::describe(models::RetrialSpec{3.0, 1.0, 1, 1.0}));
  const auto path = tmp.file("unstable.qbh", text.str());
  const auto r = hessolve_cli({"solve", "--model", "file:" + path, "--cap", "500"});
  CHECK(r.code == 3);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["converged"] == false);
  CHECK(doc["stop_level"] == 500);
  CHECK(r.err.find("uncertified") != std::string::npos);
}

TEST_CASE("input validation exits with 1") {
  auto r = hessolve_cli({"solve", "--epsilon", "2.0"});
  CHECK(r.code == 1);
  CHECK(r.err.find("epsilon must lie in (0,1)") != std::string::npos);

  CHECK(hessolve_cli({"solve", "--model", "nope"}).code == 1);
  CHECK(hessolve_cli({"solve", "--schedule", "weird:3"}).code == 1);
  CHECK(hessolve_cli({"solve", "--cap", "3"}).code == 1);
  CHECK(hessolve_cli({"solve", "--out", "xml"}).code == 1);
  CHECK(hessolve_cli({"solve", "--model", "mm1", "--lambda", "3"}).code == 1);
  CHECK(hessolve_cli({"solve", "--model", "file:/does/not/exist"}).code == 1);
  CHECK(hessolve_cli({"frobnicate"}).code == 1);
  CHECK(hessolve_cli({}).code == 1);
  CHECK(hessolve_cli({"solve", "--help"}).code == 0);
}

TEST_CASE("compare against the oracle") {
  const auto r = hessolve_cli({"compare", "--model", "mm1", "--n", "10"});
  CHECK(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);  // header
  int rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    int level = -1, j = -1;
    double tv = 1.0;
    if (!(ls >> level >> j >> tv)) continue;
    CHECK(tv < 1e-12);
    ++rows;
  }
  CHECK(rows == 11);

  const auto guard = hessolve_cli({"compare", "--model", "mm1", "--n", "100"});
  CHECK(guard.code == 1);
  CHECK(guard.err.find("oracle scale guard") != std::string::npos);

  CHECK(hessolve_cli({"compare", "--model", "counterexample", "--n", "20"}).code == 0);
  CHECK(hessolve_cli({"compare", "--model", "mms-retrial", "--n", "25"}).code == 0);
}

TEST_CASE("drift-check") {
  CHECK(hessolve_cli({"drift-check", "--model", "mms-retrial", "--n-max", "100"}).code == 0);
  CHECK(hessolve_cli({"drift-check", "--model", "bmap", "--n-max", "200"}).code == 0);
  CHECK(hessolve_cli({"drift-check", "--model", "counterexample", "--n-max", "200"}).code == 0);

  TempDir tmp;
  const auto cert = tmp.file("weak.qbh", "certificate:\nv: affine 1 1\nb: 0.5\nC_levels: 0\n");
  const auto r = hessolve_cli({"drift-check", "--model", "mm1", "--cert", cert, "--n-max", "50"});
  CHECK(r.code == 4);
  CHECK(r.out.find("level 0 phase 0 slack 1.5") != std::string::npos);

  // Unstable built-in: no certificate can be built.
  CHECK(hessolve_cli({"drift-check", "--model", "mms-retrial", "--lambda", "5"}).code == 1);
  CHECK(hessolve_cli({"drift-check", "--model", "random"}).code == 1);
}

TEST_CASE("validate") {
  CHECK(hessolve_cli({"validate", "--model", "bmap", "--n-max", "50"}).code == 0);
  TempDir tmp;
  const auto bad = tmp.file("bad.qbh",
                            "hessolve-model 1\nlevels: 2\ndim: 1 1\nrepeat_from: 1\n"
                            "block 0 0: -1\nblock 0 1: 1\nblock 1 0: 2\nblock 1 1: -1\nblock 1 2: 1\n");
  const auto r = hessolve_cli({"validate", "--model", "file:" + bad});
  CHECK(r.code == 1);
  CHECK(r.err.find("row sum") != std::string::npos);
}

TEST_CASE("JSON output round-trips") {
  const auto r = hessolve_cli({"solve", "--model", "bmap", "--lambda", "2", "--mu", "1"});
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  const LevelVector pi = from_json(doc["pi"]);
  // Same run in memory.
  const auto spec = models::BMAPSpec::poisson(2.0, 1.0);
  const auto res = run(models::bmap_generator(spec), bmap_certificate(spec), TruncationSchedule::arithmetic(10), 1e-8);
  CHECK(tv_distance(pi, res.pi_hat) == 0.0);
  CHECK(doc["stop_level"] == res.stop_level);
}

TEST_CASE("identical configurations give byte-identical output") {
  for (const std::string fmt : {"json", "csv", "human"}) {
    const std::vector<std::string> args{"solve", "--model", "counterexample", "--out", fmt, "--schedule", "geometric:1.5"};
    const auto a = hessolve_cli(args);
    const auto b = hessolve_cli(args);
    CHECK(a.code == 0);
    CHECK(a.out == b.out);
  }
  auto threads = hessolve_cli({"solve", "--model", "mms-retrial", "--s", "3", "--threads", "4"});
  auto single = hessolve_cli({"solve", "--model", "mms-retrial", "--s", "3"});
  CHECK(threads.out == single.out);
}

TEST_CASE("csv and human formats") {
  const auto csv = hessolve_cli({"solve", "--model", "mm1", "--out", "csv"});
  CHECK(csv.code == 0);
  CHECK(csv.out.rfind("# model: mm1\n", 0) == 0);
  CHECK(csv.out.find("\nlevel,phase,probability\n0,0,0.5") != std::string::npos);

  const auto human = hessolve_cli({"solve", "--model", "mm1", "--out", "human", "--beta", "1", "--phibar", "0.1"});
  CHECK(human.code == 0);
  CHECK(human.out.find("level marginals") != std::string::npos);
  CHECK(human.out.find("E(n)") != std::string::npos);
}

TEST_CASE("emitted model files solve like the built-ins") {
  TempDir tmp;
  for (const std::string name : {"mms-retrial", "bmap", "counterexample", "mm1"}) {
    const auto path = (tmp.path / (name + ".qbh")).string();
    REQUIRE(hessolve_cli({"model", "--model", name, "-o", path}).code == 0);
    const auto a = nlohmann::json::parse(hessolve_cli({"solve", "--model", name}).out);
    const auto b = nlohmann::json::parse(hessolve_cli({"solve", "--model", "file:" + path}).out);
    CHECK(a["stop_level"] == b["stop_level"]);
    CHECK(tv_distance(from_json(a["pi"]), from_json(b["pi"])) < 1e-12);
    CHECK(a["certificate"] == b["certificate"]);
  }
}

TEST_CASE("save and resume through the CLI") {
  TempDir tmp;
  const auto state = (tmp.path / "state.json").string();
  const auto part = hessolve_cli({"solve", "--model", "mms-retrial", "--cap", "20", "--save-state", state});
  CHECK(part.code == 3);
  const auto rest = hessolve_cli({"solve", "--model", "mms-retrial", "--resume", state});
  const auto full = hessolve_cli({"solve", "--model", "mms-retrial"});
  CHECK(rest.code == 0);
  const auto a = nlohmann::json::parse(rest.out), b = nlohmann::json::parse(full.out);
  CHECK(a["pi"] == b["pi"]);
}

TEST_CASE("random model follows HESSOLVE_SEED") {
  setenv("HESSOLVE_SEED", "7", 1);
  const auto a = hessolve_cli({"solve", "--model", "random"});
  const auto b = hessolve_cli({"solve", "--model", "random"});
  setenv("HESSOLVE_SEED", "8", 1);
  const auto c = hessolve_cli({"solve", "--model", "random"});
  setenv("HESSOLVE_SEED", "x", 1);
  const auto bad = hessolve_cli({"solve", "--model", "random"});
  unsetenv("HESSOLVE_SEED");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out != c.out);
  CHECK(bad.code == 1);
  CHECK(hessolve_cli({"compare", "--model", "random", "--n", "15"}).code == 0);
}

TEST_CASE("fixed augmentation on the counterexample never settles") {
  const auto r = hessolve_cli({"solve", "--model", "counterexample", "--fixed-alpha", "1", "--schedule",
                               "arithmetic:2", "--cap", "10"});
  CHECK(r.code == 3);
  const auto doc = nlohmann::json::parse(r.out);
  for (const auto& tv : doc["tv"]) CHECK(tv.get<double>() == 2.0);
  CHECK(hessolve_cli({"solve", "--model", "mm1", "--fixed-alpha", "3"}).code == 1);
}
