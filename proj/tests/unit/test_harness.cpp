#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "fixtures.hpp"
#include "qmip/error.hpp"
#include "qmip/harness.hpp"

using namespace qmip;
using namespace qmip::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / ("qmip_harness_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(QMIP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig sampled_run(std::uint64_t seed) {
  ExperimentConfig c;
  c.formula = "planted:3:5:regular:2";
  c.strategy = "measure_resend";
  c.mode = Mode::sampled;
  c.trials = 400;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("canonical dumps sort keys and format numbers stably") {
  Json j{{"b", 1}, {"a", {{"z", 0.1}, {"y", -0.0}}}, {"n", std::numeric_limits<double>::quiet_NaN()}};
  const auto text = dump_canonical(j);
  CHECK(text.find("\"a\"") < text.find("\"b\""));
  CHECK(text.find("\"y\"") < text.find("\"z\""));
  CHECK(text.find("0.1") != std::string::npos);
  CHECK(text.find("\"n\": null") != std::string::npos);
  CHECK(text.find("-0") == std::string::npos);
  CHECK(dump_canonical(Json::parse(text)) == text);
}

TEST_CASE("matrices and families survive a JSON round trip") {
  const auto [f, t] = fixture::small_planted(1);
  const auto fam = fixture::small_family(f, 2, 5);
  const auto back = family_from_json(f, family_to_json(fam));
  REQUIRE(back.size() == fam.size());
  CHECK(back.private_dim == fam.private_dim);
  for (std::size_t k = 0; k < fam.size(); ++k) {
    CHECK((back.outcomes[k].alice.matrix() - fam.outcomes[k].alice.matrix()).norm() == 0.0);
    CHECK((back.outcomes[k].bob.matrix() - fam.outcomes[k].bob.matrix()).norm() == 0.0);
  }
  CHECK(matrix_from_json(Json::parse("[[1, [0, 2]], [3, 4]]"))(0, 1) == quantum::Complex(0, 2));
  CHECK_THROWS_AS(matrix_from_json(Json::parse("[[1, 2], [3]]")), InvalidArgument);
  CHECK_THROWS_AS(family_from_json(f, Json::parse(R"({"d": 2, "outcomes": [{"A": [[1]], "B": [[1]]}]})")),
                  DimensionMismatch);
}

TEST_CASE("config parsing rejects bad input") {
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"formula": "patterns", "colour": 1})")), InvalidArgument);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"mode": "fast"})")), InvalidArgument);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"trials": "many"})")), InvalidArgument);
  ExperimentConfig c;
  CHECK_THROWS_AS(validate_config(c), InvalidArgument);
  c.formula = "patterns";
  CHECK_NOTHROW(validate_config(c));
  c.mode = Mode::sampled;
  CHECK_THROWS_AS(validate_config(c), InvalidArgument);
  c.trials = 10;
  CHECK_THROWS_AS(validate_config(c), InvalidArgument);
  c.seed = 1;
  CHECK_NOTHROW(validate_config(c));
  c.private_dim = 0;
  CHECK_THROWS_AS(validate_config(c), InvalidArgument);
}

TEST_CASE("threshold overrides are parsed and checked by name") {
  ExperimentConfig c;
  apply_override(c, "steps_fraction=0.5");
  CHECK(c.thresholds.at("steps_fraction") == 0.5);
  CHECK_THROWS_AS(apply_override(c, "nonsense=1"), InvalidArgument);
  CHECK_THROWS_AS(apply_override(c, "steps_fraction"), InvalidArgument);
  CHECK_THROWS_AS(apply_override(c, "steps_fraction=abc"), InvalidArgument);
}

TEST_CASE("configs round trip through JSON") {
  auto c = sampled_run(9);
  c.command = Command::classical;
  c.gamma = 0.25;
  c.thresholds["steps_fraction"] = 2.0;
  const auto back = config_from_json(config_to_json(c));
  CHECK(back.command == c.command);
  CHECK(back.formula == c.formula);
  CHECK(back.strategy == c.strategy);
  CHECK(back.trials == c.trials);
  CHECK(back.seed == c.seed);
  CHECK(back.gamma == c.gamma);
  CHECK(back.thresholds == c.thresholds);
}

TEST_CASE("formula and strategy sources") {
  CHECK(load_formula("planted:4:6").planted.has_value());
  CHECK(load_formula("patterns:2").formula.num_clauses() == 16);
  CHECK(!load_formula("random:5:9:3").planted.has_value());
  CHECK_THROWS_AS(load_formula("planted:4"), InvalidArgument);
  CHECK_THROWS_AS(load_formula("planted:x:6"), InvalidArgument);
  CHECK_THROWS_AS(load_formula("/nonexistent/formula.cnf"), InvalidArgument);
  const auto lf = load_formula("planted:3:5:regular:4");
  CHECK(load_strategy(lf, "skewed:p=4,y1=1,y2=2", 2).round1().size() == 2);
  CHECK_THROWS_AS(load_strategy(lf, "skewed:q=4", 2), InvalidArgument);
  CHECK_THROWS_AS(load_strategy(lf, "nope.json", 2), InvalidArgument);
}

TEST_CASE("exact reports carry no seed and repeat byte for byte") {
  ExperimentConfig c;
  c.formula = "planted:3:5:regular:1";
  c.strategy = "measure_resend";
  c.seed = 77;  // ignored in exact mode
  const auto a = run_experiment(c).text();
  const auto b = run_experiment(c).text();
  CHECK(a == b);
  CHECK(a.find("seed") == std::string::npos);
  const auto j = Json::parse(a);
  CHECK(j.at("schema") == kSchema);
  CHECK(j.at("provenance").at("version") == kVersion);
  CHECK(std::abs(j.at("run").at("swap_alice_pass_given_distinct").get<double>() - 0.75) < 1e-9);
}

TEST_CASE("sampled reports are a function of the seed") {
  const auto a = run_experiment(sampled_run(5)).text();
  CHECK(a == run_experiment(sampled_run(5)).text());
  CHECK(a != run_experiment(sampled_run(6)).text());
  auto threaded = sampled_run(5);
  threaded.threads = 3;
  CHECK(a == run_experiment(threaded).text());
  const auto j = Json::parse(a);
  CHECK(j.at("provenance").at("seed") == 5);
  CHECK(j.at("run").at("trials") == 400);
  CHECK(j.at("run").contains("exact_accept"));
}

TEST_CASE("each command produces its section") {
  ExperimentConfig c;
  c.formula = "patterns";
  c.command = Command::gap;
  CHECK(Json::parse(run_experiment(c).text()).at("gap").at("gap") == "1/8");
  c.command = Command::classical;
  const auto cl = Json::parse(run_experiment(c).text()).at("classical");
  CHECK(cl.at("game_value") == "23/24");
  CHECK(cl.at("bound_holds") == true);
  c.command = Command::validate;
  c.strategy = "dephase";
  const auto v = Json::parse(run_experiment(c).text()).at("validate");
  CHECK(v.at("valid") == false);
  CHECK(v.at("strategy").contains("error"));
  c.command = Command::diagnose;
  c.strategy = "honest";
  const auto d = Json::parse(run_experiment(c).text()).at("diagnose");
  CHECK(d.at("gamma").get<double>() == doctest::Approx(0.125));
  CHECK(d.at("outcomes").size() == 1);
}

TEST_CASE("run_and_write writes transcripts and the posterior table") {
  const auto dir = scratch_dir();
  auto c = sampled_run(3);
  c.trials = 25;
  c.out = (dir / "report.json").string();
  c.transcripts = (dir / "t.jsonl").string();
  run_and_write(c);
  CHECK(Json::parse(slurp(dir / "report.json")).at("run").at("trials") == 25);
  const auto lines = slurp(dir / "t.jsonl");
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 25);

  ExperimentConfig d;
  d.command = Command::diagnose;
  d.formula = "planted:3:5:regular:2";
  d.posterior_csv = (dir / "post.csv").string();
  run_and_write(d);
  CHECK(slurp(dir / "post.csv").rfind("k,", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("the command line tool honours flags, configs and exit codes") {
  const auto dir = scratch_dir();
  const auto out1 = (dir / "a.json").string();
  const auto out2 = (dir / "b.json").string();
  const std::string flags = "--formula planted:3:5:regular:1 --strategy measure_resend --mode sampled --trials 200";
  CHECK(run_cli("run " + flags + " --seed 11 --out " + out1) == 0);
  CHECK(run_cli("run " + flags + " --seed 11 --threads 2 --out " + out2) == 0);
  CHECK(slurp(out1) == slurp(out2));

  spit(dir / "cfg.json", R"({"formula": "patterns", "mode": "exact", "strategy": "honest"})");
  CHECK(run_cli("gap --config " + (dir / "cfg.json").string() + " --out " + out1) == 0);
  CHECK(Json::parse(slurp(out1)).at("gap").at("gap") == "1/8");
  // An explicit flag overrides the config file.
  CHECK(run_cli("gap --config " + (dir / "cfg.json").string() + " --formula planted:3:5 --out " + out1) == 0);
  CHECK(Json::parse(slurp(out1)).at("gap").at("gap") == "0/1");

  CHECK(run_cli("run --formula patterns --mode sampled --trials 10") == 2);
  CHECK(run_cli("run --formula patterns --set bogus=1") == 2);
  CHECK(run_cli("classical --formula random:30:40") == 3);
  CHECK(run_cli("") != 0);
  fs::remove_all(dir);
}
