// qmip: command-line front end for protocol experiments, diagnostics,
// the classical game and formula checks. Reports are canonical JSON.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qmip/error.hpp"
#include "qmip/harness.hpp"

namespace {

using qmip::harness::Command;
using qmip::harness::ExperimentConfig;

struct Flags {
  std::string config;
  std::string formula;
  std::string strategy;
  std::string mode;
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  std::size_t d = 0;
  double gamma = 0.0;
  std::vector<std::string> overrides;
  std::string out;
  std::string transcripts;
  std::string posterior_csv;
  unsigned threads = 0;
  std::map<std::string, CLI::Option*> opts;
};

void add_flags(CLI::App* sub, Flags& fl) {
  fl.opts["config"] = sub->add_option("--config", fl.config, "JSON config whose keys mirror these flags");
  fl.opts["formula"] = sub->add_option(
      "--formula", fl.formula, "DIMACS/JSON path, planted:N:M[:regular][:seed], random:N:M[:seed] or patterns[:copies]");
  fl.opts["strategy"] = sub->add_option(
      "--strategy", fl.strategy, "honest | measure_resend | dephase | skewed:p=..,y1=..,y2=.. | strategy.json");
  fl.opts["mode"] = sub->add_option("--mode", fl.mode, "exact or sampled")->check(CLI::IsMember({"exact", "sampled"}));
  fl.opts["trials"] = sub->add_option("--trials", fl.trials, "trials (sampled run) or roundings (sampled classical)");
  fl.opts["seed"] = sub->add_option("--seed", fl.seed, "64-bit seed, required in sampled mode");
  fl.opts["d"] = sub->add_option("--d", fl.d, "private register dimension (default 2)");
  fl.opts["gamma"] = sub->add_option("--gamma", fl.gamma, "unsatisfiability gap used by the diagnostics");
  fl.opts["set"] = sub->add_option("--set", fl.overrides, "threshold override name=value (repeatable)");
  fl.opts["out"] = sub->add_option("--out", fl.out, "report path (default: stdout)");
  fl.opts["transcripts"] = sub->add_option("--transcripts", fl.transcripts, "JSONL transcript path (sampled run)");
  fl.opts["posterior_csv"] = sub->add_option("--posterior-csv", fl.posterior_csv, "posterior table path (diagnose)");
  fl.opts["threads"] = sub->add_option("--threads", fl.threads, "worker threads (0 = automatic)");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw qmip::InvalidArgument("cannot open config \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig build_config(Command cmd, const Flags& fl) {
  ExperimentConfig c;
  if (fl.opts.at("config")->count()) {
    try {
      c = qmip::harness::config_from_json(qmip::harness::Json::parse(slurp(fl.config)));
    } catch (const nlohmann::json::parse_error& e) {
      throw qmip::InvalidArgument(std::string("config is not valid JSON: ") + e.what());
    }
  }
  // Explicit flags win over the config file.
  c.command = cmd;
  const auto given = [&](const char* name) { return fl.opts.at(name)->count() > 0; };
  if (given("formula")) c.formula = fl.formula;
  if (given("strategy")) c.strategy = fl.strategy;
  if (given("mode")) c.mode = qmip::harness::parse_mode(fl.mode);
  if (given("trials")) c.trials = fl.trials;
  if (given("seed")) c.seed = fl.seed;
  if (given("d")) c.private_dim = fl.d;
  if (given("gamma")) c.gamma = fl.gamma;
  if (given("out")) c.out = fl.out;
  if (given("transcripts")) c.transcripts = fl.transcripts;
  if (given("posterior_csv")) c.posterior_csv = fl.posterior_csv;
  if (given("threads")) c.threads = fl.threads;
  for (const auto& o : fl.overrides) qmip::harness::apply_override(c, o);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-prover quantum interactive proof simulator"};
  app.require_subcommand(1);

  const std::vector<std::pair<Command, const char*>> commands{
      {Command::run, "run the protocol against a prover strategy"},
      {Command::diagnose, "soundness diagnostics of a strategy's measurement family"},
      {Command::classical, "classical game value, bound check and rounding"},
      {Command::gap, "unsatisfiability gap of a formula"},
      {Command::validate, "check a formula and a strategy"},
  };
  std::vector<Flags> flags(commands.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    auto* sub = app.add_subcommand(qmip::harness::command_name(commands[i].first), commands[i].second);
    add_flags(sub, flags[i]);
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < commands.size(); ++i) {
      if (!subs[i]->parsed()) continue;
      const auto config = build_config(commands[i].first, flags[i]);
      const auto report = qmip::harness::run_and_write(config);
      if (config.out.empty()) std::cout << report.text();
    }
  } catch (const qmip::InstanceTooLarge& e) {
    std::fprintf(stderr, "qmip: instance too large: %s\n", e.what());
    return 3;
  } catch (const qmip::Error& e) {
    std::fprintf(stderr, "qmip: %s\n", e.what());
    return 2;
  }
  return 0;
}
