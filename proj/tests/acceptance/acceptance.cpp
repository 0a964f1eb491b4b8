// Acceptance checks, one per criterion. Each prints a single PASS/FAIL line
// with the measured quantities. Run with --criterion N for one check, or with
// no arguments for all of them; the exit code is nonzero if any check fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "profiles.hpp"
#include "qmip/adversary.hpp"
#include "qmip/diagnostics.hpp"
#include "qmip/error.hpp"
#include "qmip/game.hpp"
#include "qmip/harness.hpp"
#include "qmip/protocol.hpp"
#include "qmip/sat.hpp"

using namespace qmip;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, a);
  return buf;
}

// ---- 1: completeness -----------------------------------------------------------

Outcome completeness() {
  double worst = 0.0;
  std::size_t rejections = 0;
  std::size_t trials = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [f, t] = sat::generate_planted(seed, 3, 5, true);
    for (std::size_t d : {1, 2}) {
      const auto s = adversary::strategy_honest(f, t, d);
      const protocol::ProtocolEngine engine(f, d);
      worst = std::max(worst, std::abs(engine.run_exact(s).accept - 1.0));
      const auto run = engine.run_trials(s, 1000 * seed + d, 10000);
      rejections += run.trials - run.accepted;
      trials += run.trials;
    }
  }
  return {worst <= 1e-9 && rejections == 0,
          fmt("max |exact - 1| = %.3g", worst) + ", " + std::to_string(rejections) + " rejections in " +
              std::to_string(trials) + " trials"};
}

// ---- 2 and 7: posteriors ---------------------------------------------------------

struct FamilyCase {
  sat::Formula formula;
  quantum::MeasurementFamily family;
};

std::vector<FamilyCase> posterior_cases() {
  std::vector<FamilyCase> out;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto [f, t] = fixture::small_planted(seed);
    auto fam = fixture::small_family(f, 1 + seed % 2, 500 + seed);
    out.push_back({std::move(f), std::move(fam)});
  }
  return out;
}

Outcome posterior_equivalence() {
  double worst = 0.0;
  std::size_t compared = 0;
  std::size_t max_outcomes = 0;
  for (const auto& c : posterior_cases()) {
    max_outcomes = std::max(max_outcomes, c.family.size());
    for (std::size_t k = 0; k < c.family.size(); ++k) {
      const auto table = diagnostics::posterior_table(c.formula, diagnostics::outcome_weights(c.formula, c.family, k));
      const auto brute = oracle::purified_posterior(c.formula, c.family, k);
      if (table.size() != 225 || brute.size() != 225) return {false, "expected 225 legal tuples"};
      for (std::size_t i = 0; i < table.size(); ++i) worst = std::max(worst, std::abs(table[i] - brute[i]));
      compared += table.size();
    }
  }
  return {worst <= 1e-9 && max_outcomes <= 4,
          std::to_string(compared) + " (tuple, outcome) pairs, max deviation " + fmt("%.3g", worst)};
}

Outcome bound_consistency() {
  std::size_t violations = 0;
  std::size_t silent = 0;
  std::size_t checked = 0;
  // The criterion-2 families never break the bound, so one family that does
  // is added to show the reporting path is live.
  auto cases = posterior_cases();
  auto [sf, sfam] = fixture::bound_stress_case();
  cases.push_back({std::move(sf), std::move(sfam)});
  std::size_t stress_violations = 0;
  for (const auto& c : cases) {
    const auto report = diagnostics::diagnose(c.formula, c.family, 0.1);
    for (const auto& o : report.outcomes) {
      const auto table = diagnostics::posterior_table(c.formula, o.weights);
      const auto tuples = protocol::legal_tuples(c.formula);
      std::size_t here = 0;
      for (std::size_t i = 0; i < tuples.size(); ++i) {
        // Same tolerance diagnose uses when it counts violations.
        here += diagnostics::posterior_lower_bound(c.formula, o.weights, tuples[i]) > table[i] + 1e-12 ? 1 : 0;
      }
      checked += tuples.size();
      violations += here;
      bool reported = false;
      for (const auto& fd : report.findings) {
        reported = reported || (fd.kind == "posterior_lower_bound_violation" && fd.k == o.k &&
                                fd.message.find("large M and N") != std::string::npos);
      }
      if (here > 0 && !reported) ++silent;
      if (&c == &cases.back()) stress_violations += here;
    }
  }
  return {silent == 0 && stress_violations > 0,
          std::to_string(checked) + " tuples, " + std::to_string(violations) + " bound violations (" +
              std::to_string(stress_violations) + " from the stress family), " + std::to_string(silent) +
              " unreported outcomes"};
}

// ---- 3: damage bound -------------------------------------------------------------

Outcome damage() {
  double worst_margin = 1.0;
  std::size_t families = 0;
  protocol::Rng rng(31337);
  const auto [f, t] = fixture::small_planted(11);
  for (double p : {1.5, 2.0, 4.0, 16.0}) {
    for (int rep = 0; rep < 50; ++rep) {
      const std::size_t y1 = rng() % f.num_clauses();
      std::size_t y2 = rng() % (f.num_clauses() - 1);
      if (y2 >= y1) ++y2;
      const auto fam = adversary::random_skewed_family(f, p, y1, y2, t, 1 + rep % 2, rng);
      const protocol::QueryTuple r{y1, y2, f.clause(y1)[rep % 3].var, f.clause(y2)[rep % 3].var};
      const auto check = diagnostics::verify_damage_numerically(f, fam, 0, r);
      if (std::abs(check.ratio - p) > 1e-9 * p) return {false, "skewed family missed its ratio"};
      worst_margin = std::min(worst_margin, diagnostics::damage_bound(p).fidelity_upper - check.max_fidelity);
      ++families;
    }
  }
  // The structured skewed strategy sits exactly on the bound, so the check
  // is also exercised at its extreme point.
  double worst_extreme = 1.0;
  for (double p : {1.5, 2.0, 4.0, 16.0}) {
    const auto s = adversary::strategy_skewed(f, p, 0, 1, t, 2);
    const protocol::QueryTuple r{0, 1, f.clause(0)[0].var, f.clause(1)[0].var};
    const auto check = diagnostics::verify_damage_numerically(f, s.round1(), 0, r);
    worst_extreme = std::min(worst_extreme, diagnostics::damage_bound(p).fidelity_upper - check.max_fidelity);
  }
  worst_margin = std::min(worst_margin, worst_extreme);
  // 0.9714045...: the stated six digits are the truncated value.
  const double at2 = diagnostics::damage_bound(2.0).fidelity_upper;
  const bool digits = std::floor(at2 * 1e6) == 971404.0;
  return {worst_margin >= -1e-9 && digits, std::to_string(families) + " random families, min margin " +
                                                 fmt("%.3g", worst_margin) +
                                                 fmt(", extremal strategy margin %.3g", worst_extreme) + fmt(", bound at p=2 = %.9f", at2)};
}

// ---- 4: measure and resend ---------------------------------------------------------

Outcome measure_resend() {
  const auto [f, t] = sat::generate_planted(4, 3, 5, true);
  const auto s = adversary::strategy_measure_resend(f, t, 2);
  const protocol::ProtocolEngine engine(f, 2);
  const double exact = engine.run_exact(s).swap_alice_pass_given_distinct;
  const auto run = engine.run_trials(s, 2024, 100000);
  const double n = static_cast<double>(run.distinct_clause_trials);
  const double rate = 1.0 - static_cast<double>(run.distinct_clause_swap_alice_failures) / n;
  const double sigma = std::sqrt(0.75 * 0.25 / n);
  const bool ok = std::abs(exact - 0.75) <= 1e-9 && std::abs(rate - 0.75) <= 3.0 * sigma;
  return {ok, fmt("exact %.12f", exact) + fmt(", sampled %.5f", rate) + fmt(" (%.2f sigma over ", (rate - 0.75) / sigma) +
                  std::to_string(run.distinct_clause_trials) + " distinct-clause trials)"};
}

// ---- 5: classical game -------------------------------------------------------------

Outcome classical_bound() {
  std::size_t found = 0;
  std::size_t holds = 0;
  for (std::uint64_t seed = 1; found < 10 && seed < 500; ++seed) {
    const auto f = sat::generate_random(seed, 4 + seed % 3, 24 + seed % 12);
    const auto gap = sat::unsat_gap(f);
    if (gap == Rational(0, 1)) continue;
    ++found;
    if (game::game_value_bruteforce(f).value <= Rational(1, 1) - gap / Rational(3, 1)) ++holds;
  }
  const auto patterns = sat::all_sign_patterns();
  const auto gp = sat::unsat_gap(patterns);
  const bool pat = gp == Rational(1, 8) &&
                   game::game_value_bruteforce(patterns).value <= Rational(1, 1) - gp / Rational(3, 1);
  return {found == 10 && holds == 10 && pat, std::to_string(holds) + "/" + std::to_string(found) +
                                                 " unsatisfiable instances within the bound, patterns gap " +
                                                 gp.str()};
}

// ---- 6: rounding --------------------------------------------------------------------

Outcome rounding() {
  std::size_t honest_ok = 0;
  std::size_t honest = 0;
  std::size_t roundings = 0;
  std::size_t above = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [f, t] = fixture::small_planted(seed);
    protocol::Rng rng(seed);
    for (std::size_t d : {1, 2}) {
      const auto s = adversary::strategy_honest(f, t, d);
      ++honest;
      const auto r = game::round_quantum_to_classical(f, s.round1(), 0, rng);
      if (game::strategy_value(f, r.strategy) == Rational(1, 1)) ++honest_ok;
    }
  }
  std::vector<sat::Formula> formulas{sat::all_sign_patterns()};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) formulas.push_back(fixture::small_planted(seed).first);
  for (std::uint64_t seed = 1; seed <= 4; ++seed) formulas.push_back(sat::generate_random(seed, 3, 8));
  std::uint64_t seed = 0;
  for (const auto& f : formulas) {
    const auto best = game::game_value_bruteforce(f).value;
    ++seed;
    protocol::Rng rng(100 + seed);
    for (std::size_t d : {1, 2}) {
      const auto fam = fixture::small_family(f, d, 900 + seed);
      for (std::size_t k = 0; k < fam.size(); ++k) {
        for (int rep = 0; rep < 10; ++rep) {
          const auto r = game::round_quantum_to_classical(f, fam, k, rng);
          ++roundings;
          if (game::strategy_value(f, r.strategy) > best) ++above;
        }
      }
    }
  }
  return {honest_ok == honest && above == 0, std::to_string(honest_ok) + "/" + std::to_string(honest) +
                                                 " honest roundings of value 1, " + std::to_string(above) +
                                                 " of " + std::to_string(roundings) +
                                                 " family roundings above the optimum"};
}

// ---- 8: bad sets ---------------------------------------------------------------------

Outcome bad_sets() {
  protocol::Rng rng(8);
  using Maker = profile::Profile (*)(protocol::Rng&);
  const Maker makers[] = {profile::large_regime, profile::t_steps, profile::small_clause, profile::bob_side};
  std::size_t tuples = 0;
  std::size_t failures = 0;
  std::string notes;
  for (auto make : makers) {
    for (int rep = 0; rep < 5; ++rep) {
      const auto p = make(rng);
      const diagnostics::Thresholds th;
      const auto regime = diagnostics::regime_classify(p.formula, p.weights, th);
      const auto analysis = regime == diagnostics::Regime::large
                                ? diagnostics::analyze_large(p.formula, p.weights, th)
                                : diagnostics::analyze_small(p.formula, p.weights, th, p.gamma);
      const diagnostics::BadSet* found = nullptr;
      for (const auto& d : analysis.bad_sets) {
        if (d.construction == p.expected) found = &d;
      }
      if (found == nullptr) {
        ++failures;
        notes = " (" + diagnostics::construction_name(p.expected) + " not triggered)";
        continue;
      }
      const std::set<protocol::QueryTuple> distinct(found->tuples.begin(), found->tuples.end());
      bool ok = found->tuples.size() == found->construction_count && distinct.size() == found->tuples.size() &&
                !found->tuples.empty();
      for (const auto& r : found->tuples) {
        ok = ok && protocol::is_legal(p.formula, r) && profile::inequality(p.expected, p.weights, r) &&
             diagnostics::damage_inequality_holds(p.expected, p.weights, r);
      }
      tuples += found->tuples.size();
      if (!ok) {
        ++failures;
        notes = " (" + diagnostics::construction_name(p.expected) + " failed)";
      }
    }
  }
  return {failures == 0, "20 profiles over 4 constructions, " + std::to_string(tuples) + " tuples checked, " +
                             std::to_string(failures) + " failures" + notes};
}

// ---- 9: overlap ----------------------------------------------------------------------

Outcome overlap() {
  protocol::Rng rng(99);
  bool ok = true;
  std::string detail;
  for (double eps : {0.001, 0.01, 0.1}) {
    const auto c = diagnostics::verify_overlap_bound(eps, 10000, rng, 2, 8);
    ok = ok && c.samples == 10000 && c.min_margin >= -1e-9 && c.violations == 0;
    if (!detail.empty()) detail += "; ";
    detail += fmt("eps %g: ", eps) + std::to_string(c.violations) + fmt(" over, max %.4f", c.max_overlap) +
              fmt(" vs bound %.4f", diagnostics::taylor_overlap_bound(eps)) +
              fmt(" (exact max %.4f)", diagnostics::tight_overlap_bound(eps));
  }
  return {ok, detail};
}

// ---- 10: reproducibility -----------------------------------------------------------

Outcome reproducibility() {
  std::size_t experiments = 0;
  std::size_t mismatches = 0;
  const std::vector<std::pair<harness::Command, std::string>> setups{
      {harness::Command::run, "honest"},
      {harness::Command::run, "measure_resend"},
      {harness::Command::run, "skewed:p=4,y1=0,y2=2"},
      {harness::Command::classical, "measure_resend"},
  };
  for (const auto& [cmd, strategy] : setups) {
    for (std::uint64_t seed : {1ULL, 42ULL, 18446744073709551615ULL}) {
      harness::ExperimentConfig c;
      c.command = cmd;
      c.formula = "planted:3:5:regular:3";
      c.strategy = strategy;
      c.mode = harness::Mode::sampled;
      c.trials = cmd == harness::Command::run ? 2000 : 20;
      c.seed = seed;
      // Transcripts are collected in memory; run_experiment writes no files.
      c.transcripts = cmd == harness::Command::run ? "transcripts.jsonl" : "";
      const auto a = harness::run_experiment(c);
      auto again = c;
      again.threads = 2;
      const auto b = harness::run_experiment(again);
      ++experiments;
      if (a.text() != b.text() || harness::transcripts_jsonl(a.transcripts) != harness::transcripts_jsonl(b.transcripts)) {
        ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(experiments) + " sampled experiments rerun, " +
                               std::to_string(mismatches) + " byte mismatches"};
}

struct Criterion {
  const char* name;
  double time_limit_s;
  std::function<Outcome()> check;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {"completeness", 10, completeness},
      {"posterior oracle equivalence", 120, posterior_equivalence},
      {"damage bound", 60, damage},
      {"measure-and-resend detection", 30, measure_resend},
      {"classical game bound", 60, classical_bound},
      {"rounding", 60, rounding},
      {"lower bound consistency", 120, bound_consistency},
      {"bad-set constructions", 120, bad_sets},
      {"overlap bound", 120, overlap},
      {"reproducibility", 120, reproducibility},
  };
  return list;
}

bool run_one(std::size_t n) {
  const auto& c = criteria().at(n - 1);
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = c.check();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= c.time_limit_s;
  const bool pass = out.pass && in_time;
  std::printf("criterion %zu %s: %s: %s [%.2f s%s]\n", n, pass ? "PASS" : "FAIL", c.name, out.detail.c_str(), secs,
              in_time ? "" : ", over the time limit");
  std::fflush(stdout);
  return pass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::size_t only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-10)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  bool all = true;
  for (std::size_t n = 1; n <= criteria().size(); ++n) {
    if (only != 0 && n != only) continue;
    all = run_one(n) && all;
  }
  return all ? EXIT_SUCCESS : EXIT_FAILURE;
}
