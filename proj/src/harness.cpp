#include "qmip/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Core>

#include "qmip/diagnostics.hpp"
#include "qmip/error.hpp"
#include "qmip/game.hpp"

namespace qmip::harness {

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

template <class T>
T parse_number(std::string_view text, const char* what) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw InvalidArgument(std::string("invalid ") + what + ": \"" + std::string(text) + "\"");
  }
  return value;
}

double parse_double(std::string_view text, const char* what) {
  // from_chars for double is missing from this standard library.
  const std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v)) {
    throw InvalidArgument(std::string("invalid ") + what + ": \"" + s + "\"");
  }
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write \"" + path + "\"");
  out << text;
}

Json index_list(const std::vector<std::size_t>& v) {
  Json a = Json::array();
  for (auto x : v) a.push_back(x);
  return a;
}

Json findings_json(const std::vector<diagnostics::Finding>& fs) {
  Json a = Json::array();
  for (const auto& f : fs) {
    Json j{{"kind", f.kind}, {"message", f.message}};
    if (f.k) j["k"] = *f.k;
    a.push_back(std::move(j));
  }
  return a;
}

Json formula_json(const LoadedFormula& lf) {
  const auto reg = sat::validate_regularity(lf.formula);
  return {{"source", lf.description},
          {"num_vars", lf.formula.num_vars()},
          {"num_clauses", lf.formula.num_clauses()},
          {"regular", reg.regular},
          {"planted", lf.planted.has_value()}};
}

double outcome_probability(const sat::Formula& f, const diagnostics::OutcomeWeights& w) {
  const double m = static_cast<double>(f.num_clauses());
  const double n = static_cast<double>(f.num_vars());
  return diagnostics::posterior_denominator(f, w) / (12.0 * m * m * n);
}

double resolve_gamma(const ExperimentConfig& c, const sat::Formula& f) {
  if (c.gamma) {
    if (!(*c.gamma >= 0.0 && *c.gamma <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
    return *c.gamma;
  }
  if (f.num_vars() > sat::kMaxGapVars) {
    throw InstanceTooLarge("the gap of a formula with more than " + std::to_string(sat::kMaxGapVars) +
                           " variables is not enumerated; pass gamma explicitly");
  }
  return sat::unsat_gap(f).to_double();
}

diagnostics::Thresholds thresholds_of(const ExperimentConfig& c) {
  diagnostics::Thresholds t;
  for (const auto& [name, value] : c.thresholds) t.set(name, value);
  return t;
}

// ---- subcommands -------------------------------------------------------------

Json run_section(const ExperimentConfig& c, const protocol::ProtocolEngine& engine,
                 const adversary::CompiledStrategy& s, Report& report) {
  Json j;
  const auto exact_or_null = [&]() -> std::optional<protocol::ExactResult> {
    try {
      return engine.run_exact(s);
    } catch (const InstanceTooLarge&) {
      return std::nullopt;
    }
  };
  if (c.mode == Mode::exact) {
    const auto r = engine.run_exact(s);
    j["accept"] = r.accept;
    j["failure"] = {{"clause", r.clause_failure},
                    {"consistency", r.consistency_failure},
                    {"swap_alice", r.swap_alice_failure},
                    {"swap_bob", r.swap_bob_failure}};
    j["swap_alice_pass_given_distinct"] = r.swap_alice_pass_given_distinct;
    Json outs = Json::array();
    for (std::size_t k = 0; k < r.outcome_probability.size(); ++k) {
      outs.push_back({{"k", k},
                      {"probability", r.outcome_probability[k]},
                      {"accept_given_outcome", r.accept_given_outcome[k]}});
    }
    j["outcomes"] = outs;
    return j;
  }

  auto* sink = c.transcripts.empty() ? nullptr : &report.transcripts;
  const auto t = engine.run_trials(s, *c.seed, c.trials, sink, c.threads);
  const double n = static_cast<double>(t.trials);
  const double rate = t.accept_rate();
  j["trials"] = t.trials;
  j["accepted"] = t.accepted;
  j["accept_rate"] = rate;
  j["accept_std_error"] = std::sqrt(rate * (1.0 - rate) / n);
  j["failures"] = {{"clause", t.clause_failures},
                   {"consistency", t.consistency_failures},
                   {"swap_alice", t.swap_alice_failures},
                   {"swap_bob", t.swap_bob_failures}};
  j["distinct_clause_trials"] = t.distinct_clause_trials;
  j["distinct_clause_swap_alice_failures"] = t.distinct_clause_swap_alice_failures;
  if (t.distinct_clause_trials > 0) {
    j["swap_alice_pass_given_distinct"] =
        1.0 - static_cast<double>(t.distinct_clause_swap_alice_failures) / static_cast<double>(t.distinct_clause_trials);
  }
  // The exact value is seed independent, so it can sit next to the estimate.
  if (const auto r = exact_or_null()) {
    const double sigma = std::sqrt(r->accept * (1.0 - r->accept) / n);
    j["exact_accept"] = r->accept;
    j["within_3_sigma"] = std::abs(rate - r->accept) <= 3.0 * sigma + 1e-12;
  }
  return j;
}

Json outcome_diag_json(const diagnostics::OutcomeDiagnostics& o) {
  Json bad = Json::array();
  for (const auto& b : o.analysis.bad_sets) {
    bad.push_back({{"construction", diagnostics::construction_name(b.construction)},
                   {"p", b.p},
                   {"split_index", b.split_index},
                   {"size", b.tuples.size()},
                   {"construction_count", b.construction_count},
                   {"probability", b.probability},
                   {"inequality_violations", b.inequality_violations}});
  }
  const auto& w = o.weights;
  return {{"k", o.k},
          {"probability", o.probability},
          {"regime", diagnostics::regime_name(o.analysis.regime)},
          {"weights",
           {{"A", w.A_of},
            {"B", w.B_of},
            {"W_A", w.W_A},
            {"W_B", w.W_B},
            {"W_tilde", w.W_tilde},
            {"block_uniform", w.block_uniform}}},
          {"weight_crosscheck_error", o.weight_crosscheck_error},
          {"alice_ratio_max", o.alice_ratio_max},
          {"bob_ratio_max", o.bob_ratio_max},
          {"alice_zero_weights", o.alice_zero_weights},
          {"bob_zero_weights", o.bob_zero_weights},
          {"bad_sets", bad},
          {"F", index_list(o.analysis.F)},
          {"G", index_list(o.analysis.G)},
          {"H", index_list(o.analysis.H)},
          {"F_certified", o.analysis.F_certified},
          {"G_certified", o.analysis.G_certified},
          {"findings", findings_json(o.analysis.findings)},
          {"posterior_sum", o.posterior_sum},
          {"posterior_checksum", o.posterior_checksum},
          {"lower_bound_violations", o.lower_bound_violations},
          {"lower_bound_worst_gap", o.lower_bound_worst_gap}};
}

Json diagnose_section(const ExperimentConfig& c, const sat::Formula& f, const adversary::CompiledStrategy& s,
                      Report& report) {
  const double gamma = resolve_gamma(c, f);
  const auto t = thresholds_of(c);
  const auto d = diagnostics::diagnose(f, s.round1(), gamma, t);
  Json outs = Json::array();
  for (const auto& o : d.outcomes) outs.push_back(outcome_diag_json(o));
  if (!c.posterior_csv.empty()) report.posterior_csv = diagnostics::posterior_csv(f, s.round1());
  return {{"gamma", d.gamma},
          {"thresholds", d.thresholds.values()},
          {"constants", d.constants},
          {"outcomes", outs},
          {"skipped_outcomes", index_list(d.skipped_outcomes)},
          {"findings", findings_json(d.findings)}};
}

Json classical_section(const ExperimentConfig& c, const sat::Formula& f, const adversary::CompiledStrategy& s) {
  Json j;
  const auto gap = sat::unsat_gap(f);
  const auto game = game::game_value_bruteforce(f);
  const Rational bound = Rational(1, 1) - gap / Rational(3, 1);
  j["gap"] = gap.str();
  j["game_value"] = game.value.str();
  j["game_value_float"] = game.value.to_double();
  j["bound"] = bound.str();
  j["bound_holds"] = game.value <= bound;
  std::string charlie;
  for (auto t : game.witness.charlie) charlie += std::to_string(t);
  std::string diana;
  for (bool b : game.witness.diana) diana += b ? '1' : '0';
  j["witness"] = {{"charlie", charlie}, {"diana", diana}};

  if (c.mode == Mode::sampled) {
    protocol::Rng rng(*c.seed);
    Json outs = Json::array();
    const auto& fam = s.round1();
    for (std::size_t k = 0; k < fam.size(); ++k) {
      const auto w = diagnostics::outcome_weights(f, fam, k);
      const double pk = outcome_probability(f, w);
      if (pk < diagnostics::kZeroProbability) continue;
      double sum = 0.0;
      double best = 0.0;
      std::size_t above = 0;
      std::size_t undefined = 0;
      for (std::size_t i = 0; i < c.trials; ++i) {
        const auto r = game::round_quantum_to_classical(f, fam, k, rng);
        const auto v = game::strategy_value(f, r.strategy);
        if (v > game.value) ++above;
        sum += v.to_double();
        best = std::max(best, v.to_double());
        undefined += r.undefined_branches;
      }
      outs.push_back({{"k", k},
                      {"probability", pk},
                      {"rounds", c.trials},
                      {"mean_value", sum / static_cast<double>(c.trials)},
                      {"max_value", best},
                      {"above_optimum", above},
                      {"undefined_branches", undefined}});
    }
    j["rounding"] = outs;
  }
  return j;
}

Json gap_section(const sat::Formula& f) {
  const auto gap = sat::unsat_gap(f);
  const auto best = sat::best_assignment(f);
  const auto reg = sat::validate_regularity(f);
  return {{"gap", gap.str()},
          {"gap_float", gap.to_double()},
          {"satisfiable", gap == Rational(0, 1)},
          {"best_assignment", best.str()},
          {"violated", best.violated_count(f)},
          {"occurrences", reg.counts}};
}

Json validate_section(const ExperimentConfig& c, const LoadedFormula& lf) {
  const auto& f = lf.formula;
  const auto reg = sat::validate_regularity(f);
  Json j;
  j["formula"] = {{"regular", reg.regular},
                  {"occurrences", reg.counts},
                  {"irregular_variables", index_list(reg.offending)},
                  {"regular_mode", f.regular_mode()}};
  bool ok = true;
  try {
    const auto s = load_strategy(lf, c.strategy, c.private_dim);
    j["strategy"] = {{"name", s.name()},
                     {"outcomes", s.round1().size()},
                     {"completeness_residual", quantum::check_family_completeness(s.round1())},
                     {"warnings", s.warnings()}};
  } catch (const Error& e) {
    ok = false;
    j["strategy"] = {{"error", e.what()}};
  }
  j["valid"] = ok;
  return j;
}

}  // namespace

// ---- names -----------------------------------------------------------------

std::string command_name(Command c) {
  switch (c) {
    case Command::run: return "run";
    case Command::diagnose: return "diagnose";
    case Command::classical: return "classical";
    case Command::gap: return "gap";
    case Command::validate: return "validate";
  }
  return "run";
}

Command parse_command(std::string_view name) {
  for (auto c : {Command::run, Command::diagnose, Command::classical, Command::gap, Command::validate}) {
    if (command_name(c) == name) return c;
  }
  throw InvalidArgument("unknown command \"" + std::string(name) + "\"");
}

std::string mode_name(Mode m) { return m == Mode::exact ? "exact" : "sampled"; }

Mode parse_mode(std::string_view name) {
  if (name == "exact") return Mode::exact;
  if (name == "sampled") return Mode::sampled;
  throw InvalidArgument("mode must be \"exact\" or \"sampled\", got \"" + std::string(name) + "\"");
}

// ---- config ----------------------------------------------------------------

void validate_config(const ExperimentConfig& c) {
  if (c.formula.empty()) throw InvalidArgument("a formula source is required");
  if (c.private_dim == 0) throw InvalidArgument("the private dimension must be at least 1");
  const bool sampling = c.mode == Mode::sampled && (c.command == Command::run || c.command == Command::classical);
  if (sampling) {
    if (c.trials == 0) throw InvalidArgument("sampled mode needs trials >= 1");
    if (!c.seed) throw InvalidArgument("sampled mode needs a seed");
  }
  diagnostics::Thresholds t;
  for (const auto& [name, value] : c.thresholds) t.set(name, value);
}

ExperimentConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw InvalidArgument("a config must be a JSON object");
  static const std::vector<std::string> known{"command", "formula", "strategy", "mode", "trials", "seed", "d",
                                              "set", "gamma", "out", "transcripts", "posterior_csv", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw InvalidArgument("unknown config key \"" + it.key() + "\"");
    }
  }
  ExperimentConfig c;
  try {
    if (j.contains("command")) c.command = parse_command(j.at("command").get<std::string>());
    if (j.contains("formula")) c.formula = j.at("formula").get<std::string>();
    if (j.contains("strategy")) c.strategy = j.at("strategy").get<std::string>();
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("d")) c.private_dim = j.at("d").get<std::size_t>();
    if (j.contains("set")) {
      for (auto it = j.at("set").begin(); it != j.at("set").end(); ++it) c.thresholds[it.key()] = it.value().get<double>();
    }
    if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("transcripts")) c.transcripts = j.at("transcripts").get<std::string>();
    if (j.contains("posterior_csv")) c.posterior_csv = j.at("posterior_csv").get<std::string>();
    if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad config value: ") + e.what());
  }
  return c;
}

Json config_to_json(const ExperimentConfig& c) {
  Json j{{"command", command_name(c.command)},
         {"formula", c.formula},
         {"strategy", c.strategy},
         {"mode", mode_name(c.mode)},
         {"d", c.private_dim},
         {"set", c.thresholds}};
  if (c.mode == Mode::sampled) {
    j["trials"] = c.trials;
    if (c.seed) j["seed"] = *c.seed;
  }
  if (c.gamma) j["gamma"] = *c.gamma;
  return j;
}

void apply_override(ExperimentConfig& c, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw InvalidArgument("overrides look like name=value, got \"" + std::string(assignment) + "\"");
  }
  const std::string name(assignment.substr(0, eq));
  const double value = parse_double(assignment.substr(eq + 1), "override value");
  diagnostics::Thresholds probe;
  probe.set(name, value);  // rejects unknown names early
  c.thresholds[name] = value;
}

// ---- loading -----------------------------------------------------------------

LoadedFormula load_formula(std::string_view source) {
  const auto parts = split(source, ':');
  const auto& head = parts.front();
  if (head == "planted") {
    if (parts.size() < 3 || parts.size() > 5) throw InvalidArgument("use planted:N:M[:regular][:seed]");
    const auto n = parse_number<std::size_t>(parts[1], "variable count");
    const auto m = parse_number<std::size_t>(parts[2], "clause count");
    bool regular = false;
    std::uint64_t seed = 1;
    for (std::size_t i = 3; i < parts.size(); ++i) {
      if (parts[i] == "regular") {
        regular = true;
      } else {
        seed = parse_number<std::uint64_t>(parts[i], "seed");
      }
    }
    auto [f, t] = sat::generate_planted(seed, n, m, regular);
    return {std::move(f), std::move(t), std::string(source)};
  }
  if (head == "random") {
    if (parts.size() < 3 || parts.size() > 4) throw InvalidArgument("use random:N:M[:seed]");
    const auto n = parse_number<std::size_t>(parts[1], "variable count");
    const auto m = parse_number<std::size_t>(parts[2], "clause count");
    const std::uint64_t seed = parts.size() == 4 ? parse_number<std::uint64_t>(parts[3], "seed") : 1;
    return {sat::generate_random(seed, n, m), std::nullopt, std::string(source)};
  }
  if (head == "patterns") {
    if (parts.size() > 2) throw InvalidArgument("use patterns[:copies]");
    const std::size_t copies = parts.size() == 2 ? parse_number<std::size_t>(parts[1], "copy count") : 1;
    return {sat::all_sign_patterns(copies), std::nullopt, std::string(source)};
  }
  return {sat::parse_formula(read_file(std::string(source))), std::nullopt, std::string(source)};
}

sat::Assignment reference_assignment(const LoadedFormula& lf) {
  if (lf.planted) return *lf.planted;
  return sat::best_assignment(lf.formula);
}

adversary::CompiledStrategy load_strategy(const LoadedFormula& lf, std::string_view spec, std::size_t private_dim) {
  const auto& f = lf.formula;
  if (spec == "honest") return adversary::strategy_honest(f, reference_assignment(lf), private_dim);
  if (spec == "measure_resend") return adversary::strategy_measure_resend(f, reference_assignment(lf), private_dim);
  if (spec == "dephase") return adversary::strategy_dephase(f, reference_assignment(lf), private_dim);
  if (spec == "skewed" || spec.rfind("skewed:", 0) == 0) {
    double p = 2.0;
    std::size_t y1 = 0;
    std::size_t y2 = 1;
    if (spec.size() > 7) {
      for (const auto& kv : split(spec.substr(7), ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw InvalidArgument("skewed parameters look like p=2,y1=0,y2=1");
        const auto key = kv.substr(0, eq);
        const std::string_view value = std::string_view(kv).substr(eq + 1);
        if (key == "p") {
          p = parse_double(value, "p");
        } else if (key == "y1") {
          y1 = parse_number<std::size_t>(value, "y1");
        } else if (key == "y2") {
          y2 = parse_number<std::size_t>(value, "y2");
        } else {
          throw InvalidArgument("unknown skewed parameter \"" + key + "\"");
        }
      }
    }
    return adversary::strategy_skewed(f, p, y1, y2, reference_assignment(lf), private_dim);
  }
  Json j;
  try {
    j = Json::parse(read_file(std::string(spec)));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("strategy file \"" + std::string(spec) + "\" is not valid JSON: " + e.what());
  }
  const auto kind = j.value("kind", std::string());
  const bool needs_fallback = !j.contains("assignment") && kind != "locc" && kind != "custom";
  const auto fallback = needs_fallback ? reference_assignment(lf) : sat::Assignment();
  try {
    return adversary::compile_strategy(f, strategy_spec_from_json(f, j, fallback), private_dim);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad strategy file: ") + e.what());
  }
}

// ---- experiments ---------------------------------------------------------------

Report run_experiment(const ExperimentConfig& c) {
  validate_config(c);
  const auto lf = load_formula(c.formula);
  const auto& f = lf.formula;
  Report report;
  Json& body = report.body;
  body["schema"] = kSchema;
  body["command"] = command_name(c.command);
  body["config"] = config_to_json(c);
  body["formula"] = formula_json(lf);
  Json prov{{"version", kVersion},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"mode", mode_name(c.mode)}};
  const bool sampling = c.mode == Mode::sampled && (c.command == Command::run || c.command == Command::classical);
  if (sampling) prov["seed"] = *c.seed;
  body["provenance"] = prov;

  switch (c.command) {
    case Command::gap: body["gap"] = gap_section(f); break;
    case Command::validate: body["validate"] = validate_section(c, lf); break;
    case Command::run: {
      const auto s = load_strategy(lf, c.strategy, c.private_dim);
      const protocol::ProtocolEngine engine(f, c.private_dim);
      body["strategy"] = {{"name", s.name()}, {"outcomes", s.round1().size()}, {"warnings", s.warnings()}};
      body["run"] = run_section(c, engine, s, report);
      break;
    }
    case Command::diagnose: {
      const auto s = load_strategy(lf, c.strategy, c.private_dim);
      body["strategy"] = {{"name", s.name()}, {"outcomes", s.round1().size()}, {"warnings", s.warnings()}};
      body["diagnose"] = diagnose_section(c, f, s, report);
      break;
    }
    case Command::classical: {
      const auto s = load_strategy(lf, c.strategy, c.private_dim);
      body["strategy"] = {{"name", s.name()}, {"outcomes", s.round1().size()}, {"warnings", s.warnings()}};
      body["classical"] = classical_section(c, f, s);
      break;
    }
  }
  return report;
}

Report run_and_write(const ExperimentConfig& c) {
  auto report = run_experiment(c);
  if (!c.out.empty()) write_file(c.out, report.text());
  if (!c.transcripts.empty() && c.mode == Mode::sampled && c.command == Command::run) {
    write_file(c.transcripts, transcripts_jsonl(report.transcripts));
  }
  if (!c.posterior_csv.empty() && c.command == Command::diagnose) write_file(c.posterior_csv, report.posterior_csv);
  return report;
}

}  // namespace qmip::harness
