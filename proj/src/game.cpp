#include "qmip/game.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "qmip/error.hpp"

namespace qmip::game {

using protocol::QueryTuple;
using protocol::SideBranch;

ClassicalStrategy ClassicalStrategy::from_assignment(const sat::Formula& f, const sat::Assignment& t) {
  sat::check_compatible(f, t);
  ClassicalStrategy s;
  for (std::size_t c = 0; c < f.num_clauses(); ++c) s.charlie.push_back(t.triple(f, c));
  s.diana = t.bits();
  return s;
}

void check_strategy(const sat::Formula& f, const ClassicalStrategy& s) {
  if (s.charlie.size() != f.num_clauses() || s.diana.size() != f.num_vars()) {
    throw InvalidArgument("classical strategy must answer every clause and every variable");
  }
  for (auto t : s.charlie) {
    if (t > 7) throw InvalidArgument("Charlie's answers must be 3-bit values");
  }
}

namespace {

bool wins(const sat::Formula& f, const ClassicalStrategy& s, std::size_t c, std::size_t pos) {
  const auto t = s.charlie[c];
  return f.satisfied_by(c, t) && sat::triple_bit(t, pos) == s.diana[f.clause(c)[pos].var];
}

}  // namespace

bool game_round(const sat::Formula& f, const ClassicalStrategy& s, protocol::Rng& rng) {
  check_strategy(f, s);
  std::uniform_int_distribution<std::size_t> clause(0, f.num_clauses() - 1);
  std::uniform_int_distribution<std::size_t> position(0, 2);
  const auto c = clause(rng);
  return wins(f, s, c, position(rng));
}

Rational strategy_value(const sat::Formula& f, const ClassicalStrategy& s) {
  check_strategy(f, s);
  std::int64_t won = 0;
  for (std::size_t c = 0; c < f.num_clauses(); ++c) {
    for (std::size_t pos = 0; pos < 3; ++pos) won += wins(f, s, c, pos) ? 1 : 0;
  }
  return Rational(won, static_cast<std::int64_t>(3 * f.num_clauses()));
}

GameValue game_value_bruteforce(const sat::Formula& f) {
  const std::size_t n = f.num_vars();
  if (n > kMaxGameVars) {
    throw InstanceTooLarge("game value enumeration needs N <= " + std::to_string(kMaxGameVars) + ", got " +
                           std::to_string(n));
  }
  const std::size_t m = f.num_clauses();
  // For Diana's bits t on clause c: Charlie's best agreement and his answer.
  std::vector<std::array<int, 8>> best(m);
  std::vector<std::array<sat::Triple, 8>> reply(m);
  for (std::size_t c = 0; c < m; ++c) {
    for (unsigned t = 0; t < 8; ++t) {
      best[c][t] = -1;
      for (unsigned s = 0; s < 8; ++s) {
        if (!f.satisfied_by(c, static_cast<sat::Triple>(s))) continue;
        const int agree = 3 - __builtin_popcount(s ^ t);
        if (agree > best[c][t]) {
          best[c][t] = agree;
          reply[c][t] = static_cast<sat::Triple>(s);
        }
      }
    }
  }
  std::int64_t top = -1;
  std::uint64_t arg = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    std::int64_t total = 0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& cl = f.clause(c);
      const unsigned t = static_cast<unsigned>(((mask >> cl[0].var) & 1U) << 2 | ((mask >> cl[1].var) & 1U) << 1 |
                                               ((mask >> cl[2].var) & 1U));
      total += best[c][t];
    }
    if (total > top) {
      top = total;
      arg = mask;
    }
  }
  GameValue g;
  g.value = Rational(top, static_cast<std::int64_t>(3 * m));
  g.witness.diana.resize(n);
  for (std::size_t v = 0; v < n; ++v) g.witness.diana[v] = ((arg >> v) & 1U) != 0;
  for (std::size_t c = 0; c < m; ++c) {
    const auto& cl = f.clause(c);
    const unsigned t = (g.witness.diana[cl[0].var] ? 4U : 0U) | (g.witness.diana[cl[1].var] ? 2U : 0U) |
                       (g.witness.diana[cl[2].var] ? 1U : 0U);
    g.witness.charlie.push_back(reply[c][t]);
  }
  return g;
}

// ---- rounding -------------------------------------------------------------

Rounding round_quantum_to_classical(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k,
                                    protocol::Rng& rng) {
  if (k >= fam.size()) throw InvalidArgument("outcome index out of range");
  const auto w = diagnostics::outcome_weights(f, fam, k);
  if (!(diagnostics::posterior_denominator(f, w) > 0.0)) {
    throw UndefinedPosterior("outcome " + std::to_string(k) + " has probability zero");
  }
  const auto layout = protocol::RegisterLayout::of(f, fam.private_dim);
  // Independent private streams for the two players.
  protocol::Rng charlie_rng(rng());
  protocol::Rng diana_rng(rng());

  Rounding out;
  std::uniform_int_distribution<std::size_t> clause(0, f.num_clauses() - 1);
  for (std::size_t y = 0; y < f.num_clauses(); ++y) {
    const auto yt = clause(charlie_rng);
    out.partner_clause.push_back(yt);
    const SideBranch branch(fam.outcomes[k].alice, layout.alice, y, yt);
    sat::Triple pick = 0;
    if (branch.weight() > 0.0) {
      double top = -1.0;
      for (std::size_t a0 = 0; a0 < 8; ++a0) {
        for (std::size_t a1 = 0; a1 < 8; ++a1) {
          if (branch.degenerate() && a0 != a1) continue;
          const double fid = branch.reduced_fidelity(a0, a1);
          if (fid > top) {
            top = fid;
            pick = static_cast<sat::Triple>(a0);
          }
        }
      }
    } else {
      ++out.undefined_branches;
    }
    out.strategy.charlie.push_back(pick);
  }
  std::uniform_int_distribution<std::size_t> variable(0, f.num_vars() - 1);
  for (std::size_t x = 0; x < f.num_vars(); ++x) {
    const auto xt = variable(diana_rng);
    out.partner_var.push_back(xt);
    const SideBranch branch(fam.outcomes[k].bob, layout.bob, x, xt);
    bool pick = false;
    if (branch.weight() > 0.0) {
      double top = -1.0;
      for (std::size_t b0 = 0; b0 < 2; ++b0) {
        for (std::size_t b1 = 0; b1 < 2; ++b1) {
          if (branch.degenerate() && b0 != b1) continue;
          const double fid = branch.reduced_fidelity(b0, b1);
          if (fid > top) {
            top = fid;
            pick = b0 == 1;
          }
        }
      }
    } else {
      ++out.undefined_branches;
    }
    out.strategy.diana.push_back(pick);
  }
  return out;
}

// ---- failure probabilities ------------------------------------------------

std::vector<FailEntry> failprob_table(const sat::Formula& f, const protocol::ProverStrategy& s, std::size_t k) {
  const auto& fam = s.round1();
  protocol::ProtocolEngine(f, fam.private_dim).check_family(fam);
  if (k >= fam.size()) throw InvalidArgument("outcome index out of range");
  const auto w = diagnostics::outcome_weights(f, fam, k);
  const double den = diagnostics::posterior_denominator(f, w);
  if (!(den > 0.0)) throw UndefinedPosterior("outcome " + std::to_string(k) + " has probability zero");
  const auto layout = protocol::RegisterLayout::of(f, fam.private_dim);
  std::vector<FailEntry> out;
  for (const auto& r : protocol::legal_tuples(f)) {
    const SideBranch a(fam.outcomes[k].alice, layout.alice, r.y, r.y_tilde);
    const SideBranch b(fam.outcomes[k].bob, layout.bob, r.x, r.x_tilde);
    if (!(a.weight() * b.weight() > 0.0)) continue;
    const auto claim = protocol::ClaimedBits::from_bits(s.round2(r, k));
    const auto cp = protocol::evaluate_checks(f, r, a, b, claim);
    out.push_back({r, diagnostics::posterior_numerator(w, r) / den, 1.0 - cp.pass()});
  }
  return out;
}

double expected_failure(const std::vector<FailEntry>& table) {
  double s = 0.0;
  for (const auto& e : table) s += e.posterior * e.fail;
  return s;
}

FailureSets failure_sets(const sat::Formula& f, const std::vector<FailEntry>& table, const std::vector<std::size_t>& h,
                         double gamma, const diagnostics::Thresholds& t) {
  FailureSets out;
  out.l_threshold = t.get("failprob_threshold") * gamma;
  out.h_threshold = t.get("hfail_threshold") * gamma * static_cast<double>(f.num_vars() * f.num_clauses());
  for (std::size_t y = 0; y < f.num_clauses(); ++y) {
    for (const auto& lit : f.clause(y)) out.L[{y, lit.var}];
  }
  for (const auto& e : table) {
    if (e.fail > out.l_threshold) out.L[{e.r.y, e.r.x}].push_back({e.r.y_tilde, e.r.x_tilde});
  }
  for (auto y : h) {
    if (y >= f.num_clauses()) throw InvalidArgument("clause index out of range");
    std::size_t best_x = f.clause(y)[0].var;
    std::size_t best_n = 0;
    bool fails = false;
    for (const auto& lit : f.clause(y)) {
      const auto n = out.L[{y, lit.var}].size();
      if (static_cast<double>(n) > out.h_threshold) fails = true;
      if (n > best_n) {
        best_n = n;
        best_x = lit.var;
      }
    }
    if (fails) {
      out.H_fail.push_back(y);
      out.fail_var[y] = best_x;
    }
  }
  return out;
}

RoundingCheck check_rounding(const sat::Formula& f, const protocol::ProverStrategy& s, std::size_t k,
                             const std::vector<std::size_t>& R, double gamma, std::size_t rounds, protocol::Rng& rng,
                             const diagnostics::Thresholds& t) {
  if (rounds == 0) throw InvalidArgument("rounds must be at least 1");
  RoundingCheck out;
  out.eps1 = t.get("eps1_factor") * gamma;
  out.eps2 = t.get("eps2_factor") * gamma;
  out.eps3 = t.get("eps3_factor") * gamma;
  out.R = R;
  out.rounds = rounds;
  const double m = static_cast<double>(f.num_clauses());
  const double n = static_cast<double>(f.num_vars());
  out.premise_size = static_cast<double>(R.size()) >= (1.0 - out.eps1) * m;
  out.premise_eps3 = out.eps3 < 1.0 / 200.0;

  const auto table = failprob_table(f, s, k);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> failing;
  for (const auto& e : table) {
    if (e.fail > out.eps3) ++failing[{e.r.y, e.r.x}];
  }
  out.premise_failures = true;
  for (auto y : R) {
    for (const auto& lit : f.clause(y)) {
      if (!(static_cast<double>(failing[{y, lit.var}]) < out.eps2 * m * n)) out.premise_failures = false;
    }
  }
  out.predicted = (1.0 - out.eps1) * (1.0 - out.eps2) * (1.0 - out.eps3) * std::pow(1.0 - 200.0 * out.eps3, 2);

  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < rounds; ++i) {
    const auto rounding = round_quantum_to_classical(f, s.round1(), k, rng);
    const double v = strategy_value(f, rounding.strategy).to_double();
    sum += v;
    sum_sq += v * v;
  }
  const double rn = static_cast<double>(rounds);
  out.estimated = sum / rn;
  const double var = rounds > 1 ? std::max(0.0, (sum_sq - rn * out.estimated * out.estimated) / (rn - 1.0)) : 0.0;
  out.std_error = std::sqrt(var / rn);
  return out;
}

}  // namespace qmip::game
