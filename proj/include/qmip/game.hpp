#pragma once

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "qmip/diagnostics.hpp"
#include "qmip/protocol.hpp"
#include "qmip/rational.hpp"
#include "qmip/sat.hpp"

namespace qmip::game {

/// Charlie answers a clause with three bits, Diana a variable with one.
struct ClassicalStrategy {
  std::vector<sat::Triple> charlie;
  std::vector<bool> diana;

  static ClassicalStrategy from_assignment(const sat::Formula& f, const sat::Assignment& t);
  friend bool operator==(const ClassicalStrategy&, const ClassicalStrategy&) = default;
};

void check_strategy(const sat::Formula& f, const ClassicalStrategy& s);

/// One round: c uniform, v uniform among c's variables; win iff Charlie's
/// triple satisfies c and agrees with Diana on v.
bool game_round(const sat::Formula& f, const ClassicalStrategy& s, protocol::Rng& rng);

/// Exact winning probability: (1 / 3M) * number of winning (c, v) pairs.
Rational strategy_value(const sat::Formula& f, const ClassicalStrategy& s);

struct GameValue {
  Rational value;
  ClassicalStrategy witness;
};

inline constexpr std::size_t kMaxGameVars = 20;

/// Optimum over deterministic strategies: every Diana assignment with
/// Charlie's per-clause best response (smallest triple on ties). Mixed
/// strategies cannot do better because the value is linear in each
/// player's mixture.
GameValue game_value_bruteforce(const sat::Formula& f);

// ---- rounding a quantum outcome to a classical strategy --------------------

struct Rounding {
  ClassicalStrategy strategy;
  std::vector<std::size_t> partner_clause;  // the y~ Charlie sampled for each y
  std::vector<std::size_t> partner_var;     // the x~ Diana sampled for each x
  std::size_t undefined_branches = 0;       // zero-weight simulations, answered with 0 bits
};

/// Charlie and Diana draw their partner indices from independent streams
/// seeded from `rng`, simulate their prover's returned state under outcome k
/// and answer with the claim of highest fidelity (64 claims for Alice, 4 for
/// Bob, fewer when the partner equals the index; smallest claim on ties).
/// Throws UndefinedPosterior if the outcome has probability zero.
Rounding round_quantum_to_classical(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k,
                                    protocol::Rng& rng);

// ---- failure probabilities -------------------------------------------------

struct FailEntry {
  protocol::QueryTuple r;
  double posterior = 0.0;  // Pr(r | k)
  double fail = 0.0;       // 1 - Pr(all checks pass | r, k)
};

/// Entries for every legal tuple with Pr(k | r) > 0, in legal_tuples order.
std::vector<FailEntry> failprob_table(const sat::Formula& f, const protocol::ProverStrategy& s, std::size_t k);

/// Sum over the table of posterior * fail, i.e. 1 - Pr(accept | k).
double expected_failure(const std::vector<FailEntry>& table);

struct FailureSets {
  double l_threshold = 0.0;  // FailProb above this puts (y~, x~) in L(y, x)
  double h_threshold = 0.0;  // |L(y, x)| above this puts y in H_fail
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<std::size_t, std::size_t>>> L;
  std::vector<std::size_t> H_fail;
  std::map<std::size_t, std::size_t> fail_var;  // y in H_fail -> x in y with the largest L(y, x)
};

/// L(y, x) for every clause y and x in y, and H_fail within `h`.
FailureSets failure_sets(const sat::Formula& f, const std::vector<FailEntry>& table, const std::vector<std::size_t>& h,
                         double gamma, const diagnostics::Thresholds& t = diagnostics::Thresholds());

struct RoundingCheck {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps3 = 0.0;
  std::vector<std::size_t> R;
  bool premise_size = false;      // |R| >= (1 - eps1) M
  bool premise_failures = false;  // every y in R, x in y has fewer than eps2 M N failing pairs
  bool premise_eps3 = false;      // eps3 < 1/200
  double predicted = 0.0;         // (1-eps1)(1-eps2)(1-eps3)(1-200 eps3)^2
  double estimated = 0.0;         // mean exact value of sampled roundings
  double std_error = 0.0;
  std::size_t rounds = 0;
  bool premises_hold() const noexcept { return premise_size && premise_failures && premise_eps3; }
  /// estimated >= predicted - 3 std_error (only meaningful when premises hold).
  bool consistent() const noexcept { return estimated >= predicted - 3.0 * std_error; }
};

/// Evaluates the rounding guarantee for outcome k and clause set R: checks
/// its premises and compares the predicted value against `rounds` sampled
/// roundings. Reported, not asserted.
RoundingCheck check_rounding(const sat::Formula& f, const protocol::ProverStrategy& s, std::size_t k,
                             const std::vector<std::size_t>& R, double gamma, std::size_t rounds, protocol::Rng& rng,
                             const diagnostics::Thresholds& t = diagnostics::Thresholds());

}  // namespace qmip::game
