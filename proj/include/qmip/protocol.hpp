#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qmip/quantum.hpp"
#include "qmip/sat.hpp"

namespace qmip::protocol {

using Rng = std::mt19937_64;

/// Independent per-trial stream derived from (seed, index).
Rng trial_stream(std::uint64_t seed, std::uint64_t index);

/// The verifier's query r = (y, y~, x, x~). Legal iff x occurs in y.
struct QueryTuple {
  std::size_t y = 0;
  std::size_t y_tilde = 0;
  std::size_t x = 0;
  std::size_t x_tilde = 0;

  friend bool operator==(const QueryTuple&, const QueryTuple&) = default;
  friend auto operator<=>(const QueryTuple&, const QueryTuple&) = default;
};

bool is_legal(const sat::Formula& f, const QueryTuple& r);
void check_legal(const sat::Formula& f, const QueryTuple& r);

/// All 3 M^2 N legal tuples in lexicographic (y, y~, x, x~) order.
std::vector<QueryTuple> legal_tuples(const sat::Formula& f);

/// One prover's registers: the verifier's copy of the index, the message
/// (index (x) answer) and the private register.
struct SideLayout {
  std::size_t index_count = 0;  // M for Alice, N for Bob
  std::size_t answer_dim = 0;   // 8 for Alice, 2 for Bob
  std::size_t private_dim = 1;

  std::size_t message_dim() const noexcept { return index_count * answer_dim; }
  /// Dimension of message (x) private: the space A_k / B_k act on.
  std::size_t operator_dim() const noexcept { return index_count * answer_dim * private_dim; }
  std::size_t column(std::size_t index, std::size_t answer, std::size_t p = 0) const noexcept {
    return (index * answer_dim + answer) * private_dim + p;
  }
  quantum::Dims operator_dims() const { return {index_count, answer_dim, private_dim}; }
  /// verifier (x) message index (x) answer (x) private
  quantum::Dims full_dims() const { return {index_count, index_count, answer_dim, private_dim}; }
  /// verifier (x) message index (x) answer: the space the SWAP test sees.
  quantum::Dims swap_dims() const { return {index_count, index_count, answer_dim}; }
};

struct RegisterLayout {
  SideLayout alice;
  SideLayout bob;

  static RegisterLayout of(const sat::Formula& f, std::size_t private_dim);
};

/// Alice's eight round-2 bits: T(y), T(y~) as triples, T(x), T(x~).
struct ClaimedBits {
  sat::Triple t_y = 0;
  sat::Triple t_y_tilde = 0;
  bool t_x = false;
  bool t_x_tilde = false;

  /// Throws ProtocolError unless exactly eight 0/1 values are given.
  static ClaimedBits from_bits(std::span<const std::uint8_t> bits);
  static ClaimedBits from_packed(std::uint8_t packed);
  std::uint8_t packed() const noexcept;
  std::vector<std::uint8_t> bits() const;
  std::string str() const;

  friend bool operator==(const ClaimedBits&, const ClaimedBits&) = default;
};

ClaimedBits honest_claim(const sat::Formula& f, const sat::Assignment& t, const QueryTuple& r);

// ---- states and honest provers --------------------------------------------

QueryTuple sample_pi(const sat::Formula& f, Rng& rng);

/// Round-1 states on verifier (x) message (x) private for each prover. The
/// degenerate tuples y = y~ (x = x~) give single normalized basis states.
std::pair<quantum::StateVector, quantum::StateVector> build_round1_states(const sat::Formula& f,
                                                                         const QueryTuple& r,
                                                                         std::size_t private_dim);

/// Permutation unitaries |c,a,p> -> |c, a xor T(c), p> and |v,b,p> -> |v, b xor T(v), p>.
std::pair<quantum::Operator, quantum::Operator> honest_prover_unitaries(const sat::Formula& f,
                                                                       const sat::Assignment& t,
                                                                       std::size_t private_dim);

/// SWAP-test references on verifier (x) message. Empty when the claim is
/// self-contradictory (y = y~ with T(y) != T(y~), or x = x~ with T(x) != T(x~)).
std::optional<std::pair<quantum::StateVector, quantum::StateVector>> reference_states(const sat::Formula& f,
                                                                                     const QueryTuple& r,
                                                                                     const ClaimedBits& bits);

// ---- post-measurement branches --------------------------------------------

/// One prover's returned state after operator `op` acted on the round-1
/// state for verifier indices (i0, i1):
///   (|i0> (x) op|i0,0,0> + |i1> (x) op|i1,0,0>) / sqrt2   (single term if i0 = i1)
/// Only the two operator columns are stored.
class SideBranch {
 public:
  SideBranch(const quantum::Operator& op, const SideLayout& layout, std::size_t i0, std::size_t i1);

  /// ||(I (x) op) state||^2, this side's factor of Pr(k | r).
  double weight() const noexcept { return weight_; }
  bool degenerate() const noexcept { return i0_ == i1_; }

  /// Normalized <psi| tr_private(state) |psi> for the reference with answers
  /// (a0 at i0, a1 at i1). Requires weight() > 0 and a0 == a1 when degenerate.
  double reduced_fidelity(std::size_t a0, std::size_t a1) const;

  /// Full (unnormalized) state on verifier (x) message (x) private.
  quantum::StateVector state() const;

 private:
  SideLayout layout_;
  std::size_t i0_;
  std::size_t i1_;
  quantum::Vector col0_;
  quantum::Vector col1_;
  double weight_;
};

/// Pass probabilities of the four verifier checks for one (r, k, claim).
struct CheckProbabilities {
  bool clause_satisfied = false;
  bool consistent = false;
  bool auto_reject = false;  // self-contradictory degenerate claim
  double swap_alice = 0.0;
  double swap_bob = 0.0;

  double pass() const noexcept {
    return (clause_satisfied && consistent && !auto_reject) ? swap_alice * swap_bob : 0.0;
  }
};

CheckProbabilities evaluate_checks(const sat::Formula& f, const QueryTuple& r, const SideBranch& alice,
                                   const SideBranch& bob, const ClaimedBits& claim);

/// The claim maximizing the exact acceptance probability for (r, k) when the
/// outcome and query are both known; ties go to the smallest packed value.
ClaimedBits best_response_claim(const sat::Formula& f, const quantum::MeasurementFamily& fam,
                                const QueryTuple& r, std::size_t k);

// ---- strategies and transcripts -------------------------------------------

/// Adversary abstraction: a joint separable round-1 action and a
/// deterministic round-2 answer rule on (r, k).
class ProverStrategy {
 public:
  virtual ~ProverStrategy() = default;
  virtual const quantum::MeasurementFamily& round1() const = 0;
  /// Eight 0/1 values; anything else makes the run fail with ProtocolError.
  virtual std::vector<std::uint8_t> round2(const QueryTuple& r, std::size_t k) const = 0;
};

struct Checks {
  bool clause_satisfied = false;
  bool consistency = false;
  bool swap_alice_pass = false;
  bool swap_bob_pass = false;

  bool all() const noexcept { return clause_satisfied && consistency && swap_alice_pass && swap_bob_pass; }
};

struct Transcript {
  QueryTuple query;
  std::size_t outcome = 0;
  ClaimedBits round2;
  Checks checks;
  bool accept = false;
};

struct TrialSummary {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::size_t accepted = 0;
  std::size_t clause_failures = 0;
  std::size_t consistency_failures = 0;
  std::size_t swap_alice_failures = 0;
  std::size_t swap_bob_failures = 0;
  std::size_t distinct_clause_trials = 0;  // y != y~
  std::size_t distinct_clause_swap_alice_failures = 0;

  double accept_rate() const noexcept { return trials ? static_cast<double>(accepted) / trials : 0.0; }
};

struct ExactResult {
  double accept = 0.0;
  double clause_failure = 0.0;
  double consistency_failure = 0.0;
  double swap_alice_failure = 0.0;
  double swap_bob_failure = 0.0;
  /// Pr(Alice's SWAP test passes | y != y~).
  double swap_alice_pass_given_distinct = 1.0;
  std::vector<double> outcome_probability;        // Pr(k)
  std::vector<double> accept_given_outcome;       // Pr(accept | k), NaN when Pr(k) = 0
};

inline constexpr std::size_t kDefaultPrivateDim = 2;
inline constexpr std::size_t kMaxExactWork = 50'000'000;

/// The verifier for a fixed formula and private dimension. Immutable and
/// safe to share between threads.
class ProtocolEngine {
 public:
  ProtocolEngine(sat::Formula f, std::size_t private_dim = kDefaultPrivateDim);

  const sat::Formula& formula() const noexcept { return f_; }
  std::size_t private_dim() const noexcept { return d_; }
  const RegisterLayout& layout() const noexcept { return layout_; }

  /// Throws unless the family's operators fit this layout.
  void check_family(const quantum::MeasurementFamily& fam) const;

  /// Pr(k | r) for every outcome, from exact branch norms.
  std::vector<double> outcome_probabilities(const quantum::MeasurementFamily& fam, const QueryTuple& r) const;

  Transcript run(const ProverStrategy& s, Rng& rng) const;

  /// Trials use trial_stream(seed, i); transcripts are appended in trial order.
  TrialSummary run_trials(const ProverStrategy& s, std::uint64_t seed, std::size_t trials,
                          std::vector<Transcript>* transcripts = nullptr, unsigned threads = 0) const;

  ExactResult run_exact(const ProverStrategy& s) const;
  double acceptance_exact(const ProverStrategy& s) const { return run_exact(s).accept; }

  /// Pr(r | k) over legal_tuples(), by Bayes with the verifier measuring first.
  std::vector<double> posterior_measure_first(const quantum::MeasurementFamily& fam, std::size_t k) const;

 private:
  sat::Formula f_;
  std::size_t d_;
  RegisterLayout layout_;
  std::vector<QueryTuple> tuples_;
};

// ---- purified protocol ----------------------------------------------------

enum class DegenerateConvention {
  normalized,          // single-term states for y = y~ / x = x~, uniform prior
  doubled_degenerate,  // literal (|yy> + |y~y~>)/sqrt2 factors, globally renormalized
};

struct PurifiedTerm {
  QueryTuple r;
  double amplitude = 0.0;
  quantum::StateVector alice;
  quantum::StateVector bob;
};

/// psi_pi kept as one product factor pair per legal tuple (the auxiliary
/// register is orthogonal across tuples, so nothing else is needed).
struct FactoredPurifiedState {
  std::vector<PurifiedTerm> terms;
  double squared_norm() const;
};

FactoredPurifiedState build_purified_state(const sat::Formula& f, std::size_t private_dim,
                                           DegenerateConvention convention = DegenerateConvention::normalized);

}  // namespace qmip::protocol
