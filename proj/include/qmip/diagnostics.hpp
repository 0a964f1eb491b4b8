#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qmip/protocol.hpp"
#include "qmip/quantum.hpp"
#include "qmip/sat.hpp"

namespace qmip::diagnostics {

using protocol::QueryTuple;

// ---- operator weights -----------------------------------------------------

/// Sum of squared magnitudes over the columns of index `y`'s block (all
/// answers, all private values). The identity gives 8 (d = 1); any unitary
/// commuting with the index register gives 8d.
double operator_clause_weight(const sat::Formula& f, const quantum::Operator& a, std::size_t y);
double operator_var_weight(const sat::Formula& f, const quantum::Operator& b, std::size_t x);

/// The same block quantity computed as tr(A (P_y (x) I) A^dag).
double operator_clause_weight_trace(const sat::Formula& f, const quantum::Operator& a, std::size_t y);
double operator_var_weight_trace(const sat::Formula& f, const quantum::Operator& b, std::size_t x);

/// ||A |y,000,0>||^2: the weight that actually enters Pr(k | r).
double input_clause_weight(const sat::Formula& f, const quantum::Operator& a, std::size_t y);
double input_var_weight(const sat::Formula& f, const quantum::Operator& b, std::size_t x);

/// Per-outcome weight profile. A_of / B_of are input-column weights.
struct OutcomeWeights {
  std::size_t k = 0;
  std::vector<double> A_of;
  std::vector<double> B_of;
  std::vector<double> u_of;  // u(c) = sum_{v in c} A(c) B(v)
  double W_A = 0.0;
  double W_B = 0.0;
  double W_tilde = 0.0;
  /// True when every block sum equals (block width) x input weight, i.e. the
  /// literal block weights are proportional to the input weights.
  bool block_uniform = true;
};

OutcomeWeights outcome_weights(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k);

/// Weights from explicit per-clause / per-variable values (synthetic profiles).
OutcomeWeights weights_from_profile(const sat::Formula& f, std::vector<double> a, std::vector<double> b,
                                    std::size_t k = 0);

// ---- posteriors -----------------------------------------------------------

enum class PosteriorConvention {
  normalized,          // single-term degenerate states: side factor A(y) + A(y~) everywhere
  doubled_degenerate,  // literal factors: 4A(y) when y = y~, 4B(x) when x = x~
};

/// Unnormalized Pr(r | k) numerator for the chosen convention.
double posterior_numerator(const OutcomeWeights& w, const QueryTuple& r,
                           PosteriorConvention c = PosteriorConvention::normalized);

/// Sum of numerators over all legal tuples, in closed form.
double posterior_denominator(const sat::Formula& f, const OutcomeWeights& w,
                             PosteriorConvention c = PosteriorConvention::normalized);

/// Throws UndefinedPosterior when the denominator is zero.
double posterior_from_weights(const sat::Formula& f, const OutcomeWeights& w, const QueryTuple& r,
                              PosteriorConvention c = PosteriorConvention::normalized);

double posterior_exact(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k,
                       const QueryTuple& r, PosteriorConvention c = PosteriorConvention::normalized);

/// Pr(r | k) for every tuple of protocol::legal_tuples(f), in that order.
std::vector<double> posterior_table(const sat::Formula& f, const OutcomeWeights& w,
                                    PosteriorConvention c = PosteriorConvention::normalized);

/// (A(y)+A(y~))(B(x)+B(x~)) / (2MN W~ + 22M W_A W_B): the simplified lower
/// bound, which assumes M and N are large.
double posterior_lower_bound(const sat::Formula& f, const OutcomeWeights& w, const QueryTuple& r);

// ---- damage ---------------------------------------------------------------

struct DamageBound {
  double catch_probability = 0.0;     // 1/2 - sqrt(p)/(1+p)
  double fidelity_upper = 1.0;  // 1/2 + sqrt(p)/(1+p)
};

DamageBound damage_bound(double p);

struct DamageCheck {
  double max_fidelity = 0.0;
  sat::Triple best_t_y = 0;
  sat::Triple best_t_y_tilde = 0;
  double ratio = 1.0;  // max(A(y)/A(y~), A(y~)/A(y)), +inf if one side is zero
  double bound = 1.0;  // fidelity_upper(ratio)
};

/// Exact max over all 64 claimed (T(y), T(y~)) of <psi|sigma|psi>, with sigma
/// Alice's returned state after outcome k with the private register traced out.
DamageCheck verify_damage_numerically(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k,
                                      const QueryTuple& r);

// ---- dyadic buckets -------------------------------------------------------

/// Which end of the dyadic interval is closed.
enum class Boundary {
  upper_closed,  // total/2^(i+1) <  value <= total/2^i
  lower_closed,  // total/2^(i+1) <= value <  total/2^i
};

struct Bucketing {
  Boundary boundary = Boundary::upper_closed;
  double total = 0.0;
  std::map<int, std::vector<std::size_t>> buckets;  // index -> items (ascending)
  std::vector<std::size_t> overflow;                // zero-valued items (index "infinity")
  std::vector<double> value_of;                     // indexed by item

  std::optional<int> index_of(std::size_t item) const;
  /// Sum of values / number of items in buckets with index < j (resp. > j;
  /// "> j" includes the overflow bucket).
  double mass_below(int j) const;
  double mass_above(int j) const;
  std::size_t count_below(int j) const;
  std::size_t count_above(int j) const;
  double mass_at(int j) const;
  std::size_t count_at(int j) const;
  std::vector<std::size_t> items_below(int j) const;
  std::vector<std::size_t> items_above(int j) const;
  std::vector<std::size_t> items_at(int j) const;
  int min_index() const;
  int max_index() const;
};

/// Index i with the given boundary convention, computed with exact
/// power-of-two comparisons. Requires value > 0 and total > 0.
int dyadic_index(double value, double total, Boundary b);

Bucketing bucketize(const std::vector<std::size_t>& items, const std::vector<double>& values, double total,
                    Boundary b);

Bucketing bucketize_u(const OutcomeWeights& w);
Bucketing bucketize_T(const OutcomeWeights& w, const std::vector<std::size_t>& clause_set);
Bucketing bucketize_A(const OutcomeWeights& w);
Bucketing bucketize_B(const OutcomeWeights& w);

// ---- regimes and bad sets -------------------------------------------------

/// Named constants of the soundness analysis, with the default values of the soundness argument.
class Thresholds {
 public:
  Thresholds();
  double get(const std::string& name) const;
  /// Throws InvalidArgument for unknown names or non-finite values.
  void set(const std::string& name, double value);
  const std::map<std::string, double>& values() const noexcept { return values_; }

 private:
  std::map<std::string, double> values_;
};

enum class Regime { large, small };
std::string regime_name(Regime r);

Regime regime_classify(const sat::Formula& f, const OutcomeWeights& w, const Thresholds& t = Thresholds());

enum class Construction { large_regime, t_steps, small_clause, bob };
std::string construction_name(Construction c);

struct BadSet {
  Construction construction = Construction::large_regime;
  double p = 1.0;
  int split_index = 0;
  std::vector<QueryTuple> tuples;          // distinct, sorted
  std::size_t construction_count = 0;      // closed-form |D| of the construction
  double probability = 0.0;                // sum of Pr(d | k) over the tuples
  std::size_t inequality_violations = 0;   // tuples failing the construction's damage inequality
};

/// Per-tuple damage inequality of a construction:
///   large_regime  A(y)B(x) > 2 A(y~)B(x~);  t_steps / small_clause  A(y) > 2 A(y~);
///   bob  B(x) > 2 B(x~).
bool damage_inequality_holds(Construction c, const OutcomeWeights& w, const QueryTuple& r);

/// Variable of clause c with the largest (smallest) B, first in clause order on ties.
std::size_t vmax(const sat::Formula& f, const OutcomeWeights& w, std::size_t c);
std::size_t vmin(const sat::Formula& f, const OutcomeWeights& w, std::size_t c);

/// S_up = buckets < j, S_down = buckets > j of bucketize_u; S_down is split by
/// index into a first half S_l (rounded up) and the rest S_r.
/// Every builder throws PremiseFailed when its split index does not satisfy
/// the tail conditions that justify the construction.
BadSet build_bad_set_large(const sat::Formula& f, const OutcomeWeights& w, int j, const Thresholds& t = Thresholds());

/// T_up x T_down x {vmax(c_up)} x V over bucketize_T(w, F).
BadSet build_bad_set_Tsteps(const sat::Formula& f, const OutcomeWeights& w, const std::vector<std::size_t>& F,
                            int j, const Thresholds& t = Thresholds());

/// Union over c in S_up, v in c of {c} x S_down x {v} x V, buckets of bucketize_A.
BadSet build_bad_set_small_clause(const sat::Formula& f, const OutcomeWeights& w, int i, double gamma,
                                  const Thresholds& t = Thresholds());

/// Union over v in T_up, c containing v of {c} x C x {v} x T_down, buckets of bucketize_B.
BadSet build_bad_set_bob(const sat::Formula& f, const OutcomeWeights& w, int i, double gamma,
                         const Thresholds& t = Thresholds());

struct Finding {
  std::string kind;
  std::string message;
  std::optional<std::size_t> k;
};

struct RegimeAnalysis {
  Regime regime = Regime::small;
  std::vector<BadSet> bad_sets;
  std::vector<std::size_t> F;
  std::vector<std::size_t> G;
  std::vector<std::size_t> H;
  bool F_certified = false;
  bool G_certified = false;
  std::vector<Finding> findings;
};

/// Follows the case split of the large-regime argument.
RegimeAnalysis analyze_large(const sat::Formula& f, const OutcomeWeights& w, const Thresholds& t);

/// Follows the case split of the small-regime argument; gamma is the
/// unsatisfiability gap used by the thresholds.
RegimeAnalysis analyze_small(const sat::Formula& f, const OutcomeWeights& w, const Thresholds& t, double gamma);

// ---- overlap bound --------------------------------------------------------

/// 1/2 + sqrt(3 eps)/2 - eps/2, as stated.
double taylor_overlap_bound(double eps);

/// The exact maximum of |<v|w>| given |<u|v>| <= 1/2 and |<u|w>| >= 1 - eps:
/// cos(60 deg - arccos(1 - eps)).
double tight_overlap_bound(double eps);

struct OverlapCheck {
  double eps = 0.0;
  std::size_t samples = 0;
  double max_overlap = 0.0;
  double min_margin = 0.0;        // min of taylor bound - |<v|w>|
  double min_tight_margin = 0.0;  // min of tight bound - |<v|w>|
  std::size_t violations = 0;     // samples with margin < -1e-9
  std::size_t tight_violations = 0;
};

/// Samples unit-vector triples in dimensions [min_dim, max_dim] that satisfy
/// the constraints by construction (u random; v and w rotated away from u by
/// angles drawn uniformly from the admissible ranges, towards random
/// directions orthogonal to u, with a random phase on w).
OverlapCheck verify_overlap_bound(double eps, std::size_t samples, protocol::Rng& rng, std::size_t min_dim = 2,
                                  std::size_t max_dim = 8);

// ---- reports --------------------------------------------------------------

struct OutcomeDiagnostics {
  std::size_t k = 0;
  double probability = 0.0;  // Pr(k) under the uniform query distribution
  OutcomeWeights weights;
  double weight_crosscheck_error = 0.0;  // max |block - trace| over all indices
  double alice_ratio_max = 1.0;          // max/min over positive A(c)
  double bob_ratio_max = 1.0;
  std::size_t alice_zero_weights = 0;
  std::size_t bob_zero_weights = 0;
  Bucketing primary;  // S_i of the regime
  RegimeAnalysis analysis;
  double posterior_sum = 0.0;
  double posterior_checksum = 0.0;  // sum over tuples of (index + 1) * Pr(r | k)
  std::size_t lower_bound_violations = 0;
  double lower_bound_worst_gap = 0.0;  // max of lower_bound - exact
};

struct DiagnosticsReport {
  double gamma = 0.0;
  Thresholds thresholds;
  std::vector<OutcomeDiagnostics> outcomes;
  std::vector<std::size_t> skipped_outcomes;  // zero probability
  std::vector<Finding> findings;
  std::map<std::string, double> constants;  // global soundness constants evaluated at gamma
};

/// Probability of outcomes below which diagnostics skip them.
inline constexpr double kZeroProbability = 1e-12;

DiagnosticsReport diagnose(const sat::Formula& f, const quantum::MeasurementFamily& fam, double gamma,
                           const Thresholds& t = Thresholds());

/// Rows (k, tuple, exact, lower bound) for every diagnosed outcome.
std::string posterior_csv(const sat::Formula& f, const quantum::MeasurementFamily& fam);

}  // namespace qmip::diagnostics
