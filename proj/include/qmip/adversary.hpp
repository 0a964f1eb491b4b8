#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "qmip/protocol.hpp"
#include "qmip/quantum.hpp"
#include "qmip/sat.hpp"

namespace qmip::adversary {

enum class Party { alice, bob };

/// One round of an LOCC script: `party` applies a local instrument whose
/// Kraus operators act on its message (x) private space, then broadcasts the
/// outcome. `next` is empty (script ends), holds one node (same continuation
/// for every outcome) or one node per operator (outcome-conditioned).
struct LoccNode {
  Party party = Party::alice;
  std::vector<quantum::Matrix> operators;
  std::vector<LoccNode> next;
};

struct LoccScript {
  std::size_t private_dim = 1;
  LoccNode root;
};

/// One outcome per classical transcript, in depth-first order. A_k and B_k
/// are the ordered products of each party's operators along the transcript
/// (later operators on the left). Throws InvalidArgument when a round is not
/// locally complete and DimensionMismatch when an operator has the wrong size.
quantum::MeasurementFamily compile_locc_to_separable(const sat::Formula& f, const LoccScript& script);

/// How Alice's eight round-2 bits are produced from (r, k).
struct Round2Rule {
  enum class Kind {
    assignment,     // true bits of one fixed assignment
    per_outcome,    // true bits of assignments[k]
    best_response,  // protocol::best_response_claim
  };
  Kind kind = Kind::best_response;
  std::vector<sat::Assignment> assignments;

  static Round2Rule fixed(sat::Assignment t) { return {Kind::assignment, {std::move(t)}}; }
  static Round2Rule best() { return {Kind::best_response, {}}; }
};

struct StrategySpec {
  enum class Kind { honest, measure_resend, skewed, dephase, locc, custom };
  Kind kind = Kind::honest;
  sat::Assignment assignment;  // honest / fallback / embedded assignment
  double p = 1.0;              // skewed
  std::size_t y1 = 0;          // skewed: the heavier clause
  std::size_t y2 = 1;          // skewed: the damped clause
  LoccScript script;           // locc
  quantum::MeasurementFamily family;  // custom
  Round2Rule round2;                  // locc / custom
};

std::string kind_name(StrategySpec::Kind kind);

/// A strategy ready to run: a complete separable family and its round-2 rule.
/// The constructor throws DimensionMismatch when the family does not fit the
/// formula and InvalidArgument when it is incomplete or the rule does not fit.
class CompiledStrategy final : public protocol::ProverStrategy {
 public:
  CompiledStrategy(sat::Formula f, quantum::MeasurementFamily fam, Round2Rule rule, std::string name);

  const quantum::MeasurementFamily& round1() const override { return fam_; }
  std::vector<std::uint8_t> round2(const protocol::QueryTuple& r, std::size_t k) const override;

  const std::string& name() const noexcept { return name_; }
  const Round2Rule& rule() const noexcept { return rule_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  sat::Formula f_;
  quantum::MeasurementFamily fam_;
  Round2Rule rule_;
  std::string name_;
  std::vector<std::string> warnings_;
};

/// Completeness residual a compiled family may have.
inline constexpr double kCompletenessTolerance = 1e-9;

/// Builds the strategy; throws InvalidArgument if the family is incomplete.
CompiledStrategy compile_strategy(const sat::Formula& f, const StrategySpec& spec, std::size_t private_dim);

CompiledStrategy strategy_honest(const sat::Formula& f, const sat::Assignment& t, std::size_t private_dim);

/// Both provers measure their index registers, Alice broadcasts her clause,
/// both write answers consistent with a satisfying completion of the fallback
/// assignment, and round 2 is the best response.
CompiledStrategy strategy_measure_resend(const sat::Formula& f, const sat::Assignment& fallback,
                                         std::size_t private_dim);

/// Two outcomes; outcome 0 damps clause y2's block by 1/sqrt(p) so that its
/// weight ratio A_0(y1)/A_0(y2) is exactly p. Bob applies the honest unitary.
CompiledStrategy strategy_skewed(const sat::Formula& f, double p, std::size_t y1, std::size_t y2,
                                 const sat::Assignment& t, std::size_t private_dim);

/// Honest answers plus a copy of the clause index into the private register
/// (needs private_dim >= M): Alice's returned state is fully dephased.
CompiledStrategy strategy_dephase(const sat::Formula& f, const sat::Assignment& t, std::size_t private_dim);

// ---- random families ------------------------------------------------------

/// Haar-ish random unitary from the QR decomposition of a complex Gaussian.
quantum::Matrix random_unitary(std::size_t dim, protocol::Rng& rng);

/// Complex Gaussian matrix with unit-variance entries.
quantum::Matrix random_gaussian(std::size_t rows, std::size_t cols, protocol::Rng& rng);

/// Two-outcome skewed family built from a random contraction: outcome 0's
/// weight ratio between clauses y1 and y2 is exactly p, outcome 1 completes
/// the instrument, and Bob applies the honest unitary.
quantum::MeasurementFamily random_skewed_family(const sat::Formula& f, double p, std::size_t y1, std::size_t y2,
                                                const sat::Assignment& t, std::size_t private_dim,
                                                protocol::Rng& rng);

/// Random two-round script: Alice applies a random 2-outcome instrument, then
/// Bob applies a random 1- or 2-outcome instrument chosen per Alice outcome.
LoccScript random_locc_script(const sat::Formula& f, std::size_t private_dim, protocol::Rng& rng);

quantum::MeasurementFamily random_separable_family(const sat::Formula& f, std::size_t private_dim,
                                                   protocol::Rng& rng);

}  // namespace qmip::adversary
