#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "qmip/adversary.hpp"
#include "qmip/diagnostics.hpp"
#include "qmip/error.hpp"

using namespace qmip;
using namespace qmip::adversary;
using quantum::Matrix;

namespace {

Matrix scaled_identity(std::size_t n, double s) {
  return Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) * s;
}

}  // namespace

TEST_CASE("random unitaries are unitary") {
  protocol::Rng rng(1);
  for (std::size_t n : {1, 2, 7, 16}) {
    const auto u = random_unitary(n, rng);
    CHECK((u.adjoint() * u - scaled_identity(n, 1.0)).norm() < 1e-12);
  }
}

TEST_CASE("LOCC scripts compile to complete separable families in transcript order") {
  const auto [f, t] = fixture::small_planted(1);
  const auto layout = protocol::RegisterLayout::of(f, 1);
  const auto da = layout.alice.operator_dim();
  const auto db = layout.bob.operator_dim();
  protocol::Rng rng(2);
  const auto ub = random_unitary(db, rng);

  LoccScript s;
  s.private_dim = 1;
  s.root.party = Party::alice;
  s.root.operators = {scaled_identity(da, std::sqrt(0.25)), scaled_identity(da, std::sqrt(0.75))};
  LoccNode bob_split{Party::bob, {scaled_identity(db, std::sqrt(0.5)), scaled_identity(db, std::sqrt(0.5))}, {}};
  LoccNode bob_rotate{Party::bob, {ub}, {}};
  s.root.next = {bob_split, bob_rotate};

  const auto fam = compile_locc_to_separable(f, s);
  REQUIRE(fam.size() == 3);
  CHECK(quantum::check_family_completeness(fam) < 1e-12);
  CHECK(std::abs(fam.outcomes[0].alice.matrix()(0, 0).real() - 0.5) < 1e-15);
  CHECK((fam.outcomes[2].bob.matrix() - ub).norm() < 1e-15);

  SUBCASE("later operators multiply on the left") {
    LoccScript two = s;
    const auto ua = random_unitary(da, rng);
    two.root.operators = {scaled_identity(da, 1.0)};
    two.root.next = {LoccNode{Party::alice, {ua}, {LoccNode{Party::bob, {ub}, {}}}}};
    const auto g = compile_locc_to_separable(f, two);
    REQUIRE(g.size() == 1);
    CHECK((g.outcomes[0].alice.matrix() - ua).norm() < 1e-15);
  }
  SUBCASE("incomplete rounds are rejected") {
    LoccScript bad = s;
    bad.root.operators[1] = scaled_identity(da, 0.5);
    CHECK_THROWS_AS(compile_locc_to_separable(f, bad), InvalidArgument);
  }
  SUBCASE("operators of the wrong size are rejected") {
    LoccScript bad = s;
    bad.root.next[1].operators = {scaled_identity(db + 1, 1.0)};
    CHECK_THROWS_AS(compile_locc_to_separable(f, bad), DimensionMismatch);
  }
  SUBCASE("continuations must match the outcome count") {
    LoccScript bad = s;
    bad.root.next.push_back(bob_rotate);
    CHECK_THROWS_AS(compile_locc_to_separable(f, bad), InvalidArgument);
  }
}

TEST_CASE("random separable families are complete with at most four outcomes") {
  const auto [f, t] = fixture::small_planted(3);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto fam = fixture::small_family(f, 1 + seed % 2, seed);
    CHECK(fam.size() >= 2);
    CHECK(fam.size() <= 4);
    CHECK(quantum::check_family_completeness(fam) < kCompletenessTolerance);
  }
}

TEST_CASE("incomplete custom families are refused") {
  const auto [f, t] = fixture::small_planted(3);
  auto fam = strategy_honest(f, t, 1).round1();
  fam.outcomes[0] = {quantum::Operator(fam.outcomes[0].alice.matrix() * 0.9, fam.outcomes[0].alice.dims()),
                     fam.outcomes[0].bob};
  CHECK_THROWS_AS(CompiledStrategy(f, fam, Round2Rule::best(), "bad"), InvalidArgument);
  StrategySpec spec;
  spec.kind = StrategySpec::Kind::custom;
  spec.family = fam;
  CHECK_THROWS_AS(compile_strategy(f, spec, 1), InvalidArgument);
}

TEST_CASE("round-2 rules produce the requested answers") {
  const auto [f, t] = fixture::small_planted(4);
  const auto s = strategy_honest(f, t, 2);
  const protocol::QueryTuple r{1, 3, f.clause(1)[2].var, 0};
  CHECK(protocol::ClaimedBits::from_bits(s.round2(r, 0)) == protocol::honest_claim(f, t, r));
  Round2Rule per{Round2Rule::Kind::per_outcome, {t}};
  CHECK_THROWS_AS(CompiledStrategy(f, strategy_honest(f, t, 1).round1(), Round2Rule{Round2Rule::Kind::per_outcome, {}},
                                   "x"),
                  InvalidArgument);
  (void)per;
}

TEST_CASE("honest strategies with a violating assignment carry a warning") {
  const auto f = sat::all_sign_patterns();
  const auto s = strategy_honest(f, sat::Assignment::from_string("000"), 1);
  CHECK(s.warnings().size() == 1);
}

TEST_CASE("measure-and-resend passes Alice's SWAP test on distinct clauses with probability 3/4") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto [f, t] = fixture::small_planted(seed);
    const protocol::ProtocolEngine engine(f, 2);
    const auto s = strategy_measure_resend(f, t, 2);
    CHECK(quantum::check_family_completeness(s.round1()) < 1e-12);
    const auto exact = engine.run_exact(s);
    CHECK(std::abs(exact.swap_alice_pass_given_distinct - 0.75) < 1e-12);
  }
}

TEST_CASE("skewed strategies realize the requested weight ratio") {
  const auto [f, t] = fixture::small_planted(5);
  for (double p : {1.0, 1.5, 2.0, 16.0}) {
    const auto s = strategy_skewed(f, p, 0, 3, t, 2);
    CHECK(quantum::check_family_completeness(s.round1()) < 1e-9);
    const auto& a = s.round1().outcomes[0].alice;
    const double ratio = diagnostics::input_clause_weight(f, a, 0) / diagnostics::input_clause_weight(f, a, 3);
    CHECK(std::abs(ratio - p) < 1e-9 * p);

    protocol::Rng rng(static_cast<std::uint64_t>(p * 10));
    const auto fam = random_skewed_family(f, p, 2, 1, t, 2, rng);
    CHECK(quantum::check_family_completeness(fam) < 1e-9);
    const auto& ar = fam.outcomes[0].alice;
    const double rr = diagnostics::input_clause_weight(f, ar, 2) / diagnostics::input_clause_weight(f, ar, 1);
    CHECK(std::abs(rr - p) < 1e-9 * p);
  }
  CHECK_THROWS_AS(strategy_skewed(f, 0.5, 0, 1, t, 1), InvalidArgument);
  CHECK_THROWS_AS(strategy_skewed(f, std::numeric_limits<double>::infinity(), 0, 1, t, 1), InvalidArgument);
  CHECK_THROWS_AS(strategy_skewed(f, 2.0, 1, 1, t, 1), InvalidArgument);
  CHECK_THROWS_AS(strategy_skewed(f, 2.0, 0, 9, t, 1), InvalidArgument);
}

TEST_CASE("dephasing caps Alice's fidelity at one half on distinct clauses") {
  const auto [f, t] = fixture::small_planted(6);
  CHECK_THROWS_AS(strategy_dephase(f, t, 2), InvalidArgument);
  const auto s = strategy_dephase(f, t, 5);
  CHECK(quantum::check_family_completeness(s.round1()) < 1e-12);
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t yt = 0; yt < 5; ++yt) {
      if (y == yt) continue;
      const protocol::QueryTuple r{y, yt, f.clause(y)[0].var, 0};
      CHECK(diagnostics::verify_damage_numerically(f, s.round1(), 0, r).max_fidelity <= 0.5 + 1e-9);
    }
  }
}

TEST_CASE("strategy kinds have stable names") {
  CHECK(kind_name(StrategySpec::Kind::measure_resend) == "measure_resend");
  CHECK(kind_name(StrategySpec::Kind::locc) == "locc");
}
