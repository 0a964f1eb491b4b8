#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "qmip/adversary.hpp"
#include "qmip/error.hpp"
#include "qmip/protocol.hpp"

using namespace qmip;
using namespace qmip::protocol;

namespace {

/// Round-2 rule that emits a malformed answer.
class BrokenAnswers final : public ProverStrategy {
 public:
  explicit BrokenAnswers(quantum::MeasurementFamily fam, std::vector<std::uint8_t> bits)
      : fam_(std::move(fam)), bits_(std::move(bits)) {}
  const quantum::MeasurementFamily& round1() const override { return fam_; }
  std::vector<std::uint8_t> round2(const QueryTuple&, std::size_t) const override { return bits_; }

 private:
  quantum::MeasurementFamily fam_;
  std::vector<std::uint8_t> bits_;
};

}  // namespace

TEST_CASE("legal tuples enumerate 3 M^2 N queries in order") {
  const auto [f, t] = fixture::small_planted(1);
  const auto tuples = legal_tuples(f);
  CHECK(tuples.size() == 3 * 5 * 5 * 3);
  CHECK(std::is_sorted(tuples.begin(), tuples.end()));
  for (const auto& r : tuples) CHECK(is_legal(f, r));
  CHECK_FALSE(is_legal(f, {0, 0, 99, 0}));
  CHECK_THROWS_AS(check_legal(f, {7, 0, 0, 0}), InvalidArgument);
}

TEST_CASE("sampled queries are legal and cover every tuple") {
  const auto [f, t] = fixture::small_planted(2);
  Rng rng(1);
  std::map<QueryTuple, int> seen;
  for (int i = 0; i < 20000; ++i) {
    const auto r = sample_pi(f, rng);
    REQUIRE(is_legal(f, r));
    ++seen[r];
  }
  CHECK(seen.size() == legal_tuples(f).size());
  // Each tuple has probability 1/225, so about 89 hits; a factor-two window is generous.
  for (const auto& [r, n] : seen) {
    CHECK(n > 40);
    CHECK(n < 160);
  }
}

TEST_CASE("trial streams are reproducible and distinct") {
  auto a = trial_stream(7, 3);
  auto b = trial_stream(7, 3);
  auto c = trial_stream(7, 4);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
}

TEST_CASE("claimed bits pack and validate") {
  const ClaimedBits c{0b101, 0b011, true, false};
  CHECK(ClaimedBits::from_packed(c.packed()) == c);
  CHECK(c.str() == "10101110");
  const auto bits = c.bits();
  CHECK(ClaimedBits::from_bits(bits) == c);
  const std::vector<std::uint8_t> short_bits{1, 0, 1};
  CHECK_THROWS_AS(ClaimedBits::from_bits(short_bits), ProtocolError);
  const std::vector<std::uint8_t> bad_bits{1, 0, 1, 0, 2, 0, 0, 0};
  CHECK_THROWS_AS(ClaimedBits::from_bits(bad_bits), ProtocolError);
}

TEST_CASE("round-1 states are normalized and degenerate tuples collapse") {
  const auto [f, t] = fixture::small_planted(3);
  for (const auto& r : legal_tuples(f)) {
    const auto [a, b] = build_round1_states(f, r, 2);
    CHECK(a.is_normalized());
    CHECK(b.is_normalized());
    const auto nz = [](const quantum::StateVector& s) {
      std::size_t n = 0;
      for (const auto& z : s.amplitudes()) n += std::abs(z) > 0.0 ? 1 : 0;
      return n;
    };
    CHECK(nz(a) == (r.y == r.y_tilde ? 1U : 2U));
    CHECK(nz(b) == (r.x == r.x_tilde ? 1U : 2U));
  }
}

TEST_CASE("honest unitaries are permutations writing the true bits") {
  const auto [f, t] = fixture::small_planted(4);
  const auto [ua, ub] = honest_prover_unitaries(f, t, 2);
  const auto n = ua.matrix().rows();
  CHECK((ua.matrix().adjoint() * ua.matrix() - quantum::Matrix::Identity(n, n)).norm() < 1e-15);
  const auto layout = RegisterLayout::of(f, 2);
  for (std::size_t c = 0; c < f.num_clauses(); ++c) {
    const auto col = layout.alice.column(c, 0, 1);
    const auto row = layout.alice.column(c, t.triple(f, c), 1);
    CHECK(ua.matrix()(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) == quantum::Complex(1.0, 0.0));
  }
  (void)ub;
}

TEST_CASE("contradictory degenerate claims have no reference") {
  const auto [f, t] = fixture::small_planted(5);
  const QueryTuple r{0, 0, f.clause(0)[0].var, f.clause(0)[0].var};
  CHECK_FALSE(reference_states(f, r, ClaimedBits{1, 2, false, false}).has_value());
  CHECK_FALSE(reference_states(f, r, ClaimedBits{1, 1, false, true}).has_value());
  CHECK(reference_states(f, r, ClaimedBits{1, 1, true, true}).has_value());
}

TEST_CASE("honest provers are accepted with certainty") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto [f, t] = fixture::small_planted(seed);
    for (std::size_t d : {1, 2}) {
      const ProtocolEngine engine(f, d);
      const auto s = adversary::strategy_honest(f, t, d);
      const auto exact = engine.run_exact(s);
      CHECK(std::abs(exact.accept - 1.0) < 1e-12);
      CHECK(std::abs(oracle::acceptance_by_simulation(f, s) - 1.0) < 1e-12);
      const auto sampled = engine.run_trials(s, seed, 500);
      CHECK(sampled.accepted == 500);
    }
  }
}

TEST_CASE("property: exact acceptance matches explicit simulation on random families") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto [f, t] = fixture::small_planted(seed);
    const std::size_t d = 1 + seed % 2;
    const auto fam = fixture::small_family(f, d, seed);
    const ProtocolEngine engine(f, d);
    for (const auto& rule : {adversary::Round2Rule::best(), adversary::Round2Rule::fixed(t)}) {
      const adversary::CompiledStrategy s(f, fam, rule, "random");
      const auto exact = engine.run_exact(s);
      CHECK(std::abs(exact.accept - oracle::acceptance_by_simulation(f, s)) < 1e-10);
      double total = 0.0;
      for (double p : exact.outcome_probability) total += p;
      CHECK(std::abs(total - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("property: the best response is at least as good as any fixed answer rule") {
  const auto [f, t] = fixture::small_planted(8);
  const auto fam = fixture::small_family(f, 2, 8);
  const ProtocolEngine engine(f, 2);
  const double best = engine.acceptance_exact(adversary::CompiledStrategy(f, fam, adversary::Round2Rule::best(), "b"));
  for (const char* bits : {"000", "111", "010", "101"}) {
    const adversary::CompiledStrategy fixed(f, fam, adversary::Round2Rule::fixed(sat::Assignment::from_string(bits)),
                                           "f");
    CHECK(engine.acceptance_exact(fixed) <= best + 1e-12);
  }
}

TEST_CASE("property: measure-first posterior equals the purified-protocol posterior") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto [f, t] = fixture::small_planted(seed);
    const auto fam = fixture::small_family(f, 2, seed + 100);
    const ProtocolEngine engine(f, 2);
    for (std::size_t k = 0; k < fam.size(); ++k) {
      const auto a = engine.posterior_measure_first(fam, k);
      const auto b = oracle::purified_posterior(f, fam, k);
      REQUIRE(a.size() == b.size());
      double worst = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
      CHECK(worst < 1e-12);
    }
  }
}

TEST_CASE("purified states are normalized under both degenerate conventions") {
  const auto [f, t] = fixture::small_planted(1);
  for (auto conv : {DegenerateConvention::normalized, DegenerateConvention::doubled_degenerate}) {
    CHECK(std::abs(build_purified_state(f, 2, conv).squared_norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("trial runs are deterministic and independent of the thread count") {
  const auto [f, t] = fixture::small_planted(6);
  const ProtocolEngine engine(f, 2);
  const auto s = adversary::strategy_measure_resend(f, t, 2);
  std::vector<Transcript> one;
  std::vector<Transcript> four;
  const auto a = engine.run_trials(s, 99, 3000, &one, 1);
  const auto b = engine.run_trials(s, 99, 3000, &four, 4);
  CHECK(a.accepted == b.accepted);
  CHECK(a.swap_alice_failures == b.swap_alice_failures);
  REQUIRE(one.size() == four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].query == four[i].query);
    CHECK(one[i].round2 == four[i].round2);
    CHECK(one[i].accept == four[i].accept);
  }
  CHECK(engine.run_trials(s, 100, 3000).accepted != a.accepted);
}

TEST_CASE("malformed round-2 answers make the run fail") {
  const auto [f, t] = fixture::small_planted(7);
  const ProtocolEngine engine(f, 1);
  const auto fam = adversary::strategy_honest(f, t, 1).round1();
  const BrokenAnswers s(fam, {1, 0, 1});
  Rng rng(1);
  CHECK_THROWS_AS(engine.run(s, rng), ProtocolError);
  CHECK_THROWS_AS(engine.run_exact(s), ProtocolError);
}

TEST_CASE("families of the wrong size are rejected") {
  const auto [f, t] = fixture::small_planted(7);
  const ProtocolEngine engine(f, 2);
  const auto fam = adversary::strategy_honest(f, t, 1).round1();
  CHECK_THROWS_AS(engine.check_family(fam), DimensionMismatch);
}

TEST_CASE("zero-probability outcomes have no posterior") {
  const auto [f, t] = fixture::small_planted(2);
  quantum::MeasurementFamily fam = adversary::strategy_honest(f, t, 1).round1();
  const auto layout = RegisterLayout::of(f, 1);
  fam.outcomes.push_back({quantum::Operator(quantum::Matrix::Zero(40, 40), layout.alice.operator_dims()),
                          fam.outcomes[0].bob});
  const ProtocolEngine engine(f, 1);
  CHECK_THROWS_AS(engine.posterior_measure_first(fam, 1), UndefinedPosterior);
  const adversary::CompiledStrategy s(f, fam, adversary::Round2Rule::fixed(t), "padded");
  const auto exact = engine.run_exact(s);
  CHECK(std::isnan(exact.accept_given_outcome[1]));
  CHECK(std::abs(exact.accept - 1.0) < 1e-12);
}
