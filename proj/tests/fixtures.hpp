#pragma once
// Shared inputs for the test suites.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "qmip/adversary.hpp"
#include "qmip/protocol.hpp"
#include "qmip/sat.hpp"

namespace fixture {

/// Regular planted instance with M = 5 clauses over N = 3 variables.
inline std::pair<qmip::sat::Formula, qmip::sat::Assignment> small_planted(std::uint64_t seed) {
  return qmip::sat::generate_planted(seed, 3, 5, true);
}

/// Random separable family with at most four outcomes on a small planted formula.
inline qmip::quantum::MeasurementFamily small_family(const qmip::sat::Formula& f, std::size_t d, std::uint64_t seed) {
  qmip::protocol::Rng rng(seed);
  return qmip::adversary::random_separable_family(f, d, rng);
}

/// Four-outcome family of diagonal operators whose outcome-0 input weights
/// are exactly `a` (per clause) and `b` (per variable), entries in [0, 1].
/// Outcomes pair {a, 1-a} with {b, 1-b}, so the products sum to the identity.
inline qmip::quantum::MeasurementFamily diagonal_product_family(const qmip::sat::Formula& f,
                                                                const std::vector<double>& a,
                                                                const std::vector<double>& b) {
  using qmip::quantum::Matrix;
  using qmip::quantum::Operator;
  const auto layout = qmip::protocol::RegisterLayout::of(f, 1);
  const auto side = [](const qmip::protocol::SideLayout& s, const std::vector<double>& w, bool complement) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(s.operator_dim()), static_cast<Eigen::Index>(s.operator_dim()));
    for (std::size_t i = 0; i < s.index_count; ++i) {
      for (std::size_t ans = 0; ans < s.answer_dim; ++ans) {
        const auto col = static_cast<Eigen::Index>(s.column(i, ans));
        m(col, col) = std::sqrt(complement ? 1.0 - w[i] : w[i]);
      }
    }
    return Operator(m, s.operator_dims());
  };
  qmip::quantum::MeasurementFamily fam;
  fam.private_dim = 1;
  for (bool ca : {false, true}) {
    for (bool cb : {false, true}) fam.outcomes.push_back({side(layout.alice, a, ca), side(layout.bob, b, cb)});
  }
  return fam;
}

/// A family whose outcome 0 breaks the simplified posterior lower bound:
/// clause 0 carries the clause weight, while variable 3 carries the variable
/// weight and appears in every other clause. With N = 30 the correction
/// factor the simplification drops dominates.
inline std::pair<qmip::sat::Formula, qmip::quantum::MeasurementFamily> bound_stress_case() {
  using qmip::sat::Literal;
  std::vector<qmip::sat::Clause> cs{{Literal{0, false}, Literal{1, false}, Literal{2, false}}};
  for (std::size_t i = 0; i < 5; ++i) {
    cs.push_back({Literal{3, (i & 1U) != 0}, Literal{4 + 2 * i, (i & 2U) != 0}, Literal{5 + 2 * i, false}});
  }
  qmip::sat::Formula f(30, cs);
  std::vector<double> a(6, 1e-3);
  std::vector<double> b(30, 1e-3);
  a[0] = 1.0;
  b[3] = 1.0;
  auto fam = diagonal_product_family(f, a, b);
  return {std::move(f), std::move(fam)};
}

}  // namespace fixture
