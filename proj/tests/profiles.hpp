#pragma once
// Synthetic weight profiles, each engineered so that exactly one bad-set
// construction's premise holds. Small random perturbations keep them from
// being a single hand-picked point.

#include <random>
#include <vector>

#include "qmip/diagnostics.hpp"
#include "qmip/protocol.hpp"
#include "qmip/sat.hpp"

namespace profile {

using namespace qmip;

struct Profile {
  sat::Formula formula;
  diagnostics::OutcomeWeights weights;
  double gamma = 0.125;
  diagnostics::Construction expected;
};

inline sat::Clause over(std::size_t a, std::size_t b, std::size_t c, unsigned signs) {
  return {sat::Literal{a, (signs & 4U) != 0}, sat::Literal{b, (signs & 2U) != 0}, sat::Literal{c, (signs & 1U) != 0}};
}

inline double uniform(protocol::Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Large regime with a u-bucket split: three heavy clauses share heavy
/// variables 0..2 and six light clauses sit on their own light variables.
/// Most variables are unused (weight 0), which makes W_B small next to
/// N W~ and puts the profile in the large regime.
inline Profile large_regime(protocol::Rng& rng) {
  const std::size_t n = 600;
  std::vector<sat::Clause> cs;
  for (unsigned s = 0; s < 3; ++s) cs.push_back(over(0, 1, 2, s));
  for (std::size_t i = 0; i < 6; ++i) cs.push_back(over(3 + 3 * i, 4 + 3 * i, 5 + 3 * i, static_cast<unsigned>(i)));
  sat::Formula f(n, cs);
  std::vector<double> a(cs.size());
  std::vector<double> b(n, 0.0);
  for (std::size_t c = 0; c < 3; ++c) a[c] = uniform(rng, 0.9, 1.1);
  for (std::size_t c = 3; c < cs.size(); ++c) a[c] = uniform(rng, 0.03, 0.06);
  for (std::size_t v = 0; v < 3; ++v) b[v] = uniform(rng, 0.9, 1.1);
  for (std::size_t v = 3; v < 21; ++v) b[v] = uniform(rng, 0.2, 0.4);
  return {f, diagnostics::weights_from_profile(f, a, b), 0.125, diagnostics::Construction::large_regime};
}

/// Large regime where u is flat (the B sums exactly compensate A) but the
/// clause weights themselves are far apart, so the T-steps split applies.
inline Profile t_steps(protocol::Rng& rng) {
  const std::size_t n = 800;
  const std::size_t k = 2;
  std::vector<sat::Clause> cs;
  for (std::size_t i = 0; i < k; ++i) cs.push_back(over(3 * i, 3 * i + 1, 3 * i + 2, static_cast<unsigned>(i)));
  sat::Formula f(n, cs);
  std::vector<double> a(k);
  std::vector<double> b(n, 0.0);
  const double level = uniform(rng, 0.8, 1.2);
  const double scales[k] = {1.0, 1.0 / 8.0};
  for (std::size_t i = 0; i < k; ++i) {
    a[i] = scales[i] * uniform(rng, 0.95, 1.05);
    // B sum over the clause is level / A, split unevenly over its variables.
    const double w0 = uniform(rng, 0.2, 0.5);
    const double w1 = uniform(rng, 0.2, 0.5);
    const double sum = level / a[i];
    b[3 * i] = sum * w0;
    b[3 * i + 1] = sum * w1;
    b[3 * i + 2] = sum * (1.0 - w0 - w1);
  }
  return {f, diagnostics::weights_from_profile(f, a, b), 0.125, diagnostics::Construction::t_steps};
}

/// Small regime on a regular instance: every clause weight is near 1 except
/// a few damped clauses two orders of magnitude lighter.
inline Profile small_clause(protocol::Rng& rng) {
  auto [f, t] = sat::generate_planted(rng(), 12, 20, true);
  std::vector<double> a(f.num_clauses());
  std::vector<double> b(f.num_vars());
  for (auto& x : a) x = uniform(rng, 0.9, 1.1);
  for (auto& x : b) x = uniform(rng, 0.9, 1.1);
  const std::size_t damped = 1 + rng() % 3;
  for (std::size_t i = 0; i < damped; ++i) a[(5 + 7 * i) % a.size()] = uniform(rng, 0.005, 0.01);
  return {f, diagnostics::weights_from_profile(f, a, b), 0.125, diagnostics::Construction::small_clause};
}

/// Small regime with flat clause weights (Alice certifies F) and a few
/// variables whose weight is far below the rest.
inline Profile bob_side(protocol::Rng& rng) {
  auto [f, t] = sat::generate_planted(rng(), 12, 20, true);
  std::vector<double> a(f.num_clauses());
  std::vector<double> b(f.num_vars());
  for (auto& x : a) x = uniform(rng, 0.95, 1.05);
  for (auto& x : b) x = uniform(rng, 0.9, 1.1);
  const std::size_t damped = 1 + rng() % 2;
  for (std::size_t i = 0; i < damped; ++i) b[(3 + 5 * i) % b.size()] = uniform(rng, 0.005, 0.01);
  return {f, diagnostics::weights_from_profile(f, a, b), 0.125, diagnostics::Construction::bob};
}

/// The four profiles' per-tuple inequality, recomputed from the raw weights.
inline bool inequality(diagnostics::Construction c, const diagnostics::OutcomeWeights& w, const protocol::QueryTuple& r) {
  const auto& A = w.A_of;
  const auto& B = w.B_of;
  switch (c) {
    case diagnostics::Construction::large_regime: return A[r.y] * B[r.x] > 2.0 * A[r.y_tilde] * B[r.x_tilde];
    case diagnostics::Construction::t_steps:
    case diagnostics::Construction::small_clause: return A[r.y] > 2.0 * A[r.y_tilde];
    case diagnostics::Construction::bob: return B[r.x] > 2.0 * B[r.x_tilde];
  }
  return false;
}

}  // namespace profile
