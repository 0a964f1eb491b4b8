#include "qmip/adversary.hpp"

#include <cmath>
#include <random>

#include "qmip/error.hpp"

namespace qmip::adversary {

using protocol::RegisterLayout;
using protocol::SideLayout;
using quantum::Matrix;
using quantum::MeasurementFamily;
using quantum::Operator;

namespace {

Matrix zero(std::size_t n) { return Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)); }

void set(Matrix& m, std::size_t row, std::size_t col, quantum::Complex v) {
  m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = v;
}

struct Walker {
  const RegisterLayout& layout;
  MeasurementFamily& out;

  void walk(const LoccNode& node, const Matrix& a, const Matrix& b) {
    if (node.operators.empty()) throw InvalidArgument("LOCC round has no operators");
    const std::size_t dim =
        node.party == Party::alice ? layout.alice.operator_dim() : layout.bob.operator_dim();
    for (const auto& op : node.operators) {
      if (static_cast<std::size_t>(op.rows()) != dim || static_cast<std::size_t>(op.cols()) != dim) {
        throw DimensionMismatch("LOCC operator is " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                                ", expected " + std::to_string(dim));
      }
    }
    const double residual = quantum::local_completeness(node.operators);
    if (residual > kCompletenessTolerance) {
      throw InvalidArgument("LOCC round is not complete (residual " + std::to_string(residual) + ")");
    }
    if (!node.next.empty() && node.next.size() != 1 && node.next.size() != node.operators.size()) {
      throw InvalidArgument("LOCC round has " + std::to_string(node.next.size()) + " continuations for " +
                            std::to_string(node.operators.size()) + " outcomes");
    }
    for (std::size_t i = 0; i < node.operators.size(); ++i) {
      const bool alice = node.party == Party::alice;
      const Matrix na = alice ? Matrix(node.operators[i] * a) : a;
      const Matrix nb = alice ? b : Matrix(node.operators[i] * b);
      if (node.next.empty()) {
        out.outcomes.push_back({Operator(na, layout.alice.operator_dims()), Operator(nb, layout.bob.operator_dims())});
      } else {
        walk(node.next.size() == 1 ? node.next.front() : node.next[i], na, nb);
      }
    }
  }
};

// Permutation |i, a, p> -> |i, a xor flip(i), shift(i, p)> on one side.
template <class Flip, class Shift>
Matrix side_permutation(const SideLayout& s, Flip flip, Shift shift) {
  Matrix u = zero(s.operator_dim());
  for (std::size_t i = 0; i < s.index_count; ++i) {
    for (std::size_t a = 0; a < s.answer_dim; ++a) {
      for (std::size_t p = 0; p < s.private_dim; ++p) set(u, s.column(i, a ^ flip(i), shift(i, p)), s.column(i, a, p), 1.0);
    }
  }
  return u;
}

// X_t (P_i (x) I): keep only index i and flip its answer by t.
Matrix flip_projector(const SideLayout& s, std::size_t index, std::size_t t) {
  Matrix m = zero(s.operator_dim());
  for (std::size_t a = 0; a < s.answer_dim; ++a) {
    for (std::size_t p = 0; p < s.private_dim; ++p) set(m, s.column(index, a ^ t, p), s.column(index, a, p), 1.0);
  }
  return m;
}

// Left-multiplies clause-register blocks by the given per-clause factors.
Matrix scale_blocks(const SideLayout& s, const std::vector<double>& g) {
  Matrix d = zero(s.operator_dim());
  for (std::size_t i = 0; i < s.index_count; ++i) {
    for (std::size_t a = 0; a < s.answer_dim; ++a) {
      for (std::size_t p = 0; p < s.private_dim; ++p) set(d, s.column(i, a, p), s.column(i, a, p), g[i]);
    }
  }
  return d;
}

// The satisfying triple closest in Hamming distance to `t` (ties: smallest).
sat::Triple nearest_satisfying(const sat::Formula& f, std::size_t c, sat::Triple t) {
  if (f.satisfied_by(c, t)) return t;
  int best = 4;
  sat::Triple pick = t;
  for (unsigned cand = 0; cand < 8; ++cand) {
    if (!f.satisfied_by(c, static_cast<sat::Triple>(cand))) continue;
    const int dist = __builtin_popcount(cand ^ t);
    if (dist < best) {
      best = dist;
      pick = static_cast<sat::Triple>(cand);
    }
  }
  return pick;
}

void check_clause_pair(const sat::Formula& f, double p, std::size_t y1, std::size_t y2) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("skew factor p must be finite and at least 1");
  if (y1 >= f.num_clauses() || y2 >= f.num_clauses()) throw InvalidArgument("target clause out of range");
  if (y1 == y2) throw InvalidArgument("target clauses must differ");
}

CompiledStrategy finish(const sat::Formula& f, MeasurementFamily fam, Round2Rule rule, std::string name) {
  return CompiledStrategy(f, std::move(fam), std::move(rule), std::move(name));
}

// A random two-outcome instrument {U0 sqrt(E), U1 sqrt(I - E)} of dimension n.
std::vector<Matrix> random_instrument(std::size_t n, protocol::Rng& rng) {
  const Matrix g = random_gaussian(n, n, rng);
  Matrix h = g.adjoint() * g;
  h /= quantum::hermitian_norm(h) * 1.0000001;
  const Matrix id = Matrix::Identity(h.rows(), h.cols());
  return {random_unitary(n, rng) * quantum::psd_sqrt(h), random_unitary(n, rng) * quantum::psd_sqrt(id - h)};
}

}  // namespace

MeasurementFamily compile_locc_to_separable(const sat::Formula& f, const LoccScript& script) {
  const auto layout = RegisterLayout::of(f, script.private_dim);
  MeasurementFamily fam;
  fam.private_dim = script.private_dim;
  Walker w{layout, fam};
  w.walk(script.root, Matrix::Identity(static_cast<Eigen::Index>(layout.alice.operator_dim()),
                                       static_cast<Eigen::Index>(layout.alice.operator_dim())),
         Matrix::Identity(static_cast<Eigen::Index>(layout.bob.operator_dim()),
                          static_cast<Eigen::Index>(layout.bob.operator_dim())));
  return fam;
}

std::string kind_name(StrategySpec::Kind kind) {
  switch (kind) {
    case StrategySpec::Kind::honest: return "honest";
    case StrategySpec::Kind::measure_resend: return "measure_resend";
    case StrategySpec::Kind::skewed: return "skewed";
    case StrategySpec::Kind::dephase: return "dephase";
    case StrategySpec::Kind::locc: return "locc";
    case StrategySpec::Kind::custom: return "custom";
  }
  return "unknown";
}

// ---- CompiledStrategy -----------------------------------------------------

CompiledStrategy::CompiledStrategy(sat::Formula f, MeasurementFamily fam, Round2Rule rule, std::string name)
    : f_(std::move(f)), fam_(std::move(fam)), rule_(std::move(rule)), name_(std::move(name)) {
  protocol::ProtocolEngine(f_, fam_.private_dim).check_family(fam_);
  const double residual = quantum::check_family_completeness(fam_);
  if (residual > kCompletenessTolerance) {
    throw InvalidArgument("strategy family is not complete (residual " + std::to_string(residual) + ")");
  }
  switch (rule_.kind) {
    case Round2Rule::Kind::assignment:
      if (rule_.assignments.size() != 1) throw InvalidArgument("assignment rule needs exactly one assignment");
      sat::check_compatible(f_, rule_.assignments.front());
      break;
    case Round2Rule::Kind::per_outcome:
      if (rule_.assignments.size() != fam_.size()) {
        throw InvalidArgument("per-outcome rule needs one assignment per outcome");
      }
      for (const auto& t : rule_.assignments) sat::check_compatible(f_, t);
      break;
    case Round2Rule::Kind::best_response: break;
  }
}

std::vector<std::uint8_t> CompiledStrategy::round2(const protocol::QueryTuple& r, std::size_t k) const {
  switch (rule_.kind) {
    case Round2Rule::Kind::assignment: return protocol::honest_claim(f_, rule_.assignments.front(), r).bits();
    case Round2Rule::Kind::per_outcome: return protocol::honest_claim(f_, rule_.assignments.at(k), r).bits();
    case Round2Rule::Kind::best_response: return protocol::best_response_claim(f_, fam_, r, k).bits();
  }
  return {};
}

// ---- built-ins ------------------------------------------------------------

CompiledStrategy strategy_honest(const sat::Formula& f, const sat::Assignment& t, std::size_t private_dim) {
  auto [ua, ub] = protocol::honest_prover_unitaries(f, t, private_dim);
  LoccScript script;
  script.private_dim = private_dim;
  script.root = LoccNode{Party::alice, {ua.matrix()}, {LoccNode{Party::bob, {ub.matrix()}, {}}}};
  auto s = finish(f, compile_locc_to_separable(f, script), Round2Rule::fixed(t), "honest");
  if (const auto bad = t.violated_count(f); bad > 0) {
    s.add_warning("honest assignment violates " + std::to_string(bad) + " of " + std::to_string(f.num_clauses()) +
                  " clauses");
  }
  return s;
}

CompiledStrategy strategy_measure_resend(const sat::Formula& f, const sat::Assignment& fallback,
                                         std::size_t private_dim) {
  sat::check_compatible(f, fallback);
  const auto layout = RegisterLayout::of(f, private_dim);
  LoccScript script;
  script.private_dim = private_dim;
  script.root.party = Party::alice;
  for (std::size_t c = 0; c < f.num_clauses(); ++c) {
    const auto tau = nearest_satisfying(f, c, fallback.triple(f, c));
    script.root.operators.push_back(flip_projector(layout.alice, c, tau));
    LoccNode bob{Party::bob, {}, {}};
    for (std::size_t v = 0; v < f.num_vars(); ++v) {
      const int pos = f.position_in(c, v);
      const bool bit = pos >= 0 ? sat::triple_bit(tau, static_cast<std::size_t>(pos)) : fallback[v];
      bob.operators.push_back(flip_projector(layout.bob, v, bit ? 1 : 0));
    }
    script.root.next.push_back(std::move(bob));
  }
  return finish(f, compile_locc_to_separable(f, script), Round2Rule::best(), "measure_resend");
}

CompiledStrategy strategy_skewed(const sat::Formula& f, double p, std::size_t y1, std::size_t y2,
                                 const sat::Assignment& t, std::size_t private_dim) {
  check_clause_pair(f, p, y1, y2);
  const auto layout = RegisterLayout::of(f, private_dim);
  auto [ua, ub] = protocol::honest_prover_unitaries(f, t, private_dim);
  std::vector<double> g(f.num_clauses(), 1.0);
  g[y2] = 1.0 / std::sqrt(p);
  std::vector<double> h(f.num_clauses());
  for (std::size_t c = 0; c < g.size(); ++c) h[c] = std::sqrt(std::max(0.0, 1.0 - g[c] * g[c]));
  MeasurementFamily fam;
  fam.private_dim = private_dim;
  fam.outcomes.push_back({Operator(scale_blocks(layout.alice, g) * ua.matrix(), layout.alice.operator_dims()), ub});
  fam.outcomes.push_back({Operator(scale_blocks(layout.alice, h) * ua.matrix(), layout.alice.operator_dims()), ub});
  return finish(f, std::move(fam), Round2Rule::fixed(t), "skewed");
}

CompiledStrategy strategy_dephase(const sat::Formula& f, const sat::Assignment& t, std::size_t private_dim) {
  sat::check_compatible(f, t);
  if (private_dim < f.num_clauses()) {
    throw InvalidArgument("dephasing needs a private register of dimension at least M = " +
                          std::to_string(f.num_clauses()));
  }
  const auto layout = RegisterLayout::of(f, private_dim);
  const Matrix ua = side_permutation(
      layout.alice, [&](std::size_t c) { return static_cast<std::size_t>(t.triple(f, c)); },
      [&](std::size_t c, std::size_t p) { return (p + c) % private_dim; });
  auto [unused, ub] = protocol::honest_prover_unitaries(f, t, private_dim);
  (void)unused;
  MeasurementFamily fam;
  fam.private_dim = private_dim;
  fam.outcomes.push_back({Operator(ua, layout.alice.operator_dims()), ub});
  return finish(f, std::move(fam), Round2Rule::fixed(t), "dephase");
}

CompiledStrategy compile_strategy(const sat::Formula& f, const StrategySpec& spec, std::size_t private_dim) {
  switch (spec.kind) {
    case StrategySpec::Kind::honest: return strategy_honest(f, spec.assignment, private_dim);
    case StrategySpec::Kind::measure_resend: return strategy_measure_resend(f, spec.assignment, private_dim);
    case StrategySpec::Kind::skewed: return strategy_skewed(f, spec.p, spec.y1, spec.y2, spec.assignment, private_dim);
    case StrategySpec::Kind::dephase: return strategy_dephase(f, spec.assignment, private_dim);
    case StrategySpec::Kind::locc: {
      if (spec.script.private_dim != private_dim) {
        throw DimensionMismatch("script private dimension differs from the requested one");
      }
      return finish(f, compile_locc_to_separable(f, spec.script), spec.round2, "locc");
    }
    case StrategySpec::Kind::custom: {
      if (spec.family.private_dim != private_dim) {
        throw DimensionMismatch("family private dimension differs from the requested one");
      }
      protocol::ProtocolEngine(f, private_dim).check_family(spec.family);
      return finish(f, spec.family, spec.round2, "custom");
    }
  }
  throw InvalidArgument("unknown strategy kind");
}

// ---- random families ------------------------------------------------------

Matrix random_gaussian(std::size_t rows, std::size_t cols, protocol::Rng& rng) {
  std::normal_distribution<double> normal(0.0, M_SQRT1_2);
  Matrix g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      const double re = normal(rng);
      const double im = normal(rng);
      g(i, j) = quantum::Complex(re, im);
    }
  }
  return g;
}

Matrix random_unitary(std::size_t dim, protocol::Rng& rng) {
  const Matrix g = random_gaussian(dim, dim, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    const auto d = r(j, j);
    if (std::abs(d) > 0.0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

MeasurementFamily random_skewed_family(const sat::Formula& f, double p, std::size_t y1, std::size_t y2,
                                       const sat::Assignment& t, std::size_t private_dim, protocol::Rng& rng) {
  check_clause_pair(f, p, y1, y2);
  const auto layout = RegisterLayout::of(f, private_dim);
  const auto& s = layout.alice;
  Matrix g = random_gaussian(s.operator_dim(), s.operator_dim(), rng);
  const auto c1 = static_cast<Eigen::Index>(s.column(y1, 0, 0));
  const auto c2 = static_cast<Eigen::Index>(s.column(y2, 0, 0));
  const double scale = std::sqrt(g.col(c1).squaredNorm() / (p * g.col(c2).squaredNorm()));
  const auto block = static_cast<Eigen::Index>(s.answer_dim * s.private_dim);
  g.middleCols(c2, block) *= scale;
  double norm = std::sqrt(quantum::hermitian_norm(g.adjoint() * g));
  g /= norm * (1.0 + 1e-9);
  const Matrix id = Matrix::Identity(g.rows(), g.cols());
  const Matrix rest = quantum::psd_sqrt(id - g.adjoint() * g);
  auto [ua, ub] = protocol::honest_prover_unitaries(f, t, private_dim);
  (void)ua;
  MeasurementFamily fam;
  fam.private_dim = private_dim;
  fam.outcomes.push_back({Operator(std::move(g), s.operator_dims()), ub});
  fam.outcomes.push_back({Operator(rest, s.operator_dims()), ub});
  return fam;
}

LoccScript random_locc_script(const sat::Formula& f, std::size_t private_dim, protocol::Rng& rng) {
  const auto layout = RegisterLayout::of(f, private_dim);
  LoccScript script;
  script.private_dim = private_dim;
  script.root.party = Party::alice;
  script.root.operators = random_instrument(layout.alice.operator_dim(), rng);
  std::bernoulli_distribution two(0.5);
  for (std::size_t i = 0; i < script.root.operators.size(); ++i) {
    LoccNode bob{Party::bob, {}, {}};
    if (two(rng)) {
      bob.operators = random_instrument(layout.bob.operator_dim(), rng);
    } else {
      bob.operators = {random_unitary(layout.bob.operator_dim(), rng)};
    }
    script.root.next.push_back(std::move(bob));
  }
  return script;
}

MeasurementFamily random_separable_family(const sat::Formula& f, std::size_t private_dim, protocol::Rng& rng) {
  return compile_locc_to_separable(f, random_locc_script(f, private_dim, rng));
}

}  // namespace qmip::adversary
