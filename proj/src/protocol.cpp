#include "qmip/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "qmip/error.hpp"

namespace qmip::protocol {

using quantum::Dims;
using quantum::Matrix;
using quantum::Operator;
using quantum::StateVector;
using quantum::Vector;

Rng trial_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

bool is_legal(const sat::Formula& f, const QueryTuple& r) {
  return r.y < f.num_clauses() && r.y_tilde < f.num_clauses() && r.x < f.num_vars() && r.x_tilde < f.num_vars() &&
         f.contains(r.y, r.x);
}

void check_legal(const sat::Formula& f, const QueryTuple& r) {
  if (r.y >= f.num_clauses() || r.y_tilde >= f.num_clauses()) throw InvalidArgument("clause index out of range");
  if (r.x >= f.num_vars() || r.x_tilde >= f.num_vars()) throw InvalidArgument("variable index out of range");
  if (!f.contains(r.y, r.x)) throw InvalidArgument("query variable x does not occur in clause y");
}

std::vector<QueryTuple> legal_tuples(const sat::Formula& f) {
  std::vector<QueryTuple> out;
  out.reserve(3 * f.num_clauses() * f.num_clauses() * f.num_vars());
  for (std::size_t y = 0; y < f.num_clauses(); ++y) {
    std::array<std::size_t, 3> vars{f.clause(y)[0].var, f.clause(y)[1].var, f.clause(y)[2].var};
    std::sort(vars.begin(), vars.end());
    for (std::size_t yt = 0; yt < f.num_clauses(); ++yt) {
      for (auto x : vars) {
        for (std::size_t xt = 0; xt < f.num_vars(); ++xt) out.push_back({y, yt, x, xt});
      }
    }
  }
  return out;
}

RegisterLayout RegisterLayout::of(const sat::Formula& f, std::size_t private_dim) {
  if (private_dim < 1) throw InvalidArgument("private dimension must be at least 1");
  return RegisterLayout{SideLayout{f.num_clauses(), 8, private_dim}, SideLayout{f.num_vars(), 2, private_dim}};
}

// ---- ClaimedBits ----------------------------------------------------------

ClaimedBits ClaimedBits::from_bits(std::span<const std::uint8_t> bits) {
  if (bits.size() != 8) {
    throw ProtocolError("round-2 answer has " + std::to_string(bits.size()) + " bits, expected 8");
  }
  std::uint8_t packed = 0;
  for (auto b : bits) {
    if (b > 1) throw ProtocolError("round-2 answer contains a non-binary value");
    packed = static_cast<std::uint8_t>((packed << 1) | b);
  }
  return from_packed(packed);
}

ClaimedBits ClaimedBits::from_packed(std::uint8_t packed) {
  return ClaimedBits{static_cast<sat::Triple>((packed >> 5) & 7U), static_cast<sat::Triple>((packed >> 2) & 7U),
                     ((packed >> 1) & 1U) != 0, (packed & 1U) != 0};
}

std::uint8_t ClaimedBits::packed() const noexcept {
  return static_cast<std::uint8_t>((t_y << 5) | (t_y_tilde << 2) | (t_x ? 2 : 0) | (t_x_tilde ? 1 : 0));
}

std::vector<std::uint8_t> ClaimedBits::bits() const {
  std::vector<std::uint8_t> out(8);
  const auto p = packed();
  for (std::size_t i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>((p >> (7 - i)) & 1U);
  return out;
}

std::string ClaimedBits::str() const {
  std::string s;
  for (auto b : bits()) s.push_back(b ? '1' : '0');
  return s;
}

ClaimedBits honest_claim(const sat::Formula& f, const sat::Assignment& t, const QueryTuple& r) {
  return ClaimedBits{t.triple(f, r.y), t.triple(f, r.y_tilde), t[r.x], t[r.x_tilde]};
}

// ---- states ---------------------------------------------------------------

QueryTuple sample_pi(const sat::Formula& f, Rng& rng) {
  std::uniform_int_distribution<std::size_t> clause(0, f.num_clauses() - 1);
  std::uniform_int_distribution<std::size_t> position(0, 2);
  std::uniform_int_distribution<std::size_t> variable(0, f.num_vars() - 1);
  QueryTuple r;
  r.y = clause(rng);
  r.y_tilde = clause(rng);
  r.x = f.clause(r.y)[position(rng)].var;
  r.x_tilde = variable(rng);
  return r;
}

namespace {

StateVector round1_side(const SideLayout& s, std::size_t i0, std::size_t i1, bool literal_sum) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(s.index_count * s.operator_dim()));
  const auto at = [&](std::size_t i) { return static_cast<Eigen::Index>(i * s.operator_dim() + s.column(i, 0, 0)); };
  if (i0 == i1 && !literal_sum) {
    v(at(i0)) = 1.0;
  } else {
    v(at(i0)) += M_SQRT1_2;
    v(at(i1)) += M_SQRT1_2;
  }
  return StateVector(std::move(v), s.full_dims());
}

StateVector reference_side(const SideLayout& s, std::size_t i0, std::size_t a0, std::size_t i1, std::size_t a1) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(s.index_count * s.message_dim()));
  const auto at = [&](std::size_t i, std::size_t a) {
    return static_cast<Eigen::Index>((i * s.index_count + i) * s.answer_dim + a);
  };
  if (i0 == i1) {
    v(at(i0, a0)) = 1.0;
  } else {
    v(at(i0, a0)) = M_SQRT1_2;
    v(at(i1, a1)) = M_SQRT1_2;
  }
  return StateVector(std::move(v), s.swap_dims());
}

}  // namespace

std::pair<StateVector, StateVector> build_round1_states(const sat::Formula& f, const QueryTuple& r,
                                                        std::size_t private_dim) {
  check_legal(f, r);
  const auto layout = RegisterLayout::of(f, private_dim);
  return {round1_side(layout.alice, r.y, r.y_tilde, false), round1_side(layout.bob, r.x, r.x_tilde, false)};
}

std::pair<Operator, Operator> honest_prover_unitaries(const sat::Formula& f, const sat::Assignment& t,
                                                      std::size_t private_dim) {
  sat::check_compatible(f, t);
  const auto layout = RegisterLayout::of(f, private_dim);
  const auto& a = layout.alice;
  const auto& b = layout.bob;
  Matrix ua = Matrix::Zero(static_cast<Eigen::Index>(a.operator_dim()), static_cast<Eigen::Index>(a.operator_dim()));
  for (std::size_t c = 0; c < a.index_count; ++c) {
    const auto tc = t.triple(f, c);
    for (std::size_t ans = 0; ans < 8; ++ans) {
      for (std::size_t p = 0; p < private_dim; ++p) {
        ua(static_cast<Eigen::Index>(a.column(c, ans ^ tc, p)), static_cast<Eigen::Index>(a.column(c, ans, p))) = 1.0;
      }
    }
  }
  Matrix ub = Matrix::Zero(static_cast<Eigen::Index>(b.operator_dim()), static_cast<Eigen::Index>(b.operator_dim()));
  for (std::size_t v = 0; v < b.index_count; ++v) {
    const std::size_t tv = t[v] ? 1 : 0;
    for (std::size_t ans = 0; ans < 2; ++ans) {
      for (std::size_t p = 0; p < private_dim; ++p) {
        ub(static_cast<Eigen::Index>(b.column(v, ans ^ tv, p)), static_cast<Eigen::Index>(b.column(v, ans, p))) = 1.0;
      }
    }
  }
  return {Operator(std::move(ua), a.operator_dims()), Operator(std::move(ub), b.operator_dims())};
}

std::optional<std::pair<StateVector, StateVector>> reference_states(const sat::Formula& f, const QueryTuple& r,
                                                                    const ClaimedBits& bits) {
  check_legal(f, r);
  if (r.y == r.y_tilde && bits.t_y != bits.t_y_tilde) return std::nullopt;
  if (r.x == r.x_tilde && bits.t_x != bits.t_x_tilde) return std::nullopt;
  const auto layout = RegisterLayout::of(f, 1);
  return std::make_pair(reference_side(layout.alice, r.y, bits.t_y, r.y_tilde, bits.t_y_tilde),
                        reference_side(layout.bob, r.x, bits.t_x ? 1 : 0, r.x_tilde, bits.t_x_tilde ? 1 : 0));
}

// ---- SideBranch -----------------------------------------------------------

SideBranch::SideBranch(const Operator& op, const SideLayout& layout, std::size_t i0, std::size_t i1)
    : layout_(layout), i0_(i0), i1_(i1) {
  if (op.cols() != layout.operator_dim() || op.rows() != layout.operator_dim()) {
    throw DimensionMismatch("operator is " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                            ", layout needs " + std::to_string(layout.operator_dim()));
  }
  if (i0 >= layout.index_count || i1 >= layout.index_count) throw InvalidArgument("branch index out of range");
  col0_ = op.matrix().col(static_cast<Eigen::Index>(layout.column(i0, 0, 0)));
  if (degenerate()) {
    weight_ = col0_.squaredNorm();
  } else {
    col1_ = op.matrix().col(static_cast<Eigen::Index>(layout.column(i1, 0, 0)));
    weight_ = 0.5 * (col0_.squaredNorm() + col1_.squaredNorm());
  }
}

double SideBranch::reduced_fidelity(std::size_t a0, std::size_t a1) const {
  if (weight_ <= 0.0) throw InvalidArgument("reduced state of a zero-probability branch is undefined");
  if (a0 >= layout_.answer_dim || a1 >= layout_.answer_dim) throw InvalidArgument("answer out of range");
  const auto d = layout_.private_dim;
  double acc = 0.0;
  if (degenerate()) {
    if (a0 != a1) throw InvalidArgument("degenerate branch needs equal answers");
    const auto base = static_cast<Eigen::Index>(layout_.column(i0_, a0, 0));
    for (std::size_t p = 0; p < d; ++p) acc += std::norm(col0_(base + static_cast<Eigen::Index>(p)));
  } else {
    const auto b0 = static_cast<Eigen::Index>(layout_.column(i0_, a0, 0));
    const auto b1 = static_cast<Eigen::Index>(layout_.column(i1_, a1, 0));
    for (std::size_t p = 0; p < d; ++p) {
      const auto e = static_cast<Eigen::Index>(p);
      acc += std::norm(0.5 * (col0_(b0 + e) + col1_(b1 + e)));
    }
  }
  return std::clamp(acc / weight_, 0.0, 1.0);
}

StateVector SideBranch::state() const {
  const auto od = static_cast<Eigen::Index>(layout_.operator_dim());
  Vector v = Vector::Zero(static_cast<Eigen::Index>(layout_.index_count) * od);
  if (degenerate()) {
    v.segment(static_cast<Eigen::Index>(i0_) * od, od) = col0_;
  } else {
    v.segment(static_cast<Eigen::Index>(i0_) * od, od) = M_SQRT1_2 * col0_;
    v.segment(static_cast<Eigen::Index>(i1_) * od, od) = M_SQRT1_2 * col1_;
  }
  return StateVector(std::move(v), layout_.full_dims());
}

// ---- checks ---------------------------------------------------------------

CheckProbabilities evaluate_checks(const sat::Formula& f, const QueryTuple& r, const SideBranch& alice,
                                   const SideBranch& bob, const ClaimedBits& claim) {
  CheckProbabilities out;
  out.clause_satisfied = f.satisfied_by(r.y, claim.t_y);
  const int pos = f.position_in(r.y, r.x);
  out.consistent = pos >= 0 && sat::triple_bit(claim.t_y, static_cast<std::size_t>(pos)) == claim.t_x;
  const bool alice_conflict = r.y == r.y_tilde && claim.t_y != claim.t_y_tilde;
  const bool bob_conflict = r.x == r.x_tilde && claim.t_x != claim.t_x_tilde;
  out.auto_reject = alice_conflict || bob_conflict;
  out.swap_alice = alice_conflict ? 0.0 : 0.5 + 0.5 * alice.reduced_fidelity(claim.t_y, claim.t_y_tilde);
  out.swap_bob = bob_conflict ? 0.0 : 0.5 + 0.5 * bob.reduced_fidelity(claim.t_x ? 1 : 0, claim.t_x_tilde ? 1 : 0);
  return out;
}

ClaimedBits best_response_claim(const sat::Formula& f, const quantum::MeasurementFamily& fam, const QueryTuple& r,
                                std::size_t k) {
  check_legal(f, r);
  const auto layout = RegisterLayout::of(f, fam.private_dim);
  const auto& o = fam.outcomes.at(k);
  const SideBranch alice(o.alice, layout.alice, r.y, r.y_tilde);
  const SideBranch bob(o.bob, layout.bob, r.x, r.x_tilde);
  if (alice.weight() <= 0.0 || bob.weight() <= 0.0) return ClaimedBits{};

  std::array<double, 64> pass_a{};
  for (std::size_t a0 = 0; a0 < 8; ++a0) {
    for (std::size_t a1 = 0; a1 < 8; ++a1) {
      pass_a[a0 * 8 + a1] =
          (alice.degenerate() && a0 != a1) ? 0.0 : 0.5 + 0.5 * alice.reduced_fidelity(a0, a1);
    }
  }
  std::array<double, 4> pass_b{};
  for (std::size_t b0 = 0; b0 < 2; ++b0) {
    for (std::size_t b1 = 0; b1 < 2; ++b1) {
      pass_b[b0 * 2 + b1] = (bob.degenerate() && b0 != b1) ? 0.0 : 0.5 + 0.5 * bob.reduced_fidelity(b0, b1);
    }
  }
  const int pos = f.position_in(r.y, r.x);
  double best = -1.0;
  std::uint8_t best_packed = 0;
  for (unsigned packed = 0; packed < 256; ++packed) {
    const auto c = ClaimedBits::from_packed(static_cast<std::uint8_t>(packed));
    if (!f.satisfied_by(r.y, c.t_y)) continue;
    if (sat::triple_bit(c.t_y, static_cast<std::size_t>(pos)) != c.t_x) continue;
    const double p = pass_a[c.t_y * 8U + c.t_y_tilde] * pass_b[(c.t_x ? 2U : 0U) + (c.t_x_tilde ? 1U : 0U)];
    if (p > best) {
      best = p;
      best_packed = static_cast<std::uint8_t>(packed);
    }
  }
  return ClaimedBits::from_packed(best_packed);
}

// ---- engine ---------------------------------------------------------------

ProtocolEngine::ProtocolEngine(sat::Formula f, std::size_t private_dim)
    : f_(std::move(f)), d_(private_dim), layout_(RegisterLayout::of(f_, private_dim)), tuples_(legal_tuples(f_)) {}

void ProtocolEngine::check_family(const quantum::MeasurementFamily& fam) const {
  if (fam.outcomes.empty()) throw InvalidArgument("measurement family has no outcomes");
  if (fam.private_dim != d_) {
    throw DimensionMismatch("family private dimension " + std::to_string(fam.private_dim) + " != engine's " +
                            std::to_string(d_));
  }
  for (const auto& o : fam.outcomes) {
    if (o.alice.rows() != layout_.alice.operator_dim() || o.alice.cols() != layout_.alice.operator_dim() ||
        o.bob.rows() != layout_.bob.operator_dim() || o.bob.cols() != layout_.bob.operator_dim()) {
      throw DimensionMismatch("family operators do not match the register layout (" +
                              std::to_string(layout_.alice.operator_dim()) + ", " +
                              std::to_string(layout_.bob.operator_dim()) + ")");
    }
  }
}

std::vector<double> ProtocolEngine::outcome_probabilities(const quantum::MeasurementFamily& fam,
                                                          const QueryTuple& r) const {
  std::vector<double> p(fam.size());
  for (std::size_t k = 0; k < fam.size(); ++k) {
    const SideBranch a(fam.outcomes[k].alice, layout_.alice, r.y, r.y_tilde);
    const SideBranch b(fam.outcomes[k].bob, layout_.bob, r.x, r.x_tilde);
    p[k] = a.weight() * b.weight();
  }
  return p;
}

Transcript ProtocolEngine::run(const ProverStrategy& s, Rng& rng) const {
  const auto& fam = s.round1();
  check_family(fam);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Transcript t;
  t.query = sample_pi(f_, rng);
  const auto& r = t.query;

  const auto probs = outcome_probabilities(fam, r);
  double total = 0.0;
  for (double p : probs) total += p;
  if (!(total > 0.0)) throw ProtocolError("all measurement outcomes have zero probability");
  const double u = unit(rng) * total;
  double acc = 0.0;
  std::size_t k = probs.size();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    k = i;
    if (u < acc) break;
  }
  t.outcome = k;

  const auto raw = s.round2(r, k);
  t.round2 = ClaimedBits::from_bits(raw);
  const SideBranch alice(fam.outcomes[k].alice, layout_.alice, r.y, r.y_tilde);
  const SideBranch bob(fam.outcomes[k].bob, layout_.bob, r.x, r.x_tilde);
  const auto cp = evaluate_checks(f_, r, alice, bob, t.round2);
  t.checks.clause_satisfied = cp.clause_satisfied;
  t.checks.consistency = cp.consistent;
  t.checks.swap_alice_pass = unit(rng) < cp.swap_alice;
  t.checks.swap_bob_pass = unit(rng) < cp.swap_bob;
  t.accept = t.checks.all();
  return t;
}

TrialSummary ProtocolEngine::run_trials(const ProverStrategy& s, std::uint64_t seed, std::size_t trials,
                                        std::vector<Transcript>* transcripts, unsigned threads) const {
  if (trials == 0) throw InvalidArgument("trials must be at least 1");
  check_family(s.round1());
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, (trials + 999) / 1000));
  threads = std::max(1U, threads);

  std::vector<Transcript> all(trials);
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned w) {
    try {
      const std::size_t lo = trials * w / threads;
      const std::size_t hi = trials * (w + 1) / threads;
      for (std::size_t i = lo; i < hi; ++i) {
        auto rng = trial_stream(seed, i);
        all[i] = run(s, rng);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  TrialSummary sum;
  sum.seed = seed;
  sum.trials = trials;
  for (const auto& t : all) {
    sum.accepted += t.accept ? 1 : 0;
    sum.clause_failures += t.checks.clause_satisfied ? 0 : 1;
    sum.consistency_failures += t.checks.consistency ? 0 : 1;
    sum.swap_alice_failures += t.checks.swap_alice_pass ? 0 : 1;
    sum.swap_bob_failures += t.checks.swap_bob_pass ? 0 : 1;
    if (t.query.y != t.query.y_tilde) {
      ++sum.distinct_clause_trials;
      sum.distinct_clause_swap_alice_failures += t.checks.swap_alice_pass ? 0 : 1;
    }
  }
  if (transcripts) transcripts->insert(transcripts->end(), all.begin(), all.end());
  return sum;
}

ExactResult ProtocolEngine::run_exact(const ProverStrategy& s) const {
  const auto& fam = s.round1();
  check_family(fam);
  const std::size_t K = fam.size();
  if (tuples_.size() * K > kMaxExactWork) {
    throw InstanceTooLarge("exact mode would evaluate " + std::to_string(tuples_.size() * K) + " (tuple, outcome) pairs");
  }
  const std::size_t M = f_.num_clauses();
  const std::size_t N = f_.num_vars();

  std::vector<SideBranch> alice;
  alice.reserve(M * M * K);
  for (std::size_t y = 0; y < M; ++y) {
    for (std::size_t yt = 0; yt < M; ++yt) {
      for (std::size_t k = 0; k < K; ++k) alice.emplace_back(fam.outcomes[k].alice, layout_.alice, y, yt);
    }
  }
  std::vector<SideBranch> bob;
  bob.reserve(N * N * K);
  for (std::size_t x = 0; x < N; ++x) {
    for (std::size_t xt = 0; xt < N; ++xt) {
      for (std::size_t k = 0; k < K; ++k) bob.emplace_back(fam.outcomes[k].bob, layout_.bob, x, xt);
    }
  }

  ExactResult out;
  out.outcome_probability.assign(K, 0.0);
  std::vector<double> accept_joint(K, 0.0);
  double distinct_mass = 0.0;
  double distinct_pass = 0.0;
  const double prior = 1.0 / static_cast<double>(tuples_.size());
  for (const auto& r : tuples_) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto& a = alice[(r.y * M + r.y_tilde) * K + k];
      const auto& b = bob[(r.x * N + r.x_tilde) * K + k];
      const double joint = prior * a.weight() * b.weight();
      if (joint <= 0.0) continue;
      const auto raw = s.round2(r, k);
      const auto claim = ClaimedBits::from_bits(raw);
      const auto cp = evaluate_checks(f_, r, a, b, claim);
      const double pass = cp.pass();
      out.outcome_probability[k] += joint;
      accept_joint[k] += joint * pass;
      out.accept += joint * pass;
      out.clause_failure += cp.clause_satisfied ? 0.0 : joint;
      out.consistency_failure += cp.consistent ? 0.0 : joint;
      out.swap_alice_failure += joint * (1.0 - cp.swap_alice);
      out.swap_bob_failure += joint * (1.0 - cp.swap_bob);
      if (r.y != r.y_tilde) {
        distinct_mass += joint;
        distinct_pass += joint * cp.swap_alice;
      }
    }
  }
  out.accept_given_outcome.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    out.accept_given_outcome[k] = out.outcome_probability[k] > 0.0 ? accept_joint[k] / out.outcome_probability[k]
                                                                   : std::numeric_limits<double>::quiet_NaN();
  }
  out.swap_alice_pass_given_distinct = distinct_mass > 0.0 ? distinct_pass / distinct_mass : 1.0;
  return out;
}

std::vector<double> ProtocolEngine::posterior_measure_first(const quantum::MeasurementFamily& fam,
                                                            std::size_t k) const {
  check_family(fam);
  if (k >= fam.size()) throw InvalidArgument("outcome index out of range");
  std::vector<double> post(tuples_.size());
  double total = 0.0;
  for (std::size_t i = 0; i < tuples_.size(); ++i) {
    const auto& r = tuples_[i];
    const SideBranch a(fam.outcomes[k].alice, layout_.alice, r.y, r.y_tilde);
    const SideBranch b(fam.outcomes[k].bob, layout_.bob, r.x, r.x_tilde);
    post[i] = a.weight() * b.weight();
    total += post[i];
  }
  if (!(total > 0.0)) throw UndefinedPosterior("outcome " + std::to_string(k) + " has probability zero");
  for (auto& p : post) p /= total;
  return post;
}

// ---- purified protocol ----------------------------------------------------

double FactoredPurifiedState::squared_norm() const {
  double s = 0.0;
  for (const auto& t : terms) s += t.amplitude * t.amplitude * t.alice.squared_norm() * t.bob.squared_norm();
  return s;
}

FactoredPurifiedState build_purified_state(const sat::Formula& f, std::size_t private_dim,
                                           DegenerateConvention convention) {
  const auto layout = RegisterLayout::of(f, private_dim);
  const bool literal = convention == DegenerateConvention::doubled_degenerate;
  FactoredPurifiedState out;
  double z = 0.0;
  for (const auto& r : legal_tuples(f)) {
    PurifiedTerm t{r, 1.0, round1_side(layout.alice, r.y, r.y_tilde, literal),
                   round1_side(layout.bob, r.x, r.x_tilde, literal)};
    z += t.alice.squared_norm() * t.bob.squared_norm();
    out.terms.push_back(std::move(t));
  }
  const double amp = 1.0 / std::sqrt(z);
  for (auto& t : out.terms) t.amplitude = amp;
  return out;
}

}  // namespace qmip::protocol
