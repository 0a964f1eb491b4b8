#include "qmip/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "qmip/error.hpp"

namespace qmip::diagnostics {

using protocol::SideLayout;
using quantum::Matrix;
using quantum::Operator;
using quantum::Vector;

namespace {

SideLayout side_of(const sat::Formula& f, const Operator& op, bool alice) {
  const std::size_t count = alice ? f.num_clauses() : f.num_vars();
  const std::size_t answers = alice ? 8 : 2;
  const std::size_t width = count * answers;
  if (op.cols() == 0 || op.cols() % width != 0 || op.rows() != op.cols()) {
    throw DimensionMismatch("operator of size " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                            " does not fit " + std::to_string(width) + " x d");
  }
  return SideLayout{count, answers, op.cols() / width};
}

double block_sum(const Operator& op, const SideLayout& s, std::size_t index) {
  if (index >= s.index_count) throw InvalidArgument("index out of range");
  const auto first = static_cast<Eigen::Index>(s.column(index, 0, 0));
  const auto width = static_cast<Eigen::Index>(s.answer_dim * s.private_dim);
  return op.matrix().middleCols(first, width).squaredNorm();
}

double block_trace(const Operator& op, const SideLayout& s, std::size_t index) {
  if (index >= s.index_count) throw InvalidArgument("index out of range");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.operator_dim()));
  for (std::size_t a = 0; a < s.answer_dim; ++a) {
    for (std::size_t p = 0; p < s.private_dim; ++p) diag(static_cast<Eigen::Index>(s.column(index, a, p))) = 1.0;
  }
  const Matrix m = op.matrix() * diag.asDiagonal() * op.matrix().adjoint();
  return m.trace().real();
}

double input_column(const Operator& op, const SideLayout& s, std::size_t index) {
  if (index >= s.index_count) throw InvalidArgument("index out of range");
  return op.matrix().col(static_cast<Eigen::Index>(s.column(index, 0, 0))).squaredNorm();
}

double side_factor(const std::vector<double>& w, std::size_t i, std::size_t j, PosteriorConvention c) {
  if (i == j && c == PosteriorConvention::doubled_degenerate) return 4.0 * w[i];
  return w[i] + w[j];
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::vector<std::size_t> iota_vec(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// Relative slack used only when certifying sums that are recomputed in a
// different order from the totals they are compared against.
bool geq_rel(double a, double b) { return a >= b - 1e-12 * std::max(1.0, std::abs(b)); }

void count_violations(Construction c, const OutcomeWeights& w, BadSet& d) {
  d.inequality_violations = 0;
  for (const auto& r : d.tuples) d.inequality_violations += damage_inequality_holds(c, w, r) ? 0 : 1;
}

void fill_probability(const sat::Formula& f, const OutcomeWeights& w, BadSet& d) {
  const double den = posterior_denominator(f, w);
  d.probability = 0.0;
  if (den <= 0.0) return;
  for (const auto& r : d.tuples) d.probability += posterior_numerator(w, r) / den;
}

}  // namespace

// ---- weights --------------------------------------------------------------

double operator_clause_weight(const sat::Formula& f, const Operator& a, std::size_t y) {
  return block_sum(a, side_of(f, a, true), y);
}
double operator_var_weight(const sat::Formula& f, const Operator& b, std::size_t x) {
  return block_sum(b, side_of(f, b, false), x);
}
double operator_clause_weight_trace(const sat::Formula& f, const Operator& a, std::size_t y) {
  return block_trace(a, side_of(f, a, true), y);
}
double operator_var_weight_trace(const sat::Formula& f, const Operator& b, std::size_t x) {
  return block_trace(b, side_of(f, b, false), x);
}
double input_clause_weight(const sat::Formula& f, const Operator& a, std::size_t y) {
  return input_column(a, side_of(f, a, true), y);
}
double input_var_weight(const sat::Formula& f, const Operator& b, std::size_t x) {
  return input_column(b, side_of(f, b, false), x);
}

OutcomeWeights weights_from_profile(const sat::Formula& f, std::vector<double> a, std::vector<double> b,
                                    std::size_t k) {
  if (a.size() != f.num_clauses() || b.size() != f.num_vars()) {
    throw DimensionMismatch("weight profile sizes do not match the formula");
  }
  for (double x : a) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("clause weights must be finite and nonnegative");
  }
  for (double x : b) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw InvalidArgument("variable weights must be finite and nonnegative");
  }
  OutcomeWeights w;
  w.k = k;
  w.A_of = std::move(a);
  w.B_of = std::move(b);
  w.W_A = sum(w.A_of);
  w.W_B = sum(w.B_of);
  w.u_of.resize(f.num_clauses());
  for (std::size_t c = 0; c < f.num_clauses(); ++c) {
    double bs = 0.0;
    for (const auto& lit : f.clause(c)) bs += w.B_of[lit.var];
    w.u_of[c] = w.A_of[c] * bs;
    w.W_tilde += w.u_of[c];
  }
  return w;
}

OutcomeWeights outcome_weights(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k) {
  if (k >= fam.size()) throw InvalidArgument("outcome index out of range");
  const auto& o = fam.outcomes[k];
  const auto sa = side_of(f, o.alice, true);
  const auto sb = side_of(f, o.bob, false);
  std::vector<double> a(f.num_clauses());
  std::vector<double> b(f.num_vars());
  bool uniform = true;
  const auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y)); };
  for (std::size_t c = 0; c < a.size(); ++c) {
    a[c] = input_column(o.alice, sa, c);
    uniform = uniform && close(block_sum(o.alice, sa, c), static_cast<double>(8 * sa.private_dim) * a[c]);
  }
  for (std::size_t v = 0; v < b.size(); ++v) {
    b[v] = input_column(o.bob, sb, v);
    uniform = uniform && close(block_sum(o.bob, sb, v), static_cast<double>(2 * sb.private_dim) * b[v]);
  }
  auto w = weights_from_profile(f, std::move(a), std::move(b), k);
  w.block_uniform = uniform;
  return w;
}

// ---- posteriors -----------------------------------------------------------

double posterior_numerator(const OutcomeWeights& w, const QueryTuple& r, PosteriorConvention c) {
  return side_factor(w.A_of, r.y, r.y_tilde, c) * side_factor(w.B_of, r.x, r.x_tilde, c);
}

double posterior_denominator(const sat::Formula& f, const OutcomeWeights& w, PosteriorConvention c) {
  const double extra = c == PosteriorConvention::doubled_degenerate ? 2.0 : 0.0;
  const double m = static_cast<double>(f.num_clauses());
  const double n = static_cast<double>(f.num_vars());
  double total = 0.0;
  for (std::size_t y = 0; y < f.num_clauses(); ++y) {
    const double ay = (m + extra) * w.A_of[y] + w.W_A;
    for (const auto& lit : f.clause(y)) total += ay * ((n + extra) * w.B_of[lit.var] + w.W_B);
  }
  return total;
}

double posterior_from_weights(const sat::Formula& f, const OutcomeWeights& w, const QueryTuple& r,
                              PosteriorConvention c) {
  protocol::check_legal(f, r);
  const double den = posterior_denominator(f, w, c);
  if (!(den > 0.0)) throw UndefinedPosterior("outcome " + std::to_string(w.k) + " has probability zero");
  return posterior_numerator(w, r, c) / den;
}

double posterior_exact(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k,
                       const QueryTuple& r, PosteriorConvention c) {
  return posterior_from_weights(f, outcome_weights(f, fam, k), r, c);
}

std::vector<double> posterior_table(const sat::Formula& f, const OutcomeWeights& w, PosteriorConvention c) {
  const double den = posterior_denominator(f, w, c);
  if (!(den > 0.0)) throw UndefinedPosterior("outcome " + std::to_string(w.k) + " has probability zero");
  std::vector<double> out;
  for (const auto& r : protocol::legal_tuples(f)) out.push_back(posterior_numerator(w, r, c) / den);
  return out;
}

double posterior_lower_bound(const sat::Formula& f, const OutcomeWeights& w, const QueryTuple& r) {
  protocol::check_legal(f, r);
  const double m = static_cast<double>(f.num_clauses());
  const double n = static_cast<double>(f.num_vars());
  const double den = 2.0 * m * n * w.W_tilde + 22.0 * m * w.W_A * w.W_B;
  if (!(den > 0.0)) throw UndefinedPosterior("all weights are zero");
  return (w.A_of[r.y] + w.A_of[r.y_tilde]) * (w.B_of[r.x] + w.B_of[r.x_tilde]) / den;
}

// ---- damage ---------------------------------------------------------------

DamageBound damage_bound(double p) {
  if (!(p >= 1.0)) throw InvalidArgument("damage factor p must be at least 1");
  if (std::isinf(p)) return {0.5, 0.5};
  const double s = std::sqrt(p) / (1.0 + p);
  return {0.5 - s, 0.5 + s};
}

DamageCheck verify_damage_numerically(const sat::Formula& f, const quantum::MeasurementFamily& fam, std::size_t k,
                                      const QueryTuple& r) {
  protocol::check_legal(f, r);
  if (r.y == r.y_tilde) throw InvalidArgument("damage check needs two distinct clauses");
  if (k >= fam.size()) throw InvalidArgument("outcome index out of range");
  const auto layout = protocol::RegisterLayout::of(f, fam.private_dim);
  const protocol::SideBranch branch(fam.outcomes[k].alice, layout.alice, r.y, r.y_tilde);
  if (!(branch.weight() > 0.0)) throw UndefinedPosterior("Alice's branch has probability zero");

  const std::array<std::size_t, 3> keep{0, 1, 2};
  const auto rho = quantum::partial_trace(branch.state(), keep);
  const quantum::DensityOperator sigma(rho.matrix() / branch.weight(), rho.dims());

  const auto m = f.num_clauses();
  DamageCheck out;
  out.max_fidelity = -1.0;
  for (std::size_t a0 = 0; a0 < 8; ++a0) {
    for (std::size_t a1 = 0; a1 < 8; ++a1) {
      Vector psi = Vector::Zero(static_cast<Eigen::Index>(m * m * 8));
      psi(static_cast<Eigen::Index>((r.y * m + r.y) * 8 + a0)) = M_SQRT1_2;
      psi(static_cast<Eigen::Index>((r.y_tilde * m + r.y_tilde) * 8 + a1)) = M_SQRT1_2;
      const double fid = quantum::fidelity_pure_mixed(quantum::StateVector(std::move(psi), sigma.dims()), sigma);
      if (fid > out.max_fidelity) {
        out.max_fidelity = fid;
        out.best_t_y = static_cast<sat::Triple>(a0);
        out.best_t_y_tilde = static_cast<sat::Triple>(a1);
      }
    }
  }
  const double a = input_column(fam.outcomes[k].alice, layout.alice, r.y);
  const double b = input_column(fam.outcomes[k].alice, layout.alice, r.y_tilde);
  out.ratio = (a > 0.0 && b > 0.0) ? std::max(a / b, b / a) : std::numeric_limits<double>::infinity();
  out.bound = damage_bound(out.ratio).fidelity_upper;
  return out;
}

// ---- buckets --------------------------------------------------------------

int dyadic_index(double value, double total, Boundary b) {
  if (!(value > 0.0) || !(total > 0.0)) throw InvalidArgument("dyadic index needs positive value and total");
  int i = static_cast<int>(std::floor(std::log2(total / value)));
  i = std::clamp(i, -1070, 1070);
  if (b == Boundary::upper_closed) {
    while (value > std::ldexp(total, -i)) --i;
    while (value <= std::ldexp(total, -(i + 1))) ++i;
  } else {
    while (value >= std::ldexp(total, -i)) --i;
    while (value < std::ldexp(total, -(i + 1))) ++i;
  }
  return i;
}

Bucketing bucketize(const std::vector<std::size_t>& items, const std::vector<double>& values, double total,
                    Boundary b) {
  Bucketing out;
  out.boundary = b;
  out.total = total;
  out.value_of = values;
  std::vector<std::size_t> sorted = items;
  std::sort(sorted.begin(), sorted.end());
  for (auto item : sorted) {
    if (item >= values.size()) throw InvalidArgument("bucket item out of range");
    if (values[item] > 0.0 && total > 0.0) {
      out.buckets[dyadic_index(values[item], total, b)].push_back(item);
    } else {
      out.overflow.push_back(item);
    }
  }
  return out;
}

std::optional<int> Bucketing::index_of(std::size_t item) const {
  for (const auto& [i, members] : buckets) {
    if (std::binary_search(members.begin(), members.end(), item)) return i;
  }
  return std::nullopt;
}

double Bucketing::mass_below(int j) const {
  double s = 0.0;
  for (const auto& [i, members] : buckets) {
    if (i < j) {
      for (auto m : members) s += value_of[m];
    }
  }
  return s;
}

double Bucketing::mass_above(int j) const {
  double s = 0.0;
  for (const auto& [i, members] : buckets) {
    if (i > j) {
      for (auto m : members) s += value_of[m];
    }
  }
  return s;
}

double Bucketing::mass_at(int j) const {
  double s = 0.0;
  if (auto it = buckets.find(j); it != buckets.end()) {
    for (auto m : it->second) s += value_of[m];
  }
  return s;
}

std::size_t Bucketing::count_below(int j) const { return items_below(j).size(); }
std::size_t Bucketing::count_above(int j) const { return items_above(j).size(); }
std::size_t Bucketing::count_at(int j) const { return items_at(j).size(); }

std::vector<std::size_t> Bucketing::items_below(int j) const {
  std::vector<std::size_t> out;
  for (const auto& [i, members] : buckets) {
    if (i < j) out.insert(out.end(), members.begin(), members.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> Bucketing::items_above(int j) const {
  std::vector<std::size_t> out = overflow;
  for (const auto& [i, members] : buckets) {
    if (i > j) out.insert(out.end(), members.begin(), members.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> Bucketing::items_at(int j) const {
  auto it = buckets.find(j);
  return it == buckets.end() ? std::vector<std::size_t>{} : it->second;
}

int Bucketing::min_index() const { return buckets.empty() ? 0 : buckets.begin()->first; }
int Bucketing::max_index() const { return buckets.empty() ? 0 : buckets.rbegin()->first; }

Bucketing bucketize_u(const OutcomeWeights& w) {
  return bucketize(iota_vec(w.u_of.size()), w.u_of, w.W_tilde, Boundary::upper_closed);
}
Bucketing bucketize_T(const OutcomeWeights& w, const std::vector<std::size_t>& clause_set) {
  return bucketize(clause_set, w.A_of, w.W_A, Boundary::upper_closed);
}
Bucketing bucketize_A(const OutcomeWeights& w) {
  return bucketize(iota_vec(w.A_of.size()), w.A_of, w.W_A, Boundary::lower_closed);
}
Bucketing bucketize_B(const OutcomeWeights& w) {
  return bucketize(iota_vec(w.B_of.size()), w.B_of, w.W_B, Boundary::lower_closed);
}

// ---- thresholds and regimes -----------------------------------------------

Thresholds::Thresholds()
    : values_{
          {"large_regime_factor", 100.0},     // N M W~ >= factor * M W_A W_B
          {"steps_fraction", 0.01},           // u-bucket tails must exceed this share of W~
          {"concentration_fraction", 0.98},   // two adjacent buckets hold this share
          {"tsteps_fraction", 0.01},          // A-bucket tails inside F, as a share of |F|
          {"small_weight_fraction", 1e-4},    // times gamma: tail weight share in the small regime
          {"small_count_fraction", 1e-4},     // times gamma: tail count share in the small regime
          {"certify_fraction", 2e-4},         // times gamma: |F| >= (1 - x gamma) M, etc.
          {"min_weight_divisor", 5.0},        // A(c) >= W_A / (x M), B(v) >= W_B / (x N)
          {"failprob_threshold", 1e-4},       // times gamma: membership in L(y, x)
          {"hfail_threshold", 1e-3},          // times gamma N M: membership in H_fail
          {"eps1_factor", 0.003},             // eps1 = x gamma
          {"eps2_factor", 1e-3},              // eps2 = x gamma
          {"eps3_factor", 1e-4},              // eps3 = x gamma
      } {}

double Thresholds::get(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw InvalidArgument("unknown threshold '" + name + "'");
  return it->second;
}

void Thresholds::set(const std::string& name, double value) {
  auto it = values_.find(name);
  if (it == values_.end()) throw InvalidArgument("unknown threshold '" + name + "'");
  if (!std::isfinite(value)) throw InvalidArgument("threshold '" + name + "' must be finite");
  it->second = value;
}

std::string regime_name(Regime r) { return r == Regime::large ? "large" : "small"; }

Regime regime_classify(const sat::Formula& f, const OutcomeWeights& w, const Thresholds& t) {
  const double m = static_cast<double>(f.num_clauses());
  const double n = static_cast<double>(f.num_vars());
  return n * m * w.W_tilde >= t.get("large_regime_factor") * m * w.W_A * w.W_B ? Regime::large : Regime::small;
}

std::string construction_name(Construction c) {
  switch (c) {
    case Construction::large_regime: return "large-regime";
    case Construction::t_steps: return "T-steps";
    case Construction::small_clause: return "small-clause";
    case Construction::bob: return "bob";
  }
  return "unknown";
}

bool damage_inequality_holds(Construction c, const OutcomeWeights& w, const QueryTuple& r) {
  switch (c) {
    case Construction::large_regime:
      return w.A_of[r.y] * w.B_of[r.x] > 2.0 * w.A_of[r.y_tilde] * w.B_of[r.x_tilde];
    case Construction::t_steps:
    case Construction::small_clause: return w.A_of[r.y] > 2.0 * w.A_of[r.y_tilde];
    case Construction::bob: return w.B_of[r.x] > 2.0 * w.B_of[r.x_tilde];
  }
  return false;
}

std::size_t vmax(const sat::Formula& f, const OutcomeWeights& w, std::size_t c) {
  const auto& cl = f.clause(c);
  std::size_t best = cl[0].var;
  for (const auto& lit : cl) {
    if (w.B_of[lit.var] > w.B_of[best]) best = lit.var;
  }
  return best;
}

std::size_t vmin(const sat::Formula& f, const OutcomeWeights& w, std::size_t c) {
  const auto& cl = f.clause(c);
  std::size_t best = cl[0].var;
  for (const auto& lit : cl) {
    if (w.B_of[lit.var] < w.B_of[best]) best = lit.var;
  }
  return best;
}

// ---- bad sets -------------------------------------------------------------

BadSet build_bad_set_large(const sat::Formula& f, const OutcomeWeights& w, int j, const Thresholds& t) {
  const auto s = bucketize_u(w);
  const double need = t.get("steps_fraction") * w.W_tilde;
  if (!(s.mass_below(j) > need && s.mass_above(j) > need)) {
    throw PremiseFailed("u-bucket split at " + std::to_string(j) + " does not have both tails above " + fmt(need));
  }
  const auto up = s.items_below(j);
  const auto down = s.items_above(j);
  const std::size_t half = (down.size() + 1) / 2;
  const std::vector<std::size_t> left(down.begin(), down.begin() + static_cast<std::ptrdiff_t>(half));
  const std::vector<std::size_t> right(down.begin() + static_cast<std::ptrdiff_t>(half), down.end());

  std::set<QueryTuple> tuples;
  for (auto c_up : up) {
    const auto x = vmax(f, w, c_up);
    for (auto c_l : left) {
      for (auto c_r : right) {
        const bool l_lighter = w.A_of[c_l] <= w.A_of[c_r];
        const auto lighter = l_lighter ? c_l : c_r;
        const auto heavier = l_lighter ? c_r : c_l;
        tuples.insert(QueryTuple{c_up, lighter, x, vmin(f, w, heavier)});
      }
    }
  }
  BadSet d;
  d.construction = Construction::large_regime;
  d.p = std::sqrt(2.0);
  d.split_index = j;
  d.construction_count = up.size() * left.size() * right.size();
  d.tuples.assign(tuples.begin(), tuples.end());
  count_violations(d.construction, w, d);
  fill_probability(f, w, d);
  return d;
}

BadSet build_bad_set_Tsteps(const sat::Formula& f, const OutcomeWeights& w, const std::vector<std::size_t>& F, int j,
                            const Thresholds& t) {
  const auto s = bucketize_T(w, F);
  const double need = t.get("tsteps_fraction") * static_cast<double>(F.size());
  if (!(static_cast<double>(s.count_below(j)) > need && static_cast<double>(s.count_above(j)) > need)) {
    throw PremiseFailed("A-bucket split at " + std::to_string(j) + " does not have both tails above " + fmt(need) +
                        " clauses");
  }
  const auto up = s.items_below(j);
  const auto down = s.items_above(j);
  BadSet d;
  d.construction = Construction::t_steps;
  d.p = 2.0;
  d.split_index = j;
  d.construction_count = up.size() * down.size() * f.num_vars();
  for (auto c_up : up) {
    const auto x = vmax(f, w, c_up);
    for (auto c_down : down) {
      for (std::size_t xt = 0; xt < f.num_vars(); ++xt) d.tuples.push_back({c_up, c_down, x, xt});
    }
  }
  std::sort(d.tuples.begin(), d.tuples.end());
  count_violations(d.construction, w, d);
  fill_probability(f, w, d);
  return d;
}

BadSet build_bad_set_small_clause(const sat::Formula& f, const OutcomeWeights& w, int i, double gamma,
                                  const Thresholds& t) {
  const auto s = bucketize_A(w);
  const double need_w = gamma * t.get("small_weight_fraction") * w.W_A;
  const double need_n = gamma * t.get("small_count_fraction") * static_cast<double>(f.num_clauses());
  if (!(s.mass_below(i) > need_w && static_cast<double>(s.count_above(i)) > need_n)) {
    throw PremiseFailed("clause split at " + std::to_string(i) + " does not satisfy the tail conditions");
  }
  const auto up = s.items_below(i);
  const auto down = s.items_above(i);
  BadSet d;
  d.construction = Construction::small_clause;
  d.p = 2.0;
  d.split_index = i;
  d.construction_count = 3 * up.size() * down.size() * f.num_vars();
  for (auto c : up) {
    for (const auto& lit : f.clause(c)) {
      for (auto ct : down) {
        for (std::size_t xt = 0; xt < f.num_vars(); ++xt) d.tuples.push_back({c, ct, lit.var, xt});
      }
    }
  }
  std::sort(d.tuples.begin(), d.tuples.end());
  count_violations(d.construction, w, d);
  fill_probability(f, w, d);
  return d;
}

BadSet build_bad_set_bob(const sat::Formula& f, const OutcomeWeights& w, int i, double gamma, const Thresholds& t) {
  const auto s = bucketize_B(w);
  const double need_w = gamma * t.get("small_weight_fraction") * w.W_B;
  const double need_n = gamma * t.get("small_count_fraction") * static_cast<double>(f.num_vars());
  if (!(s.mass_below(i) > need_w && static_cast<double>(s.count_above(i)) > need_n)) {
    throw PremiseFailed("variable split at " + std::to_string(i) + " does not satisfy the tail conditions");
  }
  const auto up = s.items_below(i);
  const auto down = s.items_above(i);
  BadSet d;
  d.construction = Construction::bob;
  d.p = 2.0;
  d.split_index = i;
  for (auto v : up) d.construction_count += f.occurrences()[v] * f.num_clauses() * down.size();
  for (auto v : up) {
    for (std::size_t c = 0; c < f.num_clauses(); ++c) {
      if (!f.contains(c, v)) continue;
      for (std::size_t ct = 0; ct < f.num_clauses(); ++ct) {
        for (auto xt : down) d.tuples.push_back({c, ct, v, xt});
      }
    }
  }
  std::sort(d.tuples.begin(), d.tuples.end());
  count_violations(d.construction, w, d);
  fill_probability(f, w, d);
  return d;
}

// ---- case splits ----------------------------------------------------------

RegimeAnalysis analyze_large(const sat::Formula& f, const OutcomeWeights& w, const Thresholds& t) {
  RegimeAnalysis out;
  out.regime = Regime::large;
  const auto s = bucketize_u(w);
  if (s.buckets.empty()) {
    out.findings.push_back({"degenerate_weights", "all u(c) are zero", w.k});
    return out;
  }
  const double need = t.get("steps_fraction") * w.W_tilde;
  for (int j = s.min_index(); j <= s.max_index() + 1; ++j) {
    if (s.mass_below(j) > need && s.mass_above(j) > need) {
      out.bad_sets.push_back(build_bad_set_large(f, w, j, t));
      return out;
    }
  }
  const double conc = t.get("concentration_fraction");
  std::optional<int> pair;
  for (int j = s.min_index(); j <= s.max_index(); ++j) {
    if (s.mass_at(j) + s.mass_at(j + 1) > conc * w.W_tilde) {
      pair = j;
      break;
    }
  }
  if (!pair) {
    out.findings.push_back({"case_split_gap",
                            "no u-bucket split and no adjacent pair of u-buckets holding " + fmt(conc) + " of W~",
                            w.k});
    return out;
  }
  out.F = s.items_at(*pair);
  const auto next = s.items_at(*pair + 1);
  out.F.insert(out.F.end(), next.begin(), next.end());
  std::sort(out.F.begin(), out.F.end());

  const auto tb = bucketize_T(w, out.F);
  const double need_t = t.get("tsteps_fraction") * static_cast<double>(out.F.size());
  for (int j = tb.min_index(); j <= tb.max_index() + 1; ++j) {
    if (static_cast<double>(tb.count_below(j)) > need_t && static_cast<double>(tb.count_above(j)) > need_t) {
      out.bad_sets.push_back(build_bad_set_Tsteps(f, w, out.F, j, t));
      return out;
    }
  }
  for (int j = tb.min_index(); j <= tb.max_index(); ++j) {
    if (static_cast<double>(tb.count_at(j) + tb.count_at(j + 1)) > conc * static_cast<double>(out.F.size())) {
      out.G = tb.items_at(j);
      const auto g2 = tb.items_at(j + 1);
      out.G.insert(out.G.end(), g2.begin(), g2.end());
      std::sort(out.G.begin(), out.G.end());
      break;
    }
  }
  out.findings.push_back(
      {"case_split_gap",
       "large regime without a bad set: the weights concentrate (|F| = " + std::to_string(out.F.size()) +
           ", |G| = " + std::to_string(out.G.size()) + "), which the asymptotic argument rules out",
       w.k});
  return out;
}

RegimeAnalysis analyze_small(const sat::Formula& f, const OutcomeWeights& w, const Thresholds& t, double gamma) {
  RegimeAnalysis out;
  out.regime = Regime::small;
  const double cert = 1.0 - t.get("certify_fraction") * gamma;
  const double divisor = t.get("min_weight_divisor");
  const double m = static_cast<double>(f.num_clauses());
  const double n = static_cast<double>(f.num_vars());

  // Alice: either a clause split gives a bad set, or F concentrates.
  const auto s = bucketize_A(w);
  bool alice_caught = false;
  if (!s.buckets.empty()) {
    const double need_w = gamma * t.get("small_weight_fraction") * w.W_A;
    const double need_n = gamma * t.get("small_count_fraction") * m;
    for (int i = s.min_index() - 1; i <= s.max_index() + 1; ++i) {
      if (s.mass_below(i) > need_w && static_cast<double>(s.count_above(i)) > need_n) {
        out.bad_sets.push_back(build_bad_set_small_clause(f, w, i, gamma, t));
        alice_caught = true;
        break;
      }
    }
    if (!alice_caught) {
      std::optional<int> first;
      for (int ti = s.min_index(); ti <= s.max_index() + 1; ++ti) {
        if (s.mass_below(ti) > need_w) {
          first = ti;
          break;
        }
      }
      if (first) {
        const int i = *first - 1;
        out.F = s.items_at(i);
        const auto f2 = s.items_at(i + 1);
        out.F.insert(out.F.end(), f2.begin(), f2.end());
        std::sort(out.F.begin(), out.F.end());
        double wf = 0.0;
        double min_a = std::numeric_limits<double>::infinity();
        for (auto c : out.F) {
          wf += w.A_of[c];
          min_a = std::min(min_a, w.A_of[c]);
        }
        const bool size_ok = geq_rel(static_cast<double>(out.F.size()), cert * m);
        const bool weight_ok = geq_rel(wf, cert * w.W_A);
        const bool floor_ok = out.F.empty() || geq_rel(min_a, w.W_A / (divisor * m));
        out.F_certified = size_ok && weight_ok && floor_ok && !out.F.empty();
        if (!out.F_certified) {
          out.findings.push_back({"certification_failed",
                                  "clause set F: |F| = " + std::to_string(out.F.size()) + ", W(F)/W_A = " +
                                      fmt(w.W_A > 0 ? wf / w.W_A : 0.0) + ", min A(c) M/W_A = " +
                                      fmt(w.W_A > 0 ? min_a * m / w.W_A : 0.0),
                                  w.k});
        }
      } else {
        out.findings.push_back({"case_split_gap", "no clause index carries the required weight", w.k});
      }
    }
  } else {
    out.findings.push_back({"degenerate_weights", "all A(c) are zero", w.k});
  }

  // Bob: either a variable split gives a bad set, or G concentrates.
  const auto tb = bucketize_B(w);
  bool bob_caught = false;
  if (!tb.buckets.empty()) {
    const double need_w = gamma * t.get("small_weight_fraction") * w.W_B;
    const double need_n = gamma * t.get("small_count_fraction") * n;
    for (int i = tb.min_index() - 1; i <= tb.max_index() + 1; ++i) {
      if (tb.mass_below(i) > need_w && static_cast<double>(tb.count_above(i)) > need_n) {
        out.bad_sets.push_back(build_bad_set_bob(f, w, i, gamma, t));
        bob_caught = true;
        break;
      }
    }
    if (!bob_caught) {
      std::optional<int> first;
      for (int ti = tb.min_index(); ti <= tb.max_index() + 1; ++ti) {
        if (tb.mass_below(ti) > need_w) {
          first = ti;
          break;
        }
      }
      if (first) {
        const int i = *first - 1;
        out.G = tb.items_at(i);
        const auto g2 = tb.items_at(i + 1);
        out.G.insert(out.G.end(), g2.begin(), g2.end());
        std::sort(out.G.begin(), out.G.end());
        double wg = 0.0;
        double min_b = std::numeric_limits<double>::infinity();
        for (auto v : out.G) {
          wg += w.B_of[v];
          min_b = std::min(min_b, w.B_of[v]);
        }
        const bool size_ok = geq_rel(static_cast<double>(out.G.size()), cert * n);
        const bool weight_ok = geq_rel(wg, cert * w.W_B);
        const bool floor_ok = out.G.empty() || geq_rel(min_b, w.W_B / (divisor * n));
        out.G_certified = size_ok && weight_ok && floor_ok && !out.G.empty();
        if (!out.G_certified) {
          out.findings.push_back({"certification_failed",
                                  "variable set G: |G| = " + std::to_string(out.G.size()) + ", W(G)/W_B = " +
                                      fmt(w.W_B > 0 ? wg / w.W_B : 0.0) + ", min B(v) N/W_B = " +
                                      fmt(w.W_B > 0 ? min_b * n / w.W_B : 0.0),
                                  w.k});
        }
      } else {
        out.findings.push_back({"case_split_gap", "no variable index carries the required weight", w.k});
      }
    }
  } else {
    out.findings.push_back({"degenerate_weights", "all B(v) are zero", w.k});
  }

  // H: clauses of F whose variables all lie in G, with both weight floors.
  if (!out.F.empty() && !out.G.empty()) {
    std::vector<bool> in_g(f.num_vars(), false);
    for (auto v : out.G) in_g[v] = true;
    std::size_t removed = 0;
    for (auto c : out.F) {
      bool all_in = true;
      bool floors = w.A_of[c] >= w.W_A / (divisor * m);
      for (const auto& lit : f.clause(c)) {
        all_in = all_in && in_g[lit.var];
        floors = floors && w.B_of[lit.var] >= w.W_B / (divisor * n);
      }
      if (!all_in) continue;
      if (floors) {
        out.H.push_back(c);
      } else {
        ++removed;
      }
    }
    if (removed > 0) {
      out.findings.push_back({"certification_failed",
                              std::to_string(removed) + " clause(s) of H removed for violating a weight floor", w.k});
    }
  }
  return out;
}

// ---- overlap bound --------------------------------------------------------

double taylor_overlap_bound(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
  return 0.5 + std::sqrt(3.0 * eps) / 2.0 - eps / 2.0;
}

double tight_overlap_bound(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0, 1)");
  return std::cos(M_PI / 3.0 - std::acos(1.0 - eps));
}

namespace {

Vector random_unit(std::size_t dim, protocol::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    v(i) = quantum::Complex(re, im);
  }
  return v.normalized();
}

Vector random_orthogonal_unit(const Vector& u, protocol::Rng& rng) {
  for (;;) {
    Vector v = random_unit(static_cast<std::size_t>(u.size()), rng);
    v -= u * u.dot(v);
    if (v.norm() > 1e-6) return v.normalized();
  }
}

}  // namespace

OverlapCheck verify_overlap_bound(double eps, std::size_t samples, protocol::Rng& rng, std::size_t min_dim,
                                  std::size_t max_dim) {
  const double bound = taylor_overlap_bound(eps);
  const double tight = tight_overlap_bound(eps);
  if (min_dim < 2 || max_dim < min_dim) throw InvalidArgument("dimensions must satisfy 2 <= min <= max");
  std::uniform_int_distribution<std::size_t> dim(min_dim, max_dim);
  // |<u|w>| = cos(alpha) > 1 - eps and |<u|v>| = cos(beta) <= 1/2.
  std::uniform_real_distribution<double> alpha(0.0, std::acos(1.0 - eps));
  std::uniform_real_distribution<double> beta(M_PI / 3.0, M_PI / 2.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);

  OverlapCheck out;
  out.eps = eps;
  out.samples = samples;
  out.min_margin = std::numeric_limits<double>::infinity();
  out.min_tight_margin = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t n = dim(rng);
    const Vector u = random_unit(n, rng);
    const Vector nw = random_orthogonal_unit(u, rng);
    const Vector mv = random_orthogonal_unit(u, rng);
    const double a = alpha(rng);
    const double b = beta(rng);
    const quantum::Complex ph = std::polar(1.0, phase(rng));
    const Vector w = std::cos(a) * ph * u + std::sin(a) * nw;
    const Vector v = std::cos(b) * u + std::sin(b) * mv;
    const double overlap = std::abs(v.dot(w));
    out.max_overlap = std::max(out.max_overlap, overlap);
    const double margin = bound - overlap;
    const double tight_margin = tight - overlap;
    out.min_margin = std::min(out.min_margin, margin);
    out.min_tight_margin = std::min(out.min_tight_margin, tight_margin);
    out.violations += margin < -1e-9 ? 1 : 0;
    out.tight_violations += tight_margin < -1e-9 ? 1 : 0;
  }
  return out;
}

// ---- reports --------------------------------------------------------------

DiagnosticsReport diagnose(const sat::Formula& f, const quantum::MeasurementFamily& fam, double gamma,
                           const Thresholds& t) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
  protocol::ProtocolEngine(f, fam.private_dim).check_family(fam);
  DiagnosticsReport rep;
  rep.gamma = gamma;
  rep.thresholds = t;
  const double g2 = gamma * gamma;
  rep.constants = {
      {"soundness_bound", gamma * g2 / 5.55e13},
      {"large_regime_catch", 1.0 / 6.96e9},
      {"steps_bad_set_mass", 1.0 / 4.8e7},
      {"tsteps_catch", 1.0 / 4.2e7},
      {"tsteps_bad_set_mass", 1.0 / 1.2e6},
      {"small_clause_catch", g2 / 2.6e12},
      {"small_clause_bad_set_mass", g2 / 7.4e10},
      {"bob_catch", g2 / 3.9e12},
      {"bob_bad_set_mass", g2 / 1.1e11},
  };

  const auto tuples = protocol::legal_tuples(f);
  const double legal = static_cast<double>(tuples.size());
  const auto layout = protocol::RegisterLayout::of(f, fam.private_dim);
  for (std::size_t k = 0; k < fam.size(); ++k) {
    OutcomeDiagnostics od;
    od.k = k;
    od.weights = outcome_weights(f, fam, k);
    const auto& w = od.weights;
    od.probability = posterior_denominator(f, w) / (4.0 * legal);
    if (od.probability < kZeroProbability) {
      rep.skipped_outcomes.push_back(k);
      rep.findings.push_back({"skipped_outcome", "outcome has probability " + fmt(od.probability), k});
      continue;
    }
    const auto& o = fam.outcomes[k];
    for (std::size_t c = 0; c < f.num_clauses(); ++c) {
      od.weight_crosscheck_error = std::max(
          od.weight_crosscheck_error, std::abs(block_sum(o.alice, layout.alice, c) - block_trace(o.alice, layout.alice, c)));
    }
    for (std::size_t v = 0; v < f.num_vars(); ++v) {
      od.weight_crosscheck_error = std::max(
          od.weight_crosscheck_error, std::abs(block_sum(o.bob, layout.bob, v) - block_trace(o.bob, layout.bob, v)));
    }
    if (od.weight_crosscheck_error > 1e-9) {
      rep.findings.push_back(
          {"weight_crosscheck", "block sums and trace forms differ by " + fmt(od.weight_crosscheck_error), k});
    }
    const auto ratio = [](const std::vector<double>& x, std::size_t& zeros) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = 0.0;
      zeros = 0;
      for (double v : x) {
        if (v > 0.0) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        } else {
          ++zeros;
        }
      }
      return hi > 0.0 ? hi / lo : 1.0;
    };
    od.alice_ratio_max = ratio(w.A_of, od.alice_zero_weights);
    od.bob_ratio_max = ratio(w.B_of, od.bob_zero_weights);

    const auto regime = regime_classify(f, w, t);
    if (regime == Regime::large) {
      od.primary = bucketize_u(w);
      od.analysis = analyze_large(f, w, t);
    } else {
      od.primary = bucketize_A(w);
      od.analysis = analyze_small(f, w, t, gamma);
    }
    for (const auto& b : od.analysis.bad_sets) {
      if (b.inequality_violations > 0) {
        rep.findings.push_back({"damage_inequality", construction_name(b.construction) + " bad set has " +
                                                         std::to_string(b.inequality_violations) +
                                                         " tuple(s) failing its damage inequality",
                                k});
      }
    }
    rep.findings.insert(rep.findings.end(), od.analysis.findings.begin(), od.analysis.findings.end());

    const auto table = posterior_table(f, w);
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      od.posterior_sum += table[i];
      od.posterior_checksum += static_cast<double>(i + 1) * table[i];
      const double lb = posterior_lower_bound(f, w, tuples[i]);
      if (lb > table[i] + 1e-12) {
        ++od.lower_bound_violations;
        od.lower_bound_worst_gap = std::max(od.lower_bound_worst_gap, lb - table[i]);
      }
    }
    if (od.lower_bound_violations > 0) {
      rep.findings.push_back(
          {"posterior_lower_bound_violation",
           std::to_string(od.lower_bound_violations) +
               " tuple(s) where the simplified bound exceeds Pr(r|k) (worst gap " + fmt(od.lower_bound_worst_gap) +
               "); the denominator 2MN W~ + 22M W_A W_B drops a (1 + 2/M + 2/N + 4/MN) factor that only "
               "vanishes for large M and N",
           k});
    }
    rep.outcomes.push_back(std::move(od));
  }
  return rep;
}

std::string posterior_csv(const sat::Formula& f, const quantum::MeasurementFamily& fam) {
  std::ostringstream os;
  os << "k,y,y_tilde,x,x_tilde,exact,lower_bound\n";
  const auto tuples = protocol::legal_tuples(f);
  char buf[64];
  for (std::size_t k = 0; k < fam.size(); ++k) {
    const auto w = outcome_weights(f, fam, k);
    if (posterior_denominator(f, w) / (4.0 * static_cast<double>(tuples.size())) < kZeroProbability) continue;
    const auto table = posterior_table(f, w);
    for (std::size_t i = 0; i < tuples.size(); ++i) {
      const auto& r = tuples[i];
      os << k << ',' << r.y << ',' << r.y_tilde << ',' << r.x << ',' << r.x_tilde << ',';
      std::snprintf(buf, sizeof buf, "%.12g", table[i]);
      os << buf << ',';
      std::snprintf(buf, sizeof buf, "%.12g", posterior_lower_bound(f, w, r));
      os << buf << '\n';
    }
  }
  return os.str();
}

}  // namespace qmip::diagnostics
