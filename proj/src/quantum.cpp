#include "qmip/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qmip/error.hpp"

namespace qmip::quantum {

namespace {

using RowMajor = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Dims concat(const Dims& a, const Dims& b) {
  Dims out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct Split {
  std::size_t left = 1;
  std::size_t target = 1;
  std::size_t right = 1;
};

Split split_targets(const Dims& dims, std::span<const std::size_t> targets) {
  if (targets.empty()) throw DimensionMismatch("no target subsystems given");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] >= dims.size()) throw DimensionMismatch("target subsystem index out of range");
    if (i > 0 && targets[i] != targets[i - 1] + 1) {
      throw DimensionMismatch("target subsystems must be contiguous and ascending");
    }
  }
  Split s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i < targets.front()) {
      s.left *= dims[i];
    } else if (i <= targets.back()) {
      s.target *= dims[i];
    } else {
      s.right *= dims[i];
    }
  }
  return s;
}

// For every full basis index: its coordinate in the kept and in the traced
// factor (both row-major over the respective subsystems).
struct TraceIndex {
  std::size_t keep_dim = 1;
  std::size_t rest_dim = 1;
  std::vector<std::size_t> keep_of;
  std::vector<std::size_t> rest_of;
};

TraceIndex trace_index(const Dims& dims, std::span<const std::size_t> keep) {
  std::vector<bool> is_kept(dims.size(), false);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= dims.size()) throw DimensionMismatch("kept subsystem index out of range");
    if (i > 0 && keep[i] <= keep[i - 1]) throw DimensionMismatch("kept subsystems must be ascending");
    is_kept[keep[i]] = true;
  }
  TraceIndex t;
  for (std::size_t i = 0; i < dims.size(); ++i) (is_kept[i] ? t.keep_dim : t.rest_dim) *= dims[i];
  const std::size_t total = product(dims);
  t.keep_of.resize(total);
  t.rest_of.resize(total);
  std::vector<std::size_t> digit(dims.size(), 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t k = 0;
    std::size_t r = 0;
    for (std::size_t s = 0; s < dims.size(); ++s) {
      if (is_kept[s]) {
        k = k * dims[s] + digit[s];
      } else {
        r = r * dims[s] + digit[s];
      }
    }
    t.keep_of[idx] = k;
    t.rest_of[idx] = r;
    for (std::size_t s = dims.size(); s-- > 0;) {
      if (++digit[s] < dims[s]) break;
      digit[s] = 0;
    }
  }
  return t;
}

Dims kept_dims(const Dims& dims, std::span<const std::size_t> keep) {
  Dims out;
  for (auto k : keep) out.push_back(dims.at(k));
  return out;
}

}  // namespace

std::size_t product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

// ---- StateVector ----------------------------------------------------------

StateVector::StateVector(Vector amplitudes, Dims dims) : amps_(std::move(amplitudes)), dims_(std::move(dims)) {
  if (dims_.empty()) dims_ = {static_cast<std::size_t>(amps_.size())};
  if (product(dims_) != static_cast<std::size_t>(amps_.size())) {
    throw DimensionMismatch("state has " + std::to_string(amps_.size()) + " amplitudes but dims multiply to " +
                            std::to_string(product(dims_)));
  }
}

StateVector StateVector::basis(const Dims& dims, std::size_t index) {
  const auto n = product(dims);
  if (index >= n) throw DimensionMismatch("basis index out of range");
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));
  v(static_cast<Eigen::Index>(index)) = 1.0;
  return StateVector(std::move(v), dims);
}

StateVector StateVector::basis(const Dims& dims, std::span<const std::size_t> digits) {
  if (digits.size() != dims.size()) throw DimensionMismatch("basis digits do not match subsystem count");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (digits[i] >= dims[i]) throw DimensionMismatch("basis digit out of range");
    idx = idx * dims[i] + digits[i];
  }
  return basis(dims, idx);
}

bool StateVector::is_normalized(double tol) const { return std::abs(squared_norm() - 1.0) <= tol; }

StateVector StateVector::normalized() const {
  const double n = amps_.norm();
  if (n == 0.0) throw InvalidArgument("cannot normalize the zero vector");
  return StateVector(amps_ / n, dims_);
}

// ---- Operator / DensityOperator -------------------------------------------

Operator::Operator(Matrix m, Dims dims) : m_(std::move(m)), dims_(std::move(dims)) {
  if (dims_.empty()) dims_ = {static_cast<std::size_t>(m_.cols())};
  if (product(dims_) != static_cast<std::size_t>(m_.cols())) {
    throw DimensionMismatch("operator has " + std::to_string(m_.cols()) + " columns but dims multiply to " +
                            std::to_string(product(dims_)));
  }
  if (!m_.allFinite()) throw InvalidArgument("operator has non-finite entries");
}

Operator::Operator(Matrix m) : Operator(std::move(m), Dims{}) {}

Operator Operator::identity(const Dims& dims) {
  const auto n = static_cast<Eigen::Index>(product(dims));
  return Operator(Matrix::Identity(n, n), dims);
}

DensityOperator::DensityOperator(Matrix m, Dims dims) : m_(std::move(m)), dims_(std::move(dims)) {
  if (m_.rows() != m_.cols()) throw DimensionMismatch("density operator must be square");
  if (dims_.empty()) dims_ = {static_cast<std::size_t>(m_.rows())};
  if (product(dims_) != static_cast<std::size_t>(m_.rows())) {
    throw DimensionMismatch("density operator dims do not match matrix size");
  }
}

DensityOperator DensityOperator::pure(const StateVector& psi) {
  return DensityOperator(psi.amplitudes() * psi.amplitudes().adjoint(), psi.dims());
}

bool DensityOperator::is_valid() const {
  if ((m_ - m_.adjoint()).cwiseAbs().maxCoeff() > kTolerance) return false;
  if (std::abs(trace() - 1.0) > kTolerance) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -kPsdSlack;
}

// ---- structure ------------------------------------------------------------

StateVector tensor(const StateVector& a, const StateVector& b) {
  Vector out(a.amplitudes().size() * b.amplitudes().size());
  for (Eigen::Index i = 0; i < a.amplitudes().size(); ++i) {
    out.segment(i * b.amplitudes().size(), b.amplitudes().size()) = a.amplitudes()(i) * b.amplitudes();
  }
  return StateVector(std::move(out), concat(a.dims(), b.dims()));
}

Operator tensor(const Operator& a, const Operator& b) {
  return Operator(kron(a.matrix(), b.matrix()), concat(a.dims(), b.dims()));
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
  return DensityOperator(kron(a.matrix(), b.matrix()), concat(a.dims(), b.dims()));
}

StateVector apply_on_subsystems(const Operator& op, std::span<const std::size_t> targets, const StateVector& state) {
  const auto s = split_targets(state.dims(), targets);
  if (op.cols() != s.target || op.rows() != s.target) {
    throw DimensionMismatch("operator is " + std::to_string(op.rows()) + "x" + std::to_string(op.cols()) +
                            " but target subsystems have dimension " + std::to_string(s.target));
  }
  Vector out(state.amplitudes().size());
  const auto T = static_cast<Eigen::Index>(s.target);
  const auto R = static_cast<Eigen::Index>(s.right);
  for (std::size_t l = 0; l < s.left; ++l) {
    const auto offset = static_cast<Eigen::Index>(l) * T * R;
    Eigen::Map<const RowMajor> in(state.amplitudes().data() + offset, T, R);
    Eigen::Map<RowMajor> dst(out.data() + offset, T, R);
    dst.noalias() = op.matrix() * in;
  }
  return StateVector(std::move(out), state.dims());
}

DensityOperator apply_on_subsystems(const Operator& op, std::span<const std::size_t> targets,
                                    const DensityOperator& rho) {
  const auto s = split_targets(rho.dims(), targets);
  if (op.cols() != s.target || op.rows() != s.target) {
    throw DimensionMismatch("operator dimension does not match target subsystems");
  }
  const Matrix full = kron(Matrix::Identity(static_cast<Eigen::Index>(s.left), static_cast<Eigen::Index>(s.left)),
                           kron(op.matrix(), Matrix::Identity(static_cast<Eigen::Index>(s.right),
                                                              static_cast<Eigen::Index>(s.right))));
  return DensityOperator(full * rho.matrix() * full.adjoint(), rho.dims());
}

DensityOperator partial_trace(const DensityOperator& rho, std::span<const std::size_t> keep) {
  const auto t = trace_index(rho.dims(), keep);
  // Group full indices by their traced coordinate.
  std::vector<std::vector<std::size_t>> by_rest(t.rest_dim);
  for (std::size_t idx = 0; idx < t.rest_of.size(); ++idx) by_rest[t.rest_of[idx]].push_back(idx);
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(t.keep_dim), static_cast<Eigen::Index>(t.keep_dim));
  for (const auto& group : by_rest) {
    for (auto a : group) {
      for (auto b : group) {
        out(static_cast<Eigen::Index>(t.keep_of[a]), static_cast<Eigen::Index>(t.keep_of[b])) +=
            rho.matrix()(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
  }
  return DensityOperator(std::move(out), kept_dims(rho.dims(), keep));
}

DensityOperator partial_trace(const StateVector& psi, std::span<const std::size_t> keep) {
  const auto t = trace_index(psi.dims(), keep);
  Matrix slices = Matrix::Zero(static_cast<Eigen::Index>(t.keep_dim), static_cast<Eigen::Index>(t.rest_dim));
  for (std::size_t idx = 0; idx < t.keep_of.size(); ++idx) {
    slices(static_cast<Eigen::Index>(t.keep_of[idx]), static_cast<Eigen::Index>(t.rest_of[idx])) =
        psi.amplitudes()(static_cast<Eigen::Index>(idx));
  }
  return DensityOperator(slices * slices.adjoint(), kept_dims(psi.dims(), keep));
}

double reduced_overlap(const StateVector& psi, const StateVector& phi, std::span<const std::size_t> keep) {
  const auto t = trace_index(phi.dims(), keep);
  if (psi.dim() != t.keep_dim) throw DimensionMismatch("reference state does not match the kept subsystems");
  Vector acc = Vector::Zero(static_cast<Eigen::Index>(t.rest_dim));
  for (std::size_t idx = 0; idx < t.keep_of.size(); ++idx) {
    acc(static_cast<Eigen::Index>(t.rest_of[idx])) +=
        std::conj(psi.amplitudes()(static_cast<Eigen::Index>(t.keep_of[idx]))) *
        phi.amplitudes()(static_cast<Eigen::Index>(idx));
  }
  return acc.squaredNorm();
}

// ---- comparison -----------------------------------------------------------

double fidelity_pure_mixed(const StateVector& psi, const DensityOperator& sigma) {
  if (psi.dim() != sigma.dim()) {
    throw DimensionMismatch("state dimension " + std::to_string(psi.dim()) + " vs operator dimension " +
                            std::to_string(sigma.dim()));
  }
  const Complex v = psi.amplitudes().dot(sigma.matrix() * psi.amplitudes());
  if (std::abs(v.imag()) > kTolerance * std::max(1.0, std::abs(v.real()))) {
    throw InvalidArgument("<psi|sigma|psi> has imaginary part " + std::to_string(v.imag()) + "; sigma not Hermitian");
  }
  return std::clamp(v.real(), 0.0, 1.0);
}

double swap_test_pass_prob(const StateVector& psi, const DensityOperator& sigma) {
  return 0.5 + 0.5 * fidelity_pure_mixed(psi, sigma);
}

double hermitian_norm(const Matrix& h) {
  if (h.size() == 0) return 0.0;
  const Matrix herm = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
  return std::max(std::abs(es.eigenvalues().minCoeff()), std::abs(es.eigenvalues().maxCoeff()));
}

Matrix psd_sqrt(const Matrix& h) {
  const Matrix herm = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().adjoint();
}

// ---- measurement families -------------------------------------------------

double local_completeness(std::span<const Matrix> ops) {
  if (ops.empty()) throw InvalidArgument("empty measurement");
  const auto n = ops.front().cols();
  Matrix sum = Matrix::Zero(n, n);
  for (const auto& m : ops) {
    if (m.cols() != n || m.rows() != n) throw DimensionMismatch("measurement operators differ in dimension");
    sum.noalias() += m.adjoint() * m;
  }
  sum -= Matrix::Identity(n, n);
  return hermitian_norm(sum);
}

double check_family_completeness(const MeasurementFamily& fam) {
  if (fam.outcomes.empty()) throw InvalidArgument("measurement family has no outcomes");
  const auto da = static_cast<Eigen::Index>(fam.alice_dim());
  const auto db = static_cast<Eigen::Index>(fam.bob_dim());
  std::vector<Matrix> pa;
  std::vector<Matrix> pb;
  for (const auto& o : fam.outcomes) {
    if (o.alice.matrix().rows() != da || o.alice.matrix().cols() != da || o.bob.matrix().rows() != db ||
        o.bob.matrix().cols() != db) {
      throw DimensionMismatch("family outcomes differ in dimension");
    }
    pa.push_back(o.alice.matrix().adjoint() * o.alice.matrix());
    pb.push_back(o.bob.matrix().adjoint() * o.bob.matrix());
  }
  if (da * db <= kDenseCompletenessLimit) {
    Matrix sum = Matrix::Zero(da * db, da * db);
    for (std::size_t k = 0; k < pa.size(); ++k) sum.noalias() += kron(pa[k], pb[k]);
    sum -= Matrix::Identity(da * db, da * db);
    return hermitian_norm(sum);
  }
  // Power iteration on the Hermitian residual R, applied in factored form:
  // (P (x) Q) vec(X) corresponds to P X Q^T for a row-major da x db matrix X.
  const auto apply = [&](const Matrix& x) {
    Matrix y = -x;
    for (std::size_t k = 0; k < pa.size(); ++k) y.noalias() += pa[k] * x * pb[k].transpose();
    return y;
  };
  Matrix x(da, db);
  for (Eigen::Index i = 0; i < da; ++i) {
    for (Eigen::Index j = 0; j < db; ++j) {
      x(i, j) = Complex(std::cos(0.37 * static_cast<double>(i * db + j) + 0.1), std::sin(1.3 * static_cast<double>(i + 2 * j)));
    }
  }
  x /= x.norm();
  double estimate = 0.0;
  for (int it = 0; it < 2000; ++it) {
    Matrix y = apply(x);
    const double n = y.norm();
    if (n < 1e-300) return estimate;
    if (std::abs(n - estimate) <= 1e-14 * std::max(1.0, n) && it > 50) return n;
    estimate = n;
    x = y / n;
  }
  return estimate;
}

}  // namespace qmip::quantum
