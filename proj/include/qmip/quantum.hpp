#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qmip::quantum {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Dims = std::vector<std::size_t>;

/// Global tolerances: equality checks and PSD eigenvalue slack.
inline constexpr double kTolerance = 1e-9;
inline constexpr double kPsdSlack = 1e-7;

std::size_t product(const Dims& dims);

/// Amplitudes over a tensor product of subsystems with the given dimensions.
/// May be unnormalized (measurement branches); see is_normalized().
class StateVector {
 public:
  StateVector() = default;
  StateVector(Vector amplitudes, Dims dims);

  static StateVector basis(const Dims& dims, std::size_t index);
  static StateVector basis(const Dims& dims, std::span<const std::size_t> digits);

  const Vector& amplitudes() const noexcept { return amps_; }
  Vector& amplitudes() noexcept { return amps_; }
  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(amps_.size()); }

  double squared_norm() const { return amps_.squaredNorm(); }
  bool is_normalized(double tol = kTolerance) const;
  StateVector normalized() const;

 private:
  Vector amps_;
  Dims dims_;
};

/// General (possibly rectangular) matrix with subsystem annotations for the
/// space it acts on.
class Operator {
 public:
  Operator() = default;
  Operator(Matrix m, Dims dims);
  explicit Operator(Matrix m);

  static Operator identity(const Dims& dims);

  const Matrix& matrix() const noexcept { return m_; }
  const Dims& dims() const noexcept { return dims_; }
  std::size_t rows() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(m_.cols()); }

 private:
  Matrix m_;
  Dims dims_;
};

class DensityOperator {
 public:
  DensityOperator() = default;
  DensityOperator(Matrix m, Dims dims);

  static DensityOperator pure(const StateVector& psi);

  const Matrix& matrix() const noexcept { return m_; }
  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(m_.rows()); }

  double trace() const { return m_.trace().real(); }
  /// Hermitian, unit trace and PSD within the global tolerances.
  bool is_valid() const;

 private:
  Matrix m_;
  Dims dims_;
};

// ---- structure ------------------------------------------------------------

StateVector tensor(const StateVector& a, const StateVector& b);
Operator tensor(const Operator& a, const Operator& b);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);

/// Applies `op` to the contiguous subsystems `targets` (identity elsewhere).
/// The result is not renormalized.
StateVector apply_on_subsystems(const Operator& op, std::span<const std::size_t> targets, const StateVector& state);
/// rho -> (I (x) op (x) I) rho (I (x) op (x) I)^dag, not renormalized.
DensityOperator apply_on_subsystems(const Operator& op, std::span<const std::size_t> targets,
                                    const DensityOperator& rho);

/// Reduced state on `keep` (ascending subsystem indices).
DensityOperator partial_trace(const DensityOperator& rho, std::span<const std::size_t> keep);
DensityOperator partial_trace(const StateVector& psi, std::span<const std::size_t> keep);

/// <psi| tr_rest(|phi><phi|) |psi> without materializing the reduced matrix;
/// `keep` must match psi's subsystems inside phi. Unnormalized in phi.
double reduced_overlap(const StateVector& psi, const StateVector& phi, std::span<const std::size_t> keep);

// ---- comparison -----------------------------------------------------------

/// <psi|sigma|psi>, i.e. the squared fidelity between a pure and a mixed state.
double fidelity_pure_mixed(const StateVector& psi, const DensityOperator& sigma);

/// Probability that the SWAP test between |psi> and sigma outputs "equal".
double swap_test_pass_prob(const StateVector& psi, const DensityOperator& sigma);

/// Largest absolute eigenvalue of a Hermitian matrix.
double hermitian_norm(const Matrix& h);

/// Positive square root of a PSD Hermitian matrix.
Matrix psd_sqrt(const Matrix& h);

// ---- measurement families -------------------------------------------------

struct SeparableOutcome {
  Operator alice;
  Operator bob;
};

/// Joint separable measurement {(A_k, B_k)} on Alice's and Bob's
/// message (x) private spaces.
struct MeasurementFamily {
  std::size_t private_dim = 1;
  std::vector<SeparableOutcome> outcomes;

  std::size_t size() const noexcept { return outcomes.size(); }
  std::size_t alice_dim() const { return outcomes.empty() ? 0 : outcomes.front().alice.rows(); }
  std::size_t bob_dim() const { return outcomes.empty() ? 0 : outcomes.front().bob.rows(); }
};

/// Largest joint dimension for which completeness is checked by a dense
/// eigendecomposition; above it the norm comes from power iteration.
inline constexpr long kDenseCompletenessLimit = 2048;

/// Operator-norm distance of sum_k (A_k (x) B_k)^dag (A_k (x) B_k) from I.
double check_family_completeness(const MeasurementFamily& fam);

/// Same as above for a single party's Kraus list: || sum_i M_i^dag M_i - I ||.
double local_completeness(std::span<const Matrix> ops);

}  // namespace qmip::quantum
