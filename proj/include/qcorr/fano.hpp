#pragma once

#include <array>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "qcorr/common.hpp"

namespace qcorr {

enum class BasisKind { helicity, beam, custom };

enum class Side { top, antitop };

/// Names of the three spin-measurement axes. The declared order fixes the
/// Pauli index binding used by every operation: row/column i of C and
/// component i of P refer to axis_labels[i].
struct SpinBasis {
  BasisKind kind = BasisKind::helicity;
  std::array<std::string, 3> axis_labels{"n", "r", "k"};

  static SpinBasis helicity();  // axes (n, r, k)
  static SpinBasis beam();      // axes (x, y, z)
  static SpinBasis custom(const std::array<std::string, 3>& labels);

  /// Throws ValidationError unless labels are distinct and non-empty.
  void validate() const;

  bool operator==(const SpinBasis&) const = default;
};

/// One cell of the doubly differential binning: an invariant-mass window
/// (GeV) times a |cos Theta| window.
struct BinKinematics {
  double mtt_lo = 0.0;
  double mtt_hi = 0.0;
  double abs_costheta_lo = 0.0;
  double abs_costheta_hi = 0.0;

  void validate() const;

  double mtt_mid() const { return 0.5 * (mtt_lo + mtt_hi); }
};

/// The 15 real parameters of a two-qubit spin state: the top and antitop
/// polarization vectors plus the 3x3 spin-correlation matrix, expressed in
/// a declared basis. Measured inputs may fall outside [-1,1] and need not
/// correspond to a positive semidefinite matrix; physicality is a separate
/// check (validate_physicality), not a construction invariant.
struct FanoCoefficients {
  Eigen::Vector3d P = Eigen::Vector3d::Zero();
  Eigen::Vector3d Pbar = Eigen::Vector3d::Zero();
  Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
  SpinBasis basis;

  /// Canonical packing: P1..P3, Pbar1..Pbar3, C11,C12,...,C33 (row-major).
  Vector15 to_vector() const;
  static FanoCoefficients from_vector(const Vector15& x, const SpinBasis& basis);
};

/// 4x4 Hermitian unit-trace matrix over the top (x) antitop spin space.
/// Construction rejects matrices that are not Hermitian (1e-12 entrywise)
/// or whose trace deviates from 1 by more than 1e-12. The spectrum is not
/// constrained: measured states may have negative eigenvalues.
class DensityMatrix4 {
 public:
  explicit DensityMatrix4(const Eigen::Matrix4cd& m);

  const Eigen::Matrix4cd& matrix() const { return m_; }

 private:
  Eigen::Matrix4cd m_;
};

/// A qubit state described by its Bloch vector, |bloch| <= 1 + 1e-12.
class SingleQubitState {
 public:
  explicit SingleQubitState(const Eigen::Vector3d& bloch);

  const Eigen::Vector3d& bloch() const { return b_; }

  Eigen::Matrix2cd density() const;

 private:
  Eigen::Vector3d b_;
};

struct PhysicalityReport {
  double min_eigenvalue = 0.0;
  bool is_physical = false;
  std::array<double, 4> eigenvalues{};  // ascending
};

/// Raised when an operation that needs a positive semidefinite state was
/// handed measured coefficients that fail the physicality check.
class UnphysicalStateError : public NumericalError {
 public:
  UnphysicalStateError(const std::string& what, PhysicalityReport report)
      : NumericalError(what), report(report) {}

  PhysicalityReport report;
};

/// The three Pauli matrices in the conventional (1,2,3) order, quantization
/// along axis 3.
const std::array<Eigen::Matrix2cd, 3>& pauli_matrices();

/// rho = 1/4 (I(x)I + sum_i P_i s_i(x)I + sum_j Pbar_j I(x)s_j
///            + sum_ij C_ij s_i(x)s_j). Hermitian with unit trace for any
/// real coefficients.
DensityMatrix4 assemble_density(const FanoCoefficients& fano);

/// Inverse of assemble_density via Pauli-trace orthogonality:
/// P_i = Tr[rho (s_i(x)I)], Pbar_j = Tr[rho (I(x)s_j)],
/// C_ij = Tr[rho (s_i(x)s_j)].
FanoCoefficients extract_fano(const DensityMatrix4& rho, const SpinBasis& basis);

/// Reduced one-qubit state of the chosen side; its Bloch vector equals the
/// corresponding polarization vector of extract_fano.
SingleQubitState reduced_state(const DensityMatrix4& rho, Side side);

/// Transpose applied to one tensor factor. Preserves Hermiticity and trace;
/// the spectrum decides entanglement (Peres-Horodecki).
Eigen::Matrix4cd partial_transpose(const DensityMatrix4& rho, Side side);

/// -Tr(m log2 m) evaluated from the spectrum, in bits. Eigenvalues in
/// [-1e-10, 0) are clamped to zero; anything lower is a domain error.
/// Requires unit trace within 1e-9.
double von_neumann_entropy(const Eigen::MatrixXcd& m);

/// Assembles the density matrix and reports its spectrum. is_physical is
/// true when the smallest eigenvalue is >= -tol.
PhysicalityReport validate_physicality(const FanoCoefficients& fano, double tol = 1e-9);

/// P' = R_t P, Pbar' = R_tbar Pbar, C' = R_t C R_tbar^T. Both matrices must
/// be orthogonal within 1e-9; improper ones (det -1) are rejected unless
/// allow_improper is set, which supports sign-convention flips.
FanoCoefficients rotate_basis(const FanoCoefficients& fano, const Eigen::Matrix3d& R_t,
                              const Eigen::Matrix3d& R_tbar, bool allow_improper = false);

}  // namespace qcorr
