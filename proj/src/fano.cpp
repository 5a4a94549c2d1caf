#include "qcorr/fano.hpp"

#include <cmath>
#include <sstream>

namespace qcorr {

namespace {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;
using std::complex;

Matrix4cd kron2(const Matrix2cd& a, const Matrix2cd& b) {
  Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

std::array<double, 4> sorted_eigenvalues(const Matrix4cd& m) {
  Eigen::SelfAdjointEigenSolver<Matrix4cd> solver(m);
  std::array<double, 4> out{};
  for (int i = 0; i < 4; ++i) out[i] = solver.eigenvalues()(i);  // ascending
  return out;
}

}  // namespace

SpinBasis SpinBasis::helicity() { return SpinBasis{BasisKind::helicity, {"n", "r", "k"}}; }

SpinBasis SpinBasis::beam() { return SpinBasis{BasisKind::beam, {"x", "y", "z"}}; }

SpinBasis SpinBasis::custom(const std::array<std::string, 3>& labels) {
  SpinBasis b{BasisKind::custom, labels};
  b.validate();
  return b;
}

void SpinBasis::validate() const {
  for (const auto& label : axis_labels)
    if (label.empty()) throw ValidationError("spin basis axis label is empty");
  if (axis_labels[0] == axis_labels[1] || axis_labels[0] == axis_labels[2] ||
      axis_labels[1] == axis_labels[2])
    throw ValidationError("spin basis axis labels must be distinct");
}

void BinKinematics::validate() const {
  if (!(mtt_lo < mtt_hi))
    throw ValidationError("bin: mtt interval must have lower bound < upper bound");
  if (!(abs_costheta_lo < abs_costheta_hi))
    throw ValidationError("bin: |cos theta| interval must have lower bound < upper bound");
  if (abs_costheta_lo < 0.0 || abs_costheta_hi > 1.0)
    throw ValidationError("bin: |cos theta| interval must lie within [0, 1]");
}

Vector15 FanoCoefficients::to_vector() const {
  Vector15 x;
  x.segment<3>(0) = P;
  x.segment<3>(3) = Pbar;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) x(6 + 3 * i + j) = C(i, j);
  return x;
}

FanoCoefficients FanoCoefficients::from_vector(const Vector15& x, const SpinBasis& basis) {
  FanoCoefficients f;
  f.P = x.segment<3>(0);
  f.Pbar = x.segment<3>(3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f.C(i, j) = x(6 + 3 * i + j);
  f.basis = basis;
  return f;
}

DensityMatrix4::DensityMatrix4(const Eigen::Matrix4cd& m) : m_(m) {
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm > 1e-12) {
    std::ostringstream msg;
    msg << "density matrix is not Hermitian (max |m - m^dag| = " << herm << ")";
    throw ValidationError(msg.str());
  }
  const double trace_dev = std::abs(m.trace() - std::complex<double>(1.0, 0.0));
  if (trace_dev > 1e-12) {
    std::ostringstream msg;
    msg << "density matrix trace deviates from 1 by " << trace_dev;
    throw ValidationError(msg.str());
  }
  m_ = 0.5 * (m_ + m_.adjoint().eval());  // kill rounding asymmetry
}

SingleQubitState::SingleQubitState(const Eigen::Vector3d& bloch) : b_(bloch) {
  if (b_.norm() > 1.0 + 1e-12)
    throw ValidationError("single-qubit Bloch vector has norm > 1");
}

Eigen::Matrix2cd SingleQubitState::density() const {
  const auto& s = pauli_matrices();
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
  for (int i = 0; i < 3; ++i) m += b_(i) * s[i];
  return 0.5 * m;
}

const std::array<Eigen::Matrix2cd, 3>& pauli_matrices() {
  static const std::array<Eigen::Matrix2cd, 3> paulis = [] {
    std::array<Eigen::Matrix2cd, 3> s;
    const complex<double> i(0.0, 1.0);
    s[0] << 0, 1, 1, 0;
    s[1] << 0, -i, i, 0;
    s[2] << 1, 0, 0, -1;
    return s;
  }();
  return paulis;
}

DensityMatrix4 assemble_density(const FanoCoefficients& fano) {
  const auto& s = pauli_matrices();
  const Matrix2cd id = Matrix2cd::Identity();

  Matrix4cd m = kron2(id, id);
  for (int i = 0; i < 3; ++i) m += fano.P(i) * kron2(s[i], id);
  for (int j = 0; j < 3; ++j) m += fano.Pbar(j) * kron2(id, s[j]);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m += fano.C(i, j) * kron2(s[i], s[j]);
  m *= 0.25;
  m = 0.5 * (m + m.adjoint().eval());
  return DensityMatrix4(m);
}

FanoCoefficients extract_fano(const DensityMatrix4& rho, const SpinBasis& basis) {
  const auto& s = pauli_matrices();
  const Matrix2cd id = Matrix2cd::Identity();
  const Matrix4cd& m = rho.matrix();

  FanoCoefficients f;
  f.basis = basis;
  for (int i = 0; i < 3; ++i) f.P(i) = (m * kron2(s[i], id)).trace().real();
  for (int j = 0; j < 3; ++j) f.Pbar(j) = (m * kron2(id, s[j])).trace().real();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) f.C(i, j) = (m * kron2(s[i], s[j])).trace().real();
  return f;
}

SingleQubitState reduced_state(const DensityMatrix4& rho, Side side) {
  const auto& s = pauli_matrices();
  const Matrix2cd id = Matrix2cd::Identity();
  Eigen::Vector3d bloch;
  for (int i = 0; i < 3; ++i) {
    const Matrix4cd op = side == Side::top ? kron2(s[i], id) : kron2(id, s[i]);
    bloch(i) = (rho.matrix() * op).trace().real();
  }
  // Guard against rounding pushing a pure reduced state past the Bloch ball.
  if (bloch.norm() > 1.0 && bloch.norm() <= 1.0 + 1e-12) bloch *= 1.0 / bloch.norm();
  return SingleQubitState(bloch);
}

Eigen::Matrix4cd partial_transpose(const DensityMatrix4& rho, Side side) {
  const Matrix4cd& m = rho.matrix();
  Matrix4cd out;
  // Composite index (a, b) -> 2a + b with a = top, b = antitop.
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) {
          if (side == Side::top)
            out(2 * a + b, 2 * c + d) = m(2 * c + b, 2 * a + d);
          else
            out(2 * a + b, 2 * c + d) = m(2 * a + d, 2 * c + b);
        }
  return out;
}

double von_neumann_entropy(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols()) throw ValidationError("entropy: matrix must be square");
  const double trace_dev = std::abs(m.trace() - std::complex<double>(1.0, 0.0));
  if (trace_dev > 1e-9) {
    std::ostringstream msg;
    msg << "entropy: trace deviates from 1 by " << trace_dev;
    throw ValidationError(msg.str());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(0.5 * (m + m.adjoint()));
  double entropy = 0.0;
  for (int i = 0; i < solver.eigenvalues().size(); ++i) {
    double lambda = solver.eigenvalues()(i);
    if (lambda < -1e-10) {
      std::ostringstream msg;
      msg << "entropy: eigenvalue " << lambda << " below -1e-10";
      throw std::domain_error(msg.str());
    }
    if (lambda <= 0.0) continue;  // 0 log 0 = 0
    entropy -= lambda * std::log2(lambda);
  }
  return entropy;
}

PhysicalityReport validate_physicality(const FanoCoefficients& fano, double tol) {
  PhysicalityReport report;
  report.eigenvalues = sorted_eigenvalues(assemble_density(fano).matrix());
  report.min_eigenvalue = report.eigenvalues[0];
  report.is_physical = report.min_eigenvalue >= -tol;
  return report;
}

namespace {

void check_rotation(const Eigen::Matrix3d& r, const char* name, bool allow_improper) {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (ortho > 1e-9) {
    std::ostringstream msg;
    msg << "rotate_basis: " << name << " is not orthogonal (|R^T R - I| = " << ortho << ")";
    throw ValidationError(msg.str());
  }
  const double det = r.determinant();
  if (std::abs(det - 1.0) <= 1e-9) return;
  if (allow_improper && std::abs(det + 1.0) <= 1e-9) return;
  std::ostringstream msg;
  msg << "rotate_basis: " << name << " has determinant " << det
      << (allow_improper ? " (expected +-1)" : " (expected +1; pass allow_improper for reflections)");
  throw ValidationError(msg.str());
}

}  // namespace

FanoCoefficients rotate_basis(const FanoCoefficients& fano, const Eigen::Matrix3d& R_t,
                              const Eigen::Matrix3d& R_tbar, bool allow_improper) {
  check_rotation(R_t, "R_t", allow_improper);
  check_rotation(R_tbar, "R_tbar", allow_improper);
  FanoCoefficients out = fano;
  out.P = R_t * fano.P;
  out.Pbar = R_tbar * fano.Pbar;
  out.C = R_t * fano.C * R_tbar.transpose();
  return out;
}

}  // namespace qcorr
