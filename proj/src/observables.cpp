#include "qcorr/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "qcorr/optim.hpp"

namespace qcorr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double entropy_bits_from_spectrum(const Eigen::VectorXd& eigenvalues, double clamp_tol) {
  double entropy = 0.0;
  for (int i = 0; i < eigenvalues.size(); ++i) {
    double lambda = eigenvalues(i);
    if (lambda < -clamp_tol) {
      std::ostringstream msg;
      msg << "entropy: eigenvalue " << lambda << " below clamp tolerance " << -clamp_tol;
      throw std::domain_error(msg.str());
    }
    if (lambda <= 0.0) continue;
    entropy -= lambda * std::log2(lambda);
  }
  return entropy;
}

double qubit_entropy_bits(double bloch_norm) {
  const double b = std::min(bloch_norm, 1.0);
  return detail::binary_entropy_bits(0.5 * (1.0 + b));
}

PhysicalityReport report_from_spectrum(const Eigen::Vector4d& lam, double tol) {
  PhysicalityReport report;
  for (int i = 0; i < 4; ++i) report.eigenvalues[i] = lam(i);
  report.min_eigenvalue = lam(0);
  report.is_physical = lam(0) >= -tol;
  return report;
}

// Lexicographically smaller of {u, -u}; directions are projective here.
Eigen::Vector3d canonical_direction(const Eigen::Vector3d& u) {
  const Eigen::Vector3d neg = -u;
  for (int i = 0; i < 3; ++i) {
    if (u(i) < neg(i)) return u;
    if (neg(i) < u(i)) return neg;
  }
  return u;
}

bool lex_less(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  for (int i = 0; i < 3; ++i) {
    if (a(i) < b(i)) return true;
    if (b(i) < a(i)) return false;
  }
  return false;
}

Eigen::Vector3d angles_to_direction(double theta, double phi) {
  const double s = std::sin(theta);
  return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
}

}  // namespace

namespace detail {

double binary_entropy_bits(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

double DiscordGeometry::conditional_entropy(const Eigen::Vector3d& direction) const {
  const double pdot = polarization_measured.dot(direction);
  const Eigen::Vector3d offset = response * direction;
  double value = 0.0;
  for (int sign : {+1, -1}) {
    const double p = std::clamp(0.5 * (1.0 + sign * pdot), 0.0, 1.0);
    if (p < 1e-14) continue;  // degenerate branch: p * S(max mixed) < 1e-14
    const Eigen::Vector3d bloch = (polarization_conditioned + sign * offset) / (2.0 * p);
    value += p * qubit_entropy_bits(bloch.norm());
  }
  return value;
}

DiscordGeometry make_discord_geometry(const FanoCoefficients& fano, Side side,
                                      double physical_tol, bool clamp_spectrum) {
  const DensityMatrix4 rho = assemble_density(fano);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(rho.matrix());
  Eigen::Vector4d lam = solver.eigenvalues();

  FanoCoefficients effective = fano;
  if (lam(0) < -physical_tol) {
    if (!clamp_spectrum)
      throw UnphysicalStateError("discord: input state fails the physicality check",
                                 report_from_spectrum(lam, physical_tol));
    // Project onto the physical cone: zero the negative part, renormalize.
    Eigen::Vector4d clamped = lam.cwiseMax(0.0);
    clamped /= clamped.sum();
    Eigen::Matrix4cd projected =
        solver.eigenvectors() * clamped.asDiagonal() * solver.eigenvectors().adjoint();
    projected = 0.5 * (projected + projected.adjoint().eval());
    projected /= projected.trace().real();
    effective = extract_fano(DensityMatrix4(projected), fano.basis);
    lam = clamped;
  }

  const double s_rho = entropy_bits_from_spectrum(lam, physical_tol);

  DiscordGeometry geometry;
  if (side == Side::top) {
    // Measurement on the antitop, conditional states of the top.
    geometry.polarization_measured = effective.Pbar;
    geometry.polarization_conditioned = effective.P;
    geometry.response = effective.C;
  } else {
    geometry.polarization_measured = effective.P;
    geometry.polarization_conditioned = effective.Pbar;
    geometry.response = effective.C.transpose();
  }
  geometry.entropy_offset = qubit_entropy_bits(geometry.polarization_measured.norm()) - s_rho;
  return geometry;
}

}  // namespace detail

void QuadratureSpec::validate() const {
  if (polar_order < 4 || azimuthal_order < 4)
    throw ValidationError("quadrature orders must both be >= 4");
}

PostMeasurementOutcome post_measurement_state(const DensityMatrix4& rho,
                                              const Eigen::Vector3d& direction,
                                              int outcome_sign) {
  if (std::abs(direction.norm() - 1.0) > 1e-9)
    throw ValidationError("post_measurement_state: direction must be a unit vector");
  if (outcome_sign != 1 && outcome_sign != -1)
    throw ValidationError("post_measurement_state: outcome sign must be +1 or -1");

  const FanoCoefficients fano = extract_fano(rho, SpinBasis::helicity());
  const double p =
      std::clamp(0.5 * (1.0 + outcome_sign * fano.Pbar.dot(direction)), 0.0, 1.0);

  PostMeasurementOutcome outcome;
  outcome.probability = p;
  if (p < 1e-14) {
    outcome.degenerate = true;
    outcome.state = SingleQubitState(Eigen::Vector3d::Zero());
    return outcome;
  }
  Eigen::Vector3d bloch = (fano.P + outcome_sign * (fano.C * direction)) / (2.0 * p);
  if (bloch.norm() > 1.0) bloch *= std::min(1.0, (1.0 + 1e-12) / bloch.norm());
  outcome.state = SingleQubitState(bloch);
  return outcome;
}

namespace detail {

DiscordResult discord_core(const FanoCoefficients& fano, const DiscordEvalSettings& settings,
                           Eigen::Vector3d* hint) {
  const auto geometry =
      make_discord_geometry(fano, settings.side, settings.physical_tol, /*clamp_spectrum=*/true);

  long evals = 0;
  const auto objective = [&](const Eigen::VectorXd& angles) {
    ++evals;
    return geometry.conditional_entropy(angles_to_direction(angles(0), angles(1)));
  };

  struct Start {
    Eigen::Vector3d dir;
    double f;
  };
  std::vector<Start> starts;
  starts.reserve(settings.seed_count + 1);
  for (int i = 0; i < settings.seed_count; ++i) {
    const Eigen::Vector3d seed = direction_sequence_point(static_cast<std::uint64_t>(i));
    ++evals;
    starts.push_back({seed, geometry.conditional_entropy(seed)});
  }

  // Refine every start, or only the most promising ones when a cheap
  // evaluation is requested (profile loops). A warm hint, when provided, is
  // always refined.
  std::vector<Eigen::Vector3d> to_refine;
  if (settings.refine_top_k <= 0 || settings.refine_top_k >= settings.seed_count) {
    for (const auto& s : starts) to_refine.push_back(s.dir);
  } else {
    std::sort(starts.begin(), starts.end(), [](const Start& a, const Start& b) {
      return a.f < b.f;
    });
    for (int i = 0; i < settings.refine_top_k; ++i) to_refine.push_back(starts[i].dir);
  }
  if (hint != nullptr && hint->norm() > 0.5) to_refine.push_back(hint->normalized());

  NelderMeadOptions nm;
  nm.initial_step = 0.2;
  nm.x_tol = settings.refine_x_tol;
  nm.f_tol = 1e-13;
  nm.max_evals = settings.max_refine_evals;

  double best_f = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best_dir = Eigen::Vector3d::UnitZ();
  for (const auto& start : to_refine) {
    Eigen::VectorXd angles(2);
    angles << std::acos(std::clamp(start.z(), -1.0, 1.0)), std::atan2(start.y(), start.x());
    const auto refined = nelder_mead(objective, angles, nm);
    const Eigen::Vector3d dir =
        canonical_direction(angles_to_direction(refined.x(0), refined.x(1)));
    if (refined.f < best_f - 1e-12 ||
        (std::abs(refined.f - best_f) <= 1e-12 && lex_less(dir, best_dir))) {
      best_f = refined.f;
      best_dir = dir;
    }
  }

  if (hint != nullptr) *hint = best_dir;

  DiscordResult result;
  result.side = settings.side;
  result.argmin_direction = best_dir.normalized();
  result.optimizer_evals = evals;
  result.value = geometry.entropy_offset + best_f;
  if (result.value < 0.0) {
    if (result.value < -1e-6)
      throw NumericalError("discord: optimizer produced a significantly negative value");
    result.value = 0.0;
  }
  return result;
}

}  // namespace detail

DiscordResult discord(const FanoCoefficients& fano, Side side, const DiscordOptions& opts) {
  const auto physicality = validate_physicality(fano, opts.physical_tol);
  if (!physicality.is_physical)
    throw UnphysicalStateError("discord: input state fails the physicality check", physicality);
  return detail::discord_core(fano, detail::DiscordEvalSettings::from_options(side, opts));
}

double discord_difference(const FanoCoefficients& fano, const DiscordOptions& opts) {
  return discord(fano, Side::top, opts).value - discord(fano, Side::antitop, opts).value;
}

double steering_marker(const Eigen::Matrix3d& C, const QuadratureSpec& quad) {
  quad.validate();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(C.transpose() * C);
  // Ascending; clamp rounding negatives of the PSD Gram matrix.
  const double m_lo = std::max(0.0, solver.eigenvalues()(0));
  const double m_mid = std::max(0.0, solver.eigenvalues()(1));
  const double m_hi = std::max(0.0, solver.eigenvalues()(2));

  std::vector<double> nodes, weights;
  gauss_legendre(quad.polar_order, nodes, weights);

  // Polar axis along the largest eigenvalue and folding z -> |z| keeps the
  // integrand smooth on [0,1] even when the other eigenvalues vanish
  // (rank-one C gives exactly sqrt(m_hi) * z).
  double total = 0.0;
  for (int j = 0; j < quad.azimuthal_order; ++j) {
    const double phi = kTwoPi * j / quad.azimuthal_order;
    const double c = std::cos(phi), s = std::sin(phi);
    const double w_phi = m_mid * c * c + m_lo * s * s;
    double polar_sum = 0.0;
    for (int k = 0; k < quad.polar_order; ++k) {
      const double z = 0.5 * (nodes[k] + 1.0);
      polar_sum += 0.5 * weights[k] * std::sqrt(w_phi + (m_hi - w_phi) * z * z);
    }
    total += polar_sum;
  }
  return 2.0 * kTwoPi / quad.azimuthal_order * total;
}

double chsh_marker(const Eigen::Matrix3d& C) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(C.transpose() * C);
  return solver.eigenvalues()(1) + solver.eigenvalues()(2);
}

double magic(const FanoCoefficients& fano) {
  double sum_sq = 0.0, sum_q = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double p2 = fano.P(i) * fano.P(i);
    const double pb2 = fano.Pbar(i) * fano.Pbar(i);
    sum_sq += p2 + pb2;
    sum_q += p2 * p2 + pb2 * pb2;
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double c2 = fano.C(i, j) * fano.C(i, j);
      sum_sq += c2;
      sum_q += c2 * c2;
    }
  return -std::log2((1.0 + sum_q) / (1.0 + sum_sq));
}

EntanglementMarker entanglement_marker(const DensityMatrix4& rho, double physical_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> state_solver(rho.matrix());
  if (state_solver.eigenvalues()(0) < -physical_tol)
    throw UnphysicalStateError(
        "entanglement_marker: input state fails the physicality check",
        report_from_spectrum(state_solver.eigenvalues(), physical_tol));

  const Eigen::Matrix4cd pt = partial_transpose(rho, Side::antitop);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(0.5 * (pt + pt.adjoint()));

  EntanglementMarker marker;
  marker.delta_e = 1.0 - 4.0 * solver.eigenvalues()(0);
  for (int i = 0; i < 4; ++i)
    if (solver.eigenvalues()(i) < 0.0) marker.negativity -= solver.eigenvalues()(i);
  return marker;
}

HierarchyReport make_hierarchy_report(double discord_top, double delta_e, double negativity,
                                      double steering, double chsh, double magic,
                                      bool polarization_warning) {
  HierarchyReport report;
  report.discord_top = discord_top;
  report.entanglement_marker = delta_e;
  report.negativity = negativity;
  report.steering = steering;
  report.chsh = chsh;
  report.magic = magic;
  report.discordant = discord_top > 1e-7;
  // 1e-12 guard: states sitting exactly on a threshold (e.g. a p = 1/2
  // Werner state for steering) must not be flagged by rounding noise.
  report.entangled = delta_e > 1.0 + 1e-12;
  report.steerable = steering > kTwoPi + 1e-12;
  report.bell_correlated = chsh > 1.0 + 1e-12;
  report.magical = magic > 1e-9;
  report.steering_polarization_warning = polarization_warning;
  return report;
}

HierarchyReport classify_hierarchy(const FanoCoefficients& fano, const ClassifyOptions& opts) {
  const auto physicality = validate_physicality(fano, opts.discord.physical_tol);
  if (!physicality.is_physical)
    throw UnphysicalStateError("classify_hierarchy: input state fails the physicality check",
                               physicality);

  const DensityMatrix4 rho = assemble_density(fano);
  const auto ent = entanglement_marker(rho, opts.discord.physical_tol);
  const bool polarized =
      fano.P.norm() > opts.polarization_tol || fano.Pbar.norm() > opts.polarization_tol;
  return make_hierarchy_report(discord(fano, Side::top, opts.discord).value, ent.delta_e,
                               ent.negativity, steering_marker(fano.C, opts.quadrature),
                               chsh_marker(fano.C), magic(fano), polarized);
}

}  // namespace qcorr
