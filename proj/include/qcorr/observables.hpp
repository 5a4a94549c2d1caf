#pragma once

#include <Eigen/Dense>

#include "qcorr/fano.hpp"

namespace qcorr {

struct DiscordOptions {
  int seed_count = 64;         // deterministic spherical seed grid
  double tolerance = 1e-7;     // accuracy target for the minimum
  double physical_tol = 1e-6;  // physicality gate on the input state
  double refine_x_tol = 1e-9;  // simplex shrink tolerance per start
  int max_refine_evals = 400;  // per start
};

struct DiscordResult {
  double value = 0.0;  // bits
  Side side = Side::top;
  Eigen::Vector3d argmin_direction = Eigen::Vector3d::UnitZ();
  long optimizer_evals = 0;
};

/// Product rule for the sphere integral: Gauss-Legendre in the polar
/// variable times a uniform (trapezoidal) azimuthal rule.
struct QuadratureSpec {
  int polar_order = 64;
  int azimuthal_order = 128;

  void validate() const;  // both orders >= 4
};

struct PostMeasurementOutcome {
  double probability = 0.0;
  SingleQubitState state{Eigen::Vector3d::Zero()};
  bool degenerate = false;  // probability below 1e-14; state reported maximally mixed
};

struct EntanglementMarker {
  double delta_e = 0.0;     // 1 - 4 lambda_min of the partial transpose
  double negativity = 0.0;  // sum of |negative eigenvalues| of the partial transpose
};

struct HierarchyReport {
  double discord_top = 0.0;
  double entanglement_marker = 0.0;  // Delta_E
  double negativity = 0.0;
  double steering = 0.0;
  double chsh = 0.0;
  double magic = 0.0;
  bool discordant = false;
  bool entangled = false;
  bool steerable = false;
  bool bell_correlated = false;
  bool magical = false;
  // The steering criterion assumes an unpolarized state; set when |P| or
  // |Pbar| exceeds the configured tolerance.
  bool steering_polarization_warning = false;
};

struct ClassifyOptions {
  DiscordOptions discord;
  QuadratureSpec quadrature;
  double polarization_tol = 0.05;
};

/// Outcome probability and conditional top-quark state for a projective
/// spin measurement on the antitop along `direction` (outcome_sign = +-1).
/// Probabilities below 1e-14 yield a maximally mixed state with the
/// degenerate flag set.
PostMeasurementOutcome post_measurement_state(const DensityMatrix4& rho,
                                              const Eigen::Vector3d& direction,
                                              int outcome_sign);

/// Quantum discord of the chosen side: S(rho_other) - S(rho) plus the
/// measurement-direction minimum of the conditional entropy, minimized over
/// projective measurements on the opposite side. Multi-start local
/// refinement over a deterministic spherical seed grid; ties are broken by
/// lowest objective, then lexicographically smallest direction.
/// Throws UnphysicalStateError when the input fails the physicality check.
DiscordResult discord(const FanoCoefficients& fano, Side side, const DiscordOptions& opts = {});

/// discord(top) - discord(antitop) with identical optimizer settings.
double discord_difference(const FanoCoefficients& fano, const DiscordOptions& opts = {});

/// Sphere integral of the ellipsoidal norm sqrt(u^T C^T C u); exceeding
/// 2 pi certifies steerability for unpolarized states.
double steering_marker(const Eigen::Matrix3d& C, const QuadratureSpec& quad = {});

/// Sum of the two largest eigenvalues of C^T C; exceeding 1 marks a
/// Bell-correlated state.
double chsh_marker(const Eigen::Matrix3d& C);

/// Magic from the second stabilizer Renyi entropy, evaluated directly on
/// the coefficients:
///   -log2[(1 + sum(P^4 + Pbar^4) + sum C^4) / (1 + sum(P^2 + Pbar^2) + sum C^2)].
/// Zero for any coefficients taking values in {-1, 0, 1}.
double magic(const FanoCoefficients& fano);

/// Peres-Horodecki markers from the antitop-side partial transpose.
/// delta_e > 1 (equivalently negativity > 0) certifies entanglement.
/// Throws UnphysicalStateError for inputs failing the physicality check.
EntanglementMarker entanglement_marker(const DensityMatrix4& rho, double physical_tol = 1e-6);

/// Flag logic shared by classify_hierarchy and report post-processing:
/// discord > 0 (tol 1e-7), Delta_E > 1, T > 2 pi, B > 1, magic > 0
/// (tol 1e-9). The dimensionful thresholds use a 1e-12 guard so that
/// states sitting exactly on a threshold are not flagged.
HierarchyReport make_hierarchy_report(double discord_top, double delta_e, double negativity,
                                      double steering, double chsh, double magic,
                                      bool polarization_warning = false);

/// Evaluates all five markers and classifies the state against the
/// hierarchy thresholds.
HierarchyReport classify_hierarchy(const FanoCoefficients& fano, const ClassifyOptions& opts = {});

namespace detail {

/// Conditional-entropy objective infrastructure shared with the oracle
/// module: value of the Eq.-style bracket sum_pm p S(rho_cond) for a
/// measurement direction, plus the measurement-independent offset
/// S(rho_other) - S(rho).
struct DiscordGeometry {
  Eigen::Vector3d polarization_measured;     // side being measured
  Eigen::Vector3d polarization_conditioned;  // side whose state collapses
  Eigen::Matrix3d response;                  // maps direction to Bloch offset
  double entropy_offset = 0.0;               // S(rho_other) - S(rho)

  double conditional_entropy(const Eigen::Vector3d& direction) const;
};

/// Builds the geometry, clamping eigenvalues within `physical_tol` of zero
/// when evaluating S(rho). Throws UnphysicalStateError below the tolerance
/// unless `clamp_spectrum` is set, in which case the state is projected onto
/// the physical cone (negative eigenvalues zeroed, trace renormalized).
DiscordGeometry make_discord_geometry(const FanoCoefficients& fano, Side side,
                                      double physical_tol, bool clamp_spectrum = false);

struct DiscordEvalSettings {
  Side side = Side::top;
  double physical_tol = 1e-6;
  int seed_count = 64;
  int refine_top_k = 0;  // 0: refine every seed
  double refine_x_tol = 1e-9;
  int max_refine_evals = 400;

  static DiscordEvalSettings from_options(Side side, const DiscordOptions& opts) {
    return {side, opts.physical_tol, opts.seed_count, 0, opts.refine_x_tol,
            opts.max_refine_evals};
  }
};

/// Multi-start minimization shared by the strict discord operation and the
/// lenient evaluator used inside likelihood profiling. Unphysical inputs are
/// projected onto the physical cone rather than rejected. When `hint` is
/// non-null it contributes an extra refined start and receives the winning
/// direction back.
DiscordResult discord_core(const FanoCoefficients& fano, const DiscordEvalSettings& settings,
                           Eigen::Vector3d* hint = nullptr);

double binary_entropy_bits(double x);

}  // namespace detail

}  // namespace qcorr
