#pragma once

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "qcorr/observables.hpp"
#include "qcorr/optim.hpp"

namespace qcorr {

/// One measured bin: the 15 observed coefficients in canonical order
/// (P1..P3, Pbar1..Pbar3, C row-major), their covariance, and the bin
/// kinematics. Measured entries may exceed the physical range slightly.
struct MeasurementRecord {
  std::string label;
  SpinBasis basis;
  BinKinematics bin;
  Vector15 observed = Vector15::Zero();
  Matrix15 covariance = Matrix15::Identity();

  void validate() const;
  FanoCoefficients observed_fano() const;
};

/// Covariance-conditioned quadratic form -2 log L. Eigenvalues of the
/// covariance below 1e-12 * lambda_max are treated as null directions and
/// excluded from the form (pseudo-inverse).
class LikelihoodModel {
 public:
  explicit LikelihoodModel(const MeasurementRecord& record);

  double chi2(const Vector15& x) const;
  int null_directions() const { return null_directions_; }
  const Matrix15& covariance() const { return covariance_; }
  const Vector15& observed() const { return observed_; }

 private:
  Vector15 observed_;
  Matrix15 covariance_;  // symmetrized
  Eigen::Matrix<double, 15, Eigen::Dynamic> whitened_;  // kept directions / sqrt(lambda)
  int null_directions_ = 0;
};

/// -2 log L at parameter vector x (entries within [-1, 1]).
double chi2(const Vector15& x, const MeasurementRecord& record);

/// A named scalar function of the 15 coefficients, with the metadata the
/// profiling machinery needs: threshold, scan domain, and whether the
/// evaluation requires a physical density matrix (discord does; the
/// spectral markers do not).
struct ObservableSpec {
  std::string name;
  double threshold = 0.0;
  double domain_lo = -std::numeric_limits<double>::infinity();
  double domain_hi = std::numeric_limits<double>::infinity();
  bool needs_physical = false;
  std::function<double(const Vector15&)> eval;       // full-precision evaluator
  std::function<double(const Vector15&)> eval_fast;  // used inside profile loops
};

struct ObservableOptions {
  DiscordOptions discord;
  QuadratureSpec quadrature;
  int fast_discord_seeds = 16;   // reduced multi-start inside profile loops
  int fast_discord_refine = 2;   // seeds refined per fast evaluation
};

/// Builds the evaluator for one of: discord_top, discord_antitop,
/// discord_difference, entanglement, steering, chsh, magic.
ObservableSpec make_observable(const std::string& name, const SpinBasis& basis,
                               const ObservableOptions& opts = {});

const std::vector<std::string>& known_observables();

struct ProfileOptions {
  double penalty_initial = 1e2;
  double penalty_max = 1e10;
  double penalty_factor = 10.0;
  double constraint_tol = 1e-6;
  double box_penalty = 1e8;
  NelderMeadOptions inner{0.05, 1e-8, 1e-12, 6000};
  int inner_restarts = 2;
  int max_fit_sweeps = 20000;
  double physical_tol = 1e-6;
};

struct FitResult {
  double value = 0.0;
  Vector15 x_star = Vector15::Zero();
};

/// Central value: x* = observed when it lies inside the box [-1,1]^15
/// (projected onto the physical cone first if the observable requires it),
/// otherwise the box-constrained chi^2 minimizer.
FitResult fit_central(const MeasurementRecord& record, const ObservableSpec& spec,
                      const ProfileOptions& opts = {});

/// Minimum -2 log L subject to observable(x) = target, by exterior quadratic
/// penalty with geometric weight escalation. Throws InfeasibleError when the
/// constraint residual cannot be brought below the tolerance.
double profile_at(const MeasurementRecord& record, const ObservableSpec& spec, double target,
                  const ProfileOptions& opts = {}, const Vector15* warm_start = nullptr);

/// Scan grid; NaN bounds are replaced by central -+ 5 provisional sigma
/// clipped to the observable domain.
struct GridSpec {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  int n = 201;
};

enum class ThresholdSide { above, below };

struct ScanResult {
  std::string observable_name;
  double central = 0.0;
  double ci68_low = 0.0;
  double ci68_high = 0.0;
  bool at_boundary_low = false;
  bool at_boundary_high = false;
  std::vector<std::pair<double, double>> curve;  // (value, -2logL above minimum)
  double threshold = 0.0;
  double significance = 0.0;
  ThresholdSide significance_side = ThresholdSide::above;
  bool threshold_unattainable = false;
};

/// Profiles the observable across the grid (serial sweep, warm-started from
/// neighbouring grid points), locates the -2logL = 1 crossings by monotone
/// piecewise-linear interpolation, and evaluates the threshold significance
/// by refitting at the threshold. When the physical domain boundary is
/// reached before a crossing, the corresponding at_boundary flag is set and
/// the interval endpoint is the boundary itself.
ScanResult scan_observable(const MeasurementRecord& record, const ObservableSpec& spec,
                           const GridSpec& grid = {}, const ProfileOptions& opts = {});

/// sqrt of the scan curve interpolated at the threshold. The threshold must
/// lie within the scanned range; out-of-range thresholds need a refit (see
/// scan_observable, which already records the refit-based significance).
double threshold_significance(const ScanResult& result, double threshold);

}  // namespace qcorr
