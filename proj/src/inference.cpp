#include "qcorr/inference.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

namespace qcorr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vector15 clamp_box(const Vector15& x) {
  Vector15 out;
  for (int i = 0; i < 15; ++i) out(i) = std::clamp(x(i), -1.0, 1.0);
  return out;
}

double min_state_eigenvalue(const Vector15& x, const SpinBasis& basis) {
  const auto rho = assemble_density(FanoCoefficients::from_vector(x, basis));
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(rho.matrix());
  return solver.eigenvalues()(0);
}

}  // namespace

void MeasurementRecord::validate() const {
  basis.validate();
  bin.validate();
  for (int i = 0; i < 15; ++i)
    if (std::abs(observed(i)) > 1.5) {
      std::ostringstream msg;
      msg << "record '" << label << "': observed coefficient " << i << " = " << observed(i)
          << " outside [-1.5, 1.5]";
      throw ValidationError(msg.str());
    }
  const double scale = std::max(covariance.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8 * scale) {
    std::ostringstream msg;
    msg << "record '" << label << "': covariance asymmetry " << asym / scale
        << " (relative) exceeds 1e-8";
    throw ValidationError(msg.str());
  }
  const Matrix15 sym = 0.5 * (covariance + covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix15> solver(sym);
  const double lambda_max = solver.eigenvalues().maxCoeff();
  const double floor = -1e-10 * std::max(lambda_max, 0.0);
  if (solver.eigenvalues()(0) < floor) {
    std::ostringstream msg;
    msg << "record '" << label << "': covariance eigenvalue " << solver.eigenvalues()(0)
        << " below tolerance " << floor;
    throw ValidationError(msg.str());
  }
}

FanoCoefficients MeasurementRecord::observed_fano() const {
  return FanoCoefficients::from_vector(observed, basis);
}

LikelihoodModel::LikelihoodModel(const MeasurementRecord& record)
    : observed_(record.observed),
      covariance_(0.5 * (record.covariance + record.covariance.transpose())) {
  Eigen::SelfAdjointEigenSolver<Matrix15> solver(covariance_);
  const double lambda_max = solver.eigenvalues().maxCoeff();
  if (!(lambda_max > 0.0))
    throw ValidationError("covariance has no positive eigenvalues; likelihood undefined");

  const double floor = -1e-10 * lambda_max;
  const double cut = 1e-12 * lambda_max;
  std::vector<int> kept;
  for (int i = 0; i < 15; ++i) {
    const double lambda = solver.eigenvalues()(i);
    if (lambda < floor) {
      std::ostringstream msg;
      msg << "covariance eigenvalue " << i << " = " << lambda
          << " is negative beyond tolerance; matrix not invertible after conditioning";
      throw ValidationError(msg.str());
    }
    if (lambda >= cut) kept.push_back(i);
  }
  null_directions_ = 15 - static_cast<int>(kept.size());
  whitened_.resize(15, static_cast<int>(kept.size()));
  for (size_t k = 0; k < kept.size(); ++k)
    whitened_.col(static_cast<int>(k)) =
        solver.eigenvectors().col(kept[k]) / std::sqrt(solver.eigenvalues()(kept[k]));
}

double LikelihoodModel::chi2(const Vector15& x) const {
  return (whitened_.transpose() * (observed_ - x)).squaredNorm();
}

double chi2(const Vector15& x, const MeasurementRecord& record) {
  for (int i = 0; i < 15; ++i)
    if (std::abs(x(i)) > 1.0 + 1e-12) {
      std::ostringstream msg;
      msg << "chi2: parameter " << i << " = " << x(i) << " outside [-1, 1]";
      throw ValidationError(msg.str());
    }
  return LikelihoodModel(record).chi2(x);
}

const std::vector<std::string>& known_observables() {
  static const std::vector<std::string> names = {
      "discord_top", "discord_antitop", "discord_difference", "entanglement",
      "steering",    "chsh",            "magic"};
  return names;
}

ObservableSpec make_observable(const std::string& name, const SpinBasis& basis,
                               const ObservableOptions& opts) {
  ObservableSpec spec;
  spec.name = name;

  const auto make_discord_eval = [basis, opts](Side side, bool fast) {
    // The fast variant refines only the best few starts and carries the
    // previous argmin across calls, which keeps penalty loops cheap while the
    // scanned state changes slowly.
    auto hint = std::make_shared<Eigen::Vector3d>(Eigen::Vector3d::Zero());
    detail::DiscordEvalSettings settings =
        detail::DiscordEvalSettings::from_options(side, opts.discord);
    if (fast) {
      settings.seed_count = opts.fast_discord_seeds;
      settings.refine_top_k = opts.fast_discord_refine;
    }
    return [settings, basis, hint](const Vector15& x) {
      const auto fano = FanoCoefficients::from_vector(x, basis);
      return detail::discord_core(fano, settings, hint.get()).value;
    };
  };

  if (name == "discord_top" || name == "discord_antitop") {
    const Side side = name == "discord_top" ? Side::top : Side::antitop;
    spec.threshold = 0.0;
    spec.domain_lo = 0.0;
    spec.needs_physical = true;
    spec.eval = make_discord_eval(side, false);
    spec.eval_fast = make_discord_eval(side, true);
    return spec;
  }
  if (name == "discord_difference") {
    spec.threshold = 0.0;
    spec.needs_physical = true;
    auto top = make_discord_eval(Side::top, false);
    auto antitop = make_discord_eval(Side::antitop, false);
    spec.eval = [top, antitop](const Vector15& x) { return top(x) - antitop(x); };
    auto top_fast = make_discord_eval(Side::top, true);
    auto antitop_fast = make_discord_eval(Side::antitop, true);
    spec.eval_fast = [top_fast, antitop_fast](const Vector15& x) {
      return top_fast(x) - antitop_fast(x);
    };
    return spec;
  }
  if (name == "entanglement") {
    spec.threshold = 1.0;
    spec.domain_lo = 0.0;
    spec.domain_hi = 3.0;
    spec.eval = [basis](const Vector15& x) {
      const auto rho = assemble_density(FanoCoefficients::from_vector(x, basis));
      const Eigen::Matrix4cd pt = partial_transpose(rho, Side::antitop);
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> solver(0.5 * (pt + pt.adjoint()));
      return 1.0 - 4.0 * solver.eigenvalues()(0);
    };
    spec.eval_fast = spec.eval;
    return spec;
  }
  if (name == "steering") {
    spec.threshold = kTwoPi;
    spec.domain_lo = 0.0;
    spec.domain_hi = 2.0 * kTwoPi;
    spec.eval = [basis, quad = opts.quadrature](const Vector15& x) {
      return steering_marker(FanoCoefficients::from_vector(x, basis).C, quad);
    };
    spec.eval_fast = spec.eval;
    return spec;
  }
  if (name == "chsh") {
    spec.threshold = 1.0;
    spec.domain_lo = 0.0;
    spec.domain_hi = 2.0;
    spec.eval = [basis](const Vector15& x) {
      return chsh_marker(FanoCoefficients::from_vector(x, basis).C);
    };
    spec.eval_fast = spec.eval;
    return spec;
  }
  if (name == "magic") {
    spec.threshold = 0.0;
    spec.domain_lo = 0.0;
    spec.eval = [basis](const Vector15& x) {
      return magic(FanoCoefficients::from_vector(x, basis));
    };
    spec.eval_fast = spec.eval;
    return spec;
  }

  std::ostringstream msg;
  msg << "unknown observable '" << name << "'; known:";
  for (const auto& known : known_observables()) msg << " " << known;
  throw ValidationError(msg.str());
}

namespace {

// Cyclic coordinate descent for the box-constrained quadratic. Exact
// per-coordinate minimization, so the clamp example (one entry at 1.1 with
// diagonal covariance) lands exactly on the box face.
Vector15 box_constrained_minimum(const LikelihoodModel& model, const ProfileOptions& opts) {
  const Vector15& o = model.observed();
  Vector15 x = clamp_box(o);

  // Pseudo-inverse quadratic form Q with chi2(x) = (o-x)^T Q (o-x).
  Matrix15 quad = Matrix15::Zero();
  {
    Eigen::SelfAdjointEigenSolver<Matrix15> solver(model.covariance());
    const double cut = 1e-12 * solver.eigenvalues().maxCoeff();
    for (int i = 0; i < 15; ++i)
      if (solver.eigenvalues()(i) >= cut)
        quad += solver.eigenvectors().col(i) * solver.eigenvectors().col(i).transpose() /
                solver.eigenvalues()(i);
  }

  for (int sweep = 0; sweep < opts.max_fit_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int i = 0; i < 15; ++i) {
      if (quad(i, i) <= 0.0) {
        const double v = std::clamp(o(i), -1.0, 1.0);
        max_change = std::max(max_change, std::abs(v - x(i)));
        x(i) = v;
        continue;
      }
      double cross = 0.0;
      for (int j = 0; j < 15; ++j)
        if (j != i) cross += quad(i, j) * (x(j) - o(j));
      const double v = std::clamp(o(i) - cross / quad(i, i), -1.0, 1.0);
      max_change = std::max(max_change, std::abs(v - x(i)));
      x(i) = v;
    }
    if (max_change < 1e-14) return x;
  }
  throw NumericalError("fit_central: box-constrained coordinate descent did not converge within " +
                       std::to_string(opts.max_fit_sweeps) + " sweeps");
}

struct PenaltyObjective {
  const LikelihoodModel* model;
  const ObservableSpec* spec;
  const SpinBasis* basis;
  double target = 0.0;
  double mu = 0.0;
  double box_penalty = 1e8;
  bool constrain_target = true;

  double operator()(const Eigen::VectorXd& raw) const {
    Vector15 x;
    for (int i = 0; i < 15; ++i) x(i) = raw(i);
    const Vector15 inside = clamp_box(x);
    double value = model->chi2(inside) + box_penalty * (x - inside).squaredNorm();
    if (constrain_target) {
      const double deviation = spec->eval_fast(inside) - target;
      value += mu * deviation * deviation;
    }
    if (spec->needs_physical) {
      const double lambda_min = min_state_eigenvalue(inside, *basis);
      if (lambda_min < 0.0) value += mu * lambda_min * lambda_min;
    }
    return value;
  }
};

Eigen::VectorXd to_dynamic(const Vector15& x) {
  Eigen::VectorXd out(15);
  for (int i = 0; i < 15; ++i) out(i) = x(i);
  return out;
}

Vector15 from_dynamic(const Eigen::VectorXd& x) {
  Vector15 out;
  for (int i = 0; i < 15; ++i) out(i) = x(i);
  return out;
}

// One penalty stage: Nelder-Mead with restarts until they stop paying off.
Eigen::VectorXd minimize_stage(const PenaltyObjective& objective, Eigen::VectorXd x,
                               const ProfileOptions& opts) {
  NelderMeadOptions nm = opts.inner;
  double best = objective(x);
  for (int attempt = 0; attempt <= opts.inner_restarts; ++attempt) {
    const auto result = nelder_mead(objective, x, nm);
    if (result.f < best - 1e-12 * (1.0 + std::abs(best))) {
      best = result.f;
      x = result.x;
      nm.initial_step *= 0.25;
    } else {
      x = result.f < best ? result.x : x;
      break;
    }
  }
  return x;
}

Vector15 run_penalty_schedule(const LikelihoodModel& model, const ObservableSpec& spec,
                              const SpinBasis& basis, double target, bool constrain_target,
                              const Vector15& start, const ProfileOptions& opts) {
  PenaltyObjective objective;
  objective.model = &model;
  objective.spec = &spec;
  objective.basis = &basis;
  objective.target = target;
  objective.box_penalty = opts.box_penalty;
  objective.constrain_target = constrain_target;

  Eigen::VectorXd x = to_dynamic(start);
  for (double mu = opts.penalty_initial; mu <= opts.penalty_max; mu *= opts.penalty_factor) {
    objective.mu = mu;
    x = minimize_stage(objective, x, opts);
  }
  return clamp_box(from_dynamic(x));
}

}  // namespace

FitResult fit_central(const MeasurementRecord& record, const ObservableSpec& spec,
                      const ProfileOptions& opts) {
  record.validate();
  const LikelihoodModel model(record);

  const bool inside_box = (record.observed.cwiseAbs().array() <= 1.0).all();
  Vector15 x_star = inside_box ? record.observed : box_constrained_minimum(model, opts);

  if (spec.needs_physical && min_state_eigenvalue(x_star, record.basis) < -opts.physical_tol) {
    // Nearest physical point in the chi2 metric; the discord evaluator is
    // undefined past the physical cone.
    x_star = run_penalty_schedule(model, spec, record.basis, 0.0, /*constrain_target=*/false,
                                  x_star, opts);
  }

  FitResult result;
  result.x_star = x_star;
  result.value = spec.eval(x_star);
  return result;
}

double profile_at(const MeasurementRecord& record, const ObservableSpec& spec, double target,
                  const ProfileOptions& opts, const Vector15* warm_start) {
  const LikelihoodModel model(record);
  const Vector15 start = warm_start != nullptr ? *warm_start : fit_central(record, spec, opts).x_star;

  const Vector15 solution =
      run_penalty_schedule(model, spec, record.basis, target, /*constrain_target=*/true, start, opts);

  const double residual = std::abs(spec.eval_fast(solution) - target);
  const double tol = std::max(opts.constraint_tol, opts.constraint_tol * std::abs(target));
  if (residual > tol) {
    std::ostringstream msg;
    msg << "profile_at: constraint residual " << residual << " for observable '" << spec.name
        << "' at target " << target << " exceeds tolerance " << tol
        << " after penalty escalation to " << opts.penalty_max << " (target may be unattainable)";
    throw InfeasibleError(msg.str());
  }
  return model.chi2(solution);
}

namespace {

struct ProfilePoint {
  double target = 0.0;
  double m2ll = 0.0;
  bool evaluated = false;
};

// Warm-started profile sweep from the central index outward; returns the
// index of the last evaluated point on each side (targets past an
// unattainable value are truncated).
void sweep_profiles(const MeasurementRecord& record, const ObservableSpec& spec,
                    const ProfileOptions& opts, const Vector15& x_star,
                    std::vector<ProfilePoint>& points, int central_index, int& first_ok,
                    int& last_ok) {
  Vector15 warm = x_star;
  last_ok = central_index - 1;
  for (size_t k = central_index; k < points.size(); ++k) {
    try {
      // Re-warm from scratch is wasteful; carry the previous solution.
      const LikelihoodModel model(record);
      const Vector15 solution = run_penalty_schedule(model, spec, record.basis,
                                                     points[k].target, true, warm, opts);
      const double residual = std::abs(spec.eval_fast(solution) - points[k].target);
      const double tol =
          std::max(opts.constraint_tol, opts.constraint_tol * std::abs(points[k].target));
      if (residual > tol) break;
      points[k].m2ll = model.chi2(solution);
      points[k].evaluated = true;
      warm = solution;
      last_ok = static_cast<int>(k);
    } catch (const NumericalError&) {
      break;
    }
  }
  warm = x_star;
  first_ok = central_index;
  for (int k = central_index - 1; k >= 0; --k) {
    try {
      const LikelihoodModel model(record);
      const Vector15 solution = run_penalty_schedule(model, spec, record.basis,
                                                     points[k].target, true, warm, opts);
      const double residual = std::abs(spec.eval_fast(solution) - points[k].target);
      const double tol =
          std::max(opts.constraint_tol, opts.constraint_tol * std::abs(points[k].target));
      if (residual > tol) break;
      points[k].m2ll = model.chi2(solution);
      points[k].evaluated = true;
      warm = solution;
      first_ok = k;
    } catch (const NumericalError&) {
      break;
    }
  }
}

}  // namespace

namespace {

ScanResult scan_with_span(const MeasurementRecord& record, const ObservableSpec& spec,
                          const GridSpec& grid, const ProfileOptions& opts,
                          const FitResult& fit, double sigma, double span_factor,
                          bool auto_grid, double* curve_minimum) {
  const double central = fit.value;
  double lo = std::isnan(grid.lo)
                  ? std::max(spec.domain_lo, central - span_factor * sigma)
                  : grid.lo;
  double hi = std::isnan(grid.hi)
                  ? std::min(spec.domain_hi, central + span_factor * sigma)
                  : grid.hi;
  if (lo > central + 1e-12 || hi < central - 1e-12)
    throw ValidationError("scan grid does not cover the central value");
  lo = std::min(lo, central);
  hi = std::max(hi, central);

  std::vector<ProfilePoint> points(grid.n);
  for (int k = 0; k < grid.n; ++k)
    points[k].target = lo + (hi - lo) * k / (grid.n - 1.0);
  int central_index = 0;
  for (int k = 1; k < grid.n; ++k)
    if (std::abs(points[k].target - central) < std::abs(points[central_index].target - central))
      central_index = k;

  int first_ok = central_index, last_ok = central_index;
  sweep_profiles(record, spec, opts, fit.x_star, points, central_index, first_ok, last_ok);
  if (!points[central_index].evaluated)
    throw NumericalError("scan_observable: profile failed at the central grid point");

  double m_min = std::numeric_limits<double>::infinity();
  for (int k = first_ok; k <= last_ok; ++k) m_min = std::min(m_min, points[k].m2ll);
  *curve_minimum = m_min;

  ScanResult result;
  result.observable_name = spec.name;
  result.central = central;
  result.threshold = spec.threshold;
  for (int k = first_ok; k <= last_ok; ++k)
    result.curve.emplace_back(points[k].target, points[k].m2ll - m_min);

  // Crossings: monotone envelope walking outward from the central index.
  const auto locate = [&](int from, int to, int step) -> std::pair<bool, double> {
    double envelope = points[from].m2ll - m_min;
    double prev_t = points[from].target, prev_m = envelope;
    for (int k = from + step; step > 0 ? k <= to : k >= to; k += step) {
      const double m = std::max(envelope, points[k].m2ll - m_min);
      if (m >= 1.0) {
        const double t = prev_m >= 1.0
                             ? prev_t
                             : prev_t + (1.0 - prev_m) * (points[k].target - prev_t) /
                                            (m - prev_m);
        return {true, t};
      }
      envelope = m;
      prev_t = points[k].target;
      prev_m = m;
    }
    return {false, prev_t};
  };

  const char* too_narrow = auto_grid ? "auto-grid too narrow" : "scan grid too narrow";
  const auto [crossed_high, t_high] = locate(central_index, last_ok, +1);
  if (crossed_high) {
    result.ci68_high = t_high;
  } else {
    const bool at_domain = last_ok < grid.n - 1 || hi >= spec.domain_hi - 1e-12;
    if (!at_domain)
      throw ValidationError(std::string(too_narrow) +
                            " on the high side: no -2logL = 1 crossing; expand the grid");
    result.at_boundary_high = true;
    result.ci68_high = points[last_ok].target;
  }
  const auto [crossed_low, t_low] = locate(central_index, first_ok, -1);
  if (crossed_low) {
    result.ci68_low = t_low;
  } else {
    const bool at_domain = first_ok > 0 || lo <= spec.domain_lo + 1e-12;
    if (!at_domain)
      throw ValidationError(std::string(too_narrow) +
                            " on the low side: no -2logL = 1 crossing; expand the grid");
    result.at_boundary_low = true;
    result.ci68_low = points[first_ok].target;
  }
  return result;
}

}  // namespace

ScanResult scan_observable(const MeasurementRecord& record, const ObservableSpec& spec,
                           const GridSpec& grid, const ProfileOptions& opts) {
  if (grid.n < 3) throw ValidationError("scan grid needs at least 3 points");

  const auto fit = fit_central(record, spec, opts);
  const double central = fit.value;

  // Provisional width from the linearized Gaussian formula, floored for
  // observables whose gradient vanishes at the central point (discord near
  // zero correlations is quadratic in the coefficients).
  Vector15 gradient = Vector15::Zero();
  {
    const double step = 1e-5;
    for (int i = 0; i < 15; ++i) {
      Vector15 up = fit.x_star, down = fit.x_star;
      up(i) = std::min(1.0, up(i) + step);
      down(i) = std::max(-1.0, down(i) - step);
      const double width = up(i) - down(i);
      if (width <= 0.0) continue;
      gradient(i) = (spec.eval_fast(up) - spec.eval_fast(down)) / width;
    }
  }
  const LikelihoodModel model(record);
  double sigma = std::sqrt(std::max(0.0, gradient.dot(model.covariance() * gradient)));
  sigma = std::max(sigma, 1e-3 * (1.0 + std::abs(central)));

  const bool auto_grid = std::isnan(grid.lo) && std::isnan(grid.hi);
  double span_factor = 5.0;
  double m_min = 0.0;
  ScanResult result;
  for (int attempt = 0;; ++attempt) {
    try {
      result = scan_with_span(record, spec, grid, opts, fit, sigma, span_factor, auto_grid,
                              &m_min);
      break;
    } catch (const ValidationError& e) {
      const bool narrow = std::string(e.what()).find("auto-grid too narrow") != std::string::npos;
      if (!auto_grid || !narrow || attempt >= 3) throw;
      span_factor *= 4.0;  // widen and retry; explicit grids keep strict errors
    }
  }

  // Threshold significance by refitting at the threshold (never by curve
  // extrapolation).
  result.significance_side = central > spec.threshold ? ThresholdSide::above : ThresholdSide::below;
  try {
    const double m_thr = profile_at(record, spec, spec.threshold, opts, &fit.x_star);
    result.significance = std::sqrt(std::max(0.0, m_thr - m_min));
  } catch (const InfeasibleError&) {
    result.significance = std::numeric_limits<double>::infinity();
    result.threshold_unattainable = true;
  }
  return result;
}

double threshold_significance(const ScanResult& result, double threshold) {
  if (result.curve.empty()) throw ValidationError("threshold_significance: empty curve");
  if (threshold < result.curve.front().first - 1e-12 ||
      threshold > result.curve.back().first + 1e-12)
    throw ValidationError(
        "threshold_significance: threshold outside the scanned range; refit instead of "
        "extrapolating");

  // Index of the curve minimum; interpolate on the monotone envelope moving
  // away from it.
  size_t argmin = 0;
  for (size_t k = 1; k < result.curve.size(); ++k)
    if (result.curve[k].second < result.curve[argmin].second) argmin = k;

  const auto& curve = result.curve;
  const auto side_value = [&](size_t from, size_t to, bool rightward) {
    double envelope = curve[from].second;
    double prev_t = curve[from].first, prev_m = envelope;
    for (size_t k = from; rightward ? k < to : k > to;) {
      k = rightward ? k + 1 : k - 1;
      const double m = std::max(envelope, curve[k].second);
      const double t = curve[k].first;
      const bool contains = rightward ? (threshold <= t) : (threshold >= t);
      if (contains) {
        if (std::abs(t - prev_t) < 1e-300) return m;
        return prev_m + (m - prev_m) * (threshold - prev_t) / (t - prev_t);
      }
      envelope = m;
      prev_t = t;
      prev_m = m;
    }
    return prev_m;
  };

  double value;
  if (threshold >= curve[argmin].first) {
    value = argmin + 1 <= curve.size() - 1 ? side_value(argmin, curve.size() - 1, true)
                                           : curve[argmin].second;
  } else {
    value = argmin >= 1 ? side_value(argmin, 0, false) : curve[argmin].second;
  }
  return std::sqrt(std::max(0.0, value));
}

}  // namespace qcorr
