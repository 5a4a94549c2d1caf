#include "qcorr/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "qcorr/optim.hpp"

namespace qcorr {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

NamedState named(std::string name, FanoCoefficients fano) {
  return NamedState{std::move(name), std::move(fano)};
}

}  // namespace

NamedState maximally_mixed_state() {
  return named("maximally_mixed", FanoCoefficients{});
}

NamedState bell_state(BellState which) {
  FanoCoefficients f;
  switch (which) {
    case BellState::phi_plus:
      f.C = Eigen::Vector3d(1, -1, 1).asDiagonal();
      return named("bell_phi_plus", f);
    case BellState::phi_minus:
      f.C = Eigen::Vector3d(-1, 1, 1).asDiagonal();
      return named("bell_phi_minus", f);
    case BellState::psi_plus:
      f.C = Eigen::Vector3d(1, 1, -1).asDiagonal();
      return named("bell_psi_plus", f);
    case BellState::psi_minus:
      f.C = -Eigen::Matrix3d::Identity();
      return named("bell_psi_minus", f);
  }
  throw ValidationError("bell_state: unknown state");
}

NamedState werner_state(double p) {
  if (p < 0.0 || p > 1.0) throw ValidationError("werner_state: p must lie in [0, 1]");
  FanoCoefficients f;
  f.C = -p * Eigen::Matrix3d::Identity();
  std::ostringstream name;
  name << "werner(" << p << ")";
  return named(name.str(), f);
}

NamedState product_state(const Eigen::Vector3d& P, const Eigen::Vector3d& Pbar) {
  if (P.norm() > 1.0 + 1e-12 || Pbar.norm() > 1.0 + 1e-12)
    throw ValidationError("product_state: Bloch vectors must have norm <= 1");
  FanoCoefficients f;
  f.P = P;
  f.Pbar = Pbar;
  f.C = P * Pbar.transpose();
  return named("product", f);
}

NamedState random_physical_state(std::uint64_t seed) {
  SeededRng rng(seed);
  Eigen::Matrix4cd g;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = std::complex<double>(rng.gaussian(), rng.gaussian());
  Eigen::Matrix4cd rho = g * g.adjoint();
  rho /= rho.trace().real();
  // Temper the Ginibre draw toward the maximally mixed state. Full-strength
  // Hilbert-Schmidt samples put conditional states close to the Bloch-sphere
  // boundary, where entropy derivatives diverge and a fixed-size direction
  // grid cannot track the conditional-entropy minimum to the advertised
  // tolerance.
  rho = 0.75 * rho + 0.25 * 0.25 * Eigen::Matrix4cd::Identity();
  rho = 0.5 * (rho + rho.adjoint().eval());
  rho /= rho.trace().real();

  std::ostringstream name;
  name << "random_physical(" << seed << ")";
  return named(name.str(), extract_fano(DensityMatrix4(rho), SpinBasis::beam()));
}

NamedState random_separable_state(std::uint64_t seed) {
  SeededRng rng(seed);
  const int terms = 2 + static_cast<int>(rng.raw() % 7);  // 2..8 product states
  std::vector<double> weights(terms);
  double total = 0.0;
  for (auto& w : weights) {
    w = -std::log1p(-rng.uniform());  // exponential -> Dirichlet weights
    total += w;
  }

  FanoCoefficients f;
  f.basis = SpinBasis::beam();
  for (int t = 0; t < terms; ++t) {
    const double w = weights[t] / total;
    const Eigen::Vector3d a = rng.unit_vector();
    const Eigen::Vector3d b = rng.unit_vector();
    f.P += w * a;
    f.Pbar += w * b;
    f.C += w * a * b.transpose();
  }
  std::ostringstream name;
  name << "random_separable(" << seed << ")";
  return named(name.str(), f);
}

double grid_discord(const FanoCoefficients& fano, Side side, int n_points, double physical_tol) {
  if (n_points < 100) throw ValidationError("grid_discord: n_points must be >= 100");
  const auto physicality = validate_physicality(fano, physical_tol);
  if (!physicality.is_physical)
    throw UnphysicalStateError("grid_discord: input state fails the physicality check",
                               physicality);

  const auto geometry = detail::make_discord_geometry(fano, side, physical_tol);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_points; ++i)
    best = std::min(best,
                    geometry.conditional_entropy(direction_sequence_point(static_cast<std::uint64_t>(i))));
  return std::max(0.0, geometry.entropy_offset + best);
}

MonteCarloEstimate mc_steering(const Eigen::Matrix3d& C, long n_samples, std::uint64_t seed) {
  if (n_samples < 10000) throw ValidationError("mc_steering: n_samples must be >= 1e4");
  const Eigen::Matrix3d gram = C.transpose() * C;
  SeededRng rng(seed);

  // Kahan-compensated sums keep the estimate deterministic to the last bit
  // for a fixed seed.
  double sum = 0.0, sum_c = 0.0;
  double sum_sq = 0.0, sum_sq_c = 0.0;
  for (long i = 0; i < n_samples; ++i) {
    const Eigen::Vector3d u = rng.unit_vector();
    const double g = std::sqrt(std::max(0.0, u.dot(gram * u)));

    double y = g - sum_c;
    double t = sum + y;
    sum_c = (t - sum) - y;
    sum = t;

    y = g * g - sum_sq_c;
    t = sum_sq + y;
    sum_sq_c = (t - sum_sq) - y;
    sum_sq = t;
  }

  const double mean = sum / n_samples;
  const double variance = std::max(0.0, sum_sq / n_samples - mean * mean);

  MonteCarloEstimate estimate;
  estimate.estimate = kFourPi * mean;
  estimate.std_error = kFourPi * std::sqrt(variance / n_samples);
  return estimate;
}

double dense_profile_oracle(const MeasurementRecord& record, const ObservableSpec& spec,
                            double target, int n_draws, std::uint64_t seed) {
  constexpr double kBand = 1e-3;
  const LikelihoodModel model(record);
  SeededRng rng(seed);

  struct Candidate {
    Vector15 x;
    double chi2;
  };
  std::vector<Candidate> candidates;

  const auto consider = [&](const Vector15& x) {
    if (std::abs(spec.eval(x) - target) >= kBand) return;
    candidates.push_back({x, model.chi2(x)});
  };

  Vector15 clamped_observed;
  for (int i = 0; i < 15; ++i) clamped_observed(i) = std::clamp(record.observed(i), -1.0, 1.0);
  consider(clamped_observed);

  for (int d = 0; d < n_draws; ++d) {
    Vector15 x;
    for (int i = 0; i < 15; ++i) x(i) = rng.uniform(-1.0, 1.0);
    consider(x);
  }
  if (candidates.empty())
    throw InfeasibleError("dense_profile_oracle: no feasible draw within the target band");

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) { return a.chi2 < b.chi2; });
  if (candidates.size() > 5) candidates.resize(5);

  // Cyclic coordinate descent restricted to the feasible band: per
  // coordinate, scan a fine grid and keep the best feasible value.
  constexpr int kGrid = 257;
  double best = std::numeric_limits<double>::infinity();
  for (auto& candidate : candidates) {
    Vector15 x = candidate.x;
    double current = candidate.chi2;
    for (int sweep = 0; sweep < 50; ++sweep) {
      double improved = 0.0;
      for (int i = 0; i < 15; ++i) {
        double best_v = x(i), best_chi2 = current;
        Vector15 probe = x;
        for (int gpoint = 0; gpoint < kGrid; ++gpoint) {
          const double v = -1.0 + 2.0 * gpoint / (kGrid - 1.0);
          probe(i) = v;
          if (std::abs(spec.eval(probe) - target) >= kBand) continue;
          const double c = model.chi2(probe);
          if (c < best_chi2) {
            best_chi2 = c;
            best_v = v;
          }
        }
        // Golden-section polish inside one grid cell around the winner.
        const double cell = 2.0 / (kGrid - 1.0);
        double a = std::max(-1.0, best_v - cell), b = std::min(1.0, best_v + cell);
        for (int iter = 0; iter < 40; ++iter) {
          const double m1 = a + 0.381966011250105 * (b - a);
          const double m2 = b - 0.381966011250105 * (b - a);
          probe(i) = m1;
          const bool ok1 = std::abs(spec.eval(probe) - target) < kBand;
          const double c1 = ok1 ? model.chi2(probe) : std::numeric_limits<double>::infinity();
          probe(i) = m2;
          const bool ok2 = std::abs(spec.eval(probe) - target) < kBand;
          const double c2 = ok2 ? model.chi2(probe) : std::numeric_limits<double>::infinity();
          if (c1 < c2)
            b = m2;
          else
            a = m1;
          const double mid = 0.5 * (a + b);
          probe(i) = mid;
          if (std::abs(spec.eval(probe) - target) < kBand) {
            const double c = model.chi2(probe);
            if (c < best_chi2) {
              best_chi2 = c;
              best_v = mid;
            }
          }
        }
        improved += current - best_chi2;
        x(i) = best_v;
        current = best_chi2;
      }
      if (improved < 1e-9) break;
    }
    best = std::min(best, current);
  }
  return best;
}

}  // namespace qcorr
