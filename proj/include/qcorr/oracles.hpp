#pragma once

#include <cstdint>
#include <string>

#include "qcorr/inference.hpp"
#include "qcorr/rng.hpp"

namespace qcorr {

/// A state with a human-readable provenance tag, used by the validation
/// suites. Every generator output passes validate_physicality at 1e-9.
struct NamedState {
  std::string name;
  FanoCoefficients fano;
};

enum class BellState { phi_plus, phi_minus, psi_plus, psi_minus };

NamedState maximally_mixed_state();

/// Exact coefficients of the four maximally entangled states, quantization
/// along axis 3: psi_minus has C = -I, phi_minus has C = diag(-1, 1, 1).
NamedState bell_state(BellState which);

/// p |psi-><psi-| + (1-p) I/4, p in [0, 1].
NamedState werner_state(double p);

/// Uncorrelated pair with the given Bloch vectors (C = P Pbar^T).
NamedState product_state(const Eigen::Vector3d& P, const Eigen::Vector3d& Pbar);

/// Hilbert-Schmidt random density matrix (complex Ginibre G, rho = GG*/tr).
NamedState random_physical_state(std::uint64_t seed);

/// Convex mixture of up to 8 pure product states; separable by
/// construction, so its partial transpose is positive semidefinite.
NamedState random_separable_state(std::uint64_t seed);

/// Brute-force discord: the conditional-entropy bracket minimized over the
/// first n_points terms of the nested direction sequence (so larger grids
/// refine smaller ones). Upper-bounds the optimizer result.
double grid_discord(const FanoCoefficients& fano, Side side, int n_points,
                    double physical_tol = 1e-6);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Uniform-sphere Monte Carlo estimate of the steering integral with its
/// sample standard error. Kahan-compensated accumulation in a fixed order,
/// so results depend only on the seed.
MonteCarloEstimate mc_steering(const Eigen::Matrix3d& C, long n_samples, std::uint64_t seed);

/// Dense random-search upper bound on the constrained profile minimum:
/// best chi2 over feasible draws (|observable - target| < 1e-3), refined by
/// cyclic coordinate descent restricted to the feasible band. Intended for
/// small validation problems only.
double dense_profile_oracle(const MeasurementRecord& record, const ObservableSpec& spec,
                            double target, int n_draws, std::uint64_t seed);

}  // namespace qcorr
