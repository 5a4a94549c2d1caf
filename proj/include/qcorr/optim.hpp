#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace qcorr {

struct NelderMeadOptions {
  double initial_step = 0.1;
  double x_tol = 1e-9;    // simplex diameter
  double f_tol = 1e-12;   // spread of vertex values, relative to |f_best|
  int max_evals = 4000;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double f = 0.0;
  long evals = 0;
  bool converged = false;
};

/// Downhill simplex with the dimension-adaptive expansion/contraction
/// coefficients. Minimizes f starting from x0.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts = {});

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Prefix-nested low-discrepancy sequence of projective measurement
/// directions (upper hemisphere, z >= 0): a two-dimensional Sobol pair
/// mapped area-preserving onto the hemisphere. A direction and its
/// antipode describe the same measurement, so covering the hemisphere
/// doubles the effective resolution. The first n terms form the n-point
/// grid; grids of different sizes are nested by construction.
Eigen::Vector3d direction_sequence_point(std::uint64_t i);

}  // namespace qcorr
