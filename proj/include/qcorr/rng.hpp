#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace qcorr {

/// Deterministic random stream with a stable cross-platform contract: every
/// value is derived from std::mt19937_64 draws through fixed arithmetic
/// (no implementation-defined distributions), so a given seed produces the
/// same sequence on every platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairs generated, one cached).
  double gaussian();

  /// Uniform direction on the unit sphere.
  Eigen::Vector3d unit_vector();

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace qcorr
