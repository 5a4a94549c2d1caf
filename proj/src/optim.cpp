#include "qcorr/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qcorr {

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const NelderMeadOptions& opts) {
  const int n = static_cast<int>(x0.size());
  if (n < 1) throw std::invalid_argument("nelder_mead: empty start point");

  // Adaptive coefficients (Gao & Han): better behaved as n grows.
  const double alpha = 1.0;
  const double beta = 1.0 + 2.0 / n;
  const double gamma = 0.75 - 0.5 / n;
  const double delta = 1.0 - 1.0 / n;

  NelderMeadResult result;
  std::vector<Eigen::VectorXd> x(n + 1, x0);
  std::vector<double> fx(n + 1);
  for (int i = 1; i <= n; ++i) x[i](i - 1) += opts.initial_step;
  for (int i = 0; i <= n; ++i) fx[i] = f(x[i]);
  result.evals = n + 1;

  std::vector<int> order(n + 1);
  while (result.evals < opts.max_evals) {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });

    const int best = order[0], worst = order[n], second_worst = order[n - 1];

    double diameter = 0.0;
    for (int i = 1; i <= n; ++i)
      diameter = std::max(diameter, (x[order[i]] - x[best]).cwiseAbs().maxCoeff());
    const double spread = fx[worst] - fx[best];
    if (diameter < opts.x_tol && spread < opts.f_tol * (1.0 + std::abs(fx[best]))) {
      result.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (int i = 0; i <= n; ++i)
      if (i != worst) centroid += x[i];
    centroid /= n;

    const Eigen::VectorXd reflected = centroid + alpha * (centroid - x[worst]);
    const double f_reflected = f(reflected);
    ++result.evals;

    if (f_reflected < fx[best]) {
      const Eigen::VectorXd expanded = centroid + beta * (reflected - centroid);
      const double f_expanded = f(expanded);
      ++result.evals;
      if (f_expanded < f_reflected) {
        x[worst] = expanded;
        fx[worst] = f_expanded;
      } else {
        x[worst] = reflected;
        fx[worst] = f_reflected;
      }
      continue;
    }
    if (f_reflected < fx[second_worst]) {
      x[worst] = reflected;
      fx[worst] = f_reflected;
      continue;
    }

    const bool outside = f_reflected < fx[worst];
    const Eigen::VectorXd contracted =
        outside ? (centroid + gamma * (reflected - centroid)).eval()
                : (centroid - gamma * (centroid - x[worst])).eval();
    const double f_contracted = f(contracted);
    ++result.evals;
    if (f_contracted < std::min(f_reflected, fx[worst])) {
      x[worst] = contracted;
      fx[worst] = f_contracted;
      continue;
    }

    // Shrink toward the best vertex.
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      x[i] = x[best] + delta * (x[i] - x[best]);
      fx[i] = f(x[i]);
      ++result.evals;
    }
  }

  int best = 0;
  for (int i = 1; i <= n; ++i)
    if (fx[i] < fx[best]) best = i;
  result.x = x[best];
  result.f = fx[best];
  return result;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  nodes.resize(n);
  weights.resize(n);
  const int half = (n + 1) / 2;
  for (int k = 0; k < half; ++k) {
    // Newton iteration from the Chebyshev-based initial guess.
    double x = std::cos(std::numbers::pi * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[k] = -x;
    nodes[n - 1 - k] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    weights[k] = w;
    weights[n - 1 - k] = w;
  }
}

namespace {

// Radical inverse in base 2 on 64 bits (first Sobol dimension).
double radical_inverse2(std::uint64_t i) {
  std::uint64_t bits = i;
  bits = (bits << 32) | (bits >> 32);
  bits = ((bits & 0x0000ffff0000ffffULL) << 16) | ((bits & 0xffff0000ffff0000ULL) >> 16);
  bits = ((bits & 0x00ff00ff00ff00ffULL) << 8) | ((bits & 0xff00ff00ff00ff00ULL) >> 8);
  bits = ((bits & 0x0f0f0f0f0f0f0f0fULL) << 4) | ((bits & 0xf0f0f0f0f0f0f0f0ULL) >> 4);
  bits = ((bits & 0x3333333333333333ULL) << 2) | ((bits & 0xccccccccccccccccULL) >> 2);
  bits = ((bits & 0x5555555555555555ULL) << 1) | ((bits & 0xaaaaaaaaaaaaaaaaULL) >> 1);
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Second Sobol dimension: primitive polynomial x + 1, directions
// m_k = (2 m_{k-1}) xor m_{k-1}, natural (non-Gray) indexing so the pair
// with radical_inverse2 forms a (0,2)-sequence in base 2.
double sobol_dim2(std::uint64_t i) {
  static const auto directions = [] {
    std::array<std::uint64_t, 64> v{};
    std::uint64_t m = 1;
    for (int k = 1; k < 64; ++k) {
      v[k] = m << (64 - k);
      m = (m << 1) ^ m;
    }
    return v;
  }();
  std::uint64_t y = 0;
  for (int b = 1; i; ++b, i >>= 1)
    if (i & 1) y ^= directions[b];
  return static_cast<double>(y >> 11) * 0x1.0p-53;
}

}  // namespace

Eigen::Vector3d direction_sequence_point(std::uint64_t i) {
  const double z = radical_inverse2(i);  // uniform height on the hemisphere
  const double phi = 2.0 * std::numbers::pi * sobol_dim2(i);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}

}  // namespace qcorr
