#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qcorr/observables.hpp"
#include "qcorr/oracles.hpp"
#include "qcorr/rng.hpp"

using namespace qcorr;
using Eigen::Matrix3d;
using Eigen::Matrix4cd;
using Eigen::Vector3d;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Projector algebra done the long way, as an independent oracle.
struct ProjectorOutcome {
  double probability;
  Vector3d bloch;
};

ProjectorOutcome brute_force_post_measurement(const Matrix4cd& rho, const Vector3d& u, int sign) {
  const auto& s = pauli_matrices();
  Eigen::Matrix2cd projector = Eigen::Matrix2cd::Identity();
  for (int i = 0; i < 3; ++i) projector += double(sign) * u(i) * s[i];
  projector *= 0.5;

  Matrix4cd big = Matrix4cd::Zero();
  for (int i = 0; i < 2; ++i) big.block<2, 2>(2 * i, 2 * i) = projector;

  const Matrix4cd collapsed = big * rho * big;
  const double p = collapsed.trace().real();

  Eigen::Matrix2cd reduced = Eigen::Matrix2cd::Zero();
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c)
      for (int b = 0; b < 2; ++b) reduced(a, c) += collapsed(2 * a + b, 2 * c + b);
  reduced /= p;

  ProjectorOutcome outcome{p, Vector3d::Zero()};
  for (int i = 0; i < 3; ++i) outcome.bloch(i) = (reduced * s[i]).trace().real();
  return outcome;
}

Matrix3d rotation(const Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

FanoCoefficients singlet() { return bell_state(BellState::psi_minus).fano; }

FanoCoefficients t_state_product() {
  // T-state on the top qubit, stabilizer |up> on the antitop.
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  return product_state(Vector3d(inv_sqrt2, inv_sqrt2, 0.0), Vector3d(0, 0, 1)).fano;
}

}  // namespace

TEST_CASE("post_measurement_state") {
  SUBCASE("singlet anticorrelates perfectly along any axis") {
    const auto rho = assemble_density(singlet());
    const auto outcome = post_measurement_state(rho, Vector3d(0, 0, 1), +1);
    CHECK(outcome.probability == doctest::Approx(0.5).epsilon(1e-13));
    CHECK((outcome.state.bloch() - Vector3d(0, 0, -1)).norm() < 1e-12);
    CHECK_FALSE(outcome.degenerate);
  }
  SUBCASE("maximally mixed state is unchanged by measurement") {
    const auto rho = assemble_density(FanoCoefficients{});
    SeededRng rng(3);
    for (int trial = 0; trial < 5; ++trial) {
      const auto outcome = post_measurement_state(rho, rng.unit_vector(), -1);
      CHECK(outcome.probability == doctest::Approx(0.5).epsilon(1e-13));
      CHECK(outcome.state.bloch().norm() < 1e-13);
    }
  }
  SUBCASE("diagonal correlation example") {
    FanoCoefficients f;
    f.C = Vector3d(0.5, 0.3, 0.1).asDiagonal();
    const auto outcome = post_measurement_state(assemble_density(f), Vector3d(1, 0, 0), +1);
    CHECK(outcome.probability == doctest::Approx(0.5).epsilon(1e-13));
    CHECK((outcome.state.bloch() - Vector3d(0.5, 0, 0)).norm() < 1e-12);
  }
  SUBCASE("agrees with explicit projector algebra; outcomes sum to one") {
    SeededRng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const auto rho = assemble_density(random_physical_state(600 + trial).fano);
      const Vector3d u = rng.unit_vector();
      double total = 0.0;
      for (int sign : {+1, -1}) {
        const auto fast = post_measurement_state(rho, u, sign);
        const auto brute = brute_force_post_measurement(rho.matrix(), u, sign);
        CHECK(fast.probability == doctest::Approx(brute.probability).epsilon(1e-11));
        CHECK((fast.state.bloch() - brute.bloch).norm() < 1e-10);
        total += fast.probability;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("degenerate branch reports a maximally mixed state") {
    const auto state = product_state(Vector3d(0, 0, 0.3), Vector3d(0, 0, -1.0));
    const auto outcome =
        post_measurement_state(assemble_density(state.fano), Vector3d(0, 0, 1), +1);
    CHECK(outcome.degenerate);
    CHECK(outcome.probability < 1e-14);
    CHECK(outcome.state.bloch().norm() == 0.0);
  }
  SUBCASE("rejects non-unit directions and bad signs") {
    const auto rho = assemble_density(FanoCoefficients{});
    CHECK_THROWS_AS(post_measurement_state(rho, Vector3d(0, 0, 2), +1), ValidationError);
    CHECK_THROWS_AS(post_measurement_state(rho, Vector3d(0, 0, 1), 2), ValidationError);
  }
}

TEST_CASE("discord") {
  SUBCASE("product states carry zero discord") {
    SeededRng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
      const auto state = product_state(rng.uniform(0.0, 0.95) * rng.unit_vector(),
                                       rng.uniform(0.0, 0.95) * rng.unit_vector());
      CHECK(discord(state.fano, Side::top).value < 1e-7);
      CHECK(discord(state.fano, Side::antitop).value < 1e-7);
    }
  }
  SUBCASE("singlet discord is one bit") {
    for (Side side : {Side::top, Side::antitop})
      CHECK(discord(singlet(), side).value == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("classical-classical diagonal state has zero discord with argmin on the axis") {
    FanoCoefficients f;
    f.C = Vector3d(0.5, 0.0, 0.0).asDiagonal();
    const auto result = discord(f, Side::top);
    CHECK(result.value < 1e-7);
    CHECK(std::abs(std::abs(result.argmin_direction(0)) - 1.0) < 1e-6);
    CHECK(std::abs(result.argmin_direction.norm() - 1.0) < 1e-12);
    CHECK(result.optimizer_evals > 0);
  }
  SUBCASE("unphysical input is refused with the physicality report attached") {
    FanoCoefficients f;
    f.C = Vector3d(-1.2, 0, 0).asDiagonal();
    try {
      discord(f, Side::top);
      FAIL("expected UnphysicalStateError");
    } catch (const UnphysicalStateError& e) {
      CHECK_FALSE(e.report.is_physical);
      CHECK(e.report.min_eigenvalue == doctest::Approx(-0.05).epsilon(1e-9));
    }
  }
  SUBCASE("matches the direction-grid oracle") {
    for (std::uint64_t seed : {3, 21, 77, 117, 147}) {
      const auto state = random_physical_state(seed).fano;
      const double fast = discord(state, Side::top).value;
      const double brute = grid_discord(state, Side::top, 20000);
      CHECK(std::abs(fast - brute) < 5e-5);
      CHECK(fast <= brute + 1e-12);  // optimizer refines below the grid upper bound
    }
  }
  SUBCASE("werner state agrees with the grid oracle") {
    const auto w = werner_state(0.7).fano;
    CHECK(std::abs(discord(w, Side::top).value - grid_discord(w, Side::top, 20000)) < 5e-5);
  }
  SUBCASE("deterministic across repeated evaluation") {
    const auto state = random_physical_state(9).fano;
    const auto a = discord(state, Side::top);
    const auto b = discord(state, Side::top);
    CHECK(a.value == b.value);
    CHECK((a.argmin_direction - b.argmin_direction).norm() == 0.0);
  }
}

TEST_CASE("discord_difference") {
  SUBCASE("singlet difference vanishes") { CHECK(std::abs(discord_difference(singlet())) < 1e-9); }
  SUBCASE("exchange-symmetric states have zero difference") {
    SeededRng rng(31);
    int tested = 0;
    for (int trial = 0; trial < 10 && tested < 4; ++trial) {
      const Vector3d p = 0.35 * rng.unit_vector();
      FanoCoefficients f;
      f.P = f.Pbar = p;
      Matrix3d c = Matrix3d::Zero();
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) c(i, j) = c(j, i) = 0.1 * rng.uniform(-1.0, 1.0);
      f.C = c + 0.4 * p * p.transpose();
      if (!validate_physicality(f, 1e-9).is_physical) continue;
      CHECK(std::abs(discord_difference(f)) < 2e-7);
      ++tested;
    }
    CHECK(tested > 0);
  }
  SUBCASE("asymmetric state matches the grid-oracle difference") {
    const auto state = random_physical_state(55).fano;
    const double fast = discord_difference(state);
    const double brute =
        grid_discord(state, Side::top, 20000) - grid_discord(state, Side::antitop, 20000);
    CHECK(std::abs(fast - brute) < 1e-4);  // two one-sided grid errors
  }
}

TEST_CASE("steering_marker") {
  SUBCASE("zero correlations give zero") { CHECK(steering_marker(Matrix3d::Zero()) == 0.0); }
  SUBCASE("singlet integrand is identically one") {
    CHECK(steering_marker(-Matrix3d::Identity()) ==
          doctest::Approx(2.0 * kTwoPi).epsilon(1e-12));
  }
  SUBCASE("rank-one correlation sits exactly at threshold") {
    const Matrix3d c = Vector3d(1, 0, 0).asDiagonal();
    CHECK(std::abs(steering_marker(c) - kTwoPi) / kTwoPi < 1e-7);
  }
  SUBCASE("matches Monte Carlo within five standard errors") {
    for (std::uint64_t seed : {1, 12, 40}) {
      const Matrix3d c = random_physical_state(seed).fano.C;
      const double quad = steering_marker(c);
      const auto mc = mc_steering(c, 1000000, seed + 9000);
      CHECK(std::abs(quad - mc.estimate) < 5.0 * mc.std_error);
    }
    // Degenerate rank-2 case goes through the same quadrature.
    const Matrix3d c = Vector3d(0.8, 0.35, 0.0).asDiagonal();
    const auto mc = mc_steering(c, 1000000, 77);
    CHECK(std::abs(steering_marker(c) - mc.estimate) < 5.0 * mc.std_error);
  }
  SUBCASE("quadrature orders are validated") {
    CHECK_THROWS_AS(steering_marker(Matrix3d::Identity(), QuadratureSpec{2, 128}),
                    ValidationError);
    CHECK_THROWS_AS(steering_marker(Matrix3d::Identity(), QuadratureSpec{64, 3}),
                    ValidationError);
  }
}

TEST_CASE("chsh_marker") {
  CHECK(chsh_marker(-Matrix3d::Identity()) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(chsh_marker(Matrix3d::Zero()) == 0.0);
  CHECK(chsh_marker(Vector3d(0.6, 0.5, 0.4).asDiagonal()) ==
        doctest::Approx(0.61).epsilon(1e-13));
  SUBCASE("bounded by two on physical states") {
    for (std::uint64_t seed = 700; seed < 760; ++seed)
      CHECK(chsh_marker(random_physical_state(seed).fano.C) <= 2.0 + 1e-9);
  }
}

TEST_CASE("magic") {
  SUBCASE("stabilizer product state has exactly zero magic") {
    FanoCoefficients f;
    f.P = f.Pbar = Vector3d(0, 0, 1);
    f.C = Vector3d(0, 0, 1).asDiagonal();
    CHECK(magic(f) == 0.0);
  }
  SUBCASE("all four Bell states have exactly zero magic") {
    for (BellState which :
         {BellState::phi_plus, BellState::phi_minus, BellState::psi_plus, BellState::psi_minus})
      CHECK(magic(bell_state(which).fano) == 0.0);
  }
  SUBCASE("coefficients restricted to {-1,0,1} give exactly zero") {
    SeededRng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
      FanoCoefficients f;
      for (int i = 0; i < 3; ++i) {
        f.P(i) = double(int(rng.raw() % 3) - 1);
        f.Pbar(i) = double(int(rng.raw() % 3) - 1);
        for (int j = 0; j < 3; ++j) f.C(i, j) = double(int(rng.raw() % 3) - 1);
      }
      CHECK(magic(f) == 0.0);
    }
  }
  SUBCASE("T-state times stabilizer gives log2(4/3)") {
    CHECK(magic(t_state_product()) == doctest::Approx(std::log2(4.0 / 3.0)).epsilon(1e-12));
  }
  SUBCASE("not invariant under basis rotation even though the spectrum is") {
    const auto state = t_state_product();
    const Matrix3d r = rotation(Vector3d(0, 0, 1), -std::numbers::pi / 4);
    const auto rotated = rotate_basis(state, r, Matrix3d::Identity());

    Eigen::SelfAdjointEigenSolver<Matrix4cd> before(assemble_density(state).matrix());
    Eigen::SelfAdjointEigenSolver<Matrix4cd> after(assemble_density(rotated).matrix());
    CHECK((before.eigenvalues() - after.eigenvalues()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(magic(state) - magic(rotated)) > 0.1);
  }
}

TEST_CASE("entanglement_marker") {
  SUBCASE("separable states are PPT") {
    SeededRng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
      const auto state = product_state(0.8 * rng.unit_vector(), 0.8 * rng.unit_vector());
      const auto marker = entanglement_marker(assemble_density(state.fano));
      CHECK(marker.negativity < 1e-12);
      CHECK(marker.delta_e <= 1.0 + 1e-12);
    }
  }
  SUBCASE("singlet saturates the marker") {
    const auto marker = entanglement_marker(assemble_density(singlet()));
    CHECK(marker.negativity == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(marker.delta_e == doctest::Approx(3.0).epsilon(1e-9));
  }
  SUBCASE("werner state crosses the separability boundary at p = 1/3") {
    const auto marker = entanglement_marker(assemble_density(werner_state(1.0 / 3.0).fano));
    CHECK(marker.delta_e == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(marker.negativity < 1e-12);
  }
  SUBCASE("unphysical input is refused") {
    FanoCoefficients f;
    f.C = Vector3d(-1.2, 0, 0).asDiagonal();
    const Matrix4cd raw = assemble_density(f).matrix();  // Hermitian, unit trace, not PSD
    CHECK_THROWS_AS(entanglement_marker(DensityMatrix4{raw}), UnphysicalStateError);
  }
}

TEST_CASE("classify_hierarchy") {
  SUBCASE("singlet: all four correlation flags, no magic") {
    const auto report = classify_hierarchy(singlet());
    CHECK(report.discordant);
    CHECK(report.entangled);
    CHECK(report.steerable);
    CHECK(report.bell_correlated);
    CHECK_FALSE(report.magical);
    CHECK_FALSE(report.steering_polarization_warning);
  }
  SUBCASE("maximally mixed: nothing flagged") {
    const auto report = classify_hierarchy(FanoCoefficients{});
    CHECK_FALSE(report.discordant);
    CHECK_FALSE(report.entangled);
    CHECK_FALSE(report.steerable);
    CHECK_FALSE(report.bell_correlated);
    CHECK_FALSE(report.magical);
  }
  SUBCASE("reported marker values map to the expected flag pattern") {
    // Values as published for the highest-mass central bin in helicity basis.
    const auto report = make_hierarchy_report(0.424, 2.03, 0.26, 8.55, 0.99, 0.561);
    CHECK(report.discordant);
    CHECK(report.entangled);
    CHECK(report.steerable);
    CHECK_FALSE(report.bell_correlated);
    CHECK(report.magical);
  }
  SUBCASE("polarized states carry the steering-assumption warning") {
    const auto state = product_state(Vector3d(0.4, 0, 0), Vector3d::Zero());
    CHECK(classify_hierarchy(state.fano).steering_polarization_warning);
    const auto faint = product_state(Vector3d(0.01, 0, 0), Vector3d::Zero());
    CHECK_FALSE(classify_hierarchy(faint.fano).steering_polarization_warning);
  }
  SUBCASE("hierarchy implications hold on random states") {
    int entangled = 0;
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      const auto state = random_physical_state(seed).fano;
      const auto marker = entanglement_marker(assemble_density(state));
      const double t = steering_marker(state.C);
      const double b = chsh_marker(state.C);
      if (b > 1.0 + 1e-12) CHECK(t > kTwoPi + 1e-12);
      if (t > kTwoPi + 1e-12) CHECK(marker.negativity > 0.0);
      if (marker.negativity > 1e-12) {
        ++entangled;
        CHECK(discord(state, Side::top).value > 1e-7);
        CHECK(discord(state, Side::antitop).value > 1e-7);
      }
    }
    CHECK(entangled > 30);  // the sample actually exercises the implication
  }
}

TEST_CASE("observables are invariant under proper basis rotations") {
  SeededRng rng(67);
  for (int trial = 0; trial < 8; ++trial) {
    const auto state = random_physical_state(900 + trial).fano;
    const Matrix3d r_t = rotation(rng.unit_vector(), rng.uniform(0.0, 3.0));
    const Matrix3d r_tbar = rotation(rng.unit_vector(), rng.uniform(0.0, 3.0));
    const auto rotated = rotate_basis(state, r_t, r_tbar);

    CHECK(std::abs(discord(state, Side::top).value - discord(rotated, Side::top).value) < 1e-8);
    CHECK(std::abs(steering_marker(state.C) - steering_marker(rotated.C)) < 1e-8);
    CHECK(std::abs(chsh_marker(state.C) - chsh_marker(rotated.C)) < 1e-10);

    const auto before = entanglement_marker(assemble_density(state));
    const auto after = entanglement_marker(assemble_density(rotated));
    CHECK(std::abs(before.negativity - after.negativity) < 1e-10);
    CHECK(std::abs(before.delta_e - after.delta_e) < 1e-10);
  }
}
