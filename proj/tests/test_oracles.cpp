#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qcorr/oracles.hpp"
#include "qcorr/optim.hpp"

using namespace qcorr;
using Eigen::Matrix3d;
using Eigen::Matrix4cd;
using Eigen::Vector3d;

TEST_CASE("analytic states") {
  SUBCASE("werner endpoints") {
    CHECK((werner_state(1.0).fano.C + Matrix3d::Identity()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(werner_state(0.0).fano.to_vector().cwiseAbs().maxCoeff() == 0.0);
    CHECK_THROWS_AS(werner_state(1.5), ValidationError);
    CHECK_THROWS_AS(werner_state(-0.1), ValidationError);
  }
  SUBCASE("bell phi_minus matches its state vector") {
    // (|uu> - |dd>)/sqrt(2), quantization along axis 3.
    Eigen::Vector4cd psi;
    psi << 1.0 / std::sqrt(2.0), 0, 0, -1.0 / std::sqrt(2.0);
    const Matrix4cd expected = psi * psi.adjoint();
    const Matrix4cd assembled = assemble_density(bell_state(BellState::phi_minus).fano).matrix();
    CHECK((assembled - expected).cwiseAbs().maxCoeff() < 1e-15);
    const double fidelity = (assembled * expected).trace().real();
    CHECK(fidelity == doctest::Approx(1.0).epsilon(1e-13));
    // Sign pattern of C, entry by entry.
    const Matrix3d c = bell_state(BellState::phi_minus).fano.C;
    CHECK(c(0, 0) == -1.0);
    CHECK(c(1, 1) == 1.0);
    CHECK(c(2, 2) == 1.0);
    CHECK(std::abs(c(0, 1)) + std::abs(c(0, 2)) + std::abs(c(1, 0)) + std::abs(c(1, 2)) +
              std::abs(c(2, 0)) + std::abs(c(2, 1)) ==
          0.0);
  }
  SUBCASE("every generator output passes the physicality check") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
      CHECK(validate_physicality(random_physical_state(seed).fano, 1e-9).is_physical);
      CHECK(validate_physicality(random_separable_state(seed).fano, 1e-9).is_physical);
    }
    for (double p : {0.0, 0.3, 1.0})
      CHECK(validate_physicality(werner_state(p).fano, 1e-9).is_physical);
  }
  SUBCASE("separable states have no negativity") {
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
      const auto marker =
          entanglement_marker(assemble_density(random_separable_state(seed).fano));
      CHECK(marker.negativity < 1e-12);
      CHECK(marker.delta_e <= 1.0 + 1e-9);
    }
  }
  SUBCASE("generators are reproducible from the seed") {
    const auto a = random_physical_state(123).fano.to_vector();
    const auto b = random_physical_state(123).fano.to_vector();
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("grid_discord") {
  SUBCASE("singlet at the default oracle size") {
    CHECK(grid_discord(bell_state(BellState::psi_minus).fano, Side::top, 20000) ==
          doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("product state gives zero") {
    const auto state = product_state(Vector3d(0.3, 0.2, 0.1), Vector3d(0, 0.4, 0));
    CHECK(grid_discord(state.fano, Side::top, 500) < 1e-9);
  }
  SUBCASE("larger grids refine smaller ones (nested lattices)") {
    for (std::uint64_t seed : {11, 42, 99}) {
      const auto state = random_physical_state(seed).fano;
      for (Side side : {Side::top, Side::antitop}) {
        const double coarse = grid_discord(state, side, 500);
        const double fine = grid_discord(state, side, 20000);
        CHECK(fine <= coarse + 1e-12);
      }
    }
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(grid_discord(FanoCoefficients{}, Side::top, 50), ValidationError);
    FanoCoefficients bad;
    bad.C = Vector3d(-1.2, 0, 0).asDiagonal();
    CHECK_THROWS_AS(grid_discord(bad, Side::top, 500), UnphysicalStateError);
  }
}

TEST_CASE("direction sequence is deterministic unit-norm and hemispheric") {
  for (std::uint64_t i = 0; i < 2000; ++i) {
    const Vector3d u = direction_sequence_point(i);
    CHECK(std::abs(u.norm() - 1.0) < 1e-12);
    CHECK(u.z() >= 0.0);
  }
}

TEST_CASE("mc_steering") {
  SUBCASE("constant integrand has zero variance") {
    const auto mc = mc_steering(-Matrix3d::Identity(), 10000, 1);
    CHECK(mc.estimate == doctest::Approx(4.0 * std::numbers::pi).epsilon(1e-12));
    CHECK(mc.std_error == 0.0);
  }
  SUBCASE("zero matrix gives zero") {
    const auto mc = mc_steering(Matrix3d::Zero(), 10000, 1);
    CHECK(mc.estimate == 0.0);
    CHECK(mc.std_error == 0.0);
  }
  SUBCASE("rank-one case approaches the analytic value") {
    const auto mc = mc_steering(Vector3d(1, 0, 0).asDiagonal(), 1000000, 7);
    CHECK(std::abs(mc.estimate - 2.0 * std::numbers::pi) < 5.0 * mc.std_error);
    CHECK(mc.std_error > 0.0);
  }
  SUBCASE("sample-size floor is enforced") {
    CHECK_THROWS_AS(mc_steering(Matrix3d::Identity(), 100, 1), ValidationError);
  }
  SUBCASE("reproducible for a fixed seed") {
    const auto a = mc_steering(Matrix3d::Identity() * 0.5, 20000, 99);
    const auto b = mc_steering(Matrix3d::Identity() * 0.5, 20000, 99);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
  }
}

TEST_CASE("dense_profile_oracle") {
  MeasurementRecord record;
  record.label = "toy";
  record.basis = SpinBasis::helicity();
  record.bin = {300.0, 400.0, 0.0, 0.4};
  record.observed = Vector15::Zero();
  record.observed(6) = 0.3;  // C11
  record.covariance = 0.01 * Matrix15::Identity();

  ObservableSpec spec;
  spec.name = "c11";
  spec.eval = [](const Vector15& x) { return x(6); };
  spec.eval_fast = spec.eval;

  SUBCASE("one-coefficient analogue reproduces the analytic quadratic") {
    const double value = dense_profile_oracle(record, spec, 0.5, 20000, 4);
    CHECK(value == doctest::Approx(4.0).epsilon(1e-3));
  }
  SUBCASE("target at the central value gives zero") {
    CHECK(dense_profile_oracle(record, spec, 0.3, 2000, 4) == doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("unreachable target raises the infeasibility signal") {
    CHECK_THROWS_AS(dense_profile_oracle(record, spec, 2.5, 2000, 4), InfeasibleError);
  }
}
