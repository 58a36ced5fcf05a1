// test_response_kernel.cpp — closed-form kernel, moments and forces checked
// against a truncated-Fock trace oracle and direct quadrature.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>

#include "cfr/response_kernel.hpp"
#include "support/corpus.hpp"

using namespace cfr;

namespace {

// Independent kernel oracle: (i/hbar) Tr(rho [A(t), A]) with A = x1 x2 on an
// unsorted truncated product Fock space.
double oracle_phi_trace(double t, const OscillatorPair& pair,
                        const ThermalEnsemble& ens, int n_levels) {
  FockTruncation tr{n_levels, 1e-15};
  const Eigen::MatrixXd x1 =
      position_matrix(pair.m1, pair.omega1, pair.hbar, tr);
  const Eigen::MatrixXd x2 =
      position_matrix(pair.m2, pair.omega2, pair.hbar, tr);
  const int n = n_levels, dim = n * n;
  Eigen::VectorXd e(dim);
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    const int i1 = i / n, i2 = i % n;
    e[i] = pair.hbar * pair.omega1 * (i1 + 0.5) +
           pair.hbar * pair.omega2 * (i2 + 0.5);
    for (int j = 0; j < dim; ++j) a(i, j) = x1(i1, j / n) * x2(i2, j % n);
  }
  Eigen::MatrixXcd at(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      at(i, j) = std::exp(Complex(0.0, (e[i] - e[j]) * t / pair.hbar)) * a(i, j);
  const auto w = boltzmann_weights(ens, e);
  const Eigen::MatrixXcd comm = at * a - a * at;
  Complex tr_val = 0.0;
  for (int i = 0; i < dim; ++i) tr_val += w.p[i] * comm(i, i);
  const Complex phi = Complex(0.0, 1.0) / pair.hbar * tr_val;
  REQUIRE(std::abs(phi.imag()) < 1e-13 * (std::abs(phi) + 1.0));
  return phi.real();
}

CouplingDrive unit_drive(double eta) {
  CouplingDrive d;
  d.grad_psi = Eigen::Vector3d::UnitX();
  d.v = Eigen::Vector3d::UnitX();
  d.eta = eta;
  return d;
}

}  // namespace

TEST_CASE("kernel vanishes at t = 0 and takes its closed equal-frequency form") {
  OscillatorPair pair{1.0, 1.0, 1.7, 1.7, 1.0};
  auto ens = ThermalEnsemble::finite(2.0);
  CHECK(phi_kernel(0.0, pair, ens) == 0.0);
  const double c = thermal_occupation(ens, 1.7, 1.0).coth_factor;
  for (double t : {0.3, 1.1, 2.9})
    CHECK(phi_kernel(t, pair, ens) ==
          doctest::Approx(pair.big_d() * c * std::sin(2.0 * 1.7 * t))
              .epsilon(1e-13));
}

TEST_CASE("zero-temperature kernel value at a known point") {
  OscillatorPair pair{1.0, 1.0, 2.0, 1.0, 1.0};
  auto ens = ThermalEnsemble::zero_temperature();
  // (1/4)[cos(1.4) sin(0.7) + cos(0.7) sin(1.4)] = sin(2.1)/4
  CHECK(phi_kernel(0.7, pair, ens) ==
        doctest::Approx(std::sin(2.1) / 4.0).epsilon(1e-14));
  CHECK(phi_kernel(0.7, pair, ens) ==
        doctest::Approx(0.215802341662218).epsilon(1e-12));
}

TEST_CASE("kernel matches the truncated-Fock trace oracle") {
  OscillatorPair pair{1.4, 0.9, 1.3, 1.0, 1.0};
  auto ens = ThermalEnsemble::finite(3.0);
  for (double t : {0.25, 0.8, 1.7, 3.3})
    CHECK(phi_kernel(t, pair, ens) ==
          doctest::Approx(oracle_phi_trace(t, pair, ens, 12))
              .epsilon(1e-12)
              .scale(0.1));
  auto zero = ThermalEnsemble::zero_temperature();
  for (double t : {0.5, 2.2})
    CHECK(phi_kernel(t, pair, zero) ==
          doctest::Approx(oracle_phi_trace(t, pair, zero, 6))
              .epsilon(1e-12)
              .scale(0.1));
}

TEST_CASE("damped first moment closed form") {
  CHECK(damped_first_moment(2.0, 1.0, 0.1) ==
        doctest::Approx(-0.0943341).epsilon(1e-5));
  CHECK(damped_first_moment(2.0, 0.0, 0.3) == 0.0);
  // equal frequencies: only the sum channel survives
  const double eta = 0.2, w = 1.4;
  const double d = eta * eta + 4.0 * w * w;
  CHECK(damped_first_moment(w, w, eta) ==
        doctest::Approx(eta * 2.0 * w / (d * d)).epsilon(1e-14));
  CHECK_THROWS_AS(damped_first_moment(1.0, 1.0, 0.0), std::domain_error);

  // quadrature cross-check
  for (auto [w1, w2, e] :
       {std::tuple{2.0, 1.0, 0.1}, {1.3, 1.1, 0.4}, {0.6, 2.4, 0.25}}) {
    auto r = integrate_adaptive(
        [&, w1 = w1, w2 = w2, e = e](double t) {
          return t * std::exp(-e * t) * std::cos(w1 * t) * std::sin(w2 * t);
        },
        0.0, 60.0 / e, 1e-12, 1e-10, 20000, 64);
    REQUIRE(r.converged);
    CHECK(damped_first_moment(w1, w2, e) ==
          doctest::Approx(r.value).epsilon(1e-11).scale(0.01));
  }
}

TEST_CASE("damped zeroth moment matches quadrature") {
  const double w1 = 1.8, w2 = 0.7, eta = 0.15;
  auto r = integrate_adaptive(
      [&](double t) {
        return std::exp(-eta * t) * std::cos(w1 * t) * std::sin(w2 * t);
      },
      0.0, 60.0 / eta, 1e-14, 1e-12, 20000, 64);
  REQUIRE(r.converged);
  CHECK(damped_zeroth_moment(w1, w2, eta) ==
        doctest::Approx(r.value).epsilon(1e-11).scale(0.01));
}

TEST_CASE("coth prefactor difference and its sinh identity") {
  // beta hbar w1/2 = 1, beta hbar w2/2 = 1/2 -> -1/sinh(1)
  auto ens = ThermalEnsemble::finite(2.0);
  CHECK(coth_prefactor_difference(ens, 1.0, 0.5, 1.0) ==
        doctest::Approx(-1.0 / std::sinh(1.0)).epsilon(1e-13));
  CHECK(coth_prefactor_difference(ens, 1.0, 0.5, 1.0) ==
        doctest::Approx(-0.8509181282393216).epsilon(1e-13));
  // antisymmetry is exact
  CHECK(coth_prefactor_difference(ens, 0.5, 1.0, 1.0) ==
        -coth_prefactor_difference(ens, 1.0, 0.5, 1.0));
  CHECK(coth_prefactor_difference(ens, 1.3, 1.3, 1.0) == 0.0);
  // deep quantum regime must not overflow the identity check
  CHECK(std::isfinite(
      coth_prefactor_difference(ThermalEnsemble::finite(500.0), 1.4, 1.2,
                                1.0)));
  CHECK_THROWS_AS(coth_prefactor_difference(ThermalEnsemble::zero_temperature(),
                                            1.0, 0.5, 1.0),
                  std::domain_error);
}

TEST_CASE("friction force: null velocity, zero-T channel, antisymmetry") {
  OscillatorPair pair{1.0, 1.0, 1.5, 0.9, 1.0};
  auto ens = ThermalEnsemble::finite(1.5);

  auto still = unit_drive(0.2);
  still.v.setZero();
  CHECK(friction_force(pair, ens, still).f_friction.norm() == 0.0);

  auto drive = unit_drive(0.2);
  auto zero_t = friction_force(pair, ThermalEnsemble::zero_temperature(), drive);
  CHECK(zero_t.channel_breakdown.omega1_minus_omega2_term == 0.0);
  const double o_sum = pair.omega1 + pair.omega2;
  const double denom = 0.2 * 0.2 + o_sum * o_sum;
  CHECK(zero_t.f_friction[0] ==
        doctest::Approx(-pair.big_d() * 2.0 * 0.2 * o_sum / (denom * denom))
            .epsilon(1e-14));

  auto forward = friction_force(pair, ens, drive);
  auto backward_drive = drive;
  backward_drive.v = -drive.v;
  auto backward = friction_force(pair, ens, backward_drive);
  CHECK(backward.f_friction[0] == -forward.f_friction[0]);
  CHECK(forward.eta_used == 0.2);
  CHECK_THROWS_AS(friction_force(pair, ens, unit_drive(-0.1)),
                  std::domain_error);
}

TEST_CASE("friction force equals the kernel moment integral") {
  std::mt19937_64 rng(cfr_test::corpus_seed() ^ 0x5eedf00dULL);
  std::uniform_real_distribution<double> w_dist(0.5, 3.0);
  std::uniform_real_distribution<double> eta_dist(0.02, 0.5);
  std::uniform_real_distribution<double> beta_dist(0.1, 10.0);
  for (int k = 0; k < 6; ++k) {
    OscillatorPair pair{1.0, 1.0, w_dist(rng), w_dist(rng), 1.0};
    auto ens = ThermalEnsemble::finite(beta_dist(rng));
    auto drive = unit_drive(eta_dist(rng));
    const double span = 60.0 / drive.eta;
    const int seed_segments = static_cast<int>(
        std::ceil(span * (pair.omega1 + pair.omega2 + drive.eta) / cfr::pi));
    auto r = integrate_adaptive(
        [&](double u) {
          return phi_kernel(u, pair, ens) * u * std::exp(-drive.eta * u);
        },
        0.0, span, 1e-300, 1e-10, seed_segments + 4000, seed_segments);
    const auto f = friction_force(pair, ens, drive);
    CHECK(f.f_friction[0] == doctest::Approx(-r.value).epsilon(1e-8));
  }
}

TEST_CASE("friction force quadrature agreement persists at small eta") {
  OscillatorPair pair{1.0, 1.0, 1.3, 1.0, 1.0};
  auto ens = ThermalEnsemble::finite(2.0);
  auto drive = unit_drive(1e-3);
  const double span = 60.0 / drive.eta;
  const int seed_segments = static_cast<int>(
      std::ceil(span * (pair.omega1 + pair.omega2 + drive.eta) / cfr::pi));
  auto r = integrate_adaptive(
      [&](double u) {
        return phi_kernel(u, pair, ens) * u * std::exp(-drive.eta * u);
      },
      0.0, span, 1e-300, 1e-10, seed_segments + 4000, seed_segments);
  const auto f = friction_force(pair, ens, drive);
  CHECK(f.f_friction[0] == doctest::Approx(-r.value).epsilon(1e-7));
}

TEST_CASE("reversible force is linear in t and matches quadrature") {
  OscillatorPair pair{1.0, 1.0, 2.0, 1.0, 1.0};
  auto ens = ThermalEnsemble::zero_temperature();
  auto drive = unit_drive(0.1);
  CHECK(reversible_force(pair, ens, drive, 0.0).norm() == 0.0);
  const auto f1 = reversible_force(pair, ens, drive, 1.0);
  const auto f2 = reversible_force(pair, ens, drive, 2.0);
  CHECK(f2[0] == 2.0 * f1[0]);

  auto r = integrate_adaptive(
      [&](double u) { return phi_kernel(u, pair, ens) * std::exp(-0.1 * u); },
      0.0, 600.0, 1e-300, 1e-11, 20000, 600);
  REQUIRE(r.converged);
  CHECK(f1[0] == doctest::Approx(r.value).epsilon(1e-8));
  // friction_force carries the same t = 1 reversible value
  CHECK(friction_force(pair, ens, drive).f_reversible[0] ==
        doctest::Approx(f1[0]).epsilon(1e-14));
}

TEST_CASE("detuning integral reproduces the resonant delta weight") {
  OscillatorPair pair;  // unit masses, unit frequencies, hbar = 1
  auto ens = ThermalEnsemble::finite(1.0);
  auto drive = unit_drive(1e-3);
  auto di = detuning_integral(pair, ens, drive, 0.5, 48);
  const double expect = delta_weight_force_coefficient(pair, ens);
  const double sh = std::sinh(0.5);
  CHECK(expect == doctest::Approx(-cfr::pi / (8.0 * sh * sh)).epsilon(1e-14));
  CHECK(expect == doctest::Approx(-1.4461906999586551).epsilon(1e-14));
  CHECK(di.value == doctest::Approx(expect).epsilon(0.01));
  CHECK(di.range_ok);

  // doubling the velocity doubles the integrated force exactly
  auto double_v = drive;
  double_v.v *= 2.0;
  auto di2 = detuning_integral(pair, ens, double_v, 0.5, 48);
  CHECK(di2.value == 2.0 * di.value);

  // zero temperature: exchange channel carries no weight at all
  auto di0 = detuning_integral(pair, ThermalEnsemble::zero_temperature(), drive,
                               0.5, 48);
  CHECK(di0.value == 0.0);

  // narrow range flag
  auto wide_eta = unit_drive(0.05);
  CHECK_FALSE(detuning_integral(pair, ens, wide_eta, 0.5, 48).range_ok);

  CHECK_THROWS_AS(detuning_integral(pair, ens, drive, 1.5, 48),
                  std::invalid_argument);
  CHECK_THROWS_AS(detuning_integral(pair, ens, drive, 0.5, 2),
                  std::invalid_argument);
}

TEST_CASE("spectral transform matches direct damped Fourier quadrature") {
  OscillatorPair pair{1.0, 1.0, 1.6, 1.1, 1.0};
  auto ens = ThermalEnsemble::finite(2.5);
  const double eta = 0.1;
  for (double omega : {0.0, 0.4, 1.3}) {
    auto r = integrate_adaptive(
        [&](double t) {
          return phi_kernel(t, pair, ens) *
                 std::exp(Complex(0.0, -omega * t)) * std::exp(-eta * t);
        },
        0.0, 600.0, 1e-300, 1e-11, 20000, 800);
    REQUIRE(r.converged);
    CHECK(std::abs(phi_tilde(omega, pair, ens, eta) - r.value) <
          1e-8 * std::abs(r.value) + 1e-12);
  }
}

TEST_CASE("spectral derivative route equals the closed-form friction force") {
  std::mt19937_64 rng(cfr_test::corpus_seed() ^ 0xabcdULL);
  std::uniform_real_distribution<double> w_dist(0.5, 3.0);
  std::uniform_real_distribution<double> eta_dist(1e-3, 0.5);
  std::uniform_real_distribution<double> beta_dist(0.1, 10.0);

  OscillatorPair pinned{1.0, 1.0, 1.3, 1.0, 1.0};
  auto pinned_drive = unit_drive(0.05);
  auto f_ref = friction_force(pinned, ThermalEnsemble::finite(2.0), pinned_drive);
  auto f_spec = friction_via_spectral_derivative(
      pinned, ThermalEnsemble::finite(2.0), pinned_drive);
  CHECK(f_spec[0] == doctest::Approx(f_ref.f_friction[0]).epsilon(1e-10));

  for (int k = 0; k < 8; ++k) {
    OscillatorPair pair{1.0, 1.0, w_dist(rng), w_dist(rng), 1.0};
    auto ens = ThermalEnsemble::finite(beta_dist(rng));
    auto drive = unit_drive(eta_dist(rng));
    auto a = friction_force(pair, ens, drive).f_friction;
    auto b = friction_via_spectral_derivative(pair, ens, drive);
    CHECK(b[0] == doctest::Approx(a[0]).epsilon(1e-10));
  }

  // exact resonance exercises the degenerate step-size guard
  OscillatorPair res{1.0, 1.0, 1.2, 1.2, 1.0};
  auto ens = ThermalEnsemble::finite(1.0);
  auto drive = unit_drive(0.08);
  CHECK(friction_via_spectral_derivative(res, ens, drive)[0] ==
        doctest::Approx(friction_force(res, ens, drive).f_friction[0])
            .epsilon(1e-10));

  auto still = unit_drive(0.1);
  still.v.setZero();
  CHECK(friction_via_spectral_derivative(res, ens, still).norm() == 0.0);
}
