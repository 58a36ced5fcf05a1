// barton.hpp — zero-temperature equivalence study for two identical
// oscillators coupled through a time-dependent coefficient q(t) y1 y2:
// the normal-mode computation of the dissipated energy versus the general
// transition-table route, numerically equal for arbitrary drive histories.
#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <cfr/core_model.hpp>
#include <cfr/drive_profile.hpp>
#include <cfr/numerics.hpp>
#include <cfr/perturbation.hpp>

namespace cfr {

// ---------- setup ----------

struct BartonSetup {
  double omega = 1.0; // common eigenfrequency
  double mass = 1.0;  // common mass
  double hbar = 1.0;
  DriveProfile drive = DriveProfile::ramp_damped(0.1);

  // Harmonic length squared; always derived, never stored.
  double b() const { return hbar / (2.0 * mass * omega); }

  void validate() const {
    if (!(omega > 0.0)) throw std::invalid_argument("BartonSetup: omega must be positive");
    if (!(mass > 0.0)) throw std::invalid_argument("BartonSetup: mass must be positive");
    if (!(hbar > 0.0)) throw std::invalid_argument("BartonSetup: hbar must be positive");
  }
};

// Gaussian-units entry point: charges e at separation s(t) couple with
// q(t) = e^2 / s(t)^3. All downstream code sees only the scalar drive.
inline DriveProfile coulomb_drive(double e_charge,
                                  const std::function<double(double)>& separation,
                                  double t_lo, double t_hi) {
  if (!separation) throw std::invalid_argument("coulomb_drive: separation function required");
  if (!(t_hi > t_lo)) throw std::invalid_argument("coulomb_drive: need t_hi > t_lo");
  for (int i = 0; i <= 1024; ++i) {
    const double t = t_lo + (t_hi - t_lo) * i / 1024.0;
    if (!(separation(t) > 0.0))
      throw std::invalid_argument("coulomb_drive: separation must stay positive");
  }
  const double e2 = e_charge * e_charge;
  return DriveProfile::analytic_table(
      [e2, separation](double t) {
        const double s = separation(t);
        return e2 / (s * s * s);
      },
      t_lo, t_hi);
}

// ---------- normal-mode decomposition ----------

// Interaction q(t) y1 y2 rewritten on the symmetric/antisymmetric modes:
// H_int = +(q/2) y_+^2 - (q/2) y_-^2. The matrices live on the product Fock
// space of the original oscillators so the identity is directly checkable.
struct NormalModeDrives {
  Eigen::MatrixXd y1y2;       // y1 y2 on the product space
  Eigen::MatrixXd y_plus_sq;  // y_+^2
  Eigen::MatrixXd y_minus_sq; // y_-^2
  double plus_coupling = 0.5;   // coefficient of q(t) on y_+^2
  double minus_coupling = -0.5; // coefficient of q(t) on y_-^2
};

namespace detail {

inline Eigen::MatrixXd kron_real(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

} // namespace detail

inline NormalModeDrives normal_mode_drives(const BartonSetup& setup,
                                           const FockTruncation& trunc) {
  setup.validate();
  const Eigen::MatrixXd y = position_matrix(setup.mass, setup.omega, setup.hbar, trunc);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(y.rows(), y.cols());
  const Eigen::MatrixXd y1 = detail::kron_real(y, id);
  const Eigen::MatrixXd y2 = detail::kron_real(id, y);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const Eigen::MatrixXd yp = inv_sqrt2 * (y1 + y2);
  const Eigen::MatrixXd ym = inv_sqrt2 * (y1 - y2);

  NormalModeDrives out;
  out.y1y2 = y1 * y2;
  out.y_plus_sq = yp * yp;
  out.y_minus_sq = ym * ym;
  return out;
}

// ---------- dissipated energy, mode route ----------

// I(inf) = -(i / 2 hbar) * int q(t) e^{2 i omega t} dt over the drive support,
// by direct quadrature (independent of the drive's own transform machinery).
inline Complex barton_transition_integral(const BartonSetup& setup) {
  setup.validate();
  const double lo = setup.drive.support_lo();
  double hi = setup.drive.support_hi();
  // The ramp is defined for all t >= 0; push the window to 48 e-foldings so
  // the neglected tail sits below machine precision of the result.
  if (setup.drive.kind == DriveKind::ramp_damped)
    hi = std::max(hi, 48.0 / setup.drive.eta);
  if (!(hi > lo)) throw std::invalid_argument("barton_transition_integral: empty drive support");

  const double two_omega = 2.0 * setup.omega;
  const auto integrand = [&](double t) -> Complex {
    return setup.drive.q(t) * std::exp(Complex(0.0, two_omega * t));
  };
  const int seed = std::max(8, static_cast<int>(std::ceil((hi - lo) * two_omega / pi)));
  // Absolute target sits just above the error-estimator floor (~50 eps int|f|,
  // and int|f| <= peak * span); the seeded composite already delivers
  // machine-level values at half an oscillation per panel.
  IntegralResult<Complex> r = integrate_adaptive(
      integrand, lo, hi, 2.5e-14 * setup.drive.peak_abs() * (hi - lo) + 1e-300,
      1e-11, seed + 4000, seed);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "barton_transition_integral: quadrature residual " << r.error
        << " did not meet the requested tolerance";
    throw std::runtime_error(msg.str());
  }
  return Complex(0.0, -0.5 / setup.hbar) * r.value;
}

// Mode-basis energy: each mode transfers two quanta 2*hbar*omega with
// probability |amplitude|^2 = 2 b^2 |I(inf)|^2; the matrix element behind it
// is <2|y^2|0> = sqrt(2) b per mode. Total over both modes: 8 hbar omega b^2 |I|^2.
inline double barton_energy(const BartonSetup& setup) {
  const Complex i_inf = barton_transition_integral(setup);
  const double matrix_element = std::sqrt(2.0) * setup.b(); // <2|y^2|0>
  // amplitude per mode: +-(coupling q/2) -> amp = +- <2|y^2|0> I(inf)
  const double amp_sq = matrix_element * matrix_element * std::norm(i_inf);
  const double per_mode = 2.0 * setup.hbar * setup.omega * amp_sq;
  return 2.0 * per_mode;
}

// ---------- dissipated energy, general-machinery route ----------

// Zero-temperature product-basis route: coupling operator A = -y1 y2 on the
// truncated product space, transition table at the drive, and the single
// |00> -> |11> channel energy 2 hbar omega B_1100.
inline double b1100_route_energy(const BartonSetup& setup) {
  setup.validate();
  OscillatorPair pair{setup.mass, setup.mass, setup.omega, setup.omega, setup.hbar};
  FockTruncation trunc{4, 1e-12};
  ProductLevelSystem prod = product_coupling_operator(pair, trunc, 1.0);
  const TransitionTable table = transition_amplitudes(prod.system, setup.drive, setup.hbar);

  const int ground = prod.index_of(0, 0);
  const int doubly = prod.index_of(1, 1);
  if (ground < 0 || doubly < 0)
    throw std::runtime_error("b1100_route_energy: product states missing from truncation");
  const double big_b = table.big_b(doubly, ground);
  return 2.0 * setup.hbar * setup.omega * big_b;
}

// ---------- slow-coupling limit ----------

struct SlowCouplingTable {
  std::vector<double> eta;
  std::vector<double> de;          // dissipated energy at each eta
  std::vector<double> four_eta_de; // friction-power proxy 4 eta dE
  double limit_de = 0.0;           // eta -> 0 value b^2 / (8 hbar omega^3)
};

// For the standard ramp q = t e^{-eta t}: dE(eta) (eta^2 + 4 omega^2)^2 is an
// eta-independent constant, so the dissipated energy stays bounded while the
// friction-power proxy 4 eta dE vanishes linearly — the assertable form of
// zero friction at T = 0 for slowly varying coupling.
inline SlowCouplingTable slow_coupling_null(const BartonSetup& setup,
                                            const std::vector<double>& eta_sequence) {
  setup.validate();
  if (eta_sequence.size() < 2)
    throw std::invalid_argument("slow_coupling_null: need >= 2 eta values");
  for (std::size_t i = 0; i < eta_sequence.size(); ++i) {
    if (!(eta_sequence[i] > 0.0))
      throw std::invalid_argument("slow_coupling_null: eta values must be positive");
    if (i > 0 && !(eta_sequence[i] < eta_sequence[i - 1]))
      throw std::invalid_argument("slow_coupling_null: eta sequence must descend");
  }

  SlowCouplingTable table;
  const double b = setup.b();
  table.limit_de = b * b / (8.0 * setup.hbar * std::pow(setup.omega, 3));

  for (double eta : eta_sequence) {
    BartonSetup point = setup;
    point.drive = DriveProfile::ramp_damped(eta);
    const double de = barton_energy(point);
    table.eta.push_back(eta);
    table.de.push_back(de);
    table.four_eta_de.push_back(4.0 * eta * de);
  }

  // Constancy of dE (eta^2 + 4 omega^2)^2 across the table.
  const double w4 = 4.0 * setup.omega * setup.omega;
  double ref = 0.0;
  for (std::size_t i = 0; i < table.eta.size(); ++i) {
    const double lorentz = table.eta[i] * table.eta[i] + w4;
    const double flat = table.de[i] * lorentz * lorentz;
    if (i == 0) {
      ref = flat;
    } else if (!(std::abs(flat - ref) <= 1e-12 * std::abs(ref))) {
      std::ostringstream msg;
      msg << "slow_coupling_null: dE (eta^2+4w^2)^2 not constant: " << ref
          << " vs " << flat << " at eta " << table.eta[i];
      throw std::runtime_error(msg.str());
    }
    if (i > 0 && !(table.four_eta_de[i] < table.four_eta_de[i - 1])) {
      throw std::runtime_error(
          "slow_coupling_null: friction-power proxy failed to decrease");
    }
  }
  return table;
}

} // namespace cfr
