// response_kernel.hpp — closed-form linear-response quantities for the coupled
// oscillator pair: the commutator kernel φ(t), regularized damped moments, the
// coth prefactor identity, reversible and friction forces at finite η, the
// detuning integral that realizes the resonant δ-limit, and the spectral-
// derivative route to the same friction force.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "cfr/core_model.hpp"
#include "cfr/drive_profile.hpp"
#include "cfr/numerics.hpp"

namespace cfr {

// ---------- coupling geometry ----------

/// Static coupling strength, its gradient, and the sweep velocity; eta is the
/// regularization rate of every time integral in this module.
struct CouplingDrive {
  double psi0{0.0};
  Eigen::Vector3d grad_psi{Eigen::Vector3d::UnitX()};
  Eigen::Vector3d v{Eigen::Vector3d::UnitX()};
  double eta{0.1};

  // scalar drive rate g = v . grad_psi
  double coupling_scalar() const { return v.dot(grad_psi); }
  // force direction carrier G = (grad_psi)(v . grad_psi)
  Eigen::Vector3d g_vector() const { return grad_psi * coupling_scalar(); }

  void validate() const {
    if (!(eta > 0.0))
      throw std::domain_error("CouplingDrive: eta must be positive");
    if (!grad_psi.allFinite() || !v.allFinite() || !std::isfinite(psi0))
      throw std::invalid_argument("CouplingDrive: finite fields required");
  }
};

/// Friction and reversible forces; the channel terms are the scalar
/// coefficients c such that the force contribution is c * g_vector().
struct FrictionChannels {
  double omega1_plus_omega2_term{0.0};
  double omega1_minus_omega2_term{0.0};
};

struct FrictionResult {
  Eigen::Vector3d f_reversible{Eigen::Vector3d::Zero()};  // evaluated at t = 1
  Eigen::Vector3d f_friction{Eigen::Vector3d::Zero()};
  double eta_used{0.0};
  FrictionChannels channel_breakdown;
};

/// Detuning-integrated friction over the exchange channel.
struct DetuningIntegral {
  double value{0.0};  // force component along the unit gradient direction
  Eigen::Vector3d force{Eigen::Vector3d::Zero()};
  double quadrature_error{0.0};
  bool range_ok{true};  // false when the half width is below 20 eta
};

// ---------- kernel and moments ----------

/// Response kernel of the product coupling x1 x2:
/// φ(t) = D [c1 cos(ω1 t) sin(ω2 t) + c2 cos(ω2 t) sin(ω1 t)],
/// c_i = coth(β ħ ω_i / 2), D = ħ / (2 m1 m2 ω1 ω2).
inline double phi_kernel(double t, const OscillatorPair& pair,
                         const ThermalEnsemble& ensemble) {
  pair.validate();
  const double c1 = thermal_occupation(ensemble, pair.omega1, pair.hbar)
                        .coth_factor;
  const double c2 = thermal_occupation(ensemble, pair.omega2, pair.hbar)
                        .coth_factor;
  return pair.big_d() *
         (c1 * std::cos(pair.omega1 * t) * std::sin(pair.omega2 * t) +
          c2 * std::cos(pair.omega2 * t) * std::sin(pair.omega1 * t));
}

/// ∫_0^∞ t e^{-ηt} cos(ω1 t) sin(ω2 t) dt
///   = η Ω1/(η²+Ω1²)² − η Ω2/(η²+Ω2²)²,  Ω1 = ω1+ω2, Ω2 = ω1−ω2.
inline double damped_first_moment(double omega1, double omega2, double eta) {
  if (!(eta > 0.0))
    throw std::domain_error("damped_first_moment: eta must be positive");
  const double o_sum = omega1 + omega2;
  const double o_diff = omega1 - omega2;
  const double d1 = eta * eta + o_sum * o_sum;
  const double d2 = eta * eta + o_diff * o_diff;
  return eta * o_sum / (d1 * d1) - eta * o_diff / (d2 * d2);
}

/// ∫_0^∞ e^{-ηt} cos(ω1 t) sin(ω2 t) dt = ½[Ω1/(η²+Ω1²) − Ω2/(η²+Ω2²)].
inline double damped_zeroth_moment(double omega1, double omega2, double eta) {
  if (!(eta > 0.0))
    throw std::domain_error("damped_zeroth_moment: eta must be positive");
  const double o_sum = omega1 + omega2;
  const double o_diff = omega1 - omega2;
  return 0.5 * (o_sum / (eta * eta + o_sum * o_sum) -
                o_diff / (eta * eta + o_diff * o_diff));
}

/// coth(βħω1/2) − coth(βħω2/2); asserts the sinh-ratio identity
/// −sinh(βħ(ω1−ω2)/2) / (sinh(βħω1/2) sinh(βħω2/2)) in overflow-safe form.
inline double coth_prefactor_difference(const ThermalEnsemble& ensemble,
                                        double omega1, double omega2,
                                        double hbar) {
  if (ensemble.is_zero_t())
    throw std::domain_error(
        "coth_prefactor_difference: finite-temperature identity");
  const double c1 = thermal_occupation(ensemble, omega1, hbar).coth_factor;
  const double c2 = thermal_occupation(ensemble, omega2, hbar).coth_factor;
  const double lhs = c1 - c2;
  // sinh-ratio form rewritten with u = e^{-βħω1}, w = e^{-βħω2}:
  //   2 (u − w) / ((1 − u)(1 − w))
  const double u = std::exp(-ensemble.beta * hbar * omega1);
  const double w = std::exp(-ensemble.beta * hbar * omega2);
  const double rhs = 2.0 * (u - w) / ((1.0 - u) * (1.0 - w));
  if (std::abs(lhs - rhs) >
      1e-12 * std::max({std::abs(lhs), std::abs(rhs), 1.0}))
    throw std::runtime_error(
        "coth_prefactor_difference: sinh identity violated");
  return lhs;
}

// ---------- forces ----------

namespace detail {

// per-channel coefficients k1, k2 with φ(t) = k1 sin(Ω1 t) + k2 sin(Ω2 t)
struct KernelChannels {
  double k1, k2, o_sum, o_diff;
};

inline KernelChannels kernel_channels(const OscillatorPair& pair,
                                      const ThermalEnsemble& ensemble) {
  const double c1 = thermal_occupation(ensemble, pair.omega1, pair.hbar)
                        .coth_factor;
  const double c2 = thermal_occupation(ensemble, pair.omega2, pair.hbar)
                        .coth_factor;
  const double half_d = 0.5 * pair.big_d();
  return {half_d * (c1 + c2), half_d * (c2 - c1), pair.omega1 + pair.omega2,
          pair.omega1 - pair.omega2};
}

// ∫_0^∞ t e^{-ηt} sin(at) dt = 2ηa/(η²+a²)²
inline double first_moment_of_sine(double a, double eta) {
  const double d = eta * eta + a * a;
  return 2.0 * eta * a / (d * d);
}

inline double zeroth_moment_of_sine(double a, double eta) {
  return a / (eta * eta + a * a);
}

}  // namespace detail

/// Friction force −G ∫_0^∞ φ(u) u e^{-ηu} du in closed form, with the two
/// frequency channels reported separately (coefficients of g_vector()).
inline FrictionResult friction_force(const OscillatorPair& pair,
                                     const ThermalEnsemble& ensemble,
                                     const CouplingDrive& drive) {
  pair.validate();
  drive.validate();
  const auto ch = detail::kernel_channels(pair, ensemble);
  FrictionResult out;
  out.eta_used = drive.eta;
  out.channel_breakdown.omega1_plus_omega2_term =
      -ch.k1 * detail::first_moment_of_sine(ch.o_sum, drive.eta);
  out.channel_breakdown.omega1_minus_omega2_term =
      -ch.k2 * detail::first_moment_of_sine(ch.o_diff, drive.eta);
  const double coeff = out.channel_breakdown.omega1_plus_omega2_term +
                       out.channel_breakdown.omega1_minus_omega2_term;
  out.f_friction = coeff * drive.g_vector();
  const double rev = ch.k1 * detail::zeroth_moment_of_sine(ch.o_sum, drive.eta) +
                     ch.k2 * detail::zeroth_moment_of_sine(ch.o_diff, drive.eta);
  out.f_reversible = rev * drive.g_vector();  // at t = 1
  return out;
}

/// Reversible force G t ∫_0^∞ φ(u) e^{-ηu} du, proportional to t.
inline Eigen::Vector3d reversible_force(const OscillatorPair& pair,
                                        const ThermalEnsemble& ensemble,
                                        const CouplingDrive& drive, double t) {
  pair.validate();
  drive.validate();
  const auto ch = detail::kernel_channels(pair, ensemble);
  const double integral =
      ch.k1 * detail::zeroth_moment_of_sine(ch.o_sum, drive.eta) +
      ch.k2 * detail::zeroth_moment_of_sine(ch.o_diff, drive.eta);
  return t * integral * drive.g_vector();
}

// ---------- detuning integral (δ-limit realized at finite η) ----------

/// Closed-form η→0 limit of the exchange-channel detuning integral per unit
/// |G|: −π β ħ² / (8 m1 m2 ω1² sinh²(β ħ ω1 / 2)).
inline double delta_weight_force_coefficient(const OscillatorPair& pair,
                                             const ThermalEnsemble& ensemble) {
  pair.validate();
  if (ensemble.is_zero_t()) return 0.0;
  const double half = 0.5 * ensemble.beta * pair.hbar * pair.omega1;
  const double sh = std::sinh(half);
  return -pi * ensemble.beta * pair.hbar * pair.hbar /
         (8.0 * pair.m1 * pair.m2 * pair.omega1 * pair.omega1 * sh * sh);
}

/// Integrates the exchange-channel friction coefficient over the detuning
/// Ω2 = ω1 − ω2 ∈ [−half_width, half_width] with ω1 fixed (pair.omega2 is
/// ignored; the sweep is centred on resonance). Uses the substitution
/// Ω2 = η tanθ so the Lorentzian core is resolved at any η.
inline DetuningIntegral detuning_integral(const OscillatorPair& pair,
                                          const ThermalEnsemble& ensemble,
                                          const CouplingDrive& drive,
                                          double half_width,
                                          int n_panels = 48) {
  pair.validate();
  drive.validate();
  if (!(half_width > 0.0) || !(half_width < pair.omega1))
    throw std::invalid_argument(
        "detuning_integral: need 0 < half_width < omega1 (omega2 must stay "
        "positive)");
  if (n_panels < 4)
    throw std::invalid_argument("detuning_integral: need >= 4 panels");

  const double eta = drive.eta;
  const double c1 =
      thermal_occupation(ensemble, pair.omega1, pair.hbar).coth_factor;
  // exchange-channel friction coefficient at detuning x = ω1 − ω2
  auto coeff = [&](double x) {
    const double omega2 = pair.omega1 - x;
    const double c2 =
        thermal_occupation(ensemble, omega2, pair.hbar).coth_factor;
    const double big_d =
        pair.hbar / (2.0 * pair.m1 * pair.m2 * pair.omega1 * omega2);
    return -0.5 * big_d * (c2 - c1) *
           detail::first_moment_of_sine(x, eta);
  };
  const double theta_max = std::atan(half_width / eta);
  auto integrand = [&](double theta) {
    const double x = eta * std::tan(theta);
    const double sec = 1.0 / std::cos(theta);
    return coeff(x) * eta * sec * sec;
  };
  auto r = integrate_adaptive(integrand, -theta_max, theta_max, 1e-300, 1e-11,
                              20000, n_panels);

  DetuningIntegral out;
  out.force = r.value * drive.g_vector();
  out.value = out.force.dot(drive.grad_psi.normalized());
  out.quadrature_error = r.error;
  out.range_ok = half_width >= 20.0 * eta;
  return out;
}

// ---------- dissipated energy, closed kernel form ----------

/// Dissipated energy from the two-line kernel paired with the drive
/// transform: ΔE = (g²/2) [k1 Ω1 |q̂(Ω1)|² + k2 Ω2 |q̂(Ω2)|²]. This is the
/// untruncated thermal sum; level-truncated routes converge to it as the
/// Boltzmann tail criterion tightens, and match it exactly at T = 0.
inline double dissipation_kubo(const OscillatorPair& pair,
                               const ThermalEnsemble& ensemble, double g,
                               const DriveProfile& profile) {
  pair.validate();
  ensemble.validate();
  if (!std::isfinite(g))
    throw std::invalid_argument("dissipation_kubo: coupling must be finite");
  const auto ch = detail::kernel_channels(pair, ensemble);
  const double sum_line =
      ch.k1 * ch.o_sum * std::norm(fourier_of_drive(profile, ch.o_sum));
  const double diff_line =
      ch.k2 * ch.o_diff * std::norm(fourier_of_drive(profile, ch.o_diff));
  return 0.5 * g * g * (sum_line + diff_line);
}

// ---------- spectral-derivative route ----------

/// One-sided damped transform φ̃(ω) = ∫_0^∞ φ(t) e^{-iωt} e^{-ηt} dt.
inline Complex phi_tilde(double omega, const OscillatorPair& pair,
                         const ThermalEnsemble& ensemble, double eta) {
  if (!(eta > 0.0))
    throw std::domain_error("phi_tilde: eta must be positive");
  pair.validate();
  const auto ch = detail::kernel_channels(pair, ensemble);
  const Complex s(eta, omega);
  return ch.k1 * ch.o_sum / (s * s + ch.o_sum * ch.o_sum) +
         ch.k2 * ch.o_diff / (s * s + ch.o_diff * ch.o_diff);
}

/// Friction force via −i G ∂φ̃/∂ω at ω = 0; equals friction_force to high
/// accuracy (the derivative is taken numerically on the closed form).
inline Eigen::Vector3d friction_via_spectral_derivative(
    const OscillatorPair& pair, const ThermalEnsemble& ensemble,
    const CouplingDrive& drive) {
  pair.validate();
  drive.validate();
  const auto ch = detail::kernel_channels(pair, ensemble);
  const double h =
      0.02 * std::min(std::hypot(drive.eta, ch.o_sum),
                      ch.o_diff == 0.0
                          ? std::hypot(drive.eta, ch.o_sum)
                          : std::hypot(drive.eta, ch.o_diff));
  const Complex dphi = derivative_richardson(
      [&](double w) { return phi_tilde(w, pair, ensemble, drive.eta); }, 0.0,
      h, 5);
  const Complex coeff = Complex(0.0, -1.0) * dphi;
  if (std::abs(coeff.imag()) > 1e-10 * std::max(std::abs(coeff), 1e-300))
    throw std::runtime_error(
        "friction_via_spectral_derivative: non-real force coefficient");
  return coeff.real() * drive.g_vector();
}

}  // namespace cfr
