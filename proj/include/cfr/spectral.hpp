// spectral.hpp — linear-response dissipation from the spectral decomposition of
// the coupling operator: antisymmetric response weights M_nm, the reconstructed
// response kernel phi_AA(t), dissipated energy via the mode sum and via direct
// time-domain convolution, and closed-form resonant-limit references.
#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include <cfr/core_model.hpp>
#include <cfr/drive_profile.hpp>
#include <cfr/numerics.hpp>
#include <cfr/perturbation.hpp>
#include <cfr/response_kernel.hpp>

namespace cfr {

// ---------- spectral response weights ----------

// M(n,m) = (P_n - P_m)/2 * |A_nm|^2, evaluated in overflow-safe shifted form.
// Exactly antisymmetric by construction: the lower triangle is computed once
// and the upper triangle stores its negation. Diagonal is identically zero.
struct SpectralResponse {
  Eigen::MatrixXd m;      // antisymmetric weight matrix
  Eigen::MatrixXd omega;  // omega(n,k) = (E_n - E_k)/hbar
  double z_shifted = 0.0; // partition sum of the shifted Boltzmann weights
  double e_min = 0.0;     // energy shift used for the weights
};

inline SpectralResponse spectral_response(const LevelSystem& system,
                                          const ThermalEnsemble& ensemble,
                                          double hbar) {
  system.validate();
  ensemble.validate();
  if (!(hbar > 0.0)) throw std::invalid_argument("spectral_response: hbar must be positive");

  const Eigen::Index d = system.dim();
  BoltzmannWeights w = boltzmann_weights(ensemble, system.energies);

  SpectralResponse resp;
  resp.m = Eigen::MatrixXd::Zero(d, d);
  resp.omega = Eigen::MatrixXd::Zero(d, d);
  resp.z_shifted = w.z_shifted;
  resp.e_min = w.e_min;

  for (Eigen::Index n = 0; n < d; ++n) {
    for (Eigen::Index k = 0; k < d; ++k) {
      resp.omega(n, k) = (system.energies[n] - system.energies[k]) / hbar;
    }
  }

  for (Eigen::Index n = 1; n < d; ++n) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double a2 = std::norm(system.coupling(n, k));
      if (a2 == 0.0) continue;
      double half_pop_diff = 0.0;
      if (ensemble.is_zero_t()) {
        half_pop_diff = 0.5 * (w.p[n] - w.p[k]);
      } else {
        // (P_n - P_k)/2 = -(1/Z') * e^{-beta(e_n'+e_k')/2} sinh(beta(e_n'-e_k')/2)
        half_pop_diff = -thermal_sinh_weight(ensemble.beta,
                                             system.energies[n] - w.e_min,
                                             system.energies[k] - w.e_min) /
                        w.z_shifted;
      }
      const double value = half_pop_diff * a2;
      resp.m(n, k) = value;
      resp.m(k, n) = -value;
    }
  }
  return resp;
}

// ---------- response kernel reconstruction ----------

// Literal complex mode sum (1/(i hbar)) sum_{n,k} M_nk (e^{-i w t} - e^{+i w t}).
// Kept as the defining expression; its imaginary part vanishes to roundoff.
inline Complex phi_aa_complex(double t, const SpectralResponse& resp, double hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("phi_aa_complex: hbar must be positive");
  const Eigen::Index d = resp.m.rows();
  const Complex inv_ih = 1.0 / (Complex(0.0, 1.0) * hbar);
  Complex total(0.0, 0.0);
  for (Eigen::Index n = 0; n < d; ++n) {
    for (Eigen::Index k = 0; k < d; ++k) {
      if (resp.m(n, k) == 0.0) continue;
      const double w = resp.omega(n, k);
      const Complex phase = std::exp(Complex(0.0, -w * t)) - std::exp(Complex(0.0, w * t));
      total += resp.m(n, k) * phase;
    }
  }
  return inv_ih * total;
}

// Real closed form of the same sum: -(4/hbar) sum_{n>k} M_nk sin(omega_nk t).
inline double phi_aa(double t, const SpectralResponse& resp, double hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("phi_aa: hbar must be positive");
  const Eigen::Index d = resp.m.rows();
  NeumaierSum total;
  for (Eigen::Index n = 1; n < d; ++n) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (resp.m(n, k) == 0.0) continue;
      total.add(-4.0 / hbar * resp.m(n, k) * std::sin(resp.omega(n, k) * t));
    }
  }
  return total.value();
}

// Compressed list of the distinct oscillating modes of phi_AA:
// phi_AA(t) = sum_k coeff[k] * sin(omega[k] * t) with omega[k] > 0.
struct ResponseModes {
  std::vector<double> omega;
  std::vector<double> coeff;
};

inline ResponseModes response_modes(const SpectralResponse& resp, double hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("response_modes: hbar must be positive");
  const Eigen::Index d = resp.m.rows();
  ResponseModes modes;
  for (Eigen::Index n = 1; n < d; ++n) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (resp.m(n, k) == 0.0) continue;
      const double w = resp.omega(n, k);
      const double c = -4.0 / hbar * resp.m(n, k);
      // Group transitions that share a physical frequency so the time-domain
      // kernel evaluation scales with the number of distinct lines, not level
      // pairs. Energy differences of one line can disagree in the last bits,
      // so merge with a relative tolerance far below any physical separation.
      bool merged = false;
      for (std::size_t i = 0; i < modes.omega.size(); ++i) {
        if (std::abs(modes.omega[i] - w) <= 1e-12 * std::max(std::abs(modes.omega[i]), std::abs(w))) {
          modes.coeff[i] += c;
          merged = true;
          break;
        }
      }
      if (!merged) {
        modes.omega.push_back(w);
        modes.coeff.push_back(c);
      }
    }
  }
  return modes;
}

// ---------- dissipated energy: spectral mode sum ----------

// Delta E = -(2/hbar) sum_{n>k} M_nk omega_nk |qhat(omega_nk)|^2.
// Every term in this ordered sum is non-negative for a thermal state:
// n > k implies omega_nk >= 0 and M_nk <= 0, so no cancellation occurs.
inline double dissipation_spectral(const LevelSystem& system,
                                   const ThermalEnsemble& ensemble,
                                   const DriveProfile& profile,
                                   double hbar) {
  if (!(hbar > 0.0)) throw std::invalid_argument("dissipation_spectral: hbar must be positive");
  const SpectralResponse resp = spectral_response(system, ensemble, hbar);
  const Eigen::Index d = resp.m.rows();
  NeumaierSum total;
  for (Eigen::Index n = 1; n < d; ++n) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (resp.m(n, k) == 0.0) continue;
      const double w = resp.omega(n, k);
      const double qh2 = std::norm(profile.qhat(w));
      total.add(-2.0 / hbar * resp.m(n, k) * w * qh2);
    }
  }
  return total.value();
}

// ---------- dissipated energy: time-domain convolution ----------

struct TimedomainDissipation {
  double value = 0.0;
  double quadrature_error = 0.0;
  bool converged = false;
};

// Delta E = -int_0^{t_max} du phi_AA(u) W(u), where the drive autocorrelation
// W(u) = int ds qdot(s + u) q(s) carries all drive dependence. This is the
// lag-variable form of -int dt qdot(t) int_{-inf}^{t} phi_AA(t - t') q(t') dt'
// (substitute u = t - t' and swap the order of integration).
inline TimedomainDissipation dissipation_timedomain(const LevelSystem& system,
                                                    const ThermalEnsemble& ensemble,
                                                    const DriveProfile& profile,
                                                    double hbar,
                                                    double t_max) {
  if (!(hbar > 0.0)) throw std::invalid_argument("dissipation_timedomain: hbar must be positive");
  if (!(t_max > 0.0)) throw std::invalid_argument("dissipation_timedomain: t_max must be positive");

  const double peak = profile.peak_abs();
  if (!(std::abs(profile.q(t_max)) < 1e-10 * peak)) {
    throw std::invalid_argument(
        "dissipation_timedomain: drive has not decayed at t_max; enlarge the window");
  }

  const SpectralResponse resp = spectral_response(system, ensemble, hbar);
  const ResponseModes modes = response_modes(resp, hbar);
  if (modes.omega.empty()) return TimedomainDissipation{0.0, 0.0, true};

  const double lo = profile.support_lo();
  const double hi = profile.support_hi();
  const double lag_limit = std::min(t_max, hi - lo);
  if (!(lag_limit > 0.0)) return TimedomainDissipation{0.0, 0.0, true};

  // Drive autocorrelation W(u); the integrand vanishes outside s in [lo, hi - u].
  const auto autocorrelation = [&](double u) -> double {
    const double s_hi = hi - u;
    if (!(s_hi > lo)) return 0.0;
    const auto integrand = [&](double s) { return profile.qdot(s + u) * profile.q(s); };
    const int seed = std::max(4, static_cast<int>(std::ceil((s_hi - lo) / 4.0)));
    IntegralResult<double> r = integrate_adaptive(integrand, lo, s_hi,
                                                  1e-14 * peak * peak * (s_hi - lo) + 1e-300,
                                                  1e-10, seed + 4000, seed);
    return r.value;
  };

  // W is smooth and non-oscillatory, so tabulate it once on a dense grid and
  // interpolate; the oscillatory outer integral then costs one mode sum and
  // one spline lookup per point instead of a nested quadrature.
  const int grid_n = 4096;
  std::vector<double> u_grid(grid_n + 1), w_grid(grid_n + 1);
  for (int j = 0; j <= grid_n; ++j) {
    const double u = lag_limit * static_cast<double>(j) / grid_n;
    u_grid[static_cast<std::size_t>(j)] = u;
    w_grid[static_cast<std::size_t>(j)] = autocorrelation(u);
  }
  const CubicSpline w_spline(u_grid, w_grid);

  const auto outer = [&](double u) -> double {
    NeumaierSum kernel;
    for (std::size_t i = 0; i < modes.omega.size(); ++i) {
      kernel.add(modes.coeff[i] * std::sin(modes.omega[i] * u));
    }
    return kernel.value() * w_spline(u);
  };

  double omega_total = 0.0;
  for (double w : modes.omega) omega_total += std::abs(w);
  const int outer_seed = std::min(4000, std::max(8, static_cast<int>(
      std::ceil(lag_limit * omega_total / pi))));
  IntegralResult<double> r = integrate_adaptive(outer, 0.0, lag_limit,
                                                1e-300, 1e-8,
                                                outer_seed + 2000, outer_seed);
  return TimedomainDissipation{-r.value, r.error, r.converged};
}

// ---------- resonant-limit closed forms ----------

// References for the equal-frequency configuration driven by the standard
// ramp t e^{-eta t}: the narrow-line weight of the detuning-integrated
// dissipated energy and the drive-energy relation Delta E = -v.F_f / (4 eta).
struct ResonantClosedForm {
  double delta_weight_de = 0.0;          // pi beta gamma^2/(8 eta sinh^2(beta hbar w1 /2))
  double gamma_sq = 0.0;                 // (D hbar / 2) (v . grad_psi)^2
  double qdot_sq_integral = 0.0;         // int_0^inf qdot^2 dt  (= 1/(4 eta))
  double qdot_q_integral = 0.0;          // int_0^inf qdot q dt  (= 0)
  double dissipation_from_friction = 0.0; // -v . F_detuning / (4 eta)
};

inline ResonantClosedForm resonant_closed_form(const OscillatorPair& pair,
                                               const ThermalEnsemble& ensemble,
                                               const CouplingDrive& drive,
                                               double half_width) {
  pair.validate();
  ensemble.validate();
  drive.validate();
  if (!(pair.omega1 == pair.omega2)) {
    throw std::invalid_argument("resonant_closed_form: requires equal oscillator frequencies");
  }

  ResonantClosedForm out;
  const double g = drive.coupling_scalar();
  out.gamma_sq = 0.5 * pair.big_d() * pair.hbar * g * g;

  if (ensemble.is_zero_t()) {
    out.delta_weight_de = 0.0; // the exchange channel carries no weight at T = 0
  } else {
    const double s = std::sinh(0.5 * ensemble.beta * pair.hbar * pair.omega1);
    out.delta_weight_de = pi * ensemble.beta * out.gamma_sq / (8.0 * drive.eta * s * s);
  }

  // Drive-energy identities for q(t) = t e^{-eta t}, checked by quadrature.
  const DriveProfile ramp = DriveProfile::ramp_damped(drive.eta);
  const double span = ramp.support_hi();
  const int seed = std::max(8, static_cast<int>(std::ceil(span * drive.eta)));
  IntegralResult<double> qdot_sq = integrate_adaptive(
      [&](double t) { const double qd = ramp.qdot(t); return qd * qd; },
      0.0, span, 1e-300, 1e-12, seed + 4000, seed);
  IntegralResult<double> qdot_q = integrate_adaptive(
      [&](double t) { return ramp.qdot(t) * ramp.q(t); },
      0.0, span, 1e-12 / (drive.eta * drive.eta), 1e-10, seed + 4000, seed);
  out.qdot_sq_integral = qdot_sq.value;
  out.qdot_q_integral = qdot_q.value;
  const double expected = 1.0 / (4.0 * drive.eta);
  if (!(std::abs(out.qdot_sq_integral - expected) <= 1e-8 * expected)) {
    throw std::runtime_error("resonant_closed_form: ramp qdot^2 integral failed its identity");
  }

  const DetuningIntegral det = detuning_integral(pair, ensemble, drive, half_width);
  out.dissipation_from_friction = -drive.v.dot(det.force) / (4.0 * drive.eta);
  return out;
}

// ---------- detuning-integrated perturbative energy ----------

// int dOmega2 of the perturbative dissipated energy for the two-oscillator
// product system under the standard ramp, with the second frequency swept
// through resonance. Uses the separable occupancy sums of the truncated
// product space, so each detuning point costs O(n_levels) work while summing
// exactly the same transition table as the dense perturbative route.
namespace detail {

// S = sum_{n=0}^{N-2} (n+1) p(n), T = sum_{n=0}^{N-2} (n+1) p(n+1), with p the
// Boltzmann weights of one oscillator truncated to N levels.
struct OccupancySums {
  double s = 0.0;
  double t = 0.0;
};

inline OccupancySums occupancy_sums(double beta_hbar_omega, int n_levels, bool zero_t) {
  OccupancySums out;
  if (zero_t) {
    out.s = 1.0; // only the ground state is occupied
    out.t = 0.0;
    return out;
  }
  const double r = std::exp(-beta_hbar_omega);
  NeumaierSum z, s, t;
  double weight = 1.0;
  for (int n = 0; n < n_levels; ++n) {
    z.add(weight);
    if (n <= n_levels - 2) s.add((n + 1.0) * weight);
    if (n >= 1) t.add(static_cast<double>(n) * weight);
    weight *= r;
  }
  out.s = s.value() / z.value();
  out.t = t.value() / z.value();
  return out;
}

} // namespace detail

// Perturbative dissipated energy of the two-oscillator product system with
// coupling strength g, computed from the separable occupancy sums of the
// truncated product space. Sums exactly the transition table of the dense
// perturbative route (both frequency channels), at O(n_levels) cost.
inline double product_pair_dissipation(const OscillatorPair& pair,
                                       const ThermalEnsemble& ensemble,
                                       double g,
                                       const DriveProfile& profile,
                                       double tail_tolerance = 1e-12) {
  pair.validate();
  ensemble.validate();
  const int levels1 = recommended_levels(ensemble, pair.omega1, pair.hbar, tail_tolerance);
  const int levels2 = recommended_levels(ensemble, pair.omega2, pair.hbar, tail_tolerance);
  const detail::OccupancySums occ1 = detail::occupancy_sums(
      ensemble.is_zero_t() ? 0.0 : ensemble.beta * pair.hbar * pair.omega1,
      levels1, ensemble.is_zero_t());
  const detail::OccupancySums occ2 = detail::occupancy_sums(
      ensemble.is_zero_t() ? 0.0 : ensemble.beta * pair.hbar * pair.omega2,
      levels2, ensemble.is_zero_t());
  const double sum_freq = pair.omega1 + pair.omega2;
  const double diff_freq = pair.omega1 - pair.omega2;
  const double qh_sum = std::norm(profile.qhat(sum_freq));
  const double qh_diff = std::norm(profile.qhat(diff_freq));
  const double prefactor = g * g * pair.b1() * pair.b2() / pair.hbar;
  return prefactor * (sum_freq * qh_sum * (occ1.s * occ2.s - occ1.t * occ2.t) +
                      diff_freq * qh_diff * (occ1.s * occ2.t - occ1.t * occ2.s));
}

inline IntegralResult<double> detuning_integrated_perturbative_energy(
    const OscillatorPair& pair,
    const ThermalEnsemble& ensemble,
    const CouplingDrive& drive,
    double half_width,
    int n_panels = 48,
    double tail_tolerance = 1e-12) {
  pair.validate();
  ensemble.validate();
  drive.validate();
  if (!(half_width > 0.0) || !(half_width < pair.omega1)) {
    throw std::invalid_argument(
        "detuning_integrated_perturbative_energy: half_width must lie in (0, omega1)");
  }
  if (n_panels < 1) throw std::invalid_argument("detuning_integrated_perturbative_energy: n_panels must be positive");

  const double g = drive.coupling_scalar();
  const double eta = drive.eta;
  const DriveProfile ramp = DriveProfile::ramp_damped(eta);

  // Map the detuning to theta with omega1 - omega2 = eta tan(theta), which
  // flattens the resonant line for the quadrature.
  const double theta_max = std::atan(half_width / eta);
  const auto integrand = [&](double theta) -> double {
    const double c = std::cos(theta);
    const double detuning = eta * std::tan(theta);
    OscillatorPair detuned = pair;
    detuned.omega2 = pair.omega1 - detuning;
    return product_pair_dissipation(detuned, ensemble, g, ramp, tail_tolerance) *
           eta / (c * c);
  };

  return integrate_adaptive(integrand, -theta_max, theta_max,
                            1e-300, 1e-10, n_panels + 4000, n_panels);
}

} // namespace cfr
