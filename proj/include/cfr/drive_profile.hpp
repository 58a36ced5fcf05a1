// drive_profile.hpp — classical drive waveform q(t) and its Fourier transform
// q̂(ω) = ∫ q(t) e^{-iωt} dt: closed-form damped ramp, user-supplied analytic
// functions, or spline-interpolated samples.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cfr/numerics.hpp"

namespace cfr {

using Complex = std::complex<double>;

enum class DriveKind { ramp_damped, analytic_table, sampled };

/// Fourier value with the quadrature error bound that produced it (zero for
/// closed forms).
struct FourierValue {
  Complex value{0.0, 0.0};
  double error{0.0};
  bool converged{true};
};

/// A real drive q(t) of finite effective support. All kinds obey the reality
/// symmetry q̂(-ω) = conj(q̂(ω)) exactly: quadrature-backed transforms are
/// evaluated at |ω| and conjugated.
struct DriveProfile {
  DriveKind kind{DriveKind::ramp_damped};
  double amplitude{1.0};

  // ramp_damped: q(t) = amplitude * t e^{-eta t} for t > 0, zero before
  double eta{0.1};
  double decay_window{30.0};  // support is [0, decay_window / eta]

  // analytic_table: user-supplied waveform, optional closed-form transform
  std::function<double(double)> q_fn;
  std::function<double(double)> qdot_fn;
  std::function<Complex(double)> qhat_fn;
  double t_lo{0.0};
  double t_hi{0.0};

  // sampled: natural cubic spline through (t_i, q_i), zero outside the grid
  CubicSpline spline;

  // ---------- factories ----------

  static DriveProfile ramp_damped(double eta, double amplitude = 1.0,
                                  double decay_window = 30.0) {
    if (!(eta > 0.0))
      throw std::invalid_argument("DriveProfile: eta must be positive");
    if (!(decay_window >= 10.0))
      throw std::invalid_argument(
          "DriveProfile: decay window below 10/eta truncates the ramp");
    DriveProfile p;
    p.kind = DriveKind::ramp_damped;
    p.eta = eta;
    p.amplitude = amplitude;
    p.decay_window = decay_window;
    return p;
  }

  static DriveProfile analytic_table(
      std::function<double(double)> q, double t_lo, double t_hi,
      std::function<Complex(double)> qhat = nullptr,
      std::function<double(double)> qdot = nullptr) {
    if (!q) throw std::invalid_argument("DriveProfile: analytic q required");
    if (!(t_lo < t_hi))
      throw std::invalid_argument("DriveProfile: need t_lo < t_hi");
    DriveProfile p;
    p.kind = DriveKind::analytic_table;
    p.q_fn = std::move(q);
    p.qhat_fn = std::move(qhat);
    p.qdot_fn = std::move(qdot);
    p.t_lo = t_lo;
    p.t_hi = t_hi;
    return p;
  }

  static DriveProfile sampled(std::vector<double> t, std::vector<double> q) {
    DriveProfile p;
    p.kind = DriveKind::sampled;
    p.spline = CubicSpline(std::move(t), std::move(q));
    p.t_lo = p.spline.t_min();
    p.t_hi = p.spline.t_max();
    return p;
  }

  // ---------- waveform ----------

  double q(double t) const {
    switch (kind) {
      case DriveKind::ramp_damped:
        return t > 0.0 ? amplitude * t * std::exp(-eta * t) : 0.0;
      case DriveKind::analytic_table:
        return t < t_lo || t > t_hi ? 0.0 : amplitude * q_fn(t);
      case DriveKind::sampled:
        return amplitude * spline(t);
    }
    return 0.0;
  }

  double qdot(double t) const {
    switch (kind) {
      case DriveKind::ramp_damped:
        return t > 0.0 ? amplitude * (1.0 - eta * t) * std::exp(-eta * t)
                       : 0.0;
      case DriveKind::analytic_table: {
        if (t < t_lo || t > t_hi) return 0.0;
        if (qdot_fn) return amplitude * qdot_fn(t);
        const double h = 1e-3 * (t_hi - t_lo);
        return amplitude * derivative_richardson(q_fn, t, h, 4);
      }
      case DriveKind::sampled:
        return amplitude * spline.derivative(t);
    }
    return 0.0;
  }

  // ---------- support and scale ----------

  double support_lo() const {
    return kind == DriveKind::ramp_damped ? 0.0 : t_lo;
  }
  double support_hi() const {
    return kind == DriveKind::ramp_damped ? decay_window / eta : t_hi;
  }

  /// Largest |q| over the support (exact for the ramp, sampled scan else).
  double peak_abs() const {
    if (kind == DriveKind::ramp_damped)
      return std::abs(amplitude) * std::exp(-1.0) / eta;
    double peak = 0.0;
    const int n = 4096;
    for (int i = 0; i <= n; ++i) {
      const double t =
          support_lo() + (support_hi() - support_lo()) * i / double(n);
      peak = std::max(peak, std::abs(q(t)));
    }
    return peak;
  }

  // ---------- Fourier transform ----------

  FourierValue qhat_with_error(double omega) const {
    if (kind == DriveKind::ramp_damped) {
      const Complex d(eta, omega);
      return {amplitude / (d * d), 0.0, true};
    }
    if (qhat_fn) return {amplitude * qhat_fn(omega), 0.0, true};
    if (omega < 0.0) {
      FourierValue f = qhat_with_error(-omega);
      f.value = std::conj(f.value);
      return f;
    }
    const double span = support_hi() - support_lo();
    const int seed = static_cast<int>(
        std::clamp(std::ceil(span * (omega + 1.0) / (2.0 * pi)), 8.0, 512.0));
    const double scale = std::max(peak_abs() * span, 1e-300);
    auto f = [&](double t) { return q(t) * std::exp(Complex(0.0, -omega * t)); };
    auto r = integrate_adaptive(f, support_lo(), support_hi(), 1e-12 * scale,
                                1e-11, 20000, seed);
    return {r.value, r.error, r.converged};
  }

  Complex qhat(double omega) const { return qhat_with_error(omega).value; }
};

/// q̂(ω); throws with the residual estimate when quadrature fails to converge.
inline Complex fourier_of_drive(const DriveProfile& profile, double omega) {
  const FourierValue f = profile.qhat_with_error(omega);
  if (!f.converged)
    throw std::runtime_error(
        "fourier_of_drive: quadrature did not converge, residual " +
        std::to_string(f.error));
  return f.value;
}

}  // namespace cfr
