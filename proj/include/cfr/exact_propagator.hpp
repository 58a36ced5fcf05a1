// exact_propagator.hpp — exact truncated-Hilbert-space dynamics under the
// driven coupling: iħ ∂ψ/∂t = (H₀ − λ A q(t)) ψ, integrated in the interaction
// picture with an adaptive embedded Runge–Kutta 5(4) stepper. Serves as the
// non-perturbative oracle for the dissipation routes.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include <cfr/core_model.hpp>
#include <cfr/drive_profile.hpp>
#include <cfr/numerics.hpp>
#include <cfr/perturbation.hpp>

namespace cfr {

// ---------- configuration ----------

struct StepControl {
  double initial_step = 0.0;      // 0 = pick automatically
  double local_tolerance = 1e-10; // embedded error target per step
};

struct PropagationConfig {
  double lambda = 1.0;        // dimensionless multiplier on the coupling A
  double t_start = 0.0;
  double t_end = 0.0;
  StepControl step_control{};
  bool include_static = false; // retain a constant coupling coefficient
  double static_value = 0.0;   // added to q(t) when include_static is set

  void validate() const {
    if (!(t_end > t_start)) throw std::invalid_argument("PropagationConfig: t_end must exceed t_start");
    if (!(step_control.local_tolerance > 1e-14 && step_control.local_tolerance < 1e-4))
      throw std::invalid_argument("PropagationConfig: local_tolerance must lie in (1e-14, 1e-4)");
    if (!(lambda >= 0.0)) throw std::invalid_argument("PropagationConfig: lambda must be >= 0");
    if (!(step_control.initial_step >= 0.0))
      throw std::invalid_argument("PropagationConfig: initial_step must be >= 0");
    if (!std::isfinite(t_start) || !std::isfinite(t_end))
      throw std::invalid_argument("PropagationConfig: times must be finite");
  }
};

// ---------- results ----------

struct TrajectoryResult {
  Eigen::VectorXcd amplitudes; // final state in the eigenbasis
  double norm_drift = 0.0;     // max |norm - 1| over accepted steps
  long step_count = 0;         // accepted steps
};

struct EvolutionResult {
  Eigen::MatrixXcd final_amplitudes; // column m = final state started from |m>
  double norm_drift = 0.0;           // max over propagated trajectories
  double dE_exact = 0.0;             // thermally averaged energy change
  long step_count = 0;               // total accepted steps
  double skipped_weight = 0.0;       // thermal weight of unpropagated states
};

// ---------- interaction-picture right-hand side ----------

namespace detail {

// Sparse view of the coupling with transitions grouped on distinct
// frequencies, so each evaluation computes one complex exponential per
// physical line rather than per matrix element.
struct InteractionCoupling {
  struct Entry {
    Eigen::Index row;
    Eigen::Index col;
    Complex a;
    std::size_t phase; // index into omegas
  };
  std::vector<Entry> entries;
  std::vector<double> omegas;

  InteractionCoupling(const LevelSystem& system, double hbar) {
    const Eigen::Index d = system.dim();
    for (Eigen::Index n = 0; n < d; ++n) {
      for (Eigen::Index k = 0; k < d; ++k) {
        const Complex a = system.coupling(n, k);
        if (a == Complex(0.0, 0.0)) continue;
        const double w = (system.energies[n] - system.energies[k]) / hbar;
        std::size_t idx = omegas.size();
        for (std::size_t i = 0; i < omegas.size(); ++i) {
          if (std::abs(omegas[i] - w) <=
              1e-12 * std::max(std::abs(omegas[i]), std::abs(w))) {
            idx = i;
            break;
          }
        }
        if (idx == omegas.size()) omegas.push_back(w);
        entries.push_back(Entry{n, k, a, idx});
      }
    }
  }

  // dchi = (i lambda c(t) / hbar) * e^{i H0 t} A e^{-i H0 t} chi
  void apply(double t, const Complex& factor, const Eigen::VectorXcd& chi,
             Eigen::VectorXcd& dchi, std::vector<Complex>& phase_buf) const {
    phase_buf.resize(omegas.size());
    for (std::size_t i = 0; i < omegas.size(); ++i)
      phase_buf[i] = std::exp(Complex(0.0, omegas[i] * t));
    dchi.setZero();
    for (const Entry& e : entries)
      dchi[e.row] += factor * e.a * phase_buf[e.phase] * chi[e.col];
  }
};

// Dormand–Prince 5(4) coefficients.
struct Dp5 {
  static constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0,
                          c5 = 8.0 / 9.0;
  static constexpr double a21 = 1.0 / 5.0;
  static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
  static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
  static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                          a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
  static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                          a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                          a65 = -5103.0 / 18656.0;
  static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0,
                          b4 = 125.0 / 192.0, b5 = -2187.0 / 6784.0,
                          b6 = 11.0 / 84.0;
  // 5th-order minus embedded 4th-order weights (error estimate).
  static constexpr double e1 = b1 - 5179.0 / 57600.0;
  static constexpr double e3 = b3 - 7571.0 / 16695.0;
  static constexpr double e4 = b4 - 393.0 / 640.0;
  static constexpr double e5 = b5 + 92097.0 / 339200.0;
  static constexpr double e6 = b6 - 187.0 / 2100.0;
  static constexpr double e7 = -1.0 / 40.0;
};

} // namespace detail

// ---------- single-trajectory propagation ----------

inline TrajectoryResult evolve_state(const LevelSystem& system,
                                     const DriveProfile& profile,
                                     const PropagationConfig& config,
                                     Eigen::Index initial_index,
                                     double hbar) {
  system.validate();
  config.validate();
  if (!(hbar > 0.0)) throw std::invalid_argument("evolve_state: hbar must be positive");
  const Eigen::Index d = system.dim();
  if (initial_index < 0 || initial_index >= d)
    throw std::invalid_argument("evolve_state: initial_index out of range");
  const double peak = profile.peak_abs();
  if (!(std::abs(profile.q(config.t_end)) < 1e-10 * peak))
    throw std::invalid_argument("evolve_state: drive has not decayed by t_end");

  const detail::InteractionCoupling coupling(system, hbar);
  const double span = config.t_end - config.t_start;
  const double tol = config.step_control.local_tolerance;

  const auto coefficient = [&](double t) -> double {
    double c = profile.q(t);
    if (config.include_static) c += config.static_value;
    return c;
  };
  std::vector<Complex> phase_buf;
  const auto rhs = [&](double t, const Eigen::VectorXcd& chi, Eigen::VectorXcd& dchi) {
    const Complex factor = Complex(0.0, config.lambda * coefficient(t) / hbar);
    coupling.apply(t, factor, chi, dchi, phase_buf);
  };

  Eigen::VectorXcd chi = Eigen::VectorXcd::Zero(d);
  chi[initial_index] = Complex(1.0, 0.0);

  Eigen::VectorXcd k1(d), k2(d), k3(d), k4(d), k5(d), k6(d), k7(d);
  Eigen::VectorXcd stage(d), next(d), err(d);

  double t = config.t_start;
  double h = config.step_control.initial_step > 0.0
                 ? std::min(config.step_control.initial_step, span)
                 : span / 1000.0;
  double drift = 0.0;
  long accepted = 0;
  long attempts = 0;
  const long budget = 5000000;
  bool have_k1 = false;

  using D = detail::Dp5;
  while (t < config.t_end) {
    if (++attempts > budget) {
      throw std::runtime_error(
          "evolve_state: step budget of 5000000 attempts exhausted");
    }
    if (!(h > 1e-14 * span)) {
      throw std::runtime_error("evolve_state: step size underflow");
    }
    const bool final_step = config.t_end - t <= h;
    const double hs = final_step ? config.t_end - t : h;

    if (!have_k1) rhs(t, chi, k1);
    stage = chi + hs * D::a21 * k1;
    rhs(t + D::c2 * hs, stage, k2);
    stage = chi + hs * (D::a31 * k1 + D::a32 * k2);
    rhs(t + D::c3 * hs, stage, k3);
    stage = chi + hs * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3);
    rhs(t + D::c4 * hs, stage, k4);
    stage = chi + hs * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4);
    rhs(t + D::c5 * hs, stage, k5);
    stage = chi + hs * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 +
                        D::a65 * k5);
    rhs(t + hs, stage, k6);
    next = chi + hs * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 +
                       D::b6 * k6);
    rhs(t + hs, next, k7); // FSAL stage, doubles as the error probe
    err = hs * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 +
                D::e7 * k7);

    // Mostly-relative control: the absolute floor sits two decades below the
    // per-component tolerance so small transition amplitudes — which carry
    // the entire energy transfer at weak coupling — are resolved relative to
    // their own magnitude, not the norm of the state.
    double err_norm_sq = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double sc = 0.01 * tol + tol * std::max(std::abs(chi[i]), std::abs(next[i]));
      const double e = std::abs(err[i]) / sc;
      err_norm_sq += e * e;
    }
    const double err_norm = std::sqrt(err_norm_sq / static_cast<double>(d));

    if (err_norm <= 1.0) {
      t = final_step ? config.t_end : t + hs;
      chi.swap(next);
      k1.swap(k7);
      have_k1 = true;
      ++accepted;
      drift = std::max(drift, std::abs(chi.norm() - 1.0));
      if (drift > 1e-9) {
        std::ostringstream msg;
        msg << "evolve_state: norm drift " << drift << " exceeded 1e-9 after "
            << accepted << " accepted steps (budget " << budget << ")";
        throw std::runtime_error(msg.str());
      }
    } else {
      have_k1 = false; // FSAL stage belongs to the rejected candidate
    }
    const double scale = err_norm > 0.0
                             ? 0.9 * std::pow(err_norm, -0.2)
                             : 5.0;
    h = hs * std::clamp(scale, 0.2, 5.0);
  }

  // Map back to the lab frame: psi_n = e^{-i E_n t_end / hbar} chi_n.
  TrajectoryResult out;
  out.amplitudes = chi;
  for (Eigen::Index n = 0; n < d; ++n) {
    out.amplitudes[n] *= std::exp(Complex(0.0, -system.energies[n] * config.t_end / hbar));
  }
  out.norm_drift = drift;
  out.step_count = accepted;
  return out;
}

// ---------- thermal ensemble propagation ----------

inline EvolutionResult exact_dissipation(const LevelSystem& system,
                                         const ThermalEnsemble& ensemble,
                                         const DriveProfile& profile,
                                         const PropagationConfig& config,
                                         double hbar,
                                         double p_cutoff = 1e-13) {
  system.validate();
  ensemble.validate();
  config.validate();
  if (!(hbar > 0.0)) throw std::invalid_argument("exact_dissipation: hbar must be positive");
  if (!(p_cutoff >= 0.0)) throw std::invalid_argument("exact_dissipation: p_cutoff must be >= 0");

  const Eigen::Index d = system.dim();
  const BoltzmannWeights w = boltzmann_weights(ensemble, system.energies);

  EvolutionResult out;
  out.final_amplitudes = Eigen::MatrixXcd::Zero(d, d);

  NeumaierSum de;
  NeumaierSum skipped;
  for (Eigen::Index m = 0; m < d; ++m) {
    const double pm = w.p[m];
    if (pm < p_cutoff) {
      skipped.add(pm);
      continue;
    }
    const TrajectoryResult traj = evolve_state(system, profile, config, m, hbar);
    out.final_amplitudes.col(m) = traj.amplitudes;
    out.norm_drift = std::max(out.norm_drift, traj.norm_drift);
    out.step_count += traj.step_count;

    // Diagonal-population bookkeeping against H0: phases are dropped.
    NeumaierSum gain;
    for (Eigen::Index n = 0; n < d; ++n) {
      gain.add((system.energies[n] - system.energies[m]) *
               std::norm(traj.amplitudes[n]));
    }
    de.add(pm * gain.value());
  }
  out.dE_exact = de.value();
  out.skipped_weight = skipped.value();
  if (!std::isfinite(out.dE_exact))
    throw std::runtime_error("exact_dissipation: non-finite energy change");
  return out;
}

// ---------- quadratic-scaling diagnostic ----------

struct QuadraticScalingTable {
  std::vector<double> lambdas;
  std::vector<double> ratios;      // dE_exact(lambda) / lambda^2
  double reference = 0.0;          // perturbative energy at unit coupling
  double last_step_rel = 0.0;      // |r_last - r_prev| / |r_last|
  double reference_rel = 0.0;      // |r_last - reference| / |reference|
};

inline QuadraticScalingTable quadratic_scaling_check(
    const LevelSystem& system,
    const ThermalEnsemble& ensemble,
    const DriveProfile& profile,
    const PropagationConfig& base_config,
    const std::vector<double>& lambda_list,
    double hbar) {
  if (lambda_list.size() < 3)
    throw std::invalid_argument("quadratic_scaling_check: need >= 3 lambda values");
  for (std::size_t i = 0; i < lambda_list.size(); ++i) {
    if (!(lambda_list[i] > 0.0))
      throw std::invalid_argument("quadratic_scaling_check: lambdas must be positive");
    if (i > 0 && !(lambda_list[i] < lambda_list[i - 1]))
      throw std::invalid_argument("quadratic_scaling_check: lambdas must descend");
  }

  QuadraticScalingTable table;
  table.lambdas = lambda_list;
  for (double lambda : lambda_list) {
    PropagationConfig config = base_config;
    config.lambda = lambda;
    const EvolutionResult r = exact_dissipation(system, ensemble, profile, config, hbar);
    table.ratios.push_back(r.dE_exact / (lambda * lambda));
  }
  table.reference =
      dissipated_energy_perturbative(system, ensemble, profile, hbar).delta_e;

  const double r_last = table.ratios.back();
  const double r_prev = table.ratios[table.ratios.size() - 2];
  table.last_step_rel = std::abs(r_last - r_prev) /
                        std::max(std::abs(r_last), 1e-300);
  table.reference_rel = std::abs(r_last - table.reference) /
                        std::max(std::abs(table.reference), 1e-300);
  if (table.last_step_rel >= 0.01 || table.reference_rel >= 0.01) {
    std::ostringstream msg;
    msg << "quadratic_scaling_check: ratio sequence did not settle within 1%:";
    for (std::size_t i = 0; i < table.lambdas.size(); ++i)
      msg << " (" << table.lambdas[i] << ", " << table.ratios[i] << ")";
    msg << "; perturbative reference " << table.reference;
    throw std::runtime_error(msg.str());
  }
  return table;
}

} // namespace cfr
