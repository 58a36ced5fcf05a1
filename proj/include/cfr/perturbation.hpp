// perturbation.hpp — first-order time-dependent perturbation theory for a
// level system driven by −A·q(t): transition amplitudes and probabilities,
// perturbed populations, and the dissipated energy in its direct and
// thermally symmetrized forms.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "cfr/core_model.hpp"
#include "cfr/drive_profile.hpp"
#include "cfr/numerics.hpp"

namespace cfr {

// ---------- transition data ----------

/// First-order amplitudes b_nm = (i/ħ) A_nm q̂(−ω_nm) and probabilities
/// B_nm = |b_nm|². B is exactly symmetric by construction (one |A| and one
/// |q̂| evaluation per unordered pair).
struct TransitionTable {
  Eigen::MatrixXcd b;
  Eigen::MatrixXd big_b;
  Eigen::MatrixXd omega;      // ω_nm = (E_n − E_m)/ħ
  double max_offdiag_b{0.0};  // largest off-diagonal B_nm
};

/// Populations before (p) and after (p1) the drive.
struct PopulationVector {
  Eigen::VectorXd p;
  Eigen::VectorXd p1;
  bool perturbative_ok{true};  // false when max B_nm exceeds 0.1
};

/// Dissipated energy with both evaluation routes and the scale of the summed
/// terms (the natural yardstick for relative comparisons under cancellation).
struct PerturbativeDissipation {
  double delta_e{0.0};              // Σ_nm (E_n−E_m) P_m B_nm
  double delta_e_symmetrized{0.0};  // sinh-weighted unordered-pair form
  double term_scale{0.0};           // Σ_nm |(E_n−E_m) P_m B_nm|
  double max_b{0.0};
  bool perturbative_ok{true};
};

// ---------- operations ----------

inline TransitionTable transition_amplitudes(const LevelSystem& system,
                                             const DriveProfile& profile,
                                             double hbar) {
  system.validate();
  if (!(hbar > 0.0))
    throw std::invalid_argument("transition_amplitudes: hbar must be positive");
  const Eigen::Index n = system.dim();
  TransitionTable t;
  t.b = Eigen::MatrixXcd::Zero(n, n);
  t.big_b = Eigen::MatrixXd::Zero(n, n);
  t.omega.resize(n, n);
  const Complex i_over_hbar(0.0, 1.0 / hbar);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c)
      t.omega(r, c) = (system.energies[r] - system.energies[c]) / hbar;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (std::abs(system.coupling(r, r)) != 0.0)
      t.b(r, r) = i_over_hbar * system.coupling(r, r) * profile.qhat(0.0);
    for (Eigen::Index c = r + 1; c < n; ++c) {
      if (std::abs(system.coupling(r, c)) == 0.0 &&
          std::abs(system.coupling(c, r)) == 0.0)
        continue;
      const Complex qh = profile.qhat(-t.omega(r, c));
      t.b(r, c) = i_over_hbar * system.coupling(r, c) * qh;
      t.b(c, r) = i_over_hbar * system.coupling(c, r) * std::conj(qh);
      const double prob = std::norm(system.coupling(r, c)) * std::norm(qh) /
                          (hbar * hbar);
      t.big_b(r, c) = prob;
      t.big_b(c, r) = prob;
      t.max_offdiag_b = std::max(t.max_offdiag_b, prob);
    }
  }
  return t;
}

inline PopulationVector perturbed_populations(const Eigen::VectorXd& p,
                                              const TransitionTable& table) {
  const Eigen::Index n = p.size();
  if (table.big_b.rows() != n)
    throw std::invalid_argument(
        "perturbed_populations: table dimension mismatch");
  NeumaierSum total;
  for (Eigen::Index i = 0; i < n; ++i) total.add(p[i]);
  if (std::abs(total.value() - 1.0) > 1e-10)
    throw std::invalid_argument("perturbed_populations: p must sum to 1");

  PopulationVector out;
  out.p = p;
  out.p1.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    NeumaierSum transfer;
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == i) continue;
      transfer.add((p[m] - p[i]) * table.big_b(i, m));
    }
    out.p1[i] = p[i] + transfer.value();
  }
  out.perturbative_ok = table.max_offdiag_b <= 0.1;
  return out;
}

/// Direct dissipated-energy sum Σ_nm (E_n − E_m) P_m B_nm for explicitly
/// supplied populations (building block shared by tests and diagnostics).
inline double dissipation_from_populations(const Eigen::VectorXd& energies,
                                           const Eigen::VectorXd& p,
                                           const TransitionTable& table) {
  const Eigen::Index n = energies.size();
  NeumaierSum sum;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == r || table.big_b(r, m) == 0.0) continue;
      sum.add((energies[r] - energies[m]) * p[m] * table.big_b(r, m));
    }
  return sum.value();
}

inline PerturbativeDissipation dissipated_energy_perturbative(
    const LevelSystem& system, const ThermalEnsemble& ensemble,
    const DriveProfile& profile, double hbar) {
  system.validate();
  ensemble.validate();
  const auto table = transition_amplitudes(system, profile, hbar);
  const auto weights = boltzmann_weights(ensemble, system.energies);
  const Eigen::Index n = system.dim();

  PerturbativeDissipation out;
  out.max_b = table.max_offdiag_b;
  out.perturbative_ok = table.max_offdiag_b <= 0.1;

  NeumaierSum direct, scale, sym;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index m = 0; m < n; ++m) {
      if (m == r || table.big_b(r, m) == 0.0) continue;
      const double term =
          (system.energies[r] - system.energies[m]) * weights.p[m] *
          table.big_b(r, m);
      direct.add(term);
      scale.add(std::abs(term));
    }
  // unordered-pair form: Δ_nm B_nm (P_m − P_n), with the population
  // difference written through the overflow-safe sinh weight at finite β
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index m = 0; m < r; ++m) {
      if (table.big_b(r, m) == 0.0) continue;
      const double delta = system.energies[r] - system.energies[m];
      double pop_diff;  // P_m − P_r
      if (ensemble.is_zero_t()) {
        pop_diff = weights.p[m] - weights.p[r];
      } else {
        pop_diff = 2.0 / weights.z_shifted *
                   thermal_sinh_weight(ensemble.beta,
                                       system.energies[r] - weights.e_min,
                                       system.energies[m] - weights.e_min);
      }
      sym.add(delta * table.big_b(r, m) * pop_diff);
    }
  out.delta_e = direct.value();
  out.delta_e_symmetrized = sym.value();
  out.term_scale = scale.value();
  if (std::abs(out.delta_e - out.delta_e_symmetrized) >
      1e-12 * std::max(out.term_scale, 1e-300))
    throw std::runtime_error(
        "dissipated_energy_perturbative: direct and symmetrized sums "
        "disagree");
  return out;
}

}  // namespace cfr
