// core_model.hpp — oscillator parameters, truncated ladder algebra, product
// coupling operators and thermal statistics shared by every dissipation route.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfr/numerics.hpp"

namespace cfr {

using Complex = std::complex<double>;

// ---------- parameter aggregates ----------

/// Two harmonic oscillators with a bilinear x1*x2 coupling channel.
struct OscillatorPair {
  double m1{1.0};
  double m2{1.0};
  double omega1{1.0};
  double omega2{1.0};
  double hbar{1.0};

  // harmonic length squared of each oscillator
  double b1() const { return hbar / (2.0 * m1 * omega1); }
  double b2() const { return hbar / (2.0 * m2 * omega2); }
  // kernel prefactor hbar / (2 m1 m2 w1 w2) = 2 b1 b2 / hbar
  double big_d() const { return hbar / (2.0 * m1 * m2 * omega1 * omega2); }

  void validate() const {
    if (!(m1 > 0.0) || !(m2 > 0.0))
      throw std::invalid_argument("OscillatorPair: masses must be positive");
    if (!(omega1 > 0.0) || !(omega2 > 0.0))
      throw std::invalid_argument(
          "OscillatorPair: frequencies must be positive");
    if (!(hbar > 0.0))
      throw std::invalid_argument("OscillatorPair: hbar must be positive");
  }
};

/// Canonical ensemble; beta = +infinity and the explicit flag both mean T = 0.
struct ThermalEnsemble {
  double beta{1.0};
  bool zero_t{false};

  static ThermalEnsemble finite(double beta) { return {beta, false}; }
  static ThermalEnsemble zero_temperature() {
    return {std::numeric_limits<double>::infinity(), true};
  }

  bool is_zero_t() const { return zero_t || std::isinf(beta); }

  void validate() const {
    if (is_zero_t()) return;
    if (!(beta > 0.0))
      throw std::invalid_argument("ThermalEnsemble: beta must be positive");
  }
};

/// Fock-space cutoff with the Boltzmann tail bound it must satisfy.
struct FockTruncation {
  int n_levels{8};
  double tail_tolerance{1e-12};

  void validate() const {
    if (n_levels < 2)
      throw std::invalid_argument("FockTruncation: need at least 2 levels");
    if (!(tail_tolerance > 0.0))
      throw std::invalid_argument(
          "FockTruncation: tail tolerance must be positive");
  }
};

/// Generic driven level system: sorted energies and a Hermitian coupling A.
struct LevelSystem {
  Eigen::VectorXd energies;
  Eigen::MatrixXcd coupling;

  Eigen::Index dim() const { return energies.size(); }

  void validate() const {
    const Eigen::Index n = energies.size();
    if (n < 2) throw std::invalid_argument("LevelSystem: need >= 2 levels");
    if (coupling.rows() != n || coupling.cols() != n)
      throw std::invalid_argument(
          "LevelSystem: coupling dimension must match energies");
    double scale = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!std::isfinite(energies[i]))
        throw std::invalid_argument("LevelSystem: energies must be finite");
      if (i > 0 && energies[i] < energies[i - 1])
        throw std::invalid_argument("LevelSystem: energies must ascend");
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        scale = std::max(scale, std::abs(coupling(i, j)));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j)
        if (std::abs(coupling(i, j) - std::conj(coupling(j, i))) >
            1e-12 * std::max(scale, 1.0))
          throw std::invalid_argument("LevelSystem: coupling must be Hermitian");
  }
};

/// Product-space level system plus the (n1, n2) label of every level.
struct ProductLevelSystem {
  LevelSystem system;
  std::vector<std::array<int, 2>> labels;

  int index_of(int n1, int n2) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i][0] == n1 && labels[i][1] == n2)
        return static_cast<int>(i);
    return -1;
  }
};

struct ThermalOccupation {
  double mean_n{0.0};
  double coth_factor{1.0};  // coth(beta hbar omega / 2) = 2<n> + 1
};

struct BoltzmannWeights {
  Eigen::VectorXd p;      // normalized populations
  double z_shifted{0.0};  // partition sum after subtracting the ground energy
  double e_min{0.0};
};

// ---------- ladder algebra ----------

/// Position operator sqrt(hbar/2mw)(a + a^dag) on a truncated Fock ladder.
inline Eigen::MatrixXd position_matrix(double mass, double omega, double hbar,
                                       const FockTruncation& trunc) {
  trunc.validate();
  if (!(mass > 0.0) || !(omega > 0.0) || !(hbar > 0.0))
    throw std::invalid_argument("position_matrix: mass, omega, hbar > 0");
  const int n = trunc.n_levels;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
  const double unit = std::sqrt(hbar / (2.0 * mass * omega));
  for (int k = 0; k + 1 < n; ++k) {
    const double v = unit * std::sqrt(static_cast<double>(k) + 1.0);
    x(k, k + 1) = v;
    x(k + 1, k) = v;
  }
  return x;
}

/// Builds H0 spectrum and A = -g x1 x2 on the truncated product space,
/// levels sorted by ascending energy (stable within exact degeneracies).
inline ProductLevelSystem product_coupling_operator(const OscillatorPair& pair,
                                                    const FockTruncation& trunc,
                                                    double strength) {
  pair.validate();
  trunc.validate();
  if (!std::isfinite(strength))
    throw std::invalid_argument("product_coupling_operator: finite strength");

  const int n = trunc.n_levels;
  const FockTruncation single{n, trunc.tail_tolerance};
  const Eigen::MatrixXd x1 =
      position_matrix(pair.m1, pair.omega1, pair.hbar, single);
  const Eigen::MatrixXd x2 =
      position_matrix(pair.m2, pair.omega2, pair.hbar, single);

  const int dim = n * n;
  std::vector<int> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), 0);
  auto energy_of = [&](int idx) {
    const int n1 = idx / n;
    const int n2 = idx % n;
    return pair.hbar * pair.omega1 * (n1 + 0.5) +
           pair.hbar * pair.omega2 * (n2 + 0.5);
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return energy_of(a) < energy_of(b);
  });

  ProductLevelSystem out;
  out.system.energies.resize(dim);
  out.system.coupling = Eigen::MatrixXcd::Zero(dim, dim);
  out.labels.resize(static_cast<std::size_t>(dim));
  std::vector<int> pos(static_cast<std::size_t>(dim));
  for (int i = 0; i < dim; ++i) {
    out.system.energies[i] = energy_of(order[static_cast<std::size_t>(i)]);
    const int idx = order[static_cast<std::size_t>(i)];
    out.labels[static_cast<std::size_t>(i)] = {idx / n, idx % n};
    pos[static_cast<std::size_t>(idx)] = i;
  }
  // x1 x2 moves both mode indices by exactly one; fill only those entries
  for (int a1 = 0; a1 < n; ++a1)
    for (int b1 : {a1 - 1, a1 + 1}) {
      if (b1 < 0 || b1 >= n) continue;
      for (int a2 = 0; a2 < n; ++a2)
        for (int b2 : {a2 - 1, a2 + 1}) {
          if (b2 < 0 || b2 >= n) continue;
          const int row = pos[static_cast<std::size_t>(a1 * n + a2)];
          const int col = pos[static_cast<std::size_t>(b1 * n + b2)];
          out.system.coupling(row, col) =
              -strength * x1(a1, b1) * x2(a2, b2);
        }
    }
  return out;
}

// ---------- thermal statistics ----------

/// Bose occupation and coth prefactor of one oscillator; T = 0 gives {0, 1}.
inline ThermalOccupation thermal_occupation(const ThermalEnsemble& ensemble,
                                            double omega, double hbar) {
  ensemble.validate();
  if (!(omega > 0.0) || !(hbar > 0.0))
    throw std::invalid_argument("thermal_occupation: omega, hbar > 0");
  if (ensemble.is_zero_t()) return {0.0, 1.0};
  const double x = ensemble.beta * hbar * omega;
  if (!(x > 0.0))
    throw std::invalid_argument("thermal_occupation: beta*hbar*omega > 0");
  const double mean_n = 1.0 / std::expm1(x);
  return {mean_n, 2.0 * mean_n + 1.0};
}

/// Normalized Boltzmann weights with ground-energy shift; T = 0 distributes
/// uniformly over the exactly degenerate ground levels.
inline BoltzmannWeights boltzmann_weights(const ThermalEnsemble& ensemble,
                                          const Eigen::VectorXd& energies) {
  ensemble.validate();
  const Eigen::Index n = energies.size();
  if (n < 1) throw std::invalid_argument("boltzmann_weights: empty spectrum");
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(energies[i]))
      throw std::invalid_argument("boltzmann_weights: finite energies only");

  BoltzmannWeights out;
  out.e_min = energies.minCoeff();
  out.p.resize(n);
  if (ensemble.is_zero_t()) {
    double count = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (energies[i] == out.e_min) count += 1.0;
    for (Eigen::Index i = 0; i < n; ++i)
      out.p[i] = energies[i] == out.e_min ? 1.0 / count : 0.0;
    out.z_shifted = count;
    return out;
  }
  NeumaierSum z;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.p[i] = std::exp(-ensemble.beta * (energies[i] - out.e_min));
    z.add(out.p[i]);
  }
  out.z_shifted = z.value();
  out.p /= out.z_shifted;
  return out;
}

/// Relative Boltzmann weight of the discarded levels n >= n_levels of one
/// oscillator: exp(-beta hbar omega n_levels). Zero at T = 0.
inline double truncation_tail_weight(const ThermalEnsemble& ensemble,
                                     double omega, double hbar, int n_levels) {
  ensemble.validate();
  if (!(omega > 0.0) || !(hbar > 0.0) || n_levels < 1)
    throw std::invalid_argument("truncation_tail_weight: bad arguments");
  if (ensemble.is_zero_t()) return 0.0;
  return std::exp(-ensemble.beta * hbar * omega * n_levels);
}

/// Smallest level count meeting the tail tolerance, plus a 2-level margin.
inline int recommended_levels(const ThermalEnsemble& ensemble, double omega,
                              double hbar, double tail_tol) {
  if (!(tail_tol > 0.0) || tail_tol >= 1.0)
    throw std::invalid_argument("recommended_levels: tail_tol in (0,1)");
  if (ensemble.is_zero_t()) return 4;  // ground + one coupling rung + margin
  ensemble.validate();
  const double need =
      std::log(1.0 / tail_tol) / (ensemble.beta * hbar * omega);
  const int base = static_cast<int>(std::ceil(need));
  return std::max(base, 2) + 2;
}

/// Overflow-safe e^{-beta(En'+Em')/2} sinh(beta(En'-Em')/2) on shifted
/// energies En', Em' >= 0; equals (e^{-beta Em'} - e^{-beta En'})/2.
inline double thermal_sinh_weight(double beta, double en_shifted,
                                  double em_shifted) {
  if (!(beta > 0.0))
    throw std::invalid_argument("thermal_sinh_weight: beta must be positive");
  const double s = 0.5 * beta * (en_shifted + em_shifted);
  const double d = 0.5 * beta * (en_shifted - em_shifted);
  if (s < 700.0) return std::exp(-s) * std::sinh(d);
  return 0.5 * (std::exp(-beta * em_shifted) - std::exp(-beta * en_shifted));
}

}  // namespace cfr
