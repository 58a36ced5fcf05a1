// acceptance_gate.cpp — end-to-end gate: one PASS/FAIL line per criterion,
// with every tolerance pinned in this file. Exit code 0 only when all
// criteria hold.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfr/barton.hpp"
#include "cfr/core_model.hpp"
#include "cfr/drive_profile.hpp"
#include "cfr/exact_propagator.hpp"
#include "cfr/numerics.hpp"
#include "cfr/perturbation.hpp"
#include "cfr/response_kernel.hpp"
#include "cfr/spectral.hpp"
#include "support/corpus.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double rel_dev(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

std::string fmt(const char* format, ...) {
  char buf[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// 1. Perturbative and spectral dissipated energies agree to 1e-12 relative
//    on 100 randomized level systems.
Outcome route_identity() {
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng(cfr_test::corpus_seed());
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const cfr_test::RandomSystem rs = cfr_test::make_random_system(rng);
    const cfr::ThermalEnsemble ens{rs.beta, false};
    const cfr::DriveProfile ramp = cfr::DriveProfile::ramp_damped(rs.eta);
    const double pert =
        cfr::dissipated_energy_perturbative(rs.system, ens, ramp, 1.0).delta_e;
    const double spec = cfr::dissipation_spectral(rs.system, ens, ramp, 1.0);
    worst = std::max(worst, rel_dev(pert, spec));
  }
  Outcome out;
  out.pass = worst <= kTol;
  out.detail = fmt("max relative deviation %.3e over 100 systems (tol %.0e)",
                   worst, kTol);
  return out;
}

// 2. The nested time-domain convolution reproduces the spectral value to
//    1e-6 relative on 10 randomized systems.
Outcome timedomain_identity() {
  constexpr double kTol = 1e-6;
  std::mt19937_64 rng(cfr_test::corpus_seed());
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const cfr_test::RandomSystem rs = cfr_test::make_random_system(rng);
    const cfr::ThermalEnsemble ens{rs.beta, false};
    const cfr::DriveProfile ramp = cfr::DriveProfile::ramp_damped(rs.eta);
    const double spec = cfr::dissipation_spectral(rs.system, ens, ramp, 1.0);
    const cfr::TimedomainDissipation td = cfr::dissipation_timedomain(
        rs.system, ens, ramp, 1.0, ramp.support_hi());
    if (!td.converged) {
      Outcome out;
      out.detail = fmt("outer quadrature did not converge on system %d", i);
      return out;
    }
    worst = std::max(worst, rel_dev(td.value, spec));
  }
  Outcome out;
  out.pass = worst <= kTol;
  out.detail = fmt("max relative deviation %.3e over 10 systems (tol %.0e)",
                   worst, kTol);
  return out;
}

// 3. The oscillator-pair energy equals the two-quantum transition route:
//    1e-12 for analytic drives, 1e-10 for a sampled pulse.
Outcome two_quantum_bridge() {
  constexpr double kTolAnalytic = 1e-12;
  constexpr double kTolSampled = 1e-10;

  cfr::BartonSetup ramp_setup;  // unit pair, ramp drive eta = 0.1
  double analytic_dev = rel_dev(cfr::barton_energy(ramp_setup),
                                cfr::b1100_route_energy(ramp_setup));

  cfr::BartonSetup coulomb_setup;
  coulomb_setup.drive = cfr::coulomb_drive(
      1.2, [](double t) { return 2.0 + t * t; }, -1.0, 1.0);
  analytic_dev = std::max(
      analytic_dev, rel_dev(cfr::barton_energy(coulomb_setup),
                            cfr::b1100_route_energy(coulomb_setup)));

  std::vector<double> ts, qs;
  const int n = 2201;
  for (int i = 0; i < n; ++i) {
    const double t = -2.0 + 11.0 * double(i) / double(n - 1);
    ts.push_back(t);
    qs.push_back(std::exp(-(t - 3.0) * (t - 3.0)));
  }
  cfr::BartonSetup pulse_setup;
  pulse_setup.drive = cfr::DriveProfile::sampled(std::move(ts), std::move(qs));
  const double sampled_dev = rel_dev(cfr::barton_energy(pulse_setup),
                                     cfr::b1100_route_energy(pulse_setup));

  Outcome out;
  out.pass = analytic_dev <= kTolAnalytic && sampled_dev <= kTolSampled;
  out.detail = fmt("analytic dev %.3e (tol %.0e), sampled dev %.3e (tol %.0e)",
                   analytic_dev, kTolAnalytic, sampled_dev, kTolSampled);
  return out;
}

// 4. The detuning-integrated exchange-channel friction force at eta = 1e-3
//    matches the delta-weight -pi/(8 sinh^2(1/2)) within 1%, and the error
//    halves (within 30%) when eta halves.
Outcome delta_weight_force() {
  constexpr double kValueTol = 1e-2;
  constexpr double kRatioLo = 0.35, kRatioHi = 0.65;
  const cfr::OscillatorPair pair{1.0, 1.0, 1.0, 1.0, 1.0};
  const cfr::ThermalEnsemble ens{1.0, false};
  const double s = std::sinh(0.5);
  const double target = -cfr::pi / (8.0 * s * s);
  const double half_width = 0.5;

  auto windowed = [&](double eta) {
    cfr::CouplingDrive drive;  // unit gradient and velocity: |G| = 1
    drive.eta = eta;
    return cfr::detuning_integral(pair, ens, drive, half_width).value;
  };
  const double v1 = windowed(1e-3);
  const double v2 = windowed(5e-4);
  const double dev1 = std::abs(v1 / target - 1.0);
  const double dev2 = std::abs(v2 / target - 1.0);
  const double ratio = dev2 / dev1;

  Outcome out;
  out.pass = dev1 <= kValueTol && ratio >= kRatioLo && ratio <= kRatioHi;
  out.detail =
      fmt("value %.10f vs %.10f, rel err %.3e (tol %.0e), halving ratio %.3f",
          v1, target, dev1, kValueTol, ratio);
  return out;
}

// 5. The detuning-integrated perturbative energy equals -v.F/(4 eta) within
//    2% for eta in {4e-2, 2e-2, 1e-2}, and the ramp obeys its exact energy
//    identities int qdot^2 = 1/(4 eta), int qdot q = 0 to 1e-12.
Outcome energy_friction_relation() {
  constexpr double kRelationTol = 2e-2;
  constexpr double kIdentityTol = 1e-12;
  const cfr::OscillatorPair pair{1.0, 1.0, 1.0, 1.0, 1.0};
  const cfr::ThermalEnsemble ens{1.0, false};
  const double half_width = 0.5;

  double worst_relation = 0.0;
  double worst_identity = 0.0;
  for (const double eta : {4e-2, 2e-2, 1e-2}) {
    cfr::CouplingDrive drive;
    drive.eta = eta;
    const double de =
        cfr::detuning_integrated_perturbative_energy(pair, ens, drive,
                                                     half_width)
            .value;
    const cfr::ResonantClosedForm closed =
        cfr::resonant_closed_form(pair, ens, drive, half_width);
    worst_relation =
        std::max(worst_relation,
                 std::abs(de / closed.dissipation_from_friction - 1.0));

    // Tight re-quadrature of the drive-energy identities.
    const cfr::DriveProfile ramp = cfr::DriveProfile::ramp_damped(eta);
    const double span = 48.0 / eta;
    const int seed = 64;
    const auto qdot_sq = cfr::integrate_adaptive(
        [&](double t) { const double qd = ramp.qdot(t); return qd * qd; },
        0.0, span, 2.5e-14 * span, 1e-12, seed + 4000, seed);
    const auto qdot_q = cfr::integrate_adaptive(
        [&](double t) { return ramp.qdot(t) * ramp.q(t); }, 0.0, span,
        2.5e-14 * span / eta, 1e-12, seed + 4000, seed);
    worst_identity = std::max(
        worst_identity, std::abs(4.0 * eta * qdot_sq.value - 1.0));
    worst_identity =
        std::max(worst_identity, std::abs(4.0 * eta * qdot_q.value));
  }
  Outcome out;
  out.pass = worst_relation <= kRelationTol && worst_identity <= kIdentityTol;
  out.detail = fmt(
      "max relation deviation %.3e (tol %.0e), identity residual %.3e (tol "
      "%.0e)",
      worst_relation, kRelationTol, worst_identity, kIdentityTol);
  return out;
}

// 6. Exact propagation on a 12x12-level resonant pair: dE/lambda^2 is Cauchy
//    in lambda (last halving changes < 1%), its limit matches the
//    perturbative value within 1%, and norm drift stays below 1e-9.
Outcome exact_propagator_limit() {
  constexpr double kCauchyTol = 1e-2;
  constexpr double kLimitTol = 1e-2;
  constexpr double kDriftTol = 1e-9;
  const cfr::OscillatorPair pair{1.0, 1.0, 1.0, 1.0, 1.0};
  const cfr::ThermalEnsemble ens{3.0, false};
  const cfr::DriveProfile ramp = cfr::DriveProfile::ramp_damped(0.3);
  const cfr::ProductLevelSystem prod =
      cfr::product_coupling_operator(pair, cfr::FockTruncation{12, 1e-12}, 1.0);
  const double pert =
      cfr::dissipated_energy_perturbative(prod.system, ens, ramp, 1.0).delta_e;

  std::vector<double> scaled;
  double drift = 0.0;
  for (const double lambda : {4e-3, 2e-3, 1e-3}) {
    cfr::PropagationConfig pc;
    pc.lambda = lambda;
    pc.t_end = ramp.support_hi();
    const cfr::EvolutionResult ev =
        cfr::exact_dissipation(prod.system, ens, ramp, pc, 1.0);
    scaled.push_back(ev.dE_exact / (lambda * lambda));
    drift = std::max(drift, ev.norm_drift);
  }
  const double cauchy = std::abs(scaled[2] / scaled[1] - 1.0);
  const double limit_dev = std::abs(scaled[2] / pert - 1.0);

  Outcome out;
  out.pass = cauchy <= kCauchyTol && limit_dev <= kLimitTol &&
             drift <= kDriftTol;
  out.detail = fmt(
      "last halving %.3e (tol %.0e), vs perturbative %.3e (tol %.0e), drift "
      "%.2e (tol %.0e)",
      cauchy, kCauchyTol, limit_dev, kLimitTol, drift, kDriftTol);
  return out;
}

// 7. Zero-temperature slow-coupling law: dE (eta^2+4w^2)^2 constant to 1e-12,
//    4 eta dE falls linearly to zero; at beta = 1 the detuning-integrated
//    4 eta dE approaches the positive delta weight from below.
Outcome zero_temperature_null() {
  constexpr double kConstTol = 1e-12;
  constexpr double kApproachTol = 2e-3;
  constexpr double kWindowTol = 2e-2;

  cfr::BartonSetup setup;
  const std::vector<double> etas{0.2, 0.1, 0.05};
  const cfr::SlowCouplingTable table = cfr::slow_coupling_null(setup, etas);
  const double w_sq4 = 4.0 * setup.omega * setup.omega;
  double const_dev = 0.0;
  bool decreasing = true;
  const double c0 = table.de[0] * std::pow(etas[0] * etas[0] + w_sq4, 2);
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const double ci = table.de[i] * std::pow(etas[i] * etas[i] + w_sq4, 2);
    const_dev = std::max(const_dev, std::abs(ci / c0 - 1.0));
    if (i > 0 && !(table.four_eta_de[i] < table.four_eta_de[i - 1]))
      decreasing = false;
  }
  const double approach = std::abs(table.de.back() / table.limit_de - 1.0);

  // Finite temperature: the windowed 4 eta dE tends to the positive weight.
  const cfr::OscillatorPair pair{1.0, 1.0, 1.0, 1.0, 1.0};
  const cfr::ThermalEnsemble warm{1.0, false};
  const double window = 0.3;
  double prev_dev = 0.0;
  bool shrinking = true;
  double final_dev = 0.0;
  bool weight_positive = true;
  for (const double eta : {1e-2, 5e-3, 2.5e-3}) {
    cfr::CouplingDrive drive;
    drive.eta = eta;
    const double de = cfr::detuning_integrated_perturbative_energy(
                          pair, warm, drive, window)
                          .value;
    const double weight =
        cfr::resonant_closed_form(pair, warm, drive, window).delta_weight_de;
    weight_positive = weight_positive && weight > 0.0;
    // 4 eta scales obs and weight identically, so compare them directly.
    const double dev = std::abs(de / weight - 1.0);
    if (prev_dev > 0.0 && !(dev < prev_dev)) shrinking = false;
    prev_dev = dev;
    final_dev = dev;
  }

  Outcome out;
  out.pass = const_dev <= kConstTol && decreasing &&
             approach <= kApproachTol && weight_positive && shrinking &&
             final_dev <= kWindowTol;
  out.detail = fmt(
      "constancy %.3e (tol %.0e), limit approach %.3e (tol %.0e), windowed "
      "dev %.3e (tol %.0e)",
      const_dev, kConstTol, approach, kApproachTol, final_dev, kWindowTol);
  return out;
}

// 8. Passivity: the perturbative dissipated energy is never negative beyond
//    roundoff (>= -1e-15 of the term scale) over 1000 randomized inputs.
Outcome passivity() {
  constexpr double kFloor = 1e-15;
  std::mt19937_64 rng(cfr_test::corpus_seed() ^ 0x9E3779B97F4A7C15ull);
  double worst_margin = 0.0;  // most negative delta_e / term_scale
  for (int i = 0; i < 1000; ++i) {
    const cfr_test::RandomSystem rs = cfr_test::make_random_system(rng);
    const cfr::ThermalEnsemble ens{rs.beta, false};
    const cfr::DriveProfile ramp = cfr::DriveProfile::ramp_damped(rs.eta);
    const cfr::PerturbativeDissipation pd =
        cfr::dissipated_energy_perturbative(rs.system, ens, ramp, 1.0);
    if (pd.term_scale > 0.0)
      worst_margin = std::min(worst_margin, pd.delta_e / pd.term_scale);
  }
  Outcome out;
  out.pass = worst_margin >= -kFloor;
  out.detail = fmt("most negative scaled energy %.3e over 1000 inputs (floor "
                   "-%.0e)",
                   worst_margin, kFloor);
  return out;
}

// 9. The truncated product-space response kernel reconstructs the closed-form
//    two-line kernel times g^2 to 1e-8 of its peak over t in [0, 20].
Outcome kernel_reconstruction() {
  constexpr double kTol = 1e-8;
  const cfr::OscillatorPair pair{1.0, 1.0, 1.0, 1.0, 1.0};
  const cfr::ThermalEnsemble ens{1.0, false};
  const double g = 0.8;
  const double tail_tol = 1e-12;
  const int levels = cfr::recommended_levels(ens, 1.0, 1.0, tail_tol);
  const cfr::ProductLevelSystem prod = cfr::product_coupling_operator(
      pair, cfr::FockTruncation{levels, tail_tol}, g);
  const cfr::SpectralResponse resp =
      cfr::spectral_response(prod.system, ens, 1.0);

  double peak = 0.0, worst = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double t = 20.0 * double(i) / 400.0;
    const double closed = g * g * cfr::phi_kernel(t, pair, ens);
    const double truncated = cfr::phi_aa(t, resp, 1.0);
    peak = std::max(peak, std::abs(closed));
    worst = std::max(worst, std::abs(truncated - closed));
  }
  Outcome out;
  out.pass = worst <= kTol * peak;
  out.detail = fmt("max kernel deviation %.3e of peak %.3e at %d levels (tol "
                   "%.0e relative)",
                   worst / peak, peak, levels, kTol);
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"route-identity", route_identity},
      {"timedomain-vs-spectral", timedomain_identity},
      {"two-quantum-bridge", two_quantum_bridge},
      {"delta-weight-force", delta_weight_force},
      {"energy-friction-relation", energy_friction_relation},
      {"exact-propagator-limit", exact_propagator_limit},
      {"zero-temperature-null", zero_temperature_null},
      {"passivity", passivity},
      {"kernel-reconstruction", kernel_reconstruction},
  };

  bool all_pass = true;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    std::printf("[%s] %s — %s [%.2f s]\n", outcome.pass ? "PASS" : "FAIL",
                c.name, outcome.detail.c_str(), seconds);
    all_pass = all_pass && outcome.pass;
  }
  return all_pass ? 0 : 1;
}
