// scenario.hpp — batch front-end types: plain-text scenario configuration,
// sweep execution across all dissipation routes with CSV + equivalence
// reports, refinement-convergence tables, and the closed-form identity suite.
#pragma once

#include <array>
#include <string>
#include <vector>

namespace cfr {

// ---------- routes ----------

enum class RouteKind : int {
  kubo = 0,
  perturbative,
  spectral,
  timedomain,
  exact,
  barton,
};

inline constexpr int route_count = 6;

const char* route_name(RouteKind r);

// ---------- configuration ----------

struct SweepAxis {
  std::string parameter;  // ensemble.beta | drive.eta | system.detuning | exact.lambda
  double start = 0.0;
  double stop = 0.0;
  int points = 1;
  bool geometric = false;  // default linear spacing

  double value_at(int i) const;
};

struct ScenarioConfig {
  // system
  double mass1 = 1.0;
  double mass2 = 1.0;
  double omega1 = 1.0;
  double omega2 = 1.0;
  double hbar = 1.0;
  double coupling = 1.0;  // scalar drive strength g multiplying q(t) x1 x2

  // ensemble
  double beta = 1.0;
  bool zero_temperature = false;

  // drive
  bool sampled_drive = false;  // false: damped ramp t e^{-eta t}
  double eta = 0.1;
  std::string sample_path;  // two-column "t q" text file when sampled

  // truncation (0 = choose per-oscillator levels from the tail criterion)
  int levels = 0;
  double tail_tolerance = 1e-12;

  // exact-propagation route
  double lambda = 1e-3;
  double exact_tolerance = 1e-10;

  // sweep and outputs
  std::vector<SweepAxis> axes;          // at most 2
  std::vector<RouteKind> routes;        // required, duplicate-free
  std::string output_path = ".";

  bool wants(RouteKind r) const;
};

struct ConfigViolation {
  int line = 0;  // 0 for whole-document problems
  std::string key;
  std::string message;
};

struct ParsedConfig {
  ScenarioConfig config;
  std::vector<ConfigViolation> violations;

  bool ok() const { return violations.empty(); }
};

/// Parses a flat "section.key = value" document ('#' comments, blank lines
/// ignored). Collects every violation — unknown keys, malformed or
/// out-of-domain values, missing required keys — rather than stopping at the
/// first.
ParsedConfig parse_config(const std::string& text);

// ---------- sweep execution ----------

struct RouteCell {
  bool requested = false;
  bool ok = false;
  double value = 0.0;      // dissipated energy (exact route: dE / lambda^2)
  std::string error;       // stable error code when !ok
};

struct ReportRow {
  std::vector<double> coords;                 // one per sweep axis
  std::array<RouteCell, route_count> route;
  // diagnostics
  double kubo_force = 0.0;        // v . F_friction (ramp drives)
  bool kubo_force_set = false;
  double exact_norm_drift = 0.0;
  bool exact_norm_drift_set = false;
  double timedomain_residual = 0.0;
  bool timedomain_residual_set = false;
  int levels = 0;
  bool tail_ok = true;
};

struct PairLine {
  RouteKind a;
  RouteKind b;
  double max_rel_dev = 0.0;
  double tolerance = 0.0;
  int rows_compared = 0;
  bool pass = false;
};

struct RunOptions {
  std::string output_override;  // replaces config.output_path when nonempty
  int threads = 1;              // 0 = hardware concurrency
};

struct RunResult {
  std::vector<ReportRow> rows;       // row-major sweep order
  std::vector<PairLine> pairs;
  std::string csv_path;
  std::string report_path;
  bool pass = true;                  // every pair line within tolerance
};

/// Executes the sweep, writes `results.csv` and `equivalence.txt` under the
/// output path, and returns the assembled rows and pair verdicts. Per-point
/// module failures become stable error codes in the CSV; the run continues.
/// Throws only on execution errors (unreadable sample file, unwritable
/// output directory).
RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

/// Byte-stable CSV text for the rows (fixed column set, 17-significant-digit
/// scientific floats, '.' decimal point, no locale dependence).
std::string format_csv(const ScenarioConfig& config, const std::vector<ReportRow>& rows);

/// One "pair max_rel_dev tolerance PASS|FAIL" line per requested route pair.
std::string format_equivalence(const std::vector<PairLine>& pairs);

// ---------- refinement convergence ----------

enum class RefinementMode { halve_eta, add_levels, halve_tolerance };

struct ConvergenceRow {
  double setting = 0.0;      // eta, level count, or tolerance at this step
  double observable = 0.0;
  double deviation = 0.0;    // vs limit (halve_eta) or previous step (others)
  double ratio = 0.0;        // successive |deviation| ratio, 0 when undefined
  bool diverging = false;
};

struct ConvergenceReport {
  RefinementMode mode;
  std::string setting_name;
  std::vector<ConvergenceRow> rows;
  bool pass = true;  // no diverging row

  std::string to_text() const;
};

/// Re-evaluates one observable under successive refinement: halve_eta tracks
/// the detuning-integrated resonant energy against its closed-form weight
/// (errors should halve per step), add_levels grows the truncation, and
/// halve_tolerance tightens the exact propagator.
ConvergenceReport convergence_report(const ScenarioConfig& config,
                                     RefinementMode mode, int steps);

// ---------- closed-form identity suite ----------

struct IdentityCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double deviation = 0.0;  // relative where rhs != 0, absolute otherwise
  double tolerance = 0.0;
  bool pass = false;
};

/// Cross-checks every closed form the modules rely on against direct
/// quadrature or matrix arithmetic; all checks must pass on any platform.
std::vector<IdentityCheck> identity_suite();

}  // namespace cfr
