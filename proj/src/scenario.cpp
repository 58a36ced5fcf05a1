// scenario.cpp — scenario configuration parsing, sweep execution across the
// dissipation routes, CSV/equivalence writers, refinement-convergence tables,
// and the closed-form identity suite.

#include "cfr/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "cfr/barton.hpp"
#include "cfr/core_model.hpp"
#include "cfr/drive_profile.hpp"
#include "cfr/exact_propagator.hpp"
#include "cfr/perturbation.hpp"
#include "cfr/response_kernel.hpp"
#include "cfr/spectral.hpp"

namespace cfr {

// ---------- routes ----------

const char* route_name(RouteKind r) {
  switch (r) {
    case RouteKind::kubo: return "kubo";
    case RouteKind::perturbative: return "perturbative";
    case RouteKind::spectral: return "spectral";
    case RouteKind::timedomain: return "timedomain";
    case RouteKind::exact: return "exact";
    case RouteKind::barton: return "barton";
  }
  return "?";
}

bool ScenarioConfig::wants(RouteKind r) const {
  return std::find(routes.begin(), routes.end(), r) != routes.end();
}

double SweepAxis::value_at(int i) const {
  if (points <= 1 || i <= 0) return start;
  const double f = double(i) / double(points - 1);
  return geometric ? start * std::pow(stop / start, f)
                   : start + (stop - start) * f;
}

// ---------- parsing helpers ----------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double_value(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e && std::isfinite(out);
}

bool parse_int_value(const std::string& s, int& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

bool parse_bool_value(const std::string& s, bool& out) {
  if (s == "true" || s == "1") { out = true; return true; }
  if (s == "false" || s == "0") { out = false; return true; }
  return false;
}

// One sweep axis while its keys are being collected.
struct AxisDraft {
  int first_line = 0;
  std::string parameter; int parameter_line = 0;
  bool has_start = false; double start = 0; int start_line = 0;
  bool has_stop = false; double stop = 0; int stop_line = 0;
  bool has_points = false; int points = 0; int points_line = 0;
  bool has_spacing = false; bool geometric = false;
};

const std::set<std::string> kSweepable = {
    "ensemble.beta", "drive.eta", "system.detuning", "exact.lambda"};

bool route_from_name(const std::string& s, RouteKind& out) {
  for (int i = 0; i < route_count; ++i) {
    if (s == route_name(static_cast<RouteKind>(i))) {
      out = static_cast<RouteKind>(i);
      return true;
    }
  }
  return false;
}

}  // namespace

// ---------- parse_config ----------

ParsedConfig parse_config(const std::string& text) {
  ParsedConfig out;
  ScenarioConfig& c = out.config;
  auto add = [&](int line, const std::string& key, const std::string& msg) {
    out.violations.push_back({line, key, msg});
  };

  std::map<std::string, int> key_line;  // last line a key appeared on
  std::map<int, AxisDraft> axes;
  bool routes_seen = false;
  int routes_line = 0;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      add(line_no, "", "expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) { add(line_no, "", "missing key before '='"); continue; }
    if (value.empty()) { add(line_no, key, "empty value"); continue; }
    if (key_line.count(key)) {
      add(line_no, key, "duplicate key (first on line " +
                            std::to_string(key_line[key]) + ")");
      continue;
    }
    key_line[key] = line_no;

    auto want_double = [&](double& field, const char* domain_msg,
                           bool positive) {
      double v = 0.0;
      if (!parse_double_value(value, v)) {
        add(line_no, key, "not a finite number");
      } else if (positive && !(v > 0.0)) {
        add(line_no, key, domain_msg);
      } else {
        field = v;
      }
    };

    if (key == "system.mass1") want_double(c.mass1, "must be positive", true);
    else if (key == "system.mass2") want_double(c.mass2, "must be positive", true);
    else if (key == "system.omega1") want_double(c.omega1, "must be positive", true);
    else if (key == "system.omega2") want_double(c.omega2, "must be positive", true);
    else if (key == "system.hbar") want_double(c.hbar, "must be positive", true);
    else if (key == "system.coupling") want_double(c.coupling, "", false);
    else if (key == "ensemble.beta") want_double(c.beta, "must be positive", true);
    else if (key == "ensemble.zero_temperature") {
      if (!parse_bool_value(value, c.zero_temperature))
        add(line_no, key, "expected true or false");
    } else if (key == "drive.kind") {
      if (value == "ramp") c.sampled_drive = false;
      else if (value == "sampled") c.sampled_drive = true;
      else add(line_no, key, "expected ramp or sampled");
    } else if (key == "drive.eta") {
      want_double(c.eta, "must be positive", true);
    } else if (key == "drive.samples") {
      c.sample_path = value;
    } else if (key == "truncation.levels") {
      int v = 0;
      if (!parse_int_value(value, v)) add(line_no, key, "not an integer");
      else if (v != 0 && (v < 2 || v > 64))
        add(line_no, key, "must be 0 (auto) or between 2 and 64");
      else c.levels = v;
    } else if (key == "truncation.tail_tolerance") {
      double v = 0.0;
      if (!parse_double_value(value, v)) add(line_no, key, "not a finite number");
      else if (!(v > 0.0) || v >= 1.0) add(line_no, key, "must lie in (0, 1)");
      else c.tail_tolerance = v;
    } else if (key == "exact.lambda") {
      want_double(c.lambda, "must be positive", true);
    } else if (key == "exact.tolerance") {
      double v = 0.0;
      if (!parse_double_value(value, v)) add(line_no, key, "not a finite number");
      else if (!(v > 1e-14) || !(v < 1e-4))
        add(line_no, key, "must lie in (1e-14, 1e-4)");
      else c.exact_tolerance = v;
    } else if (key == "output.path") {
      c.output_path = value;
    } else if (key == "routes") {
      routes_seen = true;
      routes_line = line_no;
      std::istringstream rs(value);
      std::string item;
      while (std::getline(rs, item, ',')) {
        const std::string name = trim(item);
        RouteKind r;
        if (name.empty() || !route_from_name(name, r)) {
          add(line_no, key, "unknown route '" + name + "'");
        } else if (c.wants(r)) {
          add(line_no, key, "duplicate route '" + name + "'");
        } else {
          c.routes.push_back(r);
        }
      }
    } else if (key.rfind("sweep", 0) == 0) {
      const auto dot = key.find('.');
      int axis_no = 0;
      const std::string idx =
          dot == std::string::npos ? key.substr(5) : key.substr(5, dot - 5);
      if (dot == std::string::npos || !parse_int_value(idx, axis_no) ||
          axis_no < 1) {
        add(line_no, key, "unknown key");
        continue;
      }
      AxisDraft& d = axes[axis_no];
      if (d.first_line == 0) d.first_line = line_no;
      const std::string field = key.substr(dot + 1);
      if (field == "parameter") {
        if (!kSweepable.count(value))
          add(line_no, key,
              "not a sweepable parameter (ensemble.beta, drive.eta, "
              "system.detuning, exact.lambda)");
        else { d.parameter = value; d.parameter_line = line_no; }
      } else if (field == "start") {
        d.start_line = line_no;
        if (!parse_double_value(value, d.start)) add(line_no, key, "not a finite number");
        else d.has_start = true;
      } else if (field == "stop") {
        d.stop_line = line_no;
        if (!parse_double_value(value, d.stop)) add(line_no, key, "not a finite number");
        else d.has_stop = true;
      } else if (field == "points") {
        d.points_line = line_no;
        if (!parse_int_value(value, d.points)) add(line_no, key, "not an integer");
        else if (d.points < 1) add(line_no, key, "must be >= 1");
        else d.has_points = true;
      } else if (field == "spacing") {
        if (value == "linear") { d.geometric = false; d.has_spacing = true; }
        else if (value == "geometric") { d.geometric = true; d.has_spacing = true; }
        else add(line_no, key, "expected linear or geometric");
      } else {
        add(line_no, key, "unknown key");
      }
    } else {
      add(line_no, key, "unknown key");
    }
  }

  // ----- document-level checks -----

  if (!routes_seen)
    add(0, "routes", "required key missing");
  else if (c.routes.empty() && out.violations.empty())
    add(routes_line, "routes", "no valid routes listed");

  if (axes.size() > 2) {
    int first = 0;
    for (const auto& [n, d] : axes)
      if (n > 2) { first = d.first_line; break; }
    add(first, "sweep", "at most 2 sweep axes");
  }
  for (const auto& [n, d] : axes) {
    if (n > 2) continue;
    if (n == 2 && !axes.count(1))
      add(d.first_line, "sweep2", "sweep2 declared without sweep1");
    const std::string prefix = "sweep" + std::to_string(n) + ".";
    if (d.parameter.empty() && d.parameter_line == 0)
      add(d.first_line, prefix + "parameter", "missing");
    if (!d.has_start && d.start_line == 0)
      add(d.first_line, prefix + "start", "missing");
    if (!d.has_stop && d.stop_line == 0)
      add(d.first_line, prefix + "stop", "missing");
    if (!d.has_points && d.points_line == 0)
      add(d.first_line, prefix + "points", "missing");
  }

  // Assemble axes 1..2 that are structurally complete.
  for (int n = 1; n <= 2; ++n) {
    auto it = axes.find(n);
    if (it == axes.end()) continue;
    const AxisDraft& d = it->second;
    if (d.parameter.empty() || !d.has_start || !d.has_stop || !d.has_points)
      continue;
    c.axes.push_back({d.parameter, d.start, d.stop, d.points, d.geometric});

    const std::string prefix = "sweep" + std::to_string(n) + ".";
    const double lo = std::min(d.start, d.stop);
    if (d.geometric && !(lo > 0.0))
      add(d.first_line, prefix + "spacing",
          "geometric spacing needs positive bounds");
    if (d.parameter == "ensemble.beta" || d.parameter == "drive.eta" ||
        d.parameter == "exact.lambda") {
      if (!(lo > 0.0))
        add(d.start_line, prefix + "start", d.parameter + " must stay positive");
    }
    if (d.parameter == "system.detuning") {
      const double hi = std::max(d.start, d.stop);
      if (!(hi < c.omega1))
        add(d.stop_line, prefix + "stop",
            "detuning must stay below system.omega1 (omega2 > 0)");
    }
    if (d.parameter == "drive.eta" && c.sampled_drive)
      add(d.parameter_line, prefix + "parameter",
          "drive.eta sweeps need drive.kind = ramp");
    if (d.parameter == "ensemble.beta" && c.zero_temperature)
      add(d.parameter_line, prefix + "parameter",
          "ensemble.beta sweeps need ensemble.zero_temperature = false");
  }
  if (c.axes.size() == 2 && c.axes[0].parameter == c.axes[1].parameter)
    add(axes[2].first_line, "sweep2.parameter", "duplicate sweep parameter");

  // ----- cross-field checks -----

  if (c.sampled_drive && c.sample_path.empty())
    add(key_line.count("drive.kind") ? key_line["drive.kind"] : 0,
        "drive.samples", "required when drive.kind = sampled");

  if (c.wants(RouteKind::barton)) {
    const int line = routes_line;
    if (!c.zero_temperature)
      add(line, "routes", "barton requires ensemble.zero_temperature = true");
    if (c.omega1 != c.omega2)
      add(line, "routes", "barton requires system.omega1 = system.omega2");
    if (c.mass1 != c.mass2)
      add(line, "routes", "barton requires system.mass1 = system.mass2");
    for (const SweepAxis& a : c.axes)
      if (a.parameter == "system.detuning")
        add(line, "routes", "barton cannot run under a system.detuning sweep");
  }

  return out;
}

// ---------- sweep execution ----------

namespace {

constexpr int kAutoLevelCap = 40;

std::string error_code(const std::exception& e) {
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "error:invalid";
  if (dynamic_cast<const std::domain_error*>(&e)) return "error:invalid";
  if (dynamic_cast<const std::runtime_error*>(&e)) return "error:numeric";
  return "error:unknown";
}

DriveProfile load_sampled_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("drive.samples: cannot open '" + path + "'");
  std::vector<double> t, q;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    std::istringstream ls(line);
    double ti = 0.0, qi = 0.0;
    if (!(ls >> ti >> qi))
      throw std::runtime_error("drive.samples: line " +
                               std::to_string(line_no) +
                               " is not 't q' in '" + path + "'");
    t.push_back(ti);
    q.push_back(qi);
  }
  return DriveProfile::sampled(std::move(t), std::move(q));
}

// Scenario fields with one sweep point's values substituted in.
ScenarioConfig at_point(const ScenarioConfig& base,
                        const std::vector<double>& coords) {
  ScenarioConfig pt = base;
  for (std::size_t i = 0; i < base.axes.size(); ++i) {
    const std::string& p = base.axes[i].parameter;
    if (p == "ensemble.beta") pt.beta = coords[i];
    else if (p == "drive.eta") pt.eta = coords[i];
    else if (p == "system.detuning") pt.omega2 = pt.omega1 - coords[i];
    else if (p == "exact.lambda") pt.lambda = coords[i];
  }
  return pt;
}

ReportRow evaluate_point(const ScenarioConfig& base,
                         const DriveProfile* sampled,
                         const std::vector<double>& coords) {
  ReportRow row;
  row.coords = coords;
  const ScenarioConfig pt = at_point(base, coords);
  for (const RouteKind r : base.routes)
    row.route[static_cast<int>(r)].requested = true;

  const OscillatorPair pair{pt.mass1, pt.mass2, pt.omega1, pt.omega2, pt.hbar};
  const ThermalEnsemble ens{pt.beta, pt.zero_temperature};
  const DriveProfile profile =
      pt.sampled_drive ? *sampled : DriveProfile::ramp_damped(pt.eta);
  const double g = pt.coupling;

  const int rec = std::max(
      recommended_levels(ens, pair.omega1, pair.hbar, pt.tail_tolerance),
      recommended_levels(ens, pair.omega2, pair.hbar, pt.tail_tolerance));
  row.levels = pt.levels > 0 ? pt.levels : std::min(rec, kAutoLevelCap);
  row.tail_ok = row.levels >= rec;

  auto cell = [&](RouteKind r) -> RouteCell& {
    return row.route[static_cast<int>(r)];
  };
  auto run_route = [&](RouteKind r, auto&& fn) {
    RouteCell& c = cell(r);
    if (!c.requested) return;
    try {
      c.value = fn();
      c.ok = true;
    } catch (const std::exception& e) {
      c.error = error_code(e);
    }
  };

  // Product level system shared by the truncated routes.
  bool need_product = cell(RouteKind::perturbative).requested ||
                      cell(RouteKind::spectral).requested ||
                      cell(RouteKind::timedomain).requested ||
                      cell(RouteKind::exact).requested;
  ProductLevelSystem prod;
  std::string product_error;
  if (need_product) {
    try {
      prod = product_coupling_operator(
          pair, FockTruncation{row.levels, pt.tail_tolerance}, g);
    } catch (const std::exception& e) {
      product_error = error_code(e);
    }
  }
  auto run_product_route = [&](RouteKind r, auto&& fn) {
    RouteCell& c = cell(r);
    if (!c.requested) return;
    if (!product_error.empty()) { c.error = product_error; return; }
    try {
      c.value = fn();
      c.ok = true;
    } catch (const std::exception& e) {
      c.error = error_code(e);
    }
  };

  run_route(RouteKind::kubo,
            [&] { return dissipation_kubo(pair, ens, g, profile); });
  if (cell(RouteKind::kubo).requested && !pt.sampled_drive) {
    try {
      CouplingDrive cd;
      cd.grad_psi = Eigen::Vector3d(g, 0.0, 0.0);
      cd.v = Eigen::Vector3d(1.0, 0.0, 0.0);
      cd.eta = pt.eta;
      const FrictionResult fr = friction_force(pair, ens, cd);
      row.kubo_force = fr.f_friction.dot(cd.v);
      row.kubo_force_set = true;
    } catch (const std::exception&) {
      row.kubo_force_set = false;
    }
  }

  run_product_route(RouteKind::perturbative, [&] {
    return dissipated_energy_perturbative(prod.system, ens, profile, pt.hbar)
        .delta_e;
  });
  run_product_route(RouteKind::spectral, [&] {
    return dissipation_spectral(prod.system, ens, profile, pt.hbar);
  });
  run_product_route(RouteKind::timedomain, [&] {
    const TimedomainDissipation td = dissipation_timedomain(
        prod.system, ens, profile, pt.hbar, profile.support_hi());
    row.timedomain_residual = td.quadrature_error;
    row.timedomain_residual_set = true;
    if (!td.converged) throw std::runtime_error("outer quadrature residual");
    return td.value;
  });
  run_product_route(RouteKind::exact, [&] {
    PropagationConfig pc;
    pc.lambda = pt.lambda;
    pc.t_start = profile.support_lo();
    pc.t_end = profile.support_hi();
    pc.step_control.local_tolerance = pt.exact_tolerance;
    const EvolutionResult ev =
        exact_dissipation(prod.system, ens, profile, pc, pt.hbar);
    row.exact_norm_drift = ev.norm_drift;
    row.exact_norm_drift_set = true;
    return ev.dE_exact / (pt.lambda * pt.lambda);
  });
  run_route(RouteKind::barton, [&] {
    BartonSetup setup;
    setup.omega = pt.omega1;
    setup.mass = pt.mass1;
    setup.hbar = pt.hbar;
    setup.drive = profile;
    return g * g * barton_energy(setup);
  });

  return row;
}

double pair_tolerance(RouteKind a, RouteKind b, bool sampled_drive) {
  auto has = [&](RouteKind r) { return a == r || b == r; };
  if (has(RouteKind::exact)) return 1e-2;
  if (has(RouteKind::timedomain)) return 1e-6;
  if (has(RouteKind::barton)) return sampled_drive ? 1e-10 : 1e-12;
  if (has(RouteKind::kubo)) return 1e-9;  // level truncation of the others
  return 1e-12;                           // perturbative vs spectral
}

void format_double(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  out += buf;
}

}  // namespace

// ---------- CSV / report formatting ----------

std::string format_csv(const ScenarioConfig& config,
                       const std::vector<ReportRow>& rows) {
  std::string out;
  for (const SweepAxis& a : config.axes) {
    out += a.parameter;
    out += ',';
  }
  out +=
      "kubo,perturbative,spectral,timedomain,exact,barton,"
      "kubo_force,exact_norm_drift,timedomain_residual,levels,tail_ok\n";

  for (const ReportRow& row : rows) {
    for (double cvalue : row.coords) {
      format_double(out, cvalue);
      out += ',';
    }
    for (int r = 0; r < route_count; ++r) {
      const RouteCell& c = row.route[r];
      if (c.requested) {
        if (c.ok) format_double(out, c.value);
        else out += c.error;
      }
      out += ',';
    }
    if (row.kubo_force_set) format_double(out, row.kubo_force);
    out += ',';
    if (row.exact_norm_drift_set) format_double(out, row.exact_norm_drift);
    out += ',';
    if (row.timedomain_residual_set)
      format_double(out, row.timedomain_residual);
    out += ',';
    out += std::to_string(row.levels);
    out += ',';
    out += row.tail_ok ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string format_equivalence(const std::vector<PairLine>& pairs) {
  std::string out;
  for (const PairLine& p : pairs) {
    out += route_name(p.a);
    out += ':';
    out += route_name(p.b);
    out += ' ';
    format_double(out, p.max_rel_dev);
    out += ' ';
    format_double(out, p.tolerance);
    out += p.pass ? " PASS\n" : " FAIL\n";
  }
  return out;
}

// ---------- run_scenario ----------

RunResult run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  if (config.routes.empty())
    throw std::invalid_argument("run_scenario: config lists no routes");
  if (config.axes.size() > 2)
    throw std::invalid_argument("run_scenario: at most 2 sweep axes");

  DriveProfile sampled;
  if (config.sampled_drive) sampled = load_sampled_profile(config.sample_path);

  // Row-major expansion of the sweep grid.
  std::vector<std::vector<double>> grid;
  if (config.axes.empty()) {
    grid.push_back({});
  } else if (config.axes.size() == 1) {
    for (int i = 0; i < config.axes[0].points; ++i)
      grid.push_back({config.axes[0].value_at(i)});
  } else {
    for (int i = 0; i < config.axes[0].points; ++i)
      for (int j = 0; j < config.axes[1].points; ++j)
        grid.push_back({config.axes[0].value_at(i), config.axes[1].value_at(j)});
  }

  RunResult result;
  result.rows.resize(grid.size());

  int threads = options.threads == 0
                    ? static_cast<int>(std::thread::hardware_concurrency())
                    : options.threads;
  threads = std::clamp<int>(threads, 1, static_cast<int>(grid.size()));

  const DriveProfile* sampled_ptr = config.sampled_drive ? &sampled : nullptr;
  if (threads <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i)
      result.rows[i] = evaluate_point(config, sampled_ptr, grid[i]);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < grid.size(); i = next++)
        result.rows[i] = evaluate_point(config, sampled_ptr, grid[i]);
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Pairwise equivalence over rows where both routes produced values.
  for (std::size_t ia = 0; ia < config.routes.size(); ++ia) {
    for (std::size_t ib = ia + 1; ib < config.routes.size(); ++ib) {
      RouteKind a = config.routes[ia];
      RouteKind b = config.routes[ib];
      if (static_cast<int>(a) > static_cast<int>(b)) std::swap(a, b);
      PairLine line;
      line.a = a;
      line.b = b;
      line.tolerance = pair_tolerance(a, b, config.sampled_drive);
      for (const ReportRow& row : result.rows) {
        const RouteCell& ca = row.route[static_cast<int>(a)];
        const RouteCell& cb = row.route[static_cast<int>(b)];
        if (!ca.ok || !cb.ok) continue;
        const double scale = std::max(std::abs(ca.value), std::abs(cb.value));
        const double dev =
            scale > 0.0 ? std::abs(ca.value - cb.value) / scale : 0.0;
        line.max_rel_dev = std::max(line.max_rel_dev, dev);
        ++line.rows_compared;
      }
      if (line.rows_compared == 0) {
        line.max_rel_dev = std::nan("");
        line.pass = false;
      } else {
        line.pass = line.max_rel_dev <= line.tolerance;
      }
      result.pairs.push_back(line);
      result.pass = result.pass && line.pass;
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const PairLine& x, const PairLine& y) {
              if (x.a != y.a) return static_cast<int>(x.a) < static_cast<int>(y.a);
              return static_cast<int>(x.b) < static_cast<int>(y.b);
            });

  // Reports are written even when a pair fails.
  const std::string out_dir = options.output_override.empty()
                                  ? config.output_path
                                  : options.output_override;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec)
    throw std::runtime_error("output.path: cannot create '" + out_dir +
                             "': " + ec.message());
  result.csv_path = out_dir + "/results.csv";
  result.report_path = out_dir + "/equivalence.txt";
  {
    std::ofstream csv(result.csv_path, std::ios::binary);
    if (!csv)
      throw std::runtime_error("output.path: cannot write '" +
                               result.csv_path + "'");
    csv << format_csv(config, result.rows);
  }
  {
    std::ofstream rep(result.report_path, std::ios::binary);
    if (!rep)
      throw std::runtime_error("output.path: cannot write '" +
                               result.report_path + "'");
    rep << format_equivalence(result.pairs);
  }
  return result;
}

// ---------- refinement convergence ----------

namespace {

// Successive-ratio bookkeeping shared by all refinement modes.
void push_ratio(std::vector<ConvergenceRow>& rows, ConvergenceRow row,
                double observable_scale) {
  if (!rows.empty()) {
    const double prev = std::abs(rows.back().deviation);
    const double cur = std::abs(row.deviation);
    const double floor = 1e-14 * std::abs(observable_scale);
    if (prev > floor) row.ratio = cur / prev;
    // Only clear growth counts as divergence; jitter at the roundoff floor
    // can push a single ratio slightly above 1.
    row.diverging = prev > floor && row.ratio > 1.5;
  }
  rows.push_back(row);
}

}  // namespace

std::string ConvergenceReport::to_text() const {
  std::string out = "step " + setting_name + " observable deviation ratio status\n";
  char buf[160];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ConvergenceRow& r = rows[i];
    std::snprintf(buf, sizeof buf, "%zu %.9e %.9e %.9e %.3f %s\n", i,
                  r.setting, r.observable, r.deviation, r.ratio,
                  r.diverging ? "DIVERGING" : "ok");
    out += buf;
  }
  out += pass ? "PASS\n" : "FAIL\n";
  return out;
}

ConvergenceReport convergence_report(const ScenarioConfig& config,
                                     RefinementMode mode, int steps) {
  if (steps < 2)
    throw std::invalid_argument("convergence_report: need steps >= 2");

  ConvergenceReport report;
  report.mode = mode;

  const OscillatorPair pair{config.mass1, config.mass2, config.omega1,
                            config.omega2, config.hbar};
  const ThermalEnsemble ens{config.beta, config.zero_temperature};
  const double g = config.coupling;

  if (mode == RefinementMode::halve_eta) {
    report.setting_name = "drive.eta";
    if (config.sampled_drive)
      throw std::invalid_argument(
          "convergence_report: halve_eta needs drive.kind = ramp");
    if (config.zero_temperature)
      throw std::invalid_argument(
          "convergence_report: halve_eta needs a finite temperature");
    if (config.omega1 != config.omega2)
      throw std::invalid_argument(
          "convergence_report: halve_eta needs equal frequencies");
    // Window chosen so the O(eta) tail term of the detuning window dominates
    // the deviation; much wider windows let it cancel against the curvature
    // term and the quadratic remainder masks the first-order rate.
    const double half_width = 0.3 * config.omega1;
    for (int k = 0; k < steps; ++k) {
      const double eta = config.eta / std::pow(2.0, k);
      CouplingDrive cd;
      cd.grad_psi = Eigen::Vector3d(g, 0.0, 0.0);
      cd.v = Eigen::Vector3d(1.0, 0.0, 0.0);
      cd.eta = eta;
      const double obs =
          detuning_integrated_perturbative_energy(pair, ens, cd, half_width,
                                                  48, config.tail_tolerance)
              .value;
      const double weight =
          resonant_closed_form(pair, ens, cd, half_width).delta_weight_de;
      ConvergenceRow row;
      row.setting = eta;
      row.observable = obs;
      row.deviation = obs / weight - 1.0;  // O(eta): should halve per step
      push_ratio(report.rows, row, 1.0);
    }
  } else if (mode == RefinementMode::add_levels) {
    report.setting_name = "truncation.levels";
    const DriveProfile profile = config.sampled_drive
                                     ? load_sampled_profile(config.sample_path)
                                     : DriveProfile::ramp_damped(config.eta);
    const int base = config.levels > 0
                         ? config.levels
                         : std::min(kAutoLevelCap,
                                    std::max(recommended_levels(
                                                 ens, pair.omega1, pair.hbar,
                                                 config.tail_tolerance),
                                             recommended_levels(
                                                 ens, pair.omega2, pair.hbar,
                                                 config.tail_tolerance)));
    double prev = 0.0;
    for (int k = 0; k < steps; ++k) {
      const ProductLevelSystem prod = product_coupling_operator(
          pair, FockTruncation{base + k, config.tail_tolerance}, g);
      const double obs =
          dissipated_energy_perturbative(prod.system, ens, profile, config.hbar)
              .delta_e;
      ConvergenceRow row;
      row.setting = base + k;
      row.observable = obs;
      row.deviation = k == 0 ? 0.0 : obs - prev;
      if (k >= 1) push_ratio(report.rows, row, obs);
      else report.rows.push_back(row);
      prev = obs;
    }
  } else {
    report.setting_name = "exact.tolerance";
    if (!(config.exact_tolerance / std::pow(2.0, steps - 1) > 1e-14))
      throw std::invalid_argument(
          "convergence_report: halved tolerance leaves the stepper domain");
    const DriveProfile profile = config.sampled_drive
                                     ? load_sampled_profile(config.sample_path)
                                     : DriveProfile::ramp_damped(config.eta);
    const int levels = config.levels > 0 ? config.levels : 4;
    const ProductLevelSystem prod = product_coupling_operator(
        pair, FockTruncation{levels, config.tail_tolerance}, g);
    double prev = 0.0;
    for (int k = 0; k < steps; ++k) {
      PropagationConfig pc;
      pc.lambda = config.lambda;
      pc.t_start = profile.support_lo();
      pc.t_end = profile.support_hi();
      pc.step_control.local_tolerance =
          config.exact_tolerance / std::pow(2.0, k);
      const double obs =
          exact_dissipation(prod.system, ens, profile, pc, config.hbar)
              .dE_exact /
          (config.lambda * config.lambda);
      ConvergenceRow row;
      row.setting = pc.step_control.local_tolerance;
      row.observable = obs;
      row.deviation = k == 0 ? 0.0 : (obs - prev) / std::max(std::abs(obs), 1e-300);
      if (k >= 1) push_ratio(report.rows, row, 1.0);
      else report.rows.push_back(row);
      prev = obs;
    }
  }

  for (const ConvergenceRow& r : report.rows)
    report.pass = report.pass && !r.diverging;
  return report;
}

// ---------- identity suite ----------

namespace {

IdentityCheck make_check(const std::string& name, double lhs, double rhs,
                         double tolerance) {
  IdentityCheck c;
  c.name = name;
  c.lhs = lhs;
  c.rhs = rhs;
  c.tolerance = tolerance;
  c.deviation = rhs != 0.0 ? std::abs(lhs - rhs) / std::abs(rhs)
                           : std::abs(lhs);
  c.pass = c.deviation <= tolerance;
  return c;
}

}  // namespace

std::vector<IdentityCheck> identity_suite() {
  std::vector<IdentityCheck> checks;

  {  // damped first moment of a sine against its closed form
    const double eta = 0.3, a = 1.7;
    const double span = 48.0 / eta;
    const int seed = static_cast<int>(std::ceil(span * a / pi)) + 8;
    const auto r = integrate_adaptive(
        [&](double t) { return t * std::exp(-eta * t) * std::sin(a * t); },
        0.0, span, 2.5e-14 * span / eta, 1e-12, seed + 4000, seed);
    checks.push_back(make_check("ramp_first_moment", r.value,
                                detail::first_moment_of_sine(a, eta), 1e-11));
  }
  {  // kernel first moment equals the two-channel closed form
    const OscillatorPair pair{1.0, 1.0, 1.0, 0.8, 1.0};
    const ThermalEnsemble ens{1.3, false};
    const double eta = 0.25;
    const auto ch = detail::kernel_channels(pair, ens);
    const double span = 48.0 / eta;
    const int seed =
        static_cast<int>(std::ceil(span * (ch.o_sum + 1.0) / pi)) + 8;
    const auto r = integrate_adaptive(
        [&](double t) {
          return phi_kernel(t, pair, ens) * t * std::exp(-eta * t);
        },
        0.0, span, 2.5e-14 * (std::abs(ch.k1) + std::abs(ch.k2)) * span / eta,
        1e-12, seed + 4000, seed);
    const double closed = ch.k1 * detail::first_moment_of_sine(ch.o_sum, eta) +
                          ch.k2 * detail::first_moment_of_sine(ch.o_diff, eta);
    checks.push_back(make_check("kernel_first_moment", r.value, closed, 1e-10));
  }
  {  // ramp velocity integrals: int qdot^2 = 1/(4 eta), int qdot q = 0
    const double eta = 0.17;
    const DriveProfile ramp = DriveProfile::ramp_damped(eta);
    const double span = 48.0 / eta;
    const int seed = 64;
    const auto r2 = integrate_adaptive(
        [&](double t) { const double qd = ramp.qdot(t); return qd * qd; }, 0.0,
        span, 2.5e-14 * span, 1e-12, seed + 4000, seed);
    checks.push_back(
        make_check("ramp_velocity_square", r2.value, 1.0 / (4.0 * eta), 1e-11));
    const auto r1 = integrate_adaptive(
        [&](double t) { return ramp.qdot(t) * ramp.q(t); }, 0.0, span,
        2.5e-14 * span / eta, 1e-12, seed + 4000, seed);
    checks.push_back(make_check("ramp_velocity_position", r1.value, 0.0, 1e-11));
  }
  {  // two-quantum matrix element of y^2
    const double mass = 0.7, omega = 1.9, hbar = 1.3;
    const Eigen::MatrixXd y =
        position_matrix(mass, omega, hbar, FockTruncation{6, 1e-12});
    const double b = hbar / (2.0 * mass * omega);
    checks.push_back(make_check("two_quantum_element", (y * y)(2, 0),
                                std::sqrt(2.0) * b, 1e-13));
  }
  {  // transition integral against the drive transform
    BartonSetup setup;
    setup.drive = DriveProfile::ramp_damped(0.2);
    const Complex i_inf = barton_transition_integral(setup);
    const double lhs = 4.0 * setup.hbar * setup.hbar * std::norm(i_inf);
    const double rhs = std::norm(setup.drive.qhat(2.0 * setup.omega));
    checks.push_back(make_check("transform_pair", lhs, rhs, 1e-12));
  }
  return checks;
}

}  // namespace cfr
