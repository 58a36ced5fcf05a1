// casimir_friction_main.cpp — command-line front end: scenario sweeps with
// route-equivalence reports, refinement-convergence tables, and the
// closed-form identity suite.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "cfr/scenario.hpp"

namespace {

bool read_file(const std::string& path, std::string& out) {
  std::ifstream in(path);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

// Exit codes: 0 all PASS, 2 any FAIL, 1 execution error.
int load_config(const std::string& path, cfr::ScenarioConfig& config) {
  std::string text;
  if (!read_file(path, text)) {
    std::fprintf(stderr, "error: cannot open '%s'\n", path.c_str());
    return 1;
  }
  const cfr::ParsedConfig parsed = cfr::parse_config(text);
  if (!parsed.ok()) {
    for (const cfr::ConfigViolation& v : parsed.violations)
      std::fprintf(stderr, "%s:%d: %s: %s\n", path.c_str(), v.line,
                   v.key.c_str(), v.message.c_str());
    return 1;
  }
  config = parsed.config;
  return 0;
}

int cmd_run(const std::string& path, const std::string& out_dir, int threads) {
  cfr::ScenarioConfig config;
  if (int rc = load_config(path, config)) return rc;
  cfr::RunOptions options;
  options.output_override = out_dir;
  options.threads = threads;
  try {
    const cfr::RunResult r = cfr::run_scenario(config, options);
    std::printf("wrote %s (%zu rows)\n", r.csv_path.c_str(), r.rows.size());
    std::printf("wrote %s\n", r.report_path.c_str());
    std::fputs(cfr::format_equivalence(r.pairs).c_str(), stdout);
    return r.pass ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int cmd_converge(const std::string& path, const std::string& mode_name,
                 int steps) {
  cfr::ScenarioConfig config;
  if (int rc = load_config(path, config)) return rc;
  cfr::RefinementMode mode = cfr::RefinementMode::halve_eta;
  if (mode_name == "add_levels") mode = cfr::RefinementMode::add_levels;
  if (mode_name == "halve_tolerance") mode = cfr::RefinementMode::halve_tolerance;
  try {
    const cfr::ConvergenceReport report =
        cfr::convergence_report(config, mode, steps);
    std::fputs(report.to_text().c_str(), stdout);
    return report.pass ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int cmd_identities() {
  bool all_pass = true;
  for (const cfr::IdentityCheck& c : cfr::identity_suite()) {
    std::printf("[%s] %s lhs=%.16e rhs=%.16e deviation=%.3e tolerance=%.0e\n",
                c.pass ? "PASS" : "FAIL", c.name.c_str(), c.lhs, c.rhs,
                c.deviation, c.tolerance);
    all_pass = all_pass && c.pass;
  }
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dissipation laboratory for two driven coupled oscillators"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  int run_threads = 1;
  CLI::App* run = app.add_subcommand(
      "run", "execute a scenario config and write results.csv/equivalence.txt");
  run->add_option("config", run_config, "scenario config file")->required();
  run->add_option("--out", run_out, "output directory override");
  run->add_option("--threads", run_threads,
                  "worker threads, 0 = hardware count");

  std::string conv_config, conv_mode;
  int conv_steps = 4;
  CLI::App* conv = app.add_subcommand(
      "converge", "refine one numerical control and tabulate convergence");
  conv->add_option("config", conv_config, "scenario config file")->required();
  conv->add_option("--mode", conv_mode, "refinement mode")
      ->required()
      ->check(CLI::IsMember({"halve_eta", "add_levels", "halve_tolerance"}));
  conv->add_option("--steps", conv_steps, "refinement steps (>= 2)")
      ->required();

  app.add_subcommand("identities",
                     "evaluate the closed-form identity suite and report "
                     "PASS/FAIL per identity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (run->parsed()) return cmd_run(run_config, run_out, run_threads);
  if (conv->parsed()) return cmd_converge(conv_config, conv_mode, conv_steps);
  return cmd_identities();
}
