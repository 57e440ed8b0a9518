// fullcc: solve, analyze, scan and check driver.

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fullcc/error.hpp"
#include "fullcc/report.hpp"

namespace {

struct Flags {
  std::vector<std::string> inputs;
  std::optional<std::string> config;
  std::map<std::string, std::string> values;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("-i,--input", f.inputs, "FCIDUMP file, scan list or fixture directory (repeatable)");
  sub->add_option("-c,--config", f.config, "key = value configuration file");
  auto opt = [&](const std::string& name, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&f, key](const std::string& v) { f.values[key] = v; }, help);
  };
  opt("--rank", "rank", "maximal excitation rank or 'full'");
  opt("--eigenpair", "eigenpair", "target eigenpair index (0 = ground state)");
  opt("--convention", "convention", "excitation phase convention: paper | second-quantized");
  opt("--shift", "shift", "metric shift sigma in D = diag(H) - E* + sigma");
  opt("--tol", "tol", "Newton dual-residual tolerance");
  opt("--max-iter", "max_iter", "Newton iteration limit");
  opt("--jacobian", "jacobian", "auto | dense | krylov | diagonal");
  opt("--seed-mode", "seed_mode", "initial amplitudes: zero | mp | oracle");
  opt("--seed", "seed", "random seed for sampled diagnostics");
  opt("--omega", "omega", "omega in the monotonicity constant");
  opt("--samples", "sandwich_samples", "sandwich samples per radius");
  opt("--radii", "sandwich_radii", "comma separated sandwich radii");
  opt("--compare-rank", "compare_rank", "rank of the comparison CC run in analyze");
  opt("--nuclear-charge", "nuclear_charge", "total nuclear charge Z");
  opt("--sector", "sector", "ms2 (FCIDUMP spin sector) | all");
  opt("--reference", "reference", "comma separated 1-based reference spin orbitals");
  opt("--out", "out", "output directory");
  opt("--workers", "workers", "parallel scan workers");
  opt("--inject", "inject", "mutation for check: sign-bug");
  sub->add_flag_callback("--plot", [&f]() { f.values["plot"] = "true"; }, "emit a gnuplot script");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full coupled cluster solver and well-posedness analysis"};
  app.require_subcommand(1);
  Flags flags;
  const std::map<std::string, int (*)(const fullcc::RunConfig&, std::ostream&)> commands{
      {"solve", fullcc::cmd_solve},
      {"analyze", fullcc::cmd_analyze},
      {"scan", fullcc::cmd_scan},
      {"check", fullcc::cmd_check}};
  const std::map<std::string, std::string> help{
      {"solve", "Newton solve of the CC equations and energies"},
      {"analyze", "well-posedness constants at the CC zero"},
      {"scan", "analyze a bond-length series"},
      {"check", "run the property suites over a fixture directory"}};
  for (const auto& [name, fn] : commands) add_common(app.add_subcommand(name, help.at(name)), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fullcc::exit_code::input_error;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    fullcc::RunConfig cfg;
    if (flags.config) cfg = fullcc::load_config(*flags.config, cfg);
    for (const auto& [k, v] : flags.values) cfg.set(k, v);
    if (!flags.inputs.empty()) {
      cfg.inputs.clear();
      for (const auto& s : flags.inputs) cfg.inputs.emplace_back(s);
    }
    cfg.validate();
    return commands.at(name)(cfg, std::cerr);
  } catch (const fullcc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fullcc::exit_code::input_error;
  } catch (const fullcc::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fullcc::exit_code::input_error;
  } catch (const fullcc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return fullcc::exit_code::input_error;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return fullcc::exit_code::input_error;
  }
}
