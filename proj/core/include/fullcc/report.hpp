#pragma once

// Run configuration, problem loading and the solve/analyze/scan/check drivers.

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fullcc/analysis.hpp"
#include "fullcc/cc_equations.hpp"
#include "fullcc/cluster.hpp"
#include "fullcc/hamiltonian.hpp"
#include "fullcc/integrals.hpp"

namespace fullcc {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int input_error = 1;
inline constexpr int non_convergence = 2;
inline constexpr int precondition = 3;
inline constexpr int check_failed = 4;
}  // namespace exit_code

enum class SeedMode { zero, mp, oracle };

struct RunConfig {
  std::vector<std::filesystem::path> inputs;
  int eigenpair = 0;
  std::optional<int> rank;  // empty = full index set
  PhaseConvention convention = PhaseConvention::paper_signless;
  double shift = 1.0;
  double tol = 1e-10;
  int max_iter = 100;
  JacobianMode jacobian = JacobianMode::automatic;
  SeedMode seed_mode = SeedMode::zero;
  std::uint64_t seed = 42;
  double omega = 1.0;
  int sandwich_samples = 100;
  std::vector<double> sandwich_radii{1e-3, 1e-2};
  int lipschitz_samples = 6;
  std::vector<double> delta_grid{1e-3, 1e-2, 5e-2, 1e-1};
  std::optional<double> nuclear_charge;
  /// Use the FCIDUMP MS2 sector (default) or the whole N-particle space.
  bool sz_sector = true;
  /// 1-based spin orbitals forming the reference determinant.
  std::vector<int> reference;
  std::filesystem::path out = "fullcc_out";
  int workers = 1;
  bool plot = false;
  /// Rank of the comparison CC run in analyze (the "CCSD error" column).
  int compare_rank = 2;
  std::string inject;

  /// Sets one key from text; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

/// Reads "key = value" lines ('#' starts a comment) on top of `base`.
RunConfig parse_config_text(const std::string& text, RunConfig base = {},
                            const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Resolves a relative input against the working directory, then the
/// FULLCC_FIXTURES directory.
std::filesystem::path resolve_input(const std::filesystem::path& p);

/// Sidecar metadata "<stem>.json" next to an FCIDUMP, or an empty object.
nlohmann::json load_fixture_metadata(const std::filesystem::path& fcidump);

/// Everything derived from one FCIDUMP under a configuration.
struct Problem {
  std::string label;
  std::filesystem::path path;
  nlohmann::json metadata;
  std::shared_ptr<const SpinOrbitalIntegrals> ints;
  std::shared_ptr<const DeterminantSpace> space;
  std::shared_ptr<const FciHamiltonian> hmat;
  std::shared_ptr<const ExcitationAlgebra> alg;

  std::optional<double> nuclear_charge() const;
};

Problem load_problem(const std::filesystem::path& path, const RunConfig& cfg);

/// Conventional name of a truncation: "ccsd" for rank 2, "fullcc" for full.
std::string method_name(std::optional<int> rank, int electrons);

/// Eigenvalues of H near the target, for reporting the eigenvalue nearest a CC energy.
std::vector<double> reference_spectrum(const FciHamiltonian& hmat, int which);

/// Writes text to path via a temporary file and rename.
void write_atomically(const std::filesystem::path& path, const std::string& text);

std::string csv_line(const std::vector<std::string>& fields);

int cmd_solve(const RunConfig& cfg, std::ostream& log);
int cmd_analyze(const RunConfig& cfg, std::ostream& log);
int cmd_scan(const RunConfig& cfg, std::ostream& log);
int cmd_check(const RunConfig& cfg, std::ostream& log);

struct ScanEntry {
  std::string label;
  double bond_length = 0.0;
  std::filesystem::path path;
};

/// Reads "label bond_length file" lines; relative files resolve against the scan file.
std::vector<ScanEntry> read_scan_file(const std::filesystem::path& path);

}  // namespace fullcc
