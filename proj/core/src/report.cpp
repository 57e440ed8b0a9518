#include "fullcc/report.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "fullcc/error.hpp"

namespace fullcc {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string s) {
  auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && sp(s.back())) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && sp(s[i])) ++i;
  return s.substr(i);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("value of '" + key + "' is not a number: '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long d = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("value of '" + key + "' is not an integer: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError("value of '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : v) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AnalysisOptions analysis_options(const RunConfig& cfg, const Problem& prob) {
  AnalysisOptions o;
  o.omega = cfg.omega;
  o.delta_grid = cfg.delta_grid;
  o.lipschitz_samples = cfg.lipschitz_samples;
  o.lipschitz = cfg.lipschitz_samples > 0;
  o.sandwich_radii = cfg.sandwich_radii;
  o.sandwich_samples = cfg.sandwich_samples;
  o.sandwich = cfg.sandwich_samples > 0;
  o.seed = cfg.seed;
  o.nuclear_charge = prob.nuclear_charge();
  return o;
}

AmplitudeVector initial_guess(const RunConfig& cfg, const Problem& prob, const Eigenpair& eig,
                              ExcitationSetPtr active, const NormMetric& metric) {
  switch (cfg.seed_mode) {
    case SeedMode::mp:
      return mp_seed(*prob.alg, *prob.hmat, active, metric);
    case SeedMode::oracle:
      return ci_to_cc(*prob.alg, eig.vector, active);
    case SeedMode::zero:
      break;
  }
  return AmplitudeVector::zero(active);
}

NewtonOptions newton_options(const RunConfig& cfg) {
  NewtonOptions o;
  o.tol = cfg.tol;
  o.max_iter = cfg.max_iter;
  o.mode = cfg.jacobian;
  return o;
}

}  // namespace

void RunConfig::set(const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  if (key == "input") {
    inputs.clear();
    for (const auto& s : split_list(value)) inputs.emplace_back(s);
  } else if (key == "eigenpair") {
    eigenpair = value == "lowest" ? 0 : static_cast<int>(to_long(key, value));
  } else if (key == "rank") {
    if (value == "full") rank.reset();
    else rank = static_cast<int>(to_long(key, value));
  } else if (key == "convention") {
    convention = parse_convention(value);
  } else if (key == "shift") {
    shift = to_double(key, value);
  } else if (key == "tol") {
    tol = to_double(key, value);
  } else if (key == "max_iter") {
    max_iter = static_cast<int>(to_long(key, value));
  } else if (key == "jacobian") {
    jacobian = parse_jacobian_mode(value);
  } else if (key == "seed_mode") {
    if (value == "zero") seed_mode = SeedMode::zero;
    else if (value == "mp") seed_mode = SeedMode::mp;
    else if (value == "oracle") seed_mode = SeedMode::oracle;
    else throw ConfigError("seed_mode must be zero, mp or oracle");
  } else if (key == "seed") {
    seed = static_cast<std::uint64_t>(to_long(key, value));
  } else if (key == "omega") {
    omega = to_double(key, value);
  } else if (key == "sandwich_samples") {
    sandwich_samples = static_cast<int>(to_long(key, value));
  } else if (key == "sandwich_radii") {
    sandwich_radii = to_doubles(key, value);
  } else if (key == "lipschitz_samples") {
    lipschitz_samples = static_cast<int>(to_long(key, value));
  } else if (key == "delta_grid") {
    delta_grid = to_doubles(key, value);
  } else if (key == "nuclear_charge") {
    nuclear_charge = to_double(key, value);
  } else if (key == "sector") {
    if (value == "ms2") sz_sector = true;
    else if (value == "all") sz_sector = false;
    else throw ConfigError("sector must be ms2 or all");
  } else if (key == "reference") {
    reference.clear();
    for (const auto& s : split_list(value)) reference.push_back(static_cast<int>(to_long(key, s)));
  } else if (key == "out") {
    out = value;
  } else if (key == "workers") {
    workers = static_cast<int>(to_long(key, value));
  } else if (key == "plot") {
    plot = to_bool(key, value);
  } else if (key == "compare_rank") {
    compare_rank = static_cast<int>(to_long(key, value));
  } else if (key == "inject") {
    inject = value;
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

void RunConfig::validate() const {
  if (eigenpair < 0) throw ConfigError("eigenpair must be >= 0");
  if (rank && *rank < 1) throw ConfigError("rank must be >= 1 or 'full'");
  if (!(shift > 0.0) && !(shift <= 0.0)) throw ConfigError("shift must be finite");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (!(omega > 0.0 && omega <= 1.0)) throw ConfigError("omega must lie in (0, 1]");
  if (sandwich_samples < 0 || lipschitz_samples < 0)
    throw ConfigError("sample counts must be nonnegative");
  for (double r : sandwich_radii)
    if (!(r > 0.0)) throw ConfigError("sandwich radii must be positive");
  for (double r : delta_grid)
    if (!(r > 0.0)) throw ConfigError("delta grid entries must be positive");
  if (nuclear_charge && !(*nuclear_charge > 0.0)) throw ConfigError("nuclear_charge must be > 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (compare_rank < 1) throw ConfigError("compare_rank must be >= 1");
  if (!inject.empty() && inject != "sign-bug")
    throw ConfigError("unknown mutation '" + inject + "' (only sign-bug)");
}

RunConfig parse_config_text(const std::string& text, RunConfig base, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    try {
      base.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
  return parse_config_text(read_file(path), std::move(base), path.string());
}

fs::path resolve_input(const fs::path& p) {
  if (p.is_absolute() || fs::exists(p)) return p;
  if (const char* root = std::getenv("FULLCC_FIXTURES"); root && *root) {
    const fs::path q = fs::path(root) / p;
    if (fs::exists(q)) return q;
  }
  return p;
}

nlohmann::json load_fixture_metadata(const fs::path& fcidump) {
  fs::path side = fcidump;
  side.replace_extension(".json");
  if (!fs::exists(side)) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(read_file(side));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed metadata " + side.string() + ": " + e.what());
  }
}

std::optional<double> Problem::nuclear_charge() const {
  if (metadata.contains("nuclear_charge") && metadata["nuclear_charge"].is_number())
    return metadata["nuclear_charge"].get<double>();
  return std::nullopt;
}

Problem load_problem(const fs::path& path_in, const RunConfig& cfg) {
  const fs::path path = resolve_input(path_in);
  if (!fs::exists(path)) throw ConfigError("input not found: " + path_in.string());
  Problem p;
  p.path = path;
  p.metadata = load_fixture_metadata(path);
  p.label = p.metadata.value("name", path.stem().string());
  if (cfg.nuclear_charge) p.metadata["nuclear_charge"] = *cfg.nuclear_charge;
  const IntegralTable table = parse_fcidump(path);
  if (table.nelec() < 1) throw ConfigError(path.string() + ": no electrons");
  auto ints = std::make_shared<SpinOrbitalIntegrals>(table);
  if (!cfg.reference.empty()) {
    if (static_cast<int>(cfg.reference.size()) != table.nelec())
      throw ConfigError("reference lists " + std::to_string(cfg.reference.size()) +
                        " orbitals for " + std::to_string(table.nelec()) + " electrons");
    std::vector<int> occ;
    for (int r : cfg.reference) occ.push_back(r - 1);
    ints = std::make_shared<SpinOrbitalIntegrals>(ints->with_reference(occ));
  }
  p.ints = ints;
  std::optional<int> ms2;
  if (cfg.sz_sector) ms2 = table.ms2();
  p.space = std::make_shared<const DeterminantSpace>(ints->spin_orbitals(), table.nelec(), ms2,
                                                     ints->spins());
  p.hmat = std::make_shared<const FciHamiltonian>(assemble(p.space, *ints));
  p.alg = std::make_shared<const ExcitationAlgebra>(p.space, cfg.convention);
  return p;
}

std::string method_name(std::optional<int> rank, int electrons) {
  if (!rank || *rank >= electrons) return "fullcc";
  static const char* names[] = {"", "ccs", "ccsd", "ccsdt", "ccsdtq"};
  if (*rank <= 4) return names[*rank];
  return "cc_rank" + std::to_string(*rank);
}

std::vector<double> reference_spectrum(const FciHamiltonian& hmat, int which) {
  const auto n = static_cast<Eigen::Index>(hmat.dim());
  if (static_cast<std::size_t>(n) <= kDenseDimension) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hmat.dense(), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return std::vector<double>(ev.data(), ev.data() + ev.size());
  }
  const int k = static_cast<int>(std::min<Eigen::Index>(n, std::max(6, which + 3)));
  auto [theta, x] = davidson(hmat.matrix, k, 1e-8, 2000, 60);
  (void)x;
  return std::vector<double>(theta.data(), theta.data() + theta.size());
}

void write_atomically(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) s += ',';
    const auto& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      s += '"';
      for (char c : f) s += (c == '"') ? std::string("\"\"") : std::string(1, c);
      s += '"';
    } else {
      s += f;
    }
  }
  return s + "\n";
}

int cmd_solve(const RunConfig& cfg, std::ostream& log) {
  if (cfg.inputs.empty()) {
    log << "error: no input given\n";
    return exit_code::input_error;
  }
  int rc = exit_code::ok;
  std::vector<std::string> rows;
  std::string method;
  for (const auto& in : cfg.inputs) {
    Problem prob;
    Eigenpair eig;
    NormMetric metric;
    try {
      prob = load_problem(in, cfg);
      eig = solve_eigenpair(*prob.hmat, cfg.eigenpair);
      metric = build_norm_metric(*prob.hmat, eig.energy, cfg.shift);
    } catch (const ParseError& e) {
      log << "error: " << e.what() << "\n";
      return exit_code::input_error;
    } catch (const ConfigError& e) {
      log << "error: " << e.what() << "\n";
      return exit_code::input_error;
    } catch (const InvalidShift& e) {
      log << "error: " << e.what() << "\n";
      return exit_code::input_error;
    } catch (const InvalidDimension& e) {
      log << "error: " << e.what() << "\n";
      return exit_code::input_error;
    } catch (const EmptySector& e) {
      log << "error: " << e.what() << "\n";
      return exit_code::input_error;
    }
    method = method_name(cfg.rank, prob.space->electrons());
    auto active = std::make_shared<const ExcitationSet>(prob.space, cfg.rank);
    SolverTrace trace;
    AmplitudeVector t;
    double e_cc = 0.0, residual = 0.0;
    bool converged = false;
    try {
      const AmplitudeVector t0 = initial_guess(cfg, prob, eig, active, metric);
      NewtonResult res = newton_solve(*prob.alg, *prob.hmat, t0, metric, newton_options(cfg));
      trace = res.trace;
      t = res.t;
      e_cc = res.residual.energy;
      residual = trace.iterations.back().residual;
      converged = true;
    } catch (const NonConvergence& e) {
      log << "warning: " << prob.label << ": " << e.what() << "\n";
      trace = e.trace();
      t = trace.final;
      e_cc = trace.iterations.back().energy;
      residual = trace.iterations.back().residual;
      rc = exit_code::non_convergence;
    } catch (const NearSingular& e) {
      log << "warning: " << prob.label << ": " << e.what() << "\n";
      rc = exit_code::non_convergence;
      continue;
    } catch (const NotIntermediatelyNormalisable& e) {
      log << "error: " << prob.label << ": " << e.what() << "\n";
      return exit_code::precondition;
    }
    write_atomically(cfg.out / (prob.label + "_amplitudes.json"), to_json(t).dump(1) + "\n");
    write_atomically(cfg.out / (prob.label + "_trace.json"), trace.to_json().dump(1) + "\n");

    const auto spec = reference_spectrum(*prob.hmat, cfg.eigenpair);
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < spec.size(); ++i)
      if (std::abs(spec[i] - e_cc) < std::abs(spec[nearest] - e_cc)) nearest = i;
    const double core = prob.hmat->e_core;
    rows.push_back(csv_line({prob.label, method, std::string(to_string(cfg.convention)),
                             format_number(hf_energy(*prob.hmat)),
                             format_number(eig.total_energy()), format_number(e_cc + core),
                             format_number(hf_energy(*prob.hmat) - eig.total_energy()),
                             format_number(e_cc - eig.energy), format_number(spec[nearest] + core),
                             std::to_string(nearest), format_number(residual),
                             std::to_string(trace.iterations.size() - 1),
                             converged ? "true" : "false"}));
    log << prob.label << ": " << method << " E=" << format_number(e_cc + core)
        << " error=" << format_number(e_cc - eig.energy)
        << (converged ? "" : " (not converged)") << "\n";
  }
  std::string csv = csv_line({"molecule", "method", "convention", "e_hf", "e_fci", "e_cc",
                              "hf_error", method + "_error", "e_nearest_fci", "nearest_fci_index",
                              "residual", "iterations", "converged"});
  for (const auto& r : rows) csv += r;
  write_atomically(cfg.out / "energies.csv", csv);
  return rc;
}

namespace {

struct AnalyzeOutcome {
  int rc = exit_code::ok;
  std::string label;
  std::optional<AnalysisReport> report;
  Eigenpair eig;
  std::string message;
};

AnalyzeOutcome analyze_one(const fs::path& in, const RunConfig& cfg, bool with_cc_error) {
  AnalyzeOutcome o;
  Problem prob;
  try {
    prob = load_problem(in, cfg);
    o.label = prob.label;
    o.eig = solve_eigenpair(*prob.hmat, cfg.eigenpair);
  } catch (const IterativeFailure& e) {
    o.rc = exit_code::non_convergence;
    o.message = e.what();
    return o;
  } catch (const Error& e) {
    o.rc = exit_code::input_error;
    o.message = e.what();
    return o;
  }
  if (o.eig.degenerate) {
    o.rc = exit_code::precondition;
    o.message = "eigenvalue is degenerate (gap " + format_number(o.eig.gap) +
                " Eh); the well-posedness theory needs a simple eigenvalue";
    return o;
  }
  try {
    const NormMetric metric = build_norm_metric(*prob.hmat, o.eig.energy, cfg.shift);
    AnalysisReport rep = analyze(*prob.alg, *prob.hmat, o.eig, metric,
                                 analysis_options(cfg, prob), prob.label);
    rep.hf_error = hf_energy(*prob.hmat) - o.eig.total_energy();
    if (with_cc_error) {
      const int n = prob.space->electrons();
      std::optional<int> r = cfg.compare_rank;
      if (*r >= n) r.reset();
      auto active = std::make_shared<const ExcitationSet>(prob.space, r);
      try {
        NewtonOptions no = newton_options(cfg);
        const AmplitudeVector t0 = AmplitudeVector::zero(active);
        const NewtonResult res = newton_solve(*prob.alg, *prob.hmat, t0, metric, no);
        rep.ccsd_error = res.residual.energy - o.eig.energy;
      } catch (const Error& e) {
        o.message = std::string("comparison CC solve failed: ") + e.what();
      }
    }
    o.report = std::move(rep);
  } catch (const DegenerateEigenpair& e) {
    o.rc = exit_code::precondition;
    o.message = e.what();
  } catch (const NotIntermediatelyNormalisable& e) {
    o.rc = exit_code::precondition;
    o.message = e.what();
  } catch (const InvalidShift& e) {
    o.rc = exit_code::input_error;
    o.message = e.what();
  } catch (const IterativeFailure& e) {
    o.rc = exit_code::non_convergence;
    o.message = e.what();
  }
  return o;
}

}  // namespace

int cmd_analyze(const RunConfig& cfg, std::ostream& log) {
  if (cfg.inputs.empty()) {
    log << "error: no input given\n";
    return exit_code::input_error;
  }
  int rc = exit_code::ok;
  std::string csv = csv_line(AnalysisReport::csv_columns());
  for (const auto& in : cfg.inputs) {
    AnalyzeOutcome o = analyze_one(in, cfg, true);
    if (!o.message.empty())
      log << (o.report ? "warning: " : "error: ") << (o.label.empty() ? in.string() : o.label)
          << ": " << o.message << "\n";
    if (!o.report) {
      rc = std::max(rc, o.rc);
      continue;
    }
    const AnalysisReport& rep = *o.report;
    write_atomically(cfg.out / (rep.molecule + "_analysis.json"), rep.to_json().dump(1) + "\n");
    csv += csv_line(rep.csv_row());
    log << rep.molecule << ": gamma=" << format_number(rep.gamma)
        << " theta=" << format_number(rep.theta) << " alpha=" << format_number(rep.alpha)
        << " sigma_min=" << format_number(rep.sigma_min_jacobian)
        << " Gamma=" << format_number(rep.monotonicity.Gamma) << "\n";
  }
  write_atomically(cfg.out / "analysis.csv", csv);
  return rc;
}

std::vector<ScanEntry> read_scan_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scan file " + path.string());
  std::vector<ScanEntry> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    ScanEntry e;
    std::string file, extra;
    if (!(ls >> e.label)) continue;
    if (!(ls >> e.bond_length >> file) || (ls >> extra))
      throw ConfigError(path.string() + ":" + std::to_string(n) +
                        ": expected 'label bond_length file'");
    e.path = fs::path(file).is_absolute() ? fs::path(file) : path.parent_path() / file;
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::vector<ScanEntry> scan_entries(const RunConfig& cfg) {
  std::vector<ScanEntry> entries;
  for (const auto& raw : cfg.inputs) {
    const fs::path p = resolve_input(raw);
    if (fs::is_directory(p)) {
      if (!fs::exists(p / "scan.txt")) throw ConfigError("directory without scan.txt: " + p.string());
      auto more = read_scan_file(p / "scan.txt");
      entries.insert(entries.end(), more.begin(), more.end());
    } else if (p.extension() == ".txt") {
      auto more = read_scan_file(p);
      entries.insert(entries.end(), more.begin(), more.end());
    } else {
      if (!fs::exists(p)) throw ConfigError("input not found: " + raw.string());
      const auto meta = load_fixture_metadata(p);
      if (!meta.contains("bond_length"))
        throw ConfigError(p.string() + ": scan inputs need a bond_length in their metadata");
      entries.push_back({meta.value("name", p.stem().string()),
                         meta["bond_length"].get<double>(), p});
    }
  }
  std::set<std::string> labels;
  for (const auto& e : entries)
    if (!labels.insert(e.label).second) throw ConfigError("duplicate scan label " + e.label);
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ScanEntry& a, const ScanEntry& b) { return a.bond_length < b.bond_length; });
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (!(entries[i].bond_length > entries[i - 1].bond_length))
      throw ConfigError("bond lengths must be strictly monotone (" + entries[i - 1].label +
                        " and " + entries[i].label + ")");
  return entries;
}

std::string gnuplot_script(const std::vector<std::string>& constants) {
  std::string s =
      "# gnuplot script for scan.csv (long format: bond_length,label,constant,value)\n"
      "set datafile separator ','\n"
      "set key outside\n"
      "set xlabel 'bond length / Angstrom'\n"
      "set terminal pngcairo size 1000,700\n";
  for (int pass = 0; pass < 2; ++pass) {
    s += pass == 0 ? "set output 'scan_linear.png'\nunset logscale y\n"
                   : "set output 'scan_log.png'\nset logscale y\n";
    s += "plot ";
    for (std::size_t i = 0; i < constants.size(); ++i) {
      const auto& c = constants[i];
      s += (i ? ", \\\n     " : "") + std::string("'scan.csv' using 1:(strcol(3) eq '") + c +
           "' ? " + (pass ? "abs($4)" : "$4") + " : NaN) with linespoints title '" + c + "'";
    }
    s += "\n";
  }
  return s;
}

}  // namespace

int cmd_scan(const RunConfig& cfg, std::ostream& log) {
  std::vector<ScanEntry> entries;
  try {
    if (cfg.inputs.empty()) throw ConfigError("no scan input given");
    entries = scan_entries(cfg);
    if (entries.empty()) throw ConfigError("scan has no entries");
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code::input_error;
  }

  std::vector<AnalyzeOutcome> outcomes(entries.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      RunConfig c = cfg;
      c.inputs = {entries[i].path};
      outcomes[i] = analyze_one(entries[i].path, c, false);
      if (outcomes[i].report) {
        auto j = outcomes[i].report->to_json();
        j["bond_length"] = entries[i].bond_length;
        j["label"] = entries[i].label;
        write_atomically(cfg.out / "entries" / (entries[i].label + ".json"), j.dump(1) + "\n");
      }
      std::lock_guard<std::mutex> lock(log_mutex);
      log << entries[i].label << ": "
          << (outcomes[i].report ? "ok" : "skipped (" + outcomes[i].message + ")") << "\n";
    }
  };
  const int nw = std::max(1, std::min<int>(cfg.workers, static_cast<int>(entries.size())));
  std::vector<std::future<void>> pool;
  for (int w = 0; w < nw; ++w) pool.push_back(std::async(std::launch::async, worker));
  for (auto& f : pool) f.get();

  const std::vector<std::string> constants{"gamma", "theta", "gamma_over_theta",
                                           "alpha", "sigma_min_jacobian", "Gamma",
                                           "t_norm", "spectral_gap", "hf_error"};
  std::string csv = csv_line({"bond_length", "label", "constant", "value"});
  nlohmann::json summary;
  summary["entries"] = nlohmann::json::array();
  int rc = exit_code::ok;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto& o = outcomes[i];
    const std::string bl = format_number(e.bond_length);
    nlohmann::json js{{"label", e.label}, {"bond_length", e.bond_length}};
    if (o.rc == exit_code::ok || o.rc == exit_code::precondition)
      js["near_degenerate"] = o.eig.degenerate;
    if (o.report) {
      const auto& r = *o.report;
      const std::map<std::string, double> vals{
          {"gamma", r.gamma},
          {"theta", r.theta},
          {"gamma_over_theta", r.gamma_over_theta},
          {"alpha", r.alpha},
          {"sigma_min_jacobian", r.sigma_min_jacobian},
          {"Gamma", r.monotonicity.Gamma},
          {"t_norm", r.t_norm},
          {"spectral_gap", r.spectral_gap},
          {"hf_error", r.hf_error.value_or(0.0)}};
      for (const auto& c : constants)
        csv += csv_line({bl, e.label, c, format_number(vals.at(c))});
      js["status"] = "analyzed";
      js["all_positive"] = r.gamma > 0 && r.theta > 0 && r.alpha > 0 && r.sigma_min_jacobian > 0;
      js["gap"] = r.spectral_gap;
    } else {
      js["status"] = "skipped";
      js["reason"] = o.message;
      if (o.rc != exit_code::precondition) rc = std::max(rc, o.rc);
    }
    summary["entries"].push_back(js);
  }
  summary["flagged_near_degenerate"] = nlohmann::json::array();
  for (const auto& js : summary["entries"])
    if (js.value("near_degenerate", false)) summary["flagged_near_degenerate"].push_back(js["label"]);
  write_atomically(cfg.out / "scan.csv", csv);
  write_atomically(cfg.out / "scan_summary.json", summary.dump(1) + "\n");
  if (cfg.plot) write_atomically(cfg.out / "scan.gp", gnuplot_script(constants));
  return rc;
}

}  // namespace fullcc
