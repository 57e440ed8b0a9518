#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "fullcc/error.hpp"
#include "fullcc/report.hpp"

namespace fullcc {

namespace fs = std::filesystem;

namespace {

using PhaseFn = std::function<std::optional<PhasedDeterminant>(const ExcitationIndex&,
                                                               const Determinant&)>;

// Creation operators applied without their parity factor.
std::optional<PhasedDeterminant> unsigned_creation_excitation(const ExcitationIndex& mu,
                                                              const Determinant& d) {
  if (!d.contains(mu.hole_mask()) || d.intersects(mu.particle_mask())) return std::nullopt;
  Determinant out = d;
  int sign = 1;
  for (int p : mu.holes) {
    sign *= annihilation_sign(out, p);
    out.reset(p);
  }
  return PhasedDeterminant{out | mu.particle_mask(), sign};
}

PhaseFn phase_function(PhaseConvention conv, bool sign_bug) {
  if (sign_bug && conv == PhaseConvention::second_quantized) return unsigned_creation_excitation;
  return [conv](const ExcitationIndex& mu, const Determinant& d) {
    return apply_excitation(mu, d, conv);
  };
}

struct Suite {
  std::string name;
  int cases = 0;
  double worst = 0.0;
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    ++cases;
    if (!ok && failures.size() < 1000) failures.push_back(what);
  }
  void error(double e) { worst = std::max(worst, e); }
  bool passed() const { return failures.empty() && cases > 0; }

  nlohmann::json to_json() const {
    nlohmann::json j{{"suite", name}, {"passed", passed()}, {"cases", cases},
                     {"failures", failures.size()}, {"max_error", worst}};
    auto& ex = j["examples"] = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min<std::size_t>(failures.size(), 5); ++i)
      ex.push_back(failures[i]);
    return j;
  }
};

struct SpaceCase {
  std::string label;
  std::shared_ptr<const DeterminantSpace> space;
};

struct FixtureCase {
  std::string label;
  std::shared_ptr<const SpinOrbitalIntegrals> ints;
  std::shared_ptr<const DeterminantSpace> space;
  std::shared_ptr<const FciHamiltonian> hmat;
  nlohmann::json metadata;
};

constexpr std::size_t kSmallDimension = 600;

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / i;
  return r;
}

// Per source determinant, the image of X_mu: (target ordinal, sign) or target -1.
using OperatorTable = std::vector<std::pair<long, int>>;

OperatorTable operator_table(const DeterminantSpace& space, const ExcitationIndex& mu,
                             const PhaseFn& fn) {
  OperatorTable out(space.size(), {-1, 0});
  for (std::size_t c = 0; c < space.size(); ++c) {
    auto r = fn(mu, space[c]);
    if (!r) continue;
    auto idx = space.index_of(r->first);
    if (!idx) continue;
    out[c] = {static_cast<long>(*idx), r->second};
  }
  return out;
}

std::pair<long, int> compose(const OperatorTable& a, const OperatorTable& b, std::size_t c) {
  const auto [m, s] = b[c];
  if (m < 0) return {-1, 0};
  const auto [n, t] = a[static_cast<std::size_t>(m)];
  if (n < 0) return {-1, 0};
  return {n, s * t};
}

void run_counting(Suite& s, const std::vector<SpaceCase>& spaces) {
  for (const auto& sc : spaces) {
    const auto& sp = *sc.space;
    const int k = sp.spin_orbitals(), n = sp.electrons();
    if (!sp.ms2()) {
      s.expect(sp.size() == binomial(k, n), sc.label + ": |B| != C(K,N)");
    } else {
      const int na = (n + *sp.ms2()) / 2, nb = n - na;
      s.expect(sp.size() == binomial(k / 2, na) * binomial(k / 2, nb),
               sc.label + ": sector size mismatch");
    }
    s.expect(sp[0] == Determinant::lowest(n), sc.label + ": reference is not ordinal 0");
    bool sorted = true;
    for (std::size_t i = 1; i < sp.size(); ++i) sorted = sorted && sp[i - 1] < sp[i];
    s.expect(sorted, sc.label + ": determinants not strictly ordered");
    const ExcitationSet full(sc.space);
    s.expect(full.size() + 1 == sp.size(), sc.label + ": |I| != |B| - 1");
    std::uint64_t upto2 = 0;
    for (int j = 1; j <= std::min(2, n); ++j) upto2 += binomial(n, j) * binomial(k - n, j);
    if (!sp.ms2()) {
      const ExcitationSet sd(sc.space, 2);
      s.expect(sd.size() == upto2 || n <= 2, sc.label + ": rank<=2 count mismatch");
    }
  }
}

void run_adjoint(Suite& s, const std::vector<SpaceCase>& spaces) {
  for (const auto& sc : spaces) {
    const auto& sp = *sc.space;
    if (sp.size() > kSmallDimension) continue;
    for (auto conv : {PhaseConvention::paper_signless, PhaseConvention::second_quantized}) {
      for (const auto& mu : enumerate_excitations(sp.spin_orbitals(), sp.electrons())) {
        bool ok = true;
        for (std::size_t c = 0; c < sp.size() && ok; ++c) {
          auto up = apply_excitation(mu, sp[c], conv);
          if (!up) continue;
          auto down = apply_deexcitation(mu, up->first, conv);
          ok = down && down->first == sp[c] && down->second == up->second;
        }
        for (std::size_t c = 0; c < sp.size() && ok; ++c) {
          auto down = apply_deexcitation(mu, sp[c], conv);
          if (!down) continue;
          auto up = apply_excitation(mu, down->first, conv);
          ok = up && up->first == sp[c] && up->second == down->second;
        }
        s.expect(ok, sc.label + " " + std::string(to_string(conv)) + ": <X d, e> != <d, X^+ e> for " +
                         mu.to_string());
      }
    }
  }
}

void run_commutativity(Suite& s, const std::vector<SpaceCase>& spaces, bool sign_bug,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& sc : spaces) {
    const auto& sp = *sc.space;
    if (sp.size() > kSmallDimension) continue;
    const auto mus = enumerate_excitations(sp.spin_orbitals(), sp.electrons());
    for (auto conv : {PhaseConvention::paper_signless, PhaseConvention::second_quantized}) {
      const PhaseFn fn = phase_function(conv, sign_bug);
      std::vector<OperatorTable> tables;
      tables.reserve(mus.size());
      for (const auto& mu : mus) tables.push_back(operator_table(sp, mu, fn));
      std::vector<std::pair<std::size_t, std::size_t>> pairs;
      const std::size_t m = mus.size();
      if (m * m <= 40000) {
        for (std::size_t a = 0; a < m; ++a)
          for (std::size_t b = a + 1; b < m; ++b) pairs.emplace_back(a, b);
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        for (int i = 0; i < 4000; ++i) pairs.emplace_back(pick(rng), pick(rng));
      }
      int bad = 0;
      for (auto [a, b] : pairs) {
        bool ok = true;
        for (std::size_t c = 0; c < sp.size() && ok; ++c)
          ok = compose(tables[a], tables[b], c) == compose(tables[b], tables[a], c);
        if (!ok && ++bad <= 3)
          s.expect(false, sc.label + " " + std::string(to_string(conv)) + ": [X" +
                              mus[a].to_string() + ", X" + mus[b].to_string() + "] != 0");
        else
          s.expect(ok, "");
      }
      if (sp.size() <= 60) {
        // The sparse pattern must realize the same operators.
        const ExcitationAlgebra alg(sc.space, conv);
        const ExcitationSet full(sc.space);
        for (std::size_t k = 0; k < full.size(); ++k) {
          const ExcitationIndex& mu = full[k];
          const auto& tab = tables[static_cast<std::size_t>(
              std::find(mus.begin(), mus.end(), mu) - mus.begin())];
          bool ok = true;
          for (std::size_t c = 0; c < sp.size() && ok; ++c) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sp.size()));
            e[static_cast<Eigen::Index>(c)] = 1.0;
            const Eigen::VectorXd y = alg.apply_single(full.det_of(k), e);
            Eigen::VectorXd want = Eigen::VectorXd::Zero(y.size());
            if (tab[c].first >= 0) want[tab[c].first] = tab[c].second;
            ok = (y - want).cwiseAbs().maxCoeff() == 0.0;
          }
          s.expect(ok, sc.label + " " + std::string(to_string(conv)) +
                           ": excitation pattern disagrees with ladder algebra for " +
                           mu.to_string());
        }
      }
    }
  }
}

void run_hamiltonian(Suite& s, const std::vector<FixtureCase>& fixtures) {
  for (const auto& fx : fixtures) {
    const Eigen::MatrixXd h = fx.hmat->dense();
    const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
    s.error(asym);
    s.expect(asym <= 1e-12, fx.label + ": H not symmetric (" + format_number(asym) + ")");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
    const double e0 = es.eigenvalues()[0];
    s.expect(e0 <= h(0, 0) + 1e-12, fx.label + ": E0 above <Psi0|H|Psi0>");
    const Eigenpair eig = solve_eigenpair(*fx.hmat, 0);
    s.error(std::abs(eig.energy - e0));
    s.expect(std::abs(eig.energy - e0) <= 1e-9, fx.label + ": eigensolver disagrees with dense");
    if (fx.metadata.contains("e_fci_total")) {
      const double ref = fx.metadata["e_fci_total"].get<double>();
      s.expect(std::abs(eig.total_energy() - ref) <= 1e-7,
               fx.label + ": E_FCI differs from metadata by " +
                   format_number(eig.total_energy() - ref));
    }
  }
}

Eigen::VectorXd random_det_array(std::size_t n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd t(static_cast<Eigen::Index>(n));
  for (auto& v : t) v = g(rng);
  t[0] = 0.0;
  return t * (scale / std::max(1e-300, t.norm()));
}

void run_exponential(Suite& s, const std::vector<SpaceCase>& spaces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& sc : spaces) {
    if (sc.space->size() > 2000) continue;
    for (auto conv : {PhaseConvention::paper_signless, PhaseConvention::second_quantized}) {
      const ExcitationAlgebra alg(sc.space, conv);
      for (int trial = 0; trial < 5; ++trial) {
        const Eigen::VectorXd t = random_det_array(alg.dim(), 1.0, rng);
        const Eigen::VectorXd v = random_det_array(alg.dim(), 1.0, rng);
        const Eigen::VectorXd back = alg.exp_apply(t, alg.exp_apply(t, v, 1), -1);
        const double err = (back - v).cwiseAbs().maxCoeff();
        s.error(err);
        s.expect(err <= 1e-12, sc.label + ": e^{-T} e^{T} != I (" + format_number(err) + ")");
        Eigen::VectorXd w = v;
        w[0] = 1.0;
        for (int k = 0; k <= alg.electrons(); ++k) w = alg.apply(t, w);
        s.expect(w.cwiseAbs().maxCoeff() == 0.0, sc.label + ": T^{N+1} != 0");
      }
    }
  }
}

void run_round_trip(Suite& s, const std::vector<SpaceCase>& spaces, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& sc : spaces) {
    if (sc.space->size() > 2000) continue;
    const auto set = std::make_shared<const ExcitationSet>(sc.space);
    for (auto conv : {PhaseConvention::paper_signless, PhaseConvention::second_quantized}) {
      const ExcitationAlgebra alg(sc.space, conv);
      for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd psi = random_det_array(alg.dim(), 0.5, rng);
        psi[0] = 1.0;
        const Eigen::VectorXd again = cc_to_ci(alg, ci_to_cc(alg, psi, set));
        const double err = (again - psi).cwiseAbs().maxCoeff();
        s.error(err);
        s.expect(err <= 1e-12, sc.label + ": cc_to_ci(ci_to_cc(psi)) != psi (" +
                                   format_number(err) + ")");
      }
    }
  }
}

void run_zero_eigenvector(Suite& s, const std::vector<FixtureCase>& fixtures) {
  for (const auto& fx : fixtures) {
    const Eigenpair eig = solve_eigenpair(*fx.hmat, 0);
    const NormMetric metric = build_norm_metric(*fx.hmat, eig.energy);
    const auto set = std::make_shared<const ExcitationSet>(fx.space);
    for (auto conv : {PhaseConvention::paper_signless, PhaseConvention::second_quantized}) {
      const ExcitationAlgebra alg(fx.space, conv);
      const AmplitudeVector t = ci_to_cc(alg, eig.vector, set);
      const CcResidual r = cc_residual(alg, *fx.hmat, t);
      const double rn = dual_norm(r.f.values, metric.on(*set));
      s.error(rn);
      s.expect(rn <= 1e-8, fx.label + ": eigenvector amplitudes leave residual " +
                               format_number(rn));
      s.expect(std::abs(r.energy - eig.energy) <= 1e-9, fx.label + ": CC energy != eigenvalue");
    }
  }
}

void run_jacobian(Suite& s, const std::vector<std::pair<std::string, FixtureCase>>& cases,
                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  for (const auto& [label, fx] : cases) {
    const auto set = std::make_shared<const ExcitationSet>(fx.space);
    for (auto conv : {PhaseConvention::paper_signless, PhaseConvention::second_quantized}) {
      const ExcitationAlgebra alg(fx.space, conv);
      for (int trial = 0; trial < 2; ++trial) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(set->size()));
        for (auto& v : x) v = g(rng);
        x *= 0.5 / x.norm();
        const AmplitudeVector t(set, x);
        const Eigen::MatrixXd j = cc_jacobian(alg, *fx.hmat, t).matrix;
        const double h = 1e-5;
        double err = 0.0;
        for (Eigen::Index c = 0; c < x.size(); ++c) {
          Eigen::VectorXd xp = x, xm = x;
          xp[c] += h;
          xm[c] -= h;
          const Eigen::VectorXd fd = (cc_residual(alg, *fx.hmat, AmplitudeVector(set, xp)).f.values -
                                      cc_residual(alg, *fx.hmat, AmplitudeVector(set, xm)).f.values) /
                                     (2 * h);
          err = std::max(err, (fd - j.col(c)).cwiseAbs().maxCoeff());
        }
        err /= std::max(1.0, j.cwiseAbs().maxCoeff());
        s.error(err);
        s.expect(err <= 1e-6, label + ": Jacobian vs finite differences " + format_number(err));
      }
      const Eigenpair eig = solve_eigenpair(*fx.hmat, 0);
      const AmplitudeVector tstar = ci_to_cc(alg, eig.vector, set);
      const Eigen::MatrixXd j = cc_jacobian(alg, *fx.hmat, tstar).matrix;
      const Eigen::MatrixXd b = similarity_block(alg, *fx.hmat, tstar, eig.energy);
      const double err = (j - b).cwiseAbs().maxCoeff();
      s.error(err);
      s.expect(err <= 1e-8, label + ": Jacobian at zero != similarity block (" +
                                format_number(err) + ")");
    }
  }
}

void run_sandwich(Suite& s, const std::vector<FixtureCase>& fixtures, std::uint64_t seed) {
  for (const auto& fx : fixtures) {
    if (fx.hmat->dim() > kSmallDimension) continue;
    const Eigenpair eig = solve_eigenpair(*fx.hmat, 0);
    if (eig.degenerate) continue;
    const NormMetric metric = build_norm_metric(*fx.hmat, eig.energy);
    const ExcitationAlgebra alg(fx.space, PhaseConvention::paper_signless);
    AnalysisOptions o;
    o.lipschitz = false;
    o.sandwich_samples = 30;
    o.sandwich_radii = {1e-3};
    o.seed = seed;
    const AnalysisReport rep = analyze(alg, *fx.hmat, eig, metric, o, fx.label);
    s.expect(rep.gamma > 0 && rep.theta > 0 && rep.alpha > 0 && rep.sigma_min_jacobian > 0,
             fx.label + ": a well-posedness constant is not positive");
    const double frac = rep.sandwich ? rep.sandwich->fraction_satisfied : 0.0;
    s.expect(frac == 1.0, fx.label + ": sandwich satisfied in fraction " + format_number(frac));
  }
}

std::vector<fs::path> collect_fixtures(const RunConfig& cfg) {
  std::vector<fs::path> roots;
  for (const auto& p : cfg.inputs) roots.push_back(resolve_input(p));
  if (roots.empty()) {
    const char* env = std::getenv("FULLCC_FIXTURES");
    roots.emplace_back(env && *env ? env : "fixtures");
  }
  std::vector<fs::path> files;
  for (const auto& r : roots) {
    if (fs::is_directory(r)) {
      for (const auto& e : fs::directory_iterator(r))
        if (e.is_regular_file() && e.path().extension() == ".fcidump") files.push_back(e.path());
    } else if (fs::is_regular_file(r)) {
      files.push_back(r);
    } else {
      throw ConfigError("fixture path not found: " + r.string());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

int cmd_check(const RunConfig& cfg, std::ostream& log) {
  std::vector<fs::path> files;
  try {
    files = collect_fixtures(cfg);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code::input_error;
  }
  if (files.empty()) {
    log << "error: no .fcidump fixtures found\n";
    return exit_code::input_error;
  }
  const bool sign_bug = cfg.inject == "sign-bug";

  std::vector<FixtureCase> fixtures;
  try {
    for (const auto& f : files) {
      RunConfig c = cfg;
      c.convention = PhaseConvention::paper_signless;
      Problem p = load_problem(f, c);
      if (p.space->size() > 2000) {
        log << "note: " << p.label << " skipped (dimension " << p.space->size() << ")\n";
        continue;
      }
      fixtures.push_back({p.label, p.ints, p.space, p.hmat, p.metadata});
    }
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return exit_code::input_error;
  }

  std::vector<SpaceCase> spaces{
      {"K6N3", std::make_shared<const DeterminantSpace>(6, 3)},
      {"K8N2", std::make_shared<const DeterminantSpace>(8, 2)},
      {"K8N4_sz0", std::make_shared<const DeterminantSpace>(8, 4, 0)}};
  for (const auto& fx : fixtures)
    spaces.push_back({fx.label, std::make_shared<const DeterminantSpace>(
                                    fx.space->spin_orbitals(), fx.space->electrons())});
  for (const auto& fx : fixtures) spaces.push_back({fx.label + "_sz", fx.space});

  std::vector<std::pair<std::string, FixtureCase>> jac_cases;
  for (auto [norb, nelec, ms2] : {std::tuple{3, 2, 0}, std::tuple{4, 2, 0}, std::tuple{4, 3, 1}}) {
    const auto ints = std::make_shared<const SpinOrbitalIntegrals>(
        random_integrals(norb, nelec, ms2, cfg.seed + static_cast<std::uint64_t>(norb * 10 + nelec)));
    auto sp = std::make_shared<const DeterminantSpace>(2 * norb, nelec);
    auto h = std::make_shared<const FciHamiltonian>(assemble(sp, *ints));
    const std::string label = "random_K" + std::to_string(2 * norb) + "N" + std::to_string(nelec);
    jac_cases.push_back({label, FixtureCase{label, ints, sp, h, {}}});
  }
  for (const auto& fx : fixtures)
    if (fx.hmat->dim() <= 250) jac_cases.push_back({fx.label, fx});

  std::vector<Suite> suites;
  auto run = [&](const std::string& name, const std::function<void(Suite&)>& body) {
    Suite s;
    s.name = name;
    try {
      body(s);
    } catch (const std::exception& e) {
      s.expect(false, std::string("exception: ") + e.what());
    }
    log << (s.passed() ? "PASS " : "FAIL ") << name << " (" << s.cases << " cases, "
        << s.failures.size() << " failures)\n";
    for (std::size_t i = 0; i < std::min<std::size_t>(s.failures.size(), 3); ++i)
      if (!s.failures[i].empty()) log << "  " << s.failures[i] << "\n";
    suites.push_back(std::move(s));
  };
  run("counting", [&](Suite& s) { run_counting(s, spaces); });
  run("adjoint", [&](Suite& s) { run_adjoint(s, spaces); });
  run("commutativity", [&](Suite& s) { run_commutativity(s, spaces, sign_bug, cfg.seed); });
  run("hamiltonian", [&](Suite& s) { run_hamiltonian(s, fixtures); });
  run("exponential", [&](Suite& s) { run_exponential(s, spaces, cfg.seed); });
  run("round_trip", [&](Suite& s) { run_round_trip(s, spaces, cfg.seed); });
  run("zero_eigenvector", [&](Suite& s) { run_zero_eigenvector(s, fixtures); });
  run("jacobian", [&](Suite& s) { run_jacobian(s, jac_cases, cfg.seed); });
  run("sandwich", [&](Suite& s) { run_sandwich(s, fixtures, cfg.seed); });

  bool all = true;
  nlohmann::json summary;
  summary["fixtures"] = nlohmann::json::array();
  for (const auto& fx : fixtures) summary["fixtures"].push_back(fx.label);
  summary["inject"] = cfg.inject.empty() ? nlohmann::json(nullptr) : nlohmann::json(cfg.inject);
  auto& arr = summary["suites"] = nlohmann::json::array();
  for (const auto& s : suites) {
    all = all && s.passed();
    arr.push_back(s.to_json());
  }
  summary["passed"] = all;
  write_atomically(cfg.out / "check_summary.json", summary.dump(1) + "\n");
  log << summary.dump() << "\n";
  return all ? exit_code::ok : exit_code::check_failed;
}

}  // namespace fullcc
