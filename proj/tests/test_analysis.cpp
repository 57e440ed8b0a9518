#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include "fullcc/analysis.hpp"
#include "fullcc/error.hpp"
#include "oracles.hpp"

using namespace fullcc;

namespace {

struct Fixture {
  std::shared_ptr<const DeterminantSpace> space;
  std::shared_ptr<const FciHamiltonian> hmat;
  ExcitationSetPtr set;
};

Fixture load(const std::string& stem) {
  const auto t = parse_fcidump(oracle::fixture(stem + ".fcidump"));
  const SpinOrbitalIntegrals so(t);
  auto sp = std::make_shared<const DeterminantSpace>(so.spin_orbitals(), t.nelec(), t.ms2());
  auto h = std::make_shared<const FciHamiltonian>(assemble(sp, so));
  return {sp, h, std::make_shared<const ExcitationSet>(sp)};
}

Fixture random_fixture(int norb, int n, std::uint64_t seed) {
  const auto t = oracle::random_table(norb, n, 0, seed);
  auto sp = std::make_shared<const DeterminantSpace>(2 * norb, n);
  auto h = std::make_shared<const FciHamiltonian>(assemble(sp, SpinOrbitalIntegrals(t)));
  return {sp, h, std::make_shared<const ExcitationSet>(sp)};
}

Eigen::VectorXd det_array(const AmplitudeVector& t) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.index_set->space().size()));
  for (std::size_t k = 0; k < t.size(); ++k)
    d[static_cast<Eigen::Index>(t.index_set->det_of(k))] = t.values[static_cast<Eigen::Index>(k)];
  return d;
}

// Rows/columns of the excitation determinants of the full set.
Eigen::MatrixXd excitation_block(const Eigen::MatrixXd& m, const ExcitationSet& set) {
  const auto n = static_cast<Eigen::Index>(set.size());
  Eigen::MatrixXd b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      b(i, j) = m(static_cast<Eigen::Index>(set.det_of(static_cast<std::size_t>(i))),
                  static_cast<Eigen::Index>(set.det_of(static_cast<std::size_t>(j))));
  return b;
}

const PhaseConvention kConventions[] = {PhaseConvention::paper_signless,
                                        PhaseConvention::second_quantized};

}  // namespace

TEST(DiagonalToy, ClosedForms) {
  const auto sp = std::make_shared<const DeterminantSpace>(8, 3);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.2, 4.0);
  Eigen::VectorXd diag(static_cast<Eigen::Index>(sp->size()));
  diag[0] = -2.0;
  for (Eigen::Index i = 1; i < diag.size(); ++i) diag[i] = -2.0 + u(rng);
  const auto h = oracle::diagonal_hamiltonian(sp, diag);
  const auto eig = solve_eigenpair(h, 0);
  const auto metric = build_norm_metric(h, eig.energy);
  const Eigen::ArrayXd g = diag.tail(diag.size() - 1).array() - diag[0];
  const double gmin = (g / (g + 1)).minCoeff(), gmax = (g / (g + 1)).maxCoeff();
  for (auto conv : kConventions) {
    const ExcitationAlgebra alg(sp, conv);
    const auto set = std::make_shared<const ExcitationSet>(sp);
    const auto tstar = ci_to_cc(alg, eig.vector, set);
    EXPECT_EQ(tstar.values.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(infsup_gamma(h, eig, metric), gmin, 1e-12);
    EXPECT_NEAR(theta(alg, tstar, metric), 1.0, 1e-12);
    EXPECT_NEAR(alpha_continuity(alg, h, tstar, eig.energy, metric), gmax, 1e-12);
    EXPECT_NEAR(sigma_min_jacobian(cc_jacobian(alg, h, tstar), metric), gmin, 1e-12);
    const auto parts = monotonicity_gamma(alg, h, tstar, eig.energy, metric, 0.7, gmin);
    EXPECT_EQ(parts.antisymmetric_norm, 0.0);
    EXPECT_DOUBLE_EQ(parts.Gamma, 0.7 * gmin);
  }
}

TEST(InfSup, RandomSymmetricAgainstLiteralForm) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::MatrixXd a(30, 30);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    Eigen::MatrixXd m = 0.2 * (a + a.transpose());
    m.diagonal() += Eigen::VectorXd::LinSpaced(30, 0.0, 6.0);
    const auto sp = std::make_shared<const DeterminantSpace>(30, 1);
    const auto h = oracle::dense_hamiltonian(sp, m);
    for (int which : {0, 2}) {
      const auto eig = solve_eigenpair(h, which);
      const auto metric = build_norm_metric(h, eig.energy, 8.0);
      const double want = oracle::gamma_literal(m, eig.energy, eig.vector, metric.weights);
      EXPECT_NEAR(infsup_gamma(h, eig, metric), want, 1e-10) << which;
    }
  }
}

TEST(InfSup, DegenerateRefused) {
  const auto sp = std::make_shared<const DeterminantSpace>(3, 1);
  Eigen::VectorXd d(3);
  d << -1.0, 0.5, 0.5;
  const auto h = oracle::diagonal_hamiltonian(sp, d);
  const auto eig = solve_eigenpair(h, 1);
  EXPECT_THROW(infsup_gamma(h, eig, build_norm_metric(h, -1.0)), DegenerateEigenpair);
  const ExcitationAlgebra alg(sp, PhaseConvention::paper_signless);
  EXPECT_THROW(analyze(alg, h, eig, build_norm_metric(h, -1.0)), DegenerateEigenpair);
}

// Every norm against an explicit dense construction on small fixtures.
TEST(DenseOracles, ConstantsOnFixtures) {
  for (const char* stem : {"h2_sto6g", "lih_sto6g"}) {
    const auto f = load(stem);
    const auto eig = solve_eigenpair(*f.hmat, 0);
    const auto metric = build_norm_metric(*f.hmat, eig.energy);
    const Eigen::MatrixXd h = f.hmat->dense();
    const auto n = h.rows();
    const Eigen::VectorXd w = metric.on(*f.set);
    for (auto conv : kConventions) {
      const ExcitationAlgebra alg(f.space, conv);
      const auto tstar = ci_to_cc(alg, eig.vector, f.set);
      const Eigen::MatrixXd tm =
          oracle::cluster_matrix(*f.space, det_array(tstar), conv == PhaseConvention::second_quantized);
      const Eigen::MatrixXd et = tm.exp(), emt = (-tm).exp();
      Eigen::MatrixXd proj_emt = emt;
      proj_emt.row(0).setZero();
      const double theta_want =
          oracle::vv_norm(et.transpose(), metric.weights) * oracle::vv_norm(proj_emt, metric.weights);
      EXPECT_NEAR(theta(alg, tstar, metric), theta_want, 1e-10 * theta_want) << stem;

      const Eigen::MatrixXd sim = emt * (h - eig.energy * Eigen::MatrixXd::Identity(n, n)) * et;
      const Eigen::MatrixXd block = excitation_block(sim, *f.set);
      const double alpha = alpha_continuity(alg, *f.hmat, tstar, eig.energy, metric);
      EXPECT_NEAR(alpha, oracle::vdual_singular_values(block, w)[0], 1e-10 * alpha) << stem;

      const auto jac = cc_jacobian(alg, *f.hmat, tstar);
      const double smin = sigma_min_jacobian(jac, metric);
      EXPECT_NEAR(smin, oracle::vdual_singular_values(jac.matrix, w).minCoeff(), 1e-10) << stem;
      EXPECT_GE(alpha, smin);

      const auto parts = monotonicity_gamma(alg, *f.hmat, tstar, eig.energy, metric, 1.0, 0.3);
      EXPECT_NEAR(parts.antisymmetric_norm, oracle::vv_norm(tm - tm.transpose(), metric.weights),
                  1e-10);
      EXPECT_NEAR(parts.hamiltonian_norm,
                  oracle::vdual_singular_values(h - eig.energy * Eigen::MatrixXd::Identity(n, n),
                                                metric.weights)[0],
                  1e-10 * parts.hamiltonian_norm);
      EXPECT_NEAR(parts.Gamma, 0.3 - parts.antisymmetric_norm * parts.hamiltonian_norm, 1e-14);
    }
  }
}

TEST(Iterative, MatchesDenseBelowFiveHundred) {
  const auto f = load("lih_sto6g");
  ASSERT_LE(f.space->size(), 500u);
  IterOptions iter;
  iter.tol = 1e-12;
  // ground state and the first excited state with a reference component
  int excited = 1;
  while (std::abs(solve_eigenpair(*f.hmat, excited).vector[0]) < 1e-3) ++excited;
  for (int which : {0, excited}) {
    const auto eig = solve_eigenpair(*f.hmat, which);
    const auto metric = build_norm_metric(*f.hmat, eig.energy);
    const ExcitationAlgebra alg(f.space, PhaseConvention::second_quantized);
    const auto tstar = ci_to_cc(alg, eig.vector, f.set);
    const double g_dense = infsup_gamma(*f.hmat, eig, metric);
    const double g_iter = infsup_gamma(*f.hmat, eig, metric, 10, iter);
    EXPECT_NEAR(g_iter, g_dense, 1e-8) << which;
    EXPECT_NEAR(theta(alg, tstar, metric, 10, iter), theta(alg, tstar, metric), 1e-8) << which;
    EXPECT_NEAR(alpha_continuity(alg, *f.hmat, tstar, eig.energy, metric, 10, iter),
                alpha_continuity(alg, *f.hmat, tstar, eig.energy, metric), 1e-8)
        << which;
    EXPECT_NEAR(sigma_min_jacobian(jacobian_operator(alg, *f.hmat, tstar), metric.on(*f.set), iter),
                sigma_min_jacobian(cc_jacobian(alg, *f.hmat, tstar), metric), 1e-8)
        << which;
    const auto pd = monotonicity_gamma(alg, *f.hmat, tstar, eig.energy, metric, 1.0, g_dense);
    const auto pi = monotonicity_gamma(alg, *f.hmat, tstar, eig.energy, metric, 1.0, g_dense, 10, iter);
    EXPECT_NEAR(pi.antisymmetric_norm, pd.antisymmetric_norm, 1e-8);
    EXPECT_NEAR(pi.hamiltonian_norm, pd.hamiltonian_norm, 1e-8 * pd.hamiltonian_norm);
  }
}

TEST(Positivity, SimpleGroundStates) {
  for (const char* stem : {"h2_sto6g", "lih_sto6g", "hf_sto6g"}) {
    const auto f = load(stem);
    const auto eig = solve_eigenpair(*f.hmat, 0);
    const auto metric = build_norm_metric(*f.hmat, eig.energy);
    const ExcitationAlgebra alg(f.space, PhaseConvention::paper_signless);
    AnalysisOptions o;
    o.sandwich_samples = 10;
    o.lipschitz_samples = 2;
    const auto rep = analyze(alg, *f.hmat, eig, metric, o, stem);
    EXPECT_GT(rep.gamma, 0.0) << stem;
    EXPECT_GT(rep.theta, 0.0) << stem;
    EXPECT_GT(rep.alpha, 0.0) << stem;
    EXPECT_GT(rep.sigma_min_jacobian, 0.0) << stem;
    EXPECT_LE(rep.residual_at_tstar, 1e-9) << stem;
    EXPECT_DOUBLE_EQ(rep.gamma_over_theta, rep.gamma / rep.theta);
    EXPECT_EQ(rep.sigma_min_below_gamma_over_theta, rep.sigma_min_jacobian < rep.gamma_over_theta);
  }
}

// D -> cD: Theta is invariant, while gamma, alpha and sigma_min carry 1/c.
TEST(Scaling, MetricScaleCovariance) {
  const auto f = load("lih_sto6g");
  const auto eig = solve_eigenpair(*f.hmat, 0);
  const auto metric = build_norm_metric(*f.hmat, eig.energy);
  const ExcitationAlgebra alg(f.space, PhaseConvention::second_quantized);
  const auto tstar = ci_to_cc(alg, eig.vector, f.set);
  const auto jac = cc_jacobian(alg, *f.hmat, tstar);
  const double g = infsup_gamma(*f.hmat, eig, metric), th = theta(alg, tstar, metric),
               a = alpha_continuity(alg, *f.hmat, tstar, eig.energy, metric),
               s = sigma_min_jacobian(jac, metric);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int k = 0; k < 3; ++k) {
    const double c = u(rng);
    const auto m = metric.scaled(c);
    EXPECT_NEAR(theta(alg, tstar, m), th, 1e-10 * th);
    EXPECT_NEAR(c * infsup_gamma(*f.hmat, eig, m), g, 1e-10 * g);
    EXPECT_NEAR(c * alpha_continuity(alg, *f.hmat, tstar, eig.energy, m), a, 1e-10 * a);
    EXPECT_NEAR(c * sigma_min_jacobian(jac, m), s, 1e-10 * s);
  }
}

TEST(SpectralGap, TwoLevelAndRange) {
  const double a = -1.0, b = 0.6, c = 0.25;
  Eigen::MatrixXd m(2, 2);
  m << a, c, c, b;
  const auto h = oracle::dense_hamiltonian(std::make_shared<const DeterminantSpace>(2, 1), m);
  const auto eig = solve_eigenpair(h, 0);
  const auto bound = spectral_gap_bound(eig, 1, 1.0);
  EXPECT_NEAR(bound.lambda_star, 2 * std::sqrt((a - b) * (a - b) / 4 + c * c), 1e-14);
  EXPECT_DOUBLE_EQ(bound.continuity_bound, 3.5);
  EXPECT_DOUBLE_EQ(bound.ellipticity_offset, 8.75);
  EXPECT_DOUBLE_EQ(bound.q, bound.lambda_star / (bound.lambda_star + 9.0 - eig.energy - 0.25));
  for (const char* stem : {"h2_sto6g", "lih_sto6g", "hf_sto6g"}) {
    const auto f = load(stem);
    const auto e = solve_eigenpair(*f.hmat, 0);
    const int n = f.space->electrons();
    const auto q = spectral_gap_bound(e, n, n).q;
    EXPECT_GT(q, 0.0) << stem;
    EXPECT_LT(q, 1.0) << stem;
  }
}

TEST(Lipschitz, ZeroHamiltonian) {
  const auto sp = std::make_shared<const DeterminantSpace>(6, 2);
  const auto h = oracle::diagonal_hamiltonian(sp, Eigen::VectorXd::Zero(15));
  const auto set = std::make_shared<const ExcitationSet>(sp);
  const ExcitationAlgebra alg(sp, PhaseConvention::second_quantized);
  const auto metric = metric_from_weights(Eigen::VectorXd::Ones(15));
  for (const auto& s : lipschitz_estimate(alg, h, AmplitudeVector::zero(set), metric,
                                          {1e-3, 1e-1}, 4, 42))
    EXPECT_EQ(s.estimate, 0.0);
}

TEST(Lipschitz, OneElectronAffineJacobian) {
  // f(t) = c + (b - a) t - c t^2, so J(s) - J(t) = -2c (s - t) and the
  // V -> V* quotient is 2|c| / D^{3/2} for every radius.
  const double a = -1.0, b = 0.4, c = 0.3;
  Eigen::MatrixXd m(2, 2);
  m << a, c, c, b;
  const auto sp = std::make_shared<const DeterminantSpace>(2, 1);
  const auto h = oracle::dense_hamiltonian(sp, m);
  const auto eig = solve_eigenpair(h, 0);
  const auto metric = build_norm_metric(h, eig.energy);
  const ExcitationAlgebra alg(sp, PhaseConvention::paper_signless);
  const auto tstar = ci_to_cc(alg, eig.vector, std::make_shared<const ExcitationSet>(sp));
  const double d = metric.weights[1];
  for (const auto& s : lipschitz_estimate(alg, h, tstar, metric, {1e-4, 1e-2, 1e-1}, 3, 1))
    EXPECT_NEAR(s.estimate, 2 * c / std::pow(d, 1.5), 1e-8) << s.delta;
}

TEST(Locality, HandComputation) {
  std::vector<LipschitzSample> none{{1e-3, 0.0}, {1e-1, 0.0}};
  EXPECT_EQ(locality_radius(0.3, 1.2, 0.9, none), 1e-1);
  std::vector<LipschitzSample> s{{0.01, 2.0}, {0.1, 5.0}, {0.5, 40.0}};
  // per delta: min{0.01, 0.125, 0.9}, min{0.1, 0.05, 0.36}, min{0.5, 0.00625, 0.045}
  EXPECT_DOUBLE_EQ(locality_radius(0.3, 1.2, 0.9, s), 0.05);
  EXPECT_LE(locality_radius(0.2, 1.2, 0.9, s), locality_radius(0.3, 1.2, 0.9, s));
}

TEST(Sandwich, ZeroRadiusAndBounds) {
  const auto f = load("h2_sto6g");
  const auto eig = solve_eigenpair(*f.hmat, 0);
  const auto metric = build_norm_metric(*f.hmat, eig.energy);
  const ExcitationAlgebra alg(f.space, PhaseConvention::paper_signless);
  const auto tstar = ci_to_cc(alg, eig.vector, f.set);
  const double g = infsup_gamma(*f.hmat, eig, metric), th = theta(alg, tstar, metric),
               a = alpha_continuity(alg, *f.hmat, tstar, eig.energy, metric);
  const auto zero = verify_sandwich(alg, *f.hmat, tstar, metric, a, g, th, {0.0}, 3, 42);
  for (const auto& r : zero.rows) {
    EXPECT_EQ(r.actual, 0.0);
    EXPECT_LE(r.lower, 1e-12);
    EXPECT_LE(r.upper, 1e-12);
  }
  const auto table = verify_sandwich(alg, *f.hmat, tstar, metric, a, g, th, {1e-4, 1e-3}, 50, 7);
  EXPECT_EQ(table.rows.size(), 100u);
  EXPECT_EQ(table.fraction_satisfied, 1.0);
  EXPECT_EQ(table.fraction_at(1e-3), 1.0);
  for (const auto& r : table.rows) {
    EXPECT_NEAR(r.actual, r.radius, 1e-12 * r.radius);
    EXPECT_LE(r.lower, r.actual);
    EXPECT_LE(r.actual, r.upper);
  }
}

TEST(Sampling, ExactRadiusAndDeterminism) {
  const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(20, 0.5, 3.0);
  const auto p = sample_perturbation(w, 0.25, 42, 3);
  EXPECT_NEAR(vnorm(p, w), 0.25, 1e-15);
  EXPECT_EQ(p, sample_perturbation(w, 0.25, 42, 3));
  EXPECT_NE(p, sample_perturbation(w, 0.25, 42, 4));
}

TEST(Report, JsonAndCsvRows) {
  const auto f = random_fixture(3, 2, 4);
  const auto eig = solve_eigenpair(*f.hmat, 0);
  const auto metric = build_norm_metric(*f.hmat, eig.energy);
  const ExcitationAlgebra alg(f.space, PhaseConvention::second_quantized);
  AnalysisOptions o;
  o.sandwich_samples = 5;
  o.lipschitz_samples = 2;
  auto rep = analyze(alg, *f.hmat, eig, metric, o, "toy");
  rep.hf_error = 0.01;
  const auto j = rep.to_json();
  for (const char* key : {"gamma", "theta", "alpha", "sigma_min_jacobian", "gamma_over_theta",
                          "monotonicity_gamma", "omega_used", "t_norm", "spectral_gap", "radius",
                          "continuity_bound", "ellipticity_offset"})
    EXPECT_TRUE(std::isfinite(j.at(key).get<double>())) << key;
  EXPECT_TRUE(j["ccsd_error"].is_null());
  EXPECT_EQ(j["lipschitz"].size(), o.delta_grid.size());
  EXPECT_EQ(j["sandwich"]["rows"].size(), 10u);
  const auto row = rep.csv_row();
  ASSERT_EQ(row.size(), AnalysisReport::csv_columns().size());
  EXPECT_EQ(row.front(), "toy");
  EXPECT_EQ(row.back(), "");
  EXPECT_EQ(std::stod(row[1]), rep.gamma);
  EXPECT_THROW(format_number(std::nan("")), InternalError);
}
