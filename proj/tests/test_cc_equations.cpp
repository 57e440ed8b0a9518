#include <gtest/gtest.h>

#include "fullcc/cc_equations.hpp"
#include "fullcc/error.hpp"
#include "oracles.hpp"

using namespace fullcc;

namespace {

struct System {
  std::shared_ptr<const DeterminantSpace> space;
  std::shared_ptr<const FciHamiltonian> hmat;
  ExcitationSetPtr set;
};

System random_system(int norb, int n, std::uint64_t seed) {
  const auto t = oracle::random_table(norb, n, 0, seed);
  auto sp = std::make_shared<const DeterminantSpace>(2 * norb, n);
  auto h = std::make_shared<const FciHamiltonian>(assemble(sp, SpinOrbitalIntegrals(t)));
  return {sp, h, std::make_shared<const ExcitationSet>(sp)};
}

System fixture_system(const std::string& stem) {
  const auto t = parse_fcidump(oracle::fixture(stem + ".fcidump"));
  const SpinOrbitalIntegrals so(t);
  auto sp = std::make_shared<const DeterminantSpace>(so.spin_orbitals(), t.nelec(), t.ms2());
  auto h = std::make_shared<const FciHamiltonian>(assemble(sp, so));
  return {sp, h, std::make_shared<const ExcitationSet>(sp)};
}

Eigen::VectorXd det_array(const AmplitudeVector& t) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.index_set->space().size()));
  for (std::size_t k = 0; k < t.size(); ++k)
    d[static_cast<Eigen::Index>(t.index_set->det_of(k))] = t.values[static_cast<Eigen::Index>(k)];
  return d;
}

AmplitudeVector random_point(ExcitationSetPtr set, std::mt19937_64& rng, double norm) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(set->size()));
  for (auto& x : v) x = g(rng);
  return AmplitudeVector(set, norm * v / v.norm());
}

const PhaseConvention kConventions[] = {PhaseConvention::paper_signless,
                                        PhaseConvention::second_quantized};

}  // namespace

TEST(Residual, AtZero) {
  const auto s = random_system(3, 2, 1);
  for (auto conv : kConventions) {
    const ExcitationAlgebra alg(s.space, conv);
    const auto r = cc_residual(alg, *s.hmat, AmplitudeVector::zero(s.set));
    const Eigen::MatrixXd h = s.hmat->dense();
    EXPECT_DOUBLE_EQ(r.energy, h(0, 0));
    EXPECT_DOUBLE_EQ(r.energy, hf_energy(*s.hmat) - s.hmat->e_core);
    EXPECT_TRUE(r.f.dual);
    for (std::size_t k = 0; k < s.set->size(); ++k) {
      const auto d = static_cast<Eigen::Index>(s.set->det_of(k));
      EXPECT_DOUBLE_EQ(r.f.values[static_cast<Eigen::Index>(k)], alg.ref_phase(d) * h(d, 0));
    }
  }
}

TEST(Residual, DenseSimilarityOracle) {
  const auto s = random_system(3, 3, 2);
  std::mt19937_64 rng(3);
  for (auto conv : kConventions) {
    const ExcitationAlgebra alg(s.space, conv);
    const bool signed_ = conv == PhaseConvention::second_quantized;
    const auto t = random_point(s.set, rng, 0.7);
    const Eigen::MatrixXd tm = oracle::cluster_matrix(*s.space, det_array(t), signed_);
    const Eigen::MatrixXd sim = (-tm).exp() * s.hmat->dense() * tm.exp();
    const auto r = cc_residual(alg, *s.hmat, t);
    EXPECT_NEAR(r.energy, sim(0, 0), 1e-12);
    for (std::size_t k = 0; k < s.set->size(); ++k) {
      const auto d = static_cast<Eigen::Index>(s.set->det_of(k));
      // f_mu = <X_mu Psi0, e^{-T} H e^{T} Psi0>
      const Eigen::MatrixXd x = oracle::excitation_matrix(*s.space, (*s.set)[k].holes,
                                                          (*s.set)[k].particles, signed_);
      EXPECT_NEAR(r.f.values[static_cast<Eigen::Index>(k)], x.col(0).dot(sim.col(0)), 1e-12);
      EXPECT_NEAR(r.aux[d], sim(d, 0), 1e-12);
    }
  }
}

TEST(Residual, EigenvectorIsZero) {
  for (const char* stem : {"h2_sto6g", "lih_sto6g", "hf_sto6g"}) {
    const auto s = fixture_system(stem);
    const auto eig = solve_eigenpair(*s.hmat, 0);
    const auto metric = build_norm_metric(*s.hmat, eig.energy);
    for (auto conv : kConventions) {
      const ExcitationAlgebra alg(s.space, conv);
      const auto r = cc_residual(alg, *s.hmat, ci_to_cc(alg, eig.vector, s.set));
      EXPECT_LE(dual_norm(r.f, metric), 1e-9) << stem;
      EXPECT_NEAR(r.energy, eig.energy, 1e-9) << stem;
    }
  }
}

TEST(Residual, SpaceMismatch) {
  const auto a = random_system(3, 2, 1);
  const auto b = random_system(3, 3, 1);
  const ExcitationAlgebra alg(a.space, PhaseConvention::paper_signless);
  EXPECT_THROW(cc_residual(alg, *a.hmat, AmplitudeVector::zero(b.set)), DimensionMismatch);
}

TEST(Jacobian, FiniteDifferences) {
  const auto s = random_system(3, 2, 4);
  std::mt19937_64 rng(5);
  for (auto conv : kConventions) {
    const ExcitationAlgebra alg(s.space, conv);
    for (int trial = 0; trial < 5; ++trial) {
      const auto t = random_point(s.set, rng, 1.0);
      const Eigen::MatrixXd j = cc_jacobian(alg, *s.hmat, t).matrix;
      const double h = 1e-5;
      double worst = 0.0;
      for (Eigen::Index c = 0; c < j.cols(); ++c) {
        Eigen::VectorXd p = t.values, m = t.values;
        p[c] += h;
        m[c] -= h;
        const Eigen::VectorXd fd = (cc_residual(alg, *s.hmat, AmplitudeVector(s.set, p)).f.values -
                                    cc_residual(alg, *s.hmat, AmplitudeVector(s.set, m)).f.values) /
                                   (2 * h);
        worst = std::max(worst, (fd - j.col(c)).cwiseAbs().maxCoeff());
      }
      EXPECT_LE(worst / std::max(1.0, j.cwiseAbs().maxCoeff()), 1e-6);
    }
  }
}

TEST(Jacobian, OperatorMatchesDense) {
  const auto s = random_system(4, 3, 6);
  std::mt19937_64 rng(7);
  for (auto conv : kConventions) {
    const ExcitationAlgebra alg(s.space, conv);
    const auto t = random_point(s.set, rng, 0.5);
    const Eigen::MatrixXd j = cc_jacobian(alg, *s.hmat, t).matrix;
    const auto op = jacobian_operator(alg, *s.hmat, t);
    EXPECT_LE((materialize(op) - j).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((materialize(op.transposed()) - j.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Jacobian, AtZeroEqualsSimilarityBlock) {
  for (const char* stem : {"lih_sto6g", "hf_sto6g"}) {
    const auto s = fixture_system(stem);
    const auto eig = solve_eigenpair(*s.hmat, 0);
    for (auto conv : kConventions) {
      const ExcitationAlgebra alg(s.space, conv);
      const auto tstar = ci_to_cc(alg, eig.vector, s.set);
      const Eigen::MatrixXd j = cc_jacobian(alg, *s.hmat, tstar).matrix;
      const Eigen::MatrixXd b = similarity_block(alg, *s.hmat, tstar, eig.energy);
      EXPECT_LE((j - b).cwiseAbs().maxCoeff(), 1e-8) << stem;
    }
  }
}

TEST(Jacobian, DiagonalHamiltonianAtZero) {
  const auto sp = std::make_shared<const DeterminantSpace>(6, 2);
  Eigen::VectorXd d = Eigen::VectorXd::LinSpaced(15, -1.0, 2.0);
  const auto h = oracle::diagonal_hamiltonian(sp, d);
  const auto set = std::make_shared<const ExcitationSet>(sp);
  for (auto conv : kConventions) {
    const ExcitationAlgebra alg(sp, conv);
    const Eigen::MatrixXd j = cc_jacobian(alg, h, AmplitudeVector::zero(set)).matrix;
    Eigen::MatrixXd want = Eigen::MatrixXd::Zero(j.rows(), j.cols());
    for (std::size_t k = 0; k < set->size(); ++k)
      want(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) =
          d[static_cast<Eigen::Index>(set->det_of(k))] - d[0];
    EXPECT_LE((j - want).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Newton, TwoLevelClosedForm) {
  const double a = -1.1, b = 0.4, c = 0.3;
  Eigen::MatrixXd m(2, 2);
  m << a, c, c, b;
  const auto sp = std::make_shared<const DeterminantSpace>(2, 1);
  const auto h = oracle::dense_hamiltonian(sp, m);
  const auto set = std::make_shared<const ExcitationSet>(sp);
  // f(t) = c + (b - a) t - c t^2
  const double root = ((b - a) - std::sqrt((b - a) * (b - a) + 4 * c * c)) / (2 * c);
  const ExcitationAlgebra alg(sp, PhaseConvention::paper_signless);
  const auto metric = build_norm_metric(h, solve_eigenpair(h, 0).energy);
  NewtonOptions o;
  o.tol = 1e-14;
  const auto res = newton_solve(alg, h, AmplitudeVector::zero(set), metric, o);
  EXPECT_NEAR(res.t.values[0], root, 1e-12);
  EXPECT_NEAR(res.residual.energy, a + c * root, 1e-12);
}

TEST(Newton, FullCcReproducesFciAndBack) {
  for (const char* stem : {"h2_sto6g", "lih_sto6g", "hf_sto6g"}) {
    const auto s = fixture_system(stem);
    const auto eig = solve_eigenpair(*s.hmat, 0);
    const auto metric = build_norm_metric(*s.hmat, eig.energy);
    for (auto conv : kConventions) {
      const ExcitationAlgebra alg(s.space, conv);
      const auto res = newton_solve(alg, *s.hmat, AmplitudeVector::zero(s.set), metric);
      EXPECT_TRUE(res.trace.converged);
      EXPECT_LE(res.trace.iterations.back().residual, 1e-10);
      EXPECT_NEAR(res.residual.energy, eig.energy, 1e-9) << stem;
      const Eigen::VectorXd psi = cc_to_ci(alg, res.t);
      const double rq = psi.dot(s.hmat->apply(psi)) / psi.squaredNorm();
      EXPECT_LE((s.hmat->apply(psi) - rq * psi).norm() / psi.norm(), 1e-8) << stem;
      for (std::size_t i = 1; i < res.trace.iterations.size(); ++i)
        if (res.trace.monotone)
          EXPECT_LT(res.trace.iterations[i].residual, res.trace.iterations[i - 1].residual);
    }
  }
}

TEST(Newton, ModesAgree) {
  const auto s = fixture_system("lih_sto6g");
  const auto eig = solve_eigenpair(*s.hmat, 0);
  const auto metric = build_norm_metric(*s.hmat, eig.energy);
  const ExcitationAlgebra alg(s.space, PhaseConvention::second_quantized);
  for (auto mode : {JacobianMode::dense, JacobianMode::krylov, JacobianMode::diagonal}) {
    NewtonOptions o;
    o.mode = mode;
    o.max_iter = 400;
    const auto res = newton_solve(alg, *s.hmat, mp_seed(alg, *s.hmat, s.set, metric), metric, o);
    EXPECT_NEAR(res.residual.energy, eig.energy, 1e-9);
  }
}

TEST(Newton, TruncatedAndNonConvergence) {
  const auto s = fixture_system("lih_sto6g");
  const auto eig = solve_eigenpair(*s.hmat, 0);
  const auto metric = build_norm_metric(*s.hmat, eig.energy);
  const ExcitationAlgebra alg(s.space, PhaseConvention::second_quantized);
  const auto sd = std::make_shared<const ExcitationSet>(s.space, 2);
  const auto res = newton_solve(alg, *s.hmat, AmplitudeVector::zero(sd), metric);
  EXPECT_GT(res.residual.energy, eig.energy - 1e-3);
  EXPECT_LT(std::abs(res.residual.energy - eig.energy), hf_energy(*s.hmat) - eig.total_energy());
  NewtonOptions o;
  o.max_iter = 1;
  try {
    newton_solve(alg, *s.hmat, AmplitudeVector::zero(sd), metric, o);
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.trace().iterations.size(), 2u);
    EXPECT_FALSE(e.trace().converged);
    EXPECT_TRUE(e.trace().to_json().contains("iterations"));
  }
}

TEST(Newton, SingularJacobianDetected) {
  // Psi0 couples only to {1,2}; {0,3} is degenerate with Psi0 and unreachable
  // from {1,2}, so its Jacobian row vanishes at t = 0.
  const auto sp = std::make_shared<const DeterminantSpace>(4, 2);
  const auto idx = [&](std::vector<int> occ) {
    return static_cast<Eigen::Index>(*sp->index_of(Determinant::from_orbitals(occ)));
  };
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(6, 6);
  m(0, 0) = 0.0;
  m(idx({0, 3}), idx({0, 3})) = 0.0;
  m(0, idx({1, 2})) = m(idx({1, 2}), 0) = 0.2;
  const auto h = oracle::dense_hamiltonian(sp, m);
  const auto set = std::make_shared<const ExcitationSet>(sp);
  const ExcitationAlgebra alg(sp, PhaseConvention::second_quantized);
  const auto metric = metric_from_weights(Eigen::VectorXd::Ones(6));
  NewtonOptions o;
  o.mode = JacobianMode::dense;
  EXPECT_THROW(newton_solve(alg, h, AmplitudeVector::zero(set), metric, o), NearSingular);
}
