#include "fullcc/cc_equations.hpp"

#include <algorithm>
#include <cmath>

namespace fullcc {

namespace {

Eigen::VectorXd to_det(const ExcitationSet& set, const Eigen::VectorXd& x, std::size_t dim) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < set.size(); ++k) out[set.det_of(k)] = x[k];
  return out;
}

Eigen::VectorXd from_det(const ExcitationSet& set, const Eigen::VectorXd& y) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) out[k] = y[set.det_of(k)];
  return out;
}

Eigen::VectorXd reference_vector(std::size_t dim) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  e[0] = 1.0;
  return e;
}

void check_space(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                 const AmplitudeVector& t) {
  if (hmat.dim() != alg.dim())
    throw DimensionMismatch("Hamiltonian and excitation algebra have different dimensions");
  if (t.index_set->space().size() != alg.dim())
    throw DimensionMismatch("amplitudes live on a different determinant space");
}

}  // namespace

CcResidual cc_residual(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                       const AmplitudeVector& t) {
  check_space(alg, hmat, t);
  const Eigen::VectorXd tdet = alg.scatter(t);
  const Eigen::VectorXd psi = alg.exp_apply(tdet, reference_vector(alg.dim()), 1);
  CcResidual r;
  r.aux = alg.exp_apply(tdet, hmat.apply(psi), -1);
  r.energy = r.aux[0];
  const Eigen::VectorXd signed_aux = r.aux.cwiseProduct(alg.ref_phases());
  r.f = AmplitudeVector(t.index_set, from_det(*t.index_set, signed_aux), true);
  return r;
}

CcJacobian cc_jacobian(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                       const AmplitudeVector& t) {
  check_space(alg, hmat, t);
  const ExcitationSet& set = *t.index_set;
  const Eigen::VectorXd tdet = alg.scatter(t);
  const Eigen::VectorXd psi = alg.exp_apply(tdet, reference_vector(alg.dim()), 1);
  const Eigen::VectorXd aux = alg.exp_apply(tdet, hmat.apply(psi), -1);
  const auto n = static_cast<Eigen::Index>(set.size());
  CcJacobian j{Eigen::MatrixXd(n, n), t};
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(alg.dim()));
  for (Eigen::Index c = 0; c < n; ++c) {
    const std::size_t m = set.det_of(c);
    u[m] = alg.ref_phase(m);
    Eigen::VectorXd col = alg.exp_apply(tdet, hmat.apply(alg.exp_apply(tdet, u, 1)), -1);
    col -= alg.apply_single(m, aux);
    u[m] = 0.0;
    j.matrix.col(c) = from_det(set, col.cwiseProduct(alg.ref_phases()));
  }
  return j;
}

LinearOperator jacobian_operator(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                 const AmplitudeVector& t) {
  check_space(alg, hmat, t);
  auto set = t.index_set;
  const Eigen::VectorXd tdet = alg.scatter(t);
  const Eigen::VectorXd psi = alg.exp_apply(tdet, reference_vector(alg.dim()), 1);
  const Eigen::VectorXd aux = alg.exp_apply(tdet, hmat.apply(psi), -1);
  const ExcitationAlgebra* a = &alg;
  const FciHamiltonian* h = &hmat;
  LinearOperator op;
  op.rows = op.cols = static_cast<Eigen::Index>(set->size());
  op.apply = [a, h, set, tdet, aux](const Eigen::VectorXd& s) -> Eigen::VectorXd {
    const Eigen::VectorXd sdet = to_det(*set, s, a->dim());
    const Eigen::VectorXd u = sdet.cwiseProduct(a->ref_phases());
    Eigen::VectorXd y = a->exp_apply(tdet, h->apply(a->exp_apply(tdet, u, 1)), -1);
    y -= a->apply(sdet, aux);
    return from_det(*set, y.cwiseProduct(a->ref_phases()));
  };
  op.apply_transpose = [a, h, set, tdet, aux](const Eigen::VectorXd& w) -> Eigen::VectorXd {
    const Eigen::VectorXd wdet = to_det(*set, w, a->dim()).cwiseProduct(a->ref_phases());
    Eigen::VectorXd y =
        a->exp_adjoint_apply(tdet, h->apply(a->exp_adjoint_apply(tdet, wdet, -1)), 1);
    y = y.cwiseProduct(a->ref_phases());
    y -= a->pair_with_excited(aux, wdet);
    return from_det(*set, y);
  };
  return op;
}

LinearOperator similarity_block_operator(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                         const AmplitudeVector& t, double e_star) {
  check_space(alg, hmat, t);
  auto set = t.index_set;
  const Eigen::VectorXd tdet = alg.scatter(t);
  const ExcitationAlgebra* a = &alg;
  const FciHamiltonian* h = &hmat;
  LinearOperator op;
  op.rows = op.cols = static_cast<Eigen::Index>(set->size());
  op.apply = [a, h, set, tdet, e_star](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd u = to_det(*set, x, a->dim()).cwiseProduct(a->ref_phases());
    const Eigen::VectorXd v = a->exp_apply(tdet, u, 1);
    const Eigen::VectorXd y = a->exp_apply(tdet, h->apply(v) - e_star * v, -1);
    return from_det(*set, y.cwiseProduct(a->ref_phases()));
  };
  op.apply_transpose = [a, h, set, tdet, e_star](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd u = to_det(*set, x, a->dim()).cwiseProduct(a->ref_phases());
    const Eigen::VectorXd v = a->exp_adjoint_apply(tdet, u, -1);
    const Eigen::VectorXd y = a->exp_adjoint_apply(tdet, h->apply(v) - e_star * v, 1);
    return from_det(*set, y.cwiseProduct(a->ref_phases()));
  };
  return op;
}

Eigen::MatrixXd similarity_block(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                 const AmplitudeVector& t, double e_star) {
  return materialize(similarity_block_operator(alg, hmat, t, e_star));
}

nlohmann::json SolverTrace::to_json() const {
  nlohmann::json j;
  j["mode"] = mode;
  j["converged"] = converged;
  j["monotone"] = monotone;
  auto& its = j["iterations"] = nlohmann::json::array();
  for (const auto& s : iterations)
    its.push_back({{"iteration", s.iteration},
                   {"residual_dual_norm", s.residual},
                   {"energy", s.energy},
                   {"step_norm", s.step_norm},
                   {"damping", s.damping},
                   {"inner_iterations", s.inner_iterations}});
  if (final.index_set) j["final"] = fullcc::to_json(final);
  return j;
}

JacobianMode parse_jacobian_mode(const std::string& s) {
  if (s == "auto") return JacobianMode::automatic;
  if (s == "dense") return JacobianMode::dense;
  if (s == "krylov") return JacobianMode::krylov;
  if (s == "diagonal" || s == "none") return JacobianMode::diagonal;
  throw ConfigError("unknown jacobian mode '" + s + "' (auto, dense, krylov, diagonal)");
}

NewtonResult newton_solve(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                          const AmplitudeVector& t0, const NormMetric& metric,
                          const NewtonOptions& opts) {
  const ExcitationSet& set = *t0.index_set;
  const Eigen::VectorXd d = metric.on(set);
  JacobianMode mode = opts.mode;
  if (mode == JacobianMode::automatic)
    mode = set.size() <= opts.dense_limit ? JacobianMode::dense : JacobianMode::krylov;

  NewtonResult out{t0, SolverTrace{}, cc_residual(alg, hmat, t0)};
  SolverTrace& trace = out.trace;
  trace.mode = mode == JacobianMode::dense    ? "newton-dense"
               : mode == JacobianMode::krylov ? "newton-krylov"
                                              : "quasi-newton-diagonal";
  double rn = dual_norm(out.residual.f.values, d);
  trace.iterations.push_back({0, rn, out.residual.energy, 0.0, 1.0, 0});

  for (int it = 1; it <= opts.max_iter && !(rn <= opts.tol); ++it) {
    const Eigen::VectorXd& f = out.residual.f.values;
    Eigen::VectorXd step;
    int inner = 0;
    if (mode == JacobianMode::dense) {
      const CcJacobian jac = cc_jacobian(alg, hmat, out.t);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac.matrix);
      const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
      double rcond = piv.size() && piv.maxCoeff() > 0.0 ? piv.minCoeff() / piv.maxCoeff() : 0.0;
      rcond = std::min(rcond, lu.rcond());
      if (!(rcond > 1.0 / opts.condition_limit))
        throw NearSingular("Jacobian condition estimate " + std::to_string(1.0 / rcond) +
                           " exceeds " + std::to_string(opts.condition_limit));
      step = lu.solve(-f);
    } else if (mode == JacobianMode::krylov) {
      const LinearOperator jop = jacobian_operator(alg, hmat, out.t);
      const double forcing = std::max(std::min(1e-3, rn), 1e-13);
      auto pc = [&d](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.cwiseQuotient(d); };
      auto g = gmres(jop, -f, forcing, opts.krylov_restart, opts.krylov_max_iter, pc);
      step = g.x;
      inner = g.iterations;
    } else {
      step = -f.cwiseQuotient(d);
    }

    double lambda = 1.0;
    bool accepted = false;
    AmplitudeVector trial;
    CcResidual trial_res;
    double trial_rn = 0.0;
    for (int h = 0; h <= opts.max_halvings; ++h, lambda *= 0.5) {
      trial = AmplitudeVector(out.t.index_set, out.t.values + lambda * step);
      trial_res = cc_residual(alg, hmat, trial);
      trial_rn = dual_norm(trial_res.f.values, d);
      if (trial_rn < rn) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      trace.monotone = false;
      lambda *= 2.0;  // smallest step tried
    }
    trace.iterations.push_back(
        {it, trial_rn, trial_res.energy, vnorm(Eigen::VectorXd(lambda * step), d), lambda, inner});
    out.t = std::move(trial);
    out.residual = std::move(trial_res);
    rn = trial_rn;
  }
  trace.converged = rn <= opts.tol;
  trace.final = out.t;
  if (!trace.converged)
    throw NonConvergence("Newton did not reach residual " + std::to_string(opts.tol) + " in " +
                             std::to_string(opts.max_iter) + " iterations (last " +
                             std::to_string(rn) + ")",
                         trace);
  return out;
}

AmplitudeVector mp_seed(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                        ExcitationSetPtr active, const NormMetric& metric) {
  const AmplitudeVector zero = AmplitudeVector::zero(active);
  const CcResidual r = cc_residual(alg, hmat, zero);
  return AmplitudeVector(active, -r.f.values.cwiseQuotient(metric.on(*active)));
}

}  // namespace fullcc
