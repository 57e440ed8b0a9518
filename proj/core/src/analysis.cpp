#include "fullcc/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "fullcc/error.hpp"

namespace fullcc {

namespace {

Eigen::VectorXd inv_sqrt(const Eigen::VectorXd& d) { return d.array().rsqrt(); }
Eigen::VectorXd sqrt_of(const Eigen::VectorXd& d) { return d.array().sqrt(); }

// Operator norm V -> V of a full-space operator: sigma_max(D^{1/2} M D^{-1/2}).
double primal_norm(const LinearOperator& m, const Eigen::VectorXd& w, std::size_t dense_limit,
                   const IterOptions& iter) {
  const LinearOperator s = diag_scaled(m, sqrt_of(w), inv_sqrt(w));
  if (static_cast<std::size_t>(m.rows) <= dense_limit) return dense_max_sv(materialize(s));
  return largest_singular_value(s, iter);
}

// Operator norm V -> V*: sigma_max(D^{-1/2} A D^{-1/2}).
double dual_map_norm(const LinearOperator& a, const Eigen::VectorXd& w, std::size_t dense_limit,
                     const IterOptions& iter) {
  const LinearOperator s = diag_scaled(a, inv_sqrt(w), inv_sqrt(w));
  if (static_cast<std::size_t>(a.rows) <= dense_limit) return dense_max_sv(materialize(s));
  return largest_singular_value(s, iter);
}

LinearOperator sparse_operator(const SparseMatrix& h, double shift) {
  LinearOperator op;
  op.rows = op.cols = h.rows();
  const SparseMatrix* hp = &h;
  op.apply = [hp, shift](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return (*hp) * x - shift * x;
  };
  op.apply_transpose = op.apply;
  return op;
}

std::shared_ptr<const ExcitationSet> full_set_of(const ExcitationAlgebra& alg) {
  return std::make_shared<const ExcitationSet>(alg.space_ptr());
}

}  // namespace

double infsup_gamma(const FciHamiltonian& hmat, const Eigenpair& eig, const NormMetric& metric,
                    std::size_t dense_limit, const IterOptions& iter) {
  if (eig.degenerate)
    throw DegenerateEigenpair("eigenvalue " + std::to_string(eig.energy) +
                              " is not simple (gap " + std::to_string(eig.gap) + ")");
  const Eigen::Index n = static_cast<Eigen::Index>(hmat.dim());
  if (n < 2) throw InvalidDimension("inf-sup constant needs dimension >= 2");
  const Eigen::VectorXd dih = inv_sqrt(metric.weights);
  Eigen::VectorXd u = eig.vector.cwiseProduct(dih);
  u.normalize();
  if (static_cast<std::size_t>(n) <= dense_limit) {
    Eigen::MatrixXd b = hmat.dense();
    b.diagonal().array() -= eig.energy;
    b = dih.asDiagonal() * b * dih.asDiagonal();
    const Eigen::MatrixXd r = reflect_both_sides(b, householder_to_e0(u));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        0.5 * (r.bottomRightCorner(n - 1, n - 1) + r.bottomRightCorner(n - 1, n - 1).transpose()),
        Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().minCoeff();
  }
  const SparseMatrix* h = &hmat.matrix;
  const double e = eig.energy;
  auto scaled = [h, e, dih](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd y = x.cwiseProduct(dih);
    return ((*h) * y - e * y).cwiseProduct(dih);
  };
  const Eigen::VectorXd diag = (hmat.diagonal().array() - e) * dih.array().square();
  if (eig.index == 0) {
    Eigen::MatrixXd deflate = u;
    return lowest_eigenpair(scaled, diag, deflate, iter.tol, iter.max_iter).first;
  }
  // Interior eigenvalue: smallest |lambda| of P B P + c u u^T with c above |B|.
  double c = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = std::abs(e) * dih[i] * dih[i];
    for (SparseMatrix::InnerIterator it(*h, i); it; ++it)
      row += std::abs(it.value()) * dih[i] * dih[it.col()];
    c = std::max(c, row + 1.0);
  }
  LinearOperator op;
  op.rows = op.cols = n;
  op.apply = [scaled, u, c](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd px = x - u.dot(x) * u;
    Eigen::VectorXd y = scaled(px);
    y -= u.dot(y) * u;
    return y + c * u.dot(x) * u;
  };
  op.apply_transpose = op.apply;
  return smallest_singular_value(op, iter);
}

double theta(const ExcitationAlgebra& alg, const AmplitudeVector& tstar, const NormMetric& metric,
             std::size_t dense_limit, const IterOptions& iter) {
  const Eigen::VectorXd tdet = alg.scatter(tstar);
  const auto n = static_cast<Eigen::Index>(alg.dim());
  const ExcitationAlgebra* a = &alg;
  LinearOperator adj;
  adj.rows = adj.cols = n;
  adj.apply = [a, tdet](const Eigen::VectorXd& x) { return a->exp_adjoint_apply(tdet, x, 1); };
  adj.apply_transpose = [a, tdet](const Eigen::VectorXd& x) { return a->exp_apply(tdet, x, 1); };
  LinearOperator proj;
  proj.rows = proj.cols = n;
  proj.apply = [a, tdet](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = a->exp_apply(tdet, x, -1);
    y[0] = 0.0;
    return y;
  };
  proj.apply_transpose = [a, tdet](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = x;
    y[0] = 0.0;
    return a->exp_adjoint_apply(tdet, y, -1);
  };
  return primal_norm(adj, metric.weights, dense_limit, iter) *
         primal_norm(proj, metric.weights, dense_limit, iter);
}

double alpha_continuity(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                        const AmplitudeVector& tstar, double e_star, const NormMetric& metric,
                        std::size_t dense_limit, const IterOptions& iter) {
  const LinearOperator a = similarity_block_operator(alg, hmat, tstar, e_star);
  return dual_map_norm(a, metric.on(*tstar.index_set), dense_limit, iter);
}

double sigma_min_jacobian(const CcJacobian& jac, const NormMetric& metric) {
  const Eigen::VectorXd dih = inv_sqrt(metric.on(*jac.at.index_set));
  return dense_min_sv(dih.asDiagonal() * jac.matrix * dih.asDiagonal());
}

double sigma_min_jacobian(const LinearOperator& jac, const Eigen::VectorXd& active_weights,
                          const IterOptions& iter) {
  const Eigen::VectorXd dih = inv_sqrt(active_weights);
  return smallest_singular_value(diag_scaled(jac, dih, dih), iter);
}

MonotonicityParts monotonicity_gamma(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                     const AmplitudeVector& tstar, double e_star,
                                     const NormMetric& metric, double omega, double gamma,
                                     std::size_t dense_limit, const IterOptions& iter) {
  MonotonicityParts p;
  p.omega = omega;
  p.gamma = gamma;
  const Eigen::VectorXd tdet = alg.scatter(tstar);
  if (tdet.isZero(0.0)) {
    p.antisymmetric_norm = 0.0;
  } else {
    const ExcitationAlgebra* a = &alg;
    LinearOperator diff;
    diff.rows = diff.cols = static_cast<Eigen::Index>(alg.dim());
    diff.apply = [a, tdet](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return a->apply(tdet, x) - a->apply_adjoint(tdet, x);
    };
    diff.apply_transpose = [a, tdet](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return a->apply_adjoint(tdet, x) - a->apply(tdet, x);
    };
    p.antisymmetric_norm = primal_norm(diff, metric.weights, dense_limit, iter);
  }
  p.hamiltonian_norm =
      dual_map_norm(sparse_operator(hmat.matrix, e_star), metric.weights, dense_limit, iter);
  p.Gamma = omega * gamma - p.antisymmetric_norm * p.hamiltonian_norm;
  return p;
}

SpectralGapBound spectral_gap_bound(const Eigenpair& eig, int electrons, double nuclear_charge) {
  SpectralGapBound b;
  b.nuclear_charge = nuclear_charge;
  b.lambda_star = std::isfinite(eig.gap) ? eig.gap : 0.0;
  const double nz2 = 9.0 * electrons * nuclear_charge * nuclear_charge;
  b.ellipticity_offset = nz2 - 0.25;
  b.continuity_bound = 0.5 + 3.0 * std::sqrt(static_cast<double>(electrons)) * nuclear_charge;
  const double denom = b.lambda_star + (nz2 - eig.energy - 0.25);
  b.q = denom != 0.0 ? b.lambda_star / denom : 0.0;
  return b;
}

Eigen::VectorXd sample_perturbation(const Eigen::VectorXd& active_weights, double r,
                                    std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> g;
  Eigen::VectorXd z(active_weights.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = g(rng);
  const double zn = z.norm();
  if (zn == 0.0) return Eigen::VectorXd::Zero(z.size());
  return (r / zn) * z.cwiseQuotient(sqrt_of(active_weights));
}

std::vector<LipschitzSample> lipschitz_estimate(const ExcitationAlgebra& alg,
                                                const FciHamiltonian& hmat,
                                                const AmplitudeVector& tstar,
                                                const NormMetric& metric,
                                                const std::vector<double>& delta_grid, int samples,
                                                std::uint64_t seed, std::size_t dense_limit,
                                                const IterOptions& iter) {
  const Eigen::VectorXd w = metric.on(*tstar.index_set);
  const Eigen::VectorXd dih = inv_sqrt(w);
  const LinearOperator j0 = jacobian_operator(alg, hmat, tstar);
  const bool dense = tstar.size() <= std::min<std::size_t>(dense_limit, 300);
  Eigen::MatrixXd j0_dense;
  if (dense) j0_dense = cc_jacobian(alg, hmat, tstar).matrix;
  std::vector<LipschitzSample> out;
  int counter = 0;
  for (double delta : delta_grid) {
    double best = 0.0;
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd p = sample_perturbation(w, delta, seed + 7919, counter++);
      const AmplitudeVector s(tstar.index_set, tstar.values + p);
      double norm = 0.0;
      if (dense) {
        const Eigen::MatrixXd diff = cc_jacobian(alg, hmat, s).matrix - j0_dense;
        norm = dense_max_sv(dih.asDiagonal() * diff * dih.asDiagonal());
      } else {
        const LinearOperator j1 = jacobian_operator(alg, hmat, s);
        LinearOperator diff;
        diff.rows = diff.cols = j0.rows;
        diff.apply = [j0, j1](const Eigen::VectorXd& x) -> Eigen::VectorXd {
          return j1.apply(x) - j0.apply(x);
        };
        diff.apply_transpose = [j0, j1](const Eigen::VectorXd& x) -> Eigen::VectorXd {
          return j1.apply_transpose(x) - j0.apply_transpose(x);
        };
        IterOptions o = iter;
        o.tol = std::max(iter.tol, 1e-8);
        norm = largest_singular_value(diag_scaled(diff, dih, dih), o);
      }
      best = std::max(best, norm / delta);
    }
    out.push_back({delta, best});
  }
  return out;
}

double locality_radius(double gamma, double theta_value, double alpha,
                       const std::vector<LipschitzSample>& samples) {
  double best = 0.0;
  for (const auto& s : samples) {
    double r = s.delta;
    if (s.estimate > 0.0) {
      r = std::min(r, gamma / (s.estimate * theta_value));
      r = std::min(r, 2.0 * alpha / s.estimate);
    }
    best = std::max(best, r);
  }
  return best;
}

nlohmann::json SandwichTable::to_json() const {
  nlohmann::json j;
  j["fraction_satisfied"] = fraction_satisfied;
  auto& rs = j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"radius", r.radius},
                  {"sample", r.sample},
                  {"lower", r.lower},
                  {"actual", r.actual},
                  {"upper", r.upper},
                  {"lower_ok", r.lower_ok},
                  {"upper_ok", r.upper_ok}});
  return j;
}

double SandwichTable::fraction_at(double radius) const {
  int n = 0, ok = 0;
  for (const auto& r : rows)
    if (r.radius == radius) {
      ++n;
      ok += (r.lower_ok && r.upper_ok) ? 1 : 0;
    }
  return n ? static_cast<double>(ok) / n : 1.0;
}

SandwichTable verify_sandwich(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                              const AmplitudeVector& tstar, const NormMetric& metric, double alpha,
                              double gamma, double theta_value, const std::vector<double>& radii,
                              int samples, std::uint64_t seed) {
  const Eigen::VectorXd w = metric.on(*tstar.index_set);
  SandwichTable table;
  int counter = 0, ok = 0;
  for (double r : radii) {
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd p = sample_perturbation(w, r, seed, counter++);
      const AmplitudeVector s(tstar.index_set, tstar.values + p);
      const double fn = dual_norm(cc_residual(alg, hmat, s).f.values, w);
      SandwichRow row;
      row.radius = r;
      row.sample = k;
      row.actual = vnorm(p, w);
      row.lower = fn / (2.0 * alpha);
      row.upper = 2.0 * theta_value / gamma * fn;
      row.lower_ok = row.lower <= row.actual;
      row.upper_ok = row.actual <= row.upper;
      ok += (row.lower_ok && row.upper_ok) ? 1 : 0;
      table.rows.push_back(row);
    }
  }
  table.fraction_satisfied = table.rows.empty() ? 1.0 : static_cast<double>(ok) / table.rows.size();
  return table;
}

std::string format_number(double v) {
  if (!std::isfinite(v)) throw InternalError("refusing to format a non-finite number");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

nlohmann::json AnalysisReport::to_json() const {
  nlohmann::json j;
  j["molecule"] = molecule;
  j["convention"] = convention;
  j["metric"] = metric;
  j["dimension"] = dimension;
  j["excitations"] = excitations;
  j["method"] = method;
  j["eigenpair"] = {{"index", eigen_index},
                    {"energy", energy},
                    {"total_energy", total_energy},
                    {"gap", spectral_gap}};
  j["residual_at_tstar"] = residual_at_tstar;
  j["gamma"] = gamma;
  j["theta"] = theta;
  j["alpha"] = alpha;
  j["sigma_min_jacobian"] = sigma_min_jacobian;
  j["gamma_over_theta"] = gamma_over_theta;
  j["monotonicity_gamma"] = monotonicity.Gamma;
  j["monotonicity"] = {{"Gamma", monotonicity.Gamma},
                       {"omega", monotonicity.omega},
                       {"variant", monotonicity.omega == 1.0 ? "upper" : "scaled"},
                       {"gamma", monotonicity.gamma},
                       {"antisymmetric_norm", monotonicity.antisymmetric_norm},
                       {"hamiltonian_norm", monotonicity.hamiltonian_norm}};
  j["omega_used"] = monotonicity.omega;
  j["t_norm"] = t_norm;
  j["spectral_gap"] = spectral_gap;
  j["spectral_gap_bound"] = {{"lambda_star", gap_bound.lambda_star},
                             {"q", gap_bound.q},
                             {"continuity_bound", gap_bound.continuity_bound},
                             {"ellipticity_offset", gap_bound.ellipticity_offset},
                             {"nuclear_charge", gap_bound.nuclear_charge}};
  j["continuity_bound"] = gap_bound.continuity_bound;
  j["ellipticity_offset"] = gap_bound.ellipticity_offset;
  auto& lip = j["lipschitz"] = nlohmann::json::array();
  for (const auto& s : lipschitz) lip.push_back({{"delta", s.delta}, {"estimate", s.estimate}});
  j["lipschitz_kind"] = "sampled lower estimate";
  j["radius"] = radius;
  j["radius_kind"] = "optimistic (uses the sampled Lipschitz estimate)";
  j["sandwich"] = sandwich ? sandwich->to_json() : nlohmann::json(nullptr);
  j["flags"] = {{"sigma_min_below_gamma_over_theta", sigma_min_below_gamma_over_theta}};
  j["hf_error"] = hf_error ? nlohmann::json(*hf_error) : nlohmann::json(nullptr);
  j["ccsd_error"] = ccsd_error ? nlohmann::json(*ccsd_error) : nlohmann::json(nullptr);
  return j;
}

std::vector<std::string> AnalysisReport::csv_columns() {
  return {"molecule",         "gamma", "t_norm", "Gamma",        "sigma_min_jacobian",
          "gamma_over_theta", "theta", "alpha",  "spectral_gap", "hf_error",
          "ccsd_error"};
}

std::vector<std::string> AnalysisReport::csv_row() const {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  return {molecule,
          format_number(gamma),
          format_number(t_norm),
          format_number(monotonicity.Gamma),
          format_number(sigma_min_jacobian),
          format_number(gamma_over_theta),
          format_number(theta),
          format_number(alpha),
          format_number(spectral_gap),
          opt(hf_error),
          opt(ccsd_error)};
}

AnalysisReport analyze(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                       const Eigenpair& eig, const NormMetric& metric,
                       const AnalysisOptions& opts, const std::string& molecule) {
  if (eig.degenerate)
    throw DegenerateEigenpair("eigenpair " + std::to_string(eig.index) + " is degenerate (gap " +
                              std::to_string(eig.gap) + " Eh); the constants are undefined");
  AnalysisReport rep;
  rep.molecule = molecule;
  rep.convention = std::string(to_string(alg.convention()));
  rep.metric = metric.descriptor();
  rep.dimension = alg.dim();
  rep.eigen_index = eig.index;
  rep.energy = eig.energy;
  rep.total_energy = eig.total_energy();
  rep.spectral_gap = std::isfinite(eig.gap) ? eig.gap : 0.0;
  const std::size_t limit = opts.dense_limit;
  rep.method = alg.dim() <= limit ? "dense" : "iterative";

  auto full = full_set_of(alg);
  rep.excitations = full->size();
  const AmplitudeVector tstar = ci_to_cc(alg, eig.vector, full);
  const Eigen::VectorXd w = metric.on(*full);
  rep.residual_at_tstar = dual_norm(cc_residual(alg, hmat, tstar).f.values, w);
  rep.t_norm = vnorm(tstar.values, w);

  rep.gamma = infsup_gamma(hmat, eig, metric, limit, opts.iter);
  rep.theta = theta(alg, tstar, metric, limit, opts.iter);
  rep.alpha = alpha_continuity(alg, hmat, tstar, eig.energy, metric, limit, opts.iter);
  if (full->size() <= limit)
    rep.sigma_min_jacobian = sigma_min_jacobian(cc_jacobian(alg, hmat, tstar), metric);
  else
    rep.sigma_min_jacobian =
        sigma_min_jacobian(jacobian_operator(alg, hmat, tstar), w, opts.iter);
  rep.gamma_over_theta = rep.gamma / rep.theta;
  rep.sigma_min_below_gamma_over_theta = rep.sigma_min_jacobian < rep.gamma_over_theta;
  rep.monotonicity = monotonicity_gamma(alg, hmat, tstar, eig.energy, metric, opts.omega,
                                        rep.gamma, limit, opts.iter);
  const int electrons = alg.electrons();
  rep.gap_bound = spectral_gap_bound(eig, electrons,
                                     opts.nuclear_charge.value_or(static_cast<double>(electrons)));
  if (opts.lipschitz && !opts.delta_grid.empty()) {
    rep.lipschitz = lipschitz_estimate(alg, hmat, tstar, metric, opts.delta_grid,
                                       opts.lipschitz_samples, opts.seed, limit, opts.iter);
    rep.radius = locality_radius(rep.gamma, rep.theta, rep.alpha, rep.lipschitz);
  }
  if (opts.sandwich && !opts.sandwich_radii.empty())
    rep.sandwich = verify_sandwich(alg, hmat, tstar, metric, rep.alpha, rep.gamma, rep.theta,
                                   opts.sandwich_radii, opts.sandwich_samples, opts.seed);
  return rep;
}

}  // namespace fullcc
