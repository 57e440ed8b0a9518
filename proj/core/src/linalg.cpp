#include "fullcc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "fullcc/error.hpp"

namespace fullcc {

namespace {

Eigen::VectorXd random_unit(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = g(rng);
  return v.normalized();
}

}  // namespace

LinearOperator LinearOperator::from_dense(Eigen::MatrixXd m) {
  auto mp = std::make_shared<const Eigen::MatrixXd>(std::move(m));
  LinearOperator op;
  op.rows = mp->rows();
  op.cols = mp->cols();
  op.apply = [mp](const Eigen::VectorXd& x) -> Eigen::VectorXd { return (*mp) * x; };
  op.apply_transpose = [mp](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return mp->transpose() * x;
  };
  return op;
}

LinearOperator LinearOperator::transposed() const {
  if (!apply_transpose) throw InternalError("operator has no transpose action");
  LinearOperator t;
  t.rows = cols;
  t.cols = rows;
  t.apply = apply_transpose;
  t.apply_transpose = apply;
  return t;
}

Eigen::MatrixXd materialize(const LinearOperator& op) {
  Eigen::MatrixXd m(op.rows, op.cols);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(op.cols);
  for (Eigen::Index j = 0; j < op.cols; ++j) {
    e[j] = 1.0;
    m.col(j) = op.apply(e);
    e[j] = 0.0;
  }
  return m;
}

LinearOperator diag_scaled(const LinearOperator& op, const Eigen::VectorXd& left,
                           const Eigen::VectorXd& right) {
  if (left.size() != op.rows || right.size() != op.cols)
    throw DimensionMismatch("diag_scaled: scaling vectors do not match the operator");
  LinearOperator s;
  s.rows = op.rows;
  s.cols = op.cols;
  auto inner = op.apply;
  s.apply = [inner, left, right](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return left.cwiseProduct(inner(right.cwiseProduct(x)));
  };
  if (op.apply_transpose) {
    auto inner_t = op.apply_transpose;
    s.apply_transpose = [inner_t, left, right](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      return right.cwiseProduct(inner_t(left.cwiseProduct(x)));
    };
  }
  return s;
}

GmresResult gmres(const LinearOperator& op, const Eigen::VectorXd& b, double tol, int restart,
                  int max_iter, const VecFn& precond, const Eigen::VectorXd* x0) {
  const Eigen::Index n = b.size();
  if (op.rows != n || op.cols != n) throw DimensionMismatch("gmres: operator is not square");
  GmresResult res;
  res.x = x0 ? *x0 : Eigen::VectorXd::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.x.setZero();
    res.converged = true;
    return res;
  }
  const int m = static_cast<int>(std::min<Eigen::Index>(restart, n));
  Eigen::MatrixXd v(n, m + 1);
  Eigen::MatrixXd z(n, m);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  Eigen::VectorXd cs(m), sn(m), g(m + 1);
  int total = 0;
  while (total < max_iter) {
    Eigen::VectorXd r = b - op.apply(res.x);
    double beta = r.norm();
    res.relative_residual = beta / bnorm;
    if (res.relative_residual <= tol) {
      res.converged = true;
      break;
    }
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    h.setZero();
    int k = 0;
    for (; k < m && total < max_iter; ++k, ++total) {
      z.col(k) = precond ? precond(v.col(k)) : Eigen::VectorXd(v.col(k));
      Eigen::VectorXd w = op.apply(z.col(k));
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= k; ++i) {
          const double c = v.col(i).dot(w);
          h(i, k) += c;
          w -= c * v.col(i);
        }
      h(k + 1, k) = w.norm();
      if (h(k + 1, k) > 0) v.col(k + 1) = w / h(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double t = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = t;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      cs[k] = denom == 0.0 ? 1.0 : h(k, k) / denom;
      sn[k] = denom == 0.0 ? 0.0 : h(k + 1, k) / denom;
      h(k, k) = denom;
      h(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      res.relative_residual = std::abs(g[k + 1]) / bnorm;
      if (res.relative_residual <= tol || h(k, k) == 0.0) {
        ++k;
        ++total;
        break;
      }
    }
    Eigen::VectorXd y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    res.x += z.leftCols(k) * y;
    if (res.relative_residual <= tol) {
      res.relative_residual = (b - op.apply(res.x)).norm() / bnorm;
      if (res.relative_residual <= 10 * tol) {
        res.converged = true;
        break;
      }
    }
  }
  res.iterations = total;
  return res;
}

std::pair<double, Eigen::VectorXd> psd_largest_eigenpair(const VecFn& apply, Eigen::Index n,
                                                         const IterOptions& opts) {
  if (n == 0) return {0.0, Eigen::VectorXd()};
  if (n == 1) {
    Eigen::VectorXd e = Eigen::VectorXd::Ones(1);
    return {apply(e)[0], e};
  }
  Eigen::VectorXd q = random_unit(n, opts.seed);
  const int m = static_cast<int>(std::min<Eigen::Index>(opts.krylov_dim, n));
  int used = 0;
  double theta = 0.0;
  double best_res = std::numeric_limits<double>::infinity();
  while (used < opts.max_iter) {
    Eigen::MatrixXd basis(n, m);
    Eigen::MatrixXd image(n, m);
    basis.col(0) = q;
    int k = 0;
    for (; k < m && used < opts.max_iter; ++k) {
      image.col(k) = apply(basis.col(k));
      ++used;
      if (k + 1 == m) {
        ++k;
        break;
      }
      Eigen::VectorXd w = image.col(k);
      for (int pass = 0; pass < 2; ++pass)
        for (int i = 0; i <= k; ++i) w -= basis.col(i).dot(w) * basis.col(i);
      const double beta = w.norm();
      if (beta < 1e-14 * std::max(1.0, image.col(k).norm())) {
        ++k;
        break;
      }
      basis.col(k + 1) = w / beta;
    }
    Eigen::MatrixXd t = basis.leftCols(k).transpose() * image.leftCols(k);
    t = 0.5 * (t + t.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    theta = es.eigenvalues()[k - 1];
    const Eigen::VectorXd s = es.eigenvectors().col(k - 1);
    q = (basis.leftCols(k) * s).normalized();
    const Eigen::VectorXd r = apply(q) - theta * q;
    ++used;
    const double rn = r.norm();
    best_res = std::min(best_res, rn);
    if (rn <= opts.tol * std::max(std::abs(theta), 1e-300) || theta == 0.0) return {theta, q};
  }
  throw IterativeFailure("Lanczos largest eigenvalue did not converge", best_res);
}

double largest_singular_value(const LinearOperator& op, const IterOptions& opts) {
  if (!op.apply_transpose) throw InternalError("largest_singular_value needs a transpose action");
  auto gram = [&op](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return op.apply_transpose(op.apply(x));
  };
  auto [lam, v] = psd_largest_eigenpair(gram, op.cols, opts);
  (void)v;
  return std::sqrt(std::max(lam, 0.0));
}

double smallest_singular_value(const LinearOperator& op, const IterOptions& opts,
                               const VecFn& precond, const VecFn& precond_transpose) {
  if (op.rows != op.cols) throw DimensionMismatch("smallest_singular_value: non-square operator");
  if (!op.apply_transpose) throw InternalError("smallest_singular_value needs a transpose action");
  const LinearOperator opt = op.transposed();
  double worst = 0.0;
  auto solve = [&](const LinearOperator& a, const VecFn& pc, const Eigen::VectorXd& b) {
    auto r = gmres(a, b, opts.solve_tol, 80, 20000, pc);
    if (!r.converged && r.relative_residual > 1e-8)
      throw IterativeFailure("inner GMRES solve failed", r.relative_residual);
    worst = std::max(worst, r.relative_residual);
    return r.x;
  };
  // (A^T A)^{-1} = A^{-1} A^{-T}
  auto inv_gram = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return solve(op, precond, solve(opt, precond_transpose, x));
  };
  IterOptions o = opts;
  o.tol = std::max(opts.tol, 1e-8);
  o.max_iter = std::min(opts.max_iter, 400);
  auto [lam, v] = psd_largest_eigenpair(inv_gram, op.cols, o);
  (void)v;
  if (!(lam > 0)) throw NearSingular("operator is numerically singular");
  return 1.0 / std::sqrt(lam);
}

std::pair<double, Eigen::VectorXd> lowest_eigenpair(const VecFn& apply,
                                                    const Eigen::VectorXd& diagonal,
                                                    const Eigen::MatrixXd& deflate, double tol,
                                                    int max_iter, int subspace_cap) {
  const Eigen::Index n = diagonal.size();
  auto project = [&deflate](Eigen::VectorXd x) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < deflate.cols(); ++k) x -= deflate.col(k).dot(x) * deflate.col(k);
    return x;
  };
  const int cap = std::max(subspace_cap, 4);
  Eigen::MatrixXd v(n, cap), w(n, cap);
  int m = 0;
  auto push = [&](Eigen::VectorXd c) {
    c = project(std::move(c));
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < m; ++k) c -= v.col(k).dot(c) * v.col(k);
    const double cn = c.norm();
    if (cn < 1e-10) return false;
    v.col(m) = c / cn;
    w.col(m) = project(apply(v.col(m)));
    ++m;
    return true;
  };
  std::vector<Eigen::Index> order(n);
  for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return diagonal[a] < diagonal[b]; });
  for (Eigen::Index i = 0; i < n && m < std::min<Eigen::Index>(4, n - deflate.cols()); ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[order[i]] = 1.0;
    push(e);
  }
  if (m == 0) throw InvalidDimension("lowest_eigenpair: nothing left after deflation");
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd g = v.leftCols(m).transpose() * w.leftCols(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
    const double theta = es.eigenvalues()[0];
    const Eigen::VectorXd y = es.eigenvectors().col(0);
    Eigen::VectorXd x = v.leftCols(m) * y;
    Eigen::VectorXd r = w.leftCols(m) * y - theta * x;
    const double rn = r.norm();
    best = std::min(best, rn);
    if (rn <= tol) return {theta, x.normalized()};
    if (m == cap || m >= n - deflate.cols()) {
      v.col(0) = x.normalized();
      w.col(0) = project(apply(v.col(0)));
      m = 1;
    }
    Eigen::VectorXd c(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double d = theta - diagonal[i];
      if (std::abs(d) < 1e-8) d = d < 0 ? -1e-8 : 1e-8;
      c[i] = r[i] / d;
    }
    if (!push(c) && !push(r)) return {theta, x.normalized()};
  }
  throw IterativeFailure("Davidson (deflated) did not converge", best);
}

Eigen::VectorXd dense_singular_values(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return Eigen::VectorXd();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}

double dense_max_sv(const Eigen::MatrixXd& m) {
  const auto s = dense_singular_values(m);
  return s.size() ? s.maxCoeff() : 0.0;
}

double dense_min_sv(const Eigen::MatrixXd& m) {
  const auto s = dense_singular_values(m);
  return s.size() ? s.minCoeff() : 0.0;
}

Eigen::VectorXd householder_to_e0(const Eigen::VectorXd& u) {
  Eigen::VectorXd w = u;
  const double un = u.norm();
  w[0] += (u[0] >= 0 ? un : -un);
  const double wn = w.norm();
  if (wn == 0.0) throw InternalError("householder_to_e0: zero vector");
  return w / wn;
}

Eigen::MatrixXd reflect_both_sides(const Eigen::MatrixXd& m, const Eigen::VectorXd& w) {
  // (I - 2ww^T) M (I - 2ww^T) by two rank-1 updates on each side.
  const Eigen::VectorXd mw = m * w;
  const Eigen::VectorXd wm = m.transpose() * w;
  const double wmw = w.dot(mw);
  Eigen::MatrixXd out = m;
  out.noalias() -= 2.0 * mw * w.transpose();
  out.noalias() -= 2.0 * w * wm.transpose();
  out.noalias() += 4.0 * wmw * w * w.transpose();
  return out;
}

}  // namespace fullcc
