#pragma once

// Matrix-free operators and the dense/iterative singular-value machinery used
// for D-weighted operator norms.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

namespace fullcc {

using VecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct LinearOperator {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  VecFn apply;
  /// Optional; required by singular-value routines.
  VecFn apply_transpose;

  static LinearOperator from_dense(Eigen::MatrixXd m);
  LinearOperator transposed() const;
  bool has_transpose() const noexcept { return static_cast<bool>(apply_transpose); }
};

Eigen::MatrixXd materialize(const LinearOperator& op);

/// diag(left) * op * diag(right).
LinearOperator diag_scaled(const LinearOperator& op, const Eigen::VectorXd& left,
                           const Eigen::VectorXd& right);

struct IterOptions {
  double tol = 1e-10;
  int max_iter = 5000;
  /// Krylov block length between restarts.
  int krylov_dim = 60;
  std::uint64_t seed = 42;
  /// Relative tolerance of inner linear solves.
  double solve_tol = 1e-12;
};

struct GmresResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Restarted GMRES for op x = b with optional right preconditioner.
GmresResult gmres(const LinearOperator& op, const Eigen::VectorXd& b, double tol, int restart,
                  int max_iter, const VecFn& precond = {}, const Eigen::VectorXd* x0 = nullptr);

/// Largest eigenvalue and vector of a symmetric positive semidefinite operator
/// by restarted Lanczos (an accelerated power iteration).
std::pair<double, Eigen::VectorXd> psd_largest_eigenpair(const VecFn& apply, Eigen::Index n,
                                                         const IterOptions& opts);

/// Largest singular value, via the Gram operator op^T op.
double largest_singular_value(const LinearOperator& op, const IterOptions& opts = {});
/// Smallest singular value of a square operator, by inverse iteration on
/// op^T op with GMRES inner solves. `precond` approximates op^{-1}.
double smallest_singular_value(const LinearOperator& op, const IterOptions& opts = {},
                               const VecFn& precond = {}, const VecFn& precond_transpose = {});

/// Lowest eigenpair of a symmetric operator restricted to the orthogonal
/// complement of the (orthonormal) columns of `deflate`; Davidson with the
/// given diagonal as preconditioner.
std::pair<double, Eigen::VectorXd> lowest_eigenpair(const VecFn& apply,
                                                    const Eigen::VectorXd& diagonal,
                                                    const Eigen::MatrixXd& deflate, double tol,
                                                    int max_iter, int subspace_cap = 40);

Eigen::VectorXd dense_singular_values(const Eigen::MatrixXd& m);
double dense_max_sv(const Eigen::MatrixXd& m);
double dense_min_sv(const Eigen::MatrixXd& m);

/// Householder reflector H = I - 2 w w^T (w unit) with H u = +-|u| e_0.
Eigen::VectorXd householder_to_e0(const Eigen::VectorXd& u);
/// Applies H = I - 2 w w^T from both sides of a square matrix.
Eigen::MatrixXd reflect_both_sides(const Eigen::MatrixXd& m, const Eigen::VectorXd& w);

}  // namespace fullcc
