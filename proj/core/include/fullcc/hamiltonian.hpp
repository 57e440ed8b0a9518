#pragma once

// Full-CI Hamiltonian over a determinant space and its eigenpairs.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <optional>

#include "fullcc/determinant.hpp"
#include "fullcc/integrals.hpp"

namespace fullcc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Dimension up to which eigenpairs, norms and Jacobians are computed densely.
inline constexpr std::size_t kDenseDimension = 2000;
/// Eigenvalues closer than this are treated as degenerate.
inline constexpr double kDegeneracyTol = 1e-6;

struct FciHamiltonian {
  std::shared_ptr<const DeterminantSpace> space;
  /// Electronic part only; e_core is added to reported totals.
  SparseMatrix matrix;
  double e_core = 0.0;

  std::size_t dim() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
  Eigen::VectorXd diagonal() const { return matrix.diagonal(); }
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const { return matrix * v; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix); }
};

/// <a|H|b> by the Slater-Condon rules, including the fermionic alignment phase.
double slater_condon_element(const Determinant& a, const Determinant& b,
                             const SpinOrbitalIntegrals& ints);

FciHamiltonian assemble(std::shared_ptr<const DeterminantSpace> space,
                        const SpinOrbitalIntegrals& ints);

struct Eigenpair {
  /// Electronic eigenvalue.
  double energy = 0.0;
  /// Unit vector with a nonnegative reference coefficient.
  Eigen::VectorXd vector;
  int index = 0;
  /// Distance to the nearest other eigenvalue; +inf for a 1x1 space.
  double gap = 0.0;
  std::optional<double> lower_neighbor;
  std::optional<double> upper_neighbor;
  bool degenerate = false;
  double residual = 0.0;
  double e_core = 0.0;

  double total_energy() const noexcept { return energy + e_core; }
};

struct EigenOptions {
  double tol = 1e-9;  // scaled by (1 + |E|)
  int max_iter = 1000;
  int subspace_cap = 40;
  double degeneracy_tol = kDegeneracyTol;
  std::size_t dense_limit = kDenseDimension;
};

/// Eigenpair number `which` (0 = lowest) of the Hamiltonian.
Eigenpair solve_eigenpair(const FciHamiltonian& hmat, int which = 0, const EigenOptions& opts = {});

/// Lowest `nroots` eigenpairs of a symmetric sparse matrix by Davidson's
/// method with a diagonal preconditioner. Columns of the returned matrix are
/// the eigenvectors.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> davidson(const SparseMatrix& a, int nroots,
                                                     double tol, int max_iter, int subspace_cap);

/// <Psi0|H|Psi0> + e_core.
double hf_energy(const FciHamiltonian& hmat);

}  // namespace fullcc
