#pragma once

// The coupled cluster function f(t)_mu = <X_mu Psi0, e^{-T} H e^{T} Psi0>, its
// Jacobian, and a damped Newton solver for f(t) = 0 on an active index set.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "fullcc/cluster.hpp"
#include "fullcc/error.hpp"
#include "fullcc/hamiltonian.hpp"
#include "fullcc/linalg.hpp"

namespace fullcc {

struct CcResidual {
  /// Dual-tagged, over the active set of t.
  AmplitudeVector f;
  /// Electronic CC energy, the Psi0 coefficient of aux.
  double energy = 0.0;
  /// e^{-T} H e^{T} Psi0 over the full determinant space.
  Eigen::VectorXd aux;
};

struct CcJacobian {
  Eigen::MatrixXd matrix;
  AmplitudeVector at;
};

/// Amplitudes of t live on t.index_set, which is also the residual row set.
CcResidual cc_residual(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                       const AmplitudeVector& t);

/// Dense Jacobian; column nu is the active part of e^{-T}[H, X_nu]e^{T}Psi0.
CcJacobian cc_jacobian(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                       const AmplitudeVector& t);

/// Matrix-free Jacobian at t (with transpose action).
LinearOperator jacobian_operator(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                 const AmplitudeVector& t);

/// Excitation block of e^{-T}(H - E)e^{T} in the basis {X_mu Psi0}, as an operator.
LinearOperator similarity_block_operator(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                         const AmplitudeVector& t, double e_star);
Eigen::MatrixXd similarity_block(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                 const AmplitudeVector& t, double e_star);

struct SolverStep {
  int iteration = 0;
  double residual = 0.0;  // dual norm of f
  double energy = 0.0;    // electronic
  double step_norm = 0.0; // V-norm of the accepted update
  double damping = 1.0;
  int inner_iterations = 0;
};

struct SolverTrace {
  std::vector<SolverStep> iterations;
  bool converged = false;
  bool monotone = true;
  std::string mode;
  AmplitudeVector final;

  nlohmann::json to_json() const;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, SolverTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const SolverTrace& trace() const noexcept { return trace_; }

 private:
  SolverTrace trace_;
};

enum class JacobianMode { automatic, dense, krylov, diagonal };

struct NewtonOptions {
  double tol = 1e-10;
  int max_iter = 100;
  int max_halvings = 20;
  JacobianMode mode = JacobianMode::automatic;
  double condition_limit = 1e14;
  std::size_t dense_limit = kDenseDimension;
  int krylov_restart = 60;
  int krylov_max_iter = 2000;
};

JacobianMode parse_jacobian_mode(const std::string& s);

struct NewtonResult {
  AmplitudeVector t;
  SolverTrace trace;
  CcResidual residual;
};

/// Damped Newton iteration from t0 (whose index set is the active set).
/// Throws NonConvergence (carrying the trace) when max_iter is exhausted and
/// NearSingular when the dense Jacobian condition estimate exceeds the limit.
NewtonResult newton_solve(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                          const AmplitudeVector& t0, const NormMetric& metric,
                          const NewtonOptions& opts = {});

/// t_mu = -f_mu(0) / D_mu on the active set.
AmplitudeVector mp_seed(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                        ExcitationSetPtr active, const NormMetric& metric);

}  // namespace fullcc
