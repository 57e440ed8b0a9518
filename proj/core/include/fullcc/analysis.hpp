#pragma once

// Well-posedness constants of the CC equations at a zero t* in the diagonal
// D-metric, and checks of the residual-based error sandwich.
//
// Norm conventions: amplitude space V has |t|^2 = sum D t^2, its dual V* has
// |w|^2 = sum w^2/D. An operator V -> V has norm sigma_max(D^{1/2} M D^{-1/2});
// an operator V -> V* has norm sigma_max(D^{-1/2} A D^{-1/2}).

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fullcc/cc_equations.hpp"
#include "fullcc/cluster.hpp"
#include "fullcc/hamiltonian.hpp"
#include "fullcc/linalg.hpp"

namespace fullcc {

struct AnalysisOptions {
  double omega = 1.0;
  std::vector<double> delta_grid{1e-3, 1e-2, 5e-2, 1e-1};
  int lipschitz_samples = 6;
  std::vector<double> sandwich_radii{1e-3, 1e-2};
  int sandwich_samples = 100;
  std::uint64_t seed = 42;
  std::size_t dense_limit = kDenseDimension;
  IterOptions iter;
  /// Total nuclear charge; defaults to the electron count (neutral molecule).
  std::optional<double> nuclear_charge;
  bool lipschitz = true;
  bool sandwich = true;
};

/// Inf-sup constant of H - E* on the Euclidean complement of the eigenvector.
double infsup_gamma(const FciHamiltonian& hmat, const Eigenpair& eig, const NormMetric& metric,
                    std::size_t dense_limit = kDenseDimension, const IterOptions& iter = {});

/// |e^{T*dagger}|_D * |P0perp e^{-T*}|_D over the whole determinant space.
double theta(const ExcitationAlgebra& alg, const AmplitudeVector& tstar, const NormMetric& metric,
             std::size_t dense_limit = kDenseDimension, const IterOptions& iter = {});

/// V -> V* norm of the excitation block of e^{-T*}(H - E*)e^{T*}.
double alpha_continuity(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                        const AmplitudeVector& tstar, double e_star, const NormMetric& metric,
                        std::size_t dense_limit = kDenseDimension, const IterOptions& iter = {});

/// 1 / |J^{-1}|_{V* -> V} = sigma_min(D^{-1/2} J D^{-1/2}).
double sigma_min_jacobian(const CcJacobian& jac, const NormMetric& metric);
double sigma_min_jacobian(const LinearOperator& jac, const Eigen::VectorXd& active_weights,
                          const IterOptions& iter = {});

struct MonotonicityParts {
  double Gamma = 0.0;
  double omega = 1.0;
  double gamma = 0.0;
  /// |T* - T*dagger|_D as a map V -> V.
  double antisymmetric_norm = 0.0;
  /// |H - E*|_D as a map V -> V*.
  double hamiltonian_norm = 0.0;
};

/// Gamma = omega*gamma - |T* - T*dagger| |H - E*|, quadratic remainder dropped.
MonotonicityParts monotonicity_gamma(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                                     const AmplitudeVector& tstar, double e_star,
                                     const NormMetric& metric, double omega, double gamma,
                                     std::size_t dense_limit = kDenseDimension,
                                     const IterOptions& iter = {});

struct SpectralGapBound {
  double lambda_star = 0.0;
  double q = 0.0;
  double continuity_bound = 0.0;
  double ellipticity_offset = 0.0;
  double nuclear_charge = 0.0;
};

/// Literal evaluation with the electronic eigenvalue E* (no core energy).
SpectralGapBound spectral_gap_bound(const Eigenpair& eig, int electrons, double nuclear_charge);

struct LipschitzSample {
  double delta = 0.0;
  double estimate = 0.0;
};

/// L(delta) ~ max_s |J(s) - J(t*)|_{V->V*} / |s - t*|_V over samples s on the
/// V-sphere of radius delta around t*. A lower estimate of the supremum.
std::vector<LipschitzSample> lipschitz_estimate(const ExcitationAlgebra& alg,
                                                const FciHamiltonian& hmat,
                                                const AmplitudeVector& tstar,
                                                const NormMetric& metric,
                                                const std::vector<double>& delta_grid, int samples,
                                                std::uint64_t seed,
                                                std::size_t dense_limit = kDenseDimension,
                                                const IterOptions& iter = {});

/// max over the grid of min{delta, gamma/(L(delta) theta), 2 alpha/L(delta)}.
double locality_radius(double gamma, double theta_value, double alpha,
                       const std::vector<LipschitzSample>& samples);

struct SandwichRow {
  double radius = 0.0;
  int sample = 0;
  double lower = 0.0;
  double actual = 0.0;
  double upper = 0.0;
  bool lower_ok = true;
  bool upper_ok = true;
};

struct SandwichTable {
  std::vector<SandwichRow> rows;
  double fraction_satisfied = 1.0;
  nlohmann::json to_json() const;
  /// Fraction of samples at `radius` satisfying both bounds.
  double fraction_at(double radius) const;
};

/// Perturbation of exact V-norm r: isotropic Gaussian in D^{-1/2} coordinates.
Eigen::VectorXd sample_perturbation(const Eigen::VectorXd& active_weights, double r,
                                    std::uint64_t seed, int index);

SandwichTable verify_sandwich(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                              const AmplitudeVector& tstar, const NormMetric& metric, double alpha,
                              double gamma, double theta_value, const std::vector<double>& radii,
                              int samples, std::uint64_t seed);

struct AnalysisReport {
  std::string molecule;
  std::string convention;
  nlohmann::json metric;
  std::size_t dimension = 0;
  std::size_t excitations = 0;
  std::string method;
  int eigen_index = 0;
  double energy = 0.0;
  double total_energy = 0.0;
  double residual_at_tstar = 0.0;

  double gamma = 0.0;
  double theta = 0.0;
  double alpha = 0.0;
  double sigma_min_jacobian = 0.0;
  double gamma_over_theta = 0.0;
  MonotonicityParts monotonicity;
  double t_norm = 0.0;
  double spectral_gap = 0.0;
  SpectralGapBound gap_bound;
  std::vector<LipschitzSample> lipschitz;
  double radius = 0.0;
  std::optional<SandwichTable> sandwich;
  bool sigma_min_below_gamma_over_theta = false;

  std::optional<double> hf_error;
  std::optional<double> ccsd_error;

  nlohmann::json to_json() const;
  static std::vector<std::string> csv_columns();
  std::vector<std::string> csv_row() const;
};

/// All constants at the CC zero corresponding to `eig`. Throws
/// DegenerateEigenpair when the eigenvalue is not simple.
AnalysisReport analyze(const ExcitationAlgebra& alg, const FciHamiltonian& hmat,
                       const Eigenpair& eig, const NormMetric& metric,
                       const AnalysisOptions& opts = {}, const std::string& molecule = "");

/// Shortest round-trip decimal form; rejects NaN/Inf.
std::string format_number(double v);

}  // namespace fullcc
