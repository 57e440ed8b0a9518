#pragma once

// Cluster operators T = sum t_mu X_mu over a determinant space: their action,
// adjoints, terminating exponentials, CI <-> CC conversion and the D-weighted
// norms of the amplitude space and its dual.

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "fullcc/determinant.hpp"
#include "fullcc/hamiltonian.hpp"

namespace fullcc {

/// Excitation indices reachable from the reference inside a determinant space,
/// optionally truncated to ranks <= max_rank. Ordering is that of
/// enumerate_excitations. Each index mu is tied to the ordinal of the
/// determinant X_mu Psi0.
class ExcitationSet {
 public:
  ExcitationSet(std::shared_ptr<const DeterminantSpace> space,
                std::optional<int> max_rank = std::nullopt);

  const DeterminantSpace& space() const noexcept { return *space_; }
  std::shared_ptr<const DeterminantSpace> space_ptr() const noexcept { return space_; }
  std::optional<int> max_rank() const noexcept { return max_rank_; }
  bool is_full() const noexcept { return full_; }

  std::size_t size() const noexcept { return indices_.size(); }
  const ExcitationIndex& operator[](std::size_t k) const noexcept { return indices_[k]; }
  const std::vector<ExcitationIndex>& indices() const noexcept { return indices_; }

  /// Determinant ordinal of X_mu Psi0 for position k.
  std::size_t det_of(std::size_t k) const noexcept { return det_of_[k]; }
  const std::vector<std::size_t>& det_ordinals() const noexcept { return det_of_; }
  /// Position of the excitation landing on determinant ordinal d, or -1.
  long position_of_det(std::size_t d) const noexcept { return pos_of_det_[d]; }

  nlohmann::json descriptor() const;

 private:
  std::shared_ptr<const DeterminantSpace> space_;
  std::optional<int> max_rank_;
  bool full_ = true;
  std::vector<ExcitationIndex> indices_;
  std::vector<std::size_t> det_of_;
  std::vector<long> pos_of_det_;
};

using ExcitationSetPtr = std::shared_ptr<const ExcitationSet>;

/// Coefficients over an excitation set; `dual` marks elements of the dual space.
struct AmplitudeVector {
  ExcitationSetPtr index_set;
  Eigen::VectorXd values;
  bool dual = false;

  AmplitudeVector() = default;
  AmplitudeVector(ExcitationSetPtr set, Eigen::VectorXd v, bool is_dual = false);
  static AmplitudeVector zero(ExcitationSetPtr set, bool is_dual = false);

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
};

nlohmann::json to_json(const AmplitudeVector& t);
/// Checks the stored descriptor against `set` before reading values.
AmplitudeVector amplitudes_from_json(const nlohmann::json& j, ExcitationSetPtr set);

/// Sparse action pattern of all excitation operators on a determinant space.
/// Entry (row r, col c, key m, phase p) records X_mu e_c = p * e_r where m is
/// the determinant ordinal of X_mu Psi0. Amplitudes are consumed as
/// determinant-indexed arrays ("det arrays", entry 0 unused).
class ExcitationAlgebra {
 public:
  ExcitationAlgebra(std::shared_ptr<const DeterminantSpace> space, PhaseConvention convention);

  const DeterminantSpace& space() const noexcept { return *space_; }
  std::shared_ptr<const DeterminantSpace> space_ptr() const noexcept { return space_; }
  PhaseConvention convention() const noexcept { return convention_; }
  std::size_t dim() const noexcept { return space_->size(); }
  std::size_t nnz() const noexcept { return col_.size(); }
  int electrons() const noexcept { return space_->electrons(); }

  /// Phase s with X_mu Psi0 = s * e_d for determinant ordinal d (s_0 = 1).
  int ref_phase(std::size_t d) const noexcept { return ref_phase_[d]; }
  const Eigen::VectorXd& ref_phases() const noexcept { return ref_phase_vec_; }

  /// Det array of t (zeros outside the set).
  Eigen::VectorXd scatter(const AmplitudeVector& t) const;
  /// Values of a det array on the positions of `set`.
  Eigen::VectorXd gather(const Eigen::VectorXd& det_array, const ExcitationSet& set) const;

  /// T v for the det array t.
  Eigen::VectorXd apply(const Eigen::VectorXd& t, const Eigen::VectorXd& v) const;
  /// T^dagger v.
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& t, const Eigen::VectorXd& v) const;
  /// sum_k (sign T)^k v / k!, terminating at k = N.
  Eigen::VectorXd exp_apply(const Eigen::VectorXd& t, const Eigen::VectorXd& v, int sign) const;
  /// sum_k (sign T^dagger)^k v / k!.
  Eigen::VectorXd exp_adjoint_apply(const Eigen::VectorXd& t, const Eigen::VectorXd& v,
                                    int sign) const;
  /// Column-wise pairing w -> [<X_m u, w>]_m over all determinant ordinals m.
  Eigen::VectorXd pair_with_excited(const Eigen::VectorXd& u, const Eigen::VectorXd& w) const;
  /// X_m v for one excitation (by determinant ordinal m).
  Eigen::VectorXd apply_single(std::size_t m, const Eigen::VectorXd& v) const;

  /// Dense matrix of T; for tests and small spaces.
  Eigen::MatrixXd dense(const Eigen::VectorXd& t) const;

 private:
  void check_vector(const Eigen::VectorXd& v) const;

  std::shared_ptr<const DeterminantSpace> space_;
  PhaseConvention convention_;
  std::vector<std::uint32_t> row_ptr_;
  std::vector<std::uint32_t> col_;
  std::vector<std::uint32_t> key_;
  std::vector<std::int8_t> phase_;
  std::vector<std::uint32_t> key_ptr_;
  std::vector<std::uint32_t> by_key_;
  std::vector<int> ref_phase_;
  Eigen::VectorXd ref_phase_vec_;
};

Eigen::VectorXd cluster_apply(const ExcitationAlgebra& alg, const AmplitudeVector& t,
                              const Eigen::VectorXd& v);
Eigen::VectorXd cluster_adjoint_apply(const ExcitationAlgebra& alg, const AmplitudeVector& t,
                                      const Eigen::VectorXd& v);
Eigen::VectorXd exp_apply(const ExcitationAlgebra& alg, const AmplitudeVector& t,
                          const Eigen::VectorXd& v, int sign);

/// Below this reference overlap a CI vector has no exponential parameterisation.
inline constexpr double kIntermediateTol = 1e-8;

/// Amplitudes t over `set` with e^T Psi0 = psi / <Psi0, psi>.
AmplitudeVector ci_to_cc(const ExcitationAlgebra& alg, const Eigen::VectorXd& psi,
                         ExcitationSetPtr set, double intermediate_tol = kIntermediateTol);
/// e^T Psi0.
Eigen::VectorXd cc_to_ci(const ExcitationAlgebra& alg, const AmplitudeVector& t);

/// Diagonal weights D_d = H_dd - E* + shift over all determinant ordinals.
/// The amplitude space uses the non-reference entries; the reference entry
/// weights the Psi0 component when operators act on the whole space.
struct NormMetric {
  Eigen::VectorXd weights;
  double shift = 1.0;
  double e_star = 0.0;

  /// Weights restricted to the positions of `set`.
  Eigen::VectorXd on(const ExcitationSet& set) const;
  NormMetric scaled(double c) const;
  nlohmann::json descriptor() const;
};

NormMetric build_norm_metric(const FciHamiltonian& hmat, double e_star, double shift = 1.0);
/// Metric with the given weights (used for synthetic cases).
NormMetric metric_from_weights(Eigen::VectorXd weights, double shift = 0.0, double e_star = 0.0);

double vnorm(const AmplitudeVector& t, const NormMetric& d);
double dual_norm(const AmplitudeVector& w, const NormMetric& d);
double vnorm(const Eigen::VectorXd& t, const Eigen::VectorXd& weights);
double dual_norm(const Eigen::VectorXd& w, const Eigen::VectorXd& weights);

}  // namespace fullcc
