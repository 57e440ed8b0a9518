#include "fullcc/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fullcc/error.hpp"

namespace fullcc {

ExcitationSet::ExcitationSet(std::shared_ptr<const DeterminantSpace> space,
                             std::optional<int> max_rank)
    : space_(std::move(space)), max_rank_(max_rank) {
  if (!space_) throw InternalError("ExcitationSet: null space");
  const int n = space_->electrons();
  if (max_rank_ && *max_rank_ >= n) max_rank_.reset();
  full_ = !max_rank_;
  pos_of_det_.assign(space_->size(), -1);
  const Determinant& ref = space_->reference();
  for (auto& mu : enumerate_excitations(space_->spin_orbitals(), n, max_rank_)) {
    const Determinant target = (ref ^ mu.hole_mask()) | mu.particle_mask();
    auto d = space_->index_of(target);
    if (!d) continue;
    pos_of_det_[*d] = static_cast<long>(indices_.size());
    det_of_.push_back(*d);
    indices_.push_back(std::move(mu));
  }
  if (full_ && indices_.size() + 1 != space_->size())
    throw InternalError("excitation set does not cover the determinant space");
}

nlohmann::json ExcitationSet::descriptor() const {
  nlohmann::json j;
  j["spin_orbitals"] = space_->spin_orbitals();
  j["electrons"] = space_->electrons();
  j["ms2"] = space_->ms2() ? nlohmann::json(*space_->ms2()) : nlohmann::json(nullptr);
  j["max_rank"] = max_rank_ ? nlohmann::json(*max_rank_) : nlohmann::json("full");
  j["size"] = indices_.size();
  return j;
}

AmplitudeVector::AmplitudeVector(ExcitationSetPtr set, Eigen::VectorXd v, bool is_dual)
    : index_set(std::move(set)), values(std::move(v)), dual(is_dual) {
  if (!index_set) throw InternalError("AmplitudeVector: null index set");
  if (static_cast<std::size_t>(values.size()) != index_set->size())
    throw DimensionMismatch("amplitude vector has " + std::to_string(values.size()) +
                            " entries for an index set of size " +
                            std::to_string(index_set->size()));
  if (!values.allFinite()) throw Error("amplitude vector has non-finite entries");
}

AmplitudeVector AmplitudeVector::zero(ExcitationSetPtr set, bool is_dual) {
  const auto n = static_cast<Eigen::Index>(set->size());
  return AmplitudeVector(std::move(set), Eigen::VectorXd::Zero(n), is_dual);
}

nlohmann::json to_json(const AmplitudeVector& t) {
  nlohmann::json j;
  j["index_set"] = t.index_set->descriptor();
  j["dual"] = t.dual;
  j["values"] = std::vector<double>(t.values.data(), t.values.data() + t.values.size());
  std::vector<std::string> labels;
  labels.reserve(t.size());
  for (const auto& mu : t.index_set->indices()) labels.push_back(mu.to_string());
  j["labels"] = std::move(labels);
  return j;
}

AmplitudeVector amplitudes_from_json(const nlohmann::json& j, ExcitationSetPtr set) {
  if (!j.contains("index_set") || !j.contains("values"))
    throw Error("amplitude JSON needs index_set and values");
  if (j.at("index_set") != set->descriptor())
    throw DimensionMismatch("amplitude JSON index set " + j.at("index_set").dump() +
                            " does not match " + set->descriptor().dump());
  const auto vals = j.at("values").get<std::vector<double>>();
  Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
  return AmplitudeVector(std::move(set), std::move(v), j.value("dual", false));
}

ExcitationAlgebra::ExcitationAlgebra(std::shared_ptr<const DeterminantSpace> space,
                                     PhaseConvention convention)
    : space_(std::move(space)), convention_(convention) {
  if (!space_) throw InternalError("ExcitationAlgebra: null space");
  const std::size_t n = space_->size();
  if (n >= std::numeric_limits<std::uint32_t>::max())
    throw InvalidDimension("determinant space too large for the excitation pattern");
  const auto dets = space_->dets();
  const Determinant occ = space_->reference();
  const bool signed_ = convention_ == PhaseConvention::second_quantized;

  row_ptr_.assign(n + 1, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const Determinant& target = dets[r];
    for (std::size_t c = 0; c < n; ++c) {
      if (c == r) continue;
      const Determinant& src = dets[c];
      const Determinant holes = src.minus(target);
      const Determinant parts = target.minus(src);
      if (!occ.contains(holes) || parts.intersects(occ)) continue;
      auto m = space_->index_of((occ ^ holes) | parts);
      if (!m) continue;
      int phase = 1;
      if (signed_) {
        ExcitationIndex mu(holes.orbitals(), parts.orbitals());
        phase = apply_excitation(mu, src, convention_)->second;
      }
      col_.push_back(static_cast<std::uint32_t>(c));
      key_.push_back(static_cast<std::uint32_t>(*m));
      phase_.push_back(static_cast<std::int8_t>(phase));
    }
    row_ptr_[r + 1] = static_cast<std::uint32_t>(col_.size());
  }

  ref_phase_.assign(n, 1);
  for (std::size_t r = 0; r < n; ++r)
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e)
      if (col_[e] == 0) ref_phase_[key_[e]] = phase_[e];
  ref_phase_vec_.resize(static_cast<Eigen::Index>(n));
  for (std::size_t d = 0; d < n; ++d) ref_phase_vec_[d] = ref_phase_[d];

  key_ptr_.assign(n + 1, 0);
  for (auto k : key_) ++key_ptr_[k + 1];
  for (std::size_t m = 0; m < n; ++m) key_ptr_[m + 1] += key_ptr_[m];
  by_key_.resize(key_.size());
  std::vector<std::uint32_t> fill(key_ptr_.begin(), key_ptr_.end() - 1);
  for (std::uint32_t e = 0; e < key_.size(); ++e) by_key_[fill[key_[e]]++] = e;
}

void ExcitationAlgebra::check_vector(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != dim())
    throw DimensionMismatch("vector of length " + std::to_string(v.size()) +
                            " applied on a space of dimension " + std::to_string(dim()));
}

Eigen::VectorXd ExcitationAlgebra::scatter(const AmplitudeVector& t) const {
  if (&t.index_set->space() != space_.get() && t.index_set->space().size() != dim())
    throw DimensionMismatch("amplitudes belong to a different determinant space");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  for (std::size_t k = 0; k < t.size(); ++k) out[t.index_set->det_of(k)] = t.values[k];
  return out;
}

Eigen::VectorXd ExcitationAlgebra::gather(const Eigen::VectorXd& det_array,
                                          const ExcitationSet& set) const {
  check_vector(det_array);
  Eigen::VectorXd out(static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) out[k] = det_array[set.det_of(k)];
  return out;
}

Eigen::VectorXd ExcitationAlgebra::apply(const Eigen::VectorXd& t, const Eigen::VectorXd& v) const {
  check_vector(t);
  check_vector(v);
  const std::size_t n = dim();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e)
      acc += t[key_[e]] * phase_[e] * v[col_[e]];
    out[r] = acc;
  }
  return out;
}

Eigen::VectorXd ExcitationAlgebra::apply_adjoint(const Eigen::VectorXd& t,
                                                 const Eigen::VectorXd& v) const {
  check_vector(t);
  check_vector(v);
  const std::size_t n = dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e)
      out[col_[e]] += t[key_[e]] * phase_[e] * vr;
  }
  return out;
}

Eigen::VectorXd ExcitationAlgebra::exp_apply(const Eigen::VectorXd& t, const Eigen::VectorXd& v,
                                             int sign) const {
  Eigen::VectorXd out = v;
  Eigen::VectorXd term = v;
  for (int k = 1; k <= electrons(); ++k) {
    term = apply(t, term) * (static_cast<double>(sign) / k);
    if (term.isZero(0.0)) break;
    out += term;
  }
  return out;
}

Eigen::VectorXd ExcitationAlgebra::exp_adjoint_apply(const Eigen::VectorXd& t,
                                                     const Eigen::VectorXd& v, int sign) const {
  Eigen::VectorXd out = v;
  Eigen::VectorXd term = v;
  for (int k = 1; k <= electrons(); ++k) {
    term = apply_adjoint(t, term) * (static_cast<double>(sign) / k);
    if (term.isZero(0.0)) break;
    out += term;
  }
  return out;
}

Eigen::VectorXd ExcitationAlgebra::pair_with_excited(const Eigen::VectorXd& u,
                                                     const Eigen::VectorXd& w) const {
  check_vector(u);
  check_vector(w);
  const std::size_t n = dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const double wr = w[r];
    if (wr == 0.0) continue;
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e)
      out[key_[e]] += phase_[e] * u[col_[e]] * wr;
  }
  return out;
}

Eigen::VectorXd ExcitationAlgebra::apply_single(std::size_t m, const Eigen::VectorXd& v) const {
  check_vector(v);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
  if (m == 0 || m >= dim()) return out;
  // Rows of the entries are recovered by binary search in row_ptr_.
  for (auto i = key_ptr_[m]; i < key_ptr_[m + 1]; ++i) {
    const auto e = by_key_[i];
    const auto r = static_cast<std::size_t>(
        std::upper_bound(row_ptr_.begin(), row_ptr_.end(), e) - row_ptr_.begin() - 1);
    out[r] += phase_[e] * v[col_[e]];
  }
  return out;
}

Eigen::MatrixXd ExcitationAlgebra::dense(const Eigen::VectorXd& t) const {
  check_vector(t);
  const auto n = static_cast<Eigen::Index>(dim());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (auto e = row_ptr_[r]; e < row_ptr_[r + 1]; ++e) m(r, col_[e]) += t[key_[e]] * phase_[e];
  return m;
}

Eigen::VectorXd cluster_apply(const ExcitationAlgebra& alg, const AmplitudeVector& t,
                              const Eigen::VectorXd& v) {
  return alg.apply(alg.scatter(t), v);
}

Eigen::VectorXd cluster_adjoint_apply(const ExcitationAlgebra& alg, const AmplitudeVector& t,
                                      const Eigen::VectorXd& v) {
  return alg.apply_adjoint(alg.scatter(t), v);
}

Eigen::VectorXd exp_apply(const ExcitationAlgebra& alg, const AmplitudeVector& t,
                          const Eigen::VectorXd& v, int sign) {
  if (sign != 1 && sign != -1) throw Error("exp_apply sign must be +1 or -1");
  return alg.exp_apply(alg.scatter(t), v, sign);
}

AmplitudeVector ci_to_cc(const ExcitationAlgebra& alg, const Eigen::VectorXd& psi,
                         ExcitationSetPtr set, double intermediate_tol) {
  if (static_cast<std::size_t>(psi.size()) != alg.dim())
    throw DimensionMismatch("CI vector length does not match the space");
  const double c0 = psi[0];
  if (!(std::abs(c0) >= intermediate_tol))
    throw NotIntermediatelyNormalisable("reference coefficient " + std::to_string(c0) +
                                        " is below the intermediate-normalisation tolerance");
  // R Psi0 = psi/c0 - Psi0, so r_mu = s_mu * (psi/c0)_mu.
  Eigen::VectorXd r = psi.cwiseProduct(alg.ref_phases()) / c0;
  r[0] = 0.0;
  Eigen::VectorXd term = Eigen::VectorXd::Zero(psi.size());
  term[0] = 1.0;
  Eigen::VectorXd log_ref = Eigen::VectorXd::Zero(psi.size());
  for (int k = 1; k <= alg.electrons(); ++k) {
    term = alg.apply(r, term);
    if (term.isZero(0.0)) break;
    log_ref += ((k % 2) ? 1.0 : -1.0) / k * term;
  }
  Eigen::VectorXd t = log_ref.cwiseProduct(alg.ref_phases());
  t[0] = 0.0;
  return AmplitudeVector(set, alg.gather(t, *set));
}

Eigen::VectorXd cc_to_ci(const ExcitationAlgebra& alg, const AmplitudeVector& t) {
  Eigen::VectorXd ref = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(alg.dim()));
  ref[0] = 1.0;
  return exp_apply(alg, t, ref, 1);
}

Eigen::VectorXd NormMetric::on(const ExcitationSet& set) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(set.size()));
  for (std::size_t k = 0; k < set.size(); ++k) out[k] = weights[set.det_of(k)];
  return out;
}

NormMetric NormMetric::scaled(double c) const {
  NormMetric m = *this;
  m.weights *= c;
  return m;
}

nlohmann::json NormMetric::descriptor() const {
  return {{"kind", "diagonal"},
          {"definition", "D = diag(H) - E* + shift"},
          {"shift", shift},
          {"e_star", e_star},
          {"min_weight", weights.size() > 1 ? weights.tail(weights.size() - 1).minCoeff() : 0.0},
          {"max_weight", weights.size() > 0 ? weights.maxCoeff() : 0.0},
          {"reference_weight", weights.size() > 0 ? weights[0] : 0.0}};
}

NormMetric build_norm_metric(const FciHamiltonian& hmat, double e_star, double shift) {
  NormMetric m;
  m.shift = shift;
  m.e_star = e_star;
  m.weights = hmat.diagonal().array() - e_star + shift;
  Eigen::Index at = 0;
  const double lo = m.weights.minCoeff(&at);
  if (!(lo > 0.0)) {
    const double need = shift - lo;
    throw InvalidShift("nonpositive metric weight " + std::to_string(lo) + " at determinant " +
                       std::to_string(at) + "; use a shift larger than " + std::to_string(need));
  }
  return m;
}

NormMetric metric_from_weights(Eigen::VectorXd weights, double shift, double e_star) {
  if (weights.size() == 0 || !(weights.minCoeff() > 0.0))
    throw InvalidShift("metric weights must be positive");
  NormMetric m;
  m.weights = std::move(weights);
  m.shift = shift;
  m.e_star = e_star;
  return m;
}

double vnorm(const Eigen::VectorXd& t, const Eigen::VectorXd& weights) {
  if (t.size() != weights.size()) throw DimensionMismatch("vnorm: length mismatch");
  return std::sqrt((weights.array() * t.array().square()).sum());
}

double dual_norm(const Eigen::VectorXd& w, const Eigen::VectorXd& weights) {
  if (w.size() != weights.size()) throw DimensionMismatch("dual_norm: length mismatch");
  return std::sqrt((w.array().square() / weights.array()).sum());
}

double vnorm(const AmplitudeVector& t, const NormMetric& d) {
  return vnorm(t.values, d.on(*t.index_set));
}

double dual_norm(const AmplitudeVector& w, const NormMetric& d) {
  return dual_norm(w.values, d.on(*w.index_set));
}

}  // namespace fullcc
