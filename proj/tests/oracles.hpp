#pragma once

// Independent reference implementations used only by the tests. Nothing here
// calls the library routine it is meant to check.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fullcc/analysis.hpp"
#include "fullcc/cluster.hpp"
#include "fullcc/determinant.hpp"
#include "fullcc/hamiltonian.hpp"
#include "fullcc/integrals.hpp"

namespace oracle {

inline std::filesystem::path fixture_dir() { return FULLCC_FIXTURE_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return fixture_dir() / name; }

inline std::uint64_t binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  long double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return static_cast<std::uint64_t>(r + 0.5L);
}

/// Occupation list as a plain 64-bit mask (K <= 64 in tests).
inline std::uint64_t mask_of(const fullcc::Determinant& d) { return d.word(0); }

/// Sign of a_p on a bit string, or 0 if p is empty.
inline int annihilate(std::uint64_t& m, int p) {
  if (!((m >> p) & 1u)) return 0;
  const int below = __builtin_popcountll(m & ((std::uint64_t{1} << p) - 1));
  m &= ~(std::uint64_t{1} << p);
  return (below & 1) ? -1 : 1;
}

inline int create(std::uint64_t& m, int p) {
  if ((m >> p) & 1u) return 0;
  const int below = __builtin_popcountll(m & ((std::uint64_t{1} << p) - 1));
  m |= std::uint64_t{1} << p;
  return (below & 1) ? -1 : 1;
}

/// Dense matrix of X_mu on the space: second-quantized string
/// a+_{l1}...a+_{lj} a_{ij}...a_{i1} or plain bit replacement.
inline Eigen::MatrixXd excitation_matrix(const fullcc::DeterminantSpace& sp,
                                         const std::vector<int>& holes,
                                         const std::vector<int>& particles, bool signed_) {
  const auto n = static_cast<Eigen::Index>(sp.size());
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    std::uint64_t m = mask_of(sp[static_cast<std::size_t>(c)]);
    int sign = 1;
    for (int h : holes) sign *= annihilate(m, h);
    for (auto it = particles.rbegin(); it != particles.rend() && sign != 0; ++it)
      sign *= create(m, *it);
    if (sign == 0) continue;
    for (Eigen::Index r = 0; r < n; ++r)
      if (mask_of(sp[static_cast<std::size_t>(r)]) == m) x(r, c) = signed_ ? sign : 1.0;
  }
  return x;
}

/// Dense cluster matrix sum_mu t_mu X_mu with t_mu stored at the ordinal of X_mu Psi0.
inline Eigen::MatrixXd cluster_matrix(const fullcc::DeterminantSpace& sp, const Eigen::VectorXd& t,
                                      bool signed_) {
  const auto n = static_cast<Eigen::Index>(sp.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  const std::uint64_t ref = mask_of(sp[0]);
  for (Eigen::Index d = 1; d < n; ++d) {
    if (t[d] == 0.0) continue;
    const std::uint64_t target = mask_of(sp[static_cast<std::size_t>(d)]);
    std::vector<int> holes, parts;
    for (int p = 0; p < 64; ++p) {
      if (((ref >> p) & 1u) && !((target >> p) & 1u)) holes.push_back(p);
      if (!((ref >> p) & 1u) && ((target >> p) & 1u)) parts.push_back(p);
    }
    m += t[d] * excitation_matrix(sp, holes, parts, signed_);
  }
  return m;
}

/// Spatial chemists' integral to spin-orbital physicists' <pq|rs> (spin p = q%2).
inline double phys(const fullcc::IntegralTable& t, int p, int q, int r, int s) {
  if ((p % 2) != (r % 2) || (q % 2) != (s % 2)) return 0.0;
  return t.eri(p / 2, r / 2, q / 2, s / 2);
}

/// H = sum h_pq a+_p a_q + 1/4 sum <pq||rs> a+_p a+_q a_s a_r applied term by
/// term to bit strings (second quantization, no Slater-Condon rules).
inline Eigen::MatrixXd brute_force_hamiltonian(const fullcc::DeterminantSpace& sp,
                                               const fullcc::IntegralTable& t) {
  const int k = sp.spin_orbitals();
  const auto n = static_cast<Eigen::Index>(sp.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  auto row_of = [&](std::uint64_t m) -> Eigen::Index {
    for (Eigen::Index r = 0; r < n; ++r)
      if (mask_of(sp[static_cast<std::size_t>(r)]) == m) return r;
    return -1;
  };
  for (Eigen::Index c = 0; c < n; ++c) {
    const std::uint64_t m0 = mask_of(sp[static_cast<std::size_t>(c)]);
    for (int p = 0; p < k; ++p)
      for (int q = 0; q < k; ++q) {
        if ((p % 2) != (q % 2)) continue;
        const double v = t.h(p / 2, q / 2);
        if (v == 0.0) continue;
        std::uint64_t m = m0;
        int s = annihilate(m, q);
        if (s) s *= create(m, p);
        if (!s) continue;
        const auto r = row_of(m);
        if (r >= 0) h(r, c) += s * v;
      }
    for (int p = 0; p < k; ++p)
      for (int q = 0; q < k; ++q)
        for (int r = 0; r < k; ++r)
          for (int s_ = 0; s_ < k; ++s_) {
            const double v = phys(t, p, q, r, s_) - phys(t, p, q, s_, r);
            if (v == 0.0) continue;
            std::uint64_t m = m0;
            int s = annihilate(m, r);
            if (s) s *= annihilate(m, s_);
            if (s) s *= create(m, q);
            if (s) s *= create(m, p);
            if (!s) continue;
            const auto row = row_of(m);
            if (row >= 0) h(row, c) += 0.25 * s * v;
          }
  }
  return h;
}

/// Symmetric random integrals built independently of the library generator.
inline fullcc::IntegralTable random_table(int norb, int nelec, int ms2, std::uint64_t seed) {
  fullcc::IntegralTable t(norb, nelec, ms2);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  t.e_core = u(rng);
  for (int p = 0; p < norb; ++p)
    for (int q = 0; q <= p; ++q) t.h(p, q) = t.h(q, p) = (p == q ? -1.0 + p : 0.2 * u(rng));
  for (int p = 0; p < norb; ++p)
    for (int q = 0; q < norb; ++q)
      for (int r = 0; r < norb; ++r)
        for (int s = 0; s < norb; ++s) {
          const int pq = std::max(p, q) * (std::max(p, q) + 1) / 2 + std::min(p, q);
          const int rs = std::max(r, s) * (std::max(r, s) + 1) / 2 + std::min(r, s);
          if (p < q || r < s || pq < rs) continue;
          t.set_eri(p, q, r, s, 0.1 * u(rng) + (p == q && r == s ? 0.4 : 0.0));
        }
  return t;
}

/// D-weighted operator norm V -> V: sigma_max(D^{1/2} M D^{-1/2}).
inline double vv_norm(const Eigen::MatrixXd& m, const Eigen::VectorXd& d) {
  const Eigen::VectorXd s = d.cwiseSqrt();
  const Eigen::MatrixXd b = s.asDiagonal() * m * s.cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
  return svd.singularValues()(0);
}

/// Singular values of D^{-1/2} M D^{-1/2} (V -> V* scaling).
inline Eigen::VectorXd vdual_singular_values(const Eigen::MatrixXd& m, const Eigen::VectorXd& d) {
  const Eigen::VectorXd s = d.cwiseSqrt().cwiseInverse();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.asDiagonal() * m * s.asDiagonal());
  return svd.singularValues();
}

/// Inf-sup constant on the Euclidean complement of psi, literally
/// sigma_min(N^{-1/2} Q^T (H - E) Q N^{-1/2}) with N = Q^T D Q.
inline double gamma_literal(const Eigen::MatrixXd& h, double e, const Eigen::VectorXd& psi,
                            const Eigen::VectorXd& d) {
  const Eigen::Index n = h.rows();
  const Eigen::VectorXd v = psi.normalized();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> proj(Eigen::MatrixXd::Identity(n, n) -
                                                       v * v.transpose());
  const Eigen::MatrixXd q = proj.eigenvectors().rightCols(n - 1);
  const Eigen::MatrixXd nm = q.transpose() * d.asDiagonal() * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ns(nm);
  const Eigen::MatrixXd nih = ns.operatorInverseSqrt();
  const Eigen::MatrixXd b =
      nih * q.transpose() * (h - e * Eigen::MatrixXd::Identity(n, n)) * q * nih;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
  return svd.singularValues()(n - 2);
}

/// Diagonal Hamiltonian wrapped as an FciHamiltonian over (K, N).
inline fullcc::FciHamiltonian diagonal_hamiltonian(std::shared_ptr<const fullcc::DeterminantSpace> sp,
                                                   const Eigen::VectorXd& diag) {
  fullcc::FciHamiltonian h;
  h.space = sp;
  h.matrix = fullcc::SparseMatrix(diag.size(), diag.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index i = 0; i < diag.size(); ++i) trip.emplace_back(i, i, diag[i]);
  h.matrix.setFromTriplets(trip.begin(), trip.end());
  return h;
}

inline fullcc::FciHamiltonian dense_hamiltonian(std::shared_ptr<const fullcc::DeterminantSpace> sp,
                                                const Eigen::MatrixXd& m) {
  fullcc::FciHamiltonian h;
  h.space = sp;
  h.matrix = m.sparseView();
  return h;
}

}  // namespace oracle
