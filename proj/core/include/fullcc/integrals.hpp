#pragma once

// FCIDUMP ingestion and the spin-orbital expansion of molecular integrals.

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fullcc {

/// Spatial-orbital integrals in chemists' notation. Indices are 0-based.
class IntegralTable {
 public:
  IntegralTable() = default;
  IntegralTable(int norb, int nelec, int ms2);

  int norb() const noexcept { return norb_; }
  int nelec() const noexcept { return nelec_; }
  int ms2() const noexcept { return ms2_; }

  double e_core = 0.0;
  Eigen::MatrixXd h;
  std::vector<int> orbsym;
  int isym = 1;
  /// Orbital energies from "v p 0 0 0" records; informational only.
  std::vector<double> orbital_energies;

  /// (pq|rs) with full 8-fold symmetry.
  double eri(int p, int q, int r, int s) const;
  /// Sets (pq|rs) and all its symmetry images.
  void set_eri(int p, int q, int r, int s, double v);

  /// Canonical key of (pq|rs): pair indices ordered so each element has one key.
  std::uint64_t eri_key(int p, int q, int r, int s) const;

  /// Every unique nonzero element as (p,q,r,s,value) with p>=q, r>=s, pq>=rs.
  struct EriEntry {
    int p, q, r, s;
    double value;
  };
  std::vector<EriEntry> unique_eris() const;

  bool dense_storage() const noexcept { return !dense_.empty() || norb_ == 0; }

 private:
  std::size_t dense_index(int p, int q, int r, int s) const {
    return ((static_cast<std::size_t>(p) * norb_ + q) * norb_ + r) * norb_ + s;
  }

  int norb_ = 0;
  int nelec_ = 0;
  int ms2_ = 0;
  std::vector<double> dense_;
  std::unordered_map<std::uint64_t, double> sparse_;
};

/// Spatial orbital count up to which ERIs are stored as a dense 4-index array.
inline constexpr int kDenseEriMaxOrbitals = 16;

IntegralTable parse_fcidump(const std::filesystem::path& path);
/// Parses FCIDUMP text; `source` names the input in error messages.
IntegralTable parse_fcidump_text(std::string_view text, const std::string& source = "<text>");

void write_fcidump(const IntegralTable& t, std::ostream& os);
void write_fcidump(const IntegralTable& t, const std::filesystem::path& path);

/// Integrals over spin orbitals. Spin orbital p carries spatial orbital
/// spatial_of(p) and spin label spin(p) (+1 alpha, -1 beta). The default
/// layout interleaves alpha and beta: 2p alpha, 2p+1 beta.
class SpinOrbitalIntegrals {
 public:
  explicit SpinOrbitalIntegrals(IntegralTable table);

  int spin_orbitals() const noexcept { return k_; }
  int electrons() const noexcept { return table_.nelec(); }
  double e_core() const noexcept { return table_.e_core; }
  const IntegralTable& table() const noexcept { return table_; }
  const std::vector<int>& spins() const noexcept { return spin_; }
  int spatial_of(int p) const noexcept { return spatial_[p]; }
  int spin(int p) const noexcept { return spin_[p]; }

  double h(int p, int q) const noexcept { return h_(p, q); }
  const Eigen::MatrixXd& h_matrix() const noexcept { return h_; }

  /// Physicists' <pq|rs> = (pr|qs) with spin deltas.
  double coulomb(int p, int q, int r, int s) const;
  /// <pq||rs> = <pq|rs> - <pq|sr>.
  double antisym(int p, int q, int r, int s) const {
    if (!cache_.empty()) return cache_[index(p, q, r, s)];
    return coulomb(p, q, r, s) - coulomb(p, q, s, r);
  }
  /// <pq||pq>, cached for the diagonal Slater-Condon rule.
  double pair_diagonal(int p, int q) const noexcept { return pair_diag_(p, q); }

  /// Moves the listed spin orbitals to the front, in the given order, so that
  /// they form the reference determinant. Remaining orbitals keep their order.
  SpinOrbitalIntegrals with_reference(const std::vector<int>& occupied) const;

 private:
  std::size_t index(int p, int q, int r, int s) const noexcept {
    return ((static_cast<std::size_t>(p) * k_ + q) * k_ + r) * k_ + s;
  }
  void rebuild();

  IntegralTable table_;
  int k_ = 0;
  std::vector<int> spatial_;
  std::vector<int> spin_;
  Eigen::MatrixXd h_;
  Eigen::MatrixXd pair_diag_;
  std::vector<double> cache_;
};

/// Spin-orbital count up to which <pq||rs> is cached densely.
inline constexpr int kDenseAntisymMaxSpinOrbitals = 40;

/// Synthetic integrals with a well separated aufbau reference: increasing
/// diagonal h, weak random couplings, 8-fold symmetric ERIs.
IntegralTable random_integrals(int norb, int nelec, int ms2, std::uint64_t seed,
                               double coupling = 0.05);

SpinOrbitalIntegrals spinify(const IntegralTable& t);

}  // namespace fullcc
