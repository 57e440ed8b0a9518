#pragma once

// Slater determinants as occupation bitmasks, the N-particle determinant
// basis, excitation index sets, and the action of (de-)excitation operators.

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fullcc {

/// Largest number of spin orbitals a Determinant can hold.
inline constexpr int kMaxSpinOrbitals = 128;

/// Sign convention for excitation operators.
///
/// `paper_signless` maps a basis determinant to a basis determinant with
/// phase +1. `second_quantized` uses the fermionic phase of
/// a+_{l1}...a+_{lj} a_{ij}...a_{i1}.
enum class PhaseConvention { paper_signless, second_quantized };

PhaseConvention parse_convention(std::string_view text);
std::string_view to_string(PhaseConvention c);

/// Occupation bitmask over at most kMaxSpinOrbitals spin orbitals
/// (0-based). Ordering compares the masks as unsigned integers.
class Determinant {
 public:
  constexpr Determinant() = default;

  static Determinant from_orbitals(std::span<const int> occupied);
  /// The determinant with orbitals 0..n-1 occupied.
  static Determinant lowest(int n);

  bool test(int p) const noexcept { return (words_[p >> 6] >> (p & 63)) & 1u; }
  void set(int p) noexcept { words_[p >> 6] |= std::uint64_t{1} << (p & 63); }
  void reset(int p) noexcept { words_[p >> 6] &= ~(std::uint64_t{1} << (p & 63)); }

  int popcount() const noexcept {
    return std::popcount(words_[0]) + std::popcount(words_[1]);
  }
  /// Number of occupied orbitals with index strictly below p.
  int popcount_below(int p) const noexcept;
  bool empty() const noexcept { return (words_[0] | words_[1]) == 0; }

  std::vector<int> orbitals() const;
  std::uint64_t word(int i) const noexcept { return words_[i]; }

  Determinant operator&(const Determinant& o) const noexcept {
    return {words_[0] & o.words_[0], words_[1] & o.words_[1]};
  }
  Determinant operator|(const Determinant& o) const noexcept {
    return {words_[0] | o.words_[0], words_[1] | o.words_[1]};
  }
  Determinant operator^(const Determinant& o) const noexcept {
    return {words_[0] ^ o.words_[0], words_[1] ^ o.words_[1]};
  }
  /// Bits set here and not in o.
  Determinant minus(const Determinant& o) const noexcept {
    return {words_[0] & ~o.words_[0], words_[1] & ~o.words_[1]};
  }
  bool intersects(const Determinant& o) const noexcept {
    return ((words_[0] & o.words_[0]) | (words_[1] & o.words_[1])) != 0;
  }
  bool contains(const Determinant& o) const noexcept {
    return (o.words_[0] & ~words_[0]) == 0 && (o.words_[1] & ~words_[1]) == 0;
  }

  friend bool operator==(const Determinant&, const Determinant&) = default;
  friend std::strong_ordering operator<=>(const Determinant& a, const Determinant& b) noexcept {
    if (auto c = a.words_[1] <=> b.words_[1]; c != 0) return c;
    return a.words_[0] <=> b.words_[0];
  }

  /// 1-based orbital list, e.g. "{1,2}".
  std::string to_string() const;

 private:
  constexpr Determinant(std::uint64_t lo, std::uint64_t hi) : words_{lo, hi} {}
  std::array<std::uint64_t, 2> words_{};
};

struct DeterminantHash {
  std::size_t operator()(const Determinant& d) const noexcept {
    std::uint64_t h = d.word(0) * 0x9E3779B97F4A7C15ULL;
    h ^= d.word(1) + 0x7F4A7C159E3779B9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

/// Spin label per spin orbital: +1 alpha, -1 beta. Default layout is
/// alternating (spatial orbital p -> spin orbitals 2p alpha, 2p+1 beta).
std::vector<int> alternating_spins(int spin_orbitals);

/// Ordered determinant basis of the N-particle space over K spin orbitals,
/// optionally restricted to one Sz sector. Ordinal 0 is the reference
/// determinant (orbitals 0..N-1 occupied).
class DeterminantSpace {
 public:
  DeterminantSpace(int spin_orbitals, int electrons, std::optional<int> ms2 = std::nullopt,
                   std::vector<int> spins = {});

  int spin_orbitals() const noexcept { return k_; }
  int electrons() const noexcept { return n_; }
  std::optional<int> ms2() const noexcept { return ms2_; }
  std::span<const int> spins() const noexcept { return spins_; }

  std::size_t size() const noexcept { return dets_.size(); }
  const Determinant& operator[](std::size_t i) const noexcept { return dets_[i]; }
  std::span<const Determinant> dets() const noexcept { return dets_; }
  const Determinant& reference() const noexcept { return dets_.front(); }

  std::optional<std::size_t> index_of(const Determinant& d) const;

  /// 2*Sz of a determinant under this space's spin labels.
  int ms2_of(const Determinant& d) const;

 private:
  int k_;
  int n_;
  std::optional<int> ms2_;
  std::vector<int> spins_;
  std::vector<Determinant> dets_;
  std::unordered_map<Determinant, std::size_t, DeterminantHash> index_;
};

DeterminantSpace enumerate_determinants(int spin_orbitals, int electrons,
                                        std::optional<int> ms2 = std::nullopt);

/// Excitation index mu: strictly increasing holes within the occupied
/// reference orbitals 0..N-1 and particles within the virtual orbitals N..K-1.
struct ExcitationIndex {
  std::vector<int> holes;
  std::vector<int> particles;

  ExcitationIndex() = default;
  ExcitationIndex(std::vector<int> holes_, std::vector<int> particles_);

  int rank() const noexcept { return static_cast<int>(holes.size()); }
  const Determinant& hole_mask() const noexcept { return hole_mask_; }
  const Determinant& particle_mask() const noexcept { return particle_mask_; }

  /// Throws InvalidDimension unless mu is a valid index for (K, N).
  void validate(int spin_orbitals, int electrons) const;

  /// "(1,2->5,6)" with 1-based orbitals.
  std::string to_string() const;

  friend bool operator==(const ExcitationIndex& a, const ExcitationIndex& b) {
    return a.holes == b.holes && a.particles == b.particles;
  }

 private:
  Determinant hole_mask_;
  Determinant particle_mask_;
};

/// Rank-major, then lexicographic in (holes, particles). Default max_rank = N.
std::vector<ExcitationIndex> enumerate_excitations(int spin_orbitals, int electrons,
                                                   std::optional<int> max_rank = std::nullopt);

using PhasedDeterminant = std::pair<Determinant, int>;

/// X_mu d. Empty when a hole of mu is unoccupied in d or a particle of mu is
/// occupied in d.
std::optional<PhasedDeterminant> apply_excitation(const ExcitationIndex& mu, const Determinant& d,
                                                  PhaseConvention convention);

/// X_mu^dagger d (particles annihilated, holes re-created).
std::optional<PhasedDeterminant> apply_deexcitation(const ExcitationIndex& mu,
                                                    const Determinant& d,
                                                    PhaseConvention convention);

/// The unique mu with X_mu ref = d; empty iff d == ref.
std::optional<ExcitationIndex> excitation_between(const Determinant& ref, const Determinant& d);

/// Fermionic sign of a_p acting on d (d must contain p).
inline int annihilation_sign(const Determinant& d, int p) noexcept {
  return (d.popcount_below(p) & 1) ? -1 : 1;
}

}  // namespace fullcc
