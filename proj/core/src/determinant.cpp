#include "fullcc/determinant.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fullcc/error.hpp"

namespace fullcc {

namespace {

constexpr double kMaxDimension = 2.0e7;

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

// Calls fn(combo) for every increasing k-subset of pool, lexicographically.
template <class Fn>
void for_each_combination(const std::vector<int>& pool, int k, Fn&& fn) {
  const int n = static_cast<int>(pool.size());
  if (k > n || k < 0) return;
  std::vector<int> pos(k);
  for (int i = 0; i < k; ++i) pos[i] = i;
  std::vector<int> combo(k);
  while (true) {
    for (int i = 0; i < k; ++i) combo[i] = pool[pos[i]];
    fn(combo);
    int i = k - 1;
    while (i >= 0 && pos[i] == n - k + i) --i;
    if (i < 0) return;
    ++pos[i];
    for (int j = i + 1; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
}

std::vector<int> iota_vec(int from, int to) {
  std::vector<int> v;
  for (int i = from; i < to; ++i) v.push_back(i);
  return v;
}

std::string join_1based(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i] + 1;
  return os.str();
}

// Applies a sequence of ladder operators (annihilate, then create) to d and
// tracks the fermionic sign. Returns empty when the operator string kills d.
std::optional<PhasedDeterminant> ladder(const Determinant& d, const std::vector<int>& annihilate,
                                        const std::vector<int>& create, bool signed_) {
  Determinant out = d;
  int sign = 1;
  for (int p : annihilate) {
    if (!out.test(p)) return std::nullopt;
    if (signed_ && (out.popcount_below(p) & 1)) sign = -sign;
    out.reset(p);
  }
  for (int p : create) {
    if (out.test(p)) return std::nullopt;
    if (signed_ && (out.popcount_below(p) & 1)) sign = -sign;
    out.set(p);
  }
  return PhasedDeterminant{out, sign};
}

}  // namespace

PhaseConvention parse_convention(std::string_view text) {
  if (text == "paper" || text == "paper_signless" || text == "signless")
    return PhaseConvention::paper_signless;
  if (text == "second-quantized" || text == "second_quantized" || text == "sq")
    return PhaseConvention::second_quantized;
  throw ConfigError("unknown phase convention '" + std::string(text) +
                    "' (expected paper or second-quantized)");
}

std::string_view to_string(PhaseConvention c) {
  return c == PhaseConvention::paper_signless ? "paper" : "second-quantized";
}

Determinant Determinant::from_orbitals(std::span<const int> occupied) {
  Determinant d;
  for (int p : occupied) {
    if (p < 0 || p >= kMaxSpinOrbitals)
      throw InvalidDimension("orbital index " + std::to_string(p) + " out of range");
    d.set(p);
  }
  return d;
}

Determinant Determinant::lowest(int n) {
  Determinant d;
  for (int p = 0; p < n; ++p) d.set(p);
  return d;
}

int Determinant::popcount_below(int p) const noexcept {
  if (p <= 0) return 0;
  if (p < 64) return std::popcount(words_[0] & ((std::uint64_t{1} << p) - 1));
  int c = std::popcount(words_[0]);
  if (p == 64) return c;
  if (p >= 128) return c + std::popcount(words_[1]);
  return c + std::popcount(words_[1] & ((std::uint64_t{1} << (p - 64)) - 1));
}

std::vector<int> Determinant::orbitals() const {
  std::vector<int> out;
  out.reserve(popcount());
  for (int w = 0; w < 2; ++w) {
    std::uint64_t bits = words_[w];
    while (bits) {
      out.push_back(64 * w + std::countr_zero(bits));
      bits &= bits - 1;
    }
  }
  return out;
}

std::string Determinant::to_string() const { return "{" + join_1based(orbitals()) + "}"; }

std::vector<int> alternating_spins(int spin_orbitals) {
  std::vector<int> s(spin_orbitals);
  for (int p = 0; p < spin_orbitals; ++p) s[p] = (p % 2 == 0) ? 1 : -1;
  return s;
}

DeterminantSpace::DeterminantSpace(int spin_orbitals, int electrons, std::optional<int> ms2,
                                   std::vector<int> spins)
    : k_(spin_orbitals), n_(electrons), ms2_(ms2), spins_(std::move(spins)) {
  if (n_ < 1 || k_ < n_)
    throw InvalidDimension("need K >= N >= 1, got K=" + std::to_string(k_) +
                           ", N=" + std::to_string(n_));
  if (k_ > kMaxSpinOrbitals)
    throw InvalidDimension("at most " + std::to_string(kMaxSpinOrbitals) +
                           " spin orbitals are supported");
  if (spins_.empty()) spins_ = alternating_spins(k_);
  if (static_cast<int>(spins_.size()) != k_)
    throw DimensionMismatch("spin label count does not match K");

  if (!ms2_) {
    if (binomial(k_, n_) > kMaxDimension)
      throw InvalidDimension("determinant space too large: C(" + std::to_string(k_) + "," +
                             std::to_string(n_) + ")");
    for_each_combination(iota_vec(0, k_), n_, [&](const std::vector<int>& c) {
      dets_.push_back(Determinant::from_orbitals(c));
    });
  } else {
    std::vector<int> alpha, beta;
    for (int p = 0; p < k_; ++p) (spins_[p] > 0 ? alpha : beta).push_back(p);
    if ((n_ + *ms2_) % 2 != 0)
      throw EmptySector("MS2=" + std::to_string(*ms2_) + " has the wrong parity for N=" +
                        std::to_string(n_));
    const int na = (n_ + *ms2_) / 2;
    const int nb = n_ - na;
    if (na < 0 || nb < 0 || na > static_cast<int>(alpha.size()) ||
        nb > static_cast<int>(beta.size()))
      throw EmptySector("no determinants with N=" + std::to_string(n_) +
                        " and MS2=" + std::to_string(*ms2_));
    const double count = binomial(static_cast<int>(alpha.size()), na) *
                         binomial(static_cast<int>(beta.size()), nb);
    if (count > kMaxDimension) throw InvalidDimension("determinant sector too large");
    std::vector<Determinant> astr, bstr;
    for_each_combination(alpha, na, [&](const std::vector<int>& c) {
      astr.push_back(Determinant::from_orbitals(c));
    });
    for_each_combination(beta, nb, [&](const std::vector<int>& c) {
      bstr.push_back(Determinant::from_orbitals(c));
    });
    dets_.reserve(astr.size() * bstr.size());
    for (const auto& a : astr)
      for (const auto& b : bstr) dets_.push_back(a | b);
  }
  std::sort(dets_.begin(), dets_.end());
  if (dets_.empty()) throw EmptySector("empty determinant space");
  if (dets_.front() != Determinant::lowest(n_))
    throw EmptySector("the reference determinant (first N spin orbitals) lies outside MS2=" +
                      std::to_string(ms2_.value_or(0)));

  index_.reserve(dets_.size());
  for (std::size_t i = 0; i < dets_.size(); ++i) index_.emplace(dets_[i], i);
}

std::optional<std::size_t> DeterminantSpace::index_of(const Determinant& d) const {
  auto it = index_.find(d);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int DeterminantSpace::ms2_of(const Determinant& d) const {
  int m = 0;
  for (int p : d.orbitals()) m += spins_[p];
  return m;
}

DeterminantSpace enumerate_determinants(int spin_orbitals, int electrons, std::optional<int> ms2) {
  return DeterminantSpace(spin_orbitals, electrons, ms2);
}

ExcitationIndex::ExcitationIndex(std::vector<int> holes_, std::vector<int> particles_)
    : holes(std::move(holes_)), particles(std::move(particles_)) {
  if (holes.size() != particles.size())
    throw InvalidDimension("excitation needs as many holes as particles");
  for (int p : holes) {
    if (p < 0 || p >= kMaxSpinOrbitals) throw InvalidDimension("hole index out of range");
    hole_mask_.set(p);
  }
  for (int p : particles) {
    if (p < 0 || p >= kMaxSpinOrbitals) throw InvalidDimension("particle index out of range");
    particle_mask_.set(p);
  }
}

void ExcitationIndex::validate(int spin_orbitals, int electrons) const {
  const int j = rank();
  if (j < 1 || j > electrons) throw InvalidDimension("excitation rank out of range");
  for (int i = 0; i < j; ++i) {
    if (holes[i] < 0 || holes[i] >= electrons)
      throw InvalidDimension("hole outside the occupied range in " + to_string());
    if (particles[i] < electrons || particles[i] >= spin_orbitals)
      throw InvalidDimension("particle outside the virtual range in " + to_string());
    if (i > 0 && (holes[i] <= holes[i - 1] || particles[i] <= particles[i - 1]))
      throw InvalidDimension("excitation lists must be strictly increasing: " + to_string());
  }
}

std::string ExcitationIndex::to_string() const {
  return "(" + join_1based(holes) + "->" + join_1based(particles) + ")";
}

std::vector<ExcitationIndex> enumerate_excitations(int spin_orbitals, int electrons,
                                                   std::optional<int> max_rank) {
  if (electrons < 1 || spin_orbitals < electrons)
    throw InvalidDimension("need K >= N >= 1");
  const int r = max_rank.value_or(electrons);
  if (r < 1 || r > electrons) throw InvalidDimension("max_rank must lie in 1..N");
  const auto occ = iota_vec(0, electrons);
  const auto vir = iota_vec(electrons, spin_orbitals);
  std::vector<ExcitationIndex> out;
  for (int j = 1; j <= r; ++j) {
    for_each_combination(occ, j, [&](const std::vector<int>& h) {
      for_each_combination(vir, j, [&](const std::vector<int>& p) { out.emplace_back(h, p); });
    });
  }
  return out;
}

std::optional<PhasedDeterminant> apply_excitation(const ExcitationIndex& mu, const Determinant& d,
                                                  PhaseConvention convention) {
  if (convention == PhaseConvention::paper_signless) {
    if (!d.contains(mu.hole_mask()) || d.intersects(mu.particle_mask())) return std::nullopt;
    return PhasedDeterminant{(d ^ mu.hole_mask()) | mu.particle_mask(), 1};
  }
  // a+_{l1} ... a+_{lj} a_{ij} ... a_{i1}: rightmost acts first.
  std::vector<int> create(mu.particles.rbegin(), mu.particles.rend());
  return ladder(d, mu.holes, create, true);
}

std::optional<PhasedDeterminant> apply_deexcitation(const ExcitationIndex& mu,
                                                    const Determinant& d,
                                                    PhaseConvention convention) {
  if (convention == PhaseConvention::paper_signless) {
    if (!d.contains(mu.particle_mask()) || d.intersects(mu.hole_mask())) return std::nullopt;
    return PhasedDeterminant{(d ^ mu.particle_mask()) | mu.hole_mask(), 1};
  }
  // Adjoint string a+_{i1} ... a+_{ij} a_{lj} ... a_{l1}.
  std::vector<int> create(mu.holes.rbegin(), mu.holes.rend());
  return ladder(d, mu.particles, create, true);
}

std::optional<ExcitationIndex> excitation_between(const Determinant& ref, const Determinant& d) {
  if (d == ref) return std::nullopt;
  if (d.popcount() != ref.popcount())
    throw InternalError("determinants " + ref.to_string() + " and " + d.to_string() +
                        " have different particle numbers");
  return ExcitationIndex(ref.minus(d).orbitals(), d.minus(ref).orbitals());
}

}  // namespace fullcc
