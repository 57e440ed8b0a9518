#include "fullcc/integrals.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "fullcc/error.hpp"

namespace fullcc {

namespace {

constexpr double kDuplicateTol = 1e-10;

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::optional<double> parse_real(std::string tok) {
  for (char& c : tok)
    if (c == 'D' || c == 'd') c = 'E';
  const char* b = tok.c_str();
  char* e = nullptr;
  errno = 0;
  const double v = std::strtod(b, &e);
  if (e == b || *e != '\0' || errno == ERANGE || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long> parse_int(const std::string& tok) {
  const char* b = tok.c_str();
  char* e = nullptr;
  errno = 0;
  const long v = std::strtol(b, &e, 10);
  if (e == b || *e != '\0' || errno == ERANGE) return std::nullopt;
  return v;
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Header values keyed by upper-case name; each value list keeps its tokens.
struct Header {
  std::map<std::string, std::vector<std::string>> values;
  std::size_t body_line = 0;  // 0-based line index where records start
};

Header parse_header(const std::vector<std::string>& lines, const std::string& source) {
  Header hdr;
  std::size_t i = 0;
  while (i < lines.size() && split_ws(lines[i]).empty()) ++i;
  if (i == lines.size()) throw ParseError(source, 1, "empty file, expected &FCI header");
  const std::string first = upper(lines[i]);
  const auto start = first.find("&FCI");
  if (start == std::string::npos)
    throw ParseError(source, i + 1, "expected namelist header starting with &FCI");

  std::string text;
  bool terminated = false;
  std::size_t line_no = i;
  for (; line_no < lines.size(); ++line_no) {
    std::string up = upper(lines[line_no]);
    if (line_no == i) up = up.substr(start + 4);
    std::size_t end = std::string::npos;
    for (const char* term : {"&END", "$END"}) {
      const auto pos = up.find(term);
      if (pos != std::string::npos) end = std::min(end, pos);
    }
    const auto slash = up.find('/');
    if (slash != std::string::npos) end = std::min(end, slash);
    if (end != std::string::npos) {
      text += " " + up.substr(0, end);
      terminated = true;
      break;
    }
    text += " " + up;
  }
  if (!terminated) throw ParseError(source, lines.size(), "unterminated &FCI namelist");
  hdr.body_line = line_no + 1;

  for (char& c : text)
    if (c == ',') c = ' ';
  std::string key;
  std::string pending;
  for (std::size_t p = 0; p < text.size();) {
    if (std::isspace(static_cast<unsigned char>(text[p]))) {
      ++p;
      continue;
    }
    std::size_t q = p;
    while (q < text.size() && !std::isspace(static_cast<unsigned char>(text[q])) && text[q] != '=')
      ++q;
    std::string tok = text.substr(p, q - p);
    std::size_t r = q;
    while (r < text.size() && std::isspace(static_cast<unsigned char>(text[r]))) ++r;
    if (r < text.size() && text[r] == '=') {
      if (tok.empty()) throw ParseError(source, i + 1, "malformed header: '=' without a key");
      key = tok;
      hdr.values[key];
      p = r + 1;
      continue;
    }
    if (key.empty()) throw ParseError(source, i + 1, "malformed header token '" + tok + "'");
    hdr.values[key].push_back(tok);
    p = q;
  }
  return hdr;
}

long header_int(const Header& hdr, const std::string& key, const std::string& source,
                std::optional<long> fallback) {
  auto it = hdr.values.find(key);
  if (it == hdr.values.end() || it->second.empty()) {
    if (fallback) return *fallback;
    throw ParseError(source, 1, "header is missing " + key);
  }
  if (it->second.size() != 1)
    throw ParseError(source, 1, "header key " + key + " expects a single value");
  auto v = parse_int(it->second.front());
  if (!v) throw ParseError(source, 1, "header key " + key + " is not an integer");
  return *v;
}

void set_checked(double& slot, bool& seen, double v, const std::string& source, std::size_t line,
                 const std::string& what) {
  if (seen && std::abs(slot - v) > kDuplicateTol) {
    std::ostringstream os;
    os << std::setprecision(17) << "contradictory duplicate record for " << what << ": " << slot
       << " vs " << v;
    throw ParseError(source, line, os.str());
  }
  slot = v;
  seen = true;
}

}  // namespace

IntegralTable::IntegralTable(int norb, int nelec, int ms2)
    : h(Eigen::MatrixXd::Zero(norb, norb)), norb_(norb), nelec_(nelec), ms2_(ms2) {
  if (norb < 0 || nelec < 0) throw InvalidDimension("negative orbital or electron count");
  if (norb <= kDenseEriMaxOrbitals)
    dense_.assign(static_cast<std::size_t>(norb) * norb * norb * norb, 0.0);
  orbsym.assign(norb, 1);
}

std::uint64_t IntegralTable::eri_key(int p, int q, int r, int s) const {
  auto pair = [](int a, int b) -> std::uint64_t {
    if (a < b) std::swap(a, b);
    return static_cast<std::uint64_t>(a) * (a + 1) / 2 + b;
  };
  std::uint64_t pq = pair(p, q), rs = pair(r, s);
  if (pq < rs) std::swap(pq, rs);
  return pq * (pq + 1) / 2 + rs;
}

double IntegralTable::eri(int p, int q, int r, int s) const {
  if (!dense_.empty()) return dense_[dense_index(p, q, r, s)];
  auto it = sparse_.find(eri_key(p, q, r, s));
  return it == sparse_.end() ? 0.0 : it->second;
}

void IntegralTable::set_eri(int p, int q, int r, int s, double v) {
  if (p < 0 || q < 0 || r < 0 || s < 0 || p >= norb_ || q >= norb_ || r >= norb_ || s >= norb_)
    throw InvalidDimension("ERI index out of range");
  if (dense_.empty()) {
    sparse_[eri_key(p, q, r, s)] = v;
    return;
  }
  const int images[8][4] = {{p, q, r, s}, {q, p, r, s}, {p, q, s, r}, {q, p, s, r},
                            {r, s, p, q}, {s, r, p, q}, {r, s, q, p}, {s, r, q, p}};
  for (const auto& im : images) dense_[dense_index(im[0], im[1], im[2], im[3])] = v;
}

std::vector<IntegralTable::EriEntry> IntegralTable::unique_eris() const {
  std::vector<EriEntry> out;
  for (int p = 0; p < norb_; ++p)
    for (int q = 0; q <= p; ++q)
      for (int r = 0; r <= p; ++r)
        for (int s = 0; s <= r; ++s) {
          if (p * (p + 1) / 2 + q < r * (r + 1) / 2 + s) continue;
          const double v = eri(p, q, r, s);
          if (v != 0.0) out.push_back({p, q, r, s, v});
        }
  return out;
}

IntegralTable parse_fcidump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_fcidump_text(buf.str(), path.string());
}

IntegralTable parse_fcidump_text(std::string_view text, const std::string& source) {
  std::vector<std::string> lines;
  {
    std::size_t b = 0;
    while (b <= text.size()) {
      auto e = text.find('\n', b);
      if (e == std::string_view::npos) e = text.size();
      std::string line(text.substr(b, e - b));
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(std::move(line));
      b = e + 1;
    }
  }
  const Header hdr = parse_header(lines, source);
  const long norb = header_int(hdr, "NORB", source, std::nullopt);
  const long nelec = header_int(hdr, "NELEC", source, std::nullopt);
  const long ms2 = header_int(hdr, "MS2", source, 0L);
  if (norb < 0 || nelec < 0) throw ParseError(source, 1, "NORB and NELEC must be nonnegative");
  if (nelec > 2 * norb) throw ParseError(source, 1, "NELEC exceeds 2*NORB");
  if (header_int(hdr, "UHF", source, 0L) != 0)
    throw ParseError(source, 1, "unrestricted (UHF) FCIDUMP files are not supported");

  IntegralTable t(static_cast<int>(norb), static_cast<int>(nelec), static_cast<int>(ms2));
  if (auto it = hdr.values.find("ORBSYM"); it != hdr.values.end() && !it->second.empty()) {
    if (static_cast<long>(it->second.size()) != norb)
      throw ParseError(source, 1, "ORBSYM length differs from NORB");
    for (long i = 0; i < norb; ++i) {
      auto v = parse_int(it->second[i]);
      if (!v) throw ParseError(source, 1, "ORBSYM entry is not an integer");
      t.orbsym[i] = static_cast<int>(*v);
    }
  }
  t.isym = static_cast<int>(header_int(hdr, "ISYM", source, 1L));

  std::unordered_map<std::uint64_t, std::pair<double, std::size_t>> eri_seen;
  Eigen::MatrixXd hval = Eigen::MatrixXd::Zero(norb, norb);
  Eigen::MatrixXi hseen = Eigen::MatrixXi::Zero(norb, norb);
  std::vector<double> eps(norb, 0.0);
  std::vector<char> eps_seen(norb, 0);
  bool core_seen = false;

  for (std::size_t ln = hdr.body_line; ln < lines.size(); ++ln) {
    const auto toks = split_ws(lines[ln]);
    if (toks.empty()) continue;
    const std::size_t line_no = ln + 1;
    if (toks.size() != 5)
      throw ParseError(source, line_no, "expected 'value i j k l', got " +
                                            std::to_string(toks.size()) + " fields");
    auto v = parse_real(toks[0]);
    if (!v) throw ParseError(source, line_no, "malformed value '" + toks[0] + "'");
    long idx[4];
    for (int k = 0; k < 4; ++k) {
      auto x = parse_int(toks[k + 1]);
      if (!x) throw ParseError(source, line_no, "malformed index '" + toks[k + 1] + "'");
      if (*x < 0 || *x > norb)
        throw ParseError(source, line_no,
                         "index " + std::to_string(*x) + " outside 0.." + std::to_string(norb));
      idx[k] = *x;
    }
    const long i = idx[0], j = idx[1], k = idx[2], l = idx[3];
    if (i && j && k && l) {
      const auto key = t.eri_key(i - 1, j - 1, k - 1, l - 1);
      auto [it, fresh] = eri_seen.try_emplace(key, *v, line_no);
      if (!fresh && std::abs(it->second.first - *v) > kDuplicateTol)
        throw ParseError(source, line_no,
                         "contradictory duplicate two-electron record (first seen on line " +
                             std::to_string(it->second.second) + ")");
      t.set_eri(static_cast<int>(i - 1), static_cast<int>(j - 1), static_cast<int>(k - 1),
                static_cast<int>(l - 1), *v);
    } else if (i && j && !k && !l) {
      const auto a = std::max(i, j) - 1, b = std::min(i, j) - 1;
      bool seen = hseen(a, b) != 0;
      double slot = hval(a, b);
      set_checked(slot, seen, *v, source, line_no, "one-electron element");
      hval(a, b) = hval(b, a) = slot;
      hseen(a, b) = 1;
    } else if (i && !j && !k && !l) {
      bool seen = eps_seen[i - 1] != 0;
      set_checked(eps[i - 1], seen, *v, source, line_no, "orbital energy");
      eps_seen[i - 1] = 1;
    } else if (!i && !j && !k && !l) {
      set_checked(t.e_core, core_seen, *v, source, line_no, "core energy");
    } else {
      throw ParseError(source, line_no, "malformed index pattern");
    }
  }
  t.h = hval;
  if (std::any_of(eps_seen.begin(), eps_seen.end(), [](char c) { return c != 0; }))
    t.orbital_energies = eps;
  return t;
}

void write_fcidump(const IntegralTable& t, std::ostream& os) {
  os << " &FCI NORB=" << t.norb() << ",NELEC=" << t.nelec() << ",MS2=" << t.ms2() << ",\n";
  os << "  ORBSYM=";
  for (int s : t.orbsym) os << s << ",";
  os << "\n  ISYM=" << t.isym << ",\n &END\n";
  char buf[96];
  auto rec = [&](double v, int i, int j, int k, int l) {
    std::snprintf(buf, sizeof buf, "%.17g %d %d %d %d\n", v, i, j, k, l);
    os << buf;
  };
  for (const auto& e : t.unique_eris()) rec(e.value, e.p + 1, e.q + 1, e.r + 1, e.s + 1);
  for (int p = 0; p < t.norb(); ++p)
    for (int q = 0; q <= p; ++q)
      if (t.h(p, q) != 0.0) rec(t.h(p, q), p + 1, q + 1, 0, 0);
  for (std::size_t p = 0; p < t.orbital_energies.size(); ++p)
    rec(t.orbital_energies[p], static_cast<int>(p) + 1, 0, 0, 0);
  rec(t.e_core, 0, 0, 0, 0);
}

void write_fcidump(const IntegralTable& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_fcidump(t, out);
}

SpinOrbitalIntegrals::SpinOrbitalIntegrals(IntegralTable table)
    : table_(std::move(table)), k_(2 * table_.norb()) {
  spatial_.resize(k_);
  spin_.resize(k_);
  for (int p = 0; p < k_; ++p) {
    spatial_[p] = p / 2;
    spin_[p] = (p % 2 == 0) ? 1 : -1;
  }
  rebuild();
}

double SpinOrbitalIntegrals::coulomb(int p, int q, int r, int s) const {
  if (spin_[p] != spin_[r] || spin_[q] != spin_[s]) return 0.0;
  return table_.eri(spatial_[p], spatial_[r], spatial_[q], spatial_[s]);
}

void SpinOrbitalIntegrals::rebuild() {
  h_ = Eigen::MatrixXd::Zero(k_, k_);
  for (int p = 0; p < k_; ++p)
    for (int q = 0; q < k_; ++q)
      if (spin_[p] == spin_[q]) h_(p, q) = table_.h(spatial_[p], spatial_[q]);
  cache_.clear();
  if (k_ <= kDenseAntisymMaxSpinOrbitals) {
    cache_.resize(static_cast<std::size_t>(k_) * k_ * k_ * k_);
    for (int p = 0; p < k_; ++p)
      for (int q = 0; q < k_; ++q)
        for (int r = 0; r < k_; ++r)
          for (int s = 0; s < k_; ++s)
            cache_[index(p, q, r, s)] = coulomb(p, q, r, s) - coulomb(p, q, s, r);
  }
  pair_diag_ = Eigen::MatrixXd::Zero(k_, k_);
  for (int p = 0; p < k_; ++p)
    for (int q = 0; q < k_; ++q) pair_diag_(p, q) = coulomb(p, q, p, q) - coulomb(p, q, q, p);
}

SpinOrbitalIntegrals SpinOrbitalIntegrals::with_reference(const std::vector<int>& occupied) const {
  std::vector<char> used(k_, 0);
  std::vector<int> order;
  for (int p : occupied) {
    if (p < 0 || p >= k_) throw ConfigError("reference orbital " + std::to_string(p + 1) +
                                            " outside 1.." + std::to_string(k_));
    if (used[p]) throw ConfigError("reference orbital " + std::to_string(p + 1) + " repeated");
    used[p] = 1;
    order.push_back(p);
  }
  for (int p = 0; p < k_; ++p)
    if (!used[p]) order.push_back(p);
  SpinOrbitalIntegrals out = *this;
  for (int p = 0; p < k_; ++p) {
    out.spatial_[p] = spatial_[order[p]];
    out.spin_[p] = spin_[order[p]];
  }
  out.rebuild();
  return out;
}

IntegralTable random_integrals(int norb, int nelec, int ms2, std::uint64_t seed, double coupling) {
  IntegralTable t(norb, nelec, ms2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  t.e_core = 0.5 * g(rng);
  for (int p = 0; p < norb; ++p) {
    t.h(p, p) = -2.0 + 1.2 * p + 0.1 * g(rng);
    for (int q = 0; q < p; ++q) t.h(p, q) = t.h(q, p) = coupling * g(rng);
  }
  for (int p = 0; p < norb; ++p)
    for (int q = 0; q <= p; ++q)
      for (int r = 0; r < norb; ++r)
        for (int s = 0; s <= r; ++s) {
          if (p * (p + 1) / 2 + q < r * (r + 1) / 2 + s) continue;
          double v = coupling * g(rng);
          if (p == q && r == s) v += 0.3;
          t.set_eri(p, q, r, s, v);
        }
  return t;
}

SpinOrbitalIntegrals spinify(const IntegralTable& t) { return SpinOrbitalIntegrals(t); }

}  // namespace fullcc
