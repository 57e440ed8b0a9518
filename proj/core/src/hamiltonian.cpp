#include "fullcc/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fullcc/error.hpp"

namespace fullcc {

namespace {

// Sign of a+_p a_q acting on b (q in b, p not in b\{q}).
int single_phase(const Determinant& b, int p, int q) {
  Determinant t = b;
  int sign = annihilation_sign(t, q);
  t.reset(q);
  if (t.popcount_below(p) & 1) sign = -sign;
  return sign;
}

// Sign of a+_p a+_q a_s a_r acting on b.
int double_phase(const Determinant& b, int p, int q, int r, int s) {
  Determinant t = b;
  int sign = 1;
  for (int x : {r, s}) {
    if (t.popcount_below(x) & 1) sign = -sign;
    t.reset(x);
  }
  for (int x : {q, p}) {
    if (t.popcount_below(x) & 1) sign = -sign;
    t.set(x);
  }
  return sign;
}

double diagonal_element(const Determinant& a, const SpinOrbitalIntegrals& ints) {
  const auto occ = a.orbitals();
  double e = 0.0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    e += ints.h(occ[i], occ[i]);
    for (std::size_t j = 0; j < i; ++j) e += ints.pair_diagonal(occ[i], occ[j]);
  }
  return e;
}

void orthonormalize_against(Eigen::Ref<Eigen::VectorXd> v, const Eigen::MatrixXd& basis, int cols) {
  for (int pass = 0; pass < 2; ++pass)
    for (int k = 0; k < cols; ++k) v -= basis.col(k).dot(v) * basis.col(k);
}

}  // namespace

double slater_condon_element(const Determinant& a, const Determinant& b,
                             const SpinOrbitalIntegrals& ints) {
  const Determinant diff = a ^ b;
  const int n = diff.popcount();
  if (n == 0) return diagonal_element(a, ints);
  if (n > 4) return 0.0;
  const auto pa = a.minus(b).orbitals();  // orbitals in a only
  const auto pb = b.minus(a).orbitals();  // orbitals in b only
  if (pa.size() != pb.size()) return 0.0;
  if (n == 2) {
    const int p = pa[0], q = pb[0];
    double v = ints.h(p, q);
    for (int i : (a & b).orbitals()) v += ints.antisym(p, i, q, i);
    return v * single_phase(b, p, q);
  }
  const int p = pa[0], q = pa[1], r = pb[0], s = pb[1];
  return ints.antisym(p, q, r, s) * double_phase(b, p, q, r, s);
}

FciHamiltonian assemble(std::shared_ptr<const DeterminantSpace> space,
                        const SpinOrbitalIntegrals& ints) {
  if (!space) throw InternalError("assemble: null determinant space");
  if (space->spin_orbitals() != ints.spin_orbitals())
    throw DimensionMismatch("space has K=" + std::to_string(space->spin_orbitals()) +
                            " but integrals have K=" + std::to_string(ints.spin_orbitals()));
  const std::size_t n = space->size();
  const auto dets = space->dets();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n * 16);
  for (std::size_t i = 0; i < n; ++i) {
    trip.emplace_back(i, i, diagonal_element(dets[i], ints));
    for (std::size_t j = i + 1; j < n; ++j) {
      const Determinant x = dets[i] ^ dets[j];
      if (x.popcount() > 4) continue;
      const double v = slater_condon_element(dets[i], dets[j], ints);
      if (v == 0.0) continue;
      trip.emplace_back(i, j, v);
      trip.emplace_back(j, i, v);
    }
  }
  FciHamiltonian h;
  h.space = std::move(space);
  h.e_core = ints.e_core();
  h.matrix.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  h.matrix.setFromTriplets(trip.begin(), trip.end());
  h.matrix.makeCompressed();
  return h;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> davidson(const SparseMatrix& a, int nroots, double tol,
                                                     int max_iter, int subspace_cap) {
  const Eigen::Index n = a.rows();
  if (nroots < 1 || nroots > n) throw InvalidDimension("davidson: bad root count");
  const Eigen::VectorXd diag = a.diagonal();
  const int cap = std::max(subspace_cap, 2 * nroots + 2);
  const int nguess = static_cast<int>(std::min<Eigen::Index>(n, std::max(nroots + 4, 2 * nroots)));

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index x, Eigen::Index y) { return diag[x] < diag[y]; });

  Eigen::MatrixXd v(n, cap), w(n, cap);
  int m = 0;
  for (int k = 0; k < nguess; ++k) {
    v.col(m).setZero();
    v(order[k], m) = 1.0;
    w.col(m) = a * v.col(m);
    ++m;
  }

  Eigen::VectorXd theta;
  Eigen::MatrixXd x;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd g = v.leftCols(m).transpose() * w.leftCols(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (g + g.transpose()));
    theta = es.eigenvalues().head(nroots);
    const Eigen::MatrixXd y = es.eigenvectors().leftCols(nroots);
    x = v.leftCols(m) * y;
    const Eigen::MatrixXd r = w.leftCols(m) * y - x * theta.asDiagonal();

    double worst = 0.0;
    std::vector<int> open;
    for (int k = 0; k < nroots; ++k) {
      const double rn = r.col(k).norm();
      worst = std::max(worst, rn);
      if (rn > tol) open.push_back(k);
    }
    best = std::min(best, worst);
    if (open.empty()) return {theta, x};

    if (m + static_cast<int>(open.size()) > cap) {
      // Restart from the current Ritz vectors.
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
      v.leftCols(nroots) = qr.householderQ() * Eigen::MatrixXd::Identity(n, nroots);
      m = nroots;
      for (int k = 0; k < m; ++k) w.col(k) = a * v.col(k);
    }
    for (int k : open) {
      Eigen::VectorXd c(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double d = theta[k] - diag[i];
        if (std::abs(d) < 1e-8) d = d < 0 ? -1e-8 : 1e-8;
        c[i] = r(i, k) / d;
      }
      orthonormalize_against(c, v, m);
      const double cn = c.norm();
      if (cn < 1e-10) continue;
      v.col(m) = c / cn;
      w.col(m) = a * v.col(m);
      if (++m == cap) break;
    }
  }
  throw IterativeFailure("Davidson did not converge in " + std::to_string(max_iter) +
                             " iterations",
                         best);
}

Eigenpair solve_eigenpair(const FciHamiltonian& hmat, int which, const EigenOptions& opts) {
  const auto n = static_cast<Eigen::Index>(hmat.dim());
  if (n < 1) throw InvalidDimension("empty Hamiltonian");
  if (which < 0 || which >= n)
    throw InvalidDimension("eigenpair index " + std::to_string(which) + " outside 0.." +
                           std::to_string(n - 1));
  Eigenpair ep;
  ep.index = which;
  ep.e_core = hmat.e_core;
  if (static_cast<std::size_t>(n) <= opts.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hmat.dense());
    if (es.info() != Eigen::Success) throw IterativeFailure("dense eigensolver failed", NAN);
    const auto& ev = es.eigenvalues();
    ep.energy = ev[which];
    ep.vector = es.eigenvectors().col(which);
    if (which > 0) ep.lower_neighbor = ev[which - 1];
    if (which + 1 < n) ep.upper_neighbor = ev[which + 1];
  } else {
    const int nroots = static_cast<int>(std::min<Eigen::Index>(n, which + 2));
    const double tol = opts.tol * (1.0 + std::abs(hmat.matrix.coeff(0, 0)));
    auto [theta, x] = davidson(hmat.matrix, nroots, tol, opts.max_iter, opts.subspace_cap);
    ep.energy = theta[which];
    ep.vector = x.col(which).normalized();
    if (which > 0) ep.lower_neighbor = theta[which - 1];
    if (which + 1 < nroots) ep.upper_neighbor = theta[which + 1];
  }
  ep.gap = std::numeric_limits<double>::infinity();
  if (ep.lower_neighbor) ep.gap = std::min(ep.gap, ep.energy - *ep.lower_neighbor);
  if (ep.upper_neighbor) ep.gap = std::min(ep.gap, *ep.upper_neighbor - ep.energy);
  ep.gap = std::max(ep.gap, 0.0);
  ep.degenerate = ep.gap < opts.degeneracy_tol;

  Eigen::Index lead = 0;
  if (std::abs(ep.vector[0]) < 1e-14) ep.vector.cwiseAbs().maxCoeff(&lead);
  if (ep.vector[lead] < 0) ep.vector = -ep.vector;
  ep.residual = (hmat.apply(ep.vector) - ep.energy * ep.vector).norm();
  return ep;
}

double hf_energy(const FciHamiltonian& hmat) { return hmat.matrix.coeff(0, 0) + hmat.e_core; }

}  // namespace fullcc
