#pragma once

#include <cmath>
#include <vector>

#include "shiftqr/types.hpp"

namespace shiftqr {

/// Complex Givens rotation G = [[c, s], [-conj(s), c]] with c real,
/// chosen so that G * (a, b)^T = (rho, 0)^T.
template <typename Real>
struct Givens {
  Real c = Real(1);
  Complex<Real> s = Complex<Real>(0, 0);
  Complex<Real> rho = Complex<Real>(0, 0);

  static Givens annihilate(const Complex<Real>& a, const Complex<Real>& b) {
    Givens g;
    const Real aa = std::abs(a), ab = std::abs(b);
    const Real r = std::hypot(aa, ab);
    if (r == Real(0)) {
      g.c = Real(1);
      g.s = Complex<Real>(0, 0);
      g.rho = Complex<Real>(0, 0);
      return g;
    }
    const Complex<Real> ph = aa == Real(0) ? Complex<Real>(1, 0) : a / aa;
    g.c = aa / r;
    g.s = ph * std::conj(b) / r;
    g.rho = ph * r;
    return g;
  }

  /// (x, y) <- G (x, y)
  void apply(Complex<Real>& x, Complex<Real>& y) const {
    const Complex<Real> t = c * x + s * y;
    y = -std::conj(s) * x + c * y;
    x = t;
  }

  /// (x, y) <- (x, y) G^*  (right multiplication by the adjoint)
  void apply_right_adjoint(Complex<Real>& x, Complex<Real>& y) const {
    const Complex<Real> t = x * c + y * std::conj(s);
    y = -x * s + y * c;
    x = t;
  }
};

/// Operation counter for the per-step arithmetic budget. Each rotation
/// generation or application to a 2-vector counts as one unit; each
/// scalar multiply-add of a triangular solve counts as one unit.
struct OpCount {
  long long value = 0;
  void add(long long v) { value += v; }
};

/// Givens QR factorization of H - sI for upper Hessenberg H.
/// Stores R (upper triangular) and the n-1 rotations with
/// G_{n-2} ... G_0 (H - sI) = R.
template <typename Real>
struct ShiftedQr {
  ComplexMatrix<Real> r;
  std::vector<Givens<Real>> rotations;

  static ShiftedQr factor(const ComplexMatrix<Real>& h, const Complex<Real>& s, OpCount* ops) {
    const Index n = h.rows();
    ShiftedQr f;
    f.r = h;
    f.r.diagonal().array() -= s;
    f.rotations.reserve(static_cast<size_t>(n - 1));
    for (Index i = 0; i + 1 < n; ++i) {
      auto g = Givens<Real>::annihilate(f.r(i, i), f.r(i + 1, i));
      f.r(i, i) = g.rho;
      f.r(i + 1, i) = Complex<Real>(0, 0);
      for (Index j = i + 1; j < n; ++j) g.apply(f.r(i, j), f.r(i + 1, j));
      if (ops) ops->add(n - i);  // one generation + n-i-1 pair applications
      f.rotations.push_back(g);
    }
    return f;
  }

  /// Smallest diagonal magnitude of R.
  Real min_diag_abs() const {
    Real m = std::abs(r(0, 0));
    for (Index i = 1; i < r.rows(); ++i) m = std::min(m, std::abs(r(i, i)));
    return m;
  }

  Real last_diag_abs() const { return std::abs(r(r.rows() - 1, r.rows() - 1)); }

  /// Solves x^* (H - sI) = y^*, i.e. x^* = y^* R^{-1} Q^* with
  /// Q = G_0^* G_1^* ... G_{n-2}^*. Fails (returns false) when a
  /// diagonal entry of R is at or below `sing_tol`.
  bool solve_row(ComplexRowVector<Real>& y, Real sing_tol, OpCount* ops) const {
    const Index n = r.rows();
    // y <- y R^{-1}, forward substitution on the row system w R = y.
    for (Index j = 0; j < n; ++j) {
      if (std::abs(r(j, j)) <= sing_tol) return false;
      Complex<Real> acc = y(j);
      for (Index i = 0; i < j; ++i) acc -= y(i) * r(i, j);
      y(j) = acc / r(j, j);
    }
    if (ops) ops->add(n * (n - 1) + n);  // mult-adds + divisions
    // y <- y Q^* with Q^* = G_{n-2} ... G_0: right-multiply by each G_i
    // in the order i = n-2, ..., 0.
    for (Index i = n - 2; i >= 0; --i) {
      const auto& g = rotations[static_cast<size_t>(i)];
      const Complex<Real> x = y(i), z = y(i + 1);
      y(i) = x * g.c + z * (-std::conj(g.s));
      y(i + 1) = x * g.s + z * g.c;
      if (ops) ops->add(1);
    }
    return true;
  }
};

}  // namespace shiftqr
