#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "shiftqr/types.hpp"

namespace shiftqr {

/// Dense complex upper Hessenberg matrix. Entries below the first
/// subdiagonal are exact zeros. `scale()` is the Frobenius norm of the
/// matrix the iteration started from; it is frozen at construction and
/// copied through QR steps, so decoupling thresholds stay constant.
template <typename Real>
class HessenbergMatrix {
 public:
  using Scalar = Complex<Real>;
  using Matrix = ComplexMatrix<Real>;

  HessenbergMatrix() = default;

  /// Takes ownership of `m`, zeroing everything below the subdiagonal.
  /// `scale` < 0 means "freeze ||m||_F now".
  explicit HessenbergMatrix(Matrix m, Real scale = Real(-1)) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1)
      throw std::invalid_argument("HessenbergMatrix: matrix must be square, n >= 1");
    if (!all_finite<Real>(m_)) throw NumericalError("HessenbergMatrix: non-finite entries");
    enforce_structure();
    scale_ = scale < Real(0) ? m_.norm() : scale;
  }

  Index n() const { return m_.rows(); }
  Real scale() const { return scale_; }
  const Matrix& entries() const { return m_; }
  Scalar operator()(Index i, Index j) const { return m_(i, j); }

  /// Magnitude of the subdiagonal entry h(i+1, i), 0 <= i <= n-2.
  Real subdiag_abs(Index i) const { return std::abs(m_(i + 1, i)); }

  /// All subdiagonals nonzero (n = 1 counts as irreducible).
  bool is_unreduced() const {
    for (Index i = 0; i + 1 < n(); ++i)
      if (m_(i + 1, i) == Scalar(0)) return false;
    return true;
  }

 private:
  void enforce_structure() {
    const Index nn = m_.rows();
    for (Index j = 0; j + 2 < nn; ++j)
      for (Index i = j + 2; i < nn; ++i) m_(i, j) = Scalar(0);
  }

  Matrix m_;
  Real scale_ = Real(0);
};

/// Householder reduction A = Q H Q^*. H carries scale = ||A||_F.
template <typename Real>
std::pair<HessenbergMatrix<Real>, ComplexMatrix<Real>> hessenberg_reduce(
    const ComplexMatrix<Real>& a) {
  if (a.rows() != a.cols() || a.rows() < 1)
    throw std::invalid_argument("hessenberg_reduce: matrix must be square, n >= 1");
  if (!all_finite<Real>(a)) throw NumericalError("hessenberg_reduce: non-finite entries");
  const Real scale = a.norm();
  if (a.rows() == 1) {
    return {HessenbergMatrix<Real>(a, scale), ComplexMatrix<Real>::Identity(1, 1)};
  }
  Eigen::HessenbergDecomposition<ComplexMatrix<Real>> hd(a);
  ComplexMatrix<Real> h = hd.matrixH();
  ComplexMatrix<Real> q = hd.matrixQ();
  return {HessenbergMatrix<Real>(std::move(h), scale), std::move(q)};
}

/// Trailing principal k x k submatrix.
template <typename Real>
ComplexMatrix<Real> corner(const HessenbergMatrix<Real>& h, int k) {
  if (k < 1 || k > h.n()) throw std::invalid_argument("corner: k out of range");
  return h.entries().bottomRightCorner(k, k);
}

/// Potential psi_k: geometric mean of the magnitudes of the last k
/// subdiagonal entries, computed in log space.
template <typename Real>
Real potential(const HessenbergMatrix<Real>& h, int k) {
  const Index n = h.n();
  if (k < 1 || k > n - 1) throw std::invalid_argument("potential: k out of range");
  Real acc = 0;
  for (Index i = n - k - 1; i < n - 1; ++i) {
    const Real a = h.subdiag_abs(i);
    if (a == Real(0)) return Real(0);
    acc += std::log(a);
  }
  return std::exp(acc / Real(k));
}

/// Row vector e_n^* p(H) by deg(p) successive row-times-Hessenberg
/// products, and its Euclidean norm. p(H) is never formed.
template <typename Real>
std::pair<ComplexRowVector<Real>, Real> last_row_poly_apply(const HessenbergMatrix<Real>& h,
                                                            const ShiftPolynomial<Real>& p) {
  const Index n = h.n();
  if (p.degree() > n - 1) throw std::invalid_argument("last_row_poly_apply: deg(p) > n-1");
  ComplexRowVector<Real> v = ComplexRowVector<Real>::Zero(n);
  v(n - 1) = Complex<Real>(1, 0);
  for (const auto& s : p.roots) {
    ComplexRowVector<Real> w = v * h.entries();
    w -= s * v;
    v.swap(w);
  }
  return {v, v.norm()};
}

/// Smallest i (0-indexed subdiagonal position) with |h(i+1,i)| <= delta*scale,
/// or nullopt if none.
template <typename Real>
std::optional<Index> decoupling_check(const HessenbergMatrix<Real>& h, Real delta) {
  if (!(delta > Real(0))) throw std::invalid_argument("decoupling_check: delta must be > 0");
  const Real thresh = delta * h.scale();
  for (Index i = 0; i + 1 < h.n(); ++i)
    if (h.subdiag_abs(i) <= thresh) return i;
  return std::nullopt;
}

/// Diagonal-unitary similarity making every subdiagonal entry real and
/// nonnegative. Unreduced Hessenberg matrices have a unique such form,
/// which makes "equal up to unit-modulus diagonal similarity" testable.
template <typename Real>
ComplexMatrix<Real> normalize_subdiag_phases(const ComplexMatrix<Real>& h) {
  const Index n = h.rows();
  ComplexVector<Real> d(n);
  d(0) = Complex<Real>(1, 0);
  for (Index i = 0; i + 1 < n; ++i) d(i + 1) = phase<Real>(h(i + 1, i) * d(i));
  ComplexMatrix<Real> out = h;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) out(i, j) = std::conj(d(i)) * h(i, j) * d(j);
  return out;
}

}  // namespace shiftqr
