#pragma once

#include <cmath>
#include <optional>
#include <utility>

#include "shiftqr/givens.hpp"
#include "shiftqr/hessenberg.hpp"
#include "shiftqr/types.hpp"

namespace shiftqr {

/// Relative threshold below which a triangular factor diagonal counts as
/// numerically singular (times scale).
template <typename Real>
constexpr Real singular_factor_tol() {
  return Real(16) * unit_roundoff<Real>();
}

/// Norm of e_n^* p(H)^{-power}, kept in log space. `infinite` is set when
/// some shifted factor is numerically singular.
template <typename Real>
struct InverseRowNorm {
  bool infinite = false;
  Real log_norm = Real(0);

  Real value() const {
    return infinite ? std::numeric_limits<Real>::infinity() : std::exp(log_norm);
  }

  /// Three-way comparison treating infinite as maximal.
  bool greater_than(const InverseRowNorm& other) const {
    if (infinite) return !other.infinite;
    if (other.infinite) return false;
    return log_norm > other.log_norm;
  }
};

/// ||e_n^* p(H)^{-power}|| via deg(p)*power successive row solves
/// x^* (H - s) = y^* against the Givens QR factors of each H - s.
/// The row is renormalized between solves, so only the log norm grows.
template <typename Real>
InverseRowNorm<Real> inverse_row_norm(const HessenbergMatrix<Real>& h,
                                      const ShiftPolynomial<Real>& p, int power,
                                      OpCount* ops = nullptr) {
  if (power < 1) throw std::invalid_argument("inverse_row_norm: power must be >= 1");
  const Index n = h.n();
  const Real tol = singular_factor_tol<Real>() * h.scale();
  std::vector<ShiftedQr<Real>> factors;
  factors.reserve(p.roots.size());
  for (const auto& s : p.roots) factors.push_back(ShiftedQr<Real>::factor(h.entries(), s, ops));

  InverseRowNorm<Real> out;
  ComplexRowVector<Real> v = ComplexRowVector<Real>::Zero(n);
  v(n - 1) = Complex<Real>(1, 0);
  for (int rep = 0; rep < power; ++rep) {
    for (const auto& f : factors) {
      if (!f.solve_row(v, tol, ops)) {
        out.infinite = true;
        return out;
      }
      const Real nv = v.norm();
      if (!(nv > Real(0)) || !std::isfinite(nv)) {
        out.infinite = true;
        return out;
      }
      out.log_norm += std::log(nv);
      v /= nv;
    }
  }
  return out;
}

/// tau_p(H) = ||e_n^* p(H)^{-1}||^{-1/k}, or 0 when p(H) is numerically
/// singular.
template <typename Real>
Real tau(const HessenbergMatrix<Real>& h, const ShiftPolynomial<Real>& p,
         OpCount* ops = nullptr) {
  const auto irn = inverse_row_norm(h, p, 1, ops);
  if (irn.infinite) return Real(0);
  return std::exp(-irn.log_norm / Real(p.degree()));
}

/// Result of a degree-1 or degree-k QR step.
template <typename Real>
struct QrStepResult {
  HessenbergMatrix<Real> h_next;
  std::optional<ComplexMatrix<Real>> q_accum;  // similarity accumulated this step
  Real tau = Real(0);                          // tau_p of the pre-step matrix
  bool singular_shift = false;
  /// Arithmetic units spent on the step itself (chase + tau solves);
  /// Q accumulation is bookkeeping outside this budget.
  long long ops = 0;
};

namespace detail {

/// One explicit shifted QR step in place: m <- R Q + sI where
/// (m - sI) = QR. Returns |R_nn|; forces the last subdiagonal to exact
/// zero when |R_nn| is below the singularity threshold. Rotations are
/// also applied to `q` (right-multiplication) when q != nullptr.
template <typename Real>
std::pair<Real, bool> shifted_qr_step_inplace(ComplexMatrix<Real>& m, const Complex<Real>& s,
                                              Real scale, ComplexMatrix<Real>* q,
                                              OpCount* ops) {
  const Index n = m.rows();
  auto f = ShiftedQr<Real>::factor(m, s, ops);
  const Real r_last = f.last_diag_abs();
  const bool singular = r_last <= singular_factor_tol<Real>() * scale;

  // m <- R Q, Q = G_0^* ... G_{n-2}^*: right-multiply by each adjoint in
  // factor order. Rotation i touches columns (i, i+1), rows 0..i+1.
  m = f.r;
  for (Index i = 0; i + 1 < n; ++i) {
    const auto& g = f.rotations[static_cast<size_t>(i)];
    for (Index row = 0; row <= i + 1; ++row) g.apply_right_adjoint(m(row, i), m(row, i + 1));
    if (ops) ops->add(i + 2);
    if (q) {
      for (Index row = 0; row < n; ++row) g.apply_right_adjoint((*q)(row, i), (*q)(row, i + 1));
    }
  }
  m.diagonal().array() += s;
  for (Index j = 0; j + 2 < n; ++j)
    for (Index i = j + 2; i < n; ++i) m(i, j) = Complex<Real>(0, 0);
  if (singular) m(n - 1, n - 2) = Complex<Real>(0, 0);
  return {r_last, singular};
}

}  // namespace detail

/// Degree-1 shifted QR step, h_next = Q^* H Q with (H - sI) = QR.
/// An exact shift (|R_nn| under threshold) deflates: the last subdiagonal
/// of h_next is set to exact zero and singular_shift is reported.
template <typename Real>
QrStepResult<Real> single_shift_step(const HessenbergMatrix<Real>& h, const Complex<Real>& s,
                                     bool want_q = false) {
  if (h.n() < 2) throw std::invalid_argument("single_shift_step: n must be >= 2");
  OpCount ops;
  QrStepResult<Real> out;
  ComplexMatrix<Real> m = h.entries();
  ComplexMatrix<Real> q;
  if (want_q) q = ComplexMatrix<Real>::Identity(h.n(), h.n());
  auto [r_last, singular] =
      detail::shifted_qr_step_inplace(m, s, h.scale(), want_q ? &q : nullptr, &ops);
  out.h_next = HessenbergMatrix<Real>(std::move(m), h.scale());
  if (want_q) out.q_accum = std::move(q);
  out.singular_shift = singular;
  out.tau = singular ? Real(0) : r_last;
  out.ops = ops.value;
  return out;
}

/// Degree-k implicit QR step realized as deg(p) sequential degree-1
/// steps. tau is computed on the pre-step matrix by factored row solves,
/// never by forming p(H).
template <typename Real>
QrStepResult<Real> iqr_step(const HessenbergMatrix<Real>& h, const ShiftPolynomial<Real>& p,
                            bool want_q = false) {
  const int k = p.degree();
  if (h.n() < 2 || k > h.n() - 1)
    throw std::invalid_argument("iqr_step: need 1 <= deg(p) <= n-1");
  OpCount ops;
  QrStepResult<Real> out;

  const auto irn = inverse_row_norm(h, p, 1, &ops);
  bool singular = irn.infinite;

  ComplexMatrix<Real> m = h.entries();
  ComplexMatrix<Real> q;
  if (want_q) q = ComplexMatrix<Real>::Identity(h.n(), h.n());
  for (const auto& s : p.roots) {
    auto [r_last, sing_i] =
        detail::shifted_qr_step_inplace(m, s, h.scale(), want_q ? &q : nullptr, &ops);
    singular = singular || sing_i;
  }
  out.h_next = HessenbergMatrix<Real>(std::move(m), h.scale());
  if (want_q) out.q_accum = std::move(q);
  out.singular_shift = singular;
  out.tau = singular ? Real(0) : std::exp(-irn.log_norm / Real(k));
  out.ops = ops.value;
  return out;
}

}  // namespace shiftqr
