#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "shiftqr/hessenberg.hpp"
#include "shiftqr/iqr.hpp"
#include "shiftqr/types.hpp"

namespace shiftqr {

/// Approximate eigenvalues of a small matrix plus a convergence flag.
template <typename Real>
struct SmallEigResult {
  std::vector<Complex<Real>> values;
  bool converged = true;
};

/// Eigenvalues of a small (m <= 64) dense matrix by Wilkinson-shifted QR
/// with a budget of 30*m single steps. Stagnation injects deterministic
/// exceptional shifts of modulus ||M||_F on the golden-angle sequence;
/// if the budget runs out anyway, best-effort values are returned with
/// converged = false.
template <typename Real>
SmallEigResult<Real> small_eig(const ComplexMatrix<Real>& m_in, Real tol) {
  const Index m = m_in.rows();
  if (m_in.cols() != m || m < 1) throw std::invalid_argument("small_eig: square input required");
  if (m > 64) throw std::invalid_argument("small_eig: m exceeds the intended corner scale");
  if (!(tol > Real(0))) throw std::invalid_argument("small_eig: tol must be > 0");

  SmallEigResult<Real> out;
  if (m == 1) {
    out.values = {m_in(0, 0)};
    return out;
  }

  auto [hmat, q0] = hessenberg_reduce<Real>(m_in);
  (void)q0;
  ComplexMatrix<Real> w = hmat.entries();
  const Real scale = hmat.scale() > Real(0) ? hmat.scale() : Real(1);
  const Real defl = tol / Real(4) * scale;

  const int budget = 30 * static_cast<int>(m);
  int steps = 0;
  int stall = 0;
  int exceptional_used = 0;
  Index hi = m - 1;

  const Real golden = Real(2.399963229728653);
  while (hi > 0 && steps < budget) {
    // Deflate any negligible subdiagonal in [0, hi).
    bool deflated = false;
    for (Index i = hi; i >= 1; --i) {
      if (std::abs(w(i, i - 1)) <= defl) {
        w(i, i - 1) = Complex<Real>(0, 0);
        if (i == hi) {
          --hi;
          stall = 0;
        }
        deflated = true;
      }
    }
    if (deflated && (hi == 0 || w(hi, hi - 1) == Complex<Real>(0, 0))) continue;

    // Active window [lo, hi]: walk up until a zero subdiagonal.
    Index lo = hi;
    while (lo > 0 && w(lo, lo - 1) != Complex<Real>(0, 0)) --lo;

    if (hi - lo == 1) {
      auto [l1, l2] =
          quadratic_eigenvalues<Real>(w(lo, lo), w(lo, hi), w(hi, lo), w(hi, hi));
      w(lo, lo) = std::abs(l1 - w(hi, hi)) <= std::abs(l2 - w(hi, hi)) ? l2 : l1;
      w(hi, hi) = (l1 + l2) - w(lo, lo);
      w(hi, lo) = Complex<Real>(0, 0);
      hi = lo > 0 ? lo - 1 : 0;
      stall = 0;
      continue;
    }

    Complex<Real> shift;
    if (stall > 0 && stall % 10 == 0) {
      shift = std::polar(scale, std::fmod(golden * Real(exceptional_used), Real(2) * Real(M_PI)));
      ++exceptional_used;
    } else {
      auto [l1, l2] = quadratic_eigenvalues<Real>(w(hi - 1, hi - 1), w(hi - 1, hi), w(hi, hi - 1),
                                                  w(hi, hi));
      shift = std::abs(l1 - w(hi, hi)) <= std::abs(l2 - w(hi, hi)) ? l1 : l2;
    }

    auto window = w.block(lo, lo, hi - lo + 1, hi - lo + 1).eval();
    detail::shifted_qr_step_inplace<Real>(window, shift, scale, nullptr, nullptr);
    w.block(lo, lo, hi - lo + 1, hi - lo + 1) = window;
    ++steps;
    ++stall;
  }

  out.converged = hi == 0;
  out.values.reserve(static_cast<size_t>(m));
  for (Index i = 0; i < m; ++i) out.values.push_back(w(i, i));
  return out;
}

class CertificationFailure : public NumericalError {
 public:
  CertificationFailure(std::string what, std::vector<std::complex<double>> vals, double ratio)
      : NumericalError(std::move(what)), best_ratio(ratio) {
    best_values = std::move(vals);
  }
  std::vector<std::complex<double>> best_values;
  double best_ratio;
};

/// theta-optimal Ritz values: ||e_n^* prod(H - r_i)||^{1/k} is within a
/// factor theta_certified of psi_k(H), checked at construction.
template <typename Real>
struct RitzSet {
  std::vector<Complex<Real>> values;  // sorted by (re, im) for stable partitions
  Real theta_certified = Real(1);
};

/// Certificate ratio ||e_n^* prod(H - r_i)||^{1/k} / psi_k(H).
template <typename Real>
Real ritz_certificate(const HessenbergMatrix<Real>& h,
                      const std::vector<Complex<Real>>& values) {
  const int k = static_cast<int>(values.size());
  const Real psi = potential(h, k);
  if (!(psi > Real(0))) throw std::invalid_argument("ritz_certificate: psi_k(H) must be > 0");
  const auto [row, norm] = last_row_poly_apply(h, ShiftPolynomial<Real>(values));
  return std::exp(std::log(norm) / Real(k)) / psi;
}

/// Corner eigenvalues certified theta-optimal via the last-row product.
/// Retries small_eig with tol/10 up to 3 times before giving up; failure
/// signals the corner eigenproblem is pathologically ill-conditioned
/// relative to theta (caller escalates to exceptional shifts directly).
template <typename Real>
RitzSet<Real> opt_ritz(const HessenbergMatrix<Real>& h, int k, Real theta) {
  if (!(theta > Real(1))) throw std::invalid_argument("opt_ritz: theta must be > 1");
  if (k < 1 || k > h.n() - 1) throw std::invalid_argument("opt_ritz: k out of range");

  auto sorted = [](std::vector<Complex<Real>> v) {
    std::sort(v.begin(), v.end(), [](const Complex<Real>& a, const Complex<Real>& b) {
      if (a.real() != b.real()) return a.real() < b.real();
      return a.imag() < b.imag();
    });
    return v;
  };

  Real tol = Real(1e-10);
  std::vector<Complex<Real>> best;
  Real best_ratio = std::numeric_limits<Real>::infinity();
  for (int attempt = 0; attempt < 4; ++attempt) {
    auto se = small_eig(corner(h, k), tol);
    auto vals = sorted(std::move(se.values));
    const Real ratio = ritz_certificate(h, vals);
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = vals;
    }
    if (ratio <= theta) return RitzSet<Real>{std::move(vals), ratio};
    tol /= Real(10);
  }
  std::vector<std::complex<double>> best_d(best.begin(), best.end());
  throw CertificationFailure("opt_ritz: certification failed after retries", std::move(best_d),
                             static_cast<double>(best_ratio));
}

}  // namespace shiftqr
