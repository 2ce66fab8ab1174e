#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace shiftqr {

template <typename Real>
using Complex = std::complex<Real>;

template <typename Real>
using ComplexMatrix = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Real>
using ComplexVector = Eigen::Matrix<Complex<Real>, Eigen::Dynamic, 1>;

template <typename Real>
using ComplexRowVector = Eigen::Matrix<Complex<Real>, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

/// Unit roundoff of the scalar type.
template <typename Real>
constexpr Real unit_roundoff() {
  return std::numeric_limits<Real>::epsilon() / Real(2);
}

template <typename Real>
bool is_finite(const Complex<Real>& z) {
  return std::isfinite(z.real()) && std::isfinite(z.imag());
}

template <typename Real>
bool all_finite(const ComplexMatrix<Real>& m) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!is_finite<Real>(m(i, j))) return false;
  return true;
}

/// z/|z|, or 1 when z = 0.
template <typename Real>
Complex<Real> phase(const Complex<Real>& z) {
  const Real a = std::abs(z);
  return a == Real(0) ? Complex<Real>(1, 0) : z / a;
}

class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Monic polynomial represented by its multiset of roots,
/// p(z) = prod_i (z - roots[i]).
template <typename Real>
struct ShiftPolynomial {
  std::vector<Complex<Real>> roots;

  ShiftPolynomial() = default;
  explicit ShiftPolynomial(std::vector<Complex<Real>> r) : roots(std::move(r)) {
    if (roots.empty()) throw std::invalid_argument("ShiftPolynomial: degree must be >= 1");
  }

  /// (z - s)^k
  static ShiftPolynomial power(const Complex<Real>& s, int k) {
    return ShiftPolynomial(std::vector<Complex<Real>>(static_cast<size_t>(k), s));
  }

  int degree() const { return static_cast<int>(roots.size()); }

  Complex<Real> eval(const Complex<Real>& z) const {
    Complex<Real> v(1, 0);
    for (const auto& r : roots) v *= (z - r);
    return v;
  }

  /// log|p(z)|; -inf when z is a root.
  Real log_abs(const Complex<Real>& z) const {
    Real acc = 0;
    for (const auto& r : roots) acc += std::log(std::abs(z - r));
    return acc;
  }
};

/// Eigenvalues of [[a, b], [c, d]], cancellation-safe: the larger root
/// comes from the quadratic formula, the smaller from the determinant.
template <typename Real>
std::pair<Complex<Real>, Complex<Real>> quadratic_eigenvalues(const Complex<Real>& a,
                                                              const Complex<Real>& b,
                                                              const Complex<Real>& c,
                                                              const Complex<Real>& d) {
  const Complex<Real> mid = (a + d) / Real(2);
  const Complex<Real> det = a * d - b * c;
  const Complex<Real> disc = std::sqrt(mid * mid - det);
  const Complex<Real> big = std::abs(mid + disc) >= std::abs(mid - disc) ? mid + disc : mid - disc;
  if (big == Complex<Real>(0, 0)) return {big, big};
  return {big, det / big};
}

inline bool is_power_of_two(int k) { return k >= 1 && (k & (k - 1)) == 0; }

inline int log2_exact(int k) {
  int j = 0;
  while ((1 << j) < k) ++j;
  return j;
}

/// Strategy constants. alpha is derived from (k, B) and never user-set.
template <typename Real>
struct StrategyConfig {
  int k = 4;              // shift degree, power of two >= 2
  Real B = Real(1);       // eigenvector condition bound, >= 1
  Real gamma = Real(0.8); // potential reduction rate, in (0,1)
  Real theta = Real(2);   // Ritz value approximation parameter, >= 1
  Real delta = Real(1e-10); // decoupling target, in (0,1)
  Real alpha = Real(1);   // B^(4*log2(k)/k), derived

  StrategyConfig() { derive(); }
  StrategyConfig(int k_, Real B_, Real delta_, Real gamma_ = Real(0.8), Real theta_ = Real(2))
      : k(k_), B(B_), gamma(gamma_), theta(theta_), delta(delta_) {
    derive();
  }

  void derive() {
    if (!is_power_of_two(k) || k < 2)
      throw std::invalid_argument("StrategyConfig: k must be a power of two >= 2");
    if (B < Real(1)) throw std::invalid_argument("StrategyConfig: B must be >= 1");
    if (!(gamma > Real(0) && gamma < Real(1)))
      throw std::invalid_argument("StrategyConfig: gamma must be in (0,1)");
    if (theta < Real(1)) throw std::invalid_argument("StrategyConfig: theta must be >= 1");
    if (!(delta > Real(0) && delta < Real(1)))
      throw std::invalid_argument("StrategyConfig: delta must be in (0,1)");
    alpha = std::pow(B, Real(4) * Real(log2_exact(k)) / Real(k));
  }

  /// Same constants with a different degree (alpha rederived).
  StrategyConfig with_k(int k_) const { return StrategyConfig(k_, B, delta, gamma, theta); }
  /// Same constants with a different nonnormality bound (alpha rederived).
  StrategyConfig with_B(Real B_) const { return StrategyConfig(k, B_, delta, gamma, theta); }
};

}  // namespace shiftqr
