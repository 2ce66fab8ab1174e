#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "shiftqr/hessenberg.hpp"
#include "shiftqr/ritz.hpp"
#include "shiftqr/types.hpp"

namespace shiftqr {

/// Deterministic Gaussian source: mt19937_64 + explicit Box-Muller, so
/// streams are reproducible independent of the standard library's
/// distribution implementations.
template <typename Real>
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}

  /// Uniform in (0, 1].
  Real uniform() {
    return Real(static_cast<double>((gen_() >> 11) + 1) * 0x1p-53);
  }

  Real normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const Real u1 = uniform();
    const Real u2 = uniform();
    const Real mag = std::sqrt(Real(-2) * std::log(u1));
    const Real ang = Real(2) * Real(M_PI) * u2;
    spare_ = mag * std::sin(ang);
    have_spare_ = true;
    return mag * std::cos(ang);
  }

  /// E|z|^2 = 1.
  Complex<Real> complex_normal() {
    const Real x = normal(), y = normal();
    return Complex<Real>(x, y) / std::sqrt(Real(2));
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  Real spare_ = Real(0);
};

class DefectiveMatrixError : public NumericalError {
 public:
  explicit DefectiveMatrixError(const std::string& what) : NumericalError(what) {}
};

/// Law of Z_H: finitely supported probability measure on the eigenvalues,
/// weighted by the overlap of e_n^* with the left eigenvector directions.
template <typename Real>
struct SpectralMeasure {
  struct Atom {
    Complex<Real> lambda;
    Real weight;
  };
  std::vector<Atom> atoms;
  Real kappa_v_upper = Real(1);  // ||V|| ||V^-1|| at unit eigenvector columns

  std::vector<Complex<Real>> eigenvalues() const {
    std::vector<Complex<Real>> out;
    out.reserve(atoms.size());
    for (const auto& a : atoms) out.push_back(a.lambda);
    return out;
  }
};

inline constexpr int kOracleMaxDim = 64;

/// Dense diagonalization oracle (desk scale, n <= 64). Throws
/// DefectiveMatrixError when the eigenvector basis is too ill-conditioned
/// to reconstruct H to 1e-9 * scale.
template <typename Real>
SpectralMeasure<Real> spectral_measure(const HessenbergMatrix<Real>& h) {
  const Index n = h.n();
  if (n > kOracleMaxDim) throw std::invalid_argument("spectral_measure: n exceeds oracle cap");
  Eigen::ComplexEigenSolver<ComplexMatrix<Real>> ces(h.entries(), /*computeEigenvectors=*/true);
  if (ces.info() != Eigen::Success)
    throw DefectiveMatrixError("spectral_measure: eigensolver failed");
  const ComplexMatrix<Real>& v = ces.eigenvectors();
  const ComplexVector<Real>& d = ces.eigenvalues();

  Eigen::JacobiSVD<ComplexMatrix<Real>> svd(v);
  const Real smax = svd.singularValues()(0);
  const Real smin = svd.singularValues()(n - 1);
  if (!(smin > Real(0)) || !std::isfinite(smax / smin))
    throw DefectiveMatrixError("spectral_measure: eigenvector matrix condition overflow");
  const Real kappa = smax / smin;

  // Self-consistency gate: reconstruct H from (V, D) before trusting
  // any measure-based assertion.
  ComplexMatrix<Real> recon =
      v * d.asDiagonal() * v.partialPivLu().solve(ComplexMatrix<Real>::Identity(n, n));
  const Real scale = h.scale() > Real(0) ? h.scale() : Real(1);
  if (!((recon - h.entries()).norm() <= Real(1e-9) * scale))
    throw DefectiveMatrixError("spectral_measure: reconstruction failed (defective to precision)");

  SpectralMeasure<Real> mu;
  mu.kappa_v_upper = std::max(kappa, Real(1));
  Real total = 0;
  for (Index i = 0; i < n; ++i) total += std::norm(v(n - 1, i));
  mu.atoms.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i)
    mu.atoms.push_back({d(i), std::norm(v(n - 1, i)) / total});
  return mu;
}

/// E[|f(Z)|^2]^{1/2} kept in log space.
template <typename Real>
struct MomentResult {
  bool infinite = false;
  Real log_value = Real(0);  // log of E[|f|^2]^{1/2}

  Real value() const {
    return infinite ? std::numeric_limits<Real>::infinity() : std::exp(log_value);
  }
};

/// Core accumulation: log E[|f(Z)|^2] from log|f|. Atoms with zero weight
/// are ignored; a singular f at an atom with positive weight flags
/// infinity.
template <typename Real>
MomentResult<Real> moment_logabs(const SpectralMeasure<Real>& mu,
                                 const std::function<Real(const Complex<Real>&)>& log_abs_f) {
  MomentResult<Real> out;
  std::vector<Real> terms;
  terms.reserve(mu.atoms.size());
  Real m = -std::numeric_limits<Real>::infinity();
  for (const auto& a : mu.atoms) {
    if (a.weight <= Real(0)) continue;
    const Real t = std::log(a.weight) + Real(2) * log_abs_f(a.lambda);
    if (std::isinf(t) && t > Real(0)) {
      out.infinite = true;
      return out;
    }
    terms.push_back(t);
    m = std::max(m, t);
  }
  if (terms.empty() || std::isinf(m)) {
    out.log_value = -std::numeric_limits<Real>::infinity();
    return out;
  }
  Real acc = 0;
  for (Real t : terms) acc += std::exp(t - m);
  out.log_value = (m + std::log(acc)) / Real(2);
  return out;
}

/// Spec-level moment: E[|f(Z)|^2]^{1/2} for a pointwise function.
template <typename Real>
MomentResult<Real> moment(const SpectralMeasure<Real>& mu,
                          const std::function<Complex<Real>(const Complex<Real>&)>& f) {
  return moment_logabs<Real>(mu, [&](const Complex<Real>& z) { return std::log(std::abs(f(z))); });
}

/// log E[|Z - r|^{-k}] (first moment of the inverse power, not squared).
template <typename Real>
MomentResult<Real> inverse_power_mean(const SpectralMeasure<Real>& mu, const Complex<Real>& r,
                                      int k) {
  auto res = moment_logabs<Real>(
      mu, [&](const Complex<Real>& z) { return Real(-k) / Real(2) * std::log(std::abs(z - r)); });
  res.log_value *= Real(2);  // undo the square root: E[|f|^2] with |f|^2 = |z-r|^{-k}
  return res;
}

/// log E[|p(Z)|^{-1}].
template <typename Real>
MomentResult<Real> inverse_poly_mean(const SpectralMeasure<Real>& mu,
                                     const ShiftPolynomial<Real>& p) {
  auto res = moment_logabs<Real>(
      mu, [&](const Complex<Real>& z) { return -p.log_abs(z) / Real(2); });
  res.log_value *= Real(2);
  return res;
}

/// P[|Z - r| <= radius].
template <typename Real>
Real disk_mass(const SpectralMeasure<Real>& mu, const Complex<Real>& r, Real radius) {
  Real mass = 0;
  for (const auto& a : mu.atoms)
    if (std::abs(a.lambda - r) <= radius) mass += a.weight;
  return mass;
}

/// Cyclic matrix with M(i+1, i) = beta_i and M(1, n) = beta_n
/// (1-indexed); the corner characteristic polynomial is z^k for every
/// k <= n-1, which makes naive corner-based shifts trivial.
template <typename Real>
HessenbergMatrix<Real> gen_cyclic_beta(int n, const std::vector<Real>& betas) {
  if (static_cast<int>(betas.size()) != n)
    throw std::invalid_argument("gen_cyclic_beta: need n betas");
  for (Real b : betas)
    if (!(b > Real(0) && b <= Real(1)))
      throw std::invalid_argument("gen_cyclic_beta: betas must lie in (0, 1]");
  ComplexMatrix<Real> m = ComplexMatrix<Real>::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) m(i + 1, i) = Complex<Real>(betas[static_cast<size_t>(i)], 0);
  m(0, n - 1) = Complex<Real>(betas[static_cast<size_t>(n - 1)], 0);
  return HessenbergMatrix<Real>(std::move(m));
}

enum class GenKind {
  RandomGinibre,
  Hermitian,
  UnitaryHessenberg,
  JordanBlock,
  NearNormal4x4Stall,
  ClusteredSpectrum,
};

inline const char* to_string(GenKind k) {
  switch (k) {
    case GenKind::RandomGinibre: return "random_ginibre";
    case GenKind::Hermitian: return "hermitian";
    case GenKind::UnitaryHessenberg: return "unitary_hessenberg";
    case GenKind::JordanBlock: return "jordan_block";
    case GenKind::NearNormal4x4Stall: return "near_normal_4x4_stall";
    case GenKind::ClusteredSpectrum: return "clustered_spectrum";
  }
  return "?";
}

inline GenKind gen_kind_from_string(const std::string& s) {
  if (s == "random_ginibre") return GenKind::RandomGinibre;
  if (s == "hermitian") return GenKind::Hermitian;
  if (s == "unitary_hessenberg") return GenKind::UnitaryHessenberg;
  if (s == "jordan_block") return GenKind::JordanBlock;
  if (s == "near_normal_4x4_stall") return GenKind::NearNormal4x4Stall;
  if (s == "clustered_spectrum") return GenKind::ClusteredSpectrum;
  throw std::invalid_argument("unknown generator kind: " + s);
}

namespace detail {

template <typename Real>
ComplexMatrix<Real> ginibre(int n, GaussianStream<Real>& g) {
  ComplexMatrix<Real> a(n, n);
  const Real scale = Real(1) / std::sqrt(Real(n));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) a(i, j) = g.complex_normal() * scale;
  return a;
}

template <typename Real>
ComplexMatrix<Real> haar_unitary(int n, GaussianStream<Real>& g) {
  ComplexMatrix<Real> a = ginibre<Real>(n, g);
  Eigen::HouseholderQR<ComplexMatrix<Real>> qr(a);
  ComplexMatrix<Real> q = qr.householderQ();
  ComplexMatrix<Real> r = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) q.col(j) *= phase<Real>(r(j, j));
  return q;
}

/// 4x4 near-normal matrix on which corner-polynomial strategies stall:
/// two weakly coupled symmetric swap blocks. The +/- spectral symmetry
/// makes the Wilkinson tie-break and the 2-Francis shift cycle without
/// potential progress, while a single-Ritz-value shift breaks it.
template <typename Real>
ComplexMatrix<Real> near_normal_stall_4x4() {
  const Real eps = Real(1) / Real(64);
  ComplexMatrix<Real> a = ComplexMatrix<Real>::Zero(4, 4);
  a(0, 1) = Complex<Real>(1, 0);
  a(1, 0) = Complex<Real>(1, 0);
  a(1, 2) = Complex<Real>(eps, 0);
  a(2, 1) = Complex<Real>(-eps, 0);
  a(2, 3) = Complex<Real>(1, 0);
  a(3, 2) = Complex<Real>(1, 0);
  return a;
}

}  // namespace detail

/// Deterministic-by-seed fixture generators for the test and benchmark
/// suites. The stall fixture ignores the seed (it is a single frozen
/// matrix, found by search).
template <typename Real>
ComplexMatrix<Real> gen_suite(GenKind kind, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_suite: n must be >= 1");
  GaussianStream<Real> g(seed);
  switch (kind) {
    case GenKind::RandomGinibre:
      return detail::ginibre<Real>(n, g);
    case GenKind::Hermitian: {
      ComplexMatrix<Real> a = detail::ginibre<Real>(n, g);
      ComplexMatrix<Real> h = (a + a.adjoint()) / Real(2);
      for (Index i = 0; i < n; ++i) h(i, i) = Complex<Real>(h(i, i).real(), 0);
      return h;
    }
    case GenKind::UnitaryHessenberg: {
      ComplexMatrix<Real> q = detail::haar_unitary<Real>(n, g);
      if (n == 1) return q;
      return hessenberg_reduce<Real>(q).first.entries();
    }
    case GenKind::JordanBlock: {
      ComplexMatrix<Real> a = ComplexMatrix<Real>::Zero(n, n);
      for (Index i = 0; i + 1 < n; ++i) a(i, i + 1) = Complex<Real>(1, 0);
      return a;
    }
    case GenKind::NearNormal4x4Stall:
      if (n != 4) throw std::invalid_argument("near_normal_4x4_stall: n must be 4");
      return detail::near_normal_stall_4x4<Real>();
    case GenKind::ClusteredSpectrum: {
      const int n_clusters = std::min(3, n);
      std::vector<Complex<Real>> centers;
      for (int c = 0; c < n_clusters; ++c) {
        const Real ang = Real(2) * Real(M_PI) * g.uniform();
        const Real rad = Real(0.5) + g.uniform();
        centers.push_back(std::polar(rad, ang));
      }
      ComplexMatrix<Real> t = ComplexMatrix<Real>::Zero(n, n);
      for (Index i = 0; i < n; ++i)
        t(i, i) = centers[static_cast<size_t>(i % n_clusters)] +
                  Real(1e-3) * g.complex_normal();
      for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) t(i, j) = Real(0.1) * g.complex_normal();
      ComplexMatrix<Real> u = detail::haar_unitary<Real>(n, g);
      return u * t * u.adjoint();
    }
  }
  throw std::invalid_argument("gen_suite: unknown kind");
}

enum class BaselineKind { Unshifted, Rayleigh, Wilkinson, FrancisK, ExceptionalUnit };

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Unshifted: return "unshifted";
    case BaselineKind::Rayleigh: return "rayleigh";
    case BaselineKind::Wilkinson: return "wilkinson";
    case BaselineKind::FrancisK: return "francis";
    case BaselineKind::ExceptionalUnit: return "exceptional";
  }
  return "?";
}

/// Golden-angle sequence used by deterministic exceptional shifts.
template <typename Real>
Real exceptional_angle(int step) {
  const Real golden = Real(2.399963229728653);
  return std::fmod(golden * Real(step), Real(2) * Real(M_PI));
}

/// Classical shifting strategies used as the comparison harness.
/// `step` indexes the deterministic angle sequence of the exceptional
/// baseline; `k` is the Francis degree.
template <typename Real>
ShiftPolynomial<Real> baseline_shift(const HessenbergMatrix<Real>& h, BaselineKind kind,
                                     int k = 2, int step = 0) {
  const Index n = h.n();
  switch (kind) {
    case BaselineKind::Unshifted:
      return ShiftPolynomial<Real>({Complex<Real>(0, 0)});
    case BaselineKind::Rayleigh:
      return ShiftPolynomial<Real>({h(n - 1, n - 1)});
    case BaselineKind::Wilkinson: {
      if (n < 2) return ShiftPolynomial<Real>({h(n - 1, n - 1)});
      const auto c2 = corner(h, 2);
      auto [l1, l2] = quadratic_eigenvalues<Real>(c2(0, 0), c2(0, 1), c2(1, 0), c2(1, 1));
      const Complex<Real> target = h(n - 1, n - 1);
      const Real d1 = std::abs(l1 - target), d2 = std::abs(l2 - target);
      Complex<Real> pick;
      if (d1 < d2) pick = l1;
      else if (d2 < d1) pick = l2;
      else pick = std::arg(l1) <= std::arg(l2) ? l1 : l2;
      return ShiftPolynomial<Real>({pick});
    }
    case BaselineKind::FrancisK: {
      const int kk = std::min<int>(k, static_cast<int>(n));
      auto se = small_eig(corner(h, kk), Real(1e-12));
      auto roots = se.values;
      std::sort(roots.begin(), roots.end(), [](const Complex<Real>& a, const Complex<Real>& b) {
        const Real ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma < mb;
        return std::arg(a) < std::arg(b);
      });
      return ShiftPolynomial<Real>(std::move(roots));
    }
    case BaselineKind::ExceptionalUnit: {
      const Real ang = exceptional_angle<Real>(step);
      return ShiftPolynomial<Real>({std::polar(h.scale(), ang)});
    }
  }
  throw std::invalid_argument("baseline_shift: unknown kind");
}

}  // namespace shiftqr
