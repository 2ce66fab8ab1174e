#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "shiftqr/hessenberg.hpp"
#include "shiftqr/iqr.hpp"
#include "shiftqr/ritz.hpp"
#include "shiftqr/types.hpp"

namespace shiftqr {

/// Promising Ritz value by bisection: at round j the surviving set is
/// split evenly and the half maximizing ||e_n^* p_{j,b}(H)^{-2^{j-1}}||
/// is kept. Numerically singular factors win every comparison (ties
/// keep the first half).
template <typename Real>
Complex<Real> find_promising(const HessenbergMatrix<Real>& h,
                             const std::vector<Complex<Real>>& ritz_values,
                             OpCount* ops = nullptr) {
  const int k = static_cast<int>(ritz_values.size());
  if (!is_power_of_two(k) || k < 1)
    throw std::invalid_argument("find_promising: |ritz| must be a power of two >= 1");
  std::vector<Complex<Real>> current = ritz_values;
  int power = 1;
  while (current.size() > 1) {
    const size_t half = current.size() / 2;
    std::vector<Complex<Real>> lo(current.begin(), current.begin() + half);
    std::vector<Complex<Real>> hi(current.begin() + half, current.end());
    const auto n0 = inverse_row_norm(h, ShiftPolynomial<Real>(lo), power, ops);
    const auto n1 = inverse_row_norm(h, ShiftPolynomial<Real>(hi), power, ops);
    current = n1.greater_than(n0) ? std::move(hi) : std::move(lo);
    power *= 2;
  }
  return current[0];
}

template <typename Real>
Complex<Real> find_promising(const HessenbergMatrix<Real>& h, const RitzSet<Real>& ritz,
                             OpCount* ops = nullptr) {
  return find_promising(h, ritz.values, ops);
}

/// Upper bound on the number of points of a triangular-lattice eps-net of
/// the unit disk (spacing sqrt(3)*eps intersected with the (1+eps) disk).
template <typename Real>
Real net_size_bound(Real eps) {
  const Real q = Real(1) + Real(1) / eps;
  return Real(2) * Real(M_PI) / (Real(3) * std::sqrt(Real(3))) * q * q +
         Real(4) * std::sqrt(Real(2)) / std::sqrt(Real(3)) * q + Real(1);
}

/// Exceptional-shift net radius: 2^{1/k} theta alpha B^{1/k} psi.
template <typename Real>
Real exc_radius(const StrategyConfig<Real>& cfg, Real psi) {
  return std::pow(Real(2), Real(1) / Real(cfg.k)) * cfg.theta * cfg.alpha *
         std::pow(cfg.B, Real(1) / Real(cfg.k)) * psi;
}

/// Exceptional-shift net resolution:
/// (gamma^2 / ((12 B^4)^{1/k} alpha^2 theta^2))^{k/(k-1)}.
template <typename Real>
Real exc_epsilon(const StrategyConfig<Real>& cfg) {
  const Real base = cfg.gamma * cfg.gamma /
                    (std::pow(Real(12) * std::pow(cfg.B, Real(4)), Real(1) / Real(cfg.k)) *
                     cfg.alpha * cfg.alpha * cfg.theta * cfg.theta);
  return std::pow(base, Real(cfg.k) / Real(cfg.k - 1));
}

namespace detail {

/// Enumerates the equilateral triangular lattice anchored at `center`
/// (one axis along the positive real direction, nearest-neighbor
/// distance `spacing`) intersected with the closed disk of radius rmax,
/// in order of increasing distance from the center, ties broken by
/// angle then by (re, im). Works shell by shell so astronomically large
/// nets can be scanned lazily. The visitor returns true to stop.
template <typename Real>
void scan_triangular_net(const Complex<Real>& center, Real spacing, Real rmax,
                         const std::function<bool(const Complex<Real>&, long long)>& visit) {
  const Real a = spacing;
  struct Entry {
    Real d;
    Real ang;
    Complex<Real> p;
  };
  long long index = 0;
  const Real row_h = a * std::sqrt(Real(3)) / Real(2);
  for (long long shell = 0;; ++shell) {
    const Real d_lo = Real(shell) * a;
    if (d_lo > rmax) break;
    const Real d_next = Real(shell + 1) * a;     // exclusive shell bound
    const Real d_cap = std::min(d_next, rmax);   // inclusive search span
    std::vector<Entry> batch;
    const long long jmax = static_cast<long long>(std::floor(d_cap / row_h));
    for (long long j = -jmax; j <= jmax; ++j) {
      const Real y = Real(j) * row_h;
      const Real x_span_sq = d_cap * d_cap - y * y;
      if (x_span_sq < Real(0)) continue;
      const Real x_span = std::sqrt(x_span_sq);
      const long long i_lo = static_cast<long long>(std::ceil((-x_span) / a - Real(j) / Real(2)));
      const long long i_hi = static_cast<long long>(std::floor(x_span / a - Real(j) / Real(2)));
      for (long long i = i_lo; i <= i_hi; ++i) {
        const Real x = a * (Real(i) + Real(j) / Real(2));
        const Real d = std::hypot(x, y);
        if (d < d_lo || d >= d_next || d > rmax) continue;
        batch.push_back({d, std::atan2(y, x), center + Complex<Real>(x, y)});
      }
    }
    std::sort(batch.begin(), batch.end(), [](const Entry& l, const Entry& r) {
      if (l.d != r.d) return l.d < r.d;
      if (l.ang != r.ang) return l.ang < r.ang;
      if (l.p.real() != r.p.real()) return l.p.real() < r.p.real();
      return l.p.imag() < r.p.imag();
    });
    for (const auto& e : batch) {
      if (visit(e.p, index)) return;
      ++index;
    }
  }
}

}  // namespace detail

/// Deterministic exceptional-shift candidate set: triangular lattice of
/// spacing sqrt(3)*eps*R anchored at the promising Ritz value, clipped
/// to the disk of radius (1+eps)*R, listed nearest-first.
template <typename Real>
struct ExceptionalNet {
  Complex<Real> center;
  Real radius = Real(0);   // R
  Real spacing = Real(0);  // sqrt(3) * eps * R (lattice nearest-neighbor distance)
  Real epsilon = Real(0);
  std::vector<Complex<Real>> points;
};

template <typename Real>
ExceptionalNet<Real> exceptional_net(const HessenbergMatrix<Real>& h, const Complex<Real>& r,
                                     const StrategyConfig<Real>& cfg) {
  const Real psi = potential(h, cfg.k);
  if (!(psi > Real(0))) throw std::invalid_argument("exceptional_net: psi_k(H) must be > 0");
  ExceptionalNet<Real> net;
  net.center = r;
  net.epsilon = exc_epsilon(cfg);
  net.radius = exc_radius(cfg, psi);
  net.spacing = std::sqrt(Real(3)) * net.epsilon * net.radius;
  detail::scan_triangular_net<Real>(
      r, net.spacing, (Real(1) + net.epsilon) * net.radius,
      [&](const Complex<Real>& p, long long) {
        net.points.push_back(p);
        return false;
      });
  return net;
}

enum class ShiftKind { Promising, Exceptional };

inline const char* to_string(ShiftKind k) {
  return k == ShiftKind::Promising ? "promising" : "exceptional";
}

/// Outcome of one strategy step: which shift was applied as (z - root)^k
/// and the potential before/after.
template <typename Real>
struct ShiftDecision {
  ShiftKind kind = ShiftKind::Promising;
  Complex<Real> root;
  std::optional<long long> net_index;  // scan position of the winning net point
  long long candidates_tried = 0;      // iqr trials, including the promising one
  Real psi_before = Real(0);
  Real psi_after = Real(0);
  Real tau = Real(0);  // tau of the accepted step
};

class NoCandidateSucceeded : public NumericalError {
 public:
  NoCandidateSucceeded(double psi, int k, double B, long long tried)
      : NumericalError(describe(psi, k, B, tried)), psi(psi), k(k), B(B), candidates_tried(tried) {}
  double psi;
  int k;
  double B;
  long long candidates_tried;

 private:
  static std::string describe(double psi, int k, double B, long long tried) {
    std::ostringstream os;
    os << "no exceptional shift reduced the potential (psi=" << psi << ", k=" << k << ", B=" << B
       << ", candidates=" << tried << "); kappa_V(H) likely exceeds B";
    return os.str();
  }
};

template <typename Real>
struct ShStepResult {
  QrStepResult<Real> step;
  ShiftDecision<Real> decision;
};

/// One iteration of the shifting strategy: try the promising Ritz value;
/// on stagnation scan the exceptional net nearest-first and return the
/// first candidate achieving psi <= gamma * psi. Deterministic.
template <typename Real>
ShStepResult<Real> sh_step(const HessenbergMatrix<Real>& h, const StrategyConfig<Real>& cfg,
                           bool want_q = false) {
  const int k = cfg.k;
  if (k > h.n() - 1) throw std::invalid_argument("sh_step: k must be <= n-1");
  const Real psi0 = potential(h, k);
  if (!(psi0 > Real(0))) throw std::invalid_argument("sh_step: psi_k(H) must be > 0");

  std::vector<Complex<Real>> ritz_values;
  bool certified = true;
  try {
    ritz_values = opt_ritz(h, k, cfg.theta).values;
  } catch (const CertificationFailure& e) {
    // Pathologically ill-conditioned corner: fall through to the
    // exceptional net directly, centered on the best-effort value.
    ritz_values.assign(e.best_values.begin(), e.best_values.end());
    certified = false;
  }
  const Complex<Real> r = find_promising(h, ritz_values);

  ShStepResult<Real> out;
  out.decision.root = r;
  out.decision.psi_before = psi0;

  if (certified) {
    auto trial = iqr_step(h, ShiftPolynomial<Real>::power(r, k), want_q);
    ++out.decision.candidates_tried;
    const Real psi1 = potential(trial.h_next, k);
    if (psi1 <= cfg.gamma * psi0) {
      out.decision.kind = ShiftKind::Promising;
      out.decision.psi_after = psi1;
      out.decision.tau = trial.tau;
      out.step = std::move(trial);
      return out;
    }
  }

  const Real eps = exc_epsilon(cfg);
  const Real radius = exc_radius(cfg, psi0);
  const Real spacing = std::sqrt(Real(3)) * eps * radius;
  bool found = false;
  detail::scan_triangular_net<Real>(
      r, spacing, (Real(1) + eps) * radius, [&](const Complex<Real>& s, long long idx) {
        auto trial = iqr_step(h, ShiftPolynomial<Real>::power(s, k), false);
        ++out.decision.candidates_tried;
        const Real psi1 = potential(trial.h_next, k);
        if (psi1 > cfg.gamma * psi0) return false;
        out.decision.kind = ShiftKind::Exceptional;
        out.decision.root = s;
        out.decision.net_index = idx;
        out.decision.psi_after = psi1;
        out.decision.tau = trial.tau;
        out.step = std::move(trial);
        found = true;
        return true;
      });
  if (!found)
    throw NoCandidateSucceeded(static_cast<double>(psi0), k, static_cast<double>(cfg.B),
                               out.decision.candidates_tried);
  if (want_q) {
    // Trials run without similarity accumulation; rerun the winner with Q.
    out.step = iqr_step(h, ShiftPolynomial<Real>::power(out.decision.root, k), true);
  }
  return out;
}

}  // namespace shiftqr
