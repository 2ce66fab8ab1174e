#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "shiftqr/hessenberg.hpp"
#include "shiftqr/oracle.hpp"
#include "shiftqr/strategy.hpp"
#include "shiftqr/types.hpp"

namespace shiftqr {

/// One strategy iteration as seen by the trace sink.
template <typename Real>
struct IterationTrace {
  Index block_offset = 0;
  Index block_size = 0;
  int iter = 0;  // 1-based within the block
  Real psi = Real(0);  // potential after the step
  ShiftKind shift_kind = ShiftKind::Promising;
  Complex<Real> shift_root;
  std::optional<long long> net_index;
  long long candidates_tried = 0;
  Real tau = Real(0);
  Real min_subdiag = Real(0);  // smallest |h(i+1,i)| of the new iterate
};

template <typename Real>
using TraceSink = std::function<void(const IterationTrace<Real>&)>;

/// A + G with i.i.d. complex Gaussian entries of total variance
/// sigma^2 ||A||_F^2 / n^2 each, so ||G||_F ~ sigma ||A||_F.
/// Deterministic given the seed; sigma = 0 returns A unchanged.
template <typename Real>
ComplexMatrix<Real> perturb(const ComplexMatrix<Real>& a, Real sigma, std::uint64_t seed) {
  if (sigma < Real(0)) throw std::invalid_argument("perturb: sigma must be >= 0");
  if (sigma == Real(0)) return a;
  const Index n = a.rows();
  GaussianStream<Real> g(seed);
  const Real entry_dev = sigma * a.norm() / Real(n);
  ComplexMatrix<Real> out = a;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < a.cols(); ++j) out(i, j) += entry_dev * g.complex_normal();
  return out;
}

/// Zeroes every subdiagonal entry at or below delta * scale, then splits
/// into maximal irreducible diagonal blocks. Blocks inherit the parent
/// scale.
template <typename Real>
std::vector<std::pair<HessenbergMatrix<Real>, Index>> deflate(const HessenbergMatrix<Real>& h,
                                                              Real delta) {
  if (!(delta > Real(0))) throw std::invalid_argument("deflate: delta must be > 0");
  const Index n = h.n();
  ComplexMatrix<Real> m = h.entries();
  const Real thresh = delta * h.scale();
  for (Index i = 0; i + 1 < n; ++i)
    if (std::abs(m(i + 1, i)) <= thresh) m(i + 1, i) = Complex<Real>(0, 0);

  std::vector<std::pair<HessenbergMatrix<Real>, Index>> blocks;
  Index start = 0;
  for (Index i = 0; i < n; ++i) {
    const bool cut = (i + 1 == n) || m(i + 1, i) == Complex<Real>(0, 0);
    if (cut) {
      const Index len = i - start + 1;
      blocks.emplace_back(HessenbergMatrix<Real>(m.block(start, start, len, len), h.scale()),
                          start);
      start = i + 1;
    }
  }
  return blocks;
}

template <typename Real>
struct BlockSolveResult {
  HessenbergMatrix<Real> h_out;
  ComplexMatrix<Real> q;  // local similarity, h_out = q^* h q
  int iterations = 0;
};

/// Runs the strategy on one irreducible block until some subdiagonal
/// decouples. 2x2 blocks are triangularized closed-form. The effective
/// shift degree is min(cfg.k, largest power of two <= m-1). On
/// NoCandidateSucceeded the nonnormality bound is doubled, up to
/// 2^10 * cfg.B.
template <typename Real>
BlockSolveResult<Real> solve_block(const HessenbergMatrix<Real>& h,
                                   const StrategyConfig<Real>& cfg,
                                   const TraceSink<Real>& sink = {},
                                   Index trace_offset = 0) {
  const Index m = h.n();
  if (m < 2) throw std::invalid_argument("solve_block: block size must be >= 2");
  if (!h.is_unreduced()) throw std::invalid_argument("solve_block: block must be irreducible");

  BlockSolveResult<Real> out;
  if (m == 2) {
    const auto& e = h.entries();
    auto [l1, l2] = quadratic_eigenvalues<Real>(e(0, 0), e(0, 1), e(1, 0), e(1, 1));
    // Eigenvector (lambda - d, c) of the eigenvalue maximizing its norm;
    // one Givens similarity triangularizes.
    const Complex<Real> c = e(1, 0), d = e(1, 1);
    const Complex<Real> lam = std::abs(l1 - d) >= std::abs(l2 - d) ? l1 : l2;
    const Complex<Real> v0 = lam - d, v1 = c;
    const Real nv = std::sqrt(std::norm(v0) + std::norm(v1));
    ComplexMatrix<Real> q(2, 2);
    q(0, 0) = v0 / nv;
    q(1, 0) = v1 / nv;
    q(0, 1) = -std::conj(v1 / nv);
    q(1, 1) = std::conj(v0 / nv);
    ComplexMatrix<Real> t = q.adjoint() * e * q;
    t(1, 0) = Complex<Real>(0, 0);
    out.h_out = HessenbergMatrix<Real>(std::move(t), h.scale());
    out.q = std::move(q);
    return out;
  }

  int k_eff = 2;
  while (k_eff * 2 <= std::min<int>(cfg.k, static_cast<int>(m) - 1)) k_eff *= 2;
  StrategyConfig<Real> cfg_eff = cfg.with_k(std::min(cfg.k, k_eff));

  HessenbergMatrix<Real> cur = h;
  out.q = ComplexMatrix<Real>::Identity(m, m);
  Real b_cur = cfg.B;
  while (!decoupling_check(cur, cfg.delta)) {
    ShStepResult<Real> step;
    for (;;) {
      try {
        step = sh_step(cur, cfg_eff.with_B(b_cur), /*want_q=*/true);
        break;
      } catch (const NoCandidateSucceeded&) {
        if (b_cur * 2 > std::ldexp(cfg.B, 10)) throw;
        b_cur *= 2;
      }
    }
    cur = step.step.h_next;
    out.q *= *step.step.q_accum;
    ++out.iterations;
    if (sink) {
      IterationTrace<Real> tr;
      tr.block_offset = trace_offset;
      tr.block_size = m;
      tr.iter = out.iterations;
      tr.psi = step.decision.psi_after;
      tr.shift_kind = step.decision.kind;
      tr.shift_root = step.decision.root;
      tr.net_index = step.decision.net_index;
      tr.candidates_tried = step.decision.candidates_tried;
      tr.tau = step.decision.tau;
      Real ms = cur.subdiag_abs(0);
      for (Index i = 1; i + 1 < m; ++i) ms = std::min(ms, cur.subdiag_abs(i));
      tr.min_subdiag = ms;
      sink(tr);
    }
  }
  out.h_out = std::move(cur);
  return out;
}

/// Schur factorization A = Q T Q^* plus solve diagnostics.
template <typename Real>
struct SchurResult {
  ComplexMatrix<Real> t;
  ComplexMatrix<Real> q;  // empty when Q accumulation is disabled
  Real backward_error = Real(-1);  // ||A - Q T Q^*||_F / ||A||_F; -1 when not computed
  long long iterations_total = 0;
  std::vector<std::pair<Index, int>> per_block_iterations;  // (block size, iterations)
  struct DecouplingEvent {
    Index block_offset;
    Index subdiag_index;  // global index i of the zeroed h(i+1, i)
    int iteration;        // block iteration count at the event
  };
  std::vector<DecouplingEvent> decoupling_events;
};

template <typename Real>
struct SolveReport {
  StrategyConfig<Real> config;
  std::vector<IterationTrace<Real>> trace;
  std::map<Index, int> dec_counts;  // block size -> worst iterations-to-decouple
};

template <typename Real>
struct SolveOptions {
  bool accumulate_q = true;
  Real perturb_sigma = Real(0);
  std::uint64_t seed = 0;
  TraceSink<Real> sink;  // optional; the report records the trace regardless
};

/// Full solve: Hessenberg reduction, deflation worklist, strategy per
/// block, global accumulation. T comes back exactly upper triangular.
/// With perturbation enabled the backward error is measured against the
/// perturbed input (the solver's effective input).
template <typename Real>
std::pair<SchurResult<Real>, SolveReport<Real>> schur(const ComplexMatrix<Real>& a,
                                                      const StrategyConfig<Real>& cfg,
                                                      const SolveOptions<Real>& options = {}) {
  SchurResult<Real> result;
  SolveReport<Real> report;
  report.config = cfg;

  const ComplexMatrix<Real> a_eff =
      options.perturb_sigma > Real(0) ? perturb(a, options.perturb_sigma, options.seed) : a;
  auto [h0, q0] = hessenberg_reduce(a_eff);
  const Index n = h0.n();
  const Real scale = h0.scale();

  ComplexMatrix<Real> t = h0.entries();
  if (options.accumulate_q) result.q = std::move(q0);

  TraceSink<Real> sink = [&](const IterationTrace<Real>& tr) {
    report.trace.push_back(tr);
    if (options.sink) options.sink(tr);
  };

  // Zero already-negligible subdiagonals, then queue irreducible ranges.
  std::deque<std::pair<Index, Index>> work;  // (offset, length)
  const Real thresh = cfg.delta * scale;
  auto push_ranges = [&](Index off, Index len) {
    Index start = off;
    for (Index i = off; i < off + len; ++i) {
      const bool cut = (i + 1 == off + len) || t(i + 1, i) == Complex<Real>(0, 0);
      if (cut) {
        if (i - start + 1 >= 2) work.emplace_back(start, i - start + 1);
        start = i + 1;
      }
    }
  };
  for (Index i = 0; i + 1 < n; ++i)
    if (std::abs(t(i + 1, i)) <= thresh) t(i + 1, i) = Complex<Real>(0, 0);
  push_ranges(0, n);

  while (!work.empty()) {
    const auto [off, len] = work.front();
    work.pop_front();
    HessenbergMatrix<Real> block(t.block(off, off, len, len), scale);
    auto res = solve_block(block, cfg, sink, off);

    t.block(off, off, len, len) = res.h_out.entries();
    if (off > 0) t.block(0, off, off, len) = t.block(0, off, off, len) * res.q;
    if (off + len < n)
      t.block(off, off + len, len, n - off - len) =
          res.q.adjoint() * t.block(off, off + len, len, n - off - len);
    if (options.accumulate_q)
      result.q.middleCols(off, len) = result.q.middleCols(off, len) * res.q;

    result.iterations_total += res.iterations;
    result.per_block_iterations.emplace_back(len, res.iterations);
    auto it = report.dec_counts.find(len);
    if (it == report.dec_counts.end() || it->second < res.iterations)
      report.dec_counts[len] = res.iterations;

    // The block came in irreducible, so every negligible subdiagonal in
    // its range is a fresh decoupling event.
    for (Index i = off; i + 1 < off + len; ++i) {
      if (std::abs(t(i + 1, i)) <= thresh) {
        t(i + 1, i) = Complex<Real>(0, 0);
        result.decoupling_events.push_back({off, i, res.iterations});
      }
    }
    push_ranges(off, len);
  }

  result.t = std::move(t);
  if (options.accumulate_q) {
    const Real denom = a_eff.norm();
    result.backward_error =
        denom > Real(0)
            ? (a_eff - result.q * result.t * result.q.adjoint()).norm() / denom
            : Real(0);
  }
  return {std::move(result), std::move(report)};
}

}  // namespace shiftqr
