#include "lkfkit/selectors.hpp"

#include <cassert>
#include <stdexcept>

namespace lkfkit {

namespace {

// Writes s * I_n into the n-by-n block (br, bc) of M.
void put(Eigen::MatrixXd& M, int n, int br, int bc, double s) {
  M.block(br * n, bc * n, n, n) += s * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

Rational wirtinger_gamma(int d) {
  if (d <= 0) throw std::invalid_argument("wirtinger_gamma: window length must be positive");
  if (d == 1) return {1, 1};
  return {d + 1, d - 1};
}

SelectorSet build_interval_selectors(int n, int d_lo, int d_hi) {
  if (n < 1 || d_lo < 1 || d_hi < d_lo)
    throw std::invalid_argument("build_interval_selectors: need n >= 1 and 1 <= d_lo <= d_hi");
  SelectorSet s;
  s.n = n;
  s.d_lo = d_lo;
  s.d_hi = d_hi;

  // difference / Wirtinger-residual pair of a window [a, b] given the block
  // order [x(b), x(a), avg] ... realized below by column placement
  s.wirt_core = Eigen::MatrixXd::Zero(2 * n, 6 * n);
  put(s.wirt_core, n, 0, 1, 1.0);
  put(s.wirt_core, n, 0, 2, -1.0);
  put(s.wirt_core, n, 1, 1, 1.0);
  put(s.wirt_core, n, 1, 2, 1.0);
  put(s.wirt_core, n, 1, 5, -2.0);

  s.recip_pairs = Eigen::MatrixXd::Zero(4 * n, 8 * n);
  s.recip_pairs.block(0, 2 * n, 2 * n, 6 * n) = s.wirt_core;
  s.recip_pairs.block(2 * n, n, 2 * n, 6 * n) = s.wirt_core;

  s.head_pair = Eigen::MatrixXd::Zero(2 * n, 8 * n);
  s.head_pair.block(0, 0, 2 * n, 6 * n) = s.wirt_core;

  s.step_diff = Eigen::MatrixXd::Zero(n, 8 * n);
  put(s.step_diff, n, 0, 0, 1.0);
  put(s.step_diff, n, 0, 1, -1.0);

  s.avg_weights = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  put(s.avg_weights, n, 1, 0, static_cast<double>(d_lo + 1));
  put(s.avg_weights, n, 2, 1, static_cast<double>(1 - d_lo));
  put(s.avg_weights, n, 2, 2, static_cast<double>(d_hi + 1));

  s.w_now = Eigen::MatrixXd::Zero(3 * n, 8 * n);
  put(s.w_now, n, 0, 1, 1.0);
  put(s.w_now, n, 1, 1, -1.0);
  put(s.w_now, n, 2, 2, -1.0);
  put(s.w_now, n, 2, 3, -1.0);
  s.w_now.block(0, 5 * n, 3 * n, 3 * n) = s.avg_weights;

  s.w_next = Eigen::MatrixXd::Zero(3 * n, 8 * n);
  put(s.w_next, n, 0, 0, 1.0);
  put(s.w_next, n, 1, 2, -1.0);
  put(s.w_next, n, 2, 3, -1.0);
  put(s.w_next, n, 2, 4, -1.0);
  s.w_next.block(0, 5 * n, 3 * n, 3 * n) = s.avg_weights;

  s.w_slope = Eigen::MatrixXd::Zero(3 * n, 8 * n);
  put(s.w_slope, n, 2, 6, 1.0);
  put(s.w_slope, n, 2, 7, -1.0);
  return s;
}

ModeSelectorSet build_mode_selectors(int n, int d_m, int d_n, int d_M, int mode) {
  if (mode != 1 && mode != 2) throw std::invalid_argument("mode must be 1 or 2");
  if (!(1 <= d_m && d_m <= d_n && d_n <= d_M))
    throw std::invalid_argument("need 1 <= d_m <= d_n <= d_M");

  ModeSelectorSet s;
  s.n = n;
  s.mode = mode;
  s.d_lo = mode == 1 ? d_m : d_n;
  s.d_hi = mode == 1 ? d_n : d_M;
  s.d_M = d_M;
  s.d_tail = d_M - s.d_hi;
  s.w_dim = (mode == 1 ? 4 : 3) * n;

  const SelectorSet base = build_interval_selectors(n, s.d_lo, s.d_hi);
  const int ad = s.aug_dim();

  auto pad = [&](const Eigen::MatrixXd& M) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(M.rows(), ad);
    out.leftCols(M.cols()) = M;
    return out;
  };

  s.recip_pairs = pad(base.recip_pairs);
  s.head_pair = pad(base.head_pair);
  s.step_diff = pad(base.step_diff);

  s.tail_pair = Eigen::MatrixXd::Zero(2 * n, ad);
  if (mode == 1) {
    put(s.tail_pair, n, 0, 4, 1.0);
    put(s.tail_pair, n, 0, 8, -1.0);
    put(s.tail_pair, n, 1, 4, 1.0);
    put(s.tail_pair, n, 1, 8, 1.0);
    put(s.tail_pair, n, 1, 9, -2.0);
  }

  s.w_now = Eigen::MatrixXd::Zero(s.w_dim, ad);
  s.w_next = Eigen::MatrixXd::Zero(s.w_dim, ad);
  s.w_slope = Eigen::MatrixXd::Zero(s.w_dim, ad);
  s.w_now.topRows(3 * n) = pad(base.w_now);
  s.w_next.topRows(3 * n) = pad(base.w_next);
  s.w_slope.topRows(3 * n) = pad(base.w_slope);
  if (mode == 1) {
    // fourth accumulation component: the tail sums at k and k+1
    put(s.w_now, n, 3, 4, -1.0);
    put(s.w_now, n, 3, 9, static_cast<double>(s.d_tail + 1));
    put(s.w_next, n, 3, 8, -1.0);
    put(s.w_next, n, 3, 9, static_cast<double>(s.d_tail + 1));
  }

  s.hist_to_accum = Eigen::MatrixXd::Zero(s.w_dim, s.hist_dim());
  put(s.hist_to_accum, n, 0, 0, 1.0);
  for (int i = 1; i <= s.d_lo; ++i) put(s.hist_to_accum, n, 1, i, 1.0);
  for (int i = s.d_lo + 1; i <= s.d_hi; ++i) put(s.hist_to_accum, n, 2, i, 1.0);
  if (mode == 1)
    for (int i = s.d_hi + 1; i <= d_M; ++i) put(s.hist_to_accum, n, 3, i, 1.0);
  return s;
}

Eigen::MatrixXd dynamics_row(const DelaySystem& sys, int l) {
  const int n = sys.dim();
  if (l < 1 || l > sys.d_M) throw std::invalid_argument("dynamics_row: l outside [1, d_M]");
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n * (sys.d_M + 2));
  L.block(0, 0, n, n) = -Eigen::MatrixXd::Identity(n, n);
  L.block(0, n, n, n) = sys.A;
  L.block(0, n * (1 + sys.d_n), n, n) += sys.A_n;
  L.block(0, n * (1 + l), n, n) += sys.A_d;
  return L;
}

Eigen::MatrixXd dynamics_null_basis(const DelaySystem& sys, int l) {
  const int n = sys.dim();
  if (l < 1 || l > sys.d_M) throw std::invalid_argument("dynamics_null_basis: l outside [1, d_M]");
  const int hd = n * (sys.d_M + 1);
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(hd + n, hd);
  N.block(0, 0, n, n) = sys.A;
  N.block(0, n * sys.d_n, n, n) += sys.A_n;
  N.block(0, n * l, n, n) += sys.A_d;
  N.bottomRows(hd).setIdentity();
  return N;
}

Eigen::MatrixXd subsystem_null_basis(const BoundedDelaySubsystem& sub) {
  const int n = sub.dim();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(8 * n, 7 * n);
  N.block(0, 0, n, n) = sub.A;
  N.block(0, n, n, n) = sub.A_m;
  N.block(0, 2 * n, n, n) = sub.A_d;
  N.block(0, 3 * n, n, n) = sub.A_M;
  N.bottomRows(7 * n).setIdentity();
  return N;
}

Eigen::MatrixXd mode_null_basis(const DelaySystem& sys, const ModeSelectorSet& sel) {
  const int n = sys.dim();
  const int ad = sel.aug_dim();
  const Eigen::MatrixXd Am =
      sel.mode == 1 ? Eigen::MatrixXd::Zero(n, n).eval() : sys.A_n;
  const Eigen::MatrixXd AM =
      sel.mode == 1 ? sys.A_n : Eigen::MatrixXd::Zero(n, n).eval();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(ad, ad - n);
  N.block(0, 0, n, n) = sys.A;
  N.block(0, n, n, n) = Am;
  N.block(0, 2 * n, n, n) = sys.A_d;
  N.block(0, 3 * n, n, n) = AM;
  N.bottomRows(ad - n).setIdentity();
  return N;
}

AffineMatrixExpr history_quadratic_tail(const VariableRegistry& reg, const ModeSelectorSet& sel,
                                        const ModeLkfBlocks& blocks) {
  const int n = sel.n;
  const int lo = sel.d_lo;
  const int span = sel.d_hi - sel.d_lo;
  AffineMatrixExpr E(sel.hist_dim());

  auto diag_add = [&](int beta, int blk, double s) {
    if (blk >= 0 && s != 0.0) E.add_sym_block(reg, blk, beta * n, s);
  };
  // symmetric block placed at block position (beta-1, beta) and its mirror
  auto offd_add = [&](int beta, int blk, double s) {
    if (blk < 0 || s == 0.0) return;
    const VariableBlock& b = reg.block(blk);
    for (int e = 0; e < b.scalar_count(); ++e) {
      auto [r, c] = reg.entry_rc(blk, e);
      E.coeff({blk, e}).tri.push_back({(beta - 1) * n + r, beta * n + c, s});
      if (r != c) E.coeff({blk, e}).tri.push_back({(beta - 1) * n + c, beta * n + r, s});
    }
  };

  const double dl = lo, sp = span;
  diag_add(0, blocks.Z1, dl * dl);
  diag_add(0, blocks.Z2, sp * sp);
  for (int i = 1; i <= lo; ++i) {
    diag_add(i, blocks.Q1, 1.0);
    diag_add(i, blocks.Z2, 2.0 * sp * sp);
    diag_add(i, blocks.Z1, dl * (2.0 * dl - 2.0 * i + 1.0));
    offd_add(i, blocks.Z2, -sp * sp);
    offd_add(i, blocks.Z1, -dl * (dl - i + 1.0));
  }
  for (int l = 1; l <= span; ++l) {
    const int beta = lo + l;
    diag_add(beta, blocks.Q2, 1.0);
    diag_add(beta, blocks.Z2, sp * (2.0 * sp - 2.0 * l + 1.0));
    offd_add(beta, blocks.Z2, -sp * (sp - l + 1.0));
  }
  // constant-rate tail of the mode-1 functional
  if (sel.mode == 1 && sel.d_tail >= 1) {
    const double dt = sel.d_tail;
    for (int beta = sel.d_hi + 1; beta <= sel.d_M; ++beta) diag_add(beta, blocks.Q3, 1.0);
    diag_add(0, blocks.Z3, dt * dt);
    for (int i = 1; i <= sel.d_hi; ++i) {
      diag_add(i, blocks.Z3, 2.0 * dt * dt);
      offd_add(i, blocks.Z3, -dt * dt);
    }
    for (int l = 1; l <= sel.d_tail; ++l) {
      const int beta = sel.d_hi + l;
      diag_add(beta, blocks.Z3, dt * (2.0 * dt - 2.0 * l + 1.0));
      offd_add(beta, blocks.Z3, -dt * (dt - l + 1.0));
    }
  }
  return E;
}

Eigen::VectorXd assemble_aug_vector(const Eigen::VectorXd& x_next, const HistoryVector& hist,
                                    int d_k, int d_lo, int d_hi) {
  if (d_k < d_lo || d_k > d_hi) throw std::invalid_argument("assemble_aug_vector: delay out of range");
  if (hist.depth() < d_hi) throw std::invalid_argument("assemble_aug_vector: history too short");
  const int n = hist.dim();
  Eigen::VectorXd xi(8 * n);
  xi.segment(0, n) = x_next;
  xi.segment(n, n) = hist.at_delay(0);
  xi.segment(2 * n, n) = hist.at_delay(d_lo);
  xi.segment(3 * n, n) = hist.at_delay(d_k);
  xi.segment(4 * n, n) = hist.at_delay(d_hi);
  xi.segment(5 * n, n) = hist.window_average(0, d_lo);
  xi.segment(6 * n, n) = hist.window_average(d_lo, d_k);
  xi.segment(7 * n, n) = hist.window_average(d_k, d_hi);
  return xi;
}

Eigen::VectorXd assemble_mode_aug_vector(const Eigen::VectorXd& x_next, const HistoryVector& hist,
                                         int d_k, const ModeSelectorSet& sel) {
  if (hist.depth() < sel.d_M) throw std::invalid_argument("assemble_mode_aug_vector: history too short");
  const int n = sel.n;
  Eigen::VectorXd base = assemble_aug_vector(x_next, hist, d_k, sel.d_lo, sel.d_hi);
  if (sel.mode == 2) return base;
  Eigen::VectorXd xi(sel.aug_dim());
  xi.head(8 * n) = base;
  xi.segment(8 * n, n) = hist.at_delay(sel.d_M);
  xi.segment(9 * n, n) = hist.window_average(sel.d_hi, sel.d_M);
  return xi;
}

}  // namespace lkfkit
