#include "lkfkit/conditions.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cassert>
#include <limits>
#include <stdexcept>

namespace lkfkit {

namespace {

struct PhiParts {
  AffineMatrixExpr base;  // delay-independent part
  AffineMatrixExpr lin;   // coefficient of the delay value
};

// Forward-difference bound of one mode's functional on the augmented
// layout, split as Phi(d) = base + d * lin. The reciprocally-convex and
// tail Wirtinger terms are emitted only for windows of positive length.
PhiParts build_phi(const VariableRegistry& reg, const ModeSelectorSet& sel,
                   const ModeLkfBlocks& bl) {
  const int n = sel.n;
  const int lo = sel.d_lo;
  const int span = sel.d_hi - sel.d_lo;
  const int tail = sel.d_tail;
  const int ad = sel.aug_dim();

  AffineMatrixExpr base(ad);
  AffineMatrixExpr lin(ad);

  base.add_quad_form(reg, bl.P, sel.w_next, 1.0);
  base.add_quad_form(reg, bl.P, sel.w_now, -1.0);
  lin.add_he_sandwich(reg, bl.P, sel.w_slope, sel.w_next - sel.w_now, 1.0);

  base.add_sym_block(reg, bl.Q1, 1 * n, 1.0);
  base.add_sym_block(reg, bl.Q2, 2 * n, 1.0);
  base.add_sym_block(reg, bl.Q1, 2 * n, -1.0);
  base.add_sym_block(reg, bl.Q2, 4 * n, -1.0);
  if (sel.mode == 1 && tail >= 1) base.add_sym_block(reg, bl.Q3, 4 * n, 1.0);

  base.add_quad_form(reg, bl.Z1, sel.step_diff, static_cast<double>(lo) * lo);
  if (span >= 1) base.add_quad_form(reg, bl.Z2, sel.step_diff, static_cast<double>(span) * span);
  if (sel.mode == 1 && tail >= 1)
    base.add_quad_form(reg, bl.Z3, sel.step_diff, static_cast<double>(tail) * tail);

  const double g = wirtinger_gamma(lo).value();
  base.add_quad_form(reg, bl.Z1, sel.head_pair.topRows(n), -1.0);
  base.add_quad_form(reg, bl.Z1, sel.head_pair.bottomRows(n), -3.0 * g);

  if (span >= 1) {
    base.add_quad_form(reg, bl.Z2, sel.recip_pairs.middleRows(0, n), -1.0);
    base.add_quad_form(reg, bl.Z2, sel.recip_pairs.middleRows(n, n), -3.0);
    base.add_quad_form(reg, bl.Z2, sel.recip_pairs.middleRows(2 * n, n), -1.0);
    base.add_quad_form(reg, bl.Z2, sel.recip_pairs.middleRows(3 * n, n), -3.0);
    base.add_he_sandwich(reg, bl.X, sel.recip_pairs.topRows(2 * n),
                         sel.recip_pairs.bottomRows(2 * n), -1.0);
  }
  if (sel.mode == 1 && tail >= 1) {
    base.add_quad_form(reg, bl.Z3, sel.tail_pair.topRows(n), -1.0);
    base.add_quad_form(reg, bl.Z3, sel.tail_pair.bottomRows(n), -3.0);
  }
  return {std::move(base), std::move(lin)};
}

// [Z2-pair  X; X'  Z2-pair] > 0 condition of the reciprocally convex bound.
AffineMatrixExpr build_coupling(const VariableRegistry& reg, const ModeLkfBlocks& bl, int n) {
  AffineMatrixExpr E(4 * n);
  E.add_sym_block(reg, bl.Z2, 0, 1.0);
  E.add_sym_block(reg, bl.Z2, n, 3.0);
  E.add_sym_block(reg, bl.Z2, 2 * n, 1.0);
  E.add_sym_block(reg, bl.Z2, 3 * n, 3.0);
  E.add_full_block_mirror(reg, bl.X, 0, 2 * n, 1.0);
  return E;
}

// V_j as a quadratic form on the stacked history.
AffineMatrixExpr build_history_form(const VariableRegistry& reg, const ModeSelectorSet& sel,
                                    const ModeLkfBlocks& bl) {
  AffineMatrixExpr S = history_quadratic_tail(reg, sel, bl);
  S.add_quad_form(reg, bl.P, sel.hist_to_accum, 1.0);
  return S;
}

}  // namespace

int AnalysisProblem::block(const std::string& name) const {
  const int id = vars.find(name);
  if (id < 0) throw std::out_of_range("unknown variable block: " + name);
  return id;
}

AnalysisProblem bounded_analysis_problem(const BoundedDelaySubsystem& sub) {
  sub.validate();
  const int n = sub.dim();
  const int span = sub.d_span();

  AnalysisProblem p;
  ModeLkfBlocks bl;
  bl.P = p.vars.add_symmetric("P", 3 * n, true);
  bl.Q1 = p.vars.add_symmetric("Q_1", n, true);
  bl.Q2 = p.vars.add_symmetric("Q_2", n, true);
  bl.Z1 = p.vars.add_symmetric("Z_1", n, true);
  bl.Z2 = p.vars.add_symmetric("Z_2", n, true);
  if (span >= 1) bl.X = p.vars.add_full("X", 2 * n, 2 * n);

  const ModeSelectorSet sel = build_mode_selectors(n, sub.d_lo, sub.d_lo, sub.d_hi, 2);
  const PhiParts phi = build_phi(p.vars, sel, bl);
  const Eigen::MatrixXd G = subsystem_null_basis(sub);

  if (span >= 1)
    p.constraints.push_back({"coupling", build_coupling(p.vars, bl, n),
                             Sense::StrictlyPositive, {"coupling", 0, -1}});
  for (int side = 0; side < 2; ++side) {
    const int d = side == 0 ? sub.d_lo : sub.d_hi;
    Constraint c;
    c.label = std::string("decrease_") + (side == 0 ? "lo" : "hi") + "_d" + std::to_string(d);
    c.expr = affine_in_d(phi.base, phi.lin, static_cast<double>(d)).congruence(G);
    c.sense = Sense::StrictlyNegative;
    c.meta = {"decrease", 0, d};
    p.constraints.push_back(std::move(c));
  }
  return p;
}

AnalysisProblem switched_analysis_problem(const DelaySystem& sys) {
  sys.validate();
  const int n = sys.dim();
  const int span1 = sys.d_n - sys.d_m;
  const int span2 = sys.d_M - sys.d_n;
  const int tail = sys.d_M - sys.d_n;  // mode-1 tail length

  AnalysisProblem p;
  ModeLkfBlocks bl1, bl2;
  bl1.P = p.vars.add_symmetric("P_1", 4 * n, true);
  bl2.P = p.vars.add_symmetric("P_2", 3 * n, true);
  bl1.Q1 = p.vars.add_symmetric("Q_1_1", n, true);
  bl1.Q2 = p.vars.add_symmetric("Q_2_1", n, true);
  bl1.Z1 = p.vars.add_symmetric("Z_1_1", n, true);
  bl1.Z2 = p.vars.add_symmetric("Z_2_1", n, true);
  bl2.Q1 = p.vars.add_symmetric("Q_1_2", n, true);
  bl2.Q2 = p.vars.add_symmetric("Q_2_2", n, true);
  bl2.Z1 = p.vars.add_symmetric("Z_1_2", n, true);
  bl2.Z2 = p.vars.add_symmetric("Z_2_2", n, true);
  if (tail >= 1) {
    bl1.Q3 = p.vars.add_symmetric("Q_3", n, true);
    bl1.Z3 = p.vars.add_symmetric("Z_3", n, true);
  }
  if (span1 >= 1) bl1.X = p.vars.add_full("X_1", 2 * n, 2 * n);
  if (span2 >= 1) bl2.X = p.vars.add_full("X_2", 2 * n, 2 * n);

  const ModeSelectorSet sel1 = build_mode_selectors(n, sys.d_m, sys.d_n, sys.d_M, 1);
  const ModeSelectorSet sel2 = build_mode_selectors(n, sys.d_m, sys.d_n, sys.d_M, 2);

  for (int mode : {1, 2}) {
    const ModeSelectorSet& sel = mode == 1 ? sel1 : sel2;
    const ModeLkfBlocks& bl = mode == 1 ? bl1 : bl2;
    const int span = mode == 1 ? span1 : span2;
    const PhiParts phi = build_phi(p.vars, sel, bl);
    const Eigen::MatrixXd G = mode_null_basis(sys, sel);
    const std::string m = std::to_string(mode);
    if (span >= 1)
      p.constraints.push_back({"coupling_m" + m, build_coupling(p.vars, bl, n),
                               Sense::StrictlyPositive, {"coupling", mode, -1}});
    for (int side = 0; side < 2; ++side) {
      const int d = side == 0 ? sel.d_lo : sel.d_hi;
      Constraint c;
      c.label = "decrease_m" + m + (side == 0 ? "_lo_d" : "_hi_d") + std::to_string(d);
      c.expr = affine_in_d(phi.base, phi.lin, static_cast<double>(d)).congruence(G);
      c.sense = Sense::StrictlyNegative;
      c.meta = {"decrease", mode, d};
      p.constraints.push_back(std::move(c));
    }
  }

  const AffineMatrixExpr S1 = build_history_form(p.vars, sel1, bl1);
  const AffineMatrixExpr S2 = build_history_form(p.vars, sel2, bl2);
  const int hd = n * (sys.d_M + 1);
  auto add_edges = [&](const AffineMatrixExpr& S_to, const AffineMatrixExpr& S_from, int mode,
                       int lo, int hi) {
    for (int l = lo; l <= hi; ++l) {
      AffineMatrixExpr E(hd + n);
      E.add_embedded(S_to, 0, 1.0);
      E.add_embedded(S_from, n, -1.0);
      Constraint c;
      c.label = "edge_m" + std::to_string(mode) + "_l" + std::to_string(l);
      c.expr = E.congruence(dynamics_null_basis(sys, l));
      c.sense = Sense::StrictlyNegative;
      c.meta = {"edge", mode, l};
      p.constraints.push_back(std::move(c));
    }
  };
  add_edges(S1, S2, 1, sys.d_m, sys.d_n);
  add_edges(S2, S1, 2, sys.d_n, sys.d_M);
  return p;
}

namespace {

struct BarredMatrices {
  AffineRectExpr A, Ad, An, J;
};

BarredMatrices build_barred(const VariableRegistry& reg, const PlantModel& plant, int Ubar,
                            int Kbar, int Fbar, int Lbar) {
  const int np = plant.state_dim();
  const int n = 2 * np;
  const Eigen::MatrixXd none;

  BarredMatrices b{AffineRectExpr(n, n), AffineRectExpr(n, n), AffineRectExpr(n, n),
                   AffineRectExpr(n, n)};
  b.A.add_product(reg, Ubar, true, plant.A_p, none, 0, 0, 1.0);
  b.A.add_product(reg, Kbar, false, plant.B_p, none, 0, 0, 1.0);
  b.A.add_product(reg, Kbar, false, plant.B_p, none, 0, np, -1.0);
  b.A.add_product(reg, Ubar, true, plant.A_p, none, np, np, 1.0);

  b.Ad.add_product(reg, Fbar, false, plant.B_p, none, 0, 0, 1.0);
  b.Ad.add_placed(reg, Lbar, false, np, 0, -1.0);

  b.An.add_product(reg, Fbar, false, plant.B_p, none, 0, 0, -1.0);
  b.An.add_product(reg, Fbar, false, plant.B_p, none, 0, np, 1.0);
  b.An.add_placed(reg, Lbar, false, np, 0, 1.0);
  b.An.add_placed(reg, Lbar, false, np, np, -1.0);

  b.J.add_placed(reg, Ubar, false, 0, 0, 1.0);
  b.J.add_placed(reg, Ubar, false, np, np, 1.0);
  return b;
}

// Slack-multiplier term of one mode's vertex condition: the top 5n-by-5n
// corner couples the recovered loop matrices with the congruence variable.
AffineMatrixExpr build_multiplier_term(const BarredMatrices& bm, int mode, double eps, int n,
                                       int ad) {
  const AffineRectExpr zero(n, n);
  const AffineRectExpr& Am = mode == 1 ? zero : bm.An;
  const AffineRectExpr& AM = mode == 1 ? bm.An : zero;

  AffineMatrixExpr ups(ad);
  ups.add_he_rect(bm.J, 0, 0, -1.0);
  AffineRectExpr r01 = bm.A;
  r01.add_scaled(bm.J, -eps);
  ups.add_he_rect(r01, 0, n, 1.0);
  ups.add_he_rect(Am, 0, 2 * n, 1.0);
  ups.add_he_rect(bm.Ad, 0, 3 * n, 1.0);
  ups.add_he_rect(AM, 0, 4 * n, 1.0);
  ups.add_he_rect(bm.A, n, n, eps);
  ups.add_he_rect(Am, n, 2 * n, eps);
  ups.add_he_rect(bm.Ad, n, 3 * n, eps);
  ups.add_he_rect(AM, n, 4 * n, eps);
  return ups;
}

// Dynamics row of the recovered loop in the congruence-transformed
// variables, on kappa = [x(k+1); xbar(k)].
AffineRectExpr build_barred_dynamics_row(const VariableRegistry& reg, const BarredMatrices& bm,
                                         int Ubar, int l, int n, int np, int d_n, int d_M) {
  AffineRectExpr L(n, n * (d_M + 2));
  L.add_placed(reg, Ubar, true, 0, 0, -1.0);
  L.add_placed(reg, Ubar, true, np, np, -1.0);
  L.add_embedded(bm.A, 0, n, 1.0);
  L.add_embedded(bm.An, 0, n * (1 + d_n), 1.0);
  L.add_embedded(bm.Ad, 0, n * (1 + l), 1.0);
  return L;
}

}  // namespace

DesignProblem codesign_problem(const PlantModel& plant, int d_m, int d_n, int d_M,
                               double epsilon) {
  plant.validate();
  if (!(1 <= d_m && d_m <= d_n && d_n <= d_M))
    throw std::invalid_argument("need 1 <= d_m <= d_n <= d_M");
  if (!(epsilon > -1.0 && epsilon <= 0.0))
    throw std::invalid_argument("epsilon must lie in (-1, 0]");

  const int np = plant.state_dim();
  const int m = plant.input_dim();
  const int n = 2 * np;
  const int span1 = d_n - d_m;
  const int span2 = d_M - d_n;
  const int tail = d_M - d_n;

  DesignProblem dp;
  dp.plant = plant;
  dp.d_m = d_m;
  dp.d_n = d_n;
  dp.d_M = d_M;
  dp.epsilon = epsilon;
  AnalysisProblem& p = dp.base;

  ModeLkfBlocks bl1, bl2;
  bl1.P = p.vars.add_symmetric("P_1", 4 * n, true);
  bl2.P = p.vars.add_symmetric("P_2", 3 * n, true);
  bl1.Q1 = p.vars.add_symmetric("Q_1_1", n, true);
  bl1.Q2 = p.vars.add_symmetric("Q_2_1", n, true);
  bl1.Z1 = p.vars.add_symmetric("Z_1_1", n, true);
  bl1.Z2 = p.vars.add_symmetric("Z_2_1", n, true);
  bl2.Q1 = p.vars.add_symmetric("Q_1_2", n, true);
  bl2.Q2 = p.vars.add_symmetric("Q_2_2", n, true);
  bl2.Z1 = p.vars.add_symmetric("Z_1_2", n, true);
  bl2.Z2 = p.vars.add_symmetric("Z_2_2", n, true);
  if (tail >= 1) {
    bl1.Q3 = p.vars.add_symmetric("Q_3", n, true);
    bl1.Z3 = p.vars.add_symmetric("Z_3", n, true);
  }
  if (span1 >= 1) bl1.X = p.vars.add_full("X_1", 2 * n, 2 * n);
  if (span2 >= 1) bl2.X = p.vars.add_full("X_2", 2 * n, 2 * n);
  dp.Ubar = p.vars.add_full("Ubar", np, np);
  dp.Kbar = p.vars.add_full("Kbar", m, np);
  dp.Fbar = p.vars.add_full("Fbar", m, np);
  dp.Lbar = p.vars.add_full("Lbar", np, np);

  const BarredMatrices bm = build_barred(p.vars, plant, dp.Ubar, dp.Kbar, dp.Fbar, dp.Lbar);
  const ModeSelectorSet sel1 = build_mode_selectors(n, d_m, d_n, d_M, 1);
  const ModeSelectorSet sel2 = build_mode_selectors(n, d_m, d_n, d_M, 2);

  for (int mode : {1, 2}) {
    const ModeSelectorSet& sel = mode == 1 ? sel1 : sel2;
    const ModeLkfBlocks& bl = mode == 1 ? bl1 : bl2;
    const int span = mode == 1 ? span1 : span2;
    const PhiParts phi = build_phi(p.vars, sel, bl);
    const AffineMatrixExpr ups = build_multiplier_term(bm, mode, epsilon, n, sel.aug_dim());
    const std::string ms = std::to_string(mode);
    if (span >= 1)
      p.constraints.push_back({"coupling_m" + ms, build_coupling(p.vars, bl, n),
                               Sense::StrictlyPositive, {"coupling", mode, -1}});
    for (int side = 0; side < 2; ++side) {
      const int d = side == 0 ? sel.d_lo : sel.d_hi;
      Constraint c;
      c.label = "decrease_m" + ms + (side == 0 ? "_lo_d" : "_hi_d") + std::to_string(d);
      c.expr = affine_in_d(phi.base, phi.lin, static_cast<double>(d));
      c.expr.add_scaled(ups, 1.0);
      c.sense = Sense::StrictlyNegative;
      c.meta = {"decrease", mode, d};
      p.constraints.push_back(std::move(c));
    }
  }

  const AffineMatrixExpr S1 = build_history_form(p.vars, sel1, bl1);
  const AffineMatrixExpr S2 = build_history_form(p.vars, sel2, bl2);
  const int hd = n * (d_M + 1);
  Eigen::MatrixXd mult = Eigen::MatrixXd::Zero(hd + n, n);
  mult.topRows(n).setIdentity();
  mult.middleRows(n, n) = epsilon * Eigen::MatrixXd::Identity(n, n);

  auto add_edges = [&](const AffineMatrixExpr& S_to, const AffineMatrixExpr& S_from, int mode,
                       int lo, int hi) {
    for (int l = lo; l <= hi; ++l) {
      AffineMatrixExpr E(hd + n);
      E.add_embedded(S_to, 0, 1.0);
      E.add_embedded(S_from, n, -1.0);
      const AffineRectExpr row =
          build_barred_dynamics_row(p.vars, bm, dp.Ubar, l, n, np, d_n, d_M);
      E.add_scaled(row.left_mul(mult).he(), 1.0);
      Constraint c;
      c.label = "edge_m" + std::to_string(mode) + "_l" + std::to_string(l);
      c.expr = std::move(E);
      c.sense = Sense::StrictlyNegative;
      c.meta = {"edge", mode, l};
      p.constraints.push_back(std::move(c));
    }
  };
  add_edges(S1, S2, 1, d_m, d_n);
  add_edges(S2, S1, 2, d_n, d_M);
  return dp;
}

GainRecovery recover_gains(const DesignProblem& p, const Assignment& a) {
  const Eigen::MatrixXd U = a.get(p.Ubar);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(U);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12))
    throw std::runtime_error("recover_gains: U numerically singular (cond=" +
                             std::to_string(cond) + ")");
  const auto lu = U.partialPivLu();
  GainRecovery out;
  out.u_condition = cond;
  out.gains.K = lu.solve(a.get(p.Kbar).transpose()).transpose();
  out.gains.F = lu.solve(a.get(p.Fbar).transpose()).transpose();
  out.gains.L = lu.solve(a.get(p.Lbar).transpose()).transpose();
  out.closed_loop = build_closed_loop(p.plant, out.gains, p.d_m, p.d_n, p.d_M);
  return out;
}

Assignment unbar_assignment(const DesignProblem& p, const Assignment& a,
                            const AnalysisProblem& analysis) {
  const int np = p.plant.state_dim();
  const int n = 2 * np;
  const Eigen::MatrixXd U = a.get(p.Ubar);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  J.topLeftCorner(np, np) = U;
  J.bottomRightCorner(np, np) = U;
  const auto lu = J.partialPivLu();

  // M -> T^{-1} M T^{-T} with T = diag(J, ..., J)
  auto untransform = [&](const Eigen::MatrixXd& M) {
    const int copies = static_cast<int>(M.rows()) / n;
    Eigen::MatrixXd R = M;
    for (int b = 0; b < copies; ++b)
      R.middleRows(b * n, n) = lu.solve(R.middleRows(b * n, n));
    for (int b = 0; b < copies; ++b)
      R.middleCols(b * n, n) = lu.solve(R.middleCols(b * n, n).transpose()).transpose();
    return R;
  };

  Assignment out;
  for (const auto& blk : analysis.vars.blocks()) {
    const int src = p.base.vars.find(blk.name);
    if (src < 0) throw std::out_of_range("unbar_assignment: block missing: " + blk.name);
    out.set(blk.id, untransform(a.get(src)));
  }
  return out;
}

std::vector<MarginEntry> evaluate_margins(const AnalysisProblem& p, const Assignment& a,
                                          double tol_scale) {
  std::vector<MarginEntry> out;
  for (const auto& c : p.constraints) {
    Eigen::MatrixXd M = c.expr.eval(p.vars, a);
    if (c.sense == Sense::StrictlyNegative) M = -M;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    MarginEntry e;
    e.label = c.label;
    e.margin = es.eigenvalues().minCoeff();
    e.tolerance = -tol_scale * (1.0 + c.expr.constant_part().norm());
    e.dim = c.expr.dim();
    out.push_back(std::move(e));
  }
  for (const auto& blk : p.vars.blocks()) {
    if (!blk.positive) continue;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a.get(blk.id), Eigen::EigenvaluesOnly);
    MarginEntry e;
    e.label = "psd_" + blk.name;
    e.margin = es.eigenvalues().minCoeff();
    e.tolerance = -tol_scale;
    e.dim = blk.rows;
    out.push_back(std::move(e));
  }
  return out;
}

bool margins_pass(const std::vector<MarginEntry>& margins) {
  for (const auto& m : margins)
    if (!(m.margin >= m.tolerance)) return false;
  return true;
}

}  // namespace lkfkit
