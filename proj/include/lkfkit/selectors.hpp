#pragma once

#include <Eigen/Dense>

#include "lkfkit/affine.hpp"
#include "lkfkit/model.hpp"

namespace lkfkit {

/// Exact rational weight of the second Wirtinger summation term:
/// 1 for a one-step window, (d+1)/(d-1) for longer ones.
struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Rational wirtinger_gamma(int d);

/// Constant selector matrices over the augmented vector
///   aug = [x(k+1); x(k); x(k-lo); x(k-d(k)); x(k-hi); v1; v2; v3]
/// of one bounded-delay subsystem, where v1, v2, v3 are the window averages
/// over [k-lo, k], [k-d(k), k-lo] and [k-hi, k-d(k)].
///
/// w(k) = (w_now + d * w_slope) aug and w(k+1) = (w_next + d * w_slope) aug
/// reproduce the accumulation vector
///   w = [x; sum_{k-lo..k-1} x; sum_{k-hi..k-lo-1} x]
/// at time k and k+1; the pair maps feed the Wirtinger / reciprocally convex
/// bounds of the forward difference.
struct SelectorSet {
  int n = 0;
  int d_lo = 0;
  int d_hi = 0;

  Eigen::MatrixXd wirt_core;    // 2n x 6n
  Eigen::MatrixXd recip_pairs;  // 4n x 8n, both Wirtinger pairs of the split window
  Eigen::MatrixXd head_pair;    // 2n x 8n, Wirtinger pair of the [k-lo, k] window
  Eigen::MatrixXd step_diff;    // n x 8n, x(k+1) - x(k)
  Eigen::MatrixXd avg_weights;  // 3n x 3n, average-to-sum weights
  Eigen::MatrixXd w_now;        // 3n x 8n
  Eigen::MatrixXd w_next;       // 3n x 8n
  Eigen::MatrixXd w_slope;      // 3n x 8n, coefficient of d

  int aug_dim() const { return 8 * n; }
};

SelectorSet build_interval_selectors(int n, int d_lo, int d_hi);

/// Mode-level selectors of the switched construction. Mode 2 reuses the
/// plain layout with bounds [d_n, d_M]; mode 1 works on bounds [d_m, d_n]
/// and appends two blocks [x(k-d_M); v4] so that both mode functionals act
/// on the full history, where v4 averages the tail window [k-d_M, k-d_n].
struct ModeSelectorSet {
  int n = 0;
  int mode = 1;
  int d_lo = 0, d_hi = 0;  // mode delay bounds
  int d_M = 0;             // overall maximum delay
  int d_tail = 0;          // d_M - d_hi (0 for mode 2)
  int w_dim = 0;           // 4n for mode 1, 3n for mode 2

  Eigen::MatrixXd recip_pairs;    // 4n x aug_dim
  Eigen::MatrixXd head_pair;      // 2n x aug_dim
  Eigen::MatrixXd step_diff;      // n x aug_dim
  Eigen::MatrixXd tail_pair;      // 2n x aug_dim, Wirtinger pair of the tail window (mode 1)
  Eigen::MatrixXd w_now, w_next;  // w_dim x aug_dim
  Eigen::MatrixXd w_slope;        // w_dim x aug_dim
  Eigen::MatrixXd hist_to_accum;  // w_dim x n(d_M+1), stacked history -> accumulation vector

  int aug_blocks() const { return mode == 1 ? 10 : 8; }
  int aug_dim() const { return aug_blocks() * n; }
  int hist_dim() const { return n * (d_M + 1); }
};

ModeSelectorSet build_mode_selectors(int n, int d_m, int d_n, int d_M, int mode);

/// Row encoding of the one-step dynamics at delay value l on
/// kappa = [x(k+1); xbar(k)]: dynamics_row(l) * kappa = 0.
Eigen::MatrixXd dynamics_row(const DelaySystem& sys, int l);

/// Null basis of dynamics_row(l): kappa = dynamics_null_basis(l) * xbar(k).
Eigen::MatrixXd dynamics_null_basis(const DelaySystem& sys, int l);

/// Null basis of [-I  A  A_m  A_d  A_M  0 ...] on the augmented layout of a
/// bounded-delay subsystem; shape 8n x 7n.
Eigen::MatrixXd subsystem_null_basis(const BoundedDelaySubsystem& sub);

/// Mode-level variant; shape aug_dim x (aug_dim - n).
Eigen::MatrixXd mode_null_basis(const DelaySystem& sys, const ModeSelectorSet& sel);

/// Registry handles of one mode's LKF blocks. Q3/Z3 are the shared tail
/// blocks (mode 1 only); -1 when absent.
struct ModeLkfBlocks {
  int P = -1;
  int Q1 = -1, Q2 = -1;
  int Z1 = -1, Z2 = -1;
  int Q3 = -1, Z3 = -1;
  int X = -1;
};

/// The quadratic form of the summation parts of the mode LKF on the stacked
/// history: V_j(k) = xbar' (W5' P W5 + tail) xbar with this as `tail`.
AffineMatrixExpr history_quadratic_tail(const VariableRegistry& reg, const ModeSelectorSet& sel,
                                        const ModeLkfBlocks& blocks);

/// Augmented vector of one bounded-delay subsystem from x(k+1), the history
/// and the current delay value.
Eigen::VectorXd assemble_aug_vector(const Eigen::VectorXd& x_next, const HistoryVector& hist,
                                    int d_k, int d_lo, int d_hi);

/// Mode-level augmented vector (8n for mode 2, 10n for mode 1).
Eigen::VectorXd assemble_mode_aug_vector(const Eigen::VectorXd& x_next, const HistoryVector& hist,
                                         int d_k, const ModeSelectorSet& sel);

}  // namespace lkfkit
