#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace lkfkit {

/// Discrete-time system with one constant delay d_n and one time-varying
/// delay d(k) in [d_m, d_M]:
///
///   x(k+1) = A x(k) + A_n x(k - d_n) + A_d x(k - d(k))
///
/// All three matrices are n-by-n and 1 <= d_m <= d_n <= d_M.
struct DelaySystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd A_n;
  Eigen::MatrixXd A_d;
  int d_m = 1;
  int d_n = 1;
  int d_M = 1;

  int dim() const { return static_cast<int>(A.rows()); }

  /// Throws std::invalid_argument on dimension or delay-order violations.
  void validate() const;
};

/// Delay subsystem with constant terms at both delay-interval endpoints:
///
///   x(k+1) = A x(k) + A_m x(k - lo) + A_M x(k - hi) + A_d x(k - d(k)),
///   lo <= d(k) <= hi.
struct BoundedDelaySubsystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd A_m;
  Eigen::MatrixXd A_M;
  Eigen::MatrixXd A_d;
  int d_lo = 1;
  int d_hi = 1;

  int dim() const { return static_cast<int>(A.rows()); }
  int d_span() const { return d_hi - d_lo; }

  void validate() const;
};

/// Plant x_p(k+1) = A_p x_p(k) + B_p u(k) with delayed full-state output
/// y(k) = x_p(k - d(k)).
struct PlantModel {
  Eigen::MatrixXd A_p;
  Eigen::MatrixXd B_p;

  int state_dim() const { return static_cast<int>(A_p.rows()); }
  int input_dim() const { return static_cast<int>(B_p.cols()); }

  void validate() const;
};

/// Observer correction gain L, state-feedback gain K and output-error
/// filter gain F of the observer-based controller
///   xhat(k+1) = A_p xhat(k) + B_p u(k) + L e_y(k),
///   u(k)      = K xhat(k) + F e_y(k),
///   e_y(k)    = y(k) - xhat(k - d_n).
struct ControllerGains {
  Eigen::MatrixXd K;
  Eigen::MatrixXd F;
  Eigen::MatrixXd L;
};

/// State history [x(k), x(k-1), ..., x(k-d_M)], newest first.
struct HistoryVector {
  std::vector<Eigen::VectorXd> samples;

  int depth() const { return static_cast<int>(samples.size()) - 1; }
  int dim() const { return samples.empty() ? 0 : static_cast<int>(samples[0].size()); }

  /// x(k - i)
  const Eigen::VectorXd& at_delay(int i) const { return samples.at(static_cast<std::size_t>(i)); }

  /// Stacks the samples newest-first into one column vector.
  Eigen::VectorXd stacked() const;

  /// Mean of x(k - i) for i in [lo, hi] (inclusive, lo <= hi).
  Eigen::VectorXd window_average(int lo, int hi) const;

  static HistoryVector zero(int n, int d_M);
};

/// Mode of the switched representation for delay value d_k:
/// 1 when d_m <= d_k <= d_n, 2 when d_n < d_k <= d_M.
int sigma(int d_k, const DelaySystem& sys);

/// Splits the system into the two bounded-delay subsystems selected by
/// sigma. Subsystem 1 covers d(k) in [d_m, d_n] (constant-delay term at the
/// upper end), subsystem 2 covers [d_n, d_M] (constant-delay term at the
/// lower end); both share A and A_d.
std::pair<BoundedDelaySubsystem, BoundedDelaySubsystem> split_switched(const DelaySystem& sys);

/// Closed loop of plant + observer-based controller in (x_p, e) coordinates,
/// e = x_p - xhat. The result has state dimension 2 * n_p.
DelaySystem build_closed_loop(const PlantModel& plant, const ControllerGains& gains,
                              int d_m, int d_n, int d_M);

}  // namespace lkfkit
