#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lkfkit/affine.hpp"
#include "lkfkit/model.hpp"

namespace lkfkit {

/// Deterministic delay signal on [d_m, d_M]. The random kind is a stateless
/// hash of (seed, k), so any sample can be queried independently and runs
/// reproduce bit-exactly across platforms.
struct DelaySignal {
  enum class Kind { Constant, UniformRandom, ExtremalToggle, Explicit };

  Kind kind = Kind::Constant;
  int d_m = 1, d_M = 1;
  int constant_value = 1;
  std::uint64_t seed = 0;
  int period = 1;
  std::vector<int> sequence;

  int value_at(int k) const;

  static DelaySignal constant(int d, int d_m, int d_M);
  static DelaySignal uniform_random(std::uint64_t seed, int d_m, int d_M);
  static DelaySignal extremal_toggle(int period, int d_m, int d_M);
  static DelaySignal explicit_sequence(std::vector<int> seq, int d_m, int d_M);
};

struct Trajectory {
  std::vector<Eigen::VectorXd> states;  // x(0..K)
  std::vector<int> delays;              // d(0..K-1)
  std::vector<int> modes;               // sigma(0..K-1)
  HistoryVector initial_history;        // on [-d_M, 0]

  /// History window [x(k), ..., x(k-d_M)] at step k, drawing from the
  /// initial history for negative times.
  HistoryVector history_at(int k, int d_M) const;
};

/// Exact recursion of the constant + time-varying delay system.
Trajectory simulate(const DelaySystem& sys, const HistoryVector& phi, const DelaySignal& d,
                    int horizon);

struct ObserverLoopResult {
  std::vector<Eigen::VectorXd> plant_states;     // x_p(0..K)
  std::vector<Eigen::VectorXd> observer_states;  // xhat(0..K)
  std::vector<Eigen::VectorXd> errors;           // x_p - xhat
};

/// Plant + observer-based controller simulated in the original coordinates.
/// phi_plant / phi_observer give x_p and xhat on [-d_M, 0].
ObserverLoopResult simulate_observer_loop(const PlantModel& plant, const ControllerGains& gains,
                                          const DelaySignal& d, int d_n,
                                          const HistoryVector& phi_plant,
                                          const HistoryVector& phi_observer, int horizon);

/// Solved functional blocks of the switched analysis. Blocks that a
/// degenerate geometry drops are zero matrices.
struct LkfCertificate {
  Eigen::MatrixXd P1, P2;
  Eigen::MatrixXd Q1_1, Q2_1, Z1_1, Z2_1;
  Eigen::MatrixXd Q1_2, Q2_2, Z1_2, Z2_2;
  Eigen::MatrixXd Q3, Z3;
  Eigen::MatrixXd X1, X2;

  static LkfCertificate from_assignment(const VariableRegistry& vars, const Assignment& a, int n);
};

struct LkfValue {
  double direct = 0.0;     // term-by-term summation
  double quadratic = 0.0;  // stacked-history quadratic form
};

/// Evaluates one mode's functional both ways; callers assert agreement.
LkfValue eval_lkf(const LkfCertificate& cert, const DelaySystem& sys, int mode,
                  const HistoryVector& hist);

struct DecreaseViolation {
  int trajectory = 0;
  int step = 0;
  int from_node = 0;  // functional providing the previous level
  int to_node = 0;    // functional evaluated after the step
  double deficit = 0.0;
  std::string note;
};

struct DecreaseReport {
  int steps_checked = 0;
  int edges_checked = 0;
  std::vector<DecreaseViolation> violations;
  bool passed() const { return violations.empty(); }
};

/// Along each trajectory checks every inequality the path-complete graph
/// asserts at the taken step: V_{sigma(k)}(k+1) < V_i(k) for both i, and
/// strict decrease of min(V_1, V_2). Relative slack 1e-9; steps with
/// |history| < 1e-12 are skipped.
DecreaseReport check_path_complete_decrease(const LkfCertificate& cert, const DelaySystem& sys,
                                            const std::vector<Trajectory>& trajectories);

struct CrossCheckVerdict {
  bool instability_found = false;
  std::vector<int> witness;  // periodic delay word with spectral radius > 1
  double witness_growth = 0.0;
  long nodes_explored = 0;
  bool capped = false;
};

/// Desk-scale delay-free embedding: one companion matrix per delay value,
/// exhaustive product search up to `depth` with norm pruning, plus extremal
/// delay simulations. One-sided: a witness certifies instability, absence
/// of one certifies nothing.
CrossCheckVerdict brute_force_cross_check(const DelaySystem& sys, int depth,
                                          long node_cap = 2000000);

/// Companion matrix of the delay-free embedding at delay value d.
Eigen::MatrixXd delay_companion(const DelaySystem& sys, int d);

/// splitmix64; the stateless generator behind the random delay signal.
std::uint64_t splitmix64(std::uint64_t z);

}  // namespace lkfkit
