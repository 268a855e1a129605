#pragma once

#include <string>
#include <vector>

#include "lkfkit/affine.hpp"
#include "lkfkit/model.hpp"
#include "lkfkit/selectors.hpp"

namespace lkfkit {

enum class Sense { StrictlyPositive, StrictlyNegative };

struct ConstraintMeta {
  std::string kind;  // "coupling", "decrease", "edge"
  int mode = 0;      // owning mode, 0 when not mode-specific
  int delay = -1;    // delay vertex / edge delay value, -1 when n/a
};

struct Constraint {
  std::string label;
  AffineMatrixExpr expr;
  Sense sense = Sense::StrictlyNegative;
  ConstraintMeta meta;
};

/// A feasibility problem: find values for every declared block (positive
/// blocks positive definite) satisfying all constraints strictly.
struct AnalysisProblem {
  VariableRegistry vars;
  std::vector<Constraint> constraints;

  int block(const std::string& name) const;  // throws when absent
};

/// Analysis conditions for one bounded-delay subsystem
///   x(k+1) = A x(k) + A_m x(k-lo) + A_M x(k-hi) + A_d x(k-d(k)).
/// Emits the reciprocally-convex coupling condition plus the projected
/// forward-difference condition at both delay vertices.
AnalysisProblem bounded_analysis_problem(const BoundedDelaySubsystem& sub);

/// Path-complete analysis conditions for the two-mode switched
/// representation of a system with constant + time-varying delays. Per mode:
/// coupling + two vertex conditions; then one edge condition per integer
/// delay value of each mode's range, tying the two functionals together on
/// the stacked history.
AnalysisProblem switched_analysis_problem(const DelaySystem& sys);

struct DesignProblem {
  AnalysisProblem base;
  PlantModel plant;
  int d_m = 1, d_n = 1, d_M = 1;
  double epsilon = 0.0;
  int Ubar = -1, Kbar = -1, Fbar = -1, Lbar = -1;
};

/// Observer/controller co-design conditions for a plant with delayed
/// full-state output. epsilon in (-1, 0] is the scalar multiplier weight.
DesignProblem codesign_problem(const PlantModel& plant, int d_m, int d_n, int d_M,
                               double epsilon);

struct GainRecovery {
  ControllerGains gains;
  DelaySystem closed_loop;
  double u_condition = 0.0;  // condition number of the recovered U
};

/// Recovers K, F, L from a solved design problem and assembles the closed
/// loop. Throws std::runtime_error when U is numerically singular
/// (condition number above 1e12).
GainRecovery recover_gains(const DesignProblem& p, const Assignment& a);

/// Maps a design certificate onto the matching analysis certificate via the
/// congruence variables, for consistency checks of the recovered loop.
Assignment unbar_assignment(const DesignProblem& p, const Assignment& a,
                            const AnalysisProblem& analysis);

struct MarginEntry {
  std::string label;
  double margin = 0.0;     // min eigenvalue after sense normalization
  double tolerance = 0.0;  // acceptance floor (negative)
  int dim = 0;
};

/// Evaluates every constraint and every positive block at an assignment.
/// Margins are sense-normalized minimum eigenvalues; tolerance is
/// -tol_scale * (1 + |constant|_F).
std::vector<MarginEntry> evaluate_margins(const AnalysisProblem& p, const Assignment& a,
                                          double tol_scale = 1e-7);

bool margins_pass(const std::vector<MarginEntry>& margins);

}  // namespace lkfkit
