#pragma once

#include <string>
#include <vector>

#include "lkfkit/conditions.hpp"

namespace lkfkit {

/// One normalized constraint block: S(x) = sum_k x_k A_k - C  must be PSD.
/// Strict senses of the source problem are already margin-shifted into C.
struct SdpConstraintBlock {
  std::string label;
  int dim = 0;
  Sense sense = Sense::StrictlyPositive;  // sense of the source constraint
  bool from_psd = false;                  // generated from a positive variable block
  double delta = 0.0;                     // margin shift baked into C
  Eigen::MatrixXd C;
  Eigen::MatrixXd original_constant;      // constant part of the source expression
  std::vector<std::pair<int, SymCoeff>> terms;  // sorted by global scalar index
};

struct SdpProblem {
  int num_vars = 0;
  VariableRegistry vars;  // empty directory for imported problems
  std::vector<SdpConstraintBlock> blocks;
};

/// Margin-shifts strict senses, folds negativity constraints into positivity
/// blocks and appends one positivity block per positive variable block.
/// delta = max(1e-8, 1e-9 * |constant|_F).
SdpProblem normalize(const AnalysisProblem& p);

/// Exact inverse of normalize on its output: reproduces the source
/// constraint list (positivity blocks are skipped; they are regenerated
/// from the registry flags).
AnalysisProblem denormalize(const SdpProblem& p);

enum class SolveStatus { Feasible, Infeasible, Inconclusive };

struct SolverConfig {
  int max_iterations = 300;
  double duality_gap_tol = 1e-8;     // relative duality gap at convergence
  double margin_recheck_tol = 1e-7;  // scaled floor of the certificate re-check
  double margin_stop = 1e-5;         // joint margin at which the search stops early
  double margin_cap = 1.0;           // upper bound on the joint-margin variable
  double box_radius = 1e7;           // bound on scaled variable magnitudes
  double step_fraction = 0.98;
  int threads = 0;                   // 0: pick from hardware
  bool verbose = false;
};

struct SolverDiagnostics {
  int iterations = 0;
  double mu = 0.0;
  double primal_residual = 0.0;
  double margin_lower = 0.0;  // certified achievable joint margin
  double margin_upper = 0.0;  // converged upper bound on it
  double wall_seconds = 0.0;
  std::string message;
};

struct FeasibilityResult {
  SolveStatus status = SolveStatus::Inconclusive;
  Assignment assignment;             // meaningful when status == Feasible
  std::vector<MarginEntry> margins;  // per-constraint margins at the assignment
  SolverDiagnostics diagnostics;
  double recheck_tol = 1e-7;
  double gap_tol = 1e-8;
};

/// Interior-point feasibility search (max joint margin, NT scaling).
/// A Feasible verdict always passed the independent margin re-check of the
/// normalized blocks; Infeasible is backed by a converged negative bound on
/// the best achievable joint margin.
FeasibilityResult solve(const SdpProblem& p, const SolverConfig& cfg = {});

/// lambda_min of every normalized block at x, with floor
/// -tol_scale * (1 + |C|_F).
std::vector<MarginEntry> normalized_margins(const SdpProblem& p, const Eigen::VectorXd& x,
                                            double tol_scale);

/// normalize + solve + re-check of the original expressions; the reported
/// margins are those of the source constraints.
FeasibilityResult solve_analysis(const AnalysisProblem& p, const SolverConfig& cfg = {});

}  // namespace lkfkit
