#include <Eigen/Eigenvalues>

#include "lkfkit/sdp.hpp"

namespace lkfkit {

namespace {
constexpr double kDeltaFloor = 1e-8;
constexpr double kDeltaScale = 1e-9;
}  // namespace

SdpProblem normalize(const AnalysisProblem& p) {
  SdpProblem out;
  out.vars = p.vars;
  out.num_vars = p.vars.total_scalars();

  for (const auto& c : p.constraints) {
    SdpConstraintBlock b;
    b.label = c.label;
    b.dim = c.expr.dim();
    b.sense = c.sense;
    b.from_psd = false;
    b.delta = std::max(kDeltaFloor, kDeltaScale * c.expr.constant_part().norm());
    b.original_constant = c.expr.constant_part();
    const double sign = c.sense == Sense::StrictlyNegative ? -1.0 : 1.0;
    b.C = -sign * c.expr.constant_part() +
          b.delta * Eigen::MatrixXd::Identity(b.dim, b.dim);
    for (const auto& [ref, co] : c.expr.terms()) {
      SymCoeff sc = co;
      if (sign < 0) {
        for (auto& t : sc.tri) t.v = -t.v;
        for (auto& o : sc.outer) o.s = -o.s;
      }
      b.terms.emplace_back(p.vars.offset(ref.block) + ref.entry, std::move(sc));
    }
    out.blocks.push_back(std::move(b));
  }

  for (const auto& blk : p.vars.blocks()) {
    if (!blk.positive) continue;
    SdpConstraintBlock b;
    b.label = "psd_" + blk.name;
    b.dim = blk.rows;
    b.sense = Sense::StrictlyPositive;
    b.from_psd = true;
    b.delta = kDeltaFloor;
    b.original_constant = Eigen::MatrixXd::Zero(b.dim, b.dim);
    b.C = b.delta * Eigen::MatrixXd::Identity(b.dim, b.dim);
    const int off = p.vars.offset(blk.id);
    for (int e = 0; e < blk.scalar_count(); ++e) {
      auto [r, c] = p.vars.entry_rc(blk.id, e);
      SymCoeff sc;
      sc.tri.push_back({r, c, 1.0});
      b.terms.emplace_back(off + e, std::move(sc));
    }
    out.blocks.push_back(std::move(b));
  }
  return out;
}

AnalysisProblem denormalize(const SdpProblem& p) {
  AnalysisProblem out;
  out.vars = p.vars;

  // global scalar index -> (block, entry)
  std::vector<ScalarRef> refs(static_cast<std::size_t>(p.vars.total_scalars()));
  for (const auto& blk : p.vars.blocks()) {
    const int off = p.vars.offset(blk.id);
    for (int e = 0; e < blk.scalar_count(); ++e) refs[static_cast<std::size_t>(off + e)] = {blk.id, e};
  }

  for (const auto& b : p.blocks) {
    if (b.from_psd) continue;
    Constraint c;
    c.label = b.label;
    c.sense = b.sense;
    const double sign = b.sense == Sense::StrictlyNegative ? -1.0 : 1.0;
    c.expr = AffineMatrixExpr::from_constant(b.original_constant);
    for (const auto& [idx, co] : b.terms) {
      SymCoeff sc = co;
      if (sign < 0) {
        for (auto& t : sc.tri) t.v = -t.v;
        for (auto& o : sc.outer) o.s = -o.s;
      }
      SymCoeff& dst = c.expr.coeff(refs.at(static_cast<std::size_t>(idx)));
      dst.tri.insert(dst.tri.end(), sc.tri.begin(), sc.tri.end());
      dst.outer.insert(dst.outer.end(), sc.outer.begin(), sc.outer.end());
    }
    out.constraints.push_back(std::move(c));
  }
  return out;
}

std::vector<MarginEntry> normalized_margins(const SdpProblem& p, const Eigen::VectorXd& x,
                                            double tol_scale) {
  std::vector<MarginEntry> out;
  out.reserve(p.blocks.size());
  for (const auto& b : p.blocks) {
    Eigen::MatrixXd S = -b.C;
    for (const auto& [idx, co] : b.terms) co.accumulate(S, x(idx));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    MarginEntry e;
    e.label = b.label;
    e.margin = es.eigenvalues().minCoeff();
    e.tolerance = -tol_scale * (1.0 + b.C.norm());
    e.dim = b.dim;
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace lkfkit
