#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <iostream>

#include "lkfkit/sdp.hpp"

// Feasibility is solved as margin maximization: find x and the largest t with
//   S_b(x) = sum_k x_k A_{b,k} - t I - C_b  PSD   for every block b,
// |x_k| <= R and t <= cap. The source problem is strictly feasible iff the
// optimum t* is positive (its strict senses are already margin-shifted).
// The search is a primal-dual path-following method with NT scaling; the
// dual iterate (x, S) stays exactly feasible because S is affine in x.

namespace lkfkit {

namespace {

struct DenseBlock {
  int dim = 0;
  Eigen::MatrixXd C;
  std::vector<int> vars;  // global indices, margin excluded
  std::vector<std::vector<CoeffTriplet>> tris;
  Eigen::MatrixXd Pu, Pv;  // stacked outer factors
  Eigen::VectorXd ps;
  std::vector<int> pvar;  // global var per pair

  Eigen::MatrixXd X, S, W, Sinv, Wsq, Gu, Gv;
  std::vector<Eigen::MatrixXd> Y;  // T_k W per local tri var
  std::vector<int> tri_locals;     // locals with nonempty tris
};

// diagonal entries s_e = coef_e * x_{var_e} - c_e (box and margin cap)
struct DiagBlock {
  std::vector<int> var;
  Eigen::VectorXd coef, c;
  Eigen::VectorXd x, s, w2;  // w2: NT weight squared = x/s
  int dim() const { return static_cast<int>(var.size()); }
};

double sym_inner(const std::vector<CoeffTriplet>& tri, const Eigen::MatrixXd& B) {
  double acc = 0.0;
  for (const auto& t : tri) acc += (t.r == t.c ? 1.0 : 2.0) * t.v * B(t.r, t.c);
  return acc;
}

void sym_accumulate(const std::vector<CoeffTriplet>& tri, Eigen::MatrixXd& B, double s) {
  for (const auto& t : tri) {
    B(t.r, t.c) += s * t.v;
    if (t.r != t.c) B(t.c, t.r) += s * t.v;
  }
}

// largest a with M + a*D PSD, via eig of L^{-1} D L^{-T}
double max_step(const Eigen::MatrixXd& M, const Eigen::MatrixXd& D) {
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd G = L.triangularView<Eigen::Lower>().solve(D);
  G = L.triangularView<Eigen::Lower>().solve(G.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

class MarginSolver {
 public:
  MarginSolver(const SdpProblem& p, const SolverConfig& cfg) : cfg_(cfg) {
    m_ = p.num_vars;
    nvar_ = m_ + 1;
    // variable equilibration from the largest coefficient magnitude
    scale_ = Eigen::VectorXd::Ones(m_);
    Eigen::VectorXd gmax = Eigen::VectorXd::Zero(m_);
    for (const auto& b : p.blocks) {
      for (const auto& [idx, co] : b.terms) {
        double g = 0.0;
        for (const auto& t : co.tri) g = std::max(g, std::abs(t.v));
        for (const auto& o : co.outer)
          g = std::max(g, 2.0 * std::abs(o.s) * o.u.cwiseAbs().maxCoeff() *
                              o.v.cwiseAbs().maxCoeff());
        gmax(idx) = std::max(gmax(idx), g);
      }
    }
    for (int k = 0; k < m_; ++k) scale_(k) = 1.0 / std::max(1e-6, std::sqrt(gmax(k)));

    for (const auto& b : p.blocks) {
      DenseBlock d;
      d.dim = b.dim;
      d.C = b.C;
      int npairs = 0;
      for (const auto& [idx, co] : b.terms) npairs += static_cast<int>(co.outer.size());
      d.Pu.resize(d.dim, npairs);
      d.Pv.resize(d.dim, npairs);
      d.ps.resize(npairs);
      int a = 0;
      for (const auto& [idx, co] : b.terms) {
        const double sc = scale_(idx);
        d.vars.push_back(idx);
        std::vector<CoeffTriplet> tri = co.tri;
        for (auto& t : tri) t.v *= sc;
        d.tris.push_back(std::move(tri));
        for (const auto& o : co.outer) {
          d.ps(a) = o.s * sc;
          d.Pu.col(a) = o.u;
          d.Pv.col(a) = o.v;
          d.pvar.push_back(idx);
          ++a;
        }
      }
      for (int k = 0; k < static_cast<int>(d.vars.size()); ++k)
        if (!d.tris[static_cast<std::size_t>(k)].empty()) d.tri_locals.push_back(k);
      d.Y.resize(d.vars.size());
      dense_.push_back(std::move(d));
    }

    // box on every scaled variable plus the margin cap
    diag_.var.reserve(2 * static_cast<std::size_t>(m_) + 1);
    std::vector<double> coef, c;
    for (int k = 0; k < m_; ++k) {
      diag_.var.push_back(k);
      coef.push_back(-1.0);
      c.push_back(-cfg_.box_radius);
      diag_.var.push_back(k);
      coef.push_back(1.0);
      c.push_back(-cfg_.box_radius);
    }
    diag_.var.push_back(m_);
    coef.push_back(-1.0);
    c.push_back(-cfg_.margin_cap);
    diag_.coef = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<int>(coef.size()));
    diag_.c = Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<int>(c.size()));

    total_dim_ = diag_.dim();
    for (const auto& d : dense_) total_dim_ += d.dim;
  }

  // S blocks from the current x (exact)
  void refresh_S(const Eigen::VectorXd& x) {
    const double t = x(m_);
    for (auto& d : dense_) {
      d.S = -d.C - t * Eigen::MatrixXd::Identity(d.dim, d.dim);
      for (std::size_t k = 0; k < d.vars.size(); ++k)
        sym_accumulate(d.tris[k], d.S, x(d.vars[static_cast<int>(k)]));
      if (d.ps.size() > 0) {
        Eigen::VectorXd w(d.ps.size());
        for (int a = 0; a < d.ps.size(); ++a) w(a) = d.ps(a) * x(d.pvar[static_cast<std::size_t>(a)]);
        const Eigen::MatrixXd Us = d.Pu * w.asDiagonal();
        d.S.noalias() += Us * d.Pv.transpose();
        d.S.noalias() += d.Pv * Us.transpose();
      }
      d.S = 0.5 * (d.S + d.S.transpose());
    }
    for (int e = 0; e < diag_.dim(); ++e)
      diag_.s(e) = diag_.coef(e) * x(diag_.var[static_cast<std::size_t>(e)]) - diag_.c(e);
  }

  // dS blocks from a direction dx
  void direction_S(const Eigen::VectorXd& dx, std::vector<Eigen::MatrixXd>& dS,
                   Eigen::VectorXd& dsd) const {
    dS.resize(dense_.size());
    for (std::size_t bi = 0; bi < dense_.size(); ++bi) {
      const DenseBlock& d = dense_[bi];
      Eigen::MatrixXd DS = -dx(m_) * Eigen::MatrixXd::Identity(d.dim, d.dim);
      for (std::size_t k = 0; k < d.vars.size(); ++k)
        sym_accumulate(d.tris[k], DS, dx(d.vars[static_cast<int>(k)]));
      if (d.ps.size() > 0) {
        Eigen::VectorXd w(d.ps.size());
        for (int a = 0; a < d.ps.size(); ++a) w(a) = d.ps(a) * dx(d.pvar[static_cast<std::size_t>(a)]);
        const Eigen::MatrixXd Us = d.Pu * w.asDiagonal();
        DS.noalias() += Us * d.Pv.transpose();
        DS.noalias() += d.Pv * Us.transpose();
      }
      dS[bi] = 0.5 * (DS + DS.transpose());
    }
    dsd.resize(diag_.dim());
    for (int e = 0; e < diag_.dim(); ++e)
      dsd(e) = diag_.coef(e) * dx(diag_.var[static_cast<std::size_t>(e)]);
  }

  FeasibilityResult run(const SdpProblem& p) {
    const auto t_start = std::chrono::steady_clock::now();
    FeasibilityResult res;
    res.gap_tol = cfg_.duality_gap_tol;
    res.recheck_tol = cfg_.margin_recheck_tol;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(nvar_);
    diag_.s.resize(diag_.dim());
    diag_.x = Eigen::VectorXd::Ones(diag_.dim());
    diag_.w2.resize(diag_.dim());
    // strictly feasible dual start: push the margin below every block
    double t0 = 0.5 * cfg_.margin_cap;
    for (auto& d : dense_) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-d.C, Eigen::EigenvaluesOnly);
      t0 = std::min(t0, es.eigenvalues().minCoeff() - 1.0);
    }
    x(m_) = t0;
    refresh_S(x);
    for (auto& d : dense_) d.X = Eigen::MatrixXd::Identity(d.dim, d.dim);

    Eigen::MatrixXd M(nvar_, nvar_);
    Eigen::VectorXd rhs(nvar_), dx_pred(nvar_), dx(nvar_);
    std::vector<Eigen::MatrixXd> dS, dXmat;
    Eigen::VectorXd dsd, dxd;
    std::string exit_message = "iteration limit";
    SolveStatus status = SolveStatus::Inconclusive;

    int it = 0;
    for (; it < cfg_.max_iterations; ++it) {
      // factorizations and NT scaling points
      bool ok = true;
      for (auto& d : dense_) {
        Eigen::LLT<Eigen::MatrixXd> llt(d.S);
        if (llt.info() != Eigen::Success) {
          ok = false;
          break;
        }
        const Eigen::MatrixXd L = llt.matrixL();
        d.Sinv = llt.solve(Eigen::MatrixXd::Identity(d.dim, d.dim));
        Eigen::MatrixXd M1 = L.transpose() * d.X * L;
        M1 = 0.5 * (M1 + M1.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M1);
        Eigen::VectorXd lam = es.eigenvalues().cwiseMax(1e-300);
        const Eigen::MatrixXd sq =
            es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
        Eigen::MatrixXd T1 = L.transpose().triangularView<Eigen::Upper>().solve(sq);
        d.W = L.transpose().triangularView<Eigen::Upper>().solve(T1.transpose()).transpose();
        d.W = 0.5 * (d.W + d.W.transpose());
        d.Wsq = d.W * d.W;
        if (d.Pu.cols() > 0) {
          d.Gu = d.W * d.Pu;
          d.Gv = d.W * d.Pv;
        }
        for (int k : d.tri_locals) {
          Eigen::MatrixXd& Yk = d.Y[static_cast<std::size_t>(k)];
          Yk = Eigen::MatrixXd::Zero(d.dim, d.dim);
          for (const auto& t : d.tris[static_cast<std::size_t>(k)]) {
            Yk.row(t.r) += t.v * d.W.row(t.c);
            if (t.r != t.c) Yk.row(t.c) += t.v * d.W.row(t.r);
          }
        }
      }
      if (!ok) {
        exit_message = "lost positive definiteness of the dual slack";
        break;
      }
      for (int e = 0; e < diag_.dim(); ++e) diag_.w2(e) = diag_.x(e) / diag_.s(e);

      double mu = diag_.x.dot(diag_.s);
      for (const auto& d : dense_) mu += (d.X.array() * d.S.array()).sum();
      mu /= total_dim_;

      assemble_schur(M);
      Eigen::LDLT<Eigen::MatrixXd> mldlt(M);
      if (mldlt.info() != Eigen::Success) {
        M.diagonal().array() += 1e-11 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
        mldlt.compute(M);
        if (mldlt.info() != Eigen::Success) {
          exit_message = "Schur factorization failed";
          break;
        }
      }

      // predictor
      build_rhs(rhs, 0.0);
      dx_pred = mldlt.solve(rhs);
      double ap = 1.0, ad = 1.0;
      step_lengths(dx_pred, 0.0, mu, dS, dsd, dXmat, dxd, ap, ad);
      double mu_aff = mu_after(ap, ad, dS, dsd, dXmat, dxd);
      double sigma = std::pow(std::max(0.0, mu_aff / mu), 3.0);
      sigma = std::min(std::max(sigma, 1e-6), 0.9999);

      // corrector
      build_rhs(rhs, sigma * mu);
      dx = mldlt.solve(rhs);
      step_lengths(dx, sigma * mu, mu, dS, dsd, dXmat, dxd, ap, ad);
      ap = std::min(1.0, cfg_.step_fraction * ap);
      ad = std::min(1.0, cfg_.step_fraction * ad);

      x += ad * dx;
      for (std::size_t bi = 0; bi < dense_.size(); ++bi) {
        dense_[bi].X += ap * dXmat[bi];
        dense_[bi].X = 0.5 * (dense_[bi].X + dense_[bi].X.transpose());
      }
      diag_.x += ap * dxd;
      refresh_S(x);

      const double t = x(m_);
      const double pobj = primal_objective();
      const double pres = primal_residual();
      if (cfg_.verbose)
        std::cerr << "it " << it << " mu " << mu << " t " << t << " pobj " << pobj << " pres "
                  << pres << " sigma " << sigma << "\n";
      res.diagnostics.mu = mu;
      res.diagnostics.primal_residual = pres;
      res.diagnostics.margin_lower = t;
      res.diagnostics.margin_upper = pobj;

      if (t >= cfg_.margin_stop) {
        status = SolveStatus::Feasible;
        exit_message = "reached target margin";
        break;
      }
      const double relgap = std::abs(pobj - t) / (1.0 + std::abs(pobj) + std::abs(t));
      if (relgap < cfg_.duality_gap_tol && pres < 1e-8) {
        if (t > 0.0) {
          status = SolveStatus::Feasible;
          exit_message = "converged with positive margin";
        } else if (pobj < -1e-11) {
          status = SolveStatus::Infeasible;
          exit_message = "converged with negative margin bound";
        } else {
          exit_message = "converged on the feasibility boundary";
        }
        break;
      }
      if (!x.allFinite()) {
        exit_message = "diverged";
        break;
      }
    }
    if (status == SolveStatus::Inconclusive && x(m_) > 0.0 && x.allFinite()) {
      status = SolveStatus::Feasible;  // the iterate itself certifies feasibility
      exit_message += " (positive-margin iterate)";
    }

    res.diagnostics.iterations = it + 1;
    res.diagnostics.message = exit_message;
    res.status = status;

    Eigen::VectorXd y(m_);
    for (int k = 0; k < m_; ++k) y(k) = scale_(k) * x(k);
    if (status == SolveStatus::Feasible) {
      res.margins = normalized_margins(p, y, cfg_.margin_recheck_tol);
      if (!margins_pass(res.margins)) {
        res.status = SolveStatus::Inconclusive;
        res.diagnostics.message += "; margin re-check failed";
      }
    }
    if (p.vars.count() > 0 && y.size() == p.vars.total_scalars())
      res.assignment = Assignment::from_vector(p.vars, y);
    res.diagnostics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
  }

 private:
  void assemble_schur(Eigen::MatrixXd& M) const {
    M.setZero();
    for (const auto& d : dense_) {
      const int np = static_cast<int>(d.ps.size());
      if (np > 0) {
        const Eigen::MatrixXd UU = d.Pu.transpose() * d.Gu;
        const Eigen::MatrixXd UV = d.Pu.transpose() * d.Gv;
        const Eigen::MatrixXd VV = d.Pv.transpose() * d.Gv;
        for (int a = 0; a < np; ++a) {
          const int ga = d.pvar[static_cast<std::size_t>(a)];
          for (int b = 0; b < np; ++b) {
            const double v = 2.0 * d.ps(a) * d.ps(b) * (UU(a, b) * VV(a, b) + UV(a, b) * UV(b, a));
            M(ga, d.pvar[static_cast<std::size_t>(b)]) += v;
          }
          // margin column: -<pair_a, W W>
          const double mv = -2.0 * d.ps(a) * d.Gu.col(a).dot(d.Gv.col(a));
          M(ga, m_) += mv;
          M(m_, ga) += mv;
        }
        // pair x triplet crosses
        for (int k : d.tri_locals) {
          const int gk = d.vars[static_cast<std::size_t>(k)];
          const auto& tk = d.tris[static_cast<std::size_t>(k)];
          for (int a = 0; a < np; ++a) {
            double acc = 0.0;
            for (const auto& t : tk) {
              const double bval =
                  d.ps(a) * (d.Gu(t.r, a) * d.Gv(t.c, a) + d.Gv(t.r, a) * d.Gu(t.c, a));
              acc += (t.r == t.c ? 1.0 : 2.0) * t.v * bval;
            }
            const int ga = d.pvar[static_cast<std::size_t>(a)];
            M(gk, ga) += acc;
            M(ga, gk) += acc;
          }
        }
      }
      // triplet x triplet
      for (std::size_t ii = 0; ii < d.tri_locals.size(); ++ii) {
        const int k = d.tri_locals[ii];
        const int gk = d.vars[static_cast<std::size_t>(k)];
        for (std::size_t jj = ii; jj < d.tri_locals.size(); ++jj) {
          const int j = d.tri_locals[jj];
          const int gj = d.vars[static_cast<std::size_t>(j)];
          const Eigen::MatrixXd& Yj = d.Y[static_cast<std::size_t>(j)];
          double acc = 0.0;
          for (const auto& t : d.tris[static_cast<std::size_t>(k)]) {
            const double bval = d.W.row(t.r).dot(Yj.col(t.c));
            acc += (t.r == t.c ? 1.0 : 2.0) * t.v * bval;
          }
          M(gk, gj) += acc;
          if (gk != gj) M(gj, gk) += acc;
        }
        // margin column for triplet vars
        const double mv = -sym_inner(d.tris[static_cast<std::size_t>(k)], d.Wsq);
        M(gk, m_) += mv;
        M(m_, gk) += mv;
      }
      // margin diagonal
      M(m_, m_) += d.Wsq.trace();
    }
    for (int e = 0; e < diag_.dim(); ++e) {
      const int v = diag_.var[static_cast<std::size_t>(e)];
      M(v, v) += diag_.w2(e) * diag_.coef(e) * diag_.coef(e);
    }
  }

  void build_rhs(Eigen::VectorXd& rhs, double smu) const {
    rhs.setZero();
    rhs(m_) = 1.0;  // objective: maximize the joint margin
    if (smu == 0.0) return;
    for (const auto& d : dense_) {
      for (std::size_t k = 0; k < d.vars.size(); ++k)
        rhs(d.vars[static_cast<int>(k)]) += smu * sym_inner(d.tris[k], d.Sinv);
      for (int a = 0; a < d.ps.size(); ++a)
        rhs(d.pvar[static_cast<std::size_t>(a)]) +=
            smu * 2.0 * d.ps(a) * d.Pu.col(a).dot(d.Sinv * d.Pv.col(a));
      rhs(m_) += -smu * d.Sinv.trace();
    }
    for (int e = 0; e < diag_.dim(); ++e)
      rhs(diag_.var[static_cast<std::size_t>(e)]) += smu * diag_.coef(e) / diag_.s(e);
  }

  void step_lengths(const Eigen::VectorXd& dx, double smu, double mu,
                    std::vector<Eigen::MatrixXd>& dS, Eigen::VectorXd& dsd,
                    std::vector<Eigen::MatrixXd>& dX, Eigen::VectorXd& dxd, double& ap,
                    double& ad) const {
    direction_S(dx, dS, dsd);
    dX.resize(dense_.size());
    dxd.resize(diag_.dim());
    ap = ad = 1.0;
    for (std::size_t bi = 0; bi < dense_.size(); ++bi) {
      const DenseBlock& d = dense_[bi];
      dX[bi] = smu * d.Sinv - d.X - d.W * dS[bi] * d.W;
      dX[bi] = 0.5 * (dX[bi] + dX[bi].transpose());
      ap = std::min(ap, max_step(d.X, dX[bi]));
      ad = std::min(ad, max_step(d.S, dS[bi]));
    }
    for (int e = 0; e < diag_.dim(); ++e) {
      dxd(e) = (smu > 0.0 ? smu / diag_.s(e) : 0.0) - diag_.x(e) - diag_.w2(e) * dsd(e);
      if (dxd(e) < 0.0) ap = std::min(ap, -diag_.x(e) / dxd(e));
      if (dsd(e) < 0.0) ad = std::min(ad, -diag_.s(e) / dsd(e));
    }
    (void)mu;
  }

  double mu_after(double ap, double ad, const std::vector<Eigen::MatrixXd>& dS,
                  const Eigen::VectorXd& dsd, const std::vector<Eigen::MatrixXd>& dX,
                  const Eigen::VectorXd& dxd) const {
    ap = std::min(1.0, 0.99 * ap);
    ad = std::min(1.0, 0.99 * ad);
    double mu = (diag_.x + ap * dxd).dot(diag_.s + ad * dsd);
    for (std::size_t bi = 0; bi < dense_.size(); ++bi)
      mu += ((dense_[bi].X + ap * dX[bi]).array() * (dense_[bi].S + ad * dS[bi]).array()).sum();
    return mu / total_dim_;
  }

  double primal_objective() const {
    double v = -diag_.c.dot(diag_.x);
    for (const auto& d : dense_) v -= (d.C.array() * d.X.array()).sum();
    return v;
  }

  double primal_residual() const {
    // infinity norm of <A_k, X> + b_k over all variables and the margin row
    Eigen::VectorXd r = Eigen::VectorXd::Zero(nvar_);
    r(m_) = 1.0;
    for (const auto& d : dense_) {
      for (std::size_t k = 0; k < d.vars.size(); ++k)
        r(d.vars[static_cast<int>(k)]) += sym_inner(d.tris[k], d.X);
      for (int a = 0; a < d.ps.size(); ++a)
        r(d.pvar[static_cast<std::size_t>(a)]) +=
            2.0 * d.ps(a) * d.Pu.col(a).dot(d.X * d.Pv.col(a));
      r(m_) -= d.X.trace();
    }
    for (int e = 0; e < diag_.dim(); ++e)
      r(diag_.var[static_cast<std::size_t>(e)]) += diag_.coef(e) * diag_.x(e);
    return r.cwiseAbs().maxCoeff();
  }

  SolverConfig cfg_;
  int m_ = 0, nvar_ = 0, total_dim_ = 0;
  Eigen::VectorXd scale_;
  std::vector<DenseBlock> dense_;
  DiagBlock diag_;
};

}  // namespace

FeasibilityResult solve(const SdpProblem& p, const SolverConfig& cfg) {
  MarginSolver solver(p, cfg);
  return solver.run(p);
}

FeasibilityResult solve_analysis(const AnalysisProblem& p, const SolverConfig& cfg) {
  const SdpProblem sdp = normalize(p);
  FeasibilityResult res = solve(sdp, cfg);
  if (res.status == SolveStatus::Feasible) {
    res.margins = evaluate_margins(p, res.assignment, cfg.margin_recheck_tol);
    if (!margins_pass(res.margins)) {
      res.status = SolveStatus::Inconclusive;
      res.diagnostics.message += "; source-expression margin re-check failed";
    }
  }
  return res;
}

}  // namespace lkfkit
