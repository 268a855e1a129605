#include "lkfkit/simverify.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "lkfkit/selectors.hpp"

namespace lkfkit {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

int DelaySignal::value_at(int k) const {
  switch (kind) {
    case Kind::Constant:
      return constant_value;
    case Kind::UniformRandom: {
      const std::uint64_t h = splitmix64(seed + static_cast<std::uint64_t>(k) * 0x9e3779b97f4a7c15ULL);
      return d_m + static_cast<int>(h % static_cast<std::uint64_t>(d_M - d_m + 1));
    }
    case Kind::ExtremalToggle:
      return ((k / std::max(1, period)) % 2 == 0) ? d_m : d_M;
    case Kind::Explicit: {
      if (sequence.empty()) throw std::invalid_argument("explicit delay signal has no samples");
      const int v = sequence[static_cast<std::size_t>(k) % sequence.size()];
      if (v < d_m || v > d_M) throw std::out_of_range("explicit delay value outside bounds");
      return v;
    }
  }
  return d_m;
}

DelaySignal DelaySignal::constant(int d, int d_m, int d_M) {
  if (d < d_m || d > d_M) throw std::out_of_range("constant delay outside bounds");
  DelaySignal s;
  s.kind = Kind::Constant;
  s.constant_value = d;
  s.d_m = d_m;
  s.d_M = d_M;
  return s;
}

DelaySignal DelaySignal::uniform_random(std::uint64_t seed, int d_m, int d_M) {
  DelaySignal s;
  s.kind = Kind::UniformRandom;
  s.seed = seed;
  s.d_m = d_m;
  s.d_M = d_M;
  return s;
}

DelaySignal DelaySignal::extremal_toggle(int period, int d_m, int d_M) {
  DelaySignal s;
  s.kind = Kind::ExtremalToggle;
  s.period = period;
  s.d_m = d_m;
  s.d_M = d_M;
  return s;
}

DelaySignal DelaySignal::explicit_sequence(std::vector<int> seq, int d_m, int d_M) {
  DelaySignal s;
  s.kind = Kind::Explicit;
  s.sequence = std::move(seq);
  s.d_m = d_m;
  s.d_M = d_M;
  return s;
}

HistoryVector Trajectory::history_at(int k, int d_M) const {
  HistoryVector h;
  h.samples.resize(static_cast<std::size_t>(d_M) + 1);
  for (int i = 0; i <= d_M; ++i) {
    const int j = k - i;
    h.samples[static_cast<std::size_t>(i)] =
        j >= 0 ? states[static_cast<std::size_t>(j)] : initial_history.at_delay(-j);
  }
  return h;
}

Trajectory simulate(const DelaySystem& sys, const HistoryVector& phi, const DelaySignal& d,
                    int horizon) {
  sys.validate();
  if (phi.depth() != sys.d_M || phi.dim() != sys.dim())
    throw std::invalid_argument("simulate: initial history must cover [-d_M, 0]");
  if (horizon < 1) throw std::invalid_argument("simulate: horizon must be >= 1");

  Trajectory tr;
  tr.initial_history = phi;
  tr.states.reserve(static_cast<std::size_t>(horizon) + 1);
  tr.states.push_back(phi.at_delay(0));
  auto state_at = [&](int j) -> const Eigen::VectorXd& {
    return j >= 0 ? tr.states[static_cast<std::size_t>(j)] : phi.at_delay(-j);
  };
  for (int k = 0; k < horizon; ++k) {
    const int dk = d.value_at(k);
    tr.delays.push_back(dk);
    tr.modes.push_back(sigma(dk, sys));
    Eigen::VectorXd next = sys.A * state_at(k) + sys.A_n * state_at(k - sys.d_n) +
                           sys.A_d * state_at(k - dk);
    tr.states.push_back(std::move(next));
  }
  return tr;
}

ObserverLoopResult simulate_observer_loop(const PlantModel& plant, const ControllerGains& gains,
                                          const DelaySignal& d, int d_n,
                                          const HistoryVector& phi_plant,
                                          const HistoryVector& phi_observer, int horizon) {
  plant.validate();
  ObserverLoopResult out;
  out.plant_states.push_back(phi_plant.at_delay(0));
  out.observer_states.push_back(phi_observer.at_delay(0));
  auto xp = [&](int j) -> const Eigen::VectorXd& {
    return j >= 0 ? out.plant_states[static_cast<std::size_t>(j)] : phi_plant.at_delay(-j);
  };
  auto xh = [&](int j) -> const Eigen::VectorXd& {
    return j >= 0 ? out.observer_states[static_cast<std::size_t>(j)] : phi_observer.at_delay(-j);
  };
  for (int k = 0; k < horizon; ++k) {
    const int dk = d.value_at(k);
    const Eigen::VectorXd ey = xp(k - dk) - xh(k - d_n);
    const Eigen::VectorXd u = gains.K * xh(k) + gains.F * ey;
    out.plant_states.push_back(plant.A_p * xp(k) + plant.B_p * u);
    out.observer_states.push_back(plant.A_p * xh(k) + plant.B_p * u + gains.L * ey);
  }
  for (std::size_t k = 0; k < out.plant_states.size(); ++k)
    out.errors.push_back(out.plant_states[k] - out.observer_states[k]);
  return out;
}

namespace {

Eigen::MatrixXd pick(const VariableRegistry& vars, const Assignment& a, const std::string& name,
                     int dim) {
  const int id = vars.find(name);
  if (id >= 0 && a.has(id)) return a.get(id);
  return Eigen::MatrixXd::Zero(dim, dim);
}

}  // namespace

LkfCertificate LkfCertificate::from_assignment(const VariableRegistry& vars, const Assignment& a,
                                               int n) {
  LkfCertificate c;
  c.P1 = pick(vars, a, "P_1", 4 * n);
  c.P2 = pick(vars, a, "P_2", 3 * n);
  c.Q1_1 = pick(vars, a, "Q_1_1", n);
  c.Q2_1 = pick(vars, a, "Q_2_1", n);
  c.Z1_1 = pick(vars, a, "Z_1_1", n);
  c.Z2_1 = pick(vars, a, "Z_2_1", n);
  c.Q1_2 = pick(vars, a, "Q_1_2", n);
  c.Q2_2 = pick(vars, a, "Q_2_2", n);
  c.Z1_2 = pick(vars, a, "Z_1_2", n);
  c.Z2_2 = pick(vars, a, "Z_2_2", n);
  c.Q3 = pick(vars, a, "Q_3", n);
  c.Z3 = pick(vars, a, "Z_3", n);
  c.X1 = pick(vars, a, "X_1", 2 * n);
  c.X2 = pick(vars, a, "X_2", 2 * n);
  return c;
}

namespace {

struct ModeBlocks {
  Eigen::MatrixXd P, Q1, Q2, Z1, Z2, Q3, Z3;
};

ModeBlocks mode_blocks(const LkfCertificate& c, int mode) {
  if (mode == 1) return {c.P1, c.Q1_1, c.Q2_1, c.Z1_1, c.Z2_1, c.Q3, c.Z3};
  return {c.P2, c.Q1_2, c.Q2_2, c.Z1_2, c.Z2_2, Eigen::MatrixXd(), Eigen::MatrixXd()};
}

// quadratic route: same builders the condition assembly uses
Eigen::MatrixXd history_form_matrix(const LkfCertificate& cert, const DelaySystem& sys,
                                    int mode) {
  const int n = sys.dim();
  const ModeSelectorSet sel = build_mode_selectors(n, sys.d_m, sys.d_n, sys.d_M, mode);
  VariableRegistry reg;
  ModeLkfBlocks bl;
  const ModeBlocks mb = mode_blocks(cert, mode);
  Assignment a;
  bl.P = reg.add_symmetric("P", sel.w_dim, false);
  a.set(bl.P, mb.P);
  bl.Q1 = reg.add_symmetric("Q1", n, false);
  a.set(bl.Q1, mb.Q1);
  bl.Q2 = reg.add_symmetric("Q2", n, false);
  a.set(bl.Q2, mb.Q2);
  bl.Z1 = reg.add_symmetric("Z1", n, false);
  a.set(bl.Z1, mb.Z1);
  bl.Z2 = reg.add_symmetric("Z2", n, false);
  a.set(bl.Z2, mb.Z2);
  if (mode == 1 && sel.d_tail >= 1) {
    bl.Q3 = reg.add_symmetric("Q3", n, false);
    a.set(bl.Q3, mb.Q3.size() ? mb.Q3 : Eigen::MatrixXd::Zero(n, n));
    bl.Z3 = reg.add_symmetric("Z3", n, false);
    a.set(bl.Z3, mb.Z3.size() ? mb.Z3 : Eigen::MatrixXd::Zero(n, n));
  }
  AffineMatrixExpr S = history_quadratic_tail(reg, sel, bl);
  S.add_quad_form(reg, bl.P, sel.hist_to_accum, 1.0);
  return S.eval(reg, a);
}

double direct_lkf_value(const LkfCertificate& cert, const DelaySystem& sys, int mode,
                        const HistoryVector& hist) {
  const int n = sys.dim();
  const int lo = mode == 1 ? sys.d_m : sys.d_n;
  const int hi = mode == 1 ? sys.d_n : sys.d_M;
  const int span = hi - lo;
  const int tail = sys.d_M - hi;
  const ModeBlocks mb = mode_blocks(cert, mode);

  // accumulation-vector term
  const int wdim = (mode == 1 ? 4 : 3) * n;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(wdim);
  w.segment(0, n) = hist.at_delay(0);
  for (int i = 1; i <= lo; ++i) w.segment(n, n) += hist.at_delay(i);
  for (int i = lo + 1; i <= hi; ++i) w.segment(2 * n, n) += hist.at_delay(i);
  if (mode == 1)
    for (int i = hi + 1; i <= sys.d_M; ++i) w.segment(3 * n, n) += hist.at_delay(i);
  double v = w.dot(mb.P * w);

  // running sums
  for (int i = 1; i <= lo; ++i) v += hist.at_delay(i).dot(mb.Q1 * hist.at_delay(i));
  for (int i = lo + 1; i <= hi; ++i) v += hist.at_delay(i).dot(mb.Q2 * hist.at_delay(i));
  if (mode == 1 && tail >= 1)
    for (int i = hi + 1; i <= sys.d_M; ++i) v += hist.at_delay(i).dot(mb.Q3 * hist.at_delay(i));

  // weighted double sums of state differences; eta(k-i) = x(k-i) - x(k-i-1)
  auto eta = [&](int i) { return (hist.at_delay(i) - hist.at_delay(i + 1)).eval(); };
  auto double_sum = [&](int from, int to, const Eigen::MatrixXd& Z, double weight) {
    // weight * sum_{l=-to+1}^{-from} sum_{i=k+l}^{k} eta(i)' Z eta(i)
    double acc = 0.0;
    for (int l = -to + 1; l <= -from; ++l)
      for (int i = l; i <= 0; ++i) {
        const Eigen::VectorXd e = eta(-i);
        acc += e.dot(Z * e);
      }
    return weight * acc;
  };
  v += double_sum(0, lo, mb.Z1, static_cast<double>(lo));
  if (span >= 1) v += double_sum(lo, hi, mb.Z2, static_cast<double>(span));
  if (mode == 1 && tail >= 1) v += double_sum(hi, sys.d_M, mb.Z3, static_cast<double>(tail));
  return v;
}

}  // namespace

LkfValue eval_lkf(const LkfCertificate& cert, const DelaySystem& sys, int mode,
                  const HistoryVector& hist) {
  if (hist.depth() != sys.d_M) throw std::invalid_argument("eval_lkf: history must cover d_M+1 samples");
  LkfValue out;
  out.direct = direct_lkf_value(cert, sys, mode, hist);
  const Eigen::VectorXd xbar = hist.stacked();
  out.quadratic = xbar.dot(history_form_matrix(cert, sys, mode) * xbar);
  return out;
}

DecreaseReport check_path_complete_decrease(const LkfCertificate& cert, const DelaySystem& sys,
                                            const std::vector<Trajectory>& trajectories) {
  DecreaseReport rep;
  const Eigen::MatrixXd S1 = history_form_matrix(cert, sys, 1);
  const Eigen::MatrixXd S2 = history_form_matrix(cert, sys, 2);
  constexpr double kRelSlack = 1e-9;
  constexpr double kNormFloor = 1e-12;

  for (std::size_t ti = 0; ti < trajectories.size(); ++ti) {
    const Trajectory& tr = trajectories[ti];
    const int steps = static_cast<int>(tr.delays.size());
    Eigen::VectorXd xbar = tr.history_at(0, sys.d_M).stacked();
    for (int k = 0; k < steps; ++k) {
      if (xbar.norm() < kNormFloor) break;
      const double v1 = xbar.dot(S1 * xbar);
      const double v2 = xbar.dot(S2 * xbar);
      const Eigen::VectorXd xbar_next = tr.history_at(k + 1, sys.d_M).stacked();
      const int j = tr.modes[static_cast<std::size_t>(k)];
      const Eigen::MatrixXd& Sj = j == 1 ? S1 : S2;
      const double vj_next = xbar_next.dot(Sj * xbar_next);

      for (int i = 1; i <= 2; ++i) {
        const double vi = i == 1 ? v1 : v2;
        ++rep.edges_checked;
        if (!(vj_next < vi + kRelSlack * std::abs(vi))) {
          rep.violations.push_back({static_cast<int>(ti), k, i, j, vj_next - vi,
                                    i == j ? "self edge" : "cross edge"});
        }
      }
      const double mk = std::min(v1, v2);
      const double v_other_next = xbar_next.dot((j == 1 ? S2 : S1) * xbar_next);
      const double mk_next = std::min(vj_next, v_other_next);
      if (!(mk_next < mk + kRelSlack * std::abs(mk)))
        rep.violations.push_back({static_cast<int>(ti), k, 0, j, mk_next - mk, "min decrease"});
      ++rep.steps_checked;
      xbar = xbar_next;
    }
  }
  return rep;
}

Eigen::MatrixXd delay_companion(const DelaySystem& sys, int d) {
  const int n = sys.dim();
  const int N = n * (sys.d_M + 1);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
  M.block(0, 0, n, n) = sys.A;
  M.block(0, n * sys.d_n, n, n) += sys.A_n;
  M.block(0, n * d, n, n) += sys.A_d;
  for (int i = 1; i <= sys.d_M; ++i) M.block(n * i, n * (i - 1), n, n).setIdentity();
  return M;
}

namespace {

double inf_norm(const Eigen::MatrixXd& M) { return M.cwiseAbs().rowwise().sum().maxCoeff(); }

double spectral_radius(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

struct SearchState {
  const std::vector<Eigen::MatrixXd>* mats;
  double cmax = 1.0;
  int depth_limit = 0;
  long node_cap = 0;
  long nodes = 0;
  bool capped = false;
  std::vector<int> word;
  std::vector<int> witness;
  double growth = 0.0;

  bool dfs(const Eigen::MatrixXd& prod, int depth) {
    ++nodes;
    if (nodes > node_cap) {
      capped = true;
      return false;
    }
    const double norm = inf_norm(prod);
    constexpr double kTol = 1e-9;
    if (norm >= 1.0 + kTol) {
      const double rho = spectral_radius(prod);
      if (rho > 1.0 + kTol) {
        witness = word;
        growth = rho;
        return true;
      }
    }
    if (depth >= depth_limit) return false;
    // no continuation can push the spectral radius above one
    if (norm * std::pow(cmax, depth_limit - depth) < 1.0 + kTol) return false;
    for (std::size_t v = 0; v < mats->size(); ++v) {
      word.push_back(static_cast<int>(v));
      const Eigen::MatrixXd next = (*mats)[v] * prod;
      if (dfs(next, depth + 1)) return true;
      word.pop_back();
    }
    return false;
  }
};

}  // namespace

CrossCheckVerdict brute_force_cross_check(const DelaySystem& sys, int depth, long node_cap) {
  sys.validate();
  const int N = sys.dim() * (sys.d_M + 1);
  if (N > 64) throw std::invalid_argument("brute_force_cross_check: augmented dimension above 64");

  std::vector<Eigen::MatrixXd> mats;
  for (int d = sys.d_m; d <= sys.d_M; ++d) mats.push_back(delay_companion(sys, d));

  CrossCheckVerdict out;
  SearchState st;
  st.mats = &mats;
  st.depth_limit = depth;
  st.node_cap = node_cap;
  for (const auto& M : mats) st.cmax = std::max(st.cmax, inf_norm(M));

  bool found = false;
  for (std::size_t v = 0; v < mats.size() && !found; ++v) {
    st.word.assign(1, static_cast<int>(v));
    found = st.dfs(mats[v], 1);
  }
  if (found) {
    out.instability_found = true;
    for (int w : st.witness) out.witness.push_back(sys.d_m + w);
    out.witness_growth = st.growth;
  }
  out.nodes_explored = st.nodes;
  out.capped = st.capped;
  if (out.instability_found) return out;

  // extremal delay sequences as a second, trajectory-level probe
  HistoryVector phi = HistoryVector::zero(sys.dim(), sys.d_M);
  for (auto& s : phi.samples) s.setOnes();
  const double init_norm = phi.stacked().norm();
  for (int period : {1, 2, sys.d_M}) {
    const Trajectory tr = simulate(sys, phi, DelaySignal::extremal_toggle(period, sys.d_m, sys.d_M),
                                   200);
    double worst = 0.0;
    for (const auto& x : tr.states) worst = std::max(worst, x.norm());
    if (worst > 1e12 * init_norm) {
      out.instability_found = true;
      out.witness_growth = worst / init_norm;
      for (int k = 0; k < std::min<int>(depth, static_cast<int>(tr.delays.size())); ++k)
        out.witness.push_back(tr.delays[static_cast<std::size_t>(k)]);
      break;
    }
  }
  return out;
}

}  // namespace lkfkit
