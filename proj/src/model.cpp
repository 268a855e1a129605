#include "lkfkit/model.hpp"

#include <stdexcept>
#include <string>

namespace lkfkit {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void require_square_same(const Eigen::MatrixXd& M, int n, const char* name) {
  require(M.rows() == n && M.cols() == n, std::string(name) + " must be " +
                                              std::to_string(n) + "x" + std::to_string(n));
}

}  // namespace

void DelaySystem::validate() const {
  const int n = dim();
  require(n >= 1, "state dimension must be >= 1");
  require(A.cols() == n, "A must be square");
  require_square_same(A_n, n, "A_n");
  require_square_same(A_d, n, "A_d");
  require(1 <= d_m && d_m <= d_n && d_n <= d_M, "need 1 <= d_m <= d_n <= d_M");
}

void BoundedDelaySubsystem::validate() const {
  const int n = dim();
  require(n >= 1, "state dimension must be >= 1");
  require(A.cols() == n, "A must be square");
  require_square_same(A_m, n, "A_m");
  require_square_same(A_M, n, "A_M");
  require_square_same(A_d, n, "A_d");
  require(1 <= d_lo && d_lo <= d_hi, "need 1 <= d_lo <= d_hi");
}

void PlantModel::validate() const {
  require(A_p.rows() >= 1 && A_p.rows() == A_p.cols(), "A_p must be square, n_p >= 1");
  require(B_p.rows() == A_p.rows() && B_p.cols() >= 1, "B_p must be n_p x m with m >= 1");
}

Eigen::VectorXd HistoryVector::stacked() const {
  const int n = dim();
  Eigen::VectorXd out(static_cast<int>(samples.size()) * n);
  for (std::size_t i = 0; i < samples.size(); ++i) out.segment(static_cast<int>(i) * n, n) = samples[i];
  return out;
}

Eigen::VectorXd HistoryVector::window_average(int lo, int hi) const {
  if (lo > hi) throw std::invalid_argument("window_average: empty window");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim());
  for (int i = lo; i <= hi; ++i) acc += at_delay(i);
  return acc / static_cast<double>(hi - lo + 1);
}

HistoryVector HistoryVector::zero(int n, int d_M) {
  HistoryVector h;
  h.samples.assign(static_cast<std::size_t>(d_M) + 1, Eigen::VectorXd::Zero(n));
  return h;
}

int sigma(int d_k, const DelaySystem& sys) {
  if (d_k < sys.d_m || d_k > sys.d_M)
    throw std::out_of_range("sigma: delay value outside [d_m, d_M]");
  return d_k <= sys.d_n ? 1 : 2;
}

std::pair<BoundedDelaySubsystem, BoundedDelaySubsystem> split_switched(const DelaySystem& sys) {
  sys.validate();
  const int n = sys.dim();
  BoundedDelaySubsystem low;
  low.A = sys.A;
  low.A_m = Eigen::MatrixXd::Zero(n, n);
  low.A_M = sys.A_n;
  low.A_d = sys.A_d;
  low.d_lo = sys.d_m;
  low.d_hi = sys.d_n;

  BoundedDelaySubsystem high;
  high.A = sys.A;
  high.A_m = sys.A_n;
  high.A_M = Eigen::MatrixXd::Zero(n, n);
  high.A_d = sys.A_d;
  high.d_lo = sys.d_n;
  high.d_hi = sys.d_M;
  return {low, high};
}

DelaySystem build_closed_loop(const PlantModel& plant, const ControllerGains& gains,
                              int d_m, int d_n, int d_M) {
  plant.validate();
  const int np = plant.state_dim();
  const int m = plant.input_dim();
  if (gains.K.rows() != m || gains.K.cols() != np) throw std::invalid_argument("K must be m x n_p");
  if (gains.F.rows() != m || gains.F.cols() != np) throw std::invalid_argument("F must be m x n_p");
  if (gains.L.rows() != np || gains.L.cols() != np) throw std::invalid_argument("L must be n_p x n_p");

  const int n = 2 * np;
  DelaySystem cl;
  cl.A = Eigen::MatrixXd::Zero(n, n);
  cl.A.topLeftCorner(np, np) = plant.A_p + plant.B_p * gains.K;
  cl.A.topRightCorner(np, np) = -plant.B_p * gains.K;
  cl.A.bottomRightCorner(np, np) = plant.A_p;

  cl.A_d = Eigen::MatrixXd::Zero(n, n);
  cl.A_d.topLeftCorner(np, np) = plant.B_p * gains.F;
  cl.A_d.bottomLeftCorner(np, np) = -gains.L;

  cl.A_n = Eigen::MatrixXd::Zero(n, n);
  cl.A_n.topLeftCorner(np, np) = -plant.B_p * gains.F;
  cl.A_n.topRightCorner(np, np) = plant.B_p * gains.F;
  cl.A_n.bottomLeftCorner(np, np) = gains.L;
  cl.A_n.bottomRightCorner(np, np) = -gains.L;

  cl.d_m = d_m;
  cl.d_n = d_n;
  cl.d_M = d_M;
  cl.validate();
  return cl;
}

}  // namespace lkfkit
