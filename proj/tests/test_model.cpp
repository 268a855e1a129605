#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>

#include "lkfkit/model.hpp"
#include "lkfkit/simverify.hpp"

using namespace lkfkit;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd M(2, 2);
  M << a, b, c, d;
  return M;
}

DelaySystem example_system(int n, int d_m, int d_n, int d_M, std::uint64_t seed) {
  DelaySystem s;
  auto rnd = [&](int r) {
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const std::uint64_t h = splitmix64(seed + 97 * r + 13 * i + j);
        M(i, j) = static_cast<double>(h % 2000) / 1000.0 - 1.0;
      }
    return M;
  };
  s.A = 0.5 * rnd(0);
  s.A_n = 0.3 * rnd(1);
  s.A_d = 0.2 * rnd(2);
  s.d_m = d_m;
  s.d_n = d_n;
  s.d_M = d_M;
  return s;
}

}  // namespace

TEST_CASE("switched split covers the table of endpoint matrices") {
  DelaySystem s = example_system(2, 1, 3, 5, 7);
  auto [low, high] = split_switched(s);
  CHECK(low.A_m.isZero(0));
  CHECK(low.A_M.isApprox(s.A_n));
  CHECK(low.d_lo == 1);
  CHECK(low.d_hi == 3);
  CHECK(high.A_m.isApprox(s.A_n));
  CHECK(high.A_M.isZero(0));
  CHECK(high.d_lo == 3);
  CHECK(high.d_hi == 5);
  CHECK(low.A.isApprox(s.A));
  CHECK(high.A_d.isApprox(s.A_d));
}

TEST_CASE("switched split with zero constant-delay matrix") {
  DelaySystem s = example_system(2, 1, 2, 4, 11);
  s.A_n.setZero();
  auto [low, high] = split_switched(s);
  CHECK(low.A_m.isZero(0));
  CHECK(low.A_M.isZero(0));
  CHECK(high.A_m.isZero(0));
  CHECK(high.A_M.isZero(0));
}

TEST_CASE("switched split with collapsed bounds") {
  DelaySystem s = example_system(1, 2, 2, 2, 3);
  auto [low, high] = split_switched(s);
  CHECK(low.d_lo == 2);
  CHECK(low.d_hi == 2);
  CHECK(low.d_span() == 0);
  CHECK(high.d_span() == 0);
}

TEST_CASE("mode rule boundary") {
  DelaySystem s = example_system(1, 1, 1, 2, 5);
  CHECK(sigma(1, s) == 1);
  CHECK(sigma(2, s) == 2);
  s = example_system(1, 1, 3, 5, 5);
  CHECK(sigma(3, s) == 1);  // boundary belongs to the first mode
  CHECK(sigma(4, s) == 2);
  CHECK_THROWS_AS(sigma(6, s), std::out_of_range);
  CHECK_THROWS_AS(sigma(0, s), std::out_of_range);
}

TEST_CASE("mode bounds always bracket the active delay") {
  DelaySystem s = example_system(2, 2, 4, 7, 21);
  auto [low, high] = split_switched(s);
  for (int dk = s.d_m; dk <= s.d_M; ++dk) {
    const BoundedDelaySubsystem& active = sigma(dk, s) == 1 ? low : high;
    CHECK(active.d_lo <= dk);
    CHECK(dk <= active.d_hi);
  }
}

TEST_CASE("split reproduces the one-step map of the original system") {
  const int n = 2, d_m = 1, d_n = 3, d_M = 5;
  DelaySystem s = example_system(n, d_m, d_n, d_M, 31);
  auto [low, high] = split_switched(s);
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    HistoryVector h;
    for (int i = 0; i <= d_M; ++i) {
      Eigen::VectorXd x(n);
      for (int j = 0; j < n; ++j)
        x(j) = static_cast<double>(splitmix64(1000 * trial + 10 * i + j) % 1000) / 500.0 - 1.0;
      h.samples.push_back(x);
    }
    for (int dk = d_m; dk <= d_M; ++dk) {
      const Eigen::VectorXd direct =
          s.A * h.at_delay(0) + s.A_n * h.at_delay(d_n) + s.A_d * h.at_delay(dk);
      const BoundedDelaySubsystem& sub = sigma(dk, s) == 1 ? low : high;
      const Eigen::VectorXd via_mode = sub.A * h.at_delay(0) + sub.A_m * h.at_delay(sub.d_lo) +
                                       sub.A_M * h.at_delay(sub.d_hi) + sub.A_d * h.at_delay(dk);
      CHECK((direct - via_mode).norm() <= 1e-14 * (1.0 + direct.norm()));
    }
  }
}

TEST_CASE("closed-loop block layout") {
  PlantModel plant;
  plant.A_p = mat2(0.6693, -0.0042, 0.4231, 1.0501);
  plant.B_p = Eigen::MatrixXd(2, 1);
  plant.B_p << 0.1647, 0.0960;

  ControllerGains g;
  g.K = Eigen::MatrixXd(1, 2);
  g.K << -0.1925, -0.1702;
  g.F = Eigen::MatrixXd::Zero(1, 2);
  g.L = Eigen::MatrixXd::Zero(2, 2);

  DelaySystem cl = build_closed_loop(plant, g, 1, 1, 17);
  CHECK(cl.dim() == 4);
  // top-left block is A_p + B_p K, computed from the example plant data
  Eigen::MatrixXd expect = plant.A_p + plant.B_p * g.K;
  CHECK(cl.A.topLeftCorner(2, 2).isApprox(expect, 1e-12));
  CHECK(std::abs(cl.A(0, 0) - 0.6376) < 1e-3);
  CHECK(std::abs(cl.A(1, 1) - 1.0338) < 1e-3);
  // F = 0 leaves only the L blocks in the delay terms
  CHECK(cl.A_d.topRows(2).isZero(0));
  CHECK(cl.A_n.topRows(2).isZero(0));

  ControllerGains zero;
  zero.K = Eigen::MatrixXd::Zero(1, 2);
  zero.F = Eigen::MatrixXd::Zero(1, 2);
  zero.L = Eigen::MatrixXd::Zero(2, 2);
  DelaySystem open = build_closed_loop(plant, zero, 1, 2, 3);
  CHECK(open.A.topLeftCorner(2, 2).isApprox(plant.A_p));
  CHECK(open.A.bottomRightCorner(2, 2).isApprox(plant.A_p));
  CHECK(open.A_d.isZero(0));
  CHECK(open.A_n.isZero(0));
}

TEST_CASE("observer loop matches the closed-loop coordinates") {
  PlantModel plant;
  plant.A_p = mat2(0.6693, -0.0042, 0.4231, 1.0501);
  plant.B_p = Eigen::MatrixXd(2, 1);
  plant.B_p << 0.1647, 0.0960;

  ControllerGains g;
  g.K = Eigen::MatrixXd(1, 2);
  g.K << -0.1925, -0.1702;
  g.F = Eigen::MatrixXd(1, 2);
  g.F << -0.1755, -0.1601;
  g.L = mat2(-0.0032, -0.0007, 0.0578, 0.0525);

  const int d_m = 1, d_n = 1, d_M = 4, K = 60;
  DelaySystem cl = build_closed_loop(plant, g, d_m, d_n, d_M);

  HistoryVector phi_p, phi_o;
  for (int i = 0; i <= d_M; ++i) {
    Eigen::VectorXd xp(2), xo(2);
    for (int j = 0; j < 2; ++j) {
      xp(j) = static_cast<double>(splitmix64(50 * i + j) % 1000) / 500.0 - 1.0;
      xo(j) = static_cast<double>(splitmix64(777 + 50 * i + j) % 1000) / 500.0 - 1.0;
    }
    phi_p.samples.push_back(xp);
    phi_o.samples.push_back(xo);
  }
  const DelaySignal d = DelaySignal::uniform_random(99, d_m, d_M);
  const ObserverLoopResult obs = simulate_observer_loop(plant, g, d, d_n, phi_p, phi_o, K);

  HistoryVector phi_cl;
  for (int i = 0; i <= d_M; ++i) {
    Eigen::VectorXd x(4);
    x.head(2) = phi_p.at_delay(i);
    x.tail(2) = phi_p.at_delay(i) - phi_o.at_delay(i);
    phi_cl.samples.push_back(x);
  }
  const Trajectory tr = simulate(cl, phi_cl, d, K);
  for (int k = 0; k <= K; ++k) {
    const Eigen::VectorXd& z = tr.states[static_cast<std::size_t>(k)];
    const double scale = 1.0 + z.norm();
    CHECK((z.head(2) - obs.plant_states[static_cast<std::size_t>(k)]).norm() <= 1e-12 * scale);
    CHECK((z.tail(2) - obs.errors[static_cast<std::size_t>(k)]).norm() <= 1e-12 * scale);
  }
}

TEST_CASE("history window averages") {
  HistoryVector h;
  for (int i = 0; i <= 3; ++i) h.samples.push_back(Eigen::VectorXd::Constant(1, i));
  CHECK(h.window_average(0, 3)(0) == doctest::Approx(1.5));
  CHECK(h.window_average(2, 2)(0) == doctest::Approx(2.0));
  CHECK(h.stacked().size() == 4);
}
