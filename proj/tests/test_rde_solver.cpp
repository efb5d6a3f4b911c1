#include <doctest.h>

#include <cmath>

#include "tcilab/rde_solver.hpp"

using namespace tcilab;

namespace {

// V_1(y) = (y2, -y1 + 0.3 y1^2), V_2(y) = (0.5 y1 y2, 1 - 0.2 y2^2)
PolynomialVectorField test_polynomial_field() {
  std::vector<Monomial> terms{
      {0, 0, 1.0, {0, 1}}, {0, 1, -1.0, {1, 0}}, {0, 1, 0.3, {2, 0}},
      {1, 0, 0.5, {1, 1}}, {1, 1, 1.0, {0, 0}}, {1, 1, -0.2, {0, 2}},
  };
  return PolynomialVectorField(2, 2, terms);
}

Path smooth_driver(const GridPtr& grid) {
  Path p(grid, 2);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const double t = (*grid)[i];
    p.at(i, 0) = std::sin(3 * t);
    p.at(i, 1) = t * t - 0.5 * t;
  }
  return p;
}

// Classical RK4 for dY = sum_j V_j(Y) xdot^j dt with the analytic derivative of the driver.
std::vector<double> rk4_oracle(const VectorField& vf, std::vector<double> y, double horizon, std::size_t steps) {
  const std::size_t m = vf.state_dim(), d = vf.drive_dim();
  std::vector<double> v(m * d);
  auto rhs = [&](double t, const std::vector<double>& state) {
    const double xdot[2] = {3 * std::cos(3 * t), 2 * t - 0.5};
    vf.eval(state, v);
    std::vector<double> out(m, 0.0);
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t i = 0; i < m; ++i) out[i] += v[j * m + i] * xdot[j];
    return out;
  };
  const double h = horizon / steps;
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = s * h;
    auto k1 = rhs(t, y);
    std::vector<double> tmp(m);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
    auto k2 = rhs(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
    auto k3 = rhs(t + 0.5 * h, tmp);
    for (std::size_t i = 0; i < m; ++i) tmp[i] = y[i] + h * k3[i];
    auto k4 = rhs(t + h, tmp);
    for (std::size_t i = 0; i < m; ++i) y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  }
  return y;
}

double fitted_order(const std::vector<double>& steps, const std::vector<double>& errors) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double x = std::log(steps[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST_CASE("exponential identity for the scalar linear equation") {
  LinearVectorField vf(1, {{1.0}});
  std::vector<double> errs, sizes;
  for (std::size_t n : {50, 100, 200, 400}) {
    auto grid = make_uniform_grid(1.0, n);
    Path x(grid, 1);
    for (std::size_t i = 0; i <= n; ++i) x.at(i, 0) = std::sin(2 * (*grid)[i]) + (*grid)[i];
    auto sol = solve_rde(lift_piecewise_linear(x), vf, std::vector<double>{2.0});
    CHECK(sol.values[0] == 2.0);
    const double exact = 2.0 * std::exp(x.at(n, 0) - x.at(0, 0));
    errs.push_back(std::abs(sol.values[n] - exact));
    sizes.push_back(1.0 / n);
  }
  CHECK(errs.back() < 1e-3);
  CHECK(fitted_order(sizes, errs) > 1.0);
}

TEST_CASE("zero vector field keeps the initial condition") {
  PolynomialVectorField vf(2, 2, {});
  auto grid = make_uniform_grid(1.0, 20);
  auto rp = lift_piecewise_linear(GaussianSampler(DriverSpec::brownian(2), grid).sample(1, 0));
  std::vector<double> y0{0.3, -1.2};
  auto sol = solve_rde(rp, vf, y0);
  for (std::size_t i = 0; i <= 20; ++i) {
    CHECK(sol.state(i)[0] == 0.3);
    CHECK(sol.state(i)[1] == -1.2);
  }
}

TEST_CASE("polynomial field against the RK4 oracle") {
  auto vf = test_polynomial_field();
  validate_derivatives(vf, 3);
  std::vector<double> y0{0.4, -0.1};
  const std::size_t finest = 512;
  auto oracle = rk4_oracle(vf, y0, 1.0, finest * 64);
  std::vector<double> errs, sizes;
  for (std::size_t n : {64, 128, 256, 512}) {
    auto grid = make_uniform_grid(1.0, n);
    auto sol = solve_rde(lift_piecewise_linear(smooth_driver(grid)), vf, y0);
    errs.push_back(std::hypot(sol.state(n)[0] - oracle[0], sol.state(n)[1] - oracle[1]));
    sizes.push_back(1.0 / n);
  }
  MESSAGE("empirical order " << fitted_order(sizes, errs));
  CHECK(fitted_order(sizes, errs) >= 1.0);
  CHECK(errs.back() < 1e-4);
}

TEST_CASE("flow property") {
  auto vf = test_polynomial_field();
  auto grid = make_uniform_grid(1.0, 200);
  auto rp = lift_piecewise_linear(smooth_driver(grid));
  std::vector<double> y0{0.4, -0.1};
  auto full = solve_rde(rp, vf, y0);
  auto first = solve_rde_range(rp, vf, y0, 0, 100);
  std::vector<double> mid(first.end() - 2, first.end());
  auto second = solve_rde_range(rp, vf, mid, 100, 200);
  CHECK(std::abs(second[200] - full.state(200)[0]) <= 1e-10);
  CHECK(std::abs(second[201] - full.state(200)[1]) <= 1e-10);
}

TEST_CASE("Stratonovich consistency against a fine Euler-Heun oracle") {
  // Non-commuting linear fields in R^2 driven by 2-d BM; coarse rough paths
  // are Chen-coarsenings of the fine piecewise-linear lift.
  LinearVectorField vf(2, {{0.0, 1.0, -1.0, 0.0}, {0.5, 0.0, 0.0, -0.5}});
  const std::size_t fine = 2048, samples = 200;
  auto grid = make_uniform_grid(1.0, fine);
  GaussianSampler sampler(DriverSpec::brownian(2), grid);
  std::vector<double> y0{1.0, 0.5};
  std::vector<std::size_t> strides{64, 32, 16, 8};
  std::vector<double> mse(strides.size(), 0.0);
  std::vector<double> v(4), vp(4);
  for (std::size_t s = 0; s < samples; ++s) {
    Path w = sampler.sample(77, s);
    // Euler-Heun on the fine grid
    std::vector<double> y = y0, pred(2);
    for (std::size_t c = 0; c < fine; ++c) {
      const double dx[2] = {w.increment(c, 0), w.increment(c, 1)};
      vf.eval(y, v);
      for (std::size_t i = 0; i < 2; ++i) pred[i] = y[i] + v[i] * dx[0] + v[2 + i] * dx[1];
      vf.eval(pred, vp);
      for (std::size_t i = 0; i < 2; ++i)
        y[i] += 0.5 * ((v[i] + vp[i]) * dx[0] + (v[2 + i] + vp[2 + i]) * dx[1]);
    }
    auto rp = lift_piecewise_linear(w);
    for (std::size_t k = 0; k < strides.size(); ++k) {
      auto coarse = coarsen(rp, strides[k]);
      auto sol = solve_rde(coarse, vf, y0);
      const std::size_t n = coarse.steps();
      const double e0 = sol.state(n)[0] - y[0], e1 = sol.state(n)[1] - y[1];
      mse[k] += (e0 * e0 + e1 * e1) / samples;
    }
  }
  std::vector<double> errs, sizes;
  for (std::size_t k = 0; k < strides.size(); ++k) {
    errs.push_back(std::sqrt(mse[k]));
    sizes.push_back(static_cast<double>(strides[k]) / fine);
  }
  MESSAGE("L2 order " << fitted_order(sizes, errs));
  CHECK(fitted_order(sizes, errs) >= 0.5);
}

TEST_CASE("linear equation stays positive") {
  LinearVectorField vf(1, {{1.0}});
  auto grid = make_uniform_grid(1.0, 256);
  GaussianSampler sampler(DriverSpec::brownian(), grid);
  for (std::uint64_t s = 0; s < 50; ++s) {
    auto sol = solve_rde(lift_piecewise_linear(sampler.sample(9, s)), vf, std::vector<double>{0.7});
    for (double y : sol.values) CHECK(y > 0.0);
  }
}

TEST_CASE("shifted solutions") {
  auto grid = make_uniform_grid(1.0, 1000);
  Path x(grid, 1);
  for (std::size_t i = 0; i <= 1000; ++i) x.at(i, 0) = std::sin(2 * (*grid)[i]);
  auto rp = lift_piecewise_linear(x);
  LinearVectorField vf(1, {{1.0}});
  std::vector<double> y0{1.0};
  auto base = solve_rde(rp, vf, y0);
  auto zero = solve_shifted_rde(rp, zero_shift(DriverSpec::brownian(), grid), vf, y0);
  CHECK(zero.values == base.values);

  std::vector<double> ctrl(grid->size());
  for (std::size_t i = 0; i < ctrl.size(); ++i) ctrl[i] = 1.0 + (*grid)[i];
  auto h = make_shift(DriverSpec::brownian(), grid, ctrl);
  auto shifted = solve_shifted_rde(rp, h, vf, y0);
  // int_0^1 (1 + t) dt = 1.5
  CHECK(shifted.values.back() / base.values.back() == doctest::Approx(std::exp(1.5)).epsilon(1e-5));
}

TEST_CASE("derivative validation rejects a wrong Jacobian") {
  CallableVectorField good(
      1, 1, [](std::span<const double> y, std::span<double> o) { o[0] = std::sin(y[0]); },
      [](std::span<const double> y, std::span<double> o) { o[0] = std::cos(y[0]); });
  CHECK_NOTHROW(validate_derivatives(good, 1));
  CallableVectorField bad(
      1, 1, [](std::span<const double> y, std::span<double> o) { o[0] = std::sin(y[0]); },
      [](std::span<const double> y, std::span<double> o) { o[0] = 1.1 * std::cos(y[0]); });
  CHECK_THROWS_AS(validate_derivatives(bad, 1), ContractError);
  CHECK_NOTHROW(validate_derivatives(test_polynomial_field(), 2));
}

TEST_CASE("blowup is reported with the last valid time") {
  PolynomialVectorField vf(1, 1, {{0, 0, 1.0, {2}}});
  auto grid = make_uniform_grid(1.0, 100);
  Path x(grid, 1);
  for (std::size_t i = 0; i <= 100; ++i) x.at(i, 0) = 5.0 * (*grid)[i];
  try {
    solve_rde(lift_piecewise_linear(x), vf, std::vector<double>{1.0});
    FAIL("expected blowup");
  } catch (const BlowupError& e) {
    CHECK(e.last_valid_time() > 0.0);
    CHECK(e.last_valid_time() < 1.0);
  }
}

TEST_CASE("batch solver matches serial reference") {
  auto vf = test_polynomial_field();
  auto grid = make_uniform_grid(1.0, 64);
  auto paths = lift_batch(GaussianSampler(DriverSpec::fbm(0.45, 2), grid).sample_batch(2, 0, 16));
  std::vector<double> y0{0.1, 0.2};
  auto a = solve_rde_batch(paths, vf, y0);
  auto b = solve_rde_batch_serial(paths, vf, y0);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].values == b[i].values);
}

TEST_CASE("dimension checks") {
  LinearVectorField vf(1, {{1.0}});
  auto grid = make_uniform_grid(1.0, 4);
  auto rp = lift_piecewise_linear(Path(grid, 2));
  CHECK_THROWS_AS(solve_rde(rp, vf, std::vector<double>{1.0}), ShapeError);
  CHECK_THROWS_AS(LinearVectorField(2, {{1.0}}), ShapeError);
}
