#include <doctest.h>

#include <cmath>

#include "tcilab/gauss_sim.hpp"

using namespace tcilab;

namespace {

// Entrywise sample-covariance check against the analytic matrix, 4 standard errors.
void check_sample_covariance(const DriverSpec& spec, GridPtr grid, std::size_t n, std::uint64_t seed) {
  const auto cov = covariance_matrix(spec, *grid);
  GaussianSampler sampler(spec, grid);
  const std::size_t m = grid->steps();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  for (std::size_t s = 0; s < n; ++s) {
    Path p = sampler.sample(seed, s);
    Eigen::VectorXd x(m);
    for (std::size_t i = 0; i < m; ++i) x[i] = p.at(i + 1, 0);
    mean += x;
    acc += x * x.transpose();
  }
  mean /= static_cast<double>(n);
  acc /= static_cast<double>(n);
  for (std::size_t i = 0; i < m; ++i) {
    CHECK(std::abs(mean[i]) <= 4.0 * std::sqrt(cov(i, i) / n));
    for (std::size_t j = 0; j <= i; ++j) {
      const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n);
      INFO("kind=" << to_string(spec.kind) << " i=" << i << " j=" << j);
      CHECK(std::abs(acc(i, j) - cov(i, j)) <= 4.0 * se);
    }
  }
}

}  // namespace

TEST_CASE("volterra kernel values") {
  CHECK(volterra_kernel(0.5, 0.7) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(volterra_kernel(0.5, 123.0) == doctest::Approx(1.0).epsilon(1e-15));
  // mpmath, 30 digits
  CHECK(volterra_kernel(0.1, 0.25) == doctest::Approx(0.778644094952346783).epsilon(1e-14));
  CHECK_THROWS_AS(volterra_kernel(0.3, 0.0), DomainError);
  CHECK_THROWS_AS(volterra_kernel(0.3, -1.0), DomainError);
  CHECK_THROWS_AS(volterra_kernel(1.0, 1.0), DomainError);
}

TEST_CASE("volterra kernel integral matches quadrature of the kernel") {
  const double h = 0.2, a = 0.1, b = 0.35;
  double mid = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) mid += volterra_kernel(h, a + (b - a) * (i + 0.5) / n);
  mid *= (b - a) / n;
  CHECK(volterra_kernel_integral(h, a, b) == doctest::Approx(mid).epsilon(1e-8));
}

TEST_CASE("rl-fbm covariance against hypergeometric oracle") {
  // 2H s^{H+1/2} t^{H-1/2} 2F1(1/2-H, 1; H+3/2; s/t)/(H+1/2), mpmath 30 digits.
  CHECK(rl_fbm_covariance(0.1, 0.3, 0.7) == doctest::Approx(0.213259131750051178).epsilon(1e-11));
  CHECK(rl_fbm_covariance(0.3, 0.5, 1.0) == doctest::Approx(0.462094690697062038).epsilon(1e-11));
  CHECK(rl_fbm_covariance(0.75, 0.2, 0.9) == doctest::Approx(0.152246957007416204).epsilon(1e-11));
  CHECK(rl_fbm_covariance(0.3, 0.99, 1.0) == doctest::Approx(0.961502142133133642).epsilon(1e-11));
  CHECK(rl_fbm_covariance(0.3, 1.0, 0.5) == rl_fbm_covariance(0.3, 0.5, 1.0));
  CHECK(rl_fbm_covariance(0.2, 0.6, 0.6) == doctest::Approx(std::pow(0.6, 0.4)).epsilon(1e-15));
}

TEST_CASE("rl-fbm at H=1/2 has the Brownian covariance") {
  auto grid = TimeGrid::uniform(1.3, 12);
  auto a = covariance_matrix(DriverSpec::rl_fbm(0.5), grid);
  auto b = covariance_matrix(DriverSpec::brownian(), grid);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("Brownian terminal variance") {
  auto grid = make_uniform_grid(2.5, 1);
  GaussianSampler s(DriverSpec::brownian(), grid);
  const int n = 100000;
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.sample(5, i).at(1, 0);
    m2 += x * x;
  }
  m2 /= n;
  CHECK(std::abs(m2 - 2.5) < 4.0 * 2.5 * std::sqrt(2.0 / n));
}

TEST_CASE("sample covariance is exact on the grid for every driver") {
  auto grid = std::make_shared<const TimeGrid>(TimeGrid::from_points({0.0, 0.1, 0.35, 0.5, 0.9, 1.0}));
  const std::size_t n = 100000;
  check_sample_covariance(DriverSpec::brownian(), grid, n, 1);
  check_sample_covariance(DriverSpec::fbm(0.3), grid, n, 2);
  check_sample_covariance(DriverSpec::fbm(0.7), grid, n, 3);
  check_sample_covariance(DriverSpec::rl_fbm(0.1), grid, n, 4);
  check_sample_covariance(DriverSpec::ornstein_uhlenbeck(2.0, 0.7), grid, n, 5);
  check_sample_covariance(DriverSpec::bridge(), grid, n, 6);
}

TEST_CASE("sampling is deterministic and the parallel batch equals the serial one") {
  auto grid = make_uniform_grid(1.0, 64);
  GaussianSampler s(DriverSpec::fbm(0.4, 2), grid);
  auto a = s.sample(99, 17);
  auto b = s.sample(99, 17);
  CHECK(a.values == b.values);
  auto par = s.sample_batch(3, 10, 40);
  auto ser = s.sample_batch_serial(3, 10, 40);
  for (std::size_t i = 0; i < par.size(); ++i) CHECK(par[i].values == ser[i].values);
  CHECK(par[0].values == s.sample(3, 10).values);
}

TEST_CASE("invalid hurst is a domain error") {
  CHECK_THROWS_AS(DriverSpec::fbm(0.0), DomainError);
  CHECK_THROWS_AS(DriverSpec::rl_fbm(1.2), DomainError);
  DriverSpec bad;
  bad.dim = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("shift_path basic properties") {
  auto grid = make_uniform_grid(2.0, 50);
  auto spec = DriverSpec::brownian(2);
  Path p = GaussianSampler(spec, grid).sample(1, 0);

  auto zero = zero_shift(spec, grid);
  CHECK(shift_path(p, zero).values == p.values);

  auto one = constant_shift(spec, grid, 1.0);
  Path drift = shift_path(p, one);
  for (std::size_t i = 0; i < p.points(); ++i)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(drift.at(i, k) - p.at(i, k) == doctest::Approx((*grid)[i]).epsilon(1e-13));

  std::vector<double> v1(grid->size() * 2), v2(grid->size() * 2);
  for (std::size_t i = 0; i < v1.size(); ++i) {
    v1[i] = std::cos(0.3 * i);
    v2[i] = 0.5 - 0.01 * i;
  }
  auto h1 = make_shift(spec, grid, v1);
  auto h2 = make_shift(spec, grid, v2);
  Path back = shift_path(shift_path(p, h1), h1.scaled(-1.0));
  Path twice = shift_path(shift_path(p, h1), h2);
  Path sum = shift_path(p, add_shifts(h1, h2));
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    CHECK(std::abs(back.values[i] - p.values[i]) < 1e-14);
    CHECK(std::abs(twice.values[i] - sum.values[i]) < 1e-14);
  }

  auto other = make_uniform_grid(2.0, 49);
  CHECK_THROWS_AS(shift_path(p, zero_shift(spec, other)), ShapeError);
}

TEST_CASE("injections of the driver kinds") {
  auto grid = make_uniform_grid(1.5, 300);
  const double horizon = 1.5;
  std::vector<double> ramp(grid->size());
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = (*grid)[i];

  SUBCASE("rl-fbm with unit control is the kernel primitive") {
    const double h = 0.3;
    auto inj = injection(constant_shift(DriverSpec::rl_fbm(h), grid, 1.0));
    for (std::size_t i = 0; i < grid->size(); i += 37)
      CHECK(inj.at(i, 0) == doctest::Approx(std::sqrt(2 * h) / (h + 0.5) * std::pow((*grid)[i], h + 0.5)).epsilon(1e-12));
  }
  SUBCASE("ou with unit control") {
    auto inj = injection(constant_shift(DriverSpec::ornstein_uhlenbeck(2.0, 0.5), grid, 1.0));
    for (std::size_t i = 0; i < grid->size(); i += 37)
      CHECK(inj.at(i, 0) == doctest::Approx(0.5 * (1 - std::exp(-2.0 * (*grid)[i])) / 2.0).epsilon(1e-12));
  }
  SUBCASE("bridge with a ramp control") {
    auto inj = injection(make_shift(DriverSpec::bridge(), grid, ramp));
    for (std::size_t i = 0; i < grid->size(); i += 37) {
      const double t = (*grid)[i];
      CHECK(inj.at(i, 0) == doctest::Approx(t * t / 2 - t / horizon * horizon * horizon / 2).epsilon(1e-12));
    }
    CHECK(inj.at(grid->steps(), 0) == 0.0);
  }
  SUBCASE("fbm at H=1/2 reproduces the Brownian injection") {
    auto a = injection(make_shift(DriverSpec::fbm(0.5), grid, ramp));
    auto b = injection(make_shift(DriverSpec::brownian(), grid, ramp));
    for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) < 1e-12);
  }
}

TEST_CASE("cm_norm quadrature") {
  auto grid = make_uniform_grid(3.0, 10);
  CHECK(cm_norm(constant_shift(DriverSpec::brownian(), grid, 2.0)) == doctest::Approx(2.0 * std::sqrt(3.0)));
  CHECK(cm_norm(zero_shift(DriverSpec::brownian(), grid)) == 0.0);

  auto unit = make_uniform_grid(1.0, 1000);
  std::vector<double> ramp(unit->size());
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = (*unit)[i];
  // int_0^1 t^2 dt = 1/3; trapezoid error O(dt^2)
  CHECK(cm_norm(make_shift(DriverSpec::brownian(), unit, ramp)) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-6));

  std::vector<double> spike(unit->size(), 0.0);
  spike[unit->steps()] = 1.0;
  CHECK(make_shift(DriverSpec::brownian(), unit, spike).norm_sq > 0.0);

  auto scaled = DriverSpec::fbm(0.3);
  scaled.embedding_constant = 2.0;
  CHECK(cm_norm(constant_shift(scaled, grid, 1.0)) == doctest::Approx(2.0 * std::sqrt(3.0)));
}

TEST_CASE("increment-level shift") {
  auto grid = make_uniform_grid(1.0, 4);
  std::vector<double> dw{0.1, -0.2, 0.3, 0.0};
  auto out = shift_increments(dw, constant_shift(DriverSpec::brownian(), grid, 2.0));
  CHECK(out[0] == doctest::Approx(0.6));
  CHECK(out[3] == doctest::Approx(0.5));
}
