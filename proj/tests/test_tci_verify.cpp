#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tcilab/rng.hpp"
#include "tcilab/tci_verify.hpp"

using namespace tcilab;

namespace {

TciConfig identity_config(std::size_t samples = 64) {
  TciConfig c;
  c.functional.kind = FunctionalKind::Identity;
  c.functional.steps = 32;
  c.ray.shape = ShiftShape::Constant;
  c.ray.level = 0.7;
  c.ray.t_values = ShiftRay::dyadic(-4, 3, 10);
  c.samples = samples;
  c.ot_samples = 16;
  c.seed = 11;
  return c;
}

std::vector<double> weibull_samples(double shape, std::size_t n, std::uint64_t stream) {
  RandomStream rng(404, stream);
  std::vector<double> out(n);
  for (auto& v : out) v = std::pow(-std::log(rng.uniform()), 1.0 / shape);
  return out;
}

std::vector<double> abs_normal_samples(std::size_t n, std::uint64_t stream) {
  RandomStream rng(405, stream);
  std::vector<double> out(n);
  for (auto& v : out) v = std::abs(rng.normal());
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("deviation function shapes") {
  auto two = DeviationFunction::two_regime(3.0, 2.5);
  CHECK(two(0.0) == 0.0);
  CHECK(two(0.5) == doctest::Approx(3.0 * std::pow(0.5, 5.0)));
  CHECK(two(2.0) == doctest::Approx(3.0 * 4.0));
  double last = 0.0;
  for (double t = 0.01; t < 10.0; t *= 1.1) {
    CHECK(two(t) >= last);
    last = two(t);
  }
  auto tal = DeviationFunction::talagrand(0.5, 1.0);
  CHECK(tal(3.0) == doctest::Approx(4.5));
  auto moved = DeviationFunction::two_regime(1.0, 2.0, 2.0);
  CHECK(moved(1.0) == doctest::Approx(std::pow(0.5, 4.0)));
  CHECK(moved(4.0) == doctest::Approx(4.0));
  CHECK_THROWS_AS(DeviationFunction::power_min(1.0, -1.0, 2.0), DomainError);
}

TEST_CASE("fitted constant is conservative") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.01, 5.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> w(8), h(8);
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] = u(gen);
      h[k] = u(gen);
    }
    auto shape = DeviationFunction::two_regime(1.0, 1.0 + rep % 4);
    shape.constant = fit_deviation_constant(shape, w, h);
    bool tight = false;
    for (std::size_t k = 0; k < w.size(); ++k) {
      CHECK(shape(w[k]) <= h[k] * (1.0 + 1e-12));
      tight = tight || std::abs(shape(w[k]) - h[k]) <= 1e-12 * h[k];
    }
    CHECK(tight);
  }
  const std::vector<double> zeros{0.0, 0.0}, ent{0.0, 1.0};
  CHECK(std::isinf(fit_deviation_constant(DeviationFunction::two_regime(1.0, 2.0), zeros, ent)));
}

TEST_CASE("identity functional reproduces the Gaussian Talagrand baseline") {
  auto c = identity_config();
  c.alpha_constant = 0.25;
  const auto rep = run_tci_experiment(c);
  REQUIRE(rep.rows.size() == 10);
  const double h0 = 0.7;  // horizon 1
  for (const auto& row : rep.rows) {
    CHECK(row.shift_norm == doctest::Approx(row.t * h0).epsilon(1e-13));
    CHECK(std::abs(row.entropy - 0.5 * row.t * row.t * h0 * h0) <= 1e-12 * std::max(1.0, row.entropy));
    CHECK(std::abs(row.sync_cost - row.t * h0) <= 1e-12 * std::max(1.0, row.t));
    CHECK(row.sync_sigma <= 1e-12 * std::max(1.0, row.t));
    CHECK(row.ot_cost <= row.ot_sync_subsample + 1e-9);
    CHECK(row.ot_below_sync);
    CHECK(row.passes);
  }
  CHECK(rep.pass);
  CHECK(rep.pass_fraction == 1.0);
  // C t^2 with entropy t^2 |h|^2 / 2 and cost t |h|
  CHECK(rep.fitted_constant == doctest::Approx(0.5).epsilon(1e-10));
  // (t / 0.5)^2 = 4 t^2
  CHECK(rep.fitted_constant_half == doctest::Approx(0.125).epsilon(1e-10));
}

TEST_CASE("zero shift is tight") {
  auto c = identity_config(32);
  c.ray.t_values = {0.0, 0.5};
  const auto rep = run_tci_experiment(c);
  CHECK(rep.rows[0].sync_cost == 0.0);
  CHECK(rep.rows[0].entropy == 0.0);
  CHECK(rep.rows[0].ot_cost == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.rows[0].passes);
}

TEST_CASE("catalogue mismatches are configuration errors") {
  auto c = identity_config(16);
  c.cost_exponent = 0.5;
  CHECK_THROWS_AS(run_tci_experiment(c), ConfigError);
  c.cost_exponent = 1.0;
  CHECK_NOTHROW(run_tci_experiment(c));

  FunctionalConfig f;
  f.kind = FunctionalKind::Identity;
  f.driver = DriverSpec::fbm(0.4);
  CHECK_THROWS_AS(make_functional(f), ConfigError);
  f.kind = FunctionalKind::RdeSolution;
  f.driver = DriverSpec::fbm(0.4, 2);
  CHECK_THROWS_AS(make_functional(f), ConfigError);
  f.driver = DriverSpec::fbm(0.4, 3);
  f.q = 2.0;
  CHECK_THROWS_AS(make_functional(f), ConfigError);
  f.q = 0.0;
  auto rde = make_functional(f);
  CHECK(rde->regime_exponent() == doctest::Approx(1.0 / 0.9));
  f.kind = FunctionalKind::ItoModel;
  f.driver = DriverSpec::brownian();
  f.kappa = 0.3;
  CHECK_THROWS_AS(make_functional(f), ConfigError);
  CHECK_THROWS_AS(functional_kind_from_string("bogus"), ConfigError);

  auto bad = identity_config(16);
  bad.ot_samples = 32;
  CHECK_THROWS_AS(run_tci_experiment(bad), ConfigError);
}

TEST_CASE("registered regime exponents") {
  FunctionalConfig f;
  f.kind = FunctionalKind::ItoModel;
  f.hurst = 0.25;
  f.kappa = 0.02;
  CHECK(make_functional(f)->regime_exponent() == 3.0);
  f.kind = FunctionalKind::LogPrice;
  f.volatility = {0.2, 0.5, 0.3};
  CHECK(make_functional(f)->regime_exponent() == 3.0);
  f.kind = FunctionalKind::ModelledDistribution;
  f.volatility = {0.2, 0.5};
  CHECK(make_functional(f)->regime_exponent() == 4.0);
  f.kind = FunctionalKind::RoughPathLift;
  f.driver = DriverSpec::brownian(2);
  CHECK(make_functional(f)->regime_exponent() == 2.0);
}

TEST_CASE("serial and parallel experiments agree exactly") {
  auto c = identity_config(24);
  c.functional.kind = FunctionalKind::LogPrice;
  c.functional.hurst = 0.3;
  c.functional.volatility = {0.2, 0.5, 0.3};
  c.ray.t_values = {0.1, 1.0, 4.0};
  c.ot_samples = 8;
  auto par = run_tci_experiment(c);
  c.parallel = false;
  auto ser = run_tci_experiment(c);
  for (std::size_t k = 0; k < par.rows.size(); ++k) {
    CHECK(par.rows[k].sync_cost == ser.rows[k].sync_cost);
    CHECK(par.rows[k].ot_cost == ser.rows[k].ot_cost);
    CHECK(par.rows[k].sync_sigma == ser.rows[k].sync_sigma);
  }
}

TEST_CASE("synchronous verdicts survive more samples") {
  auto c = identity_config(32);
  c.functional.kind = FunctionalKind::LogPrice;
  c.functional.hurst = 0.3;
  c.functional.volatility = {0.2, 0.5, 0.3};
  c.ray.t_values = ShiftRay::dyadic(-3, 3, 5);
  c.ot_samples = 8;
  c.alpha_constant = 0.1;
  const auto small = run_tci_experiment(c);
  c.samples = 128;
  const auto large = run_tci_experiment(c);
  for (std::size_t k = 0; k < small.rows.size(); ++k) {
    if (small.rows[k].passes) CHECK(large.rows[k].passes);
    CHECK(std::abs(small.rows[k].sync_cost - large.rows[k].sync_cost) <=
          4.0 * std::hypot(small.rows[k].sync_sigma, large.rows[k].sync_sigma));
  }
}

TEST_CASE("shift exponent regressions") {
  SUBCASE("identity is exactly linear") {
    FunctionalConfig f;
    f.kind = FunctionalKind::Identity;
    f.steps = 16;
    auto fn = make_functional(f);
    ShiftRay ray;
    auto h0 = ray.direction(fn->driver(), fn->grid());
    const auto t = ShiftRay::dyadic(-4, 4, 9);
    auto r = shift_exponent_regression(*fn, h0, t, 8, 3);
    CHECK(r.small_slope == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.large_slope == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(r.pass);
    CHECK(r.dropped == 0);
  }
  SUBCASE("rough path lift grows linearly then quadratically") {
    FunctionalConfig f;
    f.kind = FunctionalKind::RoughPathLift;
    f.driver = DriverSpec::brownian(2);
    f.steps = 32;
    auto fn = make_functional(f);
    ShiftRay ray;
    auto h0 = ray.direction(fn->driver(), fn->grid());
    auto r = shift_exponent_regression(*fn, h0, ShiftRay::dyadic(-5, 5, 11), 32, 4);
    CHECK(r.small_slope == doctest::Approx(1.0).epsilon(0.1));
    CHECK(r.large_slope == doctest::Approx(2.0).epsilon(0.15));
    CHECK(r.pass);
  }
  SUBCASE("grid requirements") {
    FunctionalConfig f;
    auto fn = make_functional(f);
    ShiftRay ray;
    auto h0 = ray.direction(fn->driver(), fn->grid());
    const std::vector<double> narrow{1.0, 2.0, 4.0, 8.0};
    CHECK_THROWS_AS(shift_exponent_regression(*fn, h0, narrow, 4, 1), DomainError);
    const std::vector<double> few{0.01, 1.0, 10.0};
    CHECK_THROWS_AS(shift_exponent_regression(*fn, h0, few, 4, 1), DomainError);
  }
}

TEST_CASE("exponential moments") {
  SUBCASE("constant statistic is exact") {
    const std::vector<double> d(500, 1.7);
    const std::vector<double> s{0.1, 1.0, 3.0};
    auto rep = check_exp_moments(d, 0.5, s);
    for (const auto& pt : rep.points) {
      CHECK(pt.log_mean == doctest::Approx(pt.s * std::sqrt(1.7)).epsilon(1e-14));
      CHECK(pt.ess == doctest::Approx(500.0));
    }
    CHECK(rep.all_trusted);
    CHECK(rep.finite_trend);
  }
  SUBCASE("absolute normal against the closed form") {
    auto x = abs_normal_samples(200'000, 1);
    const std::vector<double> s{0.25, 0.5, 1.0, 1.5};
    auto rep = check_exp_moments(x, 1.0, s);
    for (const auto& pt : rep.points) {
      const double exact = 2.0 * std::exp(0.5 * pt.s * pt.s) * normal_cdf(pt.s);
      INFO("s = " << pt.s);
      CHECK(std::abs(std::exp(pt.log_mean) / exact - 1.0) <= 4.0 * pt.rel_se);
      CHECK(pt.trusted);
    }
  }
  SUBCASE("Weibull with shape above 2p is trusted everywhere") {
    const double q = 1.25, shape = 2.0 / q, p = 0.5;  // 2p = 1 < shape
    auto x = weibull_samples(shape, 100'000, 2);
    const std::vector<double> s{0.1, 0.5, 1.0, 2.0};
    auto rep = check_exp_moments(x, p, s);
    CHECK(rep.all_trusted);
    CHECK(rep.finite_trend);
  }
  SUBCASE("heavy exponential weights are flagged") {
    auto x = weibull_samples(0.5, 20'000, 3);
    const std::vector<double> s{0.01, 5.0};
    auto rep = check_exp_moments(x, 1.0, s);
    CHECK(rep.points[0].trusted);
    CHECK_FALSE(rep.points[1].trusted);
    CHECK_FALSE(rep.all_trusted);
  }
  CHECK_THROWS_AS(check_exp_moments(std::vector<double>{-1.0}, 1.0, std::vector<double>{1.0}), DomainError);
  CHECK_THROWS_AS(check_exp_moments(std::vector<double>{1.0}, 1.5, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("Gaussian integrability by tail extrapolation") {
  auto x = abs_normal_samples(200'000, 4);
  const std::vector<double> lambdas{0.1, 0.2, 0.3, 2.0};
  auto g = gaussian_integrability(x, lambdas);
  CHECK(g.rate == doctest::Approx(0.5).epsilon(0.25));
  CHECK(g.r_squared > 0.99);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(g.finite[k]);
    // E exp(lambda X^2) = (1 - 2 lambda)^{-1/2}
    CHECK(std::exp(g.log_values[k]) == doctest::Approx(1.0 / std::sqrt(1.0 - 2.0 * lambdas[k])).epsilon(0.05));
  }
  CHECK_FALSE(g.finite[3]);
}

TEST_CASE("deviation estimates") {
  const std::vector<std::size_t> ns{1, 2, 4, 8};
  SUBCASE("degenerate statistic") {
    const std::vector<double> s{0.5, 1.0};
    auto rep = check_deviation([](std::uint64_t) { return 0.0; }, ns, s, 0.5, 1000);
    CHECK(rep.points.empty());
    CHECK(rep.pass);
  }
  SUBCASE("absolute normal has at least exponential deviations") {
    const std::vector<double> s{1.5, 2.0, 2.5, 3.0};
    const std::vector<std::size_t> one{1};
    auto rep = check_deviation([](std::uint64_t k) { return std::abs(RandomStream(77, k).normal()); }, one, s, 0.5,
                               100'000);
    CHECK(rep.pass);
    CHECK(rep.fitted_constant > 0.0);
    for (const auto& pt : rep.points) CHECK(pt.log_rate <= -rep.fitted_constant * pt.s);
  }
  SUBCASE("squared Gaussians recover the exponential rate") {
    std::vector<double> s;
    for (double v = 2.0; v <= 12.0; v += 0.5) s.push_back(v);
    auto rep = check_deviation(
        [](std::uint64_t k) {
          const double z = RandomStream(78, k).normal();
          return z * z;
        },
        ns, s, 0.5, 100'000);
    CHECK(rep.pass);
    CHECK(rep.fitted_exponent == doctest::Approx(1.0).epsilon(0.2));
    for (std::size_t k = 1; k < rep.points.size(); ++k)
      if (rep.points[k].n == rep.points[k - 1].n) CHECK(rep.points[k].probability <= rep.points[k - 1].probability);
  }
  CHECK_THROWS_AS(check_deviation([](std::uint64_t) { return 1.0; }, std::vector<std::size_t>{3},
                                  std::vector<double>{1.0}, 0.5, 10),
                  DomainError);
}

TEST_CASE("tail fits") {
  SUBCASE("Weibull shapes at one million samples") {
    for (double k : {0.5, 1.0, 1.8, 3.0}) {
      auto x = weibull_samples(k, 1'000'000, static_cast<std::uint64_t>(10 * k));
      auto fit = fit_tail(x);
      INFO("shape " << k);
      CHECK(std::abs(fit.shape - k) <= 0.1);
      CHECK(fit.r_squared >= 0.95);
    }
  }
  SUBCASE("absolute normal has Gaussian shape") {
    auto fit = fit_tail(abs_normal_samples(200'000, 5));
    CHECK(fit.shape >= 1.5);
    CHECK(fit.shape <= 2.5);
  }
  SUBCASE("survival is monotone and levels respect the exceedance rule") {
    auto fit = fit_tail(weibull_samples(1.0, 100'000, 6));
    for (std::size_t k = 1; k < fit.levels.size(); ++k) {
      CHECK(fit.levels[k] > fit.levels[k - 1]);
      CHECK(fit.survival[k] <= fit.survival[k - 1]);
    }
    for (std::size_t k = 0; k < fit.levels.size(); ++k)
      if (fit.trusted[k]) CHECK(fit.exceedances[k] >= kMinExceedances);
  }
  SUBCASE("log-normal template") {
    RandomStream rng(406, 7);
    std::vector<double> x(200'000);
    for (auto& v : x) v = std::exp(0.3 + 0.8 * rng.normal());
    auto fit = fit_tail(x);
    CHECK(fit.lognormal_r_squared > 0.99);
    CHECK(fit.lognormal_b == doctest::Approx(1.0 / 0.8).epsilon(0.1));
  }
  SUBCASE("refusals") {
    std::vector<double> zeros(100'000, 0.0);
    CHECK_THROWS_AS(fit_tail(zeros), DomainError);
    CHECK_THROWS_AS(fit_tail(std::vector<double>(10, 1.0)), DomainError);
  }
}

TEST_CASE("line fit") {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  auto f = fit_line(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
}
