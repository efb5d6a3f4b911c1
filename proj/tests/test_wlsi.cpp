#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "tcilab/gauss_sim.hpp"
#include "tcilab/rng.hpp"
#include "tcilab/rough_path.hpp"
#include "tcilab/wlsi.hpp"

using namespace tcilab;

namespace {

// E[|Z|^p] and E[Z^2 log Z^2] for Z ~ N(0,1) by quadrature on (0, inf).
double gaussian_abs_moment(double p) {
  boost::math::quadrature::exp_sinh<double> q;
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return q.integrate([&](double x) { return x < 60.0 ? c * std::pow(x, p) * std::exp(-0.5 * x * x) : 0.0; });
}

double gaussian_entropy_of_square() {
  boost::math::quadrature::exp_sinh<double> q;
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return q.integrate([&](double x) {
    const double x2 = x * x;
    return x2 > 0.0 && x < 60.0 ? c * x2 * std::log(x2) * std::exp(-0.5 * x2) : 0.0;
  });
}

FunctionalSpec unit_linear(std::size_t N = 32) {
  return FunctionalSpec::polynomial(make_uniform_grid(1.0, N), {std::vector<double>(N, 1.0)}, {1});
}

FunctionalSpec default_polynomial() {
  std::vector<double> h1(64, 1.0), h2(64, 0.0);
  for (std::size_t i = 0; i < 32; ++i) h2[i] = std::sqrt(2.0);
  return FunctionalSpec::polynomial(make_uniform_grid(1.0, 64), {h1, h2}, {2, 3});
}

std::vector<double> increments(const FunctionalSpec& spec, std::uint64_t seed) {
  const GaussianSampler s(DriverSpec::brownian(spec.driver_dim), spec.grid);
  const Path p = s.sample(seed, 0);
  std::vector<double> out;
  for (std::size_t l = 0; l < spec.grid->steps(); ++l)
    for (std::size_t k = 0; k < p.dim; ++k) out.push_back(p.increment(l, k));
  return out;
}

}  // namespace

TEST_CASE("kind names round trip") {
  for (auto k : {WlsiKind::PolynomialWienerIntegrals, WlsiKind::RoughPathTriple, WlsiKind::RdeEndpoint})
    CHECK(wlsi_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(wlsi_kind_from_string("nope"), ConfigError);
}

TEST_CASE("functional specs reject bad configurations") {
  const auto g = make_uniform_grid(1.0, 8);
  CHECK_THROWS_AS(FunctionalSpec::polynomial(g, {std::vector<double>(7, 1.0)}, {2}), ConfigError);
  CHECK_THROWS_AS(FunctionalSpec::polynomial(g, {std::vector<double>(8, 1.0)}, {0}), ConfigError);
  CHECK_THROWS_AS(FunctionalSpec::rough_path_triple(g, 2, 0.6, 0, 4), ConfigError);
  CHECK_THROWS_AS(FunctionalSpec::rough_path_triple(g, 2, 0.4, 4, 4), ConfigError);
  CHECK_THROWS_AS(FunctionalSpec::rde_endpoint(g, 3.5, 1.0), ConfigError);
  const auto ok = FunctionalSpec::rough_path_triple(g, 2, 0.4, 0, 4);
  CHECK_THROWS_AS(ok.evaluate(std::vector<double>(3, 0.0)), ShapeError);
}

TEST_CASE("linear functional has unit gradient and passes with constant weight") {
  const auto spec = unit_linear();
  const auto inc = increments(spec, 3);
  CHECK(spec.gradient_norm(spec.gradient(inc)) == doctest::Approx(1.0).epsilon(1e-12));
  const auto r = check_gradient_bound(spec, WeightSpec::constant(1.0, 1.0), 1000, 4);
  CHECK(r.fraction == 1.0);
  CHECK(r.pass);
  CHECK(r.fitted_constant == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("squared Wiener integral is bounded by (1+|x|)^2") {
  const auto g = make_uniform_grid(1.0, 32);
  const auto spec = FunctionalSpec::polynomial(g, {std::vector<double>(32, 1.0)}, {2});
  // ||D Psi|| = 2 |X(h)|, so ||D Psi||^2 = 4 Psi <= 4 (1 + Psi)^2.
  CHECK(spec.stated_constant() == doctest::Approx(4.0));
  const auto r = check_gradient_bound(spec, stated_weight(spec), 2000, 5);
  CHECK(r.pass);
  CHECK(r.fitted_constant <= 1.0 + 1e-12);  // 4x / (1+x)^2 <= 1
}

TEST_CASE("gradient oracles agree with finite differences") {
  const auto triple = FunctionalSpec::rough_path_triple(make_uniform_grid(1.0, 32), 2, 0.4, 8, 24);
  const auto rde = FunctionalSpec::rde_endpoint(make_uniform_grid(1.0, 48), 2.5, 1.0);
  for (const auto* spec : {&triple, &rde}) {
    const auto v = validate_gradient(*spec, 11);
    CHECK(v.checks == 80);
    CHECK(v.worst < kGradientTolerance);
    CHECK(v.pass);
  }
  const auto poly = default_polynomial();
  CHECK(validate_gradient(poly, 12).pass);
  // A unit step is far outside the linear regime of a cubic.
  CHECK_FALSE(validate_gradient(poly, 12, 4, 4, 1.0).pass);
}

TEST_CASE("rough-path triple matches the lifted signature") {
  const auto spec = FunctionalSpec::rough_path_triple(make_uniform_grid(1.0, 16), 3, 0.3, 2, 13);
  const GaussianSampler s(DriverSpec::brownian(3), spec.grid);
  const Path p = s.sample(21, 0);
  std::vector<double> inc;
  for (std::size_t l = 0; l < 16; ++l)
    for (std::size_t k = 0; k < 3; ++k) inc.push_back(p.increment(l, k));
  const auto psi = spec.evaluate(inc);
  const auto sig = lift_piecewise_linear(p).segment(2, 13);
  for (std::size_t k = 0; k < 3; ++k) CHECK(psi[1 + k] == doctest::Approx(sig.level1[k]).epsilon(1e-12));
  for (std::size_t e = 0; e < 9; ++e) CHECK(psi[4 + e] == doctest::Approx(sig.level2[e]).epsilon(1e-10));
  double holder = 0.0;
  for (std::size_t a = 0; a < 17; ++a)
    for (std::size_t b = a + 1; b < 17; ++b) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < 3; ++k) d2 += std::pow(p.at(b, k) - p.at(a, k), 2);
      holder = std::max(holder, std::sqrt(d2) / std::pow((*spec.grid)[b] - (*spec.grid)[a], 0.3));
    }
  CHECK(psi[0] == doctest::Approx(holder).epsilon(1e-12));
}

TEST_CASE("stated constants hold on all three examples") {
  const auto triple = FunctionalSpec::rough_path_triple(make_uniform_grid(1.0, 32), 2, 0.4, 8, 24);
  const auto rde = FunctionalSpec::rde_endpoint(make_uniform_grid(1.0, 32), 2.5, 1.0);
  for (const auto* spec : {&triple, &rde}) {
    const auto r = check_gradient_bound(*spec, stated_weight(*spec), 500, 31);
    CHECK(r.fraction == 1.0);
    CHECK(r.fitted_constant <= r.stated_constant);
  }
  CHECK(check_gradient_bound(default_polynomial(), stated_weight(default_polynomial()), 2000, 32).pass);
}

TEST_CASE("rde endpoint gradient grows with the p-variation") {
  const auto rde = FunctionalSpec::rde_endpoint(make_uniform_grid(1.0, 32), 2.5, 1.0);
  const auto r = check_gradient_bound(rde, stated_weight(rde), 1000, 41);
  CHECK(r.envelope_slope > 0.0);
}

TEST_CASE("serial and parallel sampling agree") {
  const auto spec = FunctionalSpec::rough_path_triple(make_uniform_grid(1.0, 16), 2, 0.4, 0, 16);
  const auto a = draw_samples(spec, 64, 9, false);
  const auto b = draw_samples(spec, 64, 9, true);
  CHECK(a.values == b.values);
  CHECK(a.gradient_norms == b.gradient_norms);
}

TEST_CASE("Gaussian entropy of x^2 against quadrature") {
  const double exact = 2.0 - std::numbers::egamma - std::numbers::ln2;
  const double quad = gaussian_entropy_of_square();
  CHECK(quad == doctest::Approx(exact).epsilon(1e-8));
  RandomStream rng(5, 0);
  std::vector<double> z(100'000);
  rng.fill_normal(z.data(), z.size());
  const auto e = entropy_of_square(z);
  CHECK(std::abs(e.value - quad) < 3.0 * e.sigma);
  // Gross: Ent(x^2) <= 2 E|f'|^2 = 2.
  FunctionalSamples s{1, z, {}};
  const auto rep = check_wlsi(s, WeightSpec::constant(1.0, 1.0), default_test_family(1));
  CHECK(rep.pass);
  CHECK(rep.rows[0].entropy < 2.0);
}

TEST_CASE("entropy estimator: constants, homogeneity, nonnegativity") {
  std::vector<double> c(500, 3.0);
  const auto e0 = entropy_of_square(c);
  CHECK(std::abs(e0.plug_in) < 1e-12);
  CHECK(std::abs(e0.value) < 1e-10);

  RandomStream rng(8, 0);
  std::vector<double> f(2000), f2(2000);
  for (auto& v : f) v = rng.normal() + 0.3 * rng.uniform();
  for (std::size_t i = 0; i < f.size(); ++i) f2[i] = 2.0 * f[i];
  const auto a = entropy_of_square(f), b = entropy_of_square(f2);
  CHECK(b.plug_in == doctest::Approx(4.0 * a.plug_in).epsilon(1e-12));
  CHECK(b.value == doctest::Approx(4.0 * a.value).epsilon(1e-10));
  CHECK(b.sigma == doctest::Approx(4.0 * a.sigma).epsilon(1e-10));

  const auto samples = draw_samples(default_polynomial(), 2000, 13);
  const auto rep = check_wlsi(samples, stated_weight(default_polynomial()), default_test_family(2));
  for (const auto& row : rep.rows)
    if (!row.dropped) CHECK(row.entropy >= -3.0 * row.entropy_sigma);
  CHECK_THROWS_AS(entropy_of_square(std::vector<double>{1.0}), DomainError);
}

TEST_CASE("constant and vanishing test functions") {
  const auto samples = draw_samples(unit_linear(), 500, 2);
  const auto rep = check_wlsi(samples, WeightSpec::constant(1.0, 1.0),
                              {constant_test_function(2.5), constant_test_function(0.0)});
  REQUIRE(rep.rows.size() == 2);
  CHECK_FALSE(rep.rows[0].dropped);
  CHECK(std::abs(rep.rows[0].entropy) < 1e-10);
  CHECK(rep.rows[0].pass);
  CHECK(rep.rows[1].dropped);
  CHECK(rep.pass);
}

TEST_CASE("polynomial example satisfies the weighted inequality") {
  const auto spec = default_polynomial();
  const auto rep = check_wlsi(spec, stated_weight(spec), default_test_family(2), 4000, 17);
  CHECK(rep.pass);
  CHECK(rep.smallest_feasible_constant <= spec.stated_constant());
  // tanh(x1), tanh(2 x1 + .5), tanh(.5 x1 - 1) per coordinate plus one product.
  CHECK(rep.rows.size() == 2 + 6 + 1);
}

TEST_CASE("conditional weight") {
  const auto samples = draw_samples(default_polynomial(), 400, 19);
  const std::vector<double> flat(400, 2.0);
  for (double v : conditional_weight(samples, flat, 0)) CHECK(v == doctest::Approx(2.0));
  std::vector<double> w(400);
  for (std::size_t i = 0; i < 400; ++i) w[i] = stated_weight(default_polynomial()).G(samples.row(i));
  CHECK(conditional_weight(samples, w, 0, 0, false) == conditional_weight(samples, w, 0, 0, true));
  // k = 1 picks the sample itself.
  CHECK(conditional_weight(samples, w, 0, 1) == w);
  const auto marg = marginal_samples(samples, 0);
  CHECK(marg.m == 1);
  CHECK(marg.values[0] == samples.values[1]);
  CHECK_THROWS_AS(marginal_samples(marg, 0), ShapeError);
}

TEST_CASE("marginal of the polynomial example with the conditional weight") {
  const auto spec = default_polynomial();
  const auto samples = draw_samples(spec, 3000, 23);
  const auto weight = stated_weight(spec);
  std::vector<double> w(samples.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = weight.G(samples.row(i));
  const auto g_hat = conditional_weight(samples, w, 1);
  const auto rep = check_wlsi(marginal_samples(samples, 1), g_hat, weight.c, default_test_family(1));
  CHECK(rep.pass);
}

TEST_CASE("Gaussian moment bound against quadrature") {
  const auto samples = draw_samples(unit_linear(), 20'000, 29);
  const std::vector<double> p_grid{2.0, 3.0, 4.0, 6.0};
  const auto rep = check_moment_consequence(samples, WeightSpec::constant(1.0, 1.0), p_grid, default_test_family(1));
  CHECK(rep.pass);
  CHECK(rep.dropped_p.empty());
  for (const auto& row : rep.rows) {
    if (row.name != "x1") continue;
    const double exact = std::pow(gaussian_abs_moment(row.p), 1.0 / row.p);
    CHECK(std::abs(row.lhs - exact) < 3.0 * row.lhs_sigma + 1e-3);
    CHECK(exact <= std::sqrt(row.p - 1.0) + 1e-12);
    CHECK(row.rhs == doctest::Approx(std::sqrt(row.p - 1.0)));
  }
  // Closed form check of the quadrature itself.
  CHECK(gaussian_abs_moment(4.0) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(gaussian_abs_moment(3.0) ==
        doctest::Approx(std::pow(2.0, 1.5) * boost::math::tgamma(2.0) / std::sqrt(std::numbers::pi)).epsilon(1e-10));
}

TEST_CASE("moment bound under a point mass") {
  FunctionalSamples delta{1, std::vector<double>(200, 0.0), {}};
  const std::vector<double> p_grid{2.0, 4.0};
  const auto rep = check_moment_consequence(delta, WeightSpec::constant(1.0, 1.0), p_grid,
                                            {constant_test_function(0.0), default_test_family(1)[0]});
  CHECK(rep.pass);
  for (const auto& row : rep.rows) CHECK(row.lhs == 0.0);
}

TEST_CASE("moment bound on the degree-one polynomial example") {
  const auto spec = unit_linear();
  const auto samples = draw_samples(spec, 10'000, 37);
  const std::vector<double> p_grid{2.0, 4.0};
  const auto rep = check_moment_consequence(samples, stated_weight(spec), p_grid, default_test_family(1));
  CHECK(rep.dropped_p.empty());
  CHECK(rep.pass);
}

TEST_CASE("heavy weights drop moments") {
  const auto spec = default_polynomial();
  const auto samples = draw_samples(spec, 2000, 43);
  const std::vector<double> p_grid{4.0};
  const auto rep = check_moment_consequence(samples, stated_weight(spec), p_grid, default_test_family(2));
  CHECK(rep.dropped_p == p_grid);
  CHECK_FALSE(rep.pass);
}
