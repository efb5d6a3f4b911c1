#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tcilab/rng.hpp"
#include "tcilab/rough_path.hpp"

using namespace tcilab;

namespace {

Path random_path(std::size_t n, std::size_t d, std::uint64_t seed, double horizon = 1.0) {
  auto grid = make_uniform_grid(horizon, n);
  return GaussianSampler(DriverSpec::brownian(d), grid).sample(seed, 0);
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("one-dimensional lift is geometric") {
  Path p = random_path(40, 1, 3);
  auto rp = lift_piecewise_linear(p);
  for (std::size_t i = 0; i < 40; i += 3)
    for (std::size_t j = i; j <= 40; j += 5) {
      auto s = rp.segment(i, j);
      CHECK(s.level2[0] == doctest::Approx(0.5 * s.level1[0] * s.level1[0]).epsilon(1e-12));
    }
}

TEST_CASE("diagonal line has half-ones area") {
  auto grid = make_uniform_grid(1.0, 16);
  Path p(grid, 2);
  for (std::size_t i = 0; i <= 16; ++i) p.at(i, 0) = p.at(i, 1) = (*grid)[i];
  auto s = lift_piecewise_linear(p).segment(0, 16);
  for (double v : s.level2) CHECK(v == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("circle has Levy area pi") {
  const std::size_t n = 2000;
  auto grid = make_uniform_grid(1.0, n);
  Path p(grid, 2);
  for (std::size_t i = 0; i <= n; ++i) {
    p.at(i, 0) = std::cos(2 * std::numbers::pi * (*grid)[i]);
    p.at(i, 1) = std::sin(2 * std::numbers::pi * (*grid)[i]);
  }
  auto s = lift_piecewise_linear(p).segment(0, n);
  const double levy = 0.5 * (s.level2[1] - s.level2[2]);
  // inscribed polygon area (n/2) sin(2 pi / n), O(dt^2) from pi
  CHECK(levy == doctest::Approx(0.5 * n * std::sin(2 * std::numbers::pi / n)).epsilon(1e-12));
  CHECK(std::abs(levy - std::numbers::pi) < 1e-5);
}

TEST_CASE("chen_combine algebra") {
  RandomStream rng(4, 0);
  auto random_segment = [&](double a, double b) {
    Segment s{a, b, Signature2(3)};
    for (double& v : s.sig.level1) v = rng.normal();
    for (double& v : s.sig.level2) v = rng.normal();
    return s;
  };
  auto a = random_segment(0.0, 0.3), b = random_segment(0.3, 0.5), c = random_segment(0.5, 1.0);
  auto left = chen_combine(chen_combine(a, b), c);
  auto right = chen_combine(a, chen_combine(b, c));
  CHECK(max_diff(left.sig.level1, right.sig.level1) < 1e-14);
  CHECK(max_diff(left.sig.level2, right.sig.level2) < 1e-14);

  Segment trivial{0.3, 0.3, Signature2(3)};
  auto same = chen_combine(a, trivial);
  CHECK(same.sig.level1 == a.sig.level1);
  CHECK(same.sig.level2 == a.sig.level2);
  CHECK_THROWS_AS(chen_combine(a, c), ContractError);
}

TEST_CASE("chen reconstruction and geometricity on random paths") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::size_t d = 1 + seed % 3;
    Path p = random_path(64, d, seed);
    auto rp = lift_piecewise_linear(p);
    for (std::size_t i = 0; i < 64; i += 7)
      for (std::size_t j = i; j <= 64; j += 9) {
        auto direct = rp.segment(i, j);
        auto chain = rp.segment_by_chain(i, j);
        CHECK(max_diff(direct.level1, chain.level1) < 1e-12);
        CHECK(max_diff(direct.level2, chain.level2) < 1e-12);
        for (std::size_t a = 0; a < d; ++a)
          for (std::size_t b = 0; b < d; ++b) {
            const double sym = 0.5 * (direct.level2[a * d + b] + direct.level2[b * d + a]);
            CHECK(std::abs(sym - 0.5 * direct.level1[a] * direct.level1[b]) < 1e-10);
          }
      }
  }
}

TEST_CASE("p-variation of the identity path") {
  // X_t = t, XX = t^2/2, p = 1: the single interval wins, T + T^2/2.
  const double horizon = 2.0;
  auto grid = make_uniform_grid(horizon, 8);
  Path p(grid, 1);
  for (std::size_t i = 0; i <= 8; ++i) p.at(i, 0) = (*grid)[i];
  auto rp = lift_piecewise_linear(p);
  auto r = p_var_norm(rp, 1.0);
  CHECK(r.value == doctest::Approx(horizon + 0.5 * horizon * horizon).epsilon(1e-14));
  CHECK(r.partition == std::vector<std::size_t>{0, 8});
  CHECK(p_var_norm(rp, 1.0, PVarMode::Exhaustive).value == doctest::Approx(r.value).epsilon(1e-14));
}

TEST_CASE("p-variation modes agree with exhaustive enumeration on small grids") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 4 + seed % 7;
    auto rp = lift_piecewise_linear(random_path(n, 2, 100 + seed));
    for (double p : {1.0, 1.7, 2.2, 2.9}) {
      const double brute = p_var_norm(rp, p, PVarMode::Exhaustive).value;
      const auto exact = p_var_norm(rp, p, PVarMode::Exact);
      const double heur = p_var_norm(rp, p, PVarMode::Heuristic).value;
      CHECK(exact.value == doctest::Approx(brute).epsilon(1e-12));
      CHECK(heur <= brute * (1 + 1e-12));
      std::vector<std::size_t> full(n + 1);
      for (std::size_t i = 0; i <= n; ++i) full[i] = i;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += std::pow(rp.segment(i, i + 1).norm_weight(), p);
      CHECK(heur >= std::pow(s, 1.0 / p) * (1 - 1e-12));
      CHECK(exact.partition.front() == 0);
      CHECK(exact.partition.back() == n);
    }
  }
}

TEST_CASE("p-variation edge cases and monotonicity in 1/p") {
  auto grid = make_uniform_grid(1.0, 10);
  auto zero = lift_piecewise_linear(Path(grid, 2));
  CHECK(p_var_norm(zero, 2.0).value == 0.0);
  CHECK_THROWS_AS(p_var_norm(zero, 3.0), DomainError);
  CHECK_THROWS_AS(p_var_norm(zero, 0.9), DomainError);

  auto rp = lift_piecewise_linear(random_path(100, 2, 8));
  double last = std::numeric_limits<double>::infinity();
  for (double p : {1.0, 1.3, 1.8, 2.1, 2.5, 2.99}) {
    const double v = p_var_norm(rp, p).value;
    CHECK(v <= last * (1 + 1e-12));
    last = v;
  }
}

TEST_CASE("p-variation distance") {
  auto a = lift_piecewise_linear(random_path(30, 2, 1));
  auto b = lift_piecewise_linear(random_path(30, 2, 2));
  auto c = lift_piecewise_linear(random_path(30, 2, 3));
  auto zero = lift_piecewise_linear(Path(a.grid(), 2));
  CHECK(pvar_distance(a, a, 2.5) == 0.0);
  CHECK(pvar_distance(a, zero, 2.5) == doctest::Approx(p_var_norm(a, 2.5).value).epsilon(1e-13));
  CHECK(pvar_distance(a, b, 2.5) == doctest::Approx(pvar_distance(b, a, 2.5)).epsilon(1e-13));
  for (double p : {1.0, 2.0, 2.7})
    CHECK(pvar_distance(a, c, p) <= pvar_distance(a, b, p) + pvar_distance(b, c, p) + 1e-12);
  auto other = lift_piecewise_linear(random_path(30, 3, 2));
  CHECK_THROWS_AS(pvar_distance(a, other, 2.0), ShapeError);
}

TEST_CASE("translation") {
  Path p = random_path(50, 2, 21);
  auto rp = lift_piecewise_linear(p);
  auto spec = DriverSpec::brownian(2);
  std::vector<double> v1(p.values.size()), v2(p.values.size());
  for (std::size_t i = 0; i < v1.size(); ++i) {
    v1[i] = std::sin(0.1 * i);
    v2[i] = 1.0 - 0.02 * i;
  }
  auto h1 = make_shift(spec, p.grid, v1);
  auto h2 = make_shift(spec, p.grid, v2);

  auto same = translate(rp, zero_shift(spec, p.grid));
  CHECK(same.increments() == rp.increments());
  CHECK(same.areas() == rp.areas());

  auto back = translate(translate(rp, h1), h1.scaled(-1.0));
  CHECK(max_diff(back.areas(), rp.areas()) < 1e-12);
  CHECK(max_diff(back.increments(), rp.increments()) < 1e-12);

  auto composed = translate(translate(rp, h2), h1);
  auto summed = translate(rp, add_shifts(h1, h2));
  CHECK(max_diff(composed.areas(), summed.areas()) < 1e-10);

  // the lift of the shifted path is the translated lift
  auto direct = lift_piecewise_linear(shift_path(p, h1));
  auto translated = translate(rp, h1);
  CHECK(max_diff(direct.areas(), translated.areas()) < 1e-12);
  CHECK(max_diff(direct.increments(), translated.increments()) < 1e-12);

  auto other = make_uniform_grid(1.0, 49);
  CHECK_THROWS_AS(translate(rp, zero_shift(spec, other)), ShapeError);
}

TEST_CASE("smooth translation approximates the lift of the smooth shifted path") {
  // X_t = (sin t, cos 2t), h = (1, t): lift on a fine grid vs translated coarse lift
  auto fine_grid = make_uniform_grid(1.0, 4096);
  auto coarse_grid = make_uniform_grid(1.0, 64);
  auto make = [](const GridPtr& g, bool shifted) {
    Path p(g, 2);
    for (std::size_t i = 0; i < g->size(); ++i) {
      const double t = (*g)[i];
      p.at(i, 0) = std::sin(t) + (shifted ? t : 0.0);
      p.at(i, 1) = std::cos(2 * t) + (shifted ? 0.5 * t * t : 0.0);
    }
    return p;
  };
  auto reference = lift_piecewise_linear(make(fine_grid, true)).segment(0, 4096);
  std::vector<double> ctrl(coarse_grid->size() * 2);
  for (std::size_t i = 0; i < coarse_grid->size(); ++i) {
    ctrl[2 * i] = 1.0;
    ctrl[2 * i + 1] = (*coarse_grid)[i];
  }
  auto tr = translate(lift_piecewise_linear(make(coarse_grid, false)),
                      make_shift(DriverSpec::brownian(2), coarse_grid, ctrl));
  auto s = tr.segment(0, 64);
  CHECK(max_diff(s.level2, reference.level2) < 1.0 / 64);
}

TEST_CASE("parallel batch kernels match serial references") {
  auto grid = make_uniform_grid(1.0, 40);
  auto paths = GaussianSampler(DriverSpec::brownian(2), grid).sample_batch(5, 0, 24);
  auto a = lift_batch(paths);
  auto b = lift_batch_serial(paths);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].areas() == b[i].areas());
  CHECK(p_var_batch(a, 2.2) == p_var_batch_serial(b, 2.2));
}

TEST_CASE("level-1 path p-variation") {
  auto grid = make_uniform_grid(1.0, 6);
  Path p(grid, 1, {0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0});
  // p = 1: total variation 6; p = 2: every unit step counts, sqrt(6)
  CHECK(path_p_var(p, 1.0).value == doctest::Approx(6.0));
  CHECK(path_p_var(p, 2.0).value == doctest::Approx(std::sqrt(6.0)));
  Path q(grid, 1);
  CHECK(path_pvar_distance(p, q, 2.0) == doctest::Approx(std::sqrt(6.0)));
}
