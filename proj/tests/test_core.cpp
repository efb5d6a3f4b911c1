#include <doctest.h>

#include <cmath>
#include <sstream>

#include "tcilab/core.hpp"
#include "tcilab/io.hpp"
#include "tcilab/rng.hpp"

using namespace tcilab;

TEST_CASE("time grid invariants") {
  auto g = TimeGrid::uniform(2.0, 4);
  CHECK(g.steps() == 4);
  CHECK(g[0] == 0.0);
  CHECK(g.horizon() == 2.0);
  CHECK(g.dt(1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(TimeGrid::uniform(1.0, 0), DomainError);
  CHECK_THROWS_AS(TimeGrid::from_points({0.0, 0.5, 0.5, 1.0}), DomainError);
  CHECK_THROWS_AS(TimeGrid::from_points({0.1, 0.5}), DomainError);
  CHECK_THROWS_AS(TimeGrid::from_points({0.0}), DomainError);
}

TEST_CASE("path shape checks") {
  auto g = make_uniform_grid(1.0, 3);
  CHECK_THROWS_AS(Path(g, 2, std::vector<double>(7)), ShapeError);
  Path p(g, 2);
  p.at(3, 1) = 4.0;
  CHECK(p.increment(2, 1) == 4.0);
}

TEST_CASE("philox known-answer vectors") {
  // Reference vectors published with the Random123 library.
  auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(zero[0] == 0x6627e8d5u);
  CHECK(zero[1] == 0xe169c58du);
  CHECK(zero[2] == 0xbc57ac4cu);
  CHECK(zero[3] == 0x9b00dbd8u);
  auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                         {0xffffffffu, 0xffffffffu});
  CHECK(ones[0] == 0x408f276du);
  CHECK(ones[1] == 0x41c83b0eu);
  CHECK(ones[2] == 0xa20bc7c6u);
  CHECK(ones[3] == 0x6d5451fdu);
  auto pi = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                       {0xa4093822u, 0x299f31d0u});
  CHECK(pi[0] == 0xd16cfe09u);
  CHECK(pi[1] == 0x94fdccebu);
  CHECK(pi[2] == 0x5001e420u);
  CHECK(pi[3] == 0x24126ea1u);
}

TEST_CASE("streams are deterministic and distinct") {
  RandomStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs_c |= (x != c.normal());
    differs_d |= (x != d.normal());
  }
  CHECK(differs_c);
  CHECK(differs_d);
}

TEST_CASE("normal moments") {
  RandomStream rng(11, 0);
  const int n = 200000;
  double m1 = 0, m2 = 0, m4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m1 += z;
    m2 += z * z;
    m4 += z * z * z * z;
  }
  m1 /= n;
  m2 /= n;
  m4 /= n;
  CHECK(std::abs(m1) < 4.0 / std::sqrt(n));
  CHECK(std::abs(m2 - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(m4 - 3.0) < 4.0 * std::sqrt(96.0 / n));
  RandomStream u(11, 1);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK((x > 0.0 && x < 1.0));
  }
}

TEST_CASE("csv and binary container round trip") {
  auto g = make_uniform_grid(1.0, 5);
  Path p(g, 2);
  for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = std::sin(0.37 * i) / 3.0;

  std::stringstream csv;
  io::write_path_csv(csv, p);
  CHECK(csv.str().rfind("t,x_1,x_2\n", 0) == 0);
  Path back = io::read_path_csv(csv);
  CHECK(back.values == p.values);
  CHECK(back.grid->points() == g->points());

  io::Container c{p, {{"AREA", {1.0, 2.0, 3.0}}}};
  std::stringstream bin;
  io::write_container(bin, c);
  CHECK(bin.str().substr(0, 4) == "TCIP");
  auto r = io::read_container(bin);
  CHECK(r.path.values == p.values);
  CHECK(r.sections.at("AREA") == std::vector<double>{1.0, 2.0, 3.0});

  std::stringstream bad("XXXX");
  CHECK_THROWS_AS(io::read_container(bad), ShapeError);
}
