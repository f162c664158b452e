#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "rwre/corrector_diag.hpp"
#include "rwre/error.hpp"
#include "rwre/rate.hpp"
#include "rwre/rng.hpp"
#include "support.hpp"

using namespace rwre;
using namespace rwre::testing;

namespace {

struct Potential {
  Corrector c;
  double sup = 0.0;
};

Potential random_potential(std::vector<int> cell, std::uint64_t seed, double amp = 1.0) {
  auto lat = std::make_shared<const Lattice>(Lattice::torus(std::move(cell)));
  auto phi = uniform_vector(lat->size(), -amp, amp, seed);
  double sup = 0.0;
  for (double v : phi) sup = std::max(sup, std::abs(v));
  return {Corrector(lat, std::move(phi)), sup};
}

std::shared_ptr<const EdgeField> periodic(const Corrector& c) {
  return std::make_shared<PeriodicEdgeField>(PeriodicEdgeField::from_corrector(c));
}

std::shared_ptr<const EdgeField> linear_box(int radius) {
  auto lat = std::make_shared<const Lattice>(Lattice::ball(2, radius));
  std::vector<double> phi(lat->size());
  for (std::size_t s = 0; s < lat->size(); ++s) phi[s] = lat->coords(s)[0] + 2.0 * lat->coords(s)[1];
  return std::make_shared<BoxEdgeField>(BoxEdgeField::from_corrector(Corrector(lat, std::move(phi))));
}

}  // namespace

TEST_CASE("interpolation examples") {
  auto lat = std::make_shared<const Lattice>(Lattice::torus({2}));
  PathSumField f1(periodic(Corrector(lat, {0.0, 4.0})));
  CHECK(f1.at(std::vector<int>{1}) == 4.0);
  CHECK(interpolate(f1, std::vector<double>{0.5}) == doctest::Approx(2.0).epsilon(1e-15));

  PathSumField f2(linear_box(3));
  CHECK(f2.at(std::vector<int>{1, 1}) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(interpolate(f2, std::vector<double>{0.5, 0.5}) == doctest::Approx(1.5).epsilon(1e-15));
  // multilinear interpolation of a linear function is exact
  CHECK(interpolate(f2, std::vector<double>{-0.3, 1.7}) == doctest::Approx(-0.3 + 3.4).epsilon(1e-14));
}

TEST_CASE("weights") {
  CounterRng rng(3, 0);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> t{20 * rng.uniform() - 10, 20 * rng.uniform() - 10};
    const auto w = interpolation_weights(t);
    CHECK(w.size() == 4);
    double s = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-15);
  }
  const auto w = interpolation_weights(std::vector<double>{-2.0, 3.0});
  CHECK(w[0] == 1.0);
}

TEST_CASE("path independence") {
  const auto p = random_potential({3, 4}, 5, 2.0);
  const auto field = periodic(p.c);
  const auto& lat = p.c.lattice();
  const auto phi_at = [&](std::span<const int> z) { return p.c.phi(*lat.index_of(z)); };
  const std::vector<int> swap{1, 0};
  CounterRng rng(9, 0);
  for (int i = 0; i < 200; ++i) {
    const std::vector<int> z{static_cast<int>(rng() % 21) - 10, static_cast<int>(rng() % 21) - 10};
    const double expect = phi_at(z) - p.c.phi(0);
    CHECK(std::abs(path_sum(*field, z) - expect) <= 1e-12);
    CHECK(std::abs(path_sum(*field, z, swap) - expect) <= 1e-12);
  }
  // closed random walks
  for (int i = 0; i < 100; ++i) {
    std::vector<Site> path{{0, 0}};
    for (int k = 0; k < 30; ++k) {
      Site next = path.back();
      const auto dir = Direction{static_cast<int>(rng() % 4)};
      next[static_cast<std::size_t>(dir.axis())] += dir.sign();
      path.push_back(next);
    }
    for (int a = 0; a < 2; ++a)
      while (path.back()[static_cast<std::size_t>(a)] != 0) {
        Site next = path.back();
        next[static_cast<std::size_t>(a)] += next[static_cast<std::size_t>(a)] > 0 ? -1 : 1;
        path.push_back(next);
      }
    CHECK(std::abs(path_sum_along(*field, path)) <= 1e-12);
  }
  const std::vector<Site> jump{{0, 0}, {2, 0}};
  CHECK_THROWS_AS(path_sum_along(*field, jump), NotNearestNeighbor);
}

TEST_CASE("class K validation") {
  CHECK_NOTHROW(periodic(random_potential({5}, 1).c)->validate());
  // constant drift: loops close but the mean is not zero
  const PeriodicEdgeField drift({3}, {1, -1, 1, -1, 1, -1});
  CHECK_THROWS_AS(drift.validate(), ClassKViolation);
  auto table = uniform_vector(16, -1, 1, 4);
  CHECK_THROWS_AS(PeriodicEdgeField({2, 2}, table).validate(), ClassKViolation);
  CHECK_THROWS_AS(PeriodicEdgeField({2}, {1, 0, NAN, 0}), ValidationError);
  CHECK_NOTHROW(linear_box(4)->validate());

  PathSumField f(std::make_shared<PeriodicEdgeField>(drift));
  const std::vector<int> ns{8, 16};
  CHECK_THROWS_AS(sublinearity_profile(f, ns, 10, 0), ClassKViolation);
}

TEST_CASE("box reach") {
  PathSumField f(linear_box(3));
  CHECK(f.available(std::vector<int>{2, 1}));
  CHECK_FALSE(f.available(std::vector<int>{3, 1}));
  CHECK_THROWS_AS(f.at(std::vector<int>{3, 1}), OutOfBox);
  CHECK_THROWS_AS(path_sum(f.field(), std::vector<int>{4, 0}), EdgeUndefined);
  CHECK_THROWS_AS(interpolate(f, std::vector<double>{2.5, 0.7}), OutOfBox);
}

TEST_CASE("interpolant is Lipschitz and continuous") {
  const auto p = random_potential({3, 3}, 7, 1.5);
  const auto field = std::make_shared<PeriodicEdgeField>(PeriodicEdgeField::from_corrector(p.c));
  PathSumField f(field);
  f.tabulate(12);
  const double lip = field->sup_norm();
  CounterRng rng(1, 0);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> s{16 * rng.uniform() - 8, 16 * rng.uniform() - 8};
    std::vector<double> t = s;
    t[0] += 2 * rng.uniform() - 1;
    t[1] += 2 * rng.uniform() - 1;
    const double d = std::abs(s[0] - t[0]) + std::abs(s[1] - t[1]);
    CHECK(std::abs(interpolate(f, s) - interpolate(f, t)) <= lip * d + 1e-12);
  }
  for (int k = -5; k <= 5; ++k) {
    const std::vector<double> on{static_cast<double>(k), 0.3}, below{k - 1e-12, 0.3};
    CHECK(std::abs(interpolate(f, on) - interpolate(f, below)) <= 1e-10);
    const std::vector<double> lattice{static_cast<double>(k), -2.0};
    CHECK(interpolate(f, lattice) == f.at(std::vector<int>{k, -2}));
  }
  CHECK(holder_quotient(f, 4, 1.0, 500, 3) <= lip + 1e-12);
}

TEST_CASE("g_n") {
  const auto p = random_potential({7}, 3);
  PathSumField f(periodic(p.c));
  for (int n : {1, 10, 100}) {
    CHECK(g_n(f, n, std::vector<double>{0.0}) == 0.0);
    for (double s : linspace(-1, 1, 41)) CHECK(std::abs(g_n(f, n, std::vector<double>{s})) <= 2 * p.sup / n + 1e-15);
  }
}

TEST_CASE("sublinearity profile in one dimension") {
  const auto p = random_potential({7}, 11);
  PathSumField f(periodic(p.c));
  const std::vector<int> ns{8, 16, 32, 64, 128, 256, 512};
  const auto rows = sublinearity_profile(f, ns, 0, 0);
  REQUIRE(rows.size() == ns.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].exact);
    CHECK(rows[i].sup_value <= 2 * p.sup / rows[i].n + 1e-15);
    if (i > 0) CHECK(rows[i].sup_value < rows[i - 1].sup_value);
  }
  CHECK(rows.back().sup_value < rows.front().sup_value / 4);
  // brute force sup for n = 8
  double sup = 0.0;
  for (int z = -8; z <= 8; ++z) sup = std::max(sup, std::abs(path_sum(f.field(), std::vector<int>{z})));
  CHECK(rows[0].sup_value == doctest::Approx(sup / 8).epsilon(1e-14));

  PathSumField zero(periodic(Corrector(std::make_shared<const Lattice>(Lattice::torus({3})), {0, 0, 0})));
  for (const auto& r : sublinearity_profile(zero, ns, 0, 0)) CHECK(r.sup_value == 0.0);
}

TEST_CASE("sublinearity profile in two dimensions") {
  const auto p = random_potential({5, 3}, 2);
  PathSumField f(periodic(p.c));
  const std::vector<int> ns{8, 32, 64, 128, 256};
  const auto rows = sublinearity_profile(f, ns, 64, 17);
  for (const auto& r : rows) {
    CHECK(r.exact == (r.n <= kExactShellLimit));
    CHECK(r.sup_value <= 2 * p.sup / r.n + 1e-15);
  }
  CHECK(rows.back().sup_value < rows.front().sup_value / 4);
  PathSumField g(periodic(p.c));
  const auto again = sublinearity_profile(g, ns, 64, 17);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(again[i].sup_value == rows[i].sup_value);
    CHECK(again[i].samples == rows[i].samples);
  }
  PathSumField h(periodic(random_potential({2, 2, 2}, 1).c));
  CHECK_THROWS_AS(sublinearity_profile(h, ns, 4, 0), ValidationError);
}
