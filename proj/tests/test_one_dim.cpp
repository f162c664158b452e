#include <cmath>

#include "doctest.h"
#include "rwre/error.hpp"
#include "rwre/one_dim.hpp"
#include "support.hpp"

using namespace rwre;
using namespace rwre::testing;

namespace {

std::size_t mod(long x, std::size_t n) {
  const long m = static_cast<long>(n);
  return static_cast<std::size_t>(((x % m) + m) % m);
}

// E_x[e^{r tau}; tau <= steps] for the passage x -> x+1, by propagating the
// walk's mass on the half line below x + 1.
double passage_by_paths(const Env1D& env, std::size_t x, double r, int steps) {
  std::vector<double> mass(static_cast<std::size_t>(steps) + 2, 0.0), next(mass.size());
  mass[0] = 1.0;  // offset k <-> position x - k
  double total = 0.0;
  for (int k = 1; k <= steps; ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    double absorbed = 0.0;
    for (std::size_t off = 0; off + 1 < mass.size(); ++off) {
      if (mass[off] == 0.0) continue;
      const std::size_t site = mod(static_cast<long>(x) - static_cast<long>(off), env.size());
      if (off == 0)
        absorbed += mass[off] * env.p_plus[site];
      else
        next[off - 1] += mass[off] * env.p_plus[site];
      next[off + 1] += mass[off] * env.p_minus[site];
    }
    total += std::exp(r * k) * absorbed;
    mass.swap(next);
  }
  return total;
}

double homogeneous_G(double p, double r) {
  const double q = 1 - p;
  return (1 - std::sqrt(1 - 4 * p * q * std::exp(2 * r))) / (2 * q * std::exp(r));
}

double cramer(double p, double x) {
  const auto t = [](double u, double v) { return u > 0 ? u * std::log(u / v) : 0.0; };
  return t((1 + x) / 2, p) + t((1 - x) / 2, 1 - p);
}

const Env1D kFive = Env1D::from_plus({0.6, 0.45, 0.7, 0.3, 0.65});

}  // namespace

TEST_CASE("homogeneous passage transforms") {
  const auto e3 = Env1D::from_plus({0.3});
  CHECK(solve_G(e3, 0.0).values[0] == doctest::Approx(0.3 / 0.7).epsilon(1e-12));
  const auto e8 = Env1D::from_plus({0.8});
  const auto h = solve_H(e8, 0.0);
  CHECK(h.convergent);
  CHECK(h.values[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(solve_G(Env1D::from_plus({0.5}), 0.0).values[0] == doctest::Approx(1.0).epsilon(1e-9));
  for (double r : {-2.0, -0.5, 0.0, 0.1, 0.2})
    CHECK(solve_G(e8, r).values[0] == doctest::Approx(homogeneous_G(0.8, r)).epsilon(1e-11));
  CHECK(solve_G(e8, 0.22).convergent);
  CHECK_FALSE(solve_G(e8, 0.2232).convergent);
  CHECK(critical_tilt(e8) == doctest::Approx(-0.5 * std::log(0.64)).epsilon(1e-10));
  CHECK(critical_tilt(e8, true) == doctest::Approx(-0.5 * std::log(0.64)).epsilon(1e-10));
  CHECK_THROWS_AS(g_value(e8, 0.3), Divergent);
}

TEST_CASE("periodic passage transform against path sums") {
  for (double r : {-0.4, 0.0, critical_tilt(kFive) - 0.15}) {
    const auto G = solve_G(kFive, r);
    REQUIRE(G.convergent);
    CHECK(G.monotone);
    CHECK(G.minimal);
    for (std::size_t x = 0; x < kFive.size(); ++x)
      CHECK(std::abs(G.values[x] - passage_by_paths(kFive, x, r, r < -0.1 ? 1000 : 8000)) <= 1e-12);
    // fixed point equation
    for (std::size_t x = 0; x < kFive.size(); ++x) {
      const double prev = G.values[mod(static_cast<long>(x) - 1, kFive.size())];
      const double rhs = kFive.p_plus[x] * std::exp(r) / (1 - kFive.p_minus[x] * std::exp(r) * prev);
      CHECK(std::abs(G.values[x] - rhs) <= 1e-12);
    }
  }
  const auto G0 = solve_G(kFive, 0.0);
  for (double v : G0.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mirror identity") {
  const auto env = Env1D::from_plus({0.55, 0.8, 0.35, 0.6});
  const auto m = env.mirrored();
  CHECK(m.mirrored().p_plus == env.p_plus);
  for (double r : {-1.0, 0.0, 0.01}) {
    const auto H = solve_H(env, r);
    const auto Gm = solve_G(m, r);
    REQUIRE(H.convergent);
    for (std::size_t x = 0; x < env.size(); ++x)
      CHECK(H.values[x] == Gm.values[mod(-static_cast<long>(x), env.size())]);
  }
  CHECK(critical_tilt(env, true) == critical_tilt(m));
}

TEST_CASE("g and h curves") {
  const auto grid = linspace(-3, 0.5, 71);
  const auto c = g_h_curves(kFive, grid);
  CHECK(c.r_crit_g == doctest::Approx(critical_tilt(kFive)).epsilon(1e-7));
  double prev = -1e300;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!c.g_convergent[i]) {
      CHECK(grid[i] > c.r_crit_g - 1e-7);
      CHECK(std::isnan(c.g[i]));
      continue;
    }
    CHECK(c.g[i] >= prev - 1e-14);
    prev = c.g[i];
    if (i >= 1 && i + 1 < grid.size() && c.g_convergent[i + 1])
      CHECK(c.g[i - 1] + c.g[i + 1] - 2 * c.g[i] >= -1e-12);
  }
  CHECK(std::abs(g_value(kFive, 0.0)) <= 1e-10);
  CHECK(h_value(kFive, 0.0) < 0.0);
}

TEST_CASE("J values") {
  const auto e8 = Env1D::from_plus({0.8});
  CHECK(J_rate(e8, 0.5) == doctest::Approx(cramer(0.8, 0.5)).epsilon(1e-8));
  CHECK(J_rate(e8, -0.5) == doctest::Approx(cramer(0.8, -0.5)).epsilon(1e-8));
  CHECK(std::abs(J_rate(e8, 0.6)) <= 1e-8);
  CHECK(J_rate(e8, 0.0) == doctest::Approx(critical_tilt(e8)).epsilon(1e-9));
  const auto e5 = Env1D::from_plus({0.5});
  CHECK(J_rate(e5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(J_rate(e5, -1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK_THROWS_AS(J_rate(e5, 1.2), DomainError);
  const auto p = Env1D::from_plus({0.8, 0.7});
  CHECK(J_rate(p, 0.3) == doctest::Approx(0.02511128).epsilon(1e-6));
}

TEST_CASE("witnesses from passage transforms") {
  for (const auto& env : {Env1D::from_plus({0.8}), Env1D::from_plus({0.8, 0.7}), kFive}) {
    const double rc = critical_tilt(env);
    const double rh = critical_tilt(env, true);
    for (double r : linspace(-3.0, std::min(rc, rh) - 1e-3, 20)) {
      const auto fg = build_Fg(env, r);
      CHECK(fg.identity_residual <= kSetATolerance);
      CHECK(fg.loop_residual <= kSetATolerance);
      CHECK(std::abs(fg.mean_plus) <= kSetATolerance);
      CHECK(fg.theta == doctest::Approx(-g_value(env, r)).epsilon(1e-14));
      CHECK(fg.lam == -r);
      const auto fh = build_Fh(env, r);
      CHECK(fh.identity_residual <= kSetATolerance);
      CHECK(fh.loop_residual <= kSetATolerance);
      CHECK(std::abs(fh.mean_plus) <= kSetATolerance);
      const auto sg = duality_slack(env, fg.theta, fg.lam);
      CHECK(std::abs(sg.g_slack) <= 1e-8);
      CHECK(sg.h_slack >= -1e-8);
      const auto sh = duality_slack(env, fh.theta, fh.lam);
      CHECK(std::abs(sh.h_slack) <= 1e-8);
      CHECK(sh.g_slack >= -1e-8);
    }
    CHECK_THROWS_AS(build_Fg(env, rc + 0.1), Divergent);
  }
  const auto hom = build_Fg(Env1D::from_plus({0.5}), 0.0);
  CHECK(std::abs(hom.theta) <= 1e-12);
  for (double f : hom.f_plus) CHECK(std::abs(f) <= 1e-12);
}

TEST_CASE("duality on arbitrary members") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto phi = uniform_vector(kFive.size(), -1.5, 1.5, seed);
    const double theta = uniform_vector(1, -2, 2, seed, 1)[0];
    const auto a = set_a_from_potential(kFive, theta, phi);
    CHECK(a.excess <= 1e-14);
    CHECK(a.loop_residual <= 1e-14);
    const auto s = duality_slack(kFive, a.theta, a.lam);
    CHECK(s.g_slack >= -1e-8);
    CHECK(s.h_slack >= -1e-8);
  }
}

TEST_CASE("hypotheses and I = J") {
  CHECK(check_cgz_hypotheses(kFive).satisfied());
  CHECK(check_cgz_hypotheses(Env1D::from_plus({0.5})).satisfied());
  CHECK_FALSE(check_cgz_hypotheses(Env1D::from_plus({0.2})).satisfied());
  const auto xs = linspace(-0.9, 0.9, 19);
  const auto rep = verify_I_equals_J(Env1D::from_plus({0.8, 0.7}), xs);
  CHECK(rep.equivalent);
  CHECK(rep.max_gap <= 1e-3);
  const auto left = verify_I_equals_J(Env1D::from_plus({0.2, 0.3}), xs);
  CHECK_FALSE(left.equivalent);
  CHECK_FALSE(left.hypotheses.satisfied());
  CHECK_THROWS_AS(Env1D::from_plus({1.0}), NonPositiveEntry);
  CHECK_THROWS_AS(Env1D::from(random_periodic(2, {2, 2}, 1)), ValidationError);
}
