// Acceptance runner: one PASS/FAIL line per criterion. With no arguments every
// criterion runs; otherwise only the listed numbers. Exit status 1 if any fails.

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "rwre/corrector_diag.hpp"
#include "rwre/entropy.hpp"
#include "rwre/mgf.hpp"
#include "rwre/one_dim.hpp"
#include "rwre/rate.hpp"
#include "rwre/rng.hpp"
#include "rwre/variational.hpp"

using namespace rwre;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string title;
  double budget_s;
  std::function<Outcome()> body;
};

constexpr std::uint64_t kSeed = 20240611;

Environment random_env(int d, std::vector<int> cell, std::uint64_t seed) {
  CounterRng rng(seed, 0xc0c);
  const double conc = 0.5 + 2.5 * rng.uniform();
  return sample_iid_periodic(d, std::move(cell), seed, DirichletLaw{std::vector<double>(2 * d, conc)});
}

// Cell shape k of a family: d = 1 lengths 3..8, d = 2 shapes up to 4 x 4.
std::vector<int> cell_shape(int d, int k) {
  if (d == 1) return {3 + k % 6};
  return {2 + k % 3, 2 + (k / 3) % 3};
}

std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t seed, std::uint64_t stream) {
  CounterRng rng(seed, stream);
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

std::vector<std::vector<double>> tilt_grid(int d) {
  std::vector<std::vector<double>> out;
  if (d == 1) {
    for (double l : {-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0}) out.push_back({l});
  } else {
    for (double a : {-3.0, -1.0, 1.0, 3.0})
      for (double b : {-3.0, -1.0, 1.0, 3.0}) out.push_back({a, b});
  }
  return out;
}

// Second largest eigenvalue modulus over the largest, dense.
double modulus_ratio(const Environment& env, std::span<const double> lam) {
  const auto n = static_cast<Eigen::Index>(env.num_sites());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t x = 0; x < env.num_sites(); ++x)
    for (int e = 0; e < env.num_dirs(); ++e) {
      const Direction dir{e};
      a(static_cast<Eigen::Index>(x), env.lattice().neighbor(x, dir)) += env.prob(x, dir) * std::exp(tilt_dot(lam, dir));
    }
  Eigen::VectorXd m = a.eigenvalues().cwiseAbs();
  std::sort(m.data(), m.data() + m.size(), std::greater<>());
  // skip the -rho partner of a bipartite cell
  for (Eigen::Index i = 1; i < m.size(); ++i)
    if (m(i) < m(0) * (1 - 1e-9)) return m(i) / m(0);
  return 0.0;
}

// ---------------------------------------------------------------------------

Outcome zero_tilt() {
  double worst_mgf = 0.0, worst_lam = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 2;
    const auto env = random_env(d, cell_shape(d, k / 2), derive_seed(kSeed, 100 + k));
    const std::vector<double> zero(static_cast<std::size_t>(d), 0.0);
    for (int n : {1, 10, 100}) worst_mgf = std::max(worst_mgf, std::abs(exact_mgf(env, zero, n).value));
    worst_lam = std::max(worst_lam, std::abs(variational_lambda(env, zero).value));
  }
  return {worst_mgf <= 1e-12 && worst_lam <= 1e-8,
          fmt::format("20 envs: max |mgf(0,n)| = {:.2e} (tol 1e-12), max |Lambda(0)| = {:.2e} (tol 1e-8)", worst_mgf,
                      worst_lam)};
}

Outcome oracle_equivalence() {
  double worst_var = 0.0, worst_gamma = 0.0;
  int points = 0, mgf_ok = 0;
  std::string first_bad;
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 2;
    const auto env = random_env(d, cell_shape(d, k / 2), derive_seed(kSeed, 200 + k));
    for (const auto& lam : tilt_grid(d)) {
      ++points;
      const double spectral = spectral_lambda(env, lam);
      worst_var = std::max(worst_var, std::abs(variational_lambda(env, lam).value - spectral));
      worst_gamma = std::max(worst_gamma, std::abs(gamma_lower(env, lam, {.seed = kSeed}).value - spectral));
      const double g32 = std::abs(exact_mgf(env, lam, 32).value - spectral);
      const double g256 = std::abs(exact_mgf(env, lam, 256).value - spectral);
      if (g256 < g32)
        ++mgf_ok;
      else if (first_bad.empty())
        first_bad = fmt::format(
            "; first violation env {} (cell {}) lambda {}: gap(256) {:.3e} vs gap(32) {:.3e}, subdominant "
            "modulus ratio {:.5f}, gap(4096) {:.3e}",
            k, fmt::join(env.cell_dims(), "x"), fmt::join(lam, ","), g256, g32, modulus_ratio(env, lam),
            std::abs(exact_mgf(env, lam, 4096).value - spectral));
    }
  }
  return {worst_var <= 1e-6 && worst_gamma <= 1e-4 && mgf_ok == points,
          fmt::format("20 envs, {} tilts: max |var - spectral| = {:.2e} (tol 1e-6), max |gamma - spectral| = {:.2e} "
                      "(tol 1e-4), gap(256) < gap(32) at {}/{}{}",
                      points, worst_var, worst_gamma, mgf_ok, points, first_bad)};
}

Outcome brute_force() {
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 2;
    const int n_max = d == 1 ? 10 : 8;
    const auto seed = derive_seed(kSeed, 300 + k);
    const auto lam = uniform(static_cast<std::size_t>(d), -3, 3, seed, 1);
    const Environment env = k % 4 < 2 ? random_env(d, cell_shape(d, k / 4), seed)
                                      : sample_iid_boxed(d, n_max, seed, DirichletLaw{std::vector<double>(2 * d, 1.0)});
    for (int n = 1; n <= n_max; ++n)
      worst = std::max(worst, std::abs(exact_mgf(env, lam, n).value - brute_force_mgf(env, lam, n).value));
  }
  return {worst <= 1e-10, fmt::format("20 (env, lambda) pairs, n <= 10 (d=1) / 8 (d=2): max diff {:.2e} (tol 1e-10)", worst)};
}

Outcome supermartingale() {
  double worst = -1.0, hom_dev = 0.0;
  int triples = 0;
  const auto run = [&](const Environment& env, std::span<const double> lam, const Corrector& c, bool homogeneous) {
    ++triples;
    for (int n = 1; n <= 20; ++n) {
      const auto rep = supermartingale_check(env, lam, c, n, {0, 0, 1});
      worst = std::max(worst, rep.exact_value);
      if (homogeneous) hom_dev = std::max(hom_dev, std::abs(rep.exact_value - 1.0));
    }
  };
  const auto h1 = make_periodic(1, {1}, {{0.5, 0.5}});
  run(h1, std::vector<double>{1.0}, Corrector::zero(h1), true);
  const auto h2 = make_periodic(2, {1, 1}, {{0.25, 0.25, 0.25, 0.25}});
  run(h2, std::vector<double>{0.7, -1.4}, Corrector::zero(h2), true);
  for (int k = 0; k < 8; ++k) {
    const int d = 1 + k % 2;
    const auto seed = derive_seed(kSeed, 400 + k);
    const auto env = random_env(d, cell_shape(d, k), seed);
    const auto lam = uniform(static_cast<std::size_t>(d), -2, 2, seed, 1);
    if (k < 4) {
      run(env, lam, variational_lambda(env, lam).argmin_potential, false);
    } else {
      auto phi = uniform(env.num_sites(), -1.5, 1.5, seed, 2);
      run(env, lam, Corrector(env.shared_lattice(), std::move(phi)), false);
    }
  }
  return {worst <= 1 + 1e-10 && hom_dev <= 1e-12,
          fmt::format("{} triples (4 optimal, 4 random, 2 homogeneous zero), n = 1..20: max E[S_n] = {:.15f} (tol "
                      "1 + 1e-10), homogeneous |E[S_n] - 1| = {:.2e} (tol 1e-12)",
                      triples, worst, hom_dev)};
}

Outcome homogeneous() {
  const auto env = make_periodic(1, {1}, {{0.5, 0.5}});
  double worst = 0.0;
  for (double l : {0.5, 1.0, 2.0})
    worst = std::max(worst, std::abs(variational_lambda(env, std::vector<double>{l}).value - std::log(std::cosh(l))));
  const auto curve = rate_curve(env, {{-1.0}, {0.0}, {1.0}}, linspace(-6, 6, 201));
  const double i0 = std::abs(curve.values[1]);
  const double ipm = std::max(std::abs(curve.values[0] - std::log(2.0)), std::abs(curve.values[2] - std::log(2.0)));
  return {worst <= 1e-8 && i0 <= 1e-6 && ipm <= 1e-3,
          fmt::format("max |Lambda - log cosh| = {:.2e} (tol 1e-8), |I(0)| = {:.2e} (tol 1e-6), max |I(+-1) - log 2| "
                      "= {:.2e} (tol 1e-3)",
                      worst, i0, ipm)};
}

std::vector<std::pair<std::string, Env1D>> one_dim_envs() {
  return {{"homogeneous p+=0.8", Env1D::from_plus({0.8})},
          {"period 2 (0.8, 0.7)", Env1D::from_plus({0.8, 0.7})},
          {"period 5", Env1D::from_plus({0.6, 0.45, 0.7, 0.3, 0.65})},
          {"period 3", Env1D::from_plus({0.55, 0.35, 0.75})}};
}

Outcome one_dim_equivalence() {
  const auto xs = linspace(-0.9, 0.9, 19);
  bool ok = true;
  std::string detail;
  for (const auto& [name, env] : one_dim_envs()) {
    const auto rep = verify_I_equals_J(env, xs);
    ok = ok && rep.hypotheses.satisfied() && rep.max_gap <= 1e-3;
    detail += fmt::format("{}{}: max |I - J| = {:.2e} at x = {:.2f}", detail.empty() ? "" : "; ", name, rep.max_gap,
                          rep.argmax);
  }
  return {ok, detail + " (tol 1e-3)"};
}

Outcome set_a_witnesses() {
  double identity = 0.0, duality = 0.0;
  int points = 0;
  for (const auto& [name, env] : one_dim_envs()) {
    const double top = std::min(critical_tilt(env), critical_tilt(env, true)) - 1e-3;
    for (double r : linspace(top - 3.0, top, 20)) {
      for (const auto& w : {build_Fg(env, r), build_Fh(env, r)}) {
        ++points;
        identity = std::max({identity, w.identity_residual, w.loop_residual, std::abs(w.mean_plus)});
        const auto s = duality_slack(env, w.theta, w.lam);
        duality = std::max({duality, -s.g_slack, -s.h_slack});
      }
    }
    for (std::uint64_t k = 0; k < 50; ++k) {
      const auto seed = derive_seed(kSeed, 700 + k);
      const auto phi = uniform(env.size(), -1.5, 1.5, seed, 0);
      const auto a = set_a_from_potential(env, uniform(1, -2, 2, seed, 1)[0], phi);
      const auto s = duality_slack(env, a.theta, a.lam);
      duality = std::max({duality, -s.g_slack, -s.h_slack});
    }
  }
  return {identity <= 1e-10 && duality <= 1e-8,
          fmt::format("4 envs x 20 r x (Fg, Fh) = {} witnesses: max identity/loop/mean residual {:.2e} (tol 1e-10); "
                      "max duality violation {:.2e} over witnesses and 200 random members (tol 1e-8)",
                      points, identity, duality)};
}

Outcome sublinearity() {
  const std::vector<int> ns{8, 16, 32, 64, 128, 256, 512};
  bool ok = true;
  std::string detail;
  const auto check = [&](const std::string& name, const Corrector& c) {
    double sup_phi = 0.0;
    for (double v : c.potential()) sup_phi = std::max(sup_phi, std::abs(v));
    PathSumField f(std::make_shared<PeriodicEdgeField>(PeriodicEdgeField::from_corrector(c)));
    const auto rows = sublinearity_profile(f, ns, 256, kSeed);
    double v64 = 0.0, v512 = 0.0;
    bool bounded = true;
    for (const auto& r : rows) {
      bounded = bounded && r.sup_value <= 2 * sup_phi / r.n;
      if (r.n == 64) v64 = r.sup_value;
      if (r.n == 512) v512 = r.sup_value;
    }
    ok = ok && bounded && v512 < v64 / 4;
    detail += fmt::format("{}{}: ratio(512/64) = {:.4f}, bound {}", detail.empty() ? "" : "; ", name, v512 / v64,
                          bounded ? "held" : "VIOLATED");
  };
  const auto potential = [](std::vector<int> cell, std::uint64_t seed) {
    auto lat = std::make_shared<const Lattice>(Lattice::torus(std::move(cell)));
    return Corrector(lat, uniform(lat->size(), -1, 1, seed, 0));
  };
  check("d=1 random cell 7", potential({7}, derive_seed(kSeed, 801)));
  check("d=1 random cell 13", potential({13}, derive_seed(kSeed, 802)));
  const auto e1 = random_env(1, {6}, derive_seed(kSeed, 803));
  check("d=1 optimal corrector", variational_lambda(e1, std::vector<double>{0.7}).argmin_potential);
  check("d=2 random cell 5x3", potential({5, 3}, derive_seed(kSeed, 804)));
  const auto e2 = random_env(2, {4, 4}, derive_seed(kSeed, 805));
  check("d=2 optimal corrector", variational_lambda(e2, std::vector<double>{0.5, -0.3}).argmin_potential);
  return {ok, detail + " (need ratio < 0.25 and sup <= 2|phi|/n)"};
}

// Exact P(|X_n/n - c| <= r) for the symmetric walk.
double symmetric_ball_probability(int n, double c, double r) {
  double p = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = static_cast<double>(2 * k - n) / n;
    if (std::abs(x - c) <= r + 1e-12)
      p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  }
  return p;
}

const std::vector<int> kLdpN{32, 64, 128, 256};
const McOptions kLdpMc{1'000'000, kSeed, 1};

Outcome empirical_ldp_check() {
  const auto env = make_periodic(1, {1}, {{0.5, 0.5}});
  const std::vector<double> center{0.5};
  std::vector<std::vector<double>> xg;
  for (double x : linspace(0.4, 0.6, 41)) xg.push_back({x});
  const auto curve = rate_curve(env, xg, linspace(-6, 6, 201));
  const double inf_i = *std::min_element(curve.values.begin(), curve.values.end());

  const auto pts = empirical_ldp(env, center, 0.1, kLdpN, kLdpMc);
  bool ok = true;
  double prev = std::numeric_limits<double>::infinity();
  std::string rows;
  for (const auto& p : pts) {
    // a zero count is an infinite estimate, never within tolerance
    const double dev = p.censored ? std::numeric_limits<double>::infinity() : std::abs(p.value - inf_i);
    ok = ok && dev <= prev;
    prev = dev;
    const double exact = symmetric_ball_probability(p.n, 0.5, 0.1);
    rows += fmt::format("\n      n={:<4} count={:<7} estimate={} |dev|={}  exact P={:.3e} (expected count {:.2e}, "
                        "exact -(1/n)log P={:.4f})",
                        p.n, p.count, p.censored ? "censored" : fmt::format("{:.4f}", p.value),
                        p.censored ? "inf" : fmt::format("{:.4f}", dev), exact, exact * 1e6, -std::log(exact) / p.n);
  }
  const auto& last = pts.back();
  ok = ok && !last.censored && std::abs(last.value - inf_i) <= 0.1;
  return {ok, fmt::format("inf over ball of I = {:.6f}; n=256 estimate {} (need within 0.1, monotone in n){}", inf_i,
                          last.censored ? "censored (0 hits in 1e6 walks)" : fmt::format("{:.4f}", last.value), rows)};
}

Outcome determinism() {
  const auto env = make_periodic(1, {1}, {{0.5, 0.5}});
  const std::vector<double> center{0.5};
  const auto a = empirical_ldp(env, center, 0.1, kLdpN, kLdpMc);
  const auto b = empirical_ldp(env, center, 0.1, kLdpN, kLdpMc);
  auto mc4 = kLdpMc;
  mc4.workers = 4;
  const auto c = empirical_ldp(env, center, 0.1, kLdpN, mc4);
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i)
    same = same && a[i].count == b[i].count && a[i].count == c[i].count && a[i].value == b[i].value &&
           a[i].value == c[i].value;

  const auto e2 = random_env(2, {3, 3}, derive_seed(kSeed, 1000));
  const std::vector<double> lam{0.4, -0.6};
  const auto m1 = mc_mgf(e2, lam, 50, {200000, kSeed, 1});
  const auto m3 = mc_mgf(e2, lam, 50, {200000, kSeed, 3});
  const auto s1 = supermartingale_check(e2, lam, Corrector::zero(e2), 20, {100000, kSeed, 1});
  const auto s4 = supermartingale_check(e2, lam, Corrector::zero(e2), 20, {100000, kSeed, 4});
  const bool lib = same && m1.value == m3.value && *m1.stderr_log == *m3.stderr_log && *s1.mc_value == *s4.mc_value;

  // manifest replays through the command line front end
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt::format("rwre-acceptance-{}", ::getpid());
  fs::create_directories(dir);
  std::ostringstream sink, err;
  const auto env_path = (dir / "hom.json").string();
  int rc = cli::run({"env-gen", "--dim", "1", "--row", "0.5,0.5", "--out", env_path}, sink, err);
  rc |= cli::run({"ldp-check", "--env", env_path, "--center", "0.5", "--radius", "0.1", "--samples", "1000000",
                  "--seed", std::to_string(kSeed), "--format", "csv", "--out", (dir / "ldp.csv").string()},
                 sink, err);
  rc |= cli::run({"mgf", "--env", env_path, "--lambda", "0.8", "--n", "100", "--method", "mc", "--samples", "100000",
                  "--seed", "7", "--out", (dir / "mgf.json").string()},
                 sink, err);
  int replays = 0, identical = 0;
  for (const char* m : {"ldp.csv.manifest.json", "mgf.json.manifest.json"})
    for (const char* w : {"1", "4"}) {
      ++replays;
      std::ostringstream out;
      identical += cli::run({"replay", "--manifest", (dir / m).string(), "--workers", w}, out, err) == 0;
    }
  fs::remove_all(dir);
  const bool cli_ok = rc == 0 && identical == replays;
  return {lib && cli_ok,
          fmt::format("library: ldp/mgf/supermartingale repeat and workers 1/3/4 {}; manifest replays identical {}/{} "
                      "(workers 1 and 4){}",
                      lib ? "bit-identical" : "DIFFER", identical, replays,
                      err.str().empty() ? "" : "; stderr: " + err.str())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, Criterion> criteria = {
      {1, {"zero-tilt identity", 10, zero_tilt}},
      {2, {"oracle equivalence", 300, oracle_equivalence}},
      {3, {"brute-force equivalence", 120, brute_force}},
      {4, {"supermartingale", 60, supermartingale}},
      {5, {"homogeneous closed form", 30, homogeneous}},
      {6, {"one-dimensional I = J", 300, one_dim_equivalence}},
      {7, {"set A witnesses and duality", 60, set_a_witnesses}},
      {8, {"sublinearity", 120, sublinearity}},
      {9, {"empirical large deviations", 300, empirical_ldp_check}},
      {10, {"determinism", 600, determinism}},
  };
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::stoi(argv[i]));
  if (which.empty())
    for (const auto& kv : criteria) which.push_back(kv.first);

  int failed = 0;
  for (int id : which) {
    const auto& c = criteria.at(id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::cout << fmt::format("criterion {:>2} {}  {}: {} [{:.2f} s, budget {:.0f} s{}]", id, pass ? "PASS" : "FAIL",
                             c.title, o.detail, secs, c.budget_s, in_time ? "" : ", EXCEEDED")
              << std::endl;
  }
  return failed ? 1 : 0;
}
