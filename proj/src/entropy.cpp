#include "rwre/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

void require_periodic(const Environment& env, const char* what) {
  if (!env.periodic()) throw ValidationError(fmt::format("{} needs a periodic environment", what));
}

void require_shape(const Environment& env, std::span<const double> q, std::span<const double> phi) {
  if (q.size() != env.num_sites() * static_cast<std::size_t>(env.num_dirs()) || phi.size() != env.num_sites())
    throw CellMismatch("kernel/density shape does not match the cell");
}

// flow[x] = sum_{y,e : y+e = x} q(y,e) phi(y)
void push_forward(const Environment& env, std::span<const double> q, std::span<const double> phi,
                  std::vector<double>& flow) {
  const Lattice& lat = env.lattice();
  const auto nd = static_cast<std::size_t>(env.num_dirs());
  flow.assign(lat.size(), 0.0);
  for (std::size_t y = 0; y < lat.size(); ++y)
    for (std::size_t e = 0; e < nd; ++e)
      flow[static_cast<std::size_t>(lat.neighbor(y, Direction{static_cast<int>(e)}))] += q[y * nd + e] * phi[y];
}

void softmax_rows(std::span<const double> logits, std::size_t nd, std::vector<double>& q) {
  q.resize(logits.size());
  for (std::size_t base = 0; base < logits.size(); base += nd) {
    const double top = *std::max_element(logits.begin() + static_cast<std::ptrdiff_t>(base),
                                         logits.begin() + static_cast<std::ptrdiff_t>(base + nd));
    double sum = 0.0;
    for (std::size_t e = 0; e < nd; ++e) sum += (q[base + e] = std::exp(logits[base + e] - top));
    for (std::size_t e = 0; e < nd; ++e) q[base + e] /= sum;
  }
}

// Per-site expected reward sum_e q [<lambda,e> - log(q/p)].
std::vector<double> site_rewards(const Environment& env, std::span<const double> lambda, std::span<const double> q) {
  const auto nd = static_cast<std::size_t>(env.num_dirs());
  std::vector<double> r(env.num_sites(), 0.0);
  for (std::size_t x = 0; x < env.num_sites(); ++x)
    for (std::size_t e = 0; e < nd; ++e) {
      const Direction dir{static_cast<int>(e)};
      const double qe = q[x * nd + e];
      r[x] += qe * (tilt_dot(lambda, dir) - std::log(qe / env.prob(x, dir)));
    }
  return r;
}

double average_reward(std::span<const double> phi, std::span<const double> reward) {
  double s = 0.0;
  for (std::size_t x = 0; x < phi.size(); ++x) s += phi[x] * reward[x];
  return s / static_cast<double>(phi.size());
}

// Bias V (V(0) = 0) of the average-reward chain: V(x) + g = r(x) + sum_e q(x,e) V(x+e).
std::vector<double> bias_function(const Environment& env, std::span<const double> q, std::span<const double> reward) {
  const Lattice& lat = env.lattice();
  const auto n = static_cast<Eigen::Index>(lat.size());
  const auto nd = static_cast<std::size_t>(env.num_dirs());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index x = 0; x < n; ++x) {
    const auto xs = static_cast<std::size_t>(x);
    if (x != 0) a(x, x - 1) += 1.0;
    for (std::size_t e = 0; e < nd; ++e) {
      const auto y = lat.neighbor(xs, Direction{static_cast<int>(e)});
      if (y != 0) a(x, static_cast<Eigen::Index>(y) - 1) -= q[xs * nd + e];
    }
    a(x, n - 1) = 1.0;
    b(x) = reward[xs];
  }
  const Eigen::VectorXd sol = a.fullPivLu().solve(b);
  std::vector<double> v(lat.size(), 0.0);
  for (Eigen::Index x = 1; x < n; ++x) v[static_cast<std::size_t>(x)] = sol(x - 1);
  return v;
}

}  // namespace

double invariance_residual(const Environment& env, std::span<const double> q, std::span<const double> phi) {
  require_periodic(env, "invariance_residual");
  require_shape(env, q, phi);
  std::vector<double> flow;
  push_forward(env, q, phi, flow);
  double worst = 0.0;
  for (std::size_t x = 0; x < phi.size(); ++x) worst = std::max(worst, std::abs(phi[x] - flow[x]));
  return worst;
}

std::vector<double> invariant_density(const Environment& env, std::span<const double> q, double tol, long max_iters) {
  require_periodic(env, "invariant_density");
  const std::size_t n = env.num_sites();
  std::vector<double> phi(n, 1.0), flow;
  require_shape(env, q, phi);
  for (long it = 0; it < max_iters; ++it) {
    push_forward(env, q, phi, flow);
    double worst = 0.0;
    for (std::size_t x = 0; x < n; ++x) worst = std::max(worst, std::abs(phi[x] - flow[x]));
    if (worst < tol) return phi;
    double total = 0.0;
    for (std::size_t x = 0; x < n; ++x) total += (phi[x] = 0.5 * (phi[x] + flow[x]));
    const double scale = static_cast<double>(n) / total;
    for (double& v : phi) v *= scale;
  }
  throw NoConvergence("invariant density power iteration", max_iters);
}

double gamma_objective(const Environment& env, std::span<const double> lambda, const KernelDensityPair& pair,
                       double tol) {
  const double residual = invariance_residual(env, pair.q, pair.phi);
  if (residual > tol) throw NotInvariant(fmt::format("invariance residual {:.3e} exceeds {:.1e}", residual, tol));
  return average_reward(pair.phi, site_rewards(env, lambda, pair.q));
}

GammaResult gamma_lower(const Environment& env, std::span<const double> lambda, const GammaOptions& opts) {
  require_periodic(env, "gamma_lower");
  if (static_cast<int>(lambda.size()) != env.dimension()) throw ValidationError("lambda has wrong dimension");
  if (opts.restarts < 1) throw ValidationError("restarts must be at least 1");
  const Lattice& lat = env.lattice();
  const auto nd = static_cast<std::size_t>(env.num_dirs());
  const std::size_t n = lat.size();

  std::vector<double> log_p(n * nd);
  for (std::size_t i = 0; i < log_p.size(); ++i) log_p[i] = std::log(env.probs()[i]);

  struct Candidate {
    double value;
    double stationarity;
    std::vector<double> q, phi;
    long iterations;
  };
  std::vector<Candidate> found;

  for (int restart = 0; restart < opts.restarts; ++restart) {
    std::vector<double> logits = log_p;
    if (restart > 0) {
      CounterRng rng(opts.seed, static_cast<std::uint64_t>(restart));
      std::normal_distribution<double> noise(0.0, 1.0);
      for (double& l : logits) l += noise(rng);
    }
    std::vector<double> q, phi, target_logits(n * nd), trial_logits(n * nd), trial_q, target_q;
    softmax_rows(logits, nd, q);
    phi = invariant_density(env, q);
    double value = average_reward(phi, site_rewards(env, lambda, q));
    double stationarity = 1.0;
    long it = 0;
    for (; it < opts.max_iters; ++it) {
      // Soft improvement: q* = softmax(log p + <lambda,e> + V(x+e)).
      const auto v = bias_function(env, q, site_rewards(env, lambda, q));
      for (std::size_t x = 0; x < n; ++x)
        for (std::size_t e = 0; e < nd; ++e) {
          const Direction dir{static_cast<int>(e)};
          target_logits[x * nd + e] =
              log_p[x * nd + e] + tilt_dot(lambda, dir) + v[static_cast<std::size_t>(lat.neighbor(x, dir))];
        }
      softmax_rows(target_logits, nd, target_q);
      stationarity = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) stationarity = std::max(stationarity, std::abs(target_q[i] - q[i]));
      if (stationarity < opts.stationarity_tol) break;

      bool improved = false;
      for (double t = 1.0; t > 1e-6; t *= 0.5) {
        for (std::size_t i = 0; i < logits.size(); ++i)
          trial_logits[i] = logits[i] + t * (target_logits[i] - logits[i]);
        softmax_rows(trial_logits, nd, trial_q);
        auto trial_phi = invariant_density(env, trial_q);
        const double trial_value = average_reward(trial_phi, site_rewards(env, lambda, trial_q));
        if (trial_value > value) {
          logits.swap(trial_logits);
          q.swap(trial_q);
          phi = std::move(trial_phi);
          value = trial_value;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    found.push_back({value, stationarity, std::move(q), std::move(phi), it});
  }

  std::size_t best = 0;
  long total_iterations = 0;
  for (std::size_t r = 0; r < found.size(); ++r) {
    total_iterations += found[r].iterations;
    if (found[r].value > found[best].value) best = r;
  }
  auto& winner = found[best];
  if (winner.stationarity > opts.stall_tol)
    throw NoConvergence(fmt::format("gamma_lower stationarity {:.3e}", winner.stationarity), total_iterations);

  GammaResult res;
  res.lambda.assign(lambda.begin(), lambda.end());
  res.value = winner.value;
  res.invariance_residual = invariance_residual(env, winner.q, winner.phi);
  res.argmax = KernelDensityPair{std::move(winner.q), std::move(winner.phi)};
  res.best_restart = static_cast<int>(best);
  res.iterations = total_iterations;
  if (res.invariance_residual > opts.tol)
    throw NoConvergence(fmt::format("gamma_lower invariance residual {:.3e}", res.invariance_residual), total_iterations);
  return res;
}

std::vector<double> softmax_kernel(std::span<const double> lambda, std::span<const double> nu) {
  if (nu.size() != 2 * lambda.size()) throw ValidationError("nu must have 2d entries");
  std::vector<double> logits(nu.size());
  for (std::size_t e = 0; e < nu.size(); ++e) logits[e] = tilt_dot(lambda, Direction{static_cast<int>(e)}) + nu[e];
  std::vector<double> q;
  softmax_rows(logits, nu.size(), q);
  return q;
}

double softmax_objective(std::span<const double> lambda, std::span<const double> nu, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t e = 0; e < q.size(); ++e)
    s += (tilt_dot(lambda, Direction{static_cast<int>(e)}) - std::log(q[e]) + nu[e]) * q[e];
  return s;
}

double softmax_log_partition(std::span<const double> lambda, std::span<const double> nu) {
  double top = -std::numeric_limits<double>::infinity();
  std::vector<double> t(nu.size());
  for (std::size_t e = 0; e < nu.size(); ++e) {
    t[e] = tilt_dot(lambda, Direction{static_cast<int>(e)}) + nu[e];
    top = std::max(top, t[e]);
  }
  double sum = 0.0;
  for (double v : t) sum += std::exp(v - top);
  return top + std::log(sum);
}

std::vector<double> lln_velocity(const Environment& env) {
  require_periodic(env, "lln_velocity");
  const auto phi = invariant_density(env, env.probs());
  const auto d = static_cast<std::size_t>(env.dimension());
  std::vector<double> v(d, 0.0);
  for (std::size_t x = 0; x < env.num_sites(); ++x)
    for (std::size_t a = 0; a < d; ++a) {
      const auto axis = static_cast<int>(a);
      v[a] += phi[x] * (env.prob(x, Direction::positive(axis)) - env.prob(x, Direction::negative(axis)));
    }
  for (double& c : v) c /= static_cast<double>(env.num_sites());
  return v;
}

}  // namespace rwre
