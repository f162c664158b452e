#include "rwre/variational.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"

namespace rwre {

namespace {

void require_periodic(const Environment& env, const char* what) {
  if (!env.periodic()) throw ValidationError(fmt::format("{} needs a periodic environment", what));
}

bool interior_site(const Lattice& lat, std::size_t x) {
  if (lat.periodic()) return true;
  return l1_norm(lat.coords(x)) <= lat.radius() - 1;
}

double log_sum_exp(std::span<const double> v) {
  const double top = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double t : v) sum += std::exp(t - top);
  return top + std::log(sum);
}

// Per-site log partitions for a potential vector, plus (optionally) the
// softmax weights pi_x(e) needed for gradients.
struct SiteObjective {
  SiteObjective(const Environment& env, std::span<const double> lambda)
      : env(env), nd(static_cast<std::size_t>(env.num_dirs())), base(tilted_log_weights(env, lambda)) {}

  void evaluate(std::span<const double> phi, std::vector<double>& k, std::vector<double>* pi) const {
    const Lattice& lat = env.lattice();
    k.resize(lat.size());
    if (pi) pi->resize(lat.size() * nd);
    double terms[16];
    for (std::size_t x = 0; x < lat.size(); ++x) {
      for (std::size_t e = 0; e < nd; ++e) {
        const auto y = static_cast<std::size_t>(lat.neighbor(x, Direction{static_cast<int>(e)}));
        terms[e] = base[x * nd + e] + phi[y] - phi[x];
      }
      k[x] = log_sum_exp({terms, nd});
      if (pi)
        for (std::size_t e = 0; e < nd; ++e) (*pi)[x * nd + e] = std::exp(terms[e] - k[x]);
    }
  }

  // grad[y] = sum_x weight[x] * d k_x / d phi(y)
  void gradient(std::span<const double> weight, std::span<const double> pi, std::vector<double>& grad) const {
    const Lattice& lat = env.lattice();
    grad.assign(lat.size(), 0.0);
    for (std::size_t x = 0; x < lat.size(); ++x) {
      if (weight[x] == 0.0) continue;
      for (std::size_t e = 0; e < nd; ++e) {
        const auto y = static_cast<std::size_t>(lat.neighbor(x, Direction{static_cast<int>(e)}));
        const double w = weight[x] * pi[x * nd + e];
        grad[y] += w;
        grad[x] -= w;
      }
    }
    grad[0] = 0.0;  // gauge phi(0) = 0
  }

  const Environment& env;
  std::size_t nd;
  std::vector<double> base;
};

double smoothed_max(std::span<const double> k, double tau, std::vector<double>* weights) {
  const double top = *std::max_element(k.begin(), k.end());
  double sum = 0.0;
  for (double v : k) sum += std::exp((v - top) / tau);
  if (weights) {
    weights->resize(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) (*weights)[i] = std::exp((k[i] - top) / tau) / sum;
  }
  return top + tau * std::log(sum);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Newton on the equalization system k_x(phi) = t with phi(0) = 0, which is the
// optimality condition of the min-max. Damped on the sup-norm residual.
void equalize(const SiteObjective& obj, std::vector<double>& phi, long& iterations) {
  const Lattice& lat = obj.env.lattice();
  const std::size_t n = lat.size(), nd = obj.nd;
  const auto m = static_cast<Eigen::Index>(n);
  std::vector<double> k, pi, trial_phi(n), trial_k;
  obj.evaluate(phi, k, &pi);
  double t = *std::max_element(k.begin(), k.end());
  auto residual = [&](std::span<const double> kk, double tt) {
    double r = 0.0;
    for (double v : kk) r = std::max(r, std::abs(v - tt));
    return r;
  };
  double norm = residual(k, t);
  Eigen::MatrixXd jac(m, m);
  Eigen::VectorXd rhs(m);
  for (int it = 0; it < 100 && norm > 1e-15 * (1.0 + std::abs(t)); ++it) {
    jac.setZero();
    for (std::size_t x = 0; x < n; ++x) {
      const auto row = static_cast<Eigen::Index>(x);
      for (std::size_t e = 0; e < nd; ++e) {
        const auto y = static_cast<std::size_t>(lat.neighbor(x, Direction{static_cast<int>(e)}));
        const double w = pi[x * nd + e];
        if (y > 0) jac(row, static_cast<Eigen::Index>(y) - 1) += w;
        if (x > 0) jac(row, row - 1) -= w;
      }
      jac(row, m - 1) = -1.0;
      rhs(row) = t - k[x];
    }
    const Eigen::VectorXd delta = jac.fullPivLu().solve(rhs);
    ++iterations;
    bool accepted = false;
    for (double step = 1.0; step > 1e-10; step *= 0.5) {
      for (std::size_t y = 1; y < n; ++y) trial_phi[y] = phi[y] + step * delta(static_cast<Eigen::Index>(y) - 1);
      trial_phi[0] = 0.0;
      const double trial_t = t + step * delta(m - 1);
      obj.evaluate(trial_phi, trial_k, nullptr);
      const double trial_norm = residual(trial_k, trial_t);
      if (trial_norm < (1.0 - 1e-4 * step) * norm) {
        phi = trial_phi;
        t = trial_t;
        norm = trial_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    obj.evaluate(phi, k, &pi);
  }
}

}  // namespace

std::vector<double> site_log_partitions(const Environment& env, std::span<const double> lambda,
                                        const Corrector& corrector) {
  corrector.require_compatible(env);
  if (static_cast<int>(lambda.size()) != env.dimension()) throw ValidationError("lambda has wrong dimension");
  const Lattice& lat = env.lattice();
  const auto nd = static_cast<std::size_t>(env.num_dirs());
  std::vector<double> out;
  double terms[16];
  for (std::size_t x = 0; x < lat.size(); ++x) {
    if (!interior_site(lat, x)) continue;
    for (std::size_t e = 0; e < nd; ++e) {
      const Direction dir{static_cast<int>(e)};
      terms[e] = std::log(env.prob(x, dir)) + tilt_dot(lambda, dir) + corrector.edge(x, dir);
    }
    out.push_back(log_sum_exp({terms, nd}));
  }
  return out;
}

double k_objective(const Environment& env, std::span<const double> lambda, const Corrector& corrector) {
  const auto k = site_log_partitions(env, lambda, corrector);
  if (k.empty()) throw BoxTooSmall("box has no interior sites");
  return *std::max_element(k.begin(), k.end());
}

SpectralResult spectral_solve(const Environment& env, std::span<const double> lambda, double tol, long max_iters) {
  require_periodic(env, "spectral_lambda");
  if (!(tol > 0.0)) throw ValidationError("tol must be positive");
  if (static_cast<int>(lambda.size()) != env.dimension()) throw ValidationError("lambda has wrong dimension");
  const Lattice& lat = env.lattice();
  const std::size_t n = lat.size();
  const auto nd = static_cast<std::size_t>(env.num_dirs());

  std::vector<double> w(n * nd);
  double shift = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    double row = 0.0;
    for (std::size_t e = 0; e < nd; ++e) {
      const Direction dir{static_cast<int>(e)};
      w[x * nd + e] = env.prob(x, dir) * std::exp(tilt_dot(lambda, dir));
      row += w[x * nd + e];
    }
    shift = std::max(shift, row);
  }

  std::vector<double> u(n, 1.0), au(n);
  SpectralResult res;
  for (long it = 1; it <= max_iters; ++it) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      double s = 0.0;
      for (std::size_t e = 0; e < nd; ++e)
        s += w[x * nd + e] * u[static_cast<std::size_t>(lat.neighbor(x, Direction{static_cast<int>(e)}))];
      au[x] = s;
      const double r = s / u[x];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (std::log(hi / lo) < tol) {
      res.value = 0.5 * (std::log(lo) + std::log(hi));
      res.lower_ratio = lo;
      res.upper_ratio = hi;
      res.iterations = it;
      const double top = *std::max_element(u.begin(), u.end());
      for (double& v : u) v /= top;
      res.eigenvector = std::move(u);
      return res;
    }
    // A + sI is primitive even when A is bipartite
    double top = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      u[x] = au[x] + shift * u[x];
      top = std::max(top, u[x]);
    }
    for (double& v : u) v /= top;
  }
  throw NoConvergence("spectral power iteration", max_iters);
}

double spectral_lambda(const Environment& env, std::span<const double> lambda, double tol) {
  return spectral_solve(env, lambda, tol).value;
}

LambdaResult variational_lambda(const Environment& env, std::span<const double> lambda,
                                const VariationalOptions& opts) {
  require_periodic(env, "variational_lambda");
  const double target = spectral_lambda(env, lambda);
  const SiteObjective obj(env, lambda);
  const std::size_t n = env.num_sites();

  std::vector<double> phi(n, 0.0), trial(n), k, pi, weights, grad;
  long iterations = 0;

  // Soft-max continuation: minimize tau * log sum_x exp(k_x / tau).
  for (double tau = 1.0; tau > 1e-4 && n > 1; tau /= 4.0) {
    for (int inner = 0; inner < 200; ++inner) {
      obj.evaluate(phi, k, &pi);
      const double f = smoothed_max(k, tau, &weights);
      obj.gradient(weights, pi, grad);
      const double gg = dot(grad, grad);
      if (gg < 1e-24) break;
      ++iterations;
      double step = 1.0;
      for (;;) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = phi[i] - step * grad[i];
        obj.evaluate(trial, k, nullptr);
        if (smoothed_max(k, tau, nullptr) <= f - 1e-4 * step * gg || step < 1e-12) break;
        step *= 0.5;
      }
      phi.swap(trial);
    }
  }

  if (n > 1) {
    for (double& v : phi) v -= phi[0];
    equalize(obj, phi, iterations);
  }

  // Subgradient polishing on the exact max; averaged gradient over the attaining sites.
  std::vector<double> best_phi = phi;
  obj.evaluate(phi, k, &pi);
  double best = *std::max_element(k.begin(), k.end());
  std::vector<double> active(n);
  for (long it = 0; it < opts.max_iters && best - target > opts.tol && n > 1; ++it) {
    obj.evaluate(phi, k, &pi);
    const double f = *std::max_element(k.begin(), k.end());
    if (f < best) {
      best = f;
      best_phi = phi;
      if (best - target <= opts.tol) break;
    }
    std::size_t attained = 0;
    for (std::size_t x = 0; x < n; ++x) {
      active[x] = f - k[x] <= 1e-14 * (1.0 + std::abs(f)) ? 1.0 : 0.0;
      attained += active[x] > 0.0;
    }
    for (double& a : active) a /= static_cast<double>(attained);
    obj.gradient(active, pi, grad);
    const double gg = dot(grad, grad);
    if (gg == 0.0) break;
    ++iterations;
    const double step = opts.oracle_target ? (f - target) / gg : 1.0 / ((it + 1.0) * std::sqrt(gg));
    for (std::size_t i = 0; i < n; ++i) phi[i] -= step * grad[i];
  }
  obj.evaluate(phi, k, nullptr);
  if (const double f = *std::max_element(k.begin(), k.end()); f < best) {
    best = f;
    best_phi = phi;
  }

  LambdaResult res{TiltVector(lambda.begin(), lambda.end()), best,
                   Corrector(env.shared_lattice(), std::move(best_phi)), target, best - target, iterations, opts.tol};
  if (res.gap > opts.tol) throw NoConvergence(fmt::format("variational_lambda gap {:.3e} > tol", res.gap), iterations);
  if (res.gap < -opts.tol)
    throw NumericalError(fmt::format("variational value below the spectral value by {:.3e}", -res.gap));
  res.argmin_potential.check_class_k(1e-11);
  return res;
}

SupermartingaleReport supermartingale_check(const Environment& env, std::span<const double> lambda,
                                            const Corrector& corrector, int n, const McOptions& mc,
                                            double tolerance) {
  corrector.require_compatible(env);
  if (!env.covers_radius(n)) throw BoxTooSmall("environment does not cover radius n");
  const double kf = k_objective(env, lambda, corrector);
  if (!std::isfinite(kf)) throw ValidationError("K(F) is not finite");

  const Lattice& lat = env.lattice();
  const auto nd = static_cast<std::size_t>(env.num_dirs());
  auto logw = tilted_log_weights(env, lambda);
  for (std::size_t x = 0; x < lat.size(); ++x)
    for (std::size_t e = 0; e < nd; ++e)
      if (lat.neighbor(x, Direction{static_cast<int>(e)}) >= 0)
        logw[x * nd + e] += corrector.edge(x, Direction{static_cast<int>(e)});

  SupermartingaleReport rep;
  rep.k_value = kf;
  rep.n = n;
  rep.tolerance = tolerance;
  rep.exact_value = std::exp(log_transfer_power(env, logw, n) - n * kf);
  rep.holds = rep.exact_value <= 1.0 + tolerance;

  if (mc.samples >= 2) {
    const auto d = static_cast<std::size_t>(env.dimension());
    auto values = simulate_walk_values(
        env, n, mc, [&](std::span<const std::size_t> sites, std::span<const int> dirs, std::span<const int> end) {
          double expo = -n * kf;
          for (std::size_t a = 0; a < d; ++a) expo += lambda[a] * end[a];
          for (std::size_t t = 0; t < sites.size(); ++t) expo += corrector.edge(sites[t], Direction{dirs[t]});
          return std::exp(expo);
        });
    const auto count = static_cast<double>(values.size());
    const double mean = pairwise_sum(values) / count;
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
    rep.mc_value = mean;
    rep.mc_stderr = std::sqrt(pairwise_sum(sq) / (count - 1.0) / count);
    rep.samples = values.size();
  }
  return rep;
}

double sum_along_walk(const Corrector& corrector, std::span<const Site> path) {
  if (path.empty()) return 0.0;
  const Lattice& lat = corrector.lattice();
  auto site_of = [&](const Site& x) {
    auto idx = lat.index_of(x);
    if (!idx) throw EdgeUndefined("path leaves the corrector's box");
    return *idx;
  };
  double sum = 0.0, magnitude = 0.0;
  Site step(path.front().size());
  for (std::size_t j = 1; j < path.size(); ++j) {
    for (std::size_t a = 0; a < step.size(); ++a) step[a] = path[j][a] - path[j - 1][a];
    auto dir = direction_of(step);
    if (!dir) throw NotNearestNeighbor(fmt::format("step {} is not a unit step", j));
    const double f = corrector.edge(site_of(path[j - 1]), *dir);
    sum += f;
    magnitude += std::abs(f);
  }
  const double telescoped = corrector.phi(site_of(path.back())) - corrector.phi(site_of(path.front()));
  if (std::abs(sum - telescoped) > 1e-12 * (1.0 + magnitude))
    throw std::logic_error("path sum does not telescope");
  return sum;
}

}  // namespace rwre
