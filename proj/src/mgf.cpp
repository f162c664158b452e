#include "rwre/mgf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "rwre/error.hpp"
#include "rwre/parallel.hpp"
#include "rwre/rng.hpp"

namespace rwre {

std::string_view to_string(MgfMethod m) {
  switch (m) {
    case MgfMethod::exact_dp: return "exact";
    case MgfMethod::brute_force: return "brute";
    case MgfMethod::monte_carlo: return "mc";
  }
  return "unknown";
}

namespace {

void require_cover(const Environment& env, int n) {
  if (n < 1) throw ValidationError("n must be at least 1");
  if (!env.covers_radius(n))
    throw BoxTooSmall(fmt::format("boxed environment radius {} < n = {}", env.radius(), n));
}

void require_lambda(const Environment& env, std::span<const double> lambda) {
  if (static_cast<int>(lambda.size()) != env.dimension())
    throw ValidationError(fmt::format("lambda has {} components, environment dimension is {}",
                                      lambda.size(), env.dimension()));
  for (double l : lambda)
    if (!std::isfinite(l)) throw ValidationError("lambda must be finite");
}

// Cumulative transition rows for sampling a step.
struct StepSampler {
  explicit StepSampler(const Environment& env) : nd(static_cast<std::size_t>(env.num_dirs())) {
    cumulative.resize(env.num_sites() * nd);
    for (std::size_t s = 0; s < env.num_sites(); ++s) {
      double acc = 0.0;
      for (std::size_t k = 0; k < nd; ++k) {
        acc += env.row(s)[k];
        cumulative[s * nd + k] = acc;
      }
      cumulative[s * nd + nd - 1] = std::numeric_limits<double>::infinity();
    }
  }

  int draw(std::size_t site, double u) const {
    const double* row = cumulative.data() + site * nd;
    std::size_t k = 0;
    while (u >= row[k]) ++k;
    return static_cast<int>(k);
  }

  std::size_t nd;
  std::vector<double> cumulative;
};

std::size_t origin_site(const Environment& env) {
  const Site zero(static_cast<std::size_t>(env.dimension()), 0);
  return *env.lattice().index_of(zero);
}

}  // namespace

std::vector<double> tilted_log_weights(const Environment& env, std::span<const double> lambda) {
  const auto nd = static_cast<std::size_t>(env.num_dirs());
  std::vector<double> logw(env.num_sites() * nd);
  for (std::size_t s = 0; s < env.num_sites(); ++s)
    for (std::size_t k = 0; k < nd; ++k)
      logw[s * nd + k] = std::log(env.row(s)[k]) + tilt_dot(lambda, Direction{static_cast<int>(k)});
  return logw;
}

double log_transfer_power(const Environment& env, std::span<const double> logw, int n) {
  require_cover(env, n);
  const int d = env.dimension();
  const auto nd = static_cast<std::size_t>(2 * d);
  const Lattice ball = Lattice::ball(d, n);
  const std::size_t m = ball.size();

  std::vector<double> lw(m * nd);
  std::vector<int> radius_of(m);
  for (std::size_t b = 0; b < m; ++b) {
    auto x = ball.coords(b);
    radius_of[b] = l1_norm(x);
    const std::size_t site = *env.lattice().index_of(x);
    std::copy_n(logw.begin() + static_cast<std::ptrdiff_t>(site * nd), nd, lw.begin() + static_cast<std::ptrdiff_t>(b * nd));
  }

  std::vector<double> cur(m, 0.0), next(m, 0.0);
  double terms[16];
  for (int j = 1; j <= n; ++j) {
    const int reach = n - j;
    for (std::size_t b = 0; b < m; ++b) {
      if (radius_of[b] > reach) continue;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < nd; ++k) {
        const auto nb = static_cast<std::size_t>(ball.neighbor(b, Direction{static_cast<int>(k)}));
        terms[k] = lw[b * nd + k] + cur[nb];
        top = std::max(top, terms[k]);
      }
      double sum = 0.0;
      for (std::size_t k = 0; k < nd; ++k) sum += std::exp(terms[k] - top);
      next[b] = top + std::log(sum);
    }
    std::swap(cur, next);
  }
  return cur[*ball.index_of(Site(static_cast<std::size_t>(d), 0))];
}

MgfEstimate exact_mgf(const Environment& env, std::span<const double> lambda, int n) {
  require_lambda(env, lambda);
  require_cover(env, n);
  if (env.dimension() > 8) throw TooLarge("exact DP supports d <= 8");
  const auto logw = tilted_log_weights(env, lambda);
  MgfEstimate est;
  est.value = log_transfer_power(env, logw, n) / n;
  est.n = n;
  est.method = MgfMethod::exact_dp;
  return est;
}

MgfEstimate brute_force_mgf(const Environment& env, std::span<const double> lambda, int n) {
  require_lambda(env, lambda);
  const int d = env.dimension();
  const int limit = d == 1 ? 12 : d == 2 ? 8 : static_cast<int>(std::floor(16.0 * std::log(2.0) / std::log(2.0 * d)));
  if (n > limit) throw TooLarge(fmt::format("brute force limited to n <= {} in d = {}", limit, d));
  require_cover(env, n);

  Site x(static_cast<std::size_t>(d), 0);
  double total = 0.0;
  // Depth-first over all (2d)^n paths, carrying the path probability.
  auto visit = [&](auto&& self, int depth, double weight) -> void {
    if (depth == n) {
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += lambda[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
      total += weight * std::exp(dot);
      return;
    }
    for (int k = 0; k < 2 * d; ++k) {
      const Direction dir{k};
      const double p = env.prob_at(x, dir);
      x[static_cast<std::size_t>(dir.axis())] += dir.sign();
      self(self, depth + 1, weight * p);
      x[static_cast<std::size_t>(dir.axis())] -= dir.sign();
    }
  };
  visit(visit, 0, 1.0);

  MgfEstimate est;
  est.value = std::log(total) / n;
  est.n = n;
  est.method = MgfMethod::brute_force;
  return est;
}

std::vector<double> simulate_walk_values(
    const Environment& env, int n, const McOptions& opts,
    const std::function<double(std::span<const std::size_t>, std::span<const int>, std::span<const int>)>& value) {
  require_cover(env, n);
  const StepSampler sampler(env);
  const std::size_t origin = origin_site(env);
  const Lattice& lat = env.lattice();
  const auto d = static_cast<std::size_t>(env.dimension());

  std::vector<double> out(opts.samples);
  parallel_for(opts.samples, opts.workers, [&](std::size_t i) {
    CounterRng rng(opts.seed, i);
    std::vector<std::size_t> sites(static_cast<std::size_t>(n));
    std::vector<int> dirs(static_cast<std::size_t>(n));
    Site x(d, 0);
    std::size_t site = origin;
    for (int t = 0; t < n; ++t) {
      const int k = sampler.draw(site, rng.uniform());
      const Direction dir{k};
      sites[static_cast<std::size_t>(t)] = site;
      dirs[static_cast<std::size_t>(t)] = k;
      x[static_cast<std::size_t>(dir.axis())] += dir.sign();
      site = static_cast<std::size_t>(lat.neighbor(site, dir));
    }
    out[i] = value(sites, dirs, x);
  });
  return out;
}

std::vector<int> simulate_endpoints(const Environment& env, int n, const McOptions& opts) {
  require_cover(env, n);
  const StepSampler sampler(env);
  const std::size_t origin = origin_site(env);
  const Lattice& lat = env.lattice();
  const auto d = static_cast<std::size_t>(env.dimension());

  std::vector<int> ends(opts.samples * d, 0);
  parallel_for(opts.samples, opts.workers, [&](std::size_t i) {
    CounterRng rng(opts.seed, i);
    int* x = ends.data() + i * d;
    std::size_t site = origin;
    for (int t = 0; t < n; ++t) {
      const Direction dir{sampler.draw(site, rng.uniform())};
      x[dir.axis()] += dir.sign();
      site = static_cast<std::size_t>(lat.neighbor(site, dir));
    }
  });
  return ends;
}

MgfEstimate mc_mgf(const Environment& env, std::span<const double> lambda, int n, const McOptions& opts) {
  require_lambda(env, lambda);
  if (opts.samples < 2) throw ValidationError("mc_mgf needs at least 2 samples");
  const auto d = static_cast<std::size_t>(env.dimension());
  const auto ends = simulate_endpoints(env, n, opts);

  std::vector<double> exponent(opts.samples);
  for (std::size_t i = 0; i < opts.samples; ++i) {
    double dot = 0.0;
    for (std::size_t a = 0; a < d; ++a) dot += lambda[a] * ends[i * d + a];
    exponent[i] = dot;
  }
  const double shift = *std::max_element(exponent.begin(), exponent.end());
  std::vector<double> w(opts.samples);
  for (std::size_t i = 0; i < opts.samples; ++i) w[i] = std::exp(exponent[i] - shift);
  const auto count = static_cast<double>(opts.samples);
  const double mean = pairwise_sum(w) / count;
  std::vector<double> sq(opts.samples);
  for (std::size_t i = 0; i < opts.samples; ++i) sq[i] = (w[i] - mean) * (w[i] - mean);
  const double sd = std::sqrt(pairwise_sum(sq) / (count - 1.0));

  MgfEstimate est;
  est.value = (shift + std::log(mean)) / n;
  est.n = n;
  est.method = MgfMethod::monte_carlo;
  est.samples = opts.samples;
  est.stderr_log = sd / (mean * std::sqrt(count)) / n;
  return est;
}

EndpointHistogram walk_endpoint_histogram(const Environment& env, int n, const McOptions& opts) {
  if (opts.samples < 1) throw ValidationError("histogram needs at least 1 sample");
  const auto d = static_cast<std::size_t>(env.dimension());
  const auto ends = simulate_endpoints(env, n, opts);
  EndpointHistogram h;
  h.samples = opts.samples;
  for (std::size_t i = 0; i < opts.samples; ++i)
    ++h.counts[Site(ends.begin() + static_cast<std::ptrdiff_t>(i * d),
                    ends.begin() + static_cast<std::ptrdiff_t>((i + 1) * d))];
  for (const auto& [x, c] : h.counts) h.frequencies[x] = static_cast<double>(c) / static_cast<double>(opts.samples);
  return h;
}

}  // namespace rwre
