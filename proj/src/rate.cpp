#include "rwre/rate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"
#include "rwre/variational.hpp"

namespace rwre {

namespace {

constexpr double kConvexSlack = 1e-7;
constexpr double kInvPhi = 0.6180339887498949;

// Maximizes a concave function on [a, b] by golden-section search.
std::pair<double, double> golden_max(const ScalarFunction& f, double a, double b, double tol) {
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    }
  }
  return fc > fd ? std::pair{c, fc} : std::pair{d, fd};
}

void check_convex(std::span<const double> g, std::span<const double> v) {
  for (std::size_t i = 1; i + 1 < g.size(); ++i) {
    const double t = (g[i] - g[i - 1]) / (g[i + 1] - g[i - 1]);
    const double chord = v[i - 1] + t * (v[i + 1] - v[i - 1]);
    if (v[i] > chord + kConvexSlack)
      throw NonConvexInput(fmt::format("Lambda values not convex at grid point {} (excess {:.3e})", i, v[i] - chord));
  }
}

// Geometric-tail extrapolation from three equally spaced objective values
// that are still increasing. Returns nullopt when increments do not decay.
std::optional<double> aitken_tail(double a, double b, double c) {
  const double d1 = b - a, d2 = c - b;
  if (d2 <= 1e-13 * (1.0 + std::abs(c))) return c;  // converged to rounding
  if (d1 <= 0.0 || d2 >= 0.9 * d1) return std::nullopt;
  const double r = d2 / d1;
  return c + d2 * r / (1.0 - r);
}

// Outward search from a boundary argmax at `start` (objective increasing in
// direction `dir`).
double extend_outward(const ScalarFunction& f, double start, double step, int dir, double tol, double x) {
  double prev = start - dir * step, cur = start, f_cur = f(cur);
  while (std::abs(cur) < kLambdaCap) {
    double next = cur + dir * step;
    if (std::abs(next) > kLambdaCap) next = dir * kLambdaCap;
    const double f_next = f(next);
    if (f_next < f_cur) return golden_max(f, std::min(prev, next), std::max(prev, next), tol).second;
    prev = cur;
    cur = next;
    f_cur = f_next;
    step *= 2.0;
  }
  const double edge = dir * kLambdaCap;
  if (auto tail = aitken_tail(f(edge - 2.0 * dir), f(edge - dir), f(edge))) return *tail;
  return std::abs(x) >= 1.0 - 1e-12 ? kInfiniteRate : f_cur;
}

}  // namespace

std::vector<double> linspace(double lo, double hi, int steps) {
  if (steps < 1) throw ValidationError("grid needs at least one point");
  if (steps == 1) return {lo};
  std::vector<double> g(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (steps - 1);
  return g;
}

double legendre_transform(std::span<const double> g, std::span<const double> v, double x,
                          const ScalarFunction& lambda_fn, double tol) {
  if (g.empty() || g.size() != v.size()) throw ValidationError("lambda grid and values must have equal nonzero size");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (!(g[i] > g[i - 1])) throw ValidationError("lambda grid must be strictly increasing");
  if (std::abs(x) > 1.0 + 1e-12) return kInfiniteRate;
  check_convex(g, v);

  const std::size_t m = g.size();
  auto obj = [&](std::size_t i) { return g[i] * x - v[i]; };
  std::size_t k = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (obj(i) > obj(k)) k = i;
  if (m == 1) return obj(0);

  const ScalarFunction f = [&](double l) { return l * x - lambda_fn(l); };
  if (k > 0 && k + 1 < m) {
    if (!lambda_fn) return obj(k);
    return std::max(obj(k), golden_max(f, g[k - 1], g[k + 1], tol).second);
  }

  const int dir = k == 0 ? -1 : 1;
  const std::size_t inner = k == 0 ? 1 : m - 2;
  if (obj(k) == obj(inner)) {
    if (!lambda_fn) return obj(k);
    return std::max(obj(k), golden_max(f, std::min(g[k], g[inner]), std::max(g[k], g[inner]), tol).second);
  }
  if (lambda_fn) return std::max(obj(k), extend_outward(f, g[k], std::abs(g[k] - g[inner]), dir, tol, x));

  if (m >= 3) {
    const std::size_t j = k == 0 ? 2 : m - 3;
    const double h1 = std::abs(g[inner] - g[j]), h2 = std::abs(g[k] - g[inner]);
    if (std::abs(h1 - h2) <= 1e-9 * h2)
      if (auto tail = aitken_tail(obj(j), obj(inner), obj(k))) return *tail;
  }
  return std::abs(x) >= 1.0 - 1e-12 ? kInfiniteRate : obj(k);
}

double legendre_transform(int dimension, std::span<const double> axis, std::span<const double> values,
                          std::span<const double> x, const VectorFunction& lambda_fn, double tol) {
  if (dimension == 1) {
    ScalarFunction f;
    if (lambda_fn) f = [&](double l) { return lambda_fn(std::span<const double>(&l, 1)); };
    return legendre_transform(axis, values, x[0], f, tol);
  }
  const auto d = static_cast<std::size_t>(dimension);
  const std::size_t m = axis.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= m;
  if (m < 2 || values.size() != total || x.size() != d) throw ValidationError("tensor grid shape mismatch");
  double l1 = 0.0;
  for (double c : x) l1 += std::abs(c);
  if (l1 > 1.0 + 1e-12) return kInfiniteRate;

  // convexity along every axis line
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t i = d - 1; i-- > 0;) stride[i] = stride[i + 1] * m;
  std::vector<double> line_v(m);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t start = 0; start < total; ++start) {
      if ((start / stride[a]) % m != 0) continue;
      for (std::size_t j = 0; j < m; ++j) line_v[j] = values[start + j * stride[a]];
      check_convex(axis, line_v);
    }

  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<double> lam(d);
  for (std::size_t idx = 0; idx < total; ++idx) {
    double dotx = 0.0;
    for (std::size_t a = 0; a < d; ++a) dotx += axis[(idx / stride[a]) % m] * x[a];
    if (dotx - values[idx] > best_val) {
      best_val = dotx - values[idx];
      best = idx;
    }
  }
  if (!lambda_fn) return best_val;

  for (std::size_t a = 0; a < d; ++a) lam[a] = axis[(best / stride[a]) % m];
  const double h = axis[1] - axis[0];
  for (int pass = 0; pass < 6; ++pass) {
    for (std::size_t a = 0; a < d; ++a) {
      const double lo = std::max(axis.front(), lam[a] - h), hi = std::min(axis.back(), lam[a] + h);
      auto f = [&](double t) {
        std::vector<double> p = lam;
        p[a] = t;
        double dotx = 0.0;
        for (std::size_t b = 0; b < d; ++b) dotx += p[b] * x[b];
        return dotx - lambda_fn(p);
      };
      auto [arg, val] = golden_max(f, lo, hi, tol);
      if (val > best_val) {
        best_val = val;
        lam[a] = arg;
      }
    }
  }
  return best_val;
}

std::string to_string(LambdaSource s) { return s == LambdaSource::spectral ? "spectral" : "variational"; }

RateCurve rate_curve(const Environment& env, const std::vector<std::vector<double>>& x_grid,
                     std::span<const double> lambda_axis, double tol, LambdaSource source) {
  if (!env.periodic()) throw ValidationError("rate_curve needs a periodic environment");
  const int d = env.dimension();
  const auto du = static_cast<std::size_t>(d);
  VectorFunction lambda_fn = [&](std::span<const double> lam) {
    if (source == LambdaSource::spectral) return spectral_lambda(env, lam);
    VariationalOptions opts;
    opts.tol = tol;
    return variational_lambda(env, lam, opts).value;
  };

  RateCurve curve;
  curve.dimension = d;
  curve.lambda_axis.assign(lambda_axis.begin(), lambda_axis.end());
  curve.source = source;
  curve.tol = tol;
  const std::size_t m = lambda_axis.size();
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= m;
  curve.lambda_values.resize(total);
  std::vector<double> lam(du);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (std::size_t a = du; a-- > 0;) {
      lam[a] = lambda_axis[rem % m];
      rem /= m;
    }
    curve.lambda_values[idx] = lambda_fn(lam);
  }
  for (const auto& x : x_grid) {
    if (x.size() != du) throw ValidationError("x point has wrong dimension");
    curve.xs.push_back(x);
    curve.values.push_back(legendre_transform(d, lambda_axis, curve.lambda_values, x, lambda_fn));
  }
  return curve;
}

std::vector<LdpPoint> empirical_ldp(const Environment& env, std::span<const double> center, double radius,
                                    std::span<const int> n_list, const McOptions& mc) {
  const auto d = static_cast<std::size_t>(env.dimension());
  if (center.size() != d) throw ValidationError("ball center has wrong dimension");
  if (!(radius > 0.0)) throw ValidationError("ball radius must be positive");
  for (double c : center)
    if (c - radius < -1.0 - 1e-12 || c + radius > 1.0 + 1e-12)
      throw DomainError("ball must lie inside [-1,1]^d");
  if (mc.samples < 1) throw ValidationError("empirical_ldp needs samples");

  std::vector<LdpPoint> out;
  for (int n : n_list) {
    McOptions sub = mc;
    sub.seed = derive_seed(mc.seed, static_cast<std::uint64_t>(n));
    const auto ends = simulate_endpoints(env, n, sub);
    std::size_t count = 0;
    for (std::size_t i = 0; i < mc.samples; ++i) {
      bool inside = true;
      for (std::size_t a = 0; a < d && inside; ++a)
        inside = std::abs(static_cast<double>(ends[i * d + a]) / n - center[a]) <= radius + 1e-12;
      count += inside;
    }
    LdpPoint p;
    p.n = n;
    p.count = count;
    p.samples = mc.samples;
    p.censored = count == 0;
    const double freq = static_cast<double>(std::max<std::size_t>(count, 1)) / static_cast<double>(mc.samples);
    p.value = -std::log(freq) / n;
    p.stderr_value = count ? std::sqrt((1.0 - freq) / static_cast<double>(count)) / n : 0.0;
    out.push_back(p);
  }
  return out;
}

double ball_infimum_1d(const ScalarFunction& rate, double center, double radius, int points) {
  double best = std::numeric_limits<double>::infinity();
  for (double x : linspace(center - radius, center + radius, points)) best = std::min(best, rate(x));
  return best;
}

}  // namespace rwre
