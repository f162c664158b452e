#include "rwre/one_dim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include <fmt/format.h>

#include "rwre/error.hpp"

namespace rwre {

namespace {

constexpr double kInvPhi = 0.6180339887498949;
constexpr double kRLowerCap = -60.0;

using Mat2 = std::array<double, 4>;  // row-major a b / c d

Mat2 mul(const Mat2& m, const Mat2& n) {
  return {m[0] * n[0] + m[1] * n[2], m[0] * n[1] + m[1] * n[3], m[2] * n[0] + m[3] * n[2],
          m[2] * n[1] + m[3] * n[3]};
}

// Propagates G(x) = a/(1 - b G(x-1)) from G(-1) = g0 around the cycle.
std::optional<std::vector<double>> propagate(std::span<const double> a, std::span<const double> b, double g0) {
  std::vector<double> out(a.size());
  double prev = g0;
  for (std::size_t x = 0; x < a.size(); ++x) {
    const double den = 1.0 - b[x] * prev;
    if (!(den > 0.0)) return std::nullopt;
    prev = out[x] = a[x] / den;
  }
  return out;
}

// Minimal nonnegative fixed point of the composed Moebius map around the cell.
std::optional<std::vector<double>> cycle_fixed_point(std::span<const double> a, std::span<const double> b) {
  Mat2 c{1.0, 0.0, 0.0, 1.0};
  for (std::size_t x = 0; x < a.size(); ++x) {
    c = mul(Mat2{0.0, a[x], -b[x], 1.0}, c);
    const double s = std::max({std::abs(c[0]), std::abs(c[1]), std::abs(c[2]), std::abs(c[3])});
    for (double& v : c) v /= s;
  }
  // g = (al g + be) / (ga g + de)  <=>  ga g^2 + (de - al) g - be = 0
  const double al = c[0], be = c[1], ga = c[2], de = c[3];
  const double lin = de - al;
  std::vector<double> roots;
  if (std::abs(ga) * std::abs(be) <= 1e-30 * std::max(lin * lin, 1e-300)) {
    if (lin != 0.0) roots.push_back(be / lin);
  } else {
    double disc = lin * lin + 4.0 * ga * be;
    const double scale = lin * lin + std::abs(4.0 * ga * be);
    if (disc < 0.0 && disc > -1e-14 * scale) disc = 0.0;
    if (disc < 0.0) return std::nullopt;
    const double q = -0.5 * (lin + std::copysign(std::sqrt(disc), lin));
    if (q != 0.0) roots = {q / ga, -be / q};
    else roots = {0.0};
  }
  std::sort(roots.begin(), roots.end());
  for (double g0 : roots) {
    if (g0 < 0.0 || !std::isfinite(g0)) continue;
    auto vals = propagate(a, b, g0);
    if (vals && std::abs(vals->back() - g0) <= 1e-9 * std::max(1.0, g0)) return vals;
  }
  return std::nullopt;
}

std::pair<double, double> golden_max(const std::function<double(double)>& f, double lo, double hi, double tol) {
  double c = hi - kInvPhi * (hi - lo), d = lo + kInvPhi * (hi - lo);
  double fc = f(c), fd = f(d);
  while (hi - lo > tol) {
    if (fc < fd) {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = f(d);
    } else {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = f(c);
    }
  }
  return fc > fd ? std::pair{c, fc} : std::pair{d, fd};
}

double mean_log(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::log(x);
  return s / static_cast<double>(v.size());
}

// J for 0 < x <= 1: sup over r <= r_crit of r - x g(r).
double j_right(const Env1D& env, double x, std::span<const double> r_grid, double tol) {
  const double rc = critical_tilt(env);
  std::vector<double> grid;
  if (r_grid.empty()) {
    grid = linspace(rc - 12.0, rc, 241);
  } else {
    for (double r : r_grid)
      if (r < rc) grid.push_back(r);
    std::sort(grid.begin(), grid.end());
    grid.push_back(rc);
  }
  auto f = [&](double r) { return r - x * g_value(env, r); };
  if (grid.size() == 1) return f(rc);

  std::vector<double> vals(grid.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    vals[i] = f(grid[i]);
    if (vals[i] > vals[k]) k = i;
  }
  if (k > 0) {
    const double hi = k + 1 < grid.size() ? grid[k + 1] : grid[k];
    return std::max(vals[k], golden_max(f, grid[k - 1], hi, tol).second);
  }
  if (vals[0] <= vals[1]) return std::max(vals[0], golden_max(f, grid[0], grid[1], tol).second);

  // Still increasing toward r -> -inf.
  double step = grid[1] - grid[0], prev = grid[1], cur = grid[0], f_cur = vals[0];
  while (cur > kRLowerCap) {
    const double next = std::max(cur - step, kRLowerCap);
    const double f_next = f(next);
    if (f_next < f_cur) return golden_max(f, next, prev, tol).second;
    prev = cur;
    cur = next;
    f_cur = f_next;
    step *= 2.0;
  }
  const double a = f(kRLowerCap + 2.0), b = f(kRLowerCap + 1.0), c = f(kRLowerCap);
  const double d1 = b - a, d2 = c - b;
  if (d2 <= 1e-13 * (1.0 + std::abs(c)) || d1 <= 0.0 || d2 >= 0.9 * d1) return c;
  return c + d2 * (d2 / d1) / (1.0 - d2 / d1);
}

}  // namespace

Env1D Env1D::from(const Environment& env) {
  if (!env.periodic() || env.dimension() != 1)
    throw ValidationError("one-dimensional analysis needs a periodic d=1 environment");
  Env1D e;
  for (std::size_t x = 0; x < env.num_sites(); ++x) {
    e.p_plus.push_back(env.prob(x, Direction::positive(0)));
    e.p_minus.push_back(env.prob(x, Direction::negative(0)));
  }
  return e;
}

Env1D Env1D::from_plus(std::vector<double> p_plus) {
  if (p_plus.empty()) throw InvariantViolation("empty cell");
  Env1D e;
  for (double p : p_plus) {
    if (!(p > 0.0 && p < 1.0)) throw NonPositiveEntry(fmt::format("p+ = {} leaves (0,1)", p));
    e.p_minus.push_back(1.0 - p);
  }
  e.p_plus = std::move(p_plus);
  return e;
}

Env1D Env1D::mirrored() const {
  const std::size_t n = size();
  Env1D m;
  m.p_plus.resize(n);
  m.p_minus.resize(n);
  for (std::size_t y = 0; y < n; ++y) {
    const std::size_t x = (n - y) % n;
    m.p_plus[y] = p_minus[x];
    m.p_minus[y] = p_plus[x];
  }
  return m;
}

Environment Env1D::to_environment() const {
  std::vector<std::vector<double>> rows;
  for (std::size_t x = 0; x < size(); ++x) rows.push_back({p_plus[x], p_minus[x]});
  return make_periodic(1, {static_cast<int>(size())}, rows);
}

PassageTransform solve_G(const Env1D& env, double r, int max_sweeps) {
  const std::size_t n = env.size();
  if (n == 0 || env.p_minus.size() != n) throw InvariantViolation("malformed one-dimensional environment");
  std::vector<double> a(n), b(n);
  for (std::size_t x = 0; x < n; ++x) {
    a[x] = env.p_plus[x] * std::exp(r);
    b[x] = env.p_minus[x] * std::exp(r);
  }

  PassageTransform out;
  out.r = r;
  std::vector<double> cur(n, 0.0), next(n);
  bool sweep_diverged = false;
  std::vector<std::vector<double>> history;
  for (int s = 0; s < max_sweeps; ++s) {
    double change = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
      const double den = 1.0 - b[x] * cur[(x + n - 1) % n];
      if (!(den > 0.0)) {
        sweep_diverged = true;
        break;
      }
      next[x] = a[x] / den;
      if (next[x] < cur[x]) out.monotone = false;
      if (next[x] > kPassageCap) sweep_diverged = true;
      change = std::max(change, std::abs(next[x] - cur[x]) / std::max(1.0, next[x]));
    }
    out.sweeps = s + 1;
    if (sweep_diverged) break;
    cur.swap(next);
    history.push_back(cur);
    if (change < 1e-16) break;
  }

  auto fixed = cycle_fixed_point(a, b);
  out.convergent = fixed.has_value() && !sweep_diverged;
  if (!out.convergent) return out;
  out.values = std::move(*fixed);
  for (const auto& h : history)
    for (std::size_t x = 0; x < n; ++x)
      if (h[x] > out.values[x] * (1.0 + 1e-9) + 1e-300) out.minimal = false;
  return out;
}

PassageTransform solve_H(const Env1D& env, double r, int max_sweeps) {
  PassageTransform m = solve_G(env.mirrored(), r, max_sweeps);
  if (!m.convergent) return m;
  const std::size_t n = env.size();
  std::vector<double> h(n);
  for (std::size_t x = 0; x < n; ++x) h[x] = m.values[(n - x) % n];
  m.values = std::move(h);
  return m;
}

double critical_tilt(const Env1D& env, bool for_h, double tol) {
  auto ok = [&](double r) { return (for_h ? solve_H(env, r, 0) : solve_G(env, r, 0)).convergent; };
  if (!ok(0.0)) throw NumericalError("passage transform diverges at r = 0");
  double lo = 0.0, hi = 1.0;
  while (ok(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw Divergent("no critical tilt found");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (ok(mid) ? lo : hi) = mid;
  }
  return lo;
}

double g_value(const Env1D& env, double r) {
  const auto g = solve_G(env, r, 0);
  if (!g.convergent) throw Divergent(fmt::format("G diverges at r = {}", r));
  return mean_log(g.values);
}

double h_value(const Env1D& env, double r) {
  const auto h = solve_H(env, r, 0);
  if (!h.convergent) throw Divergent(fmt::format("H diverges at r = {}", r));
  return mean_log(h.values);
}

GhCurves g_h_curves(const Env1D& env, std::span<const double> r_grid) {
  GhCurves c;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (double r : r_grid) {
    c.r.push_back(r);
    const auto g = solve_G(env, r);
    const auto h = solve_H(env, r);
    c.g_convergent.push_back(g.convergent);
    c.h_convergent.push_back(h.convergent);
    c.g.push_back(g.convergent ? mean_log(g.values) : nan);
    c.h.push_back(h.convergent ? mean_log(h.values) : nan);
  }
  c.r_crit_g = critical_tilt(env, false, 1e-8);
  c.r_crit_h = critical_tilt(env, true, 1e-8);
  return c;
}

double J_rate(const Env1D& env, double x, std::span<const double> r_grid, double tol) {
  if (!(std::abs(x) <= 1.0)) throw DomainError(fmt::format("J is defined on [-1,1], got {}", x));
  if (x == 0.0) return critical_tilt(env);
  if (x > 0.0) return j_right(env, x, r_grid, tol);
  return j_right(env.mirrored(), -x, r_grid, tol);
}

SetAPoint evaluate_set_a(const Env1D& env, double theta, double lam, std::vector<double> f_plus,
                         std::vector<double> f_minus) {
  const std::size_t n = env.size();
  if (f_plus.size() != n || f_minus.size() != n) throw CellMismatch("witness does not match the cell");
  SetAPoint p;
  p.theta = theta;
  p.lam = lam;
  p.excess = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) {
    const double v = std::log(env.p_plus[x] * std::exp(theta + f_plus[x]) + env.p_minus[x] * std::exp(-theta + f_minus[x]));
    p.excess = std::max(p.excess, v - lam);
    p.identity_residual = std::max(p.identity_residual, std::abs(v - lam));
    p.loop_residual = std::max(p.loop_residual, std::abs(f_plus[x] + f_minus[(x + 1) % n]));
  }
  p.mean_plus = std::accumulate(f_plus.begin(), f_plus.end(), 0.0) / static_cast<double>(n);
  p.f_plus = std::move(f_plus);
  p.f_minus = std::move(f_minus);
  return p;
}

SetAPoint set_a_from_potential(const Env1D& env, double theta, std::span<const double> phi) {
  const std::size_t n = env.size();
  if (phi.size() != n) throw CellMismatch("potential does not match the cell");
  std::vector<double> fp(n), fm(n);
  double lam = -std::numeric_limits<double>::infinity();
  for (std::size_t x = 0; x < n; ++x) {
    fp[x] = phi[(x + 1) % n] - phi[x];
    fm[x] = phi[(x + n - 1) % n] - phi[x];
    lam = std::max(lam, std::log(env.p_plus[x] * std::exp(theta + fp[x]) + env.p_minus[x] * std::exp(-theta + fm[x])));
  }
  return evaluate_set_a(env, theta, lam, std::move(fp), std::move(fm));
}

namespace {

void certify(const SetAPoint& p, const char* which) {
  if (p.identity_residual > kSetATolerance || p.loop_residual > kSetATolerance ||
      std::abs(p.mean_plus) > kSetATolerance)
    throw InvariantViolation(fmt::format("{} witness fails: identity {:.3e}, loop {:.3e}, mean {:.3e}", which,
                                         p.identity_residual, p.loop_residual, p.mean_plus));
}

}  // namespace

SetAPoint build_Fg(const Env1D& env, double r) {
  const auto g = solve_G(env, r);
  if (!g.convergent) throw Divergent(fmt::format("G diverges at r = {}", r));
  const std::size_t n = env.size();
  const double theta = -mean_log(g.values);
  std::vector<double> fp(n), fm(n);
  for (std::size_t x = 0; x < n; ++x) {
    fp[x] = -std::log(g.values[x]) - theta;
    fm[x] = std::log(g.values[(x + n - 1) % n]) + theta;
  }
  auto p = evaluate_set_a(env, theta, -r, std::move(fp), std::move(fm));
  certify(p, "F_g");
  return p;
}

SetAPoint build_Fh(const Env1D& env, double r) {
  const auto h = solve_H(env, r);
  if (!h.convergent) throw Divergent(fmt::format("H diverges at r = {}", r));
  const std::size_t n = env.size();
  const double theta = mean_log(h.values);
  std::vector<double> fp(n), fm(n);
  for (std::size_t x = 0; x < n; ++x) {
    fp[x] = std::log(h.values[(x + 1) % n]) - theta;
    fm[x] = -std::log(h.values[x]) + theta;
  }
  auto p = evaluate_set_a(env, theta, -r, std::move(fp), std::move(fm));
  certify(p, "F_h");
  return p;
}

DualitySlack duality_slack(const Env1D& env, double theta, double lam) {
  const double rg = std::min(-lam, critical_tilt(env, false));
  const double rh = std::min(-lam, critical_tilt(env, true));
  return {-g_value(env, rg) - theta, theta - h_value(env, rh)};
}

CgzHypotheses check_cgz_hypotheses(const Env1D& env) {
  CgzHypotheses h;
  h.min_prob = std::min(*std::min_element(env.p_plus.begin(), env.p_plus.end()),
                        *std::min_element(env.p_minus.begin(), env.p_minus.end()));
  double s = 0.0;
  for (std::size_t x = 0; x < env.size(); ++x) s += std::log(env.p_minus[x] / env.p_plus[x]);
  h.mean_log_ratio = s / static_cast<double>(env.size());
  h.elliptic = h.min_prob > 0.0;
  h.right_transient_or_recurrent = h.mean_log_ratio <= 1e-12;
  return h;
}

IJReport verify_I_equals_J(const Env1D& env, std::span<const double> x_grid, double tol, LambdaSource source) {
  IJReport rep;
  rep.hypotheses = check_cgz_hypotheses(env);
  rep.source = source;
  const Environment full = env.to_environment();
  std::vector<std::vector<double>> xs;
  for (double x : x_grid) xs.push_back({x});
  const auto axis = linspace(-6.0, 6.0, 201);
  const auto curve = rate_curve(full, xs, axis, 1e-8, source);
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    const double x = x_grid[i];
    const double j = J_rate(env, x);
    const double gap = std::abs(curve.values[i] - j);
    rep.xs.push_back(x);
    rep.I.push_back(curve.values[i]);
    rep.J.push_back(j);
    rep.gap.push_back(gap);
    if (gap > rep.max_gap || i == 0) {
      rep.max_gap = gap;
      rep.argmax = x;
    }
  }
  rep.equivalent = rep.hypotheses.satisfied() && rep.max_gap <= tol;
  return rep;
}

}  // namespace rwre
