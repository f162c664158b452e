#pragma once

#include <span>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/rate.hpp"

namespace rwre {

/// A one-dimensional periodic environment as the arrays p+(x), p-(x) over the
/// cell x = 0..N-1.
struct Env1D {
  std::vector<double> p_plus;
  std::vector<double> p_minus;

  /// Throws ValidationError unless env is periodic with d = 1.
  static Env1D from(const Environment& env);
  /// p-(x) = 1 - p+(x). Throws NonPositiveEntry / RowSumError.
  static Env1D from_plus(std::vector<double> p_plus);

  std::size_t size() const { return p_plus.size(); }
  /// The reflected environment x -> -x mod N with p+ and p- exchanged.
  Env1D mirrored() const;
  Environment to_environment() const;
};

/// G(x) = E_x[e^{r tau} 1{tau < inf}] for the first passage to x+1 (or, for
/// solve_H, to x-1), one value per cell site.
struct PassageTransform {
  double r = 0.0;
  std::vector<double> values;
  bool convergent = false;
  int sweeps = 0;        // monotone sweeps performed from 0
  bool monotone = true;  // every sweep was coordinatewise nondecreasing
  bool minimal = true;   // every sweep stayed below the returned fixed point
};

inline constexpr double kPassageCap = 1e12;

/*!
 * Minimal nonnegative solution of G(x) = p+(x) e^r / (1 - p-(x) e^r G(x-1))
 * on the cycle. Runs up to `max_sweeps` Jacobi sweeps from G = 0 (checked
 * monotone, capped at kPassageCap, a non-positive denominator flags
 * divergence), then returns the minimal fixed point of the composed cycle map
 * in closed form. Divergence is reported through `convergent`, never thrown.
 */
PassageTransform solve_G(const Env1D& env, double r, int max_sweeps = 200);
/// solve_G on the mirrored environment, re-indexed: H(x) = G_mirror(-x).
PassageTransform solve_H(const Env1D& env, double r, int max_sweeps = 200);

/// sup{r : solve_G(r) convergent} (or solve_H) by bisection to `tol`; the
/// returned endpoint is on the convergent side.
double critical_tilt(const Env1D& env, bool for_h = false, double tol = 1e-12);

/// Cell averages of log G and log H. Throws Divergent beyond the critical tilt.
double g_value(const Env1D& env, double r);
double h_value(const Env1D& env, double r);

struct GhCurves {
  std::vector<double> r;
  std::vector<double> g, h;            // NaN where censored
  std::vector<bool> g_convergent, h_convergent;
  double r_crit_g = 0.0, r_crit_h = 0.0;
};

GhCurves g_h_curves(const Env1D& env, std::span<const double> r_grid);

/*!
 * J(x) = sup_{r <= r_crit} { r - x g(r) } for 0 <= x <= 1 and
 * sup { r + x h(r) } for -1 <= x < 0. The r grid (default: 241 points on
 * [r_crit - 12, r_crit]) locates the maximizer, golden-section refines it;
 * a maximizer at the low end continues toward r = -60 with a geometric tail
 * (needed at |x| = 1). Throws DomainError for |x| > 1.
 */
double J_rate(const Env1D& env, double x, std::span<const double> r_grid = {}, double tol = 1e-10);

/// (theta, lambda) with a witness pair F+, F- over the cell.
struct SetAPoint {
  double theta = 0.0;
  double lam = 0.0;
  std::vector<double> f_plus, f_minus;
  double identity_residual = 0.0;  // max_x |log(p+ e^{theta+F+} + p- e^{-theta+F-}) - lam|
  double excess = 0.0;             // max_x log(...) - lam, <= 0 for membership
  double loop_residual = 0.0;      // max_x |F+(x) + F-(x+1)|
  double mean_plus = 0.0;          // cell average of F+
};

inline constexpr double kSetATolerance = 1e-10;

/// Evaluates the membership quantities of an arbitrary witness.
SetAPoint evaluate_set_a(const Env1D& env, double theta, double lam, std::vector<double> f_plus,
                         std::vector<double> f_minus);
/// Gradient witness F+(x) = phi(x+1) - phi(x), F-(x) = phi(x-1) - phi(x), with
/// lam the smallest value making (theta, lam) a member.
SetAPoint set_a_from_potential(const Env1D& env, double theta, std::span<const double> phi);

/// theta = -g(r), lam = -r, F+ = -log G - theta, F- = log G(x-1) + theta.
/// Throws Divergent when solve_G does not converge at r, InvariantViolation
/// when the identity or the loop condition fails beyond kSetATolerance.
SetAPoint build_Fg(const Env1D& env, double r);
/// theta = h(r), lam = -r, F+ = log H(x+1) - theta, F- = -log H(x) + theta.
SetAPoint build_Fh(const Env1D& env, double r);

/// Slacks of theta <= -g(-lam) and theta >= h(-lam): both are >= 0 (up to
/// rounding) for members of A. -lam is clamped to the critical tilts.
struct DualitySlack {
  double g_slack = 0.0;  // -g(-lam) - theta
  double h_slack = 0.0;  // theta - h(-lam)
};
DualitySlack duality_slack(const Env1D& env, double theta, double lam);

struct CgzHypotheses {
  double min_prob = 0.0;          // ellipticity bound
  double mean_log_ratio = 0.0;    // cell mean of log(p-/p+)
  bool elliptic = false;
  bool right_transient_or_recurrent = false;
  bool satisfied() const { return elliptic && right_transient_or_recurrent; }
};
CgzHypotheses check_cgz_hypotheses(const Env1D& env);

struct IJReport {
  std::vector<double> xs, I, J, gap;
  double max_gap = 0.0;
  double argmax = 0.0;
  CgzHypotheses hypotheses;
  LambdaSource source = LambdaSource::variational;
  bool equivalent = false;  // hypotheses hold and max_gap <= tol
};

/// I from rate_curve (default lambda grid, Lambda from `source`) against J_rate.
IJReport verify_I_equals_J(const Env1D& env, std::span<const double> x_grid, double tol = 1e-3,
                           LambdaSource source = LambdaSource::variational);

}  // namespace rwre
