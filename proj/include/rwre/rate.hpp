#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/mgf.hpp"

namespace rwre {

/// +infinity rate. Never used in arithmetic; test with is_infinite_rate.
inline constexpr double kInfiniteRate = 1e10;
inline bool is_infinite_rate(double v) { return v >= 1e9; }

/// Outward search limit |lambda| when the sup is not attained on the grid.
inline constexpr double kLambdaCap = 60.0;

using ScalarFunction = std::function<double(double)>;
using VectorFunction = std::function<double(std::span<const double>)>;

/// Uniform grid "lo:hi:steps" helper (steps points including both ends).
std::vector<double> linspace(double lo, double hi, int steps);

/*!
 * sup over lambda of lambda * x - Lambda(lambda) in one dimension.
 *
 * The grid values must be convex (midpoint slack 1e-7), else NonConvexInput.
 * The grid argmax is refined by golden-section search on its neighbouring
 * cells when `lambda_fn` is given. When the grid argmax sits on a boundary
 * with the objective still increasing, the search continues outward with
 * `lambda_fn` up to |lambda| = kLambdaCap and adds an Aitken tail when the
 * increments decay geometrically (this is how I(+-1) is obtained); if they do
 * not decay the result is kInfiniteRate. |x| > 1 is kInfiniteRate.
 */
double legendre_transform(std::span<const double> lambda_grid, std::span<const double> lambda_values, double x,
                          const ScalarFunction& lambda_fn = {}, double tol = 1e-6);

/// d-dimensional version on the tensor grid axis^d (values in row-major order,
/// first coordinate most significant). Refinement is cyclic coordinate-wise
/// golden-section inside the grid box. |x|_1 > 1 is kInfiniteRate.
double legendre_transform(int dimension, std::span<const double> axis, std::span<const double> lambda_values,
                          std::span<const double> x, const VectorFunction& lambda_fn = {}, double tol = 1e-6);

enum class LambdaSource { variational, spectral };
std::string to_string(LambdaSource s);

struct RateCurve {
  int dimension = 1;
  std::vector<std::vector<double>> xs;
  std::vector<double> values;        // I(x); kInfiniteRate where infinite
  std::vector<double> lambda_axis;   // dual grid per axis
  std::vector<double> lambda_values; // Lambda on axis^d
  LambdaSource source = LambdaSource::variational;
  double tol = 1e-8;
};

/// Lambda on lambda_axis^d from `source`, then legendre_transform at each x.
RateCurve rate_curve(const Environment& env, const std::vector<std::vector<double>>& x_grid,
                     std::span<const double> lambda_axis, double tol = 1e-8,
                     LambdaSource source = LambdaSource::variational);

struct LdpPoint {
  int n = 0;
  double value = 0.0;      // -(1/n) log(count / samples); for censored rows, -(1/n) log(1 / samples)
  std::size_t count = 0;
  std::size_t samples = 0;
  bool censored = false;   // count == 0
  double stderr_value = 0.0;
};

/// Monte Carlo frequency of {X_n / n in the sup-norm ball B_radius(center)}
/// for each n. The ball must lie in [-1,1]^d (DomainError otherwise). Walks for
/// horizon n use seed derive_seed(seed, n).
std::vector<LdpPoint> empirical_ldp(const Environment& env, std::span<const double> center, double radius,
                                    std::span<const int> n_list, const McOptions& mc);

/// inf over the sup-norm ball of I, by dense sampling of legendre_transform
/// (d = 1: `points` evenly spaced values).
double ball_infimum_1d(const ScalarFunction& rate, double center, double radius, int points = 401);

}  // namespace rwre
