#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rwre/corrector.hpp"
#include "rwre/environment.hpp"
#include "rwre/mgf.hpp"

namespace rwre {

/// K(F) = max over sites x of log sum_e p(x,e) exp(<lambda,e> + F(x,e)).
/// On a box the max runs over sites at l1 distance <= radius - 1 (whose
/// neighbours all exist). Throws CellMismatch.
double k_objective(const Environment& env, std::span<const double> lambda, const Corrector& corrector);

/// Per-site values k_x(phi) whose max is k_objective.
std::vector<double> site_log_partitions(const Environment& env, std::span<const double> lambda,
                                        const Corrector& corrector);

struct SpectralResult {
  double value = 0.0;               // log spectral radius
  std::vector<double> eigenvector;  // Perron right eigenvector, max entry 1
  double lower_ratio = 0.0;         // Collatz-Wielandt bracket
  double upper_ratio = 0.0;
  long iterations = 0;
};

/// Perron eigenpair of the tilted transfer matrix on the periodic cell,
/// A(x, x+e) += p(x,e) e^{<lambda,e>}. Power iteration on A + sI until
/// log(max_x (Au/u)_x / min_x (Au/u)_x) < tol. Throws NoConvergence.
SpectralResult spectral_solve(const Environment& env, std::span<const double> lambda, double tol = 1e-13,
                              long max_iters = 2'000'000);

double spectral_lambda(const Environment& env, std::span<const double> lambda, double tol = 1e-13);

struct VariationalOptions {
  double tol = 1e-8;
  long max_iters = 100'000;
  /// Use the spectral value as the Polyak target; otherwise a 1/k schedule.
  bool oracle_target = true;
};

struct LambdaResult {
  TiltVector lambda;
  double value = 0.0;  // k_objective at the returned corrector
  Corrector argmin_potential;
  double spectral_value = 0.0;
  double gap = 0.0;  // value - spectral_value
  long iterations = 0;
  double tol = 0.0;
};

/// inf over periodic correctors (gauge phi(0) = 0) of k_objective: soft-max
/// temperature continuation, then damped Newton on the equalization system
/// k_x(phi) = t, then (if still above tol) subgradient polishing.
/// Throws NoConvergence when gap > tol after max_iters.
LambdaResult variational_lambda(const Environment& env, std::span<const double> lambda,
                                const VariationalOptions& opts = {});

struct SupermartingaleReport {
  double k_value = 0.0;        // K(F)
  int n = 0;
  double exact_value = 0.0;    // E[S_n] by transfer DP
  std::optional<double> mc_value;
  std::optional<double> mc_stderr;
  std::size_t samples = 0;
  bool holds = false;          // exact_value <= 1 + tolerance
  double tolerance = 1e-10;
};

/// E[S_n], S_n = exp{<lambda,X_n> + sum_j F(X_{j-1},X_j) - n K(F)}, exactly by
/// DP and, when samples > 0, by Monte Carlo.
SupermartingaleReport supermartingale_check(const Environment& env, std::span<const double> lambda,
                                            const Corrector& corrector, int n, const McOptions& mc,
                                            double tolerance = 1e-10);

/// sum_j F(x_{j-1}, x_j) along a nearest-neighbour path (coordinates in Z^d,
/// first point is the start). Asserts the telescoped value phi(x_n) - phi(x_0).
/// Throws NotNearestNeighbor.
double sum_along_walk(const Corrector& corrector, std::span<const Site> path);

}  // namespace rwre
