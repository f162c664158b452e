#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/mgf.hpp"

namespace rwre {

inline constexpr double kInvarianceTolerance = 1e-8;

/// Candidate kernel q (num_sites x 2d, rows strictly positive, summing to 1)
/// and density phi with respect to the cell-uniform measure (phi >= 0, mean 1).
struct KernelDensityPair {
  std::vector<double> q;
  std::vector<double> phi;
};

struct GammaResult {
  TiltVector lambda;
  double value = 0.0;
  KernelDensityPair argmax;
  double invariance_residual = 0.0;
  int best_restart = 0;
  long iterations = 0;
};

/// max over sites |phi(x) - sum_{y,e: y+e=x} q(y,e) phi(y)| on the torus.
double invariance_residual(const Environment& env, std::span<const double> q, std::span<const double> phi);

/// Left Perron vector of q on the cell, normalized to mean 1, by power
/// iteration on the lazy kernel (I + Q) / 2. Throws NoConvergence.
std::vector<double> invariant_density(const Environment& env, std::span<const double> q, double tol = 1e-13,
                                      long max_iters = 5'000'000);

/// Cell average of phi(x) sum_e q(x,e) [<lambda,e> - log(q(x,e)/p(x,e))].
/// Throws NotInvariant when phi is not invariant for q within `tol`.
double gamma_objective(const Environment& env, std::span<const double> lambda, const KernelDensityPair& pair,
                       double tol = kInvarianceTolerance);

struct GammaOptions {
  double tol = kInvarianceTolerance;  // invariance residual at return
  int restarts = 8;
  std::uint64_t seed = 0;
  int max_iters = 500;  // ascent steps per restart
  double stationarity_tol = 1e-9;
  /// Ascent that stalls (no improving step) is accepted below this stationarity.
  double stall_tol = 1e-6;
};

/// Maximizes gamma_objective over q (phi re-solved as the invariant density
/// of q at every step) by multi-start ascent in logit coordinates. Restart 0
/// starts at q = p; restart k > 0 from logits of p perturbed by stream
/// (seed, k). Best value wins, ties by lowest restart index.
GammaResult gamma_lower(const Environment& env, std::span<const double> lambda, const GammaOptions& opts = {});

/// q*(e) proportional to exp(<lambda,e> + nu(e)).
std::vector<double> softmax_kernel(std::span<const double> lambda, std::span<const double> nu);

/// sum_e (<lambda,e> - log q(e) + nu(e)) q(e).
double softmax_objective(std::span<const double> lambda, std::span<const double> nu, std::span<const double> q);

/// log sum_e exp(<lambda,e> + nu(e)), the optimum of softmax_objective.
double softmax_log_partition(std::span<const double> lambda, std::span<const double> nu);

/// Law-of-large-numbers velocity: cell average of phi_p(x) sum_e e p(x,e).
std::vector<double> lln_velocity(const Environment& env);

}  // namespace rwre
