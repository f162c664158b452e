#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rwre/environment.hpp"

namespace rwre {

/// Exponential tilt lambda in R^d.
using TiltVector = std::vector<double>;

enum class MgfMethod { exact_dp, brute_force, monte_carlo };
std::string_view to_string(MgfMethod m);

/// (1/n) log E^{P_omega}[exp <lambda, X_n>] at finite n.
struct MgfEstimate {
  double value = 0.0;
  int n = 0;
  MgfMethod method = MgfMethod::exact_dp;
  std::optional<std::size_t> samples;   // Monte Carlo only
  std::optional<double> stderr_log;     // Monte Carlo only, per-step log scale
};

/// Log of (M^n 1)(0) where (M u)(x) = sum_e exp(logw(site(x), e)) u(x+e).
/// logw is a num_sites x 2d table on the environment's sites. Computed on the
/// l1 ball of radius n by n log-sum-exp sweeps. Throws BoxTooSmall when a
/// boxed environment does not cover radius n.
double log_transfer_power(const Environment& env, std::span<const double> logw, int n);

/// log p(x, e) + <lambda, e> for every environment site.
std::vector<double> tilted_log_weights(const Environment& env, std::span<const double> lambda);

MgfEstimate exact_mgf(const Environment& env, std::span<const double> lambda, int n);

/// Exhaustive sum over all (2d)^n paths. Throws TooLarge beyond n = 12 (d=1),
/// n = 8 (d=2), or (2d)^n > 4^8 otherwise.
MgfEstimate brute_force_mgf(const Environment& env, std::span<const double> lambda, int n);

struct McOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

MgfEstimate mc_mgf(const Environment& env, std::span<const double> lambda, int n, const McOptions& opts);

struct EndpointHistogram {
  std::map<Site, std::size_t> counts;
  std::map<Site, double> frequencies;
  std::size_t samples = 0;
};

EndpointHistogram walk_endpoint_histogram(const Environment& env, int n, const McOptions& opts);

/// Endpoints of `samples` independent walks of length n from the origin;
/// walk i draws from CounterRng(seed, i). Flat samples x d array.
std::vector<int> simulate_endpoints(const Environment& env, int n, const McOptions& opts);

/// Per-sample path functional: walk i (stream (seed, i)) records the
/// environment site of X_0..X_{n-1}, the directions taken and the endpoint;
/// value(...) maps them to the sample's stored result.
std::vector<double> simulate_walk_values(
    const Environment& env, int n, const McOptions& opts,
    const std::function<double(std::span<const std::size_t> sites, std::span<const int> dirs,
                               std::span<const int> endpoint)>& value);

}  // namespace rwre
