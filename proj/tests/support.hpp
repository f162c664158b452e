#pragma once

#include <cmath>
#include <vector>

#include "rwre/environment.hpp"
#include "rwre/rng.hpp"

namespace rwre::testing {

inline Environment homogeneous_1d(double p_plus) { return make_periodic(1, {1}, {{p_plus, 1.0 - p_plus}}); }

inline Environment env_p2() { return make_periodic(1, {2}, {{0.8, 0.2}, {0.3, 0.7}}); }

// Dirichlet(conc) rows on a periodic cell.
inline Environment random_periodic(int d, std::vector<int> cell, std::uint64_t seed, double conc = 2.0) {
  return sample_iid_periodic(d, std::move(cell), seed, DirichletLaw{std::vector<double>(2 * d, conc)});
}

inline std::vector<double> uniform_vector(std::size_t n, double lo, double hi, std::uint64_t seed,
                                          std::uint64_t stream = 0) {
  CounterRng rng(seed, stream);
  std::vector<double> v(n);
  for (double& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

}  // namespace rwre::testing
