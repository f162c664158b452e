#pragma once

#include <memory>
#include <span>
#include <vector>

#include "rwre/environment.hpp"

namespace rwre {

/*!
 * Class-K corrector in gradient form: F(x, e) = phi(x + e) - phi(x) for a
 * potential phi on the sites of a lattice (a periodic cell, or a box).
 *
 * On a torus the gradient representation makes the closed-loop condition and
 * the per-direction mean-zero condition automatic; check_class_k() verifies
 * both numerically anyway. On a box, F is undefined across the boundary.
 */
class Corrector {
 public:
  Corrector(std::shared_ptr<const Lattice> lattice, std::vector<double> potential);

  /// phi == 0 on the environment's sites.
  static Corrector zero(const Environment& env);

  const Lattice& lattice() const { return *lattice_; }
  std::span<const double> potential() const { return potential_; }
  double phi(std::size_t site) const { return potential_[site]; }

  /// F(site, dir). Throws EdgeUndefined across a box boundary.
  double edge(std::size_t site, Direction dir) const;

  /// Throws CellMismatch unless `env` lives on the same lattice.
  void require_compatible(const Environment& env) const;

  /// Largest violation of: every elementary plaquette and every
  /// period-wrapping line sums to 0; F(x,e) + F(x+e,-e) = 0.
  double closed_loop_residual() const;
  /// max over e of |cell average of F(., e)| (torus only; 0 for a box).
  double mean_residual() const;
  /// max over e of the cell average of |F(., e)|^beta.
  double moment(double beta) const;

  /// Throws ClassKViolation when a residual exceeds tol.
  void check_class_k(double tol = 1e-12) const;

 private:
  std::shared_ptr<const Lattice> lattice_;
  std::vector<double> potential_;
};

}  // namespace rwre
