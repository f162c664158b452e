#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "rwre/corrector.hpp"
#include "rwre/lattice.hpp"

namespace rwre {

/// Edge values F(x, e) for x in Z^d.
class EdgeField {
 public:
  virtual ~EdgeField() = default;
  virtual int dimension() const = 0;
  /// Throws EdgeUndefined when the edge is not available.
  virtual double edge(std::span<const int> x, Direction dir) const = 0;
  /// Every edge between sites with |x|_1 <= reach() is defined.
  virtual int reach() const = 0;
  /// Closed-loop (and, for periodic fields, mean-zero) checks; throws ClassKViolation.
  virtual void validate(double tol = 1e-12) const = 0;
};

/// F on a periodic cell, repeated over Z^d. `table` is num_sites x 2d in
/// Lattice::torus order.
class PeriodicEdgeField final : public EdgeField {
 public:
  PeriodicEdgeField(std::vector<int> cell_dims, std::vector<double> table);
  /// Gradient field of a torus corrector.
  static PeriodicEdgeField from_corrector(const Corrector& c);

  int dimension() const override { return lattice_.dimension(); }
  double edge(std::span<const int> x, Direction dir) const override;
  int reach() const override { return std::numeric_limits<int>::max(); }
  void validate(double tol = 1e-12) const override;
  /// max |F|.
  double sup_norm() const;

 private:
  Lattice lattice_;
  std::vector<double> table_;
};

/// F on the l1 ball of a given radius; edges leaving the ball are undefined.
class BoxEdgeField final : public EdgeField {
 public:
  BoxEdgeField(int dimension, int radius, std::vector<double> table);
  static BoxEdgeField from_corrector(const Corrector& c);

  int dimension() const override { return lattice_.dimension(); }
  double edge(std::span<const int> x, Direction dir) const override;
  int reach() const override { return lattice_.radius(); }
  /// Finite entries, antisymmetry and plaquettes inside the ball.
  void validate(double tol = 1e-12) const override;

 private:
  Lattice lattice_;
  std::vector<double> table_;  // NaN across the boundary
};

/// Sum of F along the canonical staircase from 0 to z: all steps along axis 1,
/// then axis 2, and so on.
double path_sum(const EdgeField& field, std::span<const int> z);
/// Staircase visiting the axes in `axis_order` (a permutation of 0..d-1).
double path_sum(const EdgeField& field, std::span<const int> z, std::span<const int> axis_order);
/// Sum along an explicit nearest-neighbour path. Throws NotNearestNeighbor.
double path_sum_along(const EdgeField& field, std::span<const Site> path);

/// f(z) = canonical path sum, cached on the cube [-R, R]^d after tabulate(R).
class PathSumField {
 public:
  explicit PathSumField(std::shared_ptr<const EdgeField> field);

  const EdgeField& field() const { return *field_; }
  int dimension() const { return field_->dimension(); }
  bool available(std::span<const int> z) const;
  /// Fills the table for the cube of half-width `radius`, restricted to the
  /// points the field can reach.
  void tabulate(int radius);
  int tabulated_radius() const { return table_radius_; }
  /// f(z). Throws OutOfBox when z is beyond the field's reach.
  double at(std::span<const int> z) const;

 private:
  std::shared_ptr<const EdgeField> field_;
  int table_radius_ = -1;
  std::vector<double> table_;
};

/// Multilinear weights a_t(eta) for the corners pi_t + eta of the unit cube
/// containing t, pi_t = floor(t). Indexed by the bit mask of eta.
std::vector<double> interpolation_weights(std::span<const double> t);

/// f-hat(t) = sum_eta a_t(eta) f(pi_t + eta). Throws OutOfBox.
double interpolate(const PathSumField& f, std::span<const double> t);

/// g_n(s) = f-hat(n s) / n.
double g_n(const PathSumField& f, int n, std::span<const double> s);

struct SublinearityRow {
  int n = 0;
  double sup_value = 0.0;  // running sup of |f(z)| over |z|_1 <= n, divided by n
  bool exact = true;
  std::size_t samples = 0; // points evaluated (cumulative)
};

inline constexpr int kExactShellLimit = 64;

/// sup_{|z|_1 <= n} |f(z)| / n for each n in n_list. d = 1: exact scan.
/// d = 2: exact up to n = 64; beyond, every l1 shell |z|_1 = k draws
/// `sample_count` points from stream (derive_seed(seed, k), 0), so the running
/// sup is nested in n. Validates the field first. Throws OutOfBox, and
/// ValidationError for d > 2.
std::vector<SublinearityRow> sublinearity_profile(PathSumField& f, std::span<const int> n_list,
                                                  std::size_t sample_count, std::uint64_t seed);

/// max over `pairs` sampled pairs s, t in [-1,1]^d of |g_n(s) - g_n(t)| / |s - t|_1^delta.
double holder_quotient(const PathSumField& f, int n, double delta, std::size_t pairs, std::uint64_t seed);

}  // namespace rwre
