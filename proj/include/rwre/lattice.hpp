#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace rwre {

/// Lattice coordinates in Z^d.
using Site = std::vector<int>;

/// One of the 2d unit steps, ordered +e1, -e1, +e2, -e2, ..., +e_d, -e_d.
struct Direction {
  int index = 0;

  int axis() const { return index / 2; }
  int sign() const { return index % 2 == 0 ? 1 : -1; }
  Direction opposite() const { return Direction{index ^ 1}; }

  static Direction positive(int axis) { return Direction{2 * axis}; }
  static Direction negative(int axis) { return Direction{2 * axis + 1}; }

  friend bool operator==(Direction, Direction) = default;
};

inline int num_directions(int dimension) { return 2 * dimension; }

/// Unit vector of `dir` in Z^d.
Site unit_vector(int dimension, Direction dir);

/// Direction with unit vector `step`, if `step` is a unit vector.
std::optional<Direction> direction_of(std::span<const int> step);

/// <lambda, e> for the unit step e.
inline double tilt_dot(std::span<const double> lambda, Direction dir) {
  return dir.sign() * lambda[static_cast<std::size_t>(dir.axis())];
}

int l1_norm(std::span<const int> x);

/// Finite site set with a dense index: either a torus (periodic cell, every
/// neighbour exists) or the l1 ball {|x|_1 <= radius} (neighbours across the
/// boundary are absent). Sites are enumerated lexicographically by
/// coordinates, first coordinate most significant; torus coordinates run over
/// [0, dims_i), ball coordinates over [-radius, radius].
class Lattice {
 public:
  static Lattice torus(std::vector<int> dims);
  static Lattice ball(int dimension, int radius);

  bool periodic() const { return periodic_; }
  int dimension() const { return dimension_; }
  std::size_t size() const { return num_sites_; }
  std::span<const int> dims() const { return dims_; }
  int radius() const { return radius_; }

  /// Index of the site at `x`. On a torus `x` is reduced componentwise; on a
  /// ball, nullopt when |x|_1 > radius.
  std::optional<std::size_t> index_of(std::span<const int> x) const;

  /// Canonical coordinates of `site`.
  std::span<const int> coords(std::size_t site) const {
    return {coords_.data() + site * static_cast<std::size_t>(dimension_),
            static_cast<std::size_t>(dimension_)};
  }

  /// Neighbour index of `site` in direction `dir`; -1 if it leaves the ball.
  std::int64_t neighbor(std::size_t site, Direction dir) const {
    return neighbors_[site * static_cast<std::size_t>(2 * dimension_) +
                      static_cast<std::size_t>(dir.index)];
  }

  /// Torus only: componentwise reduction into [0, dims_i).
  Site reduce(std::span<const int> x) const;

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.periodic_ == b.periodic_ && a.dimension_ == b.dimension_ &&
           a.dims_ == b.dims_ && a.radius_ == b.radius_;
  }

 private:
  Lattice() = default;
  void build_neighbors();

  bool periodic_ = true;
  int dimension_ = 0;
  int radius_ = 0;
  std::vector<int> dims_;             // torus cell dims, or 2r+1 per axis for a ball
  std::size_t num_sites_ = 0;
  std::vector<int> coords_;           // num_sites x d
  std::vector<std::int64_t> dense_;   // ball only: cube offset -> site or -1
  std::vector<std::int64_t> neighbors_;
};

}  // namespace rwre
