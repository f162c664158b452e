#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rwre/lattice.hpp"

namespace rwre {

inline constexpr double kRowSumTolerance = 1e-12;
inline constexpr double kDefaultAlpha = 1.0;

enum class EnvKind { periodic, boxed };

/*!
 * Transition probabilities p(x, e) of a nearest-neighbour walk.
 *
 * A periodic environment stores one row per cell site and answers queries at
 * any x in Z^d through x mod cell_dims. A boxed environment stores one row per
 * site of the l1 ball of the given radius (an i.i.d. draw identified by its
 * seed) and is undefined outside it.
 *
 * Every row is strictly positive and sums to 1 within 1e-12. Immutable after
 * construction.
 */
class Environment {
 public:
  EnvKind kind() const { return kind_; }
  bool periodic() const { return kind_ == EnvKind::periodic; }
  int dimension() const { return lattice_->dimension(); }
  int num_dirs() const { return 2 * dimension(); }
  std::size_t num_sites() const { return lattice_->size(); }

  /// Periodic only.
  std::span<const int> cell_dims() const { return lattice_->dims(); }
  /// Boxed only.
  int radius() const { return lattice_->radius(); }
  std::uint64_t seed() const { return seed_; }
  double alpha() const { return alpha_; }

  const Lattice& lattice() const { return *lattice_; }
  std::shared_ptr<const Lattice> shared_lattice() const { return lattice_; }

  /// Flat row-major table, num_sites x 2d.
  std::span<const double> probs() const { return probs_; }
  std::span<const double> row(std::size_t site) const {
    const auto nd = static_cast<std::size_t>(num_dirs());
    return {probs_.data() + site * nd, nd};
  }
  double prob(std::size_t site, Direction dir) const {
    return probs_[site * static_cast<std::size_t>(num_dirs()) + static_cast<std::size_t>(dir.index)];
  }

  /// p(x, e) at an arbitrary lattice point; throws BoxTooSmall outside a box.
  double prob_at(std::span<const int> x, Direction dir) const;

  /// True when every site within l1 distance n of the origin has a row.
  bool covers_radius(int n) const { return periodic() || n <= radius(); }

  friend Environment make_periodic(int, std::vector<int>, const std::vector<std::vector<double>>&, double);
  friend Environment make_boxed(int, int, std::uint64_t, std::vector<double>, double);

 private:
  Environment(EnvKind kind, std::shared_ptr<const Lattice> lattice, std::vector<double> probs,
              std::uint64_t seed, double alpha);

  EnvKind kind_;
  std::shared_ptr<const Lattice> lattice_;
  std::vector<double> probs_;
  std::uint64_t seed_ = 0;
  double alpha_ = kDefaultAlpha;
};

/// Periodic environment with one probability row per cell site (site order of
/// Lattice::torus). Throws RowSumError, NonPositiveEntry, or
/// InvariantViolation for shape errors.
Environment make_periodic(int dimension, std::vector<int> cell_dims,
                          const std::vector<std::vector<double>>& probs,
                          double alpha = kDefaultAlpha);

/// Boxed environment from a flat table in Lattice::ball site order.
Environment make_boxed(int dimension, int radius, std::uint64_t seed, std::vector<double> flat_probs,
                       double alpha = kDefaultAlpha);

/// Law of a single probability row on the 2d-simplex.
struct PointMassLaw {
  std::vector<double> row;
};
struct FiniteLaw {
  std::vector<std::vector<double>> rows;
  std::vector<double> weights;
};
struct DirichletLaw {
  std::vector<double> concentration;
};
using SimplexLaw = std::variant<PointMassLaw, FiniteLaw, DirichletLaw>;

/// Throws ValidationError when the law cannot produce strictly positive rows
/// of length 2d.
void validate_law(const SimplexLaw& law, int dimension);

/// I.i.d. rows on the l1 ball of `radius`, site k drawn from the counter
/// stream (seed, k) in Lattice::ball order.
Environment sample_iid_boxed(int dimension, int radius, std::uint64_t seed, const SimplexLaw& law,
                             double alpha = kDefaultAlpha);

/// Periodic cell with i.i.d. rows, site k (Lattice::torus order) drawn from
/// stream (seed, k).
Environment sample_iid_periodic(int dimension, std::vector<int> cell_dims, std::uint64_t seed, const SimplexLaw& law,
                                double alpha = kDefaultAlpha);

/// max over e of the site average of |log p(x, e)|^beta.
double moment_norm(const Environment& env, double beta);

/// JSON text of the environment file (probabilities with 17 significant digits).
std::string to_json(const Environment& env);
Environment env_from_json(const std::string& text);

void save_env(const Environment& env, const std::filesystem::path& path);
Environment load_env(const std::filesystem::path& path);

}  // namespace rwre
