#include "rwre/lattice.hpp"

#include <cstdlib>
#include <stdexcept>

namespace rwre {

Site unit_vector(int dimension, Direction dir) {
  Site e(static_cast<std::size_t>(dimension), 0);
  e[static_cast<std::size_t>(dir.axis())] = dir.sign();
  return e;
}

std::optional<Direction> direction_of(std::span<const int> step) {
  std::optional<Direction> found;
  for (std::size_t i = 0; i < step.size(); ++i) {
    if (step[i] == 0) continue;
    if (found || std::abs(step[i]) != 1) return std::nullopt;
    found = step[i] > 0 ? Direction::positive(static_cast<int>(i))
                        : Direction::negative(static_cast<int>(i));
  }
  return found;
}

int l1_norm(std::span<const int> x) {
  int s = 0;
  for (int v : x) s += std::abs(v);
  return s;
}

namespace {

int positive_mod(int a, int m) {
  int r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

Lattice Lattice::torus(std::vector<int> dims) {
  if (dims.empty()) throw std::invalid_argument("torus needs at least one dimension");
  Lattice lat;
  lat.periodic_ = true;
  lat.dimension_ = static_cast<int>(dims.size());
  std::size_t n = 1;
  for (int c : dims) {
    if (c <= 0) throw std::invalid_argument("cell dimensions must be positive");
    n *= static_cast<std::size_t>(c);
  }
  lat.dims_ = std::move(dims);
  lat.num_sites_ = n;
  const auto d = static_cast<std::size_t>(lat.dimension_);
  lat.coords_.resize(n * d);
  for (std::size_t s = 0; s < n; ++s) {
    std::size_t rem = s;
    for (std::size_t i = d; i-- > 0;) {
      const auto c = static_cast<std::size_t>(lat.dims_[i]);
      lat.coords_[s * d + i] = static_cast<int>(rem % c);
      rem /= c;
    }
  }
  lat.build_neighbors();
  return lat;
}

Lattice Lattice::ball(int dimension, int radius) {
  if (dimension <= 0) throw std::invalid_argument("dimension must be positive");
  if (radius < 0) throw std::invalid_argument("radius must be nonnegative");
  Lattice lat;
  lat.periodic_ = false;
  lat.dimension_ = dimension;
  lat.radius_ = radius;
  const int side = 2 * radius + 1;
  lat.dims_.assign(static_cast<std::size_t>(dimension), side);
  std::size_t cube = 1;
  for (int i = 0; i < dimension; ++i) cube *= static_cast<std::size_t>(side);
  lat.dense_.assign(cube, -1);

  const auto d = static_cast<std::size_t>(dimension);
  Site x(d, -radius);
  for (std::size_t offset = 0; offset < cube; ++offset) {
    // offset enumerates the cube lexicographically (first coordinate most significant)
    std::size_t rem = offset;
    for (std::size_t i = d; i-- > 0;) {
      x[i] = static_cast<int>(rem % static_cast<std::size_t>(side)) - radius;
      rem /= static_cast<std::size_t>(side);
    }
    if (l1_norm(x) > radius) continue;
    lat.dense_[offset] = static_cast<std::int64_t>(lat.num_sites_++);
    lat.coords_.insert(lat.coords_.end(), x.begin(), x.end());
  }
  lat.build_neighbors();
  return lat;
}

std::optional<std::size_t> Lattice::index_of(std::span<const int> x) const {
  std::size_t offset = 0;
  if (periodic_) {
    for (std::size_t i = 0; i < dims_.size(); ++i)
      offset = offset * static_cast<std::size_t>(dims_[i]) +
               static_cast<std::size_t>(positive_mod(x[i], dims_[i]));
    return offset;
  }
  if (l1_norm(x) > radius_) return std::nullopt;
  const auto side = static_cast<std::size_t>(2 * radius_ + 1);
  for (std::size_t i = 0; i < dims_.size(); ++i)
    offset = offset * side + static_cast<std::size_t>(x[i] + radius_);
  return static_cast<std::size_t>(dense_[offset]);
}

Site Lattice::reduce(std::span<const int> x) const {
  Site r(x.begin(), x.end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = positive_mod(r[i], dims_[i]);
  return r;
}

void Lattice::build_neighbors() {
  const int nd = 2 * dimension_;
  neighbors_.assign(num_sites_ * static_cast<std::size_t>(nd), -1);
  Site y(static_cast<std::size_t>(dimension_));
  for (std::size_t s = 0; s < num_sites_; ++s) {
    auto x = coords(s);
    for (int k = 0; k < nd; ++k) {
      const Direction dir{k};
      std::copy(x.begin(), x.end(), y.begin());
      y[static_cast<std::size_t>(dir.axis())] += dir.sign();
      if (auto idx = index_of(y))
        neighbors_[s * static_cast<std::size_t>(nd) + static_cast<std::size_t>(k)] =
            static_cast<std::int64_t>(*idx);
    }
  }
}

}  // namespace rwre
