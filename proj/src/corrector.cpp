#include "rwre/corrector.hpp"

#include <cmath>

#include <fmt/format.h>

#include "rwre/error.hpp"

namespace rwre {

Corrector::Corrector(std::shared_ptr<const Lattice> lattice, std::vector<double> potential)
    : lattice_(std::move(lattice)), potential_(std::move(potential)) {
  if (potential_.size() != lattice_->size())
    throw CellMismatch(fmt::format("potential has {} values for {} sites", potential_.size(), lattice_->size()));
  for (double v : potential_)
    if (!std::isfinite(v)) throw ValidationError("potential must be finite");
}

Corrector Corrector::zero(const Environment& env) {
  return Corrector(env.shared_lattice(), std::vector<double>(env.num_sites(), 0.0));
}

double Corrector::edge(std::size_t site, Direction dir) const {
  const auto nb = lattice_->neighbor(site, dir);
  if (nb < 0) throw EdgeUndefined("corrector edge leaves the box");
  return potential_[static_cast<std::size_t>(nb)] - potential_[site];
}

void Corrector::require_compatible(const Environment& env) const {
  if (!(env.lattice() == *lattice_)) throw CellMismatch("corrector and environment live on different lattices");
}

double Corrector::closed_loop_residual() const {
  const Lattice& lat = *lattice_;
  const int d = lat.dimension();
  double worst = 0.0;
  for (std::size_t x = 0; x < lat.size(); ++x) {
    for (int k = 0; k < 2 * d; ++k) {
      const Direction e{k};
      const auto y = lat.neighbor(x, e);
      if (y < 0) continue;
      worst = std::max(worst, std::abs(edge(x, e) + edge(static_cast<std::size_t>(y), e.opposite())));
    }
    for (int i = 0; i < d; ++i) {
      for (int j = i + 1; j < d; ++j) {
        const auto ei = Direction::positive(i), ej = Direction::positive(j);
        const auto xi = lat.neighbor(x, ei), xj = lat.neighbor(x, ej);
        if (xi < 0 || xj < 0) continue;
        const auto xij = lat.neighbor(static_cast<std::size_t>(xi), ej);
        if (xij < 0) continue;
        const double loop = edge(x, ei) + edge(static_cast<std::size_t>(xi), ej) -
                            edge(static_cast<std::size_t>(xj), ei) - edge(x, ej);
        worst = std::max(worst, std::abs(loop));
      }
    }
  }
  if (lat.periodic()) {
    // lines winding once around the torus along each axis
    for (int i = 0; i < d; ++i) {
      const auto ei = Direction::positive(i);
      for (std::size_t x = 0; x < lat.size(); ++x) {
        if (lat.coords(x)[static_cast<std::size_t>(i)] != 0) continue;
        double sum = 0.0;
        std::size_t y = x;
        for (int step = 0; step < lat.dims()[static_cast<std::size_t>(i)]; ++step) {
          sum += edge(y, ei);
          y = static_cast<std::size_t>(lat.neighbor(y, ei));
        }
        worst = std::max(worst, std::abs(sum));
      }
    }
  }
  return worst;
}

double Corrector::mean_residual() const {
  if (!lattice_->periodic()) return 0.0;
  double worst = 0.0;
  for (int k = 0; k < 2 * lattice_->dimension(); ++k) {
    double sum = 0.0;
    for (std::size_t x = 0; x < lattice_->size(); ++x) sum += edge(x, Direction{k});
    worst = std::max(worst, std::abs(sum) / static_cast<double>(lattice_->size()));
  }
  return worst;
}

double Corrector::moment(double beta) const {
  double worst = 0.0;
  for (int k = 0; k < 2 * lattice_->dimension(); ++k) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t x = 0; x < lattice_->size(); ++x) {
      if (lattice_->neighbor(x, Direction{k}) < 0) continue;
      sum += std::pow(std::abs(edge(x, Direction{k})), beta);
      ++count;
    }
    if (count) worst = std::max(worst, sum / static_cast<double>(count));
  }
  return worst;
}

void Corrector::check_class_k(double tol) const {
  const double scale = 1.0 + [&] {
    double m = 0.0;
    for (double v : potential_) m = std::max(m, std::abs(v));
    return m;
  }();
  if (double r = closed_loop_residual(); r > tol * scale)
    throw ClassKViolation(fmt::format("closed-loop residual {:.3e}", r));
  if (double r = mean_residual(); r > tol * scale)
    throw ClassKViolation(fmt::format("mean-zero residual {:.3e}", r));
  if (!std::isfinite(moment(2.0))) throw ClassKViolation("moment is not finite");
}

}  // namespace rwre
