#include "rwre/corrector_diag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double scaled_tol(std::span<const double> table, double tol) {
  double m = 0.0;
  for (double v : table)
    if (std::isfinite(v)) m = std::max(m, std::abs(v));
  return tol * (1.0 + m);
}

// Antisymmetry and elementary plaquettes; entries across a box edge are NaN.
void check_loops(const Lattice& lat, std::span<const double> table, double tol) {
  const int d = lat.dimension();
  const auto nd = static_cast<std::size_t>(2 * d);
  auto at = [&](std::size_t s, Direction e) { return table[s * nd + static_cast<std::size_t>(e.index)]; };
  for (std::size_t s = 0; s < lat.size(); ++s)
    for (int e = 0; e < 2 * d; ++e) {
      const Direction dir{e};
      const auto nb = lat.neighbor(s, dir);
      if (nb < 0) continue;
      const double r = at(s, dir) + at(static_cast<std::size_t>(nb), dir.opposite());
      if (!(std::abs(r) <= tol))
        throw ClassKViolation(fmt::format("antisymmetry fails at site {} direction {}: {:.3e}", s, e, r));
    }
  for (std::size_t s = 0; s < lat.size(); ++s)
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b) {
        const Direction ea = Direction::positive(a), eb = Direction::positive(b);
        const auto x1 = lat.neighbor(s, ea), x2 = lat.neighbor(s, eb);
        if (x1 < 0 || x2 < 0) continue;
        const auto x3 = lat.neighbor(static_cast<std::size_t>(x1), eb);
        if (x3 < 0) continue;
        const double loop = at(s, ea) + at(static_cast<std::size_t>(x1), eb) - at(static_cast<std::size_t>(x2), ea) -
                            at(s, eb);
        if (!(std::abs(loop) <= tol))
          throw ClassKViolation(fmt::format("plaquette at site {} axes ({},{}) sums to {:.3e}", s, a, b, loop));
      }
}

std::vector<double> gradient_table(const Corrector& c) {
  const Lattice& lat = c.lattice();
  const auto nd = static_cast<std::size_t>(2 * lat.dimension());
  std::vector<double> t(lat.size() * nd, kNaN);
  for (std::size_t s = 0; s < lat.size(); ++s)
    for (std::size_t e = 0; e < nd; ++e) {
      const auto nb = lat.neighbor(s, Direction{static_cast<int>(e)});
      if (nb >= 0) t[s * nd + e] = c.phi(static_cast<std::size_t>(nb)) - c.phi(s);
    }
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------

PeriodicEdgeField::PeriodicEdgeField(std::vector<int> cell_dims, std::vector<double> table)
    : lattice_(Lattice::torus(std::move(cell_dims))), table_(std::move(table)) {
  if (table_.size() != lattice_.size() * static_cast<std::size_t>(2 * lattice_.dimension()))
    throw CellMismatch("edge table does not match the cell");
  for (double v : table_)
    if (!std::isfinite(v)) throw ClassKViolation("edge values must be finite");
}

PeriodicEdgeField PeriodicEdgeField::from_corrector(const Corrector& c) {
  if (!c.lattice().periodic()) throw ValidationError("periodic edge field needs a torus corrector");
  const auto dims = c.lattice().dims();
  return PeriodicEdgeField(std::vector<int>(dims.begin(), dims.end()), gradient_table(c));
}

double PeriodicEdgeField::edge(std::span<const int> x, Direction dir) const {
  const auto site = *lattice_.index_of(x);
  return table_[site * static_cast<std::size_t>(2 * lattice_.dimension()) + static_cast<std::size_t>(dir.index)];
}

void PeriodicEdgeField::validate(double tol) const {
  const double t = scaled_tol(table_, tol);
  check_loops(lattice_, table_, t);
  const int d = lattice_.dimension();
  const auto nd = static_cast<std::size_t>(2 * d);
  // every straight line around the torus, and the cell mean per direction
  for (int a = 0; a < d; ++a) {
    const Direction ea = Direction::positive(a);
    const int period = lattice_.dims()[static_cast<std::size_t>(a)];
    double mean = 0.0;
    for (std::size_t s = 0; s < lattice_.size(); ++s) {
      mean += table_[s * nd + static_cast<std::size_t>(ea.index)];
      if (lattice_.coords(s)[static_cast<std::size_t>(a)] != 0) continue;
      double line = 0.0;
      std::size_t cur = s;
      for (int k = 0; k < period; ++k) {
        line += table_[cur * nd + static_cast<std::size_t>(ea.index)];
        cur = static_cast<std::size_t>(lattice_.neighbor(cur, ea));
      }
      if (!(std::abs(line) <= t * period))
        throw ClassKViolation(fmt::format("loop around axis {} from site {} sums to {:.3e}", a, s, line));
    }
    mean /= static_cast<double>(lattice_.size());
    if (!(std::abs(mean) <= t)) throw ClassKViolation(fmt::format("mean of F along axis {} is {:.3e}", a, mean));
  }
}

double PeriodicEdgeField::sup_norm() const {
  double m = 0.0;
  for (double v : table_) m = std::max(m, std::abs(v));
  return m;
}

BoxEdgeField::BoxEdgeField(int dimension, int radius, std::vector<double> table)
    : lattice_(Lattice::ball(dimension, radius)), table_(std::move(table)) {
  const auto nd = static_cast<std::size_t>(2 * dimension);
  if (table_.size() != lattice_.size() * nd) throw CellMismatch("edge table does not match the box");
  for (std::size_t s = 0; s < lattice_.size(); ++s)
    for (std::size_t e = 0; e < nd; ++e) {
      if (lattice_.neighbor(s, Direction{static_cast<int>(e)}) < 0) table_[s * nd + e] = kNaN;
      else if (!std::isfinite(table_[s * nd + e])) throw ClassKViolation("edge values must be finite");
    }
}

BoxEdgeField BoxEdgeField::from_corrector(const Corrector& c) {
  if (c.lattice().periodic()) throw ValidationError("box edge field needs a box corrector");
  return BoxEdgeField(c.lattice().dimension(), c.lattice().radius(), gradient_table(c));
}

double BoxEdgeField::edge(std::span<const int> x, Direction dir) const {
  const auto site = lattice_.index_of(x);
  if (!site || lattice_.neighbor(*site, dir) < 0) throw EdgeUndefined("edge leaves the box");
  return table_[*site * static_cast<std::size_t>(2 * lattice_.dimension()) + static_cast<std::size_t>(dir.index)];
}

void BoxEdgeField::validate(double tol) const { check_loops(lattice_, table_, scaled_tol(table_, tol)); }

// ---------------------------------------------------------------------------

double path_sum(const EdgeField& field, std::span<const int> z) {
  std::vector<int> order(static_cast<std::size_t>(field.dimension()));
  std::iota(order.begin(), order.end(), 0);
  return path_sum(field, z, order);
}

double path_sum(const EdgeField& field, std::span<const int> z, std::span<const int> axis_order) {
  const auto d = static_cast<std::size_t>(field.dimension());
  if (z.size() != d || axis_order.size() != d) throw ValidationError("path target has wrong dimension");
  Site x(d, 0);
  double sum = 0.0;
  for (int a : axis_order) {
    const auto ax = static_cast<std::size_t>(a);
    const int s = z[ax] > 0 ? 1 : -1;
    const Direction dir = s > 0 ? Direction::positive(a) : Direction::negative(a);
    while (x[ax] != z[ax]) {
      sum += field.edge(x, dir);
      x[ax] += s;
    }
  }
  return sum;
}

double path_sum_along(const EdgeField& field, std::span<const Site> path) {
  double sum = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    Site step(path[i].size());
    for (std::size_t a = 0; a < step.size(); ++a) step[a] = path[i][a] - path[i - 1][a];
    const auto dir = direction_of(step);
    if (!dir) throw NotNearestNeighbor(fmt::format("path step {} is not a unit step", i));
    sum += field.edge(path[i - 1], *dir);
  }
  return sum;
}

// ---------------------------------------------------------------------------

PathSumField::PathSumField(std::shared_ptr<const EdgeField> field) : field_(std::move(field)) {
  if (!field_) throw ValidationError("null edge field");
}

bool PathSumField::available(std::span<const int> z) const { return l1_norm(z) <= field_->reach(); }

void PathSumField::tabulate(int radius) {
  const auto d = static_cast<std::size_t>(dimension());
  const std::size_t side = static_cast<std::size_t>(2 * radius + 1);
  std::size_t total = 1;
  for (std::size_t a = 0; a < d; ++a) total *= side;
  table_.assign(total, kNaN);
  table_radius_ = radius;

  // Fill in order of l1 norm: the canonical predecessor of z steps back along
  // its last nonzero axis.
  std::vector<std::vector<std::size_t>> shells(d * static_cast<std::size_t>(radius) + 1);
  Site z(d);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    int norm = 0;
    for (std::size_t a = d; a-- > 0;) {
      z[a] = static_cast<int>(rem % side) - radius;
      rem /= side;
      norm += std::abs(z[a]);
    }
    if (norm <= field_->reach()) shells[static_cast<std::size_t>(norm)].push_back(idx);
  }
  std::vector<std::size_t> stride(d, 1);
  for (std::size_t a = d - 1; a-- > 0;) stride[a] = stride[a + 1] * side;
  table_[total / 2] = 0.0;
  for (std::size_t k = 1; k < shells.size(); ++k)
    for (std::size_t idx : shells[k]) {
      std::size_t rem = idx;
      for (std::size_t a = d; a-- > 0;) {
        z[a] = static_cast<int>(rem % side) - radius;
        rem /= side;
      }
      std::size_t last = d - 1;
      while (z[last] == 0) --last;
      const int s = z[last] > 0 ? 1 : -1;
      const std::size_t prev = s > 0 ? idx - stride[last] : idx + stride[last];
      z[last] -= s;
      const Direction dir = s > 0 ? Direction::positive(static_cast<int>(last)) : Direction::negative(static_cast<int>(last));
      table_[idx] = table_[prev] + field_->edge(z, dir);
    }
}

double PathSumField::at(std::span<const int> z) const {
  if (!available(z)) throw OutOfBox(fmt::format("point with |z|_1 = {} beyond the field's reach", l1_norm(z)));
  if (table_radius_ >= 0) {
    const auto side = static_cast<std::size_t>(2 * table_radius_ + 1);
    std::size_t idx = 0;
    bool inside = true;
    for (int c : z) {
      if (std::abs(c) > table_radius_) inside = false;
      idx = idx * side + static_cast<std::size_t>(c + table_radius_);
    }
    if (inside) return table_[idx];
  }
  return path_sum(*field_, z);
}

std::vector<double> interpolation_weights(std::span<const double> t) {
  const std::size_t d = t.size();
  std::vector<double> w(std::size_t{1} << d, 1.0);
  for (std::size_t a = 0; a < d; ++a) {
    const double u = t[a] - std::floor(t[a]);
    for (std::size_t mask = 0; mask < w.size(); ++mask) w[mask] *= (mask >> a) & 1 ? u : 1.0 - u;
  }
  return w;
}

double interpolate(const PathSumField& f, std::span<const double> t) {
  const std::size_t d = t.size();
  if (static_cast<int>(d) != f.dimension()) throw ValidationError("interpolation point has wrong dimension");
  const auto w = interpolation_weights(t);
  double total_w = 0.0, value = 0.0;
  Site corner(d);
  for (std::size_t mask = 0; mask < w.size(); ++mask) {
    if (w[mask] < 0.0 || w[mask] > 1.0) throw std::logic_error("interpolation weight outside [0,1]");
    total_w += w[mask];
    if (w[mask] == 0.0) continue;
    for (std::size_t a = 0; a < d; ++a) corner[a] = static_cast<int>(std::floor(t[a])) + static_cast<int>((mask >> a) & 1);
    value += w[mask] * f.at(corner);
  }
  if (std::abs(total_w - 1.0) > 1e-12) throw std::logic_error("interpolation weights do not sum to 1");
  return value;
}

double g_n(const PathSumField& f, int n, std::span<const double> s) {
  if (n <= 0) throw ValidationError("n must be positive");
  std::vector<double> t(s.size());
  for (std::size_t a = 0; a < s.size(); ++a) t[a] = n * s[a];
  return interpolate(f, t) / n;
}

std::vector<SublinearityRow> sublinearity_profile(PathSumField& f, std::span<const int> n_list,
                                                  std::size_t sample_count, std::uint64_t seed) {
  const int d = f.dimension();
  if (d > 2) throw ValidationError("sublinearity profile supports d <= 2");
  if (n_list.empty()) return {};
  for (int n : n_list)
    if (n <= 0) throw ValidationError("n must be positive");
  f.field().validate();
  const int n_max = *std::max_element(n_list.begin(), n_list.end());
  if (n_max > f.field().reach()) throw OutOfBox(fmt::format("field does not reach radius {}", n_max));
  if (f.tabulated_radius() < n_max) f.tabulate(n_max);

  // shell_sup[k] = max |f| found on the shell |z|_1 = k
  std::vector<double> shell_sup(static_cast<std::size_t>(n_max) + 1, 0.0);
  std::vector<std::size_t> shell_count(shell_sup.size(), 0);
  std::vector<bool> shell_exact(shell_sup.size(), true);
  shell_count[0] = 1;
  for (int k = 1; k <= n_max; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    if (d == 1) {
      shell_sup[ku] = std::max(std::abs(f.at(std::vector<int>{k})), std::abs(f.at(std::vector<int>{-k})));
      shell_count[ku] = 2;
      continue;
    }
    const std::size_t shell_size = 4 * ku;
    auto point = [&](std::size_t i) {
      const int q = static_cast<int>(i / ku), j = static_cast<int>(i % ku);
      switch (q) {
        case 0: return std::vector<int>{k - j, j};
        case 1: return std::vector<int>{-j, k - j};
        case 2: return std::vector<int>{-(k - j), -j};
        default: return std::vector<int>{j, -(k - j)};
      }
    };
    if (k <= kExactShellLimit || sample_count >= shell_size) {
      for (std::size_t i = 0; i < shell_size; ++i) shell_sup[ku] = std::max(shell_sup[ku], std::abs(f.at(point(i))));
      shell_count[ku] = shell_size;
    } else {
      CounterRng rng(derive_seed(seed, ku), 0);
      for (std::size_t i = 0; i < sample_count; ++i)
        shell_sup[ku] = std::max(shell_sup[ku], std::abs(f.at(point(rng() % shell_size))));
      shell_count[ku] = sample_count;
      shell_exact[ku] = false;
    }
  }

  std::vector<SublinearityRow> rows;
  for (int n : n_list) {
    SublinearityRow row;
    row.n = n;
    double sup = 0.0;
    for (int k = 0; k <= n; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      sup = std::max(sup, shell_sup[ku]);
      row.samples += shell_count[ku];
      row.exact = row.exact && shell_exact[ku];
    }
    row.sup_value = sup / n;
    rows.push_back(row);
  }
  return rows;
}

double holder_quotient(const PathSumField& f, int n, double delta, std::size_t pairs, std::uint64_t seed) {
  const auto d = static_cast<std::size_t>(f.dimension());
  if (!(delta > 0.0 && delta <= 1.0)) throw ValidationError("Hoelder exponent must lie in (0,1]");
  double worst = 0.0;
  std::vector<double> s(d), t(d);
  for (std::size_t i = 0; i < pairs; ++i) {
    CounterRng rng(seed, i);
    double dist = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      s[a] = 2.0 * rng.uniform() - 1.0;
      t[a] = 2.0 * rng.uniform() - 1.0;
      dist += std::abs(s[a] - t[a]);
    }
    if (dist == 0.0) continue;
    worst = std::max(worst, std::abs(g_n(f, n, s) - g_n(f, n, t)) / std::pow(dist, delta));
  }
  return worst;
}

}  // namespace rwre
