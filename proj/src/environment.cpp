#include "rwre/environment.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "rwre/error.hpp"
#include "rwre/rng.hpp"

namespace rwre {

namespace {

constexpr double kRenormalizeSlack = 8 * std::numeric_limits<double>::epsilon();

// Validates one row in place; rows off by more than a few ulp (but within
// tolerance) are rescaled.
void check_row(std::span<double> row, std::size_t site) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p > 0.0) || !std::isfinite(p))
      throw NonPositiveEntry(fmt::format("site {}: probability {} is not strictly positive", site, p));
    sum += p;
  }
  if (std::abs(sum - 1.0) > kRowSumTolerance)
    throw RowSumError(fmt::format("site {}: row sums to {:.17g}", site, sum));
  if (std::abs(sum - 1.0) > kRenormalizeSlack)
    for (double& p : row) p /= sum;
}

}  // namespace

Environment::Environment(EnvKind kind, std::shared_ptr<const Lattice> lattice, std::vector<double> probs,
                         std::uint64_t seed, double alpha)
    : kind_(kind), lattice_(std::move(lattice)), probs_(std::move(probs)), seed_(seed), alpha_(alpha) {
  if (!(alpha_ > 0.0)) throw InvariantViolation("alpha must be positive");
  const auto nd = static_cast<std::size_t>(num_dirs());
  if (probs_.size() != lattice_->size() * nd)
    throw InvariantViolation(fmt::format("expected {} rows of length {}, got {} entries",
                                         lattice_->size(), nd, probs_.size()));
  for (std::size_t s = 0; s < lattice_->size(); ++s)
    check_row(std::span<double>(probs_.data() + s * nd, nd), s);
}

double Environment::prob_at(std::span<const int> x, Direction dir) const {
  auto idx = lattice_->index_of(x);
  if (!idx) throw BoxTooSmall("site outside the boxed environment");
  return prob(*idx, dir);
}

Environment make_periodic(int dimension, std::vector<int> cell_dims,
                          const std::vector<std::vector<double>>& probs, double alpha) {
  if (dimension <= 0 || static_cast<int>(cell_dims.size()) != dimension)
    throw InvariantViolation("cell_dims must have one entry per dimension");
  for (int c : cell_dims)
    if (c <= 0) throw InvariantViolation("cell dimensions must be positive");
  auto lattice = std::make_shared<const Lattice>(Lattice::torus(std::move(cell_dims)));
  if (probs.size() != lattice->size())
    throw InvariantViolation(fmt::format("expected {} rows, got {}", lattice->size(), probs.size()));
  std::vector<double> flat;
  flat.reserve(probs.size() * static_cast<std::size_t>(2 * dimension));
  for (std::size_t s = 0; s < probs.size(); ++s) {
    if (probs[s].size() != static_cast<std::size_t>(2 * dimension))
      throw InvariantViolation(fmt::format("row {} has length {}, expected {}", s, probs[s].size(), 2 * dimension));
    flat.insert(flat.end(), probs[s].begin(), probs[s].end());
  }
  return Environment(EnvKind::periodic, std::move(lattice), std::move(flat), 0, alpha);
}

Environment make_boxed(int dimension, int radius, std::uint64_t seed, std::vector<double> flat_probs,
                       double alpha) {
  if (dimension <= 0) throw InvariantViolation("dimension must be positive");
  if (radius <= 0) throw InvariantViolation("radius must be positive");
  auto lattice = std::make_shared<const Lattice>(Lattice::ball(dimension, radius));
  return Environment(EnvKind::boxed, std::move(lattice), std::move(flat_probs), seed, alpha);
}

// ---------------------------------------------------------------------------
// Sampling

void validate_law(const SimplexLaw& law, int dimension) {
  const auto nd = static_cast<std::size_t>(2 * dimension);
  auto check = [&](const std::vector<double>& row) {
    if (row.size() != nd) throw ValidationError("law row has wrong length");
    double sum = 0.0;
    for (double p : row) {
      if (!(p > 0.0)) throw NonPositiveEntry("law row has a non-positive entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) throw RowSumError("law row does not sum to 1");
  };
  if (auto* pm = std::get_if<PointMassLaw>(&law)) {
    check(pm->row);
  } else if (auto* fl = std::get_if<FiniteLaw>(&law)) {
    if (fl->rows.empty() || fl->rows.size() != fl->weights.size())
      throw ValidationError("finite law needs one weight per row");
    for (const auto& r : fl->rows) check(r);
    for (double w : fl->weights)
      if (!(w >= 0.0)) throw ValidationError("finite law weights must be nonnegative");
  } else {
    const auto& dl = std::get<DirichletLaw>(law);
    if (dl.concentration.size() != nd) throw ValidationError("Dirichlet concentration has wrong length");
    for (double a : dl.concentration)
      if (!(a > 0.0)) throw ValidationError("Dirichlet concentration must be positive");
  }
}

namespace {

void draw_row(const SimplexLaw& law, CounterRng& rng, std::span<double> out) {
  const std::size_t nd = out.size();
  if (auto* pm = std::get_if<PointMassLaw>(&law)) {
    std::copy(pm->row.begin(), pm->row.end(), out.begin());
  } else if (auto* fl = std::get_if<FiniteLaw>(&law)) {
    std::discrete_distribution<std::size_t> pick(fl->weights.begin(), fl->weights.end());
    const auto& r = fl->rows[pick(rng)];
    std::copy(r.begin(), r.end(), out.begin());
  } else {
    const auto& conc = std::get<DirichletLaw>(law).concentration;
    for (;;) {
      double sum = 0.0;
      for (std::size_t k = 0; k < nd; ++k) {
        std::gamma_distribution<double> gamma(conc[k], 1.0);
        out[k] = gamma(rng);
        sum += out[k];
      }
      bool positive = sum > 0.0;
      for (std::size_t k = 0; k < nd && positive; ++k) {
        out[k] /= sum;
        positive = out[k] > 0.0;
      }
      if (positive) break;  // redraw (deterministically, later counters) on underflow
    }
  }
}

}  // namespace

Environment sample_iid_boxed(int dimension, int radius, std::uint64_t seed, const SimplexLaw& law, double alpha) {
  validate_law(law, dimension);
  const Lattice lattice = Lattice::ball(dimension, radius);
  const auto nd = static_cast<std::size_t>(2 * dimension);
  std::vector<double> flat(lattice.size() * nd);
  for (std::size_t s = 0; s < lattice.size(); ++s) {
    CounterRng rng(seed, s);
    draw_row(law, rng, std::span<double>(flat.data() + s * nd, nd));
  }
  return make_boxed(dimension, radius, seed, std::move(flat), alpha);
}

Environment sample_iid_periodic(int dimension, std::vector<int> cell_dims, std::uint64_t seed, const SimplexLaw& law,
                                double alpha) {
  validate_law(law, dimension);
  std::size_t sites = 1;
  for (int c : cell_dims) sites *= static_cast<std::size_t>(std::max(c, 0));
  std::vector<std::vector<double>> rows(sites, std::vector<double>(static_cast<std::size_t>(2 * dimension)));
  for (std::size_t s = 0; s < sites; ++s) {
    CounterRng rng(seed, s);
    draw_row(law, rng, rows[s]);
  }
  return make_periodic(dimension, std::move(cell_dims), rows, alpha);
}

double moment_norm(const Environment& env, double beta) {
  double best = 0.0;
  for (int k = 0; k < env.num_dirs(); ++k) {
    double sum = 0.0;
    for (std::size_t s = 0; s < env.num_sites(); ++s)
      sum += std::pow(std::abs(std::log(env.prob(s, Direction{k}))), beta);
    best = std::max(best, sum / static_cast<double>(env.num_sites()));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Files

std::string to_json(const Environment& env) {
  std::string out = "{\n";
  out += fmt::format("  \"schema\": \"rwre-environment/1\",\n  \"dimension\": {},\n", env.dimension());
  if (env.periodic()) {
    out += "  \"kind\": \"periodic\",\n  \"cell_dims\": [";
    auto dims = env.cell_dims();
    for (std::size_t i = 0; i < dims.size(); ++i) out += fmt::format("{}{}", i ? ", " : "", dims[i]);
    out += "],\n";
  } else {
    out += fmt::format("  \"kind\": \"boxed\",\n  \"radius\": {},\n  \"seed\": {},\n", env.radius(), env.seed());
  }
  out += fmt::format("  \"alpha\": {:.17g},\n  \"probs\": [\n", env.alpha());
  for (std::size_t s = 0; s < env.num_sites(); ++s) {
    out += "    [";
    auto r = env.row(s);
    for (std::size_t k = 0; k < r.size(); ++k) out += fmt::format("{}{:.17e}", k ? ", " : "", r[k]);
    out += s + 1 < env.num_sites() ? "],\n" : "]\n";
  }
  out += "  ]\n}\n";
  return out;
}

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

int line_of_key(const std::string& text, const std::string& key) {
  auto pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

template <typename T>
T required(const nlohmann::json& j, const std::string& key, const std::string& text) {
  if (!j.contains(key)) throw ParseError("missing required field", 0, key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), line_of_key(text, key), key);
  }
}

}  // namespace

Environment env_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), line_of_offset(text, e.byte), {});
  }
  if (!j.is_object()) throw ParseError("top level must be an object", 1, {});

  const int dimension = required<int>(j, "dimension", text);
  if (dimension <= 0) throw ParseError("must be positive", line_of_key(text, "dimension"), "dimension");
  const auto kind = required<std::string>(j, "kind", text);
  const double alpha = j.contains("alpha") ? required<double>(j, "alpha", text) : kDefaultAlpha;
  const auto rows = required<std::vector<std::vector<double>>>(j, "probs", text);

  try {
    if (kind == "periodic") {
      auto dims = required<std::vector<int>>(j, "cell_dims", text);
      return make_periodic(dimension, std::move(dims), rows, alpha);
    }
    if (kind == "boxed") {
      const int radius = required<int>(j, "radius", text);
      const auto seed = required<std::uint64_t>(j, "seed", text);
      std::vector<double> flat;
      for (const auto& r : rows) {
        if (r.size() != static_cast<std::size_t>(2 * dimension))
          throw InvariantViolation("probability row has wrong length");
        flat.insert(flat.end(), r.begin(), r.end());
      }
      return make_boxed(dimension, radius, seed, std::move(flat), alpha);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& e) {
    throw InvariantViolation(e.what());
  }
  throw ParseError("unknown kind tag '" + kind + "'", line_of_key(text, "kind"), "kind");
}

void save_env(const Environment& env, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path.string() + " for writing");
  out << to_json(env);
}

Environment load_env(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return env_from_json(buf.str());
}

}  // namespace rwre
