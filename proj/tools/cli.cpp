#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <openssl/evp.h>
#include <unistd.h>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "rwre/corrector_diag.hpp"
#include "rwre/entropy.hpp"
#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/mgf.hpp"
#include "rwre/one_dim.hpp"
#include "rwre/rate.hpp"
#include "rwre/rng.hpp"
#include "rwre/variational.hpp"

namespace rwre::cli {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

namespace {

std::string num(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string("nan"); }

// JSON text with every float at 17 significant digits.
void dump(const Json& j, std::string& out, int level) {
  const std::string pad(static_cast<std::size_t>(2 * level), ' ');
  switch (j.type()) {
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? fmt::format("{:.17g}", v) : "null";
      return;
    }
    case Json::value_t::array: {
      bool flat = true;
      for (const auto& e : j) flat = flat && !e.is_structured();
      if (flat) {
        out += "[";
        bool first = true;
        for (const auto& e : j) {
          if (!first) out += ", ";
          first = false;
          dump(e, out, level + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        out += pad + "  ";
        dump(j[i], out, level + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "]";
      return;
    }
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t i = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++i) {
        out += pad + "  " + Json(it.key()).dump() + ": ";
        dump(it.value(), out, level + 1);
        out += i + 1 < j.size() ? ",\n" : "\n";
      }
      out += pad + "}";
      return;
    }
    default:
      out += j.dump();
  }
}

std::string dump(const Json& j) {
  std::string s;
  dump(j, s, 0);
  return s + "\n";
}

Json array_of(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

// ---------------------------------------------------------------------------
// Argument parsing helpers

std::vector<double> parse_csv(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size() && tok.find_first_not_of(' ', used) != std::string::npos) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("{}: cannot parse '{}' as a number", flag, tok));
    }
    if (!std::isfinite(out.back())) throw ValidationError(fmt::format("{}: entries must be finite", flag));
  }
  if (out.empty()) throw ValidationError(flag + ": empty list");
  return out;
}

std::vector<int> parse_int_csv(const std::string& flag, const std::string& text) {
  std::vector<int> out;
  for (double v : parse_csv(flag, text)) {
    if (v != std::floor(v) || v < 1 || v > 1e7) throw ValidationError(flag + ": entries must be positive integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<double> parse_grid(const std::string& flag, const std::string& text) {
  std::stringstream ss(text);
  std::string a, b, c;
  if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c) )
    throw ValidationError(flag + ": expected lo:hi:steps");
  const auto lo = parse_csv(flag, a), hi = parse_csv(flag, b), steps = parse_csv(flag, c);
  if (lo.size() != 1 || hi.size() != 1 || steps.size() != 1 || steps[0] < 1 || steps[0] != std::floor(steps[0]))
    throw ValidationError(flag + ": expected lo:hi:steps with integer steps >= 1");
  if (!(hi[0] >= lo[0])) throw ValidationError(flag + ": hi must not be below lo");
  return linspace(lo[0], hi[0], static_cast<int>(steps[0]));
}

TiltVector parse_lambda(const std::string& text, const Environment& env) {
  auto l = parse_csv("--lambda", text);
  if (static_cast<int>(l.size()) != env.dimension())
    throw ValidationError(fmt::format("--lambda has {} components, environment dimension is {}", l.size(), env.dimension()));
  return l;
}

LambdaSource parse_source(const std::string& s) { return s == "spectral" ? LambdaSource::spectral : LambdaSource::variational; }

// ---------------------------------------------------------------------------

struct Options {
  std::string env, lambda, n_list, r_grid, x_grid, lambda_grid, out, format = "json", method = "exact";
  std::string source = "variational", center, direction, kind = "periodic", cell = "1", concentration, row, manifest;
  std::string table = "ij";
  int n = 10, dim = 1, radius = 8, restarts = 8;
  std::size_t samples = 10000;
  std::uint64_t seed = 0;
  double tol = 1e-8, ball = 0.1, amplitude = 1.0;
  unsigned workers = 1;
  bool seed_given = false;
};

struct Output {
  Json doc;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string summary;
  int exit_code = 0;
  bool json_only = false;
};

McOptions mc_options(const Options& o) { return McOptions{o.samples, o.seed, o.workers}; }

// ---------------------------------------------------------------------------
// Subcommands

Output cmd_env_gen(const Options& o) {
  const auto dims = parse_int_csv("--cell", o.cell);
  const int d = o.dim;
  if (d < 1) throw ValidationError("--dim must be positive");
  SimplexLaw law;
  if (!o.row.empty()) {
    law = PointMassLaw{parse_csv("--row", o.row)};
  } else {
    std::vector<double> conc(static_cast<std::size_t>(2 * d), 1.0);
    if (!o.concentration.empty()) conc = parse_csv("--concentration", o.concentration);
    law = DirichletLaw{conc};
  }
  Environment env = o.kind == "boxed" ? sample_iid_boxed(d, o.radius, o.seed, law)
                                      : sample_iid_periodic(d, std::vector<int>(dims.begin(), dims.end()), o.seed, law);
  Output out;
  out.doc = Json::parse(to_json(env));
  out.json_only = true;
  out.summary = fmt::format("env-gen: {} d={} sites={}", o.kind, d, env.num_sites());
  return out;
}

Output cmd_mgf(const Options& o) {
  const Environment env = load_env(o.env);
  const auto lambda = parse_lambda(o.lambda, env);
  MgfEstimate est;
  if (o.method == "exact") est = exact_mgf(env, lambda, o.n);
  else if (o.method == "brute") est = brute_force_mgf(env, lambda, o.n);
  else est = mc_mgf(env, lambda, o.n, mc_options(o));

  Output out;
  out.doc = {{"schema", "rwre-mgf/1"}, {"lambda", array_of(lambda)}, {"n", est.n},
             {"method", std::string(to_string(est.method))}, {"value", est.value}};
  out.doc["stderr"] = est.stderr_log ? Json(*est.stderr_log) : Json();
  out.doc["samples"] = est.samples ? Json(*est.samples) : Json();
  out.doc["seed"] = est.samples ? Json(o.seed) : Json();
  for (int a = 0; a < env.dimension(); ++a) out.header.push_back(fmt::format("lambda_{}", a + 1));
  for (const char* h : {"n", "method", "value", "stderr", "samples", "seed"}) out.header.push_back(h);
  std::vector<std::string> row;
  for (double l : lambda) row.push_back(num(l));
  row.push_back(std::to_string(est.n));
  row.push_back(std::string(to_string(est.method)));
  row.push_back(num(est.value));
  row.push_back(est.stderr_log ? num(*est.stderr_log) : "");
  row.push_back(est.samples ? std::to_string(*est.samples) : "");
  row.push_back(est.samples ? std::to_string(o.seed) : "");
  out.rows.push_back(row);
  out.summary = fmt::format("mgf: method={} n={} value={}", to_string(est.method), est.n, num(est.value));
  return out;
}

Output cmd_lambda(const Options& o) {
  const Environment env = load_env(o.env);
  const auto lambda = parse_lambda(o.lambda, env);
  Output out;
  for (int a = 0; a < env.dimension(); ++a) out.header.push_back(fmt::format("lambda_{}", a + 1));
  for (const char* h : {"source", "value", "spectral_value", "gap", "iterations"}) out.header.push_back(h);
  std::vector<std::string> row;
  for (double l : lambda) row.push_back(num(l));
  if (parse_source(o.source) == LambdaSource::spectral) {
    const auto s = spectral_solve(env, lambda, std::min(o.tol, 1e-13));
    out.doc = {{"schema", "rwre-lambda/1"}, {"source", "spectral"}, {"lambda", array_of(lambda)},
               {"value", s.value}, {"spectral_value", s.value}, {"gap", 0.0}, {"iterations", s.iterations},
               {"lower_ratio", s.lower_ratio}, {"upper_ratio", s.upper_ratio}, {"eigenvector", array_of(s.eigenvector)}};
    for (auto v : {std::string("spectral"), num(s.value), num(s.value), num(0.0), std::to_string(s.iterations)})
      row.push_back(v);
    out.summary = fmt::format("lambda: spectral value={}", num(s.value));
  } else {
    VariationalOptions vo;
    vo.tol = o.tol;
    const auto r = variational_lambda(env, lambda, vo);
    out.doc = {{"schema", "rwre-lambda/1"}, {"source", "variational"}, {"lambda", array_of(lambda)},
               {"value", r.value}, {"spectral_value", r.spectral_value}, {"gap", r.gap},
               {"iterations", r.iterations}, {"tol", r.tol},
               {"argmin_potential", array_of(r.argmin_potential.potential())}};
    for (auto v : {std::string("variational"), num(r.value), num(r.spectral_value), num(r.gap),
                   std::to_string(r.iterations)})
      row.push_back(v);
    out.summary = fmt::format("lambda: value={} gap={}", num(r.value), num(r.gap));
  }
  out.rows.push_back(row);
  return out;
}

Output cmd_gamma(const Options& o) {
  const Environment env = load_env(o.env);
  const auto lambda = parse_lambda(o.lambda, env);
  GammaOptions go;
  go.tol = std::max(o.tol, 1e-12);
  go.restarts = o.restarts;
  go.seed = o.seed;
  const auto r = gamma_lower(env, lambda, go);
  Output out;
  out.doc = {{"schema", "rwre-gamma/1"}, {"lambda", array_of(lambda)}, {"value", r.value},
             {"invariance_residual", r.invariance_residual}, {"best_restart", r.best_restart},
             {"iterations", r.iterations}, {"restarts", o.restarts}, {"seed", o.seed},
             {"kernel", array_of(r.argmax.q)}, {"density", array_of(r.argmax.phi)}};
  for (int a = 0; a < env.dimension(); ++a) out.header.push_back(fmt::format("lambda_{}", a + 1));
  for (const char* h : {"value", "invariance_residual", "best_restart", "iterations"}) out.header.push_back(h);
  std::vector<std::string> row;
  for (double l : lambda) row.push_back(num(l));
  row.push_back(num(r.value));
  row.push_back(num(r.invariance_residual));
  row.push_back(std::to_string(r.best_restart));
  row.push_back(std::to_string(r.iterations));
  out.rows.push_back(row);
  out.summary = fmt::format("gamma: value={} residual={}", num(r.value), num(r.invariance_residual));
  return out;
}

std::vector<double> default_lambda_axis(const Options& o, int d) {
  if (!o.lambda_grid.empty()) return parse_grid("--lambda-grid", o.lambda_grid);
  return linspace(-6.0, 6.0, d == 1 ? 201 : 41);
}

Output cmd_rate(const Options& o) {
  const Environment env = load_env(o.env);
  const int d = env.dimension();
  const auto ts = parse_grid("--x-grid", o.x_grid.empty() ? "-1:1:41" : o.x_grid);
  std::vector<double> dir(static_cast<std::size_t>(d), 0.0);
  dir[0] = 1.0;
  if (!o.direction.empty()) dir = parse_csv("--direction", o.direction);
  if (static_cast<int>(dir.size()) != d) throw ValidationError("--direction must have one entry per dimension");
  std::vector<std::vector<double>> xs;
  for (double t : ts) {
    std::vector<double> x(dir.size());
    for (std::size_t a = 0; a < x.size(); ++a) x[a] = t * dir[a];
    xs.push_back(x);
  }
  const auto axis = default_lambda_axis(o, d);
  const auto curve = rate_curve(env, xs, axis, o.tol, parse_source(o.source));

  Output out;
  Json pts = Json::array();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const bool inf = is_infinite_rate(curve.values[i]);
    pts.push_back({{"x", array_of(xs[i])}, {"I", curve.values[i]}, {"infinite", inf}});
    std::vector<std::string> row;
    for (double c : xs[i]) row.push_back(num(c));
    row.push_back(num(curve.values[i]));
    row.push_back(inf ? "1" : "0");
    out.rows.push_back(row);
  }
  out.doc = {{"schema", "rwre-rate/1"}, {"source", to_string(curve.source)}, {"tol", curve.tol},
             {"infinite_sentinel", kInfiniteRate}, {"points", pts}, {"lambda_axis", array_of(curve.lambda_axis)},
             {"lambda_values", array_of(curve.lambda_values)}};
  for (int a = 0; a < d; ++a) out.header.push_back(fmt::format("x_{}", a + 1));
  out.header.push_back("I");
  out.header.push_back("infinite");
  out.summary = fmt::format("rate: {} points, source={}", xs.size(), to_string(curve.source));
  return out;
}

Output cmd_oned(const Options& o) {
  const Env1D env = Env1D::from(load_env(o.env));
  const auto rs = parse_grid("--r-grid", o.r_grid.empty() ? "-3:0.5:71" : o.r_grid);
  const auto xs = parse_grid("--x-grid", o.x_grid.empty() ? "-0.9:0.9:19" : o.x_grid);
  const auto curves = g_h_curves(env, rs);
  const auto rep = verify_I_equals_J(env, xs, 1e-3, parse_source(o.source));

  Output out;
  Json c = Json::array();
  for (std::size_t i = 0; i < rs.size(); ++i)
    c.push_back({{"r", rs[i]}, {"g", curves.g[i]}, {"h", curves.h[i]}, {"g_convergent", bool(curves.g_convergent[i])},
                 {"h_convergent", bool(curves.h_convergent[i])}});
  Json t = Json::array();
  for (std::size_t i = 0; i < rep.xs.size(); ++i)
    t.push_back({{"x", rep.xs[i]}, {"I", rep.I[i]}, {"J", rep.J[i]}, {"gap", rep.gap[i]}});
  out.doc = {{"schema", "rwre-oned/1"},
             {"r_crit_g", curves.r_crit_g},
             {"r_crit_h", curves.r_crit_h},
             {"hypotheses",
              {{"min_prob", rep.hypotheses.min_prob},
               {"mean_log_ratio", rep.hypotheses.mean_log_ratio},
               {"elliptic", rep.hypotheses.elliptic},
               {"right_transient_or_recurrent", rep.hypotheses.right_transient_or_recurrent}}},
             {"curves", c},
             {"equivalence",
              {{"source", to_string(rep.source)}, {"max_gap", rep.max_gap}, {"argmax", rep.argmax},
               {"equivalent", rep.equivalent}, {"table", t}}}};
  if (o.table == "gh") {
    out.header = {"r", "g", "h", "g_convergent", "h_convergent"};
    for (std::size_t i = 0; i < rs.size(); ++i)
      out.rows.push_back({num(rs[i]), curves.g_convergent[i] ? num(curves.g[i]) : "",
                          curves.h_convergent[i] ? num(curves.h[i]) : "", curves.g_convergent[i] ? "1" : "0",
                          curves.h_convergent[i] ? "1" : "0"});
  } else {
    out.header = {"x", "I", "J", "gap"};
    for (std::size_t i = 0; i < rep.xs.size(); ++i)
      out.rows.push_back({num(rep.xs[i]), num(rep.I[i]), num(rep.J[i]), num(rep.gap[i])});
  }
  out.summary = fmt::format("oned: r_crit={} max|I-J|={} at x={}{}", num(curves.r_crit_g), num(rep.max_gap),
                            num(rep.argmax), rep.hypotheses.satisfied() ? "" : " (hypotheses fail, not claimed)");
  return out;
}

std::shared_ptr<const EdgeField> sublin_field(const Options& o, const Environment& env, double& sup_phi) {
  std::vector<double> phi;
  std::shared_ptr<const Lattice> lat = env.shared_lattice();
  if (!o.lambda.empty()) {
    if (!env.periodic()) throw ValidationError("--lambda needs a periodic environment");
    VariationalOptions vo;
    vo.tol = o.tol;
    const auto r = variational_lambda(env, parse_lambda(o.lambda, env), vo);
    phi.assign(r.argmin_potential.potential().begin(), r.argmin_potential.potential().end());
  } else {
    CounterRng rng(derive_seed(o.seed, 0x706f74), 0);
    for (std::size_t s = 0; s < env.num_sites(); ++s) phi.push_back(o.amplitude * (2.0 * rng.uniform() - 1.0));
  }
  sup_phi = 0.0;
  for (double v : phi) sup_phi = std::max(sup_phi, std::abs(v));
  const Corrector c(lat, std::move(phi));
  if (env.periodic()) return std::make_shared<PeriodicEdgeField>(PeriodicEdgeField::from_corrector(c));
  return std::make_shared<BoxEdgeField>(BoxEdgeField::from_corrector(c));
}

Output cmd_sublin(const Options& o) {
  const Environment env = load_env(o.env);
  const auto ns = parse_int_csv("--n-list", o.n_list.empty() ? "8,16,32,64,128,256,512" : o.n_list);
  double sup_phi = 0.0;
  PathSumField f(sublin_field(o, env, sup_phi));
  const auto rows = sublinearity_profile(f, ns, o.samples, o.seed);
  Output out;
  Json r = Json::array();
  out.header = {"n", "sup_value", "exact", "samples", "bound"};
  for (const auto& row : rows) {
    const double bound = 2.0 * sup_phi / row.n;
    r.push_back({{"n", row.n}, {"sup_value", row.sup_value}, {"exact", row.exact}, {"samples", row.samples},
                 {"bound", bound}});
    out.rows.push_back({std::to_string(row.n), num(row.sup_value), row.exact ? "1" : "0", std::to_string(row.samples),
                        num(bound)});
  }
  out.doc = {{"schema", "rwre-sublin/1"}, {"field", o.lambda.empty() ? "random-potential" : "optimal-corrector"},
             {"sup_phi", sup_phi}, {"sample_count", o.samples}, {"seed", o.seed}, {"profile", r}};
  out.summary = fmt::format("sublin: {} rows, last={}", rows.size(), rows.empty() ? "" : num(rows.back().sup_value));
  return out;
}

// inf of I over the sup-norm ball; d = 1 refines with Lambda, d = 2 uses the grid.
double ball_rate(const Environment& env, std::span<const double> center, double radius, std::span<const double> axis,
                 LambdaSource source, double tol) {
  const int d = env.dimension();
  std::vector<std::vector<double>> none;
  const auto curve = rate_curve(env, none, axis, tol, source);
  if (d == 1) {
    ScalarFunction lam = [&](double l) {
      const double v[1] = {l};
      if (source == LambdaSource::spectral) return spectral_lambda(env, v);
      VariationalOptions vo;
      vo.tol = tol;
      return variational_lambda(env, v, vo).value;
    };
    return ball_infimum_1d([&](double x) { return legendre_transform(axis, curve.lambda_values, x, lam); }, center[0],
                           radius, 201);
  }
  if (d != 2) throw ValidationError("ball rate supports d <= 2");
  double best = kInfiniteRate;
  const auto g0 = linspace(center[0] - radius, center[0] + radius, 21);
  const auto g1 = linspace(center[1] - radius, center[1] + radius, 21);
  for (double a : g0)
    for (double b : g1) {
      const double x[2] = {a, b};
      best = std::min(best, legendre_transform(2, axis, curve.lambda_values, x));
    }
  return best;
}

Output cmd_ldp(const Options& o) {
  const Environment env = load_env(o.env);
  const int d = env.dimension();
  const auto center = o.center.empty() ? std::vector<double>(static_cast<std::size_t>(d), 0.0)
                                       : parse_csv("--center", o.center);
  const auto ns = parse_int_csv("--n-list", o.n_list.empty() ? "32,64,128,256" : o.n_list);
  const auto pts = empirical_ldp(env, center, o.ball, ns, mc_options(o));
  std::optional<double> inf_rate;
  if (env.periodic())
    inf_rate = ball_rate(env, center, o.ball, default_lambda_axis(o, d), parse_source(o.source), o.tol);

  Output out;
  Json r = Json::array();
  out.header = {"n", "value", "count", "samples", "censored", "stderr", "inf_ball_rate"};
  for (const auto& p : pts) {
    r.push_back({{"n", p.n}, {"value", p.value}, {"count", p.count}, {"samples", p.samples}, {"censored", p.censored},
                 {"stderr", p.stderr_value}});
    out.rows.push_back({std::to_string(p.n), num(p.value), std::to_string(p.count), std::to_string(p.samples),
                        p.censored ? "1" : "0", num(p.stderr_value), inf_rate ? num(*inf_rate) : ""});
  }
  out.doc = {{"schema", "rwre-ldp/1"}, {"center", array_of(center)}, {"radius", o.ball}, {"norm", "sup"},
             {"seed", o.seed}, {"inf_ball_rate", inf_rate ? Json(*inf_rate) : Json()}, {"rows", r}};
  out.summary = fmt::format("ldp-check: {} horizons, last value={}{}", pts.size(), num(pts.back().value),
                            inf_rate ? fmt::format(" inf_ball_I={}", num(*inf_rate)) : "");
  return out;
}

// ---------------------------------------------------------------------------
// verify-all

struct CheckList {
  Json items = Json::array();
  bool all = true;
  void add(const std::string& name, bool passed, const std::string& detail) {
    items.push_back({{"name", name}, {"passed", passed}, {"detail", detail}});
    all = all && passed;
  }
  // Runs body; exceptions become failures.
  void run(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, detail] = body();
      add(name, ok, detail);
    } catch (const std::exception& e) {
      add(name, false, std::string("error: ") + e.what());
    }
  }
};

Output cmd_verify(const Options& o) {
  const Environment env = load_env(o.env);
  const int d = env.dimension();
  const auto du = static_cast<std::size_t>(d);
  CheckList checks;
  const TiltVector zero(du, 0.0), half(du, 0.5);

  checks.run("zero_tilt_mgf", [&] {
    double worst = 0.0;
    for (int n : {1, 10, 100})
      if (env.covers_radius(n)) worst = std::max(worst, std::abs(exact_mgf(env, zero, n).value));
    return std::pair{worst <= 1e-12, fmt::format("max |value| = {:.3e}", worst)};
  });

  const int brute_n = d == 1 ? 10 : 8;
  if (env.covers_radius(brute_n) && d <= 2)
    checks.run("brute_force_equivalence", [&] {
      double worst = 0.0;
      for (double s : {-1.0, 0.7}) {
        TiltVector l(du, s);
        for (int n = 1; n <= brute_n; ++n)
          worst = std::max(worst, std::abs(exact_mgf(env, l, n).value - brute_force_mgf(env, l, n).value));
      }
      return std::pair{worst <= 1e-10, fmt::format("max gap = {:.3e}", worst)};
    });

  checks.run("mc_determinism", [&] {
    const int n = env.covers_radius(32) ? 32 : env.radius();
    McOptions a{std::min<std::size_t>(o.samples, 4000), o.seed, 1}, b = a;
    b.workers = 3;
    const auto r1 = mc_mgf(env, half, n, a), r2 = mc_mgf(env, half, n, a), r3 = mc_mgf(env, half, n, b);
    const bool same = r1.value == r2.value && r1.value == r3.value && *r1.stderr_log == *r3.stderr_log;
    return std::pair{same, fmt::format("value {} (workers 1, 1, 3)", num(r1.value))};
  });

  if (env.periodic()) {
    checks.run("zero_tilt_lambda", [&] {
      const double v = variational_lambda(env, zero).value;
      return std::pair{std::abs(v) <= 1e-8, fmt::format("Lambda(0) = {:.3e}", v)};
    });

    std::vector<TiltVector> grid;
    if (d == 1)
      for (double s = -3; s <= 3; s += 1) grid.push_back({s});
    else
      for (double s : {-3.0, 0.0, 3.0})
        for (double t : {-3.0, 0.0, 3.0}) grid.push_back(d == 2 ? TiltVector{s, t} : TiltVector(du, s));
    checks.run("variational_vs_spectral", [&] {
      double worst = 0.0;
      for (const auto& l : grid) {
        VariationalOptions vo;
        vo.tol = 1e-9;
        worst = std::max(worst, std::abs(variational_lambda(env, l, vo).value - spectral_lambda(env, l)));
      }
      return std::pair{worst <= 1e-6, fmt::format("max gap = {:.3e}", worst)};
    });
    checks.run("gamma_vs_spectral", [&] {
      double worst = 0.0;
      for (const auto& l : {TiltVector(du, -1.5), zero, TiltVector(du, 1.0)}) {
        GammaOptions go;
        go.seed = o.seed;
        worst = std::max(worst, std::abs(gamma_lower(env, l, go).value - spectral_lambda(env, l)));
      }
      return std::pair{worst <= 1e-4, fmt::format("max gap = {:.3e}", worst)};
    });
    checks.run("mgf_approaches_lambda", [&] {
      const double s = spectral_lambda(env, half);
      const double g32 = std::abs(exact_mgf(env, half, 32).value - s);
      const double g256 = std::abs(exact_mgf(env, half, 256).value - s);
      return std::pair{g256 < g32 || g256 <= 1e-12, fmt::format("gap n=32 {:.3e}, n=256 {:.3e}", g32, g256)};
    });
    checks.run("supermartingale", [&] {
      double worst = 0.0;
      const McOptions none{0, o.seed, 1};
      const auto opt = variational_lambda(env, half).argmin_potential;
      for (const Corrector& c : {Corrector::zero(env), opt})
        for (int n : {1, 5, 20}) worst = std::max(worst, supermartingale_check(env, half, c, n, none).exact_value);
      return std::pair{worst <= 1.0 + 1e-10, fmt::format("max E[S_n] = {}", num(worst))};
    });
    if (d <= 2)
      checks.run("sublinearity", [&] {
        Options so = o;
        so.lambda.clear();
        double sup_phi = 0.0;
        PathSumField f(sublin_field(so, env, sup_phi));
        const int ns[] = {64, 512};
        const auto rows = sublinearity_profile(f, ns, 64, o.seed);
        bool bound = true;
        for (const auto& r : rows) bound = bound && r.sup_value <= 2.0 * sup_phi / r.n + 1e-12;
        return std::pair{bound && rows[1].sup_value < rows[0].sup_value / 4.0,
                         fmt::format("n=64 {:.3e}, n=512 {:.3e}", rows[0].sup_value, rows[1].sup_value)};
      });
  }

  if (env.periodic() && d == 1) {
    Env1D e1 = Env1D::from(env);
    if (check_cgz_hypotheses(e1).mean_log_ratio > 1e-12) e1 = e1.mirrored();
    checks.run("one_dim_I_equals_J", [&] {
      const auto rep = verify_I_equals_J(e1, linspace(-0.8, 0.8, 9));
      return std::pair{rep.equivalent, fmt::format("max gap {:.3e} at x={}", rep.max_gap, rep.argmax)};
    });
    checks.run("set_a_witnesses", [&] {
      const double rc = critical_tilt(e1);
      double id = 0.0, dual = 0.0;
      for (double r : linspace(rc - 2.0, rc - 1e-3, 20)) {
        for (const auto& p : {build_Fg(e1, r), build_Fh(e1, r)}) {
          id = std::max({id, p.identity_residual, p.loop_residual});
          const auto s = duality_slack(e1, p.theta, p.lam);
          dual = std::min({dual, s.g_slack, s.h_slack});
        }
      }
      return std::pair{id <= kSetATolerance && dual >= -1e-8,
                       fmt::format("identity {:.3e}, worst duality slack {:.3e}", id, dual)};
    });
  }

  Output out;
  out.doc = {{"schema", "rwre-verify/1"}, {"seed", o.seed}, {"passed", checks.all}, {"checks", checks.items}};
  out.header = {"name", "passed", "detail"};
  std::size_t failed = 0;
  for (const auto& c : checks.items) {
    out.rows.push_back({c["name"].get<std::string>(), c["passed"].get<bool>() ? "1" : "0", c["detail"].get<std::string>()});
    failed += !c["passed"].get<bool>();
  }
  out.exit_code = checks.all ? 0 : 1;
  out.summary = fmt::format("verify-all: {} checks, {} failed", checks.items.size(), failed);
  return out;
}

// ---------------------------------------------------------------------------
// Output, manifests, replay

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

// Arguments that do not affect results: the output path and the worker count.
std::vector<std::string> canonical_args(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--out" || a == "--workers") {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--workers=", 0) == 0) continue;
    out.push_back(a);
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string render(const Output& res, const Options& o, const std::string& run_id, const std::string& manifest_name) {
  if (o.format == "csv" && !res.json_only) {
    std::string s;
    if (!manifest_name.empty()) s += fmt::format("# manifest: {} run_id={}\n", manifest_name, run_id);
    for (std::size_t i = 0; i < res.header.size(); ++i) s += (i ? "," : "") + res.header[i];
    s += "\n";
    for (const auto& row : res.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + csv_field(row[i]);
      s += "\n";
    }
    return s;
  }
  Json doc = res.doc;
  if (!manifest_name.empty()) doc["manifest"] = {{"file", manifest_name}, {"run_id", run_id}};
  return dump(doc);
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + p.string() + " for writing");
  f << text;
}

int emit(const std::string& command, const std::vector<std::string>& args, const Output& res, const Options& o,
         std::ostream& out) {
  if (o.out.empty()) {
    out << render(res, o, "", "");
    return res.exit_code;
  }
  const fs::path out_path(o.out);
  const std::string manifest_name = out_path.filename().string() + ".manifest.json";
  const std::string env_hash = o.env.empty() ? "" : sha256_file(o.env);
  std::string id_source = command;
  for (const auto& a : canonical_args(args)) id_source += '\0' + a;
  id_source += '\0' + env_hash;
  const std::string run_id = sha256_hex(id_source).substr(0, 16);

  const std::string text = render(res, o, run_id, manifest_name);
  write_file(out_path, text);
  Json m = {{"schema", "rwre-manifest/1"}, {"command", command}, {"args", args}, {"run_id", run_id},
            {"version", kVersion}, {"timestamp", utc_timestamp()}, {"output", out_path.filename().string()},
            {"output_sha256", sha256_hex(text)}, {"format", res.json_only ? "json" : o.format}};
  m["env"] = o.env.empty() ? Json() : Json{{"path", o.env}, {"sha256", env_hash}};
  m["seeds"] = {{"seed", o.seed}};
  write_file(out_path.parent_path() / manifest_name, dump(m));
  out << res.summary << "\n";
  return res.exit_code;
}

int replay(const std::string& manifest_path, const Options& o, std::ostream& out, std::ostream& err) {
  std::ifstream in(manifest_path);
  if (!in) throw ValidationError("cannot open " + manifest_path);
  Json m;
  try {
    m = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(e.what(), 0, "manifest");
  }
  auto args = m.at("args").get<std::vector<std::string>>();
  const auto env = m.at("env");
  if (!env.is_null() && sha256_file(env.at("path").get<std::string>()) != env.at("sha256").get<std::string>()) {
    err << "replay: environment file changed since the manifest was written\n";
    return 1;
  }
  const fs::path tmp = fs::temp_directory_path() /
                       fmt::format("rwre-replay-{}-{}", m.at("run_id").get<std::string>(), ::getpid());
  fs::create_directories(tmp);
  const fs::path target = tmp / m.at("output").get<std::string>();
  std::vector<std::string> rerun;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" || args[i] == "--workers") {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0 || args[i].rfind("--workers=", 0) == 0) continue;
    rerun.push_back(args[i]);
  }
  rerun.push_back("--out");
  rerun.push_back(target.string());
  rerun.push_back("--workers");
  rerun.push_back(std::to_string(o.workers));
  std::ostringstream sink;
  const int code = run(rerun, sink, err);
  const std::string hash = fs::exists(target) ? sha256_file(target.string()) : "";
  fs::remove_all(tmp);
  const bool same = hash == m.at("output_sha256").get<std::string>();
  out << fmt::format("replay: {} (run_id {}, exit {})\n", same ? "identical" : "DIFFERS", m.at("run_id").get<std::string>(),
                     code);
  return same ? 0 : 1;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Quenched large deviations for random walks in random environments"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* s, bool env_required = true) {
    auto* e = s->add_option("--env", o.env, "Environment JSON file");
    if (env_required) e->required();
    s->add_option("--out", o.out, "Output file (a manifest <out>.manifest.json is written next to it)");
    s->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    s->add_option("--workers", o.workers, "Worker threads for Monte Carlo (results do not depend on it)");
  };
  auto seed_opt = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Seed (u64)"); };

  auto* env_gen = app.add_subcommand("env-gen", "Generate an environment file (i.i.d. rows per site)");
  common(env_gen, false);
  seed_opt(env_gen);
  env_gen->add_option("--kind", o.kind, "periodic|boxed")->check(CLI::IsMember({"periodic", "boxed"}));
  env_gen->add_option("--dim", o.dim, "Dimension d");
  env_gen->add_option("--cell", o.cell, "Periodic cell dimensions, CSV");
  env_gen->add_option("--radius", o.radius, "Boxed l1 radius");
  env_gen->add_option("--concentration", o.concentration, "Dirichlet concentration (2d values, default all 1)");
  env_gen->add_option("--row", o.row, "Use this single row at every site (point mass law)");
  env_gen->footer("Output: environment JSON (schema rwre-environment/1).");

  auto* mgf = app.add_subcommand("mgf", "(1/n) log E[exp <lambda, X_n>] at finite n");
  common(mgf);
  seed_opt(mgf);
  mgf->add_option("--lambda", o.lambda, "Tilt, CSV of d reals")->required();
  mgf->add_option("--n", o.n, "Steps")->check(CLI::PositiveNumber);
  mgf->add_option("--method", o.method, "exact|brute|mc")->check(CLI::IsMember({"exact", "brute", "mc"}));
  mgf->add_option("--samples", o.samples, "Monte Carlo samples");
  mgf->footer("CSV columns: lambda_1..lambda_d,n,method,value,stderr,samples,seed");

  auto* lam = app.add_subcommand("lambda", "Lambda(lambda) by the variational formula or the spectral oracle");
  common(lam);
  lam->add_option("--lambda", o.lambda, "Tilt, CSV of d reals")->required();
  lam->add_option("--tol", o.tol, "Tolerance on the gap to the spectral value");
  lam->add_option("--source", o.source, "variational|spectral")->check(CLI::IsMember({"variational", "spectral"}));
  lam->footer("CSV columns: lambda_1..lambda_d,source,value,spectral_value,gap,iterations");

  auto* gam = app.add_subcommand("gamma", "Entropy lower bound Gamma(lambda) by multi-start ascent");
  common(gam);
  seed_opt(gam);
  gam->add_option("--lambda", o.lambda, "Tilt, CSV of d reals")->required();
  gam->add_option("--tol", o.tol, "Invariance tolerance");
  gam->add_option("--restarts", o.restarts, "Restarts")->check(CLI::PositiveNumber);
  gam->footer("CSV columns: lambda_1..lambda_d,value,invariance_residual,best_restart,iterations");

  auto* rate = app.add_subcommand("rate", "Rate function I(x) by Legendre transform of Lambda");
  common(rate);
  rate->add_option("--x-grid", o.x_grid, "lo:hi:steps along --direction (default -1:1:41)");
  rate->add_option("--direction", o.direction, "Slice direction, CSV (default e_1)");
  rate->add_option("--lambda-grid", o.lambda_grid, "Dual grid per axis (default -6:6:201 in d=1, -6:6:41 in d=2)");
  rate->add_option("--tol", o.tol, "Tolerance for Lambda evaluations");
  rate->add_option("--source", o.source, "variational|spectral")->check(CLI::IsMember({"variational", "spectral"}));
  rate->footer("CSV columns: x_1..x_d,I,infinite (I = 1e10 encodes +inf)");

  auto* oned = app.add_subcommand("oned", "One-dimensional passage transforms, J(x) and the I = J comparison");
  common(oned);
  oned->add_option("--r-grid", o.r_grid, "lo:hi:steps for g, h (default -3:0.5:71)");
  oned->add_option("--x-grid", o.x_grid, "lo:hi:steps for I, J (default -0.9:0.9:19)");
  oned->add_option("--source", o.source, "variational|spectral")->check(CLI::IsMember({"variational", "spectral"}));
  oned->add_option("--table", o.table, "CSV table: ij|gh")->check(CLI::IsMember({"ij", "gh"}));
  oned->footer("CSV columns: x,I,J,gap (--table ij) or r,g,h,g_convergent,h_convergent (--table gh)");

  auto* sub = app.add_subcommand("sublin", "Sublinearity profile sup_{|z|<=n} |f(z)|/n of a corrector");
  common(sub);
  seed_opt(sub);
  sub->add_option("--n-list", o.n_list, "CSV of n (default 8,16,...,512)");
  sub->add_option("--samples", o.samples, "Sampled points per l1 shell beyond n=64 (d=2)");
  sub->add_option("--lambda", o.lambda, "Use the optimal corrector at this tilt (default: random potential)");
  sub->add_option("--amplitude", o.amplitude, "Random potential amplitude");
  sub->add_option("--tol", o.tol, "Tolerance of the optimal corrector");
  sub->footer("CSV columns: n,sup_value,exact,samples,bound");

  auto* ldp = app.add_subcommand("ldp-check", "Monte Carlo ball frequencies against inf over the ball of I");
  common(ldp);
  seed_opt(ldp);
  ldp->add_option("--center", o.center, "Ball center, CSV (default origin)");
  ldp->add_option("--radius", o.ball, "Sup-norm ball radius");
  ldp->add_option("--n-list", o.n_list, "CSV of n (default 32,64,128,256)");
  ldp->add_option("--samples", o.samples, "Walks per n");
  ldp->add_option("--lambda-grid", o.lambda_grid, "Dual grid per axis");
  ldp->add_option("--tol", o.tol, "Tolerance for Lambda evaluations");
  ldp->add_option("--source", o.source, "variational|spectral")->check(CLI::IsMember({"variational", "spectral"}));
  ldp->footer("CSV columns: n,value,count,samples,censored,stderr,inf_ball_rate");

  auto* ver = app.add_subcommand("verify-all", "Run every applicable check on one environment");
  common(ver);
  seed_opt(ver);
  ver->add_option("--samples", o.samples, "Monte Carlo samples for determinism checks");
  ver->footer("CSV columns: name,passed,detail. Exit code 1 when any check fails.");

  auto* rep = app.add_subcommand("replay", "Re-run a manifest and compare the output bit for bit");
  rep->add_option("--manifest", o.manifest, "Manifest file")->required();
  rep->add_option("--workers", o.workers, "Worker threads for the re-run");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  if (o.workers == 0) o.workers = 1;
  try {
    if (command == "replay") return replay(o.manifest, o, out, err);
    static const std::map<std::string, Output (*)(const Options&)> handlers = {
        {"env-gen", cmd_env_gen}, {"mgf", cmd_mgf},         {"lambda", cmd_lambda},   {"gamma", cmd_gamma},
        {"rate", cmd_rate},       {"oned", cmd_oned},       {"sublin", cmd_sublin},   {"ldp-check", cmd_ldp},
        {"verify-all", cmd_verify}};
    if (command == "env-gen" && o.out.empty()) throw ValidationError("--out is required for env-gen");
    const Output res = handlers.at(command)(o);
    return emit(command, args, res, o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rwre::cli
