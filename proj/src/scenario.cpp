#include "loewnerlab/scenario.hpp"

#include <algorithm>
#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "loewnerlab/cftaux.hpp"
#include "loewnerlab/coupling.hpp"
#include "loewnerlab/driving.hpp"
#include "loewnerlab/errors.hpp"
#include "loewnerlab/flowline.hpp"
#include "loewnerlab/loewner.hpp"
#include "loewnerlab/random.hpp"

#ifndef LOEWNERLAB_VERSION
#define LOEWNERLAB_VERSION "0.0.0"
#endif

namespace loewnerlab {

using nlohmann::json;

namespace {

const std::set<std::string> kCommonKeys{"name", "experiment", "seed", "output", "description"};

json point_json(cplx z) { return json::array({z.real(), z.imag()}); }

/// Typed, strict access to a flat parameter block.
class Params {
 public:
  Params(const json& j, std::initializer_list<const char*> allowed) : j_(j) {
    std::set<std::string> ok(kCommonKeys);
    for (const char* k : allowed) ok.insert(k);
    for (const auto& [key, value] : j.items()) {
      if (!ok.count(key)) throw ConfigError("unknown key '" + key + "'");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  const json& raw(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing key '" + key + "'");
    return j_.at(key);
  }

  double num(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError("key '" + key + "' must be a number");
    return v.get<double>();
  }
  double num(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }

  std::size_t count(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError("key '" + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  std::string str(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError("key '" + key + "' must be a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = raw(key);
    if (!v.is_boolean()) throw ConfigError("key '" + key + "' must be a boolean");
    return v.get<bool>();
  }

  std::vector<double> reals(const std::string& key) const { return reals_of(raw(key), key); }

  cplx point(const std::string& key) const { return point_of(raw(key), key); }

  static std::vector<double> reals_of(const json& v, const std::string& key) {
    if (!v.is_array()) throw ConfigError("key '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const json& e : v) {
      if (!e.is_number()) throw ConfigError("key '" + key + "' must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  static cplx point_of(const json& v, const std::string& key) {
    const auto r = reals_of(v, key);
    if (r.size() != 2) throw ConfigError("key '" + key + "' must be a point [re, im]");
    return {r[0], r[1]};
  }

 private:
  const json& j_;
};

/// Named outputs collected in production order.
class Artifacts {
 public:
  void text(const std::string& name, std::string body) {
    items_.emplace_back(name, std::move(body));
  }
  void report(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

 private:
  std::vector<std::pair<std::string, std::string>> items_;
};

struct Context {
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

using Plan = std::function<void(Artifacts&)>;
using Prepare = std::function<Plan(const json&, const Context&)>;

struct Experiment {
  std::string name;
  std::string description;
  Prepare prepare;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

ParticleConfig random_particles(CounterEngine& rng, std::size_t n, double spread, double gap) {
  for (;;) {
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-spread, spread);
    std::sort(x.begin(), x.end());
    if (ParticleConfig::admissible(x, Chamber::full_line, gap)) return ParticleConfig(x);
  }
}

// ---------------------------------------------------------------------------
// Driving block shared by simulate, trace, capacity and cross-variation.

#define LOEWNERLAB_DRIVING_KEYS "model", "beta", "kappa", "nu", "x0", "T", "dt"

struct DrivingSetup {
  std::string kind;
  DrivingModel model;
  ParticleConfig x0;
  double T = 0.0;
  double dt = 0.0;

  json echo() const {
    return {{"model", kind}, {"N", x0.size()}, {"kappa", model.kappa}, {"beta", model.beta},
            {"T", T}, {"dt", dt}};
  }

  DrivingPath simulate(std::uint64_t seed) const {
    if (kind == "constant") return DrivingPath::constant(x0, T, dt);
    return simulate_driving(model, x0, T, dt, seed);
  }
};

DrivingSetup parse_driving(const Params& p) {
  DrivingSetup d;
  d.kind = p.str("model", "dyson");
  const auto x = p.reals("x0");
  require(!x.empty(), "x0 must hold at least one point");
  d.T = p.num("T");
  d.dt = p.num("dt");
  require(d.T > 0.0 && std::isfinite(d.T), "T must be positive");
  require(d.dt > 0.0 && d.dt <= d.T, "dt must lie in (0, T]");
  const double kappa = p.num("kappa");
  if (d.kind == "dyson" || d.kind == "constant") {
    d.model = DrivingModel::dyson(x.size(), p.num("beta", 8.0 / kappa), kappa);
  } else if (d.kind == "wishart") {
    d.model = DrivingModel::wishart(x.size(), p.num("beta", 8.0 / kappa), p.num("nu"), kappa);
  } else {
    throw ConfigError("model must be dyson, wishart or constant");
  }
  d.model.validate();
  d.x0 = ParticleConfig(x, d.model.chamber());
  return d;
}

// ---------------------------------------------------------------------------

Plan prepare_simulate(const json& j, const Context& ctx) {
  const Params p(j, {LOEWNERLAB_DRIVING_KEYS, "replicas"});
  const auto d = parse_driving(p);
  const std::size_t replicas = p.count("replicas", 1);
  require(replicas >= 1, "replicas must be positive");
  return [d, replicas, ctx](Artifacts& out) {
    if (replicas == 1) {
      const auto path = d.simulate(ctx.seed);
      std::ostringstream csv;
      path.write_csv(csv);
      out.text("path.csv", csv.str());
      const auto last = path.config(path.steps());
      out.report("summary.json", {{"driving", d.echo()},
                                  {"steps", path.steps()},
                                  {"refinements", path.refinements()},
                                  {"final", last.values()},
                                  {"final_min_gap", last.min_gap()}});
      return;
    }
    std::size_t collisions = 0, violations = 0, refinements = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < replicas; ++r) {
      try {
        const auto path = d.simulate(derive_seed(ctx.seed, Stream::driving_increments, r));
        refinements += path.refinements();
        for (std::size_t k = 0; k <= path.steps(); ++k) {
          const auto row = path.at(k);
          if (!ParticleConfig::admissible(row, d.model.chamber())) {
            ++violations;
            break;
          }
          if (row.size() > 1) {
            for (std::size_t i = 1; i < row.size(); ++i) min_gap = std::min(min_gap, row[i] - row[i - 1]);
          }
        }
      } catch (const CollisionFailure&) {
        ++collisions;
      }
    }
    out.report("summary.json", {{"driving", d.echo()},
                                {"replicas", replicas},
                                {"collisions", collisions},
                                {"ordering_violations", violations},
                                {"refinements", refinements},
                                {"min_gap", std::isfinite(min_gap) ? json(min_gap) : json()}});
  };
}

Plan prepare_trace(const json& j, const Context& ctx) {
  const Params p(j, {LOEWNERLAB_DRIVING_KEYS, "tip_offset", "stride", "slits", "roundtrip_points"});
  const auto d = parse_driving(p);
  const double tip = p.num("tip_offset", 1e-2);
  require(tip > 0.0, "tip_offset must be positive");
  const std::size_t stride = p.count("stride", 1);
  require(stride >= 1, "stride must be positive");
  const bool slits = p.flag("slits", true);
  const std::size_t roundtrip = p.count("roundtrip_points", 0);
  return [=](Artifacts& out) {
    const auto path = d.simulate(ctx.seed);
    std::ostringstream pcsv;
    path.write_csv(pcsv);
    out.text("path.csv", pcsv.str());
    const MapEvaluator forward(path);
    json report{{"driving", d.echo()}, {"tip_offset", tip}, {"stride", stride}};
    if (slits) {
      const auto set = trace_slits(forward, tip, stride);
      std::ostringstream csv;
      set.write_csv(csv);
      out.text("slits.csv", csv.str());
    }
    if (roundtrip > 0) {
      CounterEngine rng(ctx.seed, Stream::scenario_states, 1);
      double worst = 0.0;
      for (std::size_t k = 0; k < roundtrip; ++k) {
        const cplx w{rng.uniform(-2.0, 2.0), rng.uniform(0.5, 2.0)};
        const cplx z = invert(forward, w, d.T);
        worst = std::max(worst, std::abs(evolve_point(forward, z, d.T).value - w));
      }
      report["roundtrip"] = {{"points", roundtrip}, {"max_error", worst}};
    }
    out.report("trace.json", report);
  };
}

Plan prepare_capacity(const json& j, const Context& ctx) {
  const Params p(j, {LOEWNERLAB_DRIVING_KEYS, "radius", "horizons"});
  const auto d = parse_driving(p);
  const double radius = p.num("radius", 100.0);
  require(radius > 0.0, "radius must be positive");
  std::vector<double> horizons = p.has("horizons") ? p.reals("horizons") : std::vector<double>{d.T};
  for (double t : horizons) require(t >= 0.0 && t <= d.T, "horizons must lie in [0, T]");
  return [=](Artifacts& out) {
    const auto path = d.simulate(ctx.seed);
    const MapEvaluator forward(path);
    json list = json::array();
    for (double t : horizons) {
      const double tg = path.time(path.grid_index(t));
      const auto est = capacity_estimate(forward, tg, radius);
      const double expected = 2.0 * static_cast<double>(est.N) * est.T;
      list.push_back({{"T", est.T},
                      {"N", est.N},
                      {"capacity", est.capacity},
                      {"fit_residual", est.fit_residual},
                      {"poor_fit", est.poor_fit},
                      {"expected", expected},
                      {"relative_error",
                       expected > 0.0 ? std::abs(est.capacity - expected) / expected : 0.0}});
    }
    out.report("capacity.json", horizons.size() == 1 ? list[0] : list);
  };
}

Plan prepare_drift_audit(const json& j, const Context& ctx) {
  const Params p(j, {"mode", "kappa", "gamma", "x", "point", "lambdas", "kappas", "alphas", "F",
                     "chi", "random_states", "perturbation"});
  const std::string mode = p.str("mode");
  const ParticleConfig x(p.reals("x"));
  const cplx z = p.point("point");
  CouplingState s;
  double kappa = 0.0;
  if (mode == "welding") {
    kappa = p.num("kappa");
    require(kappa > 0.0 && kappa < 4.0, "welding needs kappa = gamma^2 in (0, 4)");
    s = CouplingState::canonical_welding(std::sqrt(kappa), x, z);
  } else if (mode == "flowline") {
    kappa = p.num("kappa");
    require(kappa > 0.0 && kappa <= 4.0, "flowline needs kappa in (0, 4]");
    s = CouplingState::canonical_flowline(kappa, x, z);
    if (p.has("chi")) s.chi = p.num("chi");
  } else if (mode == "inhomogeneous") {
    s = CouplingState::inhomogeneous(p.num("gamma"), p.reals("lambdas"), p.reals("kappas"), x, z);
  } else {
    throw ConfigError("mode must be welding, flowline or inhomogeneous");
  }
  if (p.has("alphas")) s.weights = p.reals("alphas");
  if (p.has("F")) s.F = p.reals("F");
  s.validate();
  const std::size_t states = p.count("random_states", 0);
  const double eps = p.num("perturbation", 1e-3);
  return [=](Artifacts& out) {
    const auto r = drift_audit(s);
    json loadings = json::array();
    for (cplx l : r.loadings) loadings.push_back(point_json(l));
    json params{{"kappa", s.kappa}, {"weights", s.weights}, {"F", s.F},
                {"particles", s.particles.values()}};
    if (s.mode == CouplingMode::flowline) params["chi"] = s.chi;
    else params["gamma"] = s.gamma;
    if (s.mode == CouplingMode::inhomogeneous_welding) {
      params["lambdas"] = s.lambdas;
      params["kappas"] = s.kappas;
      std::vector<double> c;
      for (std::size_t i = 0; i < s.weights.size(); ++i) {
        c.push_back(welding_constant(s.weights[i], s.kappas[i], s.lambdas[i], s.gamma));
      }
      params["welding_constants"] = c;
    }
    json report{{"mode", mode},
                {"params", params},
                {"point", point_json(z)},
                {"drift_re", r.drift.real()},
                {"drift_im", r.drift.imag()},
                {"residual", r.residual},
                {"projected_drift", r.projected_drift},
                {"loadings", loadings}};
    if (states > 0 && mode != "inhomogeneous") {
      CounterEngine rng(ctx.seed, Stream::scenario_states, 0);
      double worst = 0.0;
      double least[3] = {std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity()};
      for (std::size_t k = 0; k < states; ++k) {
        const auto y = random_particles(rng, 1 + k % 5, 2.0, 0.05);
        const cplx q{rng.uniform(-3.0, 3.0), rng.uniform(0.1, 3.0)};
        const auto base = mode == "welding" ? CouplingState::canonical_welding(std::sqrt(kappa), y, q)
                                            : CouplingState::canonical_flowline(kappa, y, q);
        worst = std::max(worst, drift_audit(base).residual);
        const std::size_t i = k % y.size();
        auto a = base;
        a.kappa += eps;
        auto b = base;
        b.weights[i] += eps;
        auto c = base;
        c.F[i] += eps;
        least[0] = std::min(least[0], drift_audit(a).residual);
        least[1] = std::min(least[1], drift_audit(b).residual);
        least[2] = std::min(least[2], drift_audit(c).residual);
      }
      report["batch"] = {{"states", states},
                         {"perturbation", eps},
                         {"max_residual", worst},
                         {"min_perturbed_residual",
                          {{"kappa", least[0]}, {"weights", least[1]}, {"F", least[2]}}}};
    }
    out.report("audit.json", report);
  };
}

Plan prepare_cross_variation(const json& j, const Context& ctx) {
  const Params p(j, {LOEWNERLAB_DRIVING_KEYS, "mode", "z", "w"});
  const auto d = parse_driving(p);
  const std::string mode = p.str("mode");
  CrossVariationMode m;
  if (mode == "welding") m = CrossVariationMode::welding_free;
  else if (mode == "flowline") m = CrossVariationMode::flowline_dirichlet;
  else throw ConfigError("mode must be welding or flowline");
  const cplx z = p.point("z"), w = p.point("w");
  require(z.imag() > 0.0 && w.imag() > 0.0, "z and w must lie in H");
  return [=](Artifacts& out) {
    const auto path = d.simulate(ctx.seed);
    const auto r = cross_variation_check(m, path, z, w, d.T);
    out.report("cross_variation.json", {{"mode", mode},
                                        {"driving", d.echo()},
                                        {"z", point_json(z)},
                                        {"w", point_json(w)},
                                        {"T", r.T},
                                        {"left", r.left},
                                        {"right", r.right},
                                        {"relative_discrepancy", r.relative_discrepancy},
                                        {"z_T", point_json(r.z_T)},
                                        {"w_T", point_json(r.w_T)}});
  };
}

Plan prepare_stationarity(const json& j, const Context& ctx) {
  const Params p(j, {"mode", "x0", "T", "dt", "gamma", "kappa", "alpha_override", "chi_override",
                     "functionals", "replicas", "cells_per_radius", "level",
                     "max_discard_fraction"});
  StationarityConfig c;
  const std::string mode = p.str("mode");
  if (mode == "welding") {
    c.mode = StationarityMode::welding;
    c.gamma = p.num("gamma");
    require(c.gamma > 0.0 && c.gamma < 2.0, "gamma must lie in (0, 2)");
  } else if (mode == "flowline") {
    c.mode = StationarityMode::flowline;
    c.kappa = p.num("kappa");
    require(c.kappa > 0.0 && c.kappa <= 4.0, "kappa must lie in (0, 4]");
  } else {
    throw ConfigError("mode must be welding or flowline");
  }
  c.x0 = ParticleConfig(p.reals("x0"));
  c.T = p.num("T");
  c.dt = p.num("dt");
  require(c.T >= 0.0 && c.dt > 0.0, "T must be non-negative and dt positive");
  if (p.has("alpha_override")) c.alpha_override = p.num("alpha_override");
  if (p.has("chi_override")) c.chi_override = p.num("chi_override");
  const json& fs = p.raw("functionals");
  if (!fs.is_array() || fs.empty()) throw ConfigError("functionals must be a non-empty array");
  for (const json& f : fs) c.functionals.push_back(parse_functional(f));
  c.replicas = p.count("replicas", 2000);
  if (c.replicas < 100) throw InsufficientReplicas("stationarity needs at least 100 replicas");
  c.cells_per_radius = static_cast<int>(p.count("cells_per_radius", 6));
  require(c.cells_per_radius >= 1, "cells_per_radius must be positive");
  c.level = p.num("level", 0.01);
  require(c.level > 0.0 && c.level < 1.0, "level must lie in (0, 1)");
  c.max_discard_fraction = p.num("max_discard_fraction", 0.05);
  c.seed = ctx.seed;
  c.threads = ctx.threads;
  return [c, mode](Artifacts& out) {
    const auto r = stationarity_test(c);
    json list = json::array();
    for (const auto& f : r.functionals) {
      list.push_back({{"label", f.label},
                      {"ks_stat", f.ks_stat},
                      {"p_value", f.p_value},
                      {"meanA", f.meanA},
                      {"meanB", f.meanB},
                      {"varA", f.varA},
                      {"varB", f.varB},
                      {"discard_fraction", r.discard_fraction}});
    }
    out.report("stationarity.json", {{"mode", mode},
                                      {"x0", c.x0.values()},
                                      {"T", c.T},
                                      {"dt", c.dt},
                                      {"replicas", r.replicas},
                                      {"discarded", r.discarded},
                                      {"discard_fraction", r.discard_fraction},
                                      {"corrected_level", r.corrected_level},
                                      {"passed", r.passed},
                                      {"functionals", list}});
  };
}

std::vector<double> number_or_list(const Params& p, const std::string& key) {
  const json& v = p.raw(key);
  return v.is_array() ? Params::reals_of(v, key) : std::vector<double>{p.num(key)};
}

Plan prepare_cft_check(const json& j, const Context& ctx) {
  const Params p(j, {"kappa", "side", "N", "configs", "spread"});
  const auto kappas = number_or_list(p, "kappa");
  for (double k : kappas) require(k > 0.0, "kappa must be positive");
  const std::string side = p.str("side", "forward");
  if (side != "forward" && side != "reverse") throw ConfigError("side must be forward or reverse");
  std::vector<std::size_t> ns;
  for (double n : number_or_list(p, "N")) {
    require(n >= 1.0 && n == std::floor(n), "N must be a positive integer");
    ns.push_back(static_cast<std::size_t>(n));
  }
  const std::size_t configs = p.count("configs", 100);
  const double spread = p.num("spread", 3.0);
  require(spread > 0.0, "spread must be positive");
  return [=](Artifacts& out) {
    const Side sd = side == "forward" ? Side::forward : Side::reverse;
    json rows = json::array();
    std::uint64_t block = 0;
    for (double kappa : kappas) {
      const auto spec = AuxiliaryFunctionSpec::canonical(kappa, sd);
      for (std::size_t n : ns) {
        const auto model = sd == Side::forward ? DrivingModel::dyson(n, 8.0 / kappa, kappa)
                                               : reverse_driving_model(n, kappa);
        CounterEngine rng(ctx.seed, Stream::scenario_states, 100 + block++);
        double worst = 0.0, mismatch = 0.0;
        std::vector<double> b(n);
        for (std::size_t k = 0; k < configs; ++k) {
          const auto x = random_particles(rng, n, spread, 0.05);
          for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, annihilation_residual(spec, x, i));
          }
          const auto a = drift_from_Z(spec, x);
          model.drift(x.points(), b);
          for (std::size_t i = 0; i < n; ++i) {
            mismatch = std::max(mismatch, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
          }
        }
        rows.push_back({{"side", side},
                        {"p", spec.p},
                        {"kappa", kappa},
                        {"N", n},
                        {"configs", configs},
                        {"max_residual", worst},
                        {"max_drift_mismatch", mismatch}});
      }
    }
    out.report("cft.json", rows.size() == 1 ? rows[0] : rows);
  };
}

SmoothField parse_field(const json& spec, std::vector<std::shared_ptr<void>>& keep) {
  if (!spec.is_object()) throw ConfigError("field must be an object");
  const Params p(spec, {"kind", "value", "amplitude", "center", "width", "anchors", "kappa",
                        "mollifier"});
  const std::string kind = p.str("kind");
  SmoothField base;
  if (kind == "constant") {
    const double v = p.num("value");
    base = [v](cplx) { return v; };
  } else if (kind == "bump") {
    const double v = p.num("value", 0.0), a = p.num("amplitude");
    const cplx c = p.point("center");
    const double w = p.num("width", 1.0);
    require(w > 0.0, "bump width must be positive");
    base = [=](cplx z) { return v + a * std::exp(-std::norm(z - c) / (w * w)); };
  } else if (kind == "arg") {
    auto d = std::make_shared<Decoration>(Decoration::arg(ParticleConfig(p.reals("anchors")),
                                                          p.num("kappa")));
    keep.push_back(d);
    base = [d](cplx z) { return decoration_eval(*d, z); };
  } else {
    throw ConfigError("field kind must be constant, bump or arg");
  }
  if (!p.has("mollifier")) return base;
  const json& m = p.raw("mollifier");
  const Params mp(m, {"window", "sigma", "strength", "seed"});
  const json& win = mp.raw("window");
  if (!win.is_array() || win.size() != 2) throw ConfigError("window must be [[x0, y0], [x1, y1]]");
  const cplx lo = Params::point_of(win[0], "window"), hi = Params::point_of(win[1], "window");
  const double sigma = mp.num("sigma", 0.05), strength = mp.num("strength", 1.0);
  const auto seed = static_cast<std::uint64_t>(mp.count("seed", 0));
  // Construction factorizes the lattice covariance; defer it to compute time.
  auto holder = std::make_shared<std::shared_ptr<MollifiedField>>();
  keep.push_back(holder);
  return [=](cplx z) {
    if (!*holder) *holder = std::make_shared<MollifiedField>(lo, hi, sigma, seed);
    return base(z) + strength * (**holder)(z);
  };
}

Plan prepare_flowline(const json& j, const Context&) {
  const Params p(j, {"field", "chi", "kappa", "start", "dt", "max_steps", "jump", "psi"});
  double chi = 0.0;
  if (p.has("chi")) {
    chi = p.num("chi");
  } else {
    const double kappa = p.num("kappa");
    require(kappa > 0.0, "kappa must be positive");
    chi = 2.0 / std::sqrt(kappa) - std::sqrt(kappa) / 2.0;
  }
  auto keep = std::make_shared<std::vector<std::shared_ptr<void>>>();
  SmoothField h;
  cplx start;
  double dt = 0.0;
  std::size_t steps = 0;
  std::optional<ConformalMap> psi;
  if (p.has("field")) {
    require(chi != 0.0, "flow lines need chi != 0");
    h = parse_field(p.raw("field"), *keep);
    start = p.point("start");
    require(start.imag() >= 0.0, "start must lie in the closed upper half-plane");
    dt = p.num("dt");
    require(dt > 0.0, "dt must be positive");
    steps = p.count("max_steps");
    if (p.has("psi")) {
      const Params q(p.raw("psi"), {"kind", "factor", "a", "b", "c", "d"});
      const std::string kind = q.str("kind");
      if (kind == "identity") psi = ConformalMap::identity();
      else if (kind == "scaling") psi = ConformalMap::scaling(q.num("factor"));
      else if (kind == "mobius") psi = ConformalMap::mobius(q.num("a"), q.num("b"), q.num("c"), q.num("d"));
      else throw ConfigError("psi kind must be identity, scaling or mobius");
    }
  } else if (!p.has("jump")) {
    throw ConfigError("flowline needs a field, a jump block or both");
  }
  std::optional<json> jump;
  if (p.has("jump")) {
    const Params q(p.raw("jump"), {"N", "kappa", "theta", "anchors"});
    const double kappa = q.num("kappa");
    const std::size_t n = q.count("N");
    require(kappa > 0.0 && kappa <= 4.0 && n >= 1, "jump needs kappa in (0, 4] and N >= 1");
    std::vector<double> anchors;
    if (q.has("anchors")) {
      anchors = q.reals("anchors");
      require(anchors.size() == n, "one anchor per strand is required");
    } else {
      for (std::size_t i = 0; i < n; ++i) anchors.push_back(static_cast<double>(i));
    }
    const ParticleConfig ordered(anchors);
    (void)ordered;
    jump = json{{"kappa", kappa}, {"N", n}, {"theta", q.num("theta", 0.0)}, {"anchors", anchors}};
  }
  return [=](Artifacts& out) {
    (void)keep;
    if (h) {
      const auto line = trace_flow_line(h, chi, start, dt, steps);
      std::ostringstream csv;
      line.write_csv(csv);
      out.text("trace.csv", csv.str());
      json summary{{"chi", chi},
                   {"start", point_json(start)},
                   {"dt", dt},
                   {"steps", line.points.size() - 1},
                   {"length", line.length()},
                   {"termination", to_string(line.termination)},
                   {"end", point_json(line.points.back())}};
      if (psi) {
        const auto r = covariance_check(h, chi, *psi, start, dt, steps);
        summary["covariance"] = {{"distance", r.distance}, {"compared_length", r.compared_length}};
      }
      out.report("flowline.json", summary);
    }
    if (jump) {
      const double kappa = (*jump)["kappa"];
      const std::size_t n = (*jump)["N"];
      const double theta = (*jump)["theta"];
      const auto anchors = (*jump)["anchors"].get<std::vector<double>>();
      const auto d = Decoration::arg(ParticleConfig(anchors), kappa);
      json rows = json::array();
      double worst = 0.0;
      for (std::size_t i = 1; i <= n; ++i) {
        const auto b = boundary_jump(kappa, n, i, theta);
        const double right = i < n ? anchors[i] : anchors[i - 1] + 2.0;
        const double plateau = decoration_eval(d, cplx{0.5 * (anchors[i - 1] + right), 0.0});
        worst = std::max(worst, std::abs(plateau - b.lambda_i));
        rows.push_back({{"i", i},
                        {"lambda_i", b.lambda_i},
                        {"decoration_plateau", plateau},
                        {"left_limit", b.left_limit},
                        {"right_limit", b.right_limit},
                        {"jump", b.jump},
                        {"difference", b.right_limit - b.left_limit}});
      }
      out.report("jump.json", {{"kappa", kappa},
                               {"N", n},
                               {"theta", theta},
                               {"chi", boundary_jump(kappa, n, 1).chi},
                               {"expected_jump", std::sqrt(kappa) * std::acos(-1.0) / 2.0},
                               {"max_plateau_error", worst},
                               {"strands", rows}});
    }
  };
}

Plan prepare_boundary_length(const json& j, const Context& ctx) {
  const Params p(j, {"gamma", "a", "b", "eps", "replicas"});
  const double gamma = p.num("gamma", 1.0);
  require(gamma > 0.0 && gamma < 2.0, "gamma must lie in (0, 2)");
  const double a = p.num("a"), b = p.num("b");
  require(b > a, "need a < b");
  const auto eps = p.reals("eps");
  require(!eps.empty(), "eps must list at least one scale");
  for (double e : eps) require(e > 0.0 && e < b - a, "eps must lie in (0, b - a)");
  const std::size_t replicas = p.count("replicas", 10000);
  require(replicas >= 2, "replicas must be at least 2");
  return [=](Artifacts& out) {
    const FieldModel model(Boundary::free, gamma);
    GramOptions opt;
    opt.kernel_representative = true;
    json levels = json::array();
    std::vector<double> means;
    for (std::size_t l = 0; l < eps.size(); ++l) {
      const auto fs = boundary_functionals(a, b, eps[l]);
      const auto draw = sample_pairings(Boundary::free, fs, replicas,
                                        derive_seed(ctx.seed, Stream::field_pairings, l), opt);
      double sum = 0.0, sum2 = 0.0;
      std::vector<double> row(fs.size());
      for (Eigen::Index r = 0; r < draw.samples.rows(); ++r) {
        for (std::size_t k = 0; k < fs.size(); ++k) {
          row[k] = draw.samples(r, static_cast<Eigen::Index>(k));
        }
        const double len = quantum_boundary_length(model, a, b, eps[l], row);
        sum += len;
        sum2 += len * len;
      }
      const double n = static_cast<double>(replicas);
      const double mean = sum / n;
      const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1.0));
      means.push_back(mean);
      levels.push_back({{"eps", eps[l]},
                        {"points", fs.size()},
                        {"mean", mean},
                        {"stderr", std::sqrt(var / n)}});
    }
    const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
    out.report("boundary_length.json", {{"gamma", gamma},
                                        {"a", a},
                                        {"b", b},
                                        {"replicas", replicas},
                                        {"levels", levels},
                                        {"relative_spread", (*hi - *lo) / *hi}});
  };
}

const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> list{
      {"simulate", "driving process paths, or a collision census over many seeds",
       prepare_simulate},
      {"trace", "slit tips and the reverse-flow round trip for one driving path", prepare_trace},
      {"capacity", "half-plane capacity of the hull at given horizons", prepare_capacity},
      {"drift-audit", "drift of the coupled observable at one state and over random states",
       prepare_drift_audit},
      {"cross-variation", "quadratic cross-variation against the Green function increment",
       prepare_cross_variation},
      {"stationarity", "two-sample tests of the field before and after the coupling",
       prepare_stationarity},
      {"cft-check", "null-vector equations for the power-product function", prepare_cft_check},
      {"flowline", "flow-line traces, conformal covariance and boundary jumps",
       prepare_flowline},
      {"boundary-length", "regularized quantum boundary length across scales",
       prepare_boundary_length},
  };
  return list;
}

json versions() {
  return {{"loewnerlab", LOEWNERLAB_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                        "." + std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__},
          {"cxx", __cplusplus}};
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << body;
}

}  // namespace

LinearFunctional parse_functional(const json& spec) {
  if (!spec.is_object()) throw ConfigError("functional must be an object");
  const Params p(spec, {"kind", "params", "label"});
  const std::string kind = p.str("kind");
  static const json empty = json::object();
  const json& raw = p.has("params") ? p.raw("params") : empty;
  if (!raw.is_object()) throw ConfigError("functional params must be an object");
  LinearFunctional f;
  if (kind == "bump") {
    const Params q(raw, {"center", "radius", "weight"});
    f = LinearFunctional::bump(q.point("center"), q.num("radius"), q.num("weight", 1.0));
  } else if (kind == "circle") {
    const Params q(raw, {"center", "eps"});
    f = LinearFunctional::circle_average(q.point("center"), q.num("eps"));
  } else if (kind == "disc") {
    const Params q(raw, {"center", "radius"});
    f = LinearFunctional::disc_average(q.point("center"), q.num("radius"));
  } else if (kind == "semicircle") {
    const Params q(raw, {"x", "eps"});
    f = LinearFunctional::semicircle_average(q.num("x"), q.num("eps"));
  } else if (kind == "signed_pair") {
    const Params q(raw, {"c1", "r1", "c2", "r2"});
    f = LinearFunctional::signed_pair(q.point("c1"), q.num("r1"), q.point("c2"), q.num("r2"));
  } else {
    throw ConfigError("unknown functional kind '" + kind + "'");
  }
  for (const Atom& a : f.atoms) {
    require(a.radius > 0.0 && std::isfinite(a.radius), "functional radius must be positive");
  }
  if (p.has("label")) f.label = p.str("label");
  return f;
}

ResolvedSeed resolve_seed(const RunOptions& options, const json& config) {
  if (options.seed_flag) return {parse_seed(*options.seed_flag), "flag"};
  if (options.seed_env && !options.seed_env->empty()) return {parse_seed(*options.seed_env), "env"};
  if (config.contains("seed")) {
    const json& s = config.at("seed");
    if (s.is_number_unsigned()) return {s.get<std::uint64_t>(), "config"};
    if (s.is_number_integer() && s.get<long long>() >= 0) {
      return {static_cast<std::uint64_t>(s.get<long long>()), "config"};
    }
    if (s.is_string()) return {parse_seed(s.get<std::string>()), "config"};
    throw ConfigError("seed must be a non-negative integer or a decimal/hex string");
  }
  return {0, "default"};
}

std::vector<std::pair<std::string, std::string>> list_experiments() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : experiments()) out.emplace_back(e.name, e.description);
  return out;
}

namespace {

RunResult run_impl(const json& config, const RunOptions& options, const std::string& origin,
                   const std::string& load_error) {
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  Artifacts artifacts;
  std::string name = std::filesystem::path(origin).stem().string();
  if (name.empty() || name == "<memory>") name = "scenario";
  std::filesystem::path out_root = options.out_dir.value_or("out");
  json manifest{{"origin", origin}, {"inputs", config}, {"threads", options.threads}};
  try {
    try {
      if (!load_error.empty()) throw ConfigError(load_error);
      if (!config.is_object()) throw ConfigError("scenario must be a JSON object");
      if (config.contains("name")) {
        if (!config.at("name").is_string() || config.at("name").get<std::string>().empty()) {
          throw ConfigError("name must be a non-empty string");
        }
        name = config.at("name").get<std::string>();
      }
      if (!options.out_dir && config.contains("output")) {
        if (!config.at("output").is_string()) throw ConfigError("output must be a string");
        out_root = config.at("output").get<std::string>();
      }
      const auto seed = resolve_seed(options, config);
      manifest["seed"] = seed.value;
      manifest["seed_source"] = seed.source;
      if (!config.contains("experiment") || !config.at("experiment").is_string()) {
        throw ConfigError("missing key 'experiment'");
      }
      const std::string exp = config.at("experiment").get<std::string>();
      manifest["experiment"] = exp;
      const auto it = std::find_if(experiments().begin(), experiments().end(),
                                   [&](const Experiment& e) { return e.name == exp; });
      if (it == experiments().end()) throw ConfigError("unknown experiment '" + exp + "'");
      Context ctx{seed.value, std::max(1u, options.threads)};
      const Plan plan = it->prepare(config, ctx);
      plan(artifacts);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
    result.exit_code = exit_ok;
    manifest["status"] = "ok";
  } catch (const ValidationError& e) {
    result.exit_code = exit_validation;
    result.error = e.what();
    manifest["status"] = "validation_error";
  } catch (const std::exception& e) {
    result.exit_code = exit_numerical;
    result.error = e.what();
    manifest["status"] = "numerical_error";
  }
  manifest["name"] = name;
  manifest["exit_code"] = result.exit_code;
  if (!result.error.empty()) manifest["error"] = result.error;
  manifest["versions"] = versions();
  manifest["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json names = json::array();
  for (const auto& [file, body] : artifacts.items()) {
    names.push_back(file);
    result.artifacts.push_back(file);
  }
  manifest["artifacts"] = names;

  result.output_dir = result.exit_code == exit_ok ? out_root / name : out_root / "failed" / name;
  std::filesystem::create_directories(result.output_dir);
  for (const auto& [file, body] : artifacts.items()) write_file(result.output_dir / file, body);
  write_file(result.output_dir / "manifest.json", manifest.dump(2) + "\n");
  result.manifest = std::move(manifest);
  return result;
}

}  // namespace

RunResult run_scenario(const json& config, const RunOptions& options, const std::string& origin) {
  return run_impl(config, options, origin, "");
}

RunResult run_scenario_file(const std::filesystem::path& path, const RunOptions& options) {
  std::ifstream is(path);
  if (!is) return run_impl(json(), options, path.string(), "cannot read " + path.string());
  const json config = json::parse(is, nullptr, false);
  if (config.is_discarded()) {
    return run_impl(json(), options, path.string(), "invalid JSON in " + path.string());
  }
  return run_impl(config, options, path.string(), "");
}

int run_suite(const std::filesystem::path& dir, const RunOptions& options, std::ostream& log) {
  if (!std::filesystem::is_directory(dir)) {
    log << "not a directory: " << dir.string() << "\n";
    return exit_validation;
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  int worst = exit_ok;
  for (const auto& f : files) {
    const auto r = run_scenario_file(f, options);
    worst = std::max(worst, r.exit_code);
    log << (r.exit_code == exit_ok ? "ok   " : "FAIL ") << f.filename().string() << " -> "
        << r.output_dir.string();
    if (!r.error.empty()) log << " (" << r.error << ")";
    log << "\n";
  }
  return worst;
}

}  // namespace loewnerlab
