// Acceptance gate: one PASS/FAIL line per criterion. Cheap criteria call the
// library directly; the rest run the bundled scenarios under
// scenarios/acceptance and check their reports. Exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "loewnerlab/coupling.hpp"
#include "loewnerlab/field.hpp"
#include "loewnerlab/flowline.hpp"
#include "loewnerlab/random.hpp"
#include "loewnerlab/scenario.hpp"
#include "../support/generators.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace loewnerlab;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [" << what << "]";
    }
  }
};

fs::path g_out;

json run(const std::string& name, Outcome& o) {
  RunOptions options;
  options.out_dir = g_out;
  const auto r = run_scenario_file(fs::path(LOEWNERLAB_SCENARIO_DIR) / (name + ".json"), options);
  o.require(r.exit_code == exit_ok, name + " exit " + std::to_string(r.exit_code) + ": " + r.error);
  return r.exit_code == exit_ok ? json(r.manifest) : json();
}

json report(const std::string& name, const std::string& file) {
  std::ifstream in(g_out / name / file);
  return in ? json::parse(in) : json();
}

// Perturbation protocol shared by the two drift criteria.
void drift_batch(Outcome& o, std::uint64_t substream,
                 const std::function<CouplingState(CounterEngine&, const ParticleConfig&, cplx)>& make) {
  CounterEngine rng(2024, Stream::property_tests, substream);
  double worst = 0.0, least = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + k % 5;
    const auto y = testing::random_config(rng, n, -2.0, 2.0, 0.05);
    const cplx p{rng.uniform(-3.0, 3.0), rng.uniform(0.1, 3.0)};
    const auto base = make(rng, y, p);
    worst = std::max(worst, drift_audit(base).residual);
    const std::size_t i = static_cast<std::size_t>(k) % n;
    auto a = base;
    a.kappa += 1e-3;
    auto b = base;
    b.weights[i] += 1e-3;
    auto c = base;
    c.F[i] += 1e-3;
    for (const auto& s : {a, b, c}) least = std::min(least, drift_audit(s).residual);
  }
  o.detail << "max residual " << worst << ", min perturbed " << least;
  o.require(worst < 1e-10, "canonical residual >= 1e-10");
  o.require(least > 1e-6, "perturbed residual <= 1e-6");
}

Outcome c1() {
  Outcome o;
  drift_batch(o, 1, [](CounterEngine& rng, const ParticleConfig& y, cplx p) {
    return CouplingState::canonical_welding(rng.uniform(0.2, 1.95), y, p);
  });
  return o;
}

Outcome c2() {
  Outcome o;
  drift_batch(o, 2, [](CounterEngine& rng, const ParticleConfig& y, cplx p) {
    return CouplingState::canonical_flowline(rng.uniform(0.05, 4.0), y, p);
  });
  return o;
}

Outcome c3() {
  Outcome o;
  run("c03_reverse_flow_roundtrip", o);
  const json t = report("c03_reverse_flow_roundtrip", "trace.json");
  if (t.is_null()) return o;
  const double e = t["roundtrip"]["max_error"];
  o.detail << "max |g_T(f_T(w)) - w| = " << e << " over " << t["roundtrip"]["points"] << " points";
  o.require(t["roundtrip"]["points"] == 100, "needs 100 points");
  o.require(e < 1e-6, "round-trip error >= 1e-6");
  return o;
}

Outcome c4() {
  Outcome o;
  double worst = 0.0;
  for (const char* n : {"N1", "N2", "N3"}) {
    const std::string name = std::string("c04_capacity_") + n;
    run(name, o);
    const json r = report(name, "capacity.json");
    if (r.is_null()) continue;
    for (const auto& row : r) {
      worst = std::max(worst, row["relative_error"].get<double>());
      o.require(!row["poor_fit"].get<bool>(), name + " poor fit");
    }
    o.require(r.size() == 2, name + " needs T in {0.1, 0.25}");
  }
  o.detail << "max relative error " << worst;
  o.require(worst < 1e-2, "capacity off by >= 1%");
  return o;
}

Outcome c5() {
  Outcome o;
  run("c05_cross_variation_closed_form", o);
  const json cf = report("c05_cross_variation_closed_form", "cross_variation.json");
  if (!cf.is_null()) {
    const double d = cf["relative_discrepancy"];
    o.detail << "closed form " << d;
    o.require(d < 1e-3, "closed form >= 1e-3");
  }
  double worst = 0.0;
  for (const char* m : {"welding", "flowline"}) {
    for (const char* n : {"N1", "N2"}) {
      const std::string name = std::string("c05_cross_variation_") + m + "_" + n;
      run(name, o);
      const json r = report(name, "cross_variation.json");
      if (!r.is_null()) worst = std::max(worst, r["relative_discrepancy"].get<double>());
    }
  }
  o.detail << ", max N<=2 " << worst;
  o.require(worst < 1e-2, "N<=2 discrepancy >= 1e-2");
  return o;
}

Outcome c6() {
  Outcome o;
  for (const char* n : {"welding_N1", "welding_N2", "flowline_N1", "flowline_N2"}) {
    const std::string name = std::string("c06_stationarity_") + n;
    run(name, o);
    const json r = report(name, "stationarity.json");
    if (r.is_null()) continue;
    double pmin = 1.0;
    for (const auto& f : r["functionals"]) pmin = std::min(pmin, f["p_value"].get<double>());
    o.detail << n << " min p " << pmin << "; ";
    o.require(r["functionals"].size() >= 3, name + " needs >= 3 functionals");
    o.require(r["replicas"] == 2000, name + " needs 2000 replicas");
    o.require(r["passed"].get<bool>(), name + " rejected");
  }
  run("c06_stationarity_negative_control", o);
  const json neg = report("c06_stationarity_negative_control", "stationarity.json");
  if (!neg.is_null()) {
    double pmin = 1.0;
    for (const auto& f : neg["functionals"]) pmin = std::min(pmin, f["p_value"].get<double>());
    o.detail << "negative control min p " << pmin;
    o.require(!neg["passed"].get<bool>(), "negative control not rejected");
  }
  return o;
}

Outcome c7() {
  Outcome o;
  double residual = 0.0, mismatch = 0.0;
  for (const char* side : {"forward", "reverse"}) {
    const std::string name = std::string("c07_cft_") + side;
    run(name, o);
    const json rows = report(name, "cft.json");
    if (rows.is_null()) continue;
    o.require(rows.size() == 30, name + " needs kappa {2,3,4,6,8} x N 1..6");
    for (const auto& row : rows) {
      const double kappa = row["kappa"], p = row["p"];
      const double expect = (std::string(side) == "forward" ? 2.0 : -2.0) / kappa;
      o.require(std::abs(p - expect) < 1e-15, name + " p convention");
      o.require(row["configs"] == 100, name + " needs 100 configurations");
      residual = std::max(residual, row["max_residual"].get<double>());
      mismatch = std::max(mismatch, row["max_drift_mismatch"].get<double>());
    }
  }
  o.detail << "max residual " << residual << ", drift mismatch " << mismatch;
  o.require(residual < 1e-10, "residual >= 1e-10");
  o.require(mismatch < 1e-10, "drift mismatch >= 1e-10");
  return o;
}

Outcome c8() {
  Outcome o;
  CounterEngine rng(2024, Stream::property_tests, 8);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 1 + k % 6;
    const double gamma = rng.uniform(0.2, 1.95);
    std::vector<double> lambdas(n), kappas(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lambdas[i] = rng.uniform(0.1, 2.0);
      kappas[i] = rng.uniform(0.1, 8.0);
      total += lambdas[i];
    }
    for (auto& l : lambdas) l *= static_cast<double>(n) / total;
    const auto alphas = solve_inhomogeneous_alphas(gamma, lambdas, kappas);
    for (std::size_t i = 0; i < n; ++i) {
      worst = std::max(worst, std::abs(welding_constant(alphas[i], kappas[i], lambdas[i], gamma)));
    }
  }
  bool exact = true;
  double display = 0.0;
  for (int k = 1; k <= 199; ++k) {
    const double gamma = 0.01 * k;
    const double l[] = {1.0}, kg[] = {gamma * gamma};
    const double a = solve_inhomogeneous_alphas(gamma, l, kg)[0];
    exact = exact && a == 2.0 / gamma;
    const double Q = 2.0 / gamma + gamma / 2.0;
    display = std::max(display, std::abs(a - 4.0 * Q / (4.0 + gamma * gamma)) / a);
  }
  o.detail << "max |C| " << worst << ", specialization exact " << (exact ? "yes" : "no")
           << ", vs 4Q/(4+kappa) " << display;
  o.require(worst < 1e-14, "|C| >= 1e-14");
  o.require(exact, "alpha != 2/gamma");
  o.require(display < 1e-15, "4Q/(4+kappa) display");
  return o;
}

Outcome c9() {
  Outcome o;
  bool exact = true;
  for (int k = 1; k <= 400; ++k) {
    const double kappa = 0.01 * k;
    for (std::size_t n = 1; n <= 6; ++n) {
      for (std::size_t i = 1; i <= n; ++i) {
        const auto b = boundary_jump(kappa, n, i, 0.3);
        exact = exact && b.jump == std::sqrt(kappa) * kPi / 2.0;
      }
    }
  }
  CounterEngine rng(2024, Stream::property_tests, 9);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 1 + k % 6;
    const double kappa = rng.uniform(0.01, 4.0);
    const auto x = testing::random_config(rng, n, -3.0, 3.0, 0.1);
    const auto d = Decoration::arg(x, kappa);
    for (std::size_t i = 1; i <= n; ++i) {
      const double right = i < n ? x[i] : x[i - 1] + 2.0;
      const double plateau = -(2.0 * kPi / std::sqrt(kappa)) * static_cast<double>(n - i);
      const double field = decoration_eval(d, cplx{0.5 * (x[i - 1] + right), 0.0});
      worst = std::max(worst, std::abs(field - plateau));
      worst = std::max(worst, std::abs(boundary_jump(kappa, n, i).lambda_i - plateau));
    }
  }
  o.detail << "jump exact " << (exact ? "yes" : "no") << ", max plateau error " << worst;
  o.require(exact, "jump != sqrt(kappa) pi / 2");
  o.require(worst < 1e-12, "plateau error >= 1e-12");
  return o;
}

Outcome c10() {
  Outcome o;
  run("c10_boundary_length", o);
  const json r = report("c10_boundary_length", "boundary_length.json");
  if (r.is_null()) return o;
  const double spread = r["relative_spread"];
  for (const auto& l : r["levels"]) {
    o.detail << "eps " << l["eps"] << ": " << l["mean"] << " +- " << l["stderr"] << "; ";
  }
  o.detail << "relative spread " << spread;
  o.require(r["levels"].size() == 2, "needs eps 1e-2 and 5e-3");
  o.require(std::abs(spread) < 0.05, "spread >= 5%");
  return o;
}

Outcome c11() {
  Outcome o;
  for (const char* b : {"beta2", "beta4"}) {
    const std::string name = std::string("c11_dyson_census_") + b;
    run(name, o);
    const json r = report(name, "summary.json");
    if (r.is_null()) continue;
    const json& c = r;
    o.require(r["driving"]["T"] == 1.0 && r["driving"]["dt"] == 1e-3, name + " needs T = 1, dt = 1e-3");
    o.detail << b << ": " << c["collisions"] << " collisions, " << c["ordering_violations"]
             << " violations, min gap " << c["min_gap"] << "; ";
    o.require(c["replicas"] == 100, name + " needs 100 seeds");
    o.require(c["collisions"] == 0, name + " collisions");
    o.require(c["ordering_violations"] == 0, name + " ordering");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  g_out = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "loewnerlab_acceptance";
  fs::remove_all(g_out);

  struct Criterion {
    const char* label;
    double budget_s;  // <= 0: no runtime bound
    Outcome (*check)();
  };
  const Criterion criteria[] = {
      {"welding drift nullity", 10.0, c1},
      {"flow-line drift nullity", 10.0, c2},
      {"reverse-flow inverse identity", 120.0, c3},
      {"capacity normalization", 120.0, c4},
      {"cross-variation identities", 120.0, c5},
      {"stationarity", 1200.0, c6},
      {"annihilation of the auxiliary function", 5.0, c7},
      {"inhomogeneous solvability", 0.0, c8},
      {"boundary-jump arithmetic", 1.0, c9},
      {"boundary-length renormalization", 300.0, c10},
      {"Dyson non-colliding regime", 0.0, c11},
  };

  int failures = 0;
  int index = 1;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0) o.require(secs < c.budget_s, "runtime over budget");
    failures += o.pass ? 0 : 1;
    std::printf("%s %2d %s (%.2fs): %s\n", o.pass ? "PASS" : "FAIL", index++, c.label, secs,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures,
              std::size(criteria));
  return failures == 0 ? 0 : 1;
}
