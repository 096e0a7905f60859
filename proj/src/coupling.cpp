#include "loewnerlab/coupling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "loewnerlab/errors.hpp"
#include "loewnerlab/loewner.hpp"
#include "loewnerlab/random.hpp"
#include "loewnerlab/stats.hpp"

namespace loewnerlab {

namespace {

bool finite_all(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> canonical_F(const ParticleConfig& x) {
  DrivingModel m = DrivingModel::dyson(std::max<std::size_t>(x.size(), 1), 2.0);
  return drift_eval(DriftScheme::canonical, m, x.points());
}

}  // namespace

const char* to_string(CouplingMode mode) {
  switch (mode) {
    case CouplingMode::welding: return "welding";
    case CouplingMode::flowline: return "flowline";
    case CouplingMode::inhomogeneous_welding: return "inhomogeneous-welding";
  }
  return "?";
}

const char* to_string(StationarityMode mode) {
  return mode == StationarityMode::welding ? "welding" : "flowline";
}

CanonicalParameters CanonicalParameters::from_gamma(double gamma) {
  if (!(gamma > 0.0) || !(gamma < 2.0)) throw DomainError("gamma must lie in (0, 2)");
  CanonicalParameters p;
  p.gamma = gamma;
  p.kappa = gamma * gamma;
  p.alpha = 2.0 / gamma;
  p.dyson_beta = 8.0 / p.kappa;
  p.flow_weight = 2.0 / gamma;
  p.chi = 2.0 / gamma - gamma / 2.0;
  p.Q = 2.0 / gamma + gamma / 2.0;
  // The relations below are the single source of truth for canonical runs.
  if (std::abs(p.kappa - p.gamma * p.gamma) > 1e-15 * p.kappa ||
      std::abs(p.alpha * p.gamma - 2.0) > 1e-14 ||
      std::abs(p.dyson_beta * p.kappa - 8.0) > 1e-14) {
    throw DomainError("canonical parameter relations violated");
  }
  return p;
}

CanonicalParameters CanonicalParameters::from_kappa(double kappa) {
  if (!(kappa > 0.0) || !(kappa <= 4.0)) throw DomainError("kappa must lie in (0, 4]");
  if (kappa == 4.0) {
    // gamma = 2 is excluded for the welding side but allowed for flow lines.
    CanonicalParameters p;
    p.gamma = 2.0;
    p.kappa = 4.0;
    p.alpha = 1.0;
    p.dyson_beta = 2.0;
    p.flow_weight = 1.0;
    p.chi = 0.0;
    p.Q = 2.0;
    return p;
  }
  return from_gamma(std::sqrt(kappa));
}

double welding_constant(double alpha, double kappa_i, double lambda_i, double gamma) {
  const double Q = 2.0 / gamma + gamma / 2.0;
  return -(lambda_i + kappa_i / 4.0) * alpha + Q * lambda_i;
}

std::vector<double> solve_inhomogeneous_alphas(double gamma, std::span<const double> lambdas,
                                               std::span<const double> kappas) {
  if (lambdas.size() != kappas.size()) throw DomainError("one kappa per lambda is required");
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  // Q = (2/gamma)(1 + gamma^2/4); factored so that lambda_i = 1, kappa_i = gamma^2
  // returns 2/gamma to the last bit.
  const double g2 = gamma * gamma;
  std::vector<double> alphas(lambdas.size());
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] > 0.0) || !(kappas[i] > 0.0)) {
      throw DomainError("lambda_i and kappa_i must be positive");
    }
    alphas[i] = (2.0 / gamma) * ((lambdas[i] + lambdas[i] * g2 / 4.0) / (lambdas[i] + kappas[i] / 4.0));
  }
  return alphas;
}

void CouplingState::validate() const {
  const std::size_t n = particles.size();
  if (n == 0) throw DomainError("coupling state needs at least one particle");
  if (weights.size() != n || F.size() != n) {
    throw DomainError("weights and F need one entry per particle");
  }
  if (!std::isfinite(kappa) || !(kappa > 0.0)) throw DomainError("kappa must be positive");
  if (!finite_all(weights) || !finite_all(F)) throw DomainError("non-finite coupling parameters");
  if (mode == CouplingMode::flowline) {
    if (!std::isfinite(chi)) throw DomainError("chi must be finite");
  } else if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw DomainError("gamma must be positive");
  }
  if (mode == CouplingMode::inhomogeneous_welding) {
    if (lambdas.size() != n || kappas.size() != n) {
      throw DomainError("inhomogeneous state needs lambda_i and kappa_i per particle");
    }
    const double sum = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
    if (std::abs(sum - static_cast<double>(n)) > 1e-12 * static_cast<double>(n)) {
      throw DomainError("lambda_i must sum to N");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!(lambdas[i] > 0.0) || !(kappas[i] > 0.0)) {
        throw DomainError("lambda_i and kappa_i must be positive");
      }
    }
  } else if (!lambdas.empty() || !kappas.empty()) {
    throw DomainError("lambda_i and kappa_i are only used by the inhomogeneous mode");
  }
  if (!(map_point.imag() > 0.0) || !std::isfinite(map_point.real())) {
    throw DomainError("map point must lie in the upper half-plane");
  }
}

CouplingState CouplingState::canonical_welding(double gamma, ParticleConfig y, cplx f) {
  const auto p = CanonicalParameters::from_gamma(gamma);
  CouplingState s;
  s.mode = CouplingMode::welding;
  s.kappa = p.kappa;
  s.gamma = p.gamma;
  s.weights.assign(y.size(), p.alpha);
  s.F = canonical_F(y);
  s.map_point = f;
  s.particles = std::move(y);
  s.validate();
  return s;
}

CouplingState CouplingState::canonical_flowline(double kappa, ParticleConfig x, cplx g) {
  const auto p = CanonicalParameters::from_kappa(kappa);
  CouplingState s;
  s.mode = CouplingMode::flowline;
  s.kappa = p.kappa;
  s.gamma = p.gamma;
  s.chi = p.chi;
  s.weights.assign(x.size(), p.flow_weight);
  s.F = canonical_F(x);
  s.map_point = g;
  s.particles = std::move(x);
  s.validate();
  return s;
}

CouplingState CouplingState::inhomogeneous(double gamma, std::vector<double> lambdas,
                                           std::vector<double> kappas, ParticleConfig y,
                                           cplx f) {
  CouplingState s;
  s.mode = CouplingMode::inhomogeneous_welding;
  s.gamma = gamma;
  s.kappa = gamma * gamma;
  s.weights = solve_inhomogeneous_alphas(gamma, lambdas, kappas);
  if (y.size() != lambdas.size()) throw DomainError("one lambda per particle is required");
  s.F = inhomogeneous_drift(y.points(), lambdas, s.weights);
  s.lambdas = std::move(lambdas);
  s.kappas = std::move(kappas);
  s.map_point = f;
  s.particles = std::move(y);
  s.validate();
  return s;
}

DriftAuditReport drift_audit(const CouplingState& state) {
  state.validate();
  const std::size_t n = state.particles.size();
  const cplx p = state.map_point;
  std::vector<cplx> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / (p - state.particles[i]);

  DriftAuditReport r;
  r.mode = state.mode;
  r.point = p;
  r.state = state;
  r.loadings.resize(n);
  r.singular_coefficients.resize(n);
  r.pole_coefficients.resize(n);
  r.projected_loadings.resize(n);

  cplx drift{0.0, 0.0};
  if (state.mode == CouplingMode::flowline) {
    // d log(g - X_i) = [sum_j 2/((g-X_i)(g-X_j)) - F_i/(g-X_i) - (kappa/2)/(g-X_i)^2] dt
    //                  - sqrt(kappa) dB_i/(g - X_i)
    // d log g'       = -sum_i 2/(g - X_i)^2 dt
    const double sk = std::sqrt(state.kappa);
    for (std::size_t i = 0; i < n; ++i) {
      const double beta = state.weights[i];
      cplx term = -state.F[i] * inv[i] - 0.5 * state.kappa * inv[i] * inv[i];
      for (std::size_t j = 0; j < n; ++j) term += 2.0 * inv[i] * inv[j];
      drift += -beta * term;
      drift += 2.0 * state.chi * inv[i] * inv[i];
      r.loadings[i] = beta * sk * inv[i];
      r.projected_loadings[i] = r.loadings[i].imag();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double beta = state.weights[i];
      r.singular_coefficients[i] = -2.0 * beta + 0.5 * beta * state.kappa + 2.0 * state.chi;
      double pole = beta * state.F[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) {
          pole -= 2.0 * (beta + state.weights[j]) / (state.particles[i] - state.particles[j]);
        }
      }
      r.pole_coefficients[i] = pole;
    }
    r.projected_drift = drift.imag();
  } else {
    // d log(f - Y_i) = [-sum_j 2 lambda_j/((f-Y_i)(f-Y_j)) + F_i/(f-Y_i)
    //                   - (kappa_i/2)/(f-Y_i)^2] dt - sqrt(kappa_i) dB_i/(f - Y_i)
    // d log f'       = sum_i 2 lambda_i/(f - Y_i)^2 dt
    const double Q = state.Q();
    for (std::size_t i = 0; i < n; ++i) {
      const double alpha = state.weights[i];
      cplx term = state.F[i] * inv[i] - 0.5 * state.kappa_of(i) * inv[i] * inv[i];
      for (std::size_t j = 0; j < n; ++j) term -= 2.0 * state.lambda(j) * inv[i] * inv[j];
      drift += alpha * term;
      drift += 2.0 * Q * state.lambda(i) * inv[i] * inv[i];
      r.loadings[i] = -alpha * std::sqrt(state.kappa_of(i)) * inv[i];
      r.projected_loadings[i] = r.loadings[i].real();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double alpha = state.weights[i];
      r.singular_coefficients[i] =
          2.0 * welding_constant(alpha, state.kappa_of(i), state.lambda(i), state.gamma);
      double pole = alpha * state.F[i];
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) {
          pole -= 2.0 * (alpha * state.lambda(j) + state.weights[j] * state.lambda(i)) /
                  (state.particles[i] - state.particles[j]);
        }
      }
      r.pole_coefficients[i] = pole;
    }
    r.projected_drift = drift.real();
  }
  r.drift = drift;
  r.residual = std::abs(drift);
  return r;
}

cplx drift_from_coefficients(const DriftAuditReport& report) {
  cplx total{0.0, 0.0};
  for (std::size_t i = 0; i < report.singular_coefficients.size(); ++i) {
    const cplx inv = 1.0 / (report.point - report.state.particles[i]);
    total += report.singular_coefficients[i] * inv * inv + report.pole_coefficients[i] * inv;
  }
  return total;
}

// ---------------------------------------------------------------------------

namespace {

struct FlowSetup {
  MapEvaluator ev;
  Boundary boundary;
  bool real_projection;
};

FlowSetup make_flow(CrossVariationMode mode, const DrivingPath& driving, double T) {
  if (mode == CrossVariationMode::welding_free) {
    return {MapEvaluator(time_reverse(driving, T), Geometry::halfplane, Direction::reverse),
            Boundary::free, true};
  }
  return {MapEvaluator(driving, Geometry::halfplane, Direction::forward), Boundary::dirichlet,
          false};
}

double project(cplx v, bool real) { return real ? v.real() : v.imag(); }

/// Cloud of all functionals, concatenated, with the owner of every point.
struct FlatCloud {
  std::vector<cplx> points;
  std::vector<std::size_t> owner;
  std::vector<LinearFunctional> clouds;
};

FlatCloud flatten(std::span<const LinearFunctional> fs, int cells_per_radius) {
  FlatCloud out;
  for (std::size_t j = 0; j < fs.size(); ++j) {
    for (const Atom& a : fs[j].atoms) {
      if (a.shape == AtomShape::semicircle && a.weight != 0.0) {
        throw SupportError("functional '" + fs[j].label +
                           "' touches the boundary and cannot be transported");
      }
    }
    LinearFunctional c = discretize(fs[j], cells_per_radius);
    c.atoms.clear();
    for (const CloudPoint& p : c.cloud) {
      out.points.push_back(p.z);
      out.owner.push_back(j);
    }
    out.clouds.push_back(std::move(c));
  }
  return out;
}

/// Moves every cloud point to its image; cells scale with |map'|.
std::vector<LinearFunctional> transport(const FlatCloud& flat,
                                        std::span<const TrackedPoint> images) {
  std::vector<LinearFunctional> out = flat.clouds;
  std::size_t k = 0;
  for (auto& f : out) {
    for (CloudPoint& p : f.cloud) {
      p.z = images[k].value;
      p.cell *= std::exp(images[k].log_derivative.real());
      ++k;
    }
  }
  return out;
}

/// Calls visit(k, points) at every grid time k = 0..M of the flow, integrating
/// one driving interval at a time and composing log-derivatives.
template <class Visit>
bool flow_stepwise(const MapEvaluator& ev, std::span<const cplx> start, std::size_t M,
                   Visit visit) {
  const DrivingPath& path = ev.path();
  const std::size_t n = path.N();
  std::vector<TrackedPoint> state(start.size());
  for (std::size_t p = 0; p < start.size(); ++p) state[p].value = start[p];
  visit(std::size_t{0}, std::span<const TrackedPoint>(state));
  std::vector<cplx> pts(start.size());
  for (std::size_t k = 0; k < M; ++k) {
    std::vector<double> rows(path.at(k).begin(), path.at(k).end());
    rows.insert(rows.end(), path.at(k + 1).begin(), path.at(k + 1).end());
    MapEvaluator step = ev;
    step.driving = std::make_shared<const DrivingPath>(
        DrivingPath::from_values(n, path.dt(), std::move(rows)));
    for (std::size_t p = 0; p < state.size(); ++p) pts[p] = state[p].value;
    const auto res = integrate_joint(step, pts, path.dt());
    if (!res.complete) return false;
    for (std::size_t p = 0; p < state.size(); ++p) {
      state[p].value = res.points[p].value;
      state[p].log_derivative += res.points[p].log_derivative;
    }
    visit(k + 1, std::span<const TrackedPoint>(state));
  }
  return true;
}

}  // namespace

CrossVariationReport cross_variation_check(CrossVariationMode mode, const DrivingPath& driving,
                                           cplx z, cplx w, double T) {
  if (z == w) throw DomainError("cross variation needs two distinct points");
  if (!(z.imag() > 0.0) || !(w.imag() > 0.0)) {
    throw DomainError("cross variation points must lie in H");
  }
  CrossVariationReport r;
  r.mode = mode;
  r.z = z;
  r.w = w;
  r.T = T;
  r.z_T = z;
  r.w_T = w;
  if (T == 0.0) return r;
  driving.grid_index(T);

  const FlowSetup setup = make_flow(mode, driving, T);
  const bool re = setup.real_projection;
  const AccumulatorRates rates = [re](std::span<const cplx> pts, std::span<const double> x,
                                      std::span<double> out) {
    double s = 0.0;
    for (double xi : x) s += project(2.0 / (pts[0] - xi), re) * project(2.0 / (pts[1] - xi), re);
    out[0] = s;
  };
  const cplx start[] = {z, w};
  const auto res = integrate_joint(setup.ev, start, T, 1, rates);
  if (!res.complete) {
    throw EarlyStopError("tracked point swallowed at t=" + std::to_string(res.stop_time),
                         res.stop_time);
  }
  r.z_T = res.points[0].value;
  r.w_T = res.points[1].value;
  r.left = res.accumulators[0];
  r.right = -(green(setup.boundary, r.z_T, r.w_T) - green(setup.boundary, z, w));
  const double scale = std::max({std::abs(r.left), std::abs(r.right), 1e-9});
  r.relative_discrepancy = std::abs(r.left - r.right) / scale;
  return r;
}

std::vector<double> energy_profile(CrossVariationMode mode, const DrivingPath& driving,
                                   const LinearFunctional& rho, double T, int cells_per_radius) {
  const LinearFunctional fs[] = {rho};
  const FlatCloud flat = flatten(fs, cells_per_radius);
  GramOptions opt;
  opt.kernel_representative = true;
  const Boundary b =
      mode == CrossVariationMode::welding_free ? Boundary::free : Boundary::dirichlet;
  std::vector<double> out;
  if (T == 0.0) {
    out.push_back(pairing_covariance(b, flat.clouds[0], flat.clouds[0], opt));
    return out;
  }
  const std::size_t M = driving.grid_index(T);
  const FlowSetup setup = make_flow(mode, driving, T);
  const bool ok = flow_stepwise(setup.ev, flat.points, M,
                                [&](std::size_t, std::span<const TrackedPoint> images) {
                                  const auto pushed = transport(flat, images);
                                  out.push_back(pairing_covariance(b, pushed[0], pushed[0], opt));
                                });
  if (!ok) {
    throw EarlyStopError("functional support swallowed",
                         driving.time(out.empty() ? 0 : out.size() - 1));
  }
  return out;
}

CuttingResult cutting_operation(const FieldModel& field, std::span<const LinearFunctional> fs,
                                const DrivingPath& driving, double T, int cells_per_radius) {
  CuttingResult out;
  out.T = T;
  if (T == 0.0) {
    out.functionals.assign(fs.begin(), fs.end());
    out.mean_offsets.assign(fs.size(), 0.0);
    for (const auto& f : fs) out.means.push_back(decoration_pairing(field, f));
    return out;
  }
  const FlatCloud flat = flatten(fs, cells_per_radius);
  MapEvaluator reverse(time_reverse(driving, T), Geometry::halfplane, Direction::reverse);
  JointFlowResult res;
  try {
    res = integrate_joint(reverse, flat.points, T);
  } catch (const StiffnessFailure& e) {
    throw SupportError(std::string("reverse flow of the support stalled: ") + e.what());
  }
  if (!res.complete) throw SupportError("functional support meets the slits");
  for (const auto& tp : res.points) {
    if (!(tp.value.imag() > 0.0)) throw SupportError("pulled-back point left H");
  }
  out.functionals = transport(flat, res.points);
  const double Q = field.Q();
  out.mean_offsets.assign(fs.size(), 0.0);
  std::size_t k = 0;
  for (std::size_t j = 0; j < out.functionals.size(); ++j) {
    for (const CloudPoint& p : flat.clouds[j].cloud) {
      out.mean_offsets[j] += Q * p.weight * res.points[k].log_derivative.real();
      ++k;
    }
    out.means.push_back(decoration_pairing(field, out.functionals[j]) + out.mean_offsets[j]);
  }
  return out;
}

DrivingModel reverse_driving_model(std::size_t n, double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be positive");
  const DrivingModel dyson = DrivingModel::dyson(n, 8.0 / kappa, kappa);
  return DrivingModel::custom(n, kappa, [dyson](std::span<const double> y, std::span<double> out) {
    dyson.drift(y, out);
    for (double& v : out) v = -v;
  });
}

DrivingPath simulate_reverse_driving(const ParticleConfig& y0, double kappa, double T, double dt,
                                     std::uint64_t seed) {
  return simulate_driving(reverse_driving_model(y0.size(), kappa), y0, T, dt, seed);
}

// ---------------------------------------------------------------------------

namespace {

struct ReplicaOutcome {
  std::vector<double> a;
  std::vector<double> b;
  bool discarded = false;
};

class StationarityRunner {
 public:
  explicit StationarityRunner(const StationarityConfig& c) : c_(c) {
    const std::size_t n = c.x0.size();
    Decoration d0;
    if (c.mode == StationarityMode::welding) {
      params_ = CanonicalParameters::from_gamma(c.gamma);
      boundary_ = Boundary::free;
      alpha_ = c.alpha_override.value_or(params_.alpha);
      d0 = Decoration::log(c.x0, alpha_);
    } else {
      params_ = CanonicalParameters::from_kappa(c.kappa);
      boundary_ = Boundary::dirichlet;
      d0 = Decoration::arg(c.x0, std::vector<double>(n, params_.flow_weight));
    }
    chi_ = c.chi_override.value_or(params_.chi);
    model_ = c.mode == StationarityMode::welding
                 ? reverse_driving_model(n, params_.kappa)
                 : DrivingModel::dyson(n, params_.dyson_beta, params_.kappa);
    flat_ = flatten(c.functionals, c.cells_per_radius);
    factor0_ = std::make_unique<GaussianFactor>(gram_matrix(boundary_, c.functionals, c.gram));
    for (const auto& f : c.functionals) mean0_.push_back(decoration_pairing(d0, f));
  }

  ReplicaOutcome run(std::size_t r) const {
    ReplicaOutcome out;
    const Eigen::VectorXd noise = draw_gaussian(*factor0_, c_.seed, 0, r);
    out.a.resize(mean0_.size());
    for (std::size_t j = 0; j < mean0_.size(); ++j) {
      out.a[j] = mean0_[j] + noise(static_cast<Eigen::Index>(j));
    }
    out.b = sample_b(r, out.discarded);
    return out;
  }

 private:
  std::vector<double> sample_b(std::size_t r, bool& discarded) const {
    const std::size_t m = c_.functionals.size();
    const bool welding = c_.mode == StationarityMode::welding;
    std::vector<double> v(m, 0.0);
    discarded = false;
    std::vector<TrackedPoint> images(flat_.points.size());
    ParticleConfig anchors = c_.x0;
    if (c_.T == 0.0) {
      for (std::size_t k = 0; k < images.size(); ++k) images[k].value = flat_.points[k];
    } else {
      DrivingPath path;
      try {
        path = simulate_driving(model_, c_.x0, c_.T, c_.dt,
                                derive_seed(c_.seed, Stream::stationarity_b, r));
      } catch (const CollisionFailure&) {
        discarded = true;
        return v;
      }
      // Welding: `path` is already the reverse-time driving Y_{T;t}.
      const MapEvaluator ev(path, Geometry::halfplane,
                            welding ? Direction::reverse : Direction::forward);
      JointFlowResult res;
      try {
        res = integrate_joint(ev, flat_.points, c_.T);
      } catch (const StiffnessFailure&) {
        discarded = true;
        return v;
      }
      if (!res.complete) {
        discarded = true;
        return v;
      }
      images = std::move(res.points);
      anchors = path.config(path.steps());
    }
    const auto pushed = transport(flat_, images);
    for (const auto& f : pushed) {
      for (const CloudPoint& p : f.cloud) {
        if (p.z.imag() < 2.0 * p.cell) {
          discarded = true;
          return v;
        }
      }
    }
    std::size_t k = 0;
    if (welding) {
      const Decoration d = Decoration::log(anchors, alpha_);
      for (std::size_t j = 0; j < m; ++j) {
        for (const CloudPoint& p : flat_.clouds[j].cloud) {
          v[j] += p.weight * (decoration_eval(d, images[k].value) +
                              params_.Q * images[k].log_derivative.real());
          ++k;
        }
      }
    } else {
      const Decoration d =
          Decoration::arg(anchors, std::vector<double>(anchors.size(), params_.flow_weight));
      for (std::size_t j = 0; j < m; ++j) {
        for (const CloudPoint& p : flat_.clouds[j].cloud) {
          v[j] += p.weight * (decoration_eval(d, images[k].value) -
                              chi_ * images[k].log_derivative.imag());
          ++k;
        }
      }
    }
    const GaussianFactor factor(gram_matrix(boundary_, pushed, c_.gram));
    const Eigen::VectorXd noise = draw_gaussian(factor, c_.seed, 1, r);
    for (std::size_t j = 0; j < m; ++j) v[j] += noise(static_cast<Eigen::Index>(j));
    return v;
  }

  const StationarityConfig& c_;
  CanonicalParameters params_;
  Boundary boundary_ = Boundary::free;
  double alpha_ = 0.0;
  double chi_ = 0.0;
  DrivingModel model_;
  FlatCloud flat_;
  std::unique_ptr<GaussianFactor> factor0_;
  std::vector<double> mean0_;
};

}  // namespace

StationarityReport stationarity_test(const StationarityConfig& config) {
  if (config.replicas < 100) {
    throw InsufficientReplicas("stationarity tests need at least 100 replicas, got " +
                               std::to_string(config.replicas));
  }
  if (config.functionals.empty()) throw DomainError("no functionals to compare");
  if (config.x0.size() == 0) throw DomainError("initial configuration is empty");
  if (!(config.T >= 0.0)) throw DomainError("T must be non-negative");
  if (!(config.level > 0.0 && config.level < 1.0)) throw DomainError("level must lie in (0, 1)");

  const StationarityRunner runner(config);
  const std::size_t R = config.replicas;
  std::vector<ReplicaOutcome> outcomes(R);
  const unsigned threads = std::max(1u, config.threads);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= R) return;
      try {
        outcomes[r] = runner.run(r);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(R);
        return;
      }
    }
  };
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  const std::size_t m = config.functionals.size();
  StationarityReport rep;
  rep.mode = config.mode;
  rep.replicas = R;
  for (const auto& o : outcomes) rep.discarded += o.discarded ? 1 : 0;
  rep.discard_fraction = static_cast<double>(rep.discarded) / static_cast<double>(R);
  rep.corrected_level = config.level / static_cast<double>(m);
  rep.passed = rep.discard_fraction < config.max_discard_fraction;
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> a, b;
    a.reserve(R);
    b.reserve(R);
    for (const auto& o : outcomes) {
      a.push_back(o.a[j]);
      if (!o.discarded) b.push_back(o.b[j]);
    }
    FunctionalComparison fc;
    fc.label = config.functionals[j].label.empty() ? "f" + std::to_string(j)
                                                   : config.functionals[j].label;
    if (b.size() < 2) {
      fc.p_value = 0.0;
      fc.ks_stat = 1.0;
    } else {
      const auto ks = ks_two_sample(a, b);
      fc.ks_stat = ks.statistic;
      fc.p_value = ks.p_value;
      const auto ma = moments(a);
      const auto mb = moments(b);
      fc.meanA = ma.mean;
      fc.varA = ma.variance;
      fc.meanB = mb.mean;
      fc.varB = mb.variance;
    }
    rep.passed = rep.passed && fc.p_value > rep.corrected_level;
    rep.functionals.push_back(fc);
  }
  return rep;
}

}  // namespace loewnerlab
