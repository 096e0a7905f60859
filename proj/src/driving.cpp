#include "loewnerlab/driving.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>

#include "loewnerlab/errors.hpp"
#include "loewnerlab/random.hpp"

namespace loewnerlab {

struct DrivingPathBuilder {
  static DrivingPath make(std::size_t n, std::size_t steps, double dt) {
    DrivingPath p;
    p.n_ = n;
    p.steps_ = steps;
    p.dt_ = dt;
    p.values_.assign((steps + 1) * n, 0.0);
    p.noise_.assign(steps * n, 0.0);
    return p;
  }
  static std::vector<double>& values(DrivingPath& p) { return p.values_; }
  static std::vector<double>& noise(DrivingPath& p) { return p.noise_; }
  static void set_meta(DrivingPath& p, std::uint64_t seed, const DrivingModel& m,
                       bool reversed, bool suppressed, std::size_t refinements) {
    p.seed_ = seed;
    p.model_ = m;
    p.reversed_ = reversed;
    p.noise_suppressed_ = suppressed;
    p.refinements_ = refinements;
  }
};

namespace {

std::size_t step_count(double T, double dt) {
  if (!(T > 0.0) || !(dt > 0.0) || !std::isfinite(T) || !std::isfinite(dt)) {
    throw DomainError("T and dt must be positive and finite");
  }
  if (dt > T * (1.0 + 1e-12)) throw GridError("dt exceeds the horizon T");
  return static_cast<std::size_t>(std::max(1.0, std::ceil(T / dt - 1e-9)));
}

void pairwise_drift(std::span<const double> x, double strength,
                    std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j != i) s += 1.0 / (x[i] - x[j]);
    }
    out[i] = strength * s;
  }
}

void require_distinct(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw DomainError("non-finite particle position");
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      if (x[i] == x[j]) throw DomainError("coincident particle positions");
    }
  }
}

}  // namespace

DrivingModel DrivingModel::dyson(std::size_t n, double beta, double kappa) {
  DrivingModel m;
  m.kind = DrivingKind::dyson;
  m.N = n;
  m.beta = beta;
  m.kappa = kappa;
  m.validate();
  return m;
}

DrivingModel DrivingModel::wishart(std::size_t n, double beta, double nu,
                                   double kappa) {
  DrivingModel m;
  m.kind = DrivingKind::wishart;
  m.N = n;
  m.beta = beta;
  m.nu = nu;
  m.kappa = kappa;
  m.validate();
  return m;
}

DrivingModel DrivingModel::inhomogeneous(std::vector<double> lambdas,
                                         std::vector<double> kappas,
                                         std::vector<double> alphas) {
  DrivingModel m;
  m.kind = DrivingKind::inhomogeneous;
  m.N = lambdas.size();
  m.lambdas = std::move(lambdas);
  m.kappas = std::move(kappas);
  m.alphas = std::move(alphas);
  m.validate();
  return m;
}

DrivingModel DrivingModel::custom(std::size_t n, double kappa,
                                  DriftFunction drift) {
  DrivingModel m;
  m.kind = DrivingKind::custom;
  m.N = n;
  m.kappa = kappa;
  m.custom_drift = std::move(drift);
  m.validate();
  return m;
}

void DrivingModel::validate() const {
  if (N < 1) throw DomainError("driving model needs N >= 1");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw DomainError("kappa must be positive");
  }
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  if (!(nu > -1.0)) throw DomainError("nu must exceed -1");
  if (kind == DrivingKind::inhomogeneous) {
    if (lambdas.size() != N || kappas.size() != N || alphas.size() != N) {
      throw DomainError("inhomogeneous model needs N lambdas, kappas and alphas");
    }
    for (std::size_t i = 0; i < N; ++i) {
      if (!(lambdas[i] > 0.0)) throw DomainError("lambda_i must be positive");
      if (!(kappas[i] > 0.0)) throw DomainError("kappa_i must be positive");
      if (alphas[i] == 0.0 || !std::isfinite(alphas[i])) {
        throw DomainError("alpha_i must be finite and nonzero");
      }
    }
    const double total = std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
    if (std::abs(total - static_cast<double>(N)) > 1e-12) {
      throw DomainError("lambdas must sum to N");
    }
  }
  if (kind == DrivingKind::custom && !custom_drift) {
    throw DomainError("custom model needs a drift function");
  }
}

double DrivingModel::noise_scale(std::size_t i) const {
  if (kind == DrivingKind::inhomogeneous) return std::sqrt(kappas.at(i));
  return std::sqrt(kappa);
}

void DrivingModel::drift(std::span<const double> x, std::span<double> out) const {
  switch (kind) {
    case DrivingKind::dyson:
      pairwise_drift(x, kappa * beta / 2.0, out);
      return;
    case DrivingKind::wishart: {
      const double wall = (beta * (nu + 1.0) - 1.0) / 2.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          if (j == i) continue;
          s += 1.0 / (x[i] - x[j]) + 1.0 / (x[i] + x[j]);
        }
        out[i] = kappa * (wall / x[i] + beta / 2.0 * s);
      }
      return;
    }
    case DrivingKind::inhomogeneous: {
      const auto f = inhomogeneous_drift(x, lambdas, alphas);
      std::copy(f.begin(), f.end(), out.begin());
      return;
    }
    case DrivingKind::custom:
      custom_drift(x, out);
      return;
  }
}

DrivingPath DrivingPath::from_values(std::size_t n, double dt,
                                     std::vector<double> values) {
  if (n == 0 || values.size() % n != 0 || values.size() / n < 2) {
    throw DomainError("path values must hold at least two rows of N entries");
  }
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  DrivingPath p = DrivingPathBuilder::make(n, values.size() / n - 1, dt);
  DrivingPathBuilder::values(p) = std::move(values);
  DrivingPathBuilder::set_meta(p, 0, DrivingModel::custom(
                                         n, 1.0,
                                         [](std::span<const double>,
                                            std::span<double> out) {
                                           std::fill(out.begin(), out.end(), 0.0);
                                         }),
                               false, true, 0);
  return p;
}

DrivingPath DrivingPath::constant(const ParticleConfig& x, double T, double dt) {
  const std::size_t K = step_count(T, dt);
  std::vector<double> values;
  values.reserve((K + 1) * x.size());
  for (std::size_t k = 0; k <= K; ++k) {
    values.insert(values.end(), x.values().begin(), x.values().end());
  }
  return from_values(x.size(), T / static_cast<double>(K), std::move(values));
}

std::span<const double> DrivingPath::at(std::size_t k) const {
  if (k > steps_) throw GridError("time index beyond the path");
  return std::span<const double>(values_).subspan(k * n_, n_);
}

ParticleConfig DrivingPath::config(std::size_t k) const {
  const auto row = at(k);
  return ParticleConfig(std::vector<double>(row.begin(), row.end()),
                        model_.chamber());
}

std::span<const double> DrivingPath::increment(std::size_t k) const {
  if (k >= steps_) throw GridError("increment index beyond the path");
  return std::span<const double>(noise_).subspan(k * n_, n_);
}

void DrivingPath::interpolate(double t, std::span<double> out) const {
  const double r = std::clamp(t / dt_, 0.0, static_cast<double>(steps_));
  std::size_t k = static_cast<std::size_t>(std::floor(r));
  if (k >= steps_) k = steps_ - 1;
  const double w = r - static_cast<double>(k);
  const double* a = values_.data() + k * n_;
  const double* b = a + n_;
  if (w == 0.0) {
    std::copy(a, a + n_, out.begin());
  } else if (w == 1.0) {
    std::copy(b, b + n_, out.begin());
  } else {
    for (std::size_t i = 0; i < n_; ++i) out[i] = a[i] + w * (b[i] - a[i]);
  }
}

std::size_t DrivingPath::grid_index(double t) const {
  const double r = t / dt_;
  const double k = std::round(r);
  if (!(t >= 0.0) || std::abs(r - k) > 1e-9 * std::max(1.0, r) ||
      k > static_cast<double>(steps_)) {
    throw GridError("time " + std::to_string(t) + " is not on the driving grid");
  }
  return static_cast<std::size_t>(k);
}

void DrivingPath::write_csv(std::ostream& os) const {
  os << 't';
  for (std::size_t i = 1; i <= n_; ++i) os << ",x" << i;
  os << '\n';
  char buf[32];
  for (std::size_t k = 0; k <= steps_; ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", time(k));
    os << buf;
    for (double v : at(k)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << ',' << buf;
    }
    os << '\n';
  }
}

namespace {

class Stepper {
 public:
  Stepper(const DrivingModel& model, std::uint64_t seed, std::size_t step,
          const SimulationOptions& options)
      : model_(model),
        seed_(seed),
        step_(step),
        options_(options),
        drift_(model.N),
        trial_(model.N) {}

  /// Advances `x` over a substep of length h carrying Brownian increment dw.
  void advance(std::vector<double>& x, double h, const std::vector<double>& dw,
               std::uint64_t node, int depth) {
    model_.drift(x, drift_);
    for (std::size_t i = 0; i < x.size(); ++i) {
      trial_[i] = x[i] + drift_[i] * h + model_.noise_scale(i) * dw[i];
      if (!std::isfinite(trial_[i])) {
        throw NumericalBlowup("non-finite driving value at step " +
                              std::to_string(step_));
      }
    }
    if (ParticleConfig::admissible(trial_, model_.chamber(), options_.gap_floor)) {
      x = trial_;
      return;
    }
    if (depth >= options_.max_halvings) {
      throw CollisionFailure("ordering violated at step " + std::to_string(step_) +
                             " after " + std::to_string(depth) + " halvings");
    }
    ++refinements;
    std::vector<double> first(x.size()), second(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = options_.suppress_noise
                           ? 0.0
                           : gaussian(seed_, Stream::bridge_refinement, step_, node, i);
      first[i] = 0.5 * dw[i] + 0.5 * std::sqrt(h) * z;
      second[i] = dw[i] - first[i];
    }
    advance(x, 0.5 * h, first, 2 * node, depth + 1);
    advance(x, 0.5 * h, second, 2 * node + 1, depth + 1);
  }

  std::size_t refinements = 0;

 private:
  const DrivingModel& model_;
  std::uint64_t seed_;
  std::size_t step_;
  const SimulationOptions& options_;
  std::vector<double> drift_;
  std::vector<double> trial_;
};

}  // namespace

DrivingPath simulate_driving(const DrivingModel& model, const ParticleConfig& x0,
                             double T, double dt, std::uint64_t seed,
                             const SimulationOptions& options) {
  model.validate();
  if (x0.size() != model.N) {
    throw DomainError("initial configuration has " + std::to_string(x0.size()) +
                      " points, model expects " + std::to_string(model.N));
  }
  if (!ParticleConfig::admissible(x0.points(), model.chamber())) {
    throw DomainError("initial configuration is outside the model chamber");
  }
  if ((model.kind == DrivingKind::dyson || model.kind == DrivingKind::wishart) &&
      model.beta < 1.0) {
    throw DomainError("beta < 1 (colliding regime) is not supported");
  }
  const std::size_t K = step_count(T, dt);
  const double h = T / static_cast<double>(K);
  const std::size_t n = model.N;

  DrivingPath path = DrivingPathBuilder::make(n, K, h);
  auto& values = DrivingPathBuilder::values(path);
  auto& noise = DrivingPathBuilder::noise(path);
  std::copy(x0.values().begin(), x0.values().end(), values.begin());

  std::vector<double> x(x0.values());
  std::vector<double> dw(n);
  const double sqrt_h = std::sqrt(h);
  std::size_t refinements = 0;
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      dw[i] = options.suppress_noise
                  ? 0.0
                  : sqrt_h * gaussian(seed, Stream::driving_increments, k, 0, i);
      noise[k * n + i] = dw[i];
    }
    Stepper stepper(model, seed, k, options);
    stepper.advance(x, h, dw, 1, 0);
    refinements += stepper.refinements;
    std::copy(x.begin(), x.end(), values.begin() + (k + 1) * n);
  }
  DrivingPathBuilder::set_meta(path, seed, model, false, options.suppress_noise,
                               refinements);
  return path;
}

std::vector<double> inhomogeneous_drift(std::span<const double> x,
                                        std::span<const double> lambdas,
                                        std::span<const double> alphas) {
  require_distinct(x);
  if (lambdas.size() != x.size() || alphas.size() != x.size()) {
    throw DomainError("inhomogeneous drift needs one lambda and alpha per point");
  }
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j == i) continue;
      s += (alphas[i] * lambdas[j] + alphas[j] * lambdas[i]) / (x[i] - x[j]);
    }
    out[i] = 2.0 / alphas[i] * s;
  }
  return out;
}

std::vector<double> drift_eval(DriftScheme scheme, const DrivingModel& model,
                               std::span<const double> x) {
  require_distinct(x);
  switch (scheme) {
    case DriftScheme::canonical: {
      std::vector<double> out(x.size());
      pairwise_drift(x, 4.0, out);
      return out;
    }
    case DriftScheme::inhomogeneous:
      return inhomogeneous_drift(x, model.lambdas, model.alphas);
    case DriftScheme::from_aux_function: {
      std::vector<double> sorted(x.begin(), x.end());
      std::sort(sorted.begin(), sorted.end());
      std::vector<double> drift = drift_from_Z(
          AuxiliaryFunctionSpec::canonical(model.kappa, Side::forward),
          ParticleConfig(sorted));
      // Map back to the caller's ordering.
      std::vector<double> out(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto pos = std::lower_bound(sorted.begin(), sorted.end(), x[i]) -
                         sorted.begin();
        out[i] = drift[static_cast<std::size_t>(pos)];
      }
      return out;
    }
  }
  return {};
}

DrivingPath time_reverse(const DrivingPath& path, double T) {
  const std::size_t M = path.grid_index(T);
  const std::size_t n = path.N();
  if (M == 0) {
    throw GridError("time reversal needs T > 0");
  }
  DrivingPath out = DrivingPathBuilder::make(n, M, path.dt());
  auto& values = DrivingPathBuilder::values(out);
  auto& noise = DrivingPathBuilder::noise(out);
  for (std::size_t k = 0; k <= M; ++k) {
    const auto row = path.at(M - k);
    std::copy(row.begin(), row.end(), values.begin() + k * n);
  }
  if (!path.noise().empty()) {
    for (std::size_t k = 0; k < M; ++k) {
      const auto inc = path.increment(M - 1 - k);
      for (std::size_t i = 0; i < n; ++i) noise[k * n + i] = -inc[i];
    }
  }
  DrivingPathBuilder::set_meta(out, path.seed(), path.model(), !path.reversed(),
                               path.noise_suppressed(), path.refinements());
  return out;
}

}  // namespace loewnerlab
