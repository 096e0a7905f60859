#include "loewnerlab/cftaux.hpp"

#include <cmath>
#include <string>

#include "loewnerlab/errors.hpp"

namespace loewnerlab {

namespace {

void require_kappa(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw DomainError("kappa must be positive, got " + std::to_string(kappa));
  }
}

void require_index(const ParticleConfig& x, std::size_t i) {
  if (i >= x.size()) {
    throw DomainError("particle index " + std::to_string(i) + " out of range");
  }
}

}  // namespace

AuxiliaryFunctionSpec AuxiliaryFunctionSpec::canonical(double kappa, Side side) {
  require_kappa(kappa);
  return {side == Side::forward ? 2.0 / kappa : -2.0 / kappa, kappa, side};
}

ConformalWeights weights(double kappa) {
  require_kappa(kappa);
  return {(kappa - 6.0) / (2.0 * kappa), -(kappa + 6.0) / (2.0 * kappa),
          1.0 + 3.0 * (kappa + 4.0) * (kappa + 4.0) / (2.0 * kappa)};
}

double log_z_gradient(const AuxiliaryFunctionSpec& spec, const ParticleConfig& x,
                      std::size_t i) {
  require_index(x, i);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j != i) s += 1.0 / (x[i] - x[j]);
  }
  return spec.p * s;
}

double log_z_hessian_diag(const AuxiliaryFunctionSpec& spec,
                          const ParticleConfig& x, std::size_t i) {
  require_index(x, i);
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    const double d = x[i] - x[j];
    s += 1.0 / (d * d);
  }
  return -spec.p * s;
}

double annihilation_residual(const AuxiliaryFunctionSpec& spec,
                             const ParticleConfig& x, std::size_t i) {
  require_kappa(spec.kappa);
  require_index(x, i);
  const ConformalWeights w = weights(spec.kappa);
  const double grad_i = log_z_gradient(spec, x, i);
  const double second = log_z_hessian_diag(spec, x, i) + grad_i * grad_i;

  double sum = 0.5 * spec.kappa * second;
  double scale = std::abs(sum);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    const double d = x[j] - x[i];
    double transport;
    double potential;
    if (spec.side == Side::forward) {
      transport = 2.0 / d * log_z_gradient(spec, x, j);
      potential = 2.0 * w.h_kappa / (d * d);
    } else {
      transport = -2.0 / d * log_z_gradient(spec, x, j);
      potential = 2.0 * w.h_kappa_R / (d * d);
    }
    sum += transport + potential;
    scale += std::abs(transport) + std::abs(potential);
  }
  return scale > 0.0 ? std::abs(sum) / scale : 0.0;
}

std::vector<double> drift_from_Z(const AuxiliaryFunctionSpec& spec,
                                 const ParticleConfig& x) {
  require_kappa(spec.kappa);
  const double sign = spec.side == Side::forward ? 1.0 : -1.0;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pair = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (j != i) pair += 2.0 / (x[i] - x[j]);
    }
    out[i] = spec.kappa * log_z_gradient(spec, x, i) + sign * pair;
  }
  return out;
}

}  // namespace loewnerlab
