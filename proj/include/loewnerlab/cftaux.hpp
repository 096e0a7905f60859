#pragma once

#include <cstddef>
#include <vector>

#include "loewnerlab/particles.hpp"

namespace loewnerlab {

enum class Side { forward, reverse };

/// Power-product auxiliary function Z(x) = prod_{i<j} |x_i - x_j|^p.
struct AuxiliaryFunctionSpec {
  double p = 0.0;
  double kappa = 0.0;
  Side side = Side::forward;

  /// p = 2/kappa (forward) or p = -2/kappa (reverse).
  static AuxiliaryFunctionSpec canonical(double kappa, Side side);
};

struct ConformalWeights {
  double h_kappa;    ///< (kappa - 6) / (2 kappa)
  double h_kappa_R;  ///< -(kappa + 6) / (2 kappa)
  double c_kappa_R;  ///< 1 + 3 (kappa + 4)^2 / (2 kappa)
};

ConformalWeights weights(double kappa);

/// d/dx_i log Z.
double log_z_gradient(const AuxiliaryFunctionSpec& spec, const ParticleConfig& x,
                      std::size_t i);

/// d^2/dx_i^2 log Z.
double log_z_hessian_diag(const AuxiliaryFunctionSpec& spec,
                          const ParticleConfig& x, std::size_t i);

/// Relative residual |D_i Z / Z| / sum of the absolute values of its terms.
/// Forward side uses
///   D_i = (kappa/2) d_i^2 + 2 sum_{j != i} ( d_j / (x_j - x_i) + h_kappa / (x_i - x_j)^2 ),
/// reverse side uses
///   D^R_i = (kappa/2) d_i^2 - 2 sum_{j != i} ( d_j / (x_j - x_i) - h^R_kappa / (x_j - x_i)^2 ).
double annihilation_residual(const AuxiliaryFunctionSpec& spec,
                             const ParticleConfig& x, std::size_t i);

/// kappa d_i log Z + sum_j 2/(x_i - x_j) (forward) or minus that sum (reverse).
std::vector<double> drift_from_Z(const AuxiliaryFunctionSpec& spec,
                                 const ParticleConfig& x);

}  // namespace loewnerlab
