#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loewnerlab/driving.hpp"
#include "loewnerlab/field.hpp"
#include "loewnerlab/particles.hpp"

namespace loewnerlab {

enum class CouplingMode { welding, flowline, inhomogeneous_welding };

const char* to_string(CouplingMode mode);

/// The parameter relations shared by both couplings, derived from a single
/// value: kappa = gamma^2, alpha = 2/gamma, beta = 8/kappa (Dyson),
/// chi = 2/sqrt(kappa) - sqrt(kappa)/2, flow weight 2/sqrt(kappa).
struct CanonicalParameters {
  double gamma = 0.0;
  double kappa = 0.0;
  double alpha = 0.0;
  double dyson_beta = 0.0;
  double chi = 0.0;
  double flow_weight = 0.0;
  double Q = 0.0;

  static CanonicalParameters from_gamma(double gamma);
  static CanonicalParameters from_kappa(double kappa);
};

/// C(alpha, kappa_i, lambda_i, gamma) = -(lambda_i + kappa_i/4) alpha + Q lambda_i.
double welding_constant(double alpha, double kappa_i, double lambda_i, double gamma);

/// alpha_i = Q lambda_i / (lambda_i + kappa_i/4), the unique zero of
/// welding_constant in alpha.
std::vector<double> solve_inhomogeneous_alphas(double gamma, std::span<const double> lambdas,
                                               std::span<const double> kappas);

/// Instantaneous state of an interpolating process.
///
/// welding / inhomogeneous_welding: the complex process
///   sum_i alpha_i log(f - Y_i) + Q log f'
/// along df = -sum_i 2 lambda_i/(f - Y_i) dt, dY_i = sqrt(kappa_i) dB_i - F_i dt.
/// flowline: the complex process
///   -sum_i beta_i log(g - X_i) - chi log g'
/// along dg = sum_i 2/(g - X_i) dt, dX_i = sqrt(kappa) dB_i + F_i dt; its
/// imaginary part is the real field.
struct CouplingState {
  CouplingMode mode = CouplingMode::welding;
  double kappa = 1.0;
  double gamma = 1.0;  ///< welding modes
  double chi = 0.0;    ///< flowline
  std::vector<double> weights;  ///< alpha_i or beta_i
  std::vector<double> lambdas;  ///< inhomogeneous welding; 1 otherwise
  std::vector<double> kappas;   ///< inhomogeneous welding; kappa otherwise
  std::vector<double> F;        ///< drift functions evaluated at `particles`
  cplx map_point;
  ParticleConfig particles;

  double Q() const noexcept { return 2.0 / gamma + gamma / 2.0; }
  double lambda(std::size_t i) const { return lambdas.empty() ? 1.0 : lambdas[i]; }
  double kappa_of(std::size_t i) const { return kappas.empty() ? kappa : kappas[i]; }
  /// Throws DomainError on inconsistent sizes, a map point outside H or on a
  /// particle, non-finite parameters or sum lambda_i != N.
  void validate() const;

  /// kappa = gamma^2, alpha_i = 2/gamma, F canonical.
  static CouplingState canonical_welding(double gamma, ParticleConfig y, cplx f);
  /// chi = 2/sqrt(kappa) - sqrt(kappa)/2, beta_i = 2/sqrt(kappa), F canonical.
  static CouplingState canonical_flowline(double kappa, ParticleConfig x, cplx g);
  /// Weights from solve_inhomogeneous_alphas, F from the inhomogeneous drift.
  static CouplingState inhomogeneous(double gamma, std::vector<double> lambdas,
                                     std::vector<double> kappas, ParticleConfig y, cplx f);
};

struct DriftAuditReport {
  CouplingMode mode = CouplingMode::welding;
  cplx point;
  /// dt-coefficient assembled term by term from Ito's formula.
  cplx drift;
  /// dB_i-coefficients of the complex process.
  std::vector<cplx> loadings;
  /// Coefficients of 1/(p - x_i)^2 and 1/(p - x_i) after partial fractions.
  std::vector<double> singular_coefficients;
  std::vector<double> pole_coefficients;
  /// |drift|.
  double residual = 0.0;
  /// Drift and loadings of the real field: real part (welding) or imaginary
  /// part (flowline).
  double projected_drift = 0.0;
  std::vector<double> projected_loadings;
  CouplingState state;
};

DriftAuditReport drift_audit(const CouplingState& state);

/// The drift rebuilt from singular_coefficients and pole_coefficients.
cplx drift_from_coefficients(const DriftAuditReport& report);

// ---------------------------------------------------------------------------

enum class CrossVariationMode { welding_free, flowline_dirichlet };

struct CrossVariationReport {
  CrossVariationMode mode = CrossVariationMode::welding_free;
  cplx z, w;
  double T = 0.0;
  /// Integral over [0, T] of sum_i P(2/(p_t(z) - x_i)) P(2/(p_t(w) - x_i)),
  /// P = Re (welding, reverse flow) or Im (flowline, forward flow).
  double left = 0.0;
  /// -[G(p_T(z), p_T(w)) - G(z, w)] with the matching Green function.
  double right = 0.0;
  double relative_discrepancy = 0.0;
  cplx z_T, w_T;
};

/// Throws EarlyStopError (with the last time both points were tracked) if a
/// point is swallowed before T.
CrossVariationReport cross_variation_check(CrossVariationMode mode, const DrivingPath& driving,
                                           cplx z, cplx w, double T);

/// E_t(rho) at every driving grid time in [0, T]: the Gram entry of the
/// discretized functional pushed by f^T_t (welding_free) or g_t
/// (flowline_dirichlet), with cells scaled by the local derivative.
std::vector<double> energy_profile(CrossVariationMode mode, const DrivingPath& driving,
                                   const LinearFunctional& rho, double T,
                                   int cells_per_radius = 8);

// ---------------------------------------------------------------------------

/// Functionals pulled back under g_T^{-1} = f^T_T.
struct CuttingResult {
  double T = 0.0;
  /// Pushforward of each functional: cloud points z -> f(z), masses kept,
  /// cell sizes multiplied by |f'(z)|.
  std::vector<LinearFunctional> functionals;
  /// Q times the pairing of log|f'| with each functional.
  std::vector<double> mean_offsets;
  /// Pairing of the model decorations (at the time-0 anchors) with each
  /// pulled-back functional, plus the mean offset.
  std::vector<double> means;
};

/// Realizes g_T^{-1*} H = H o g_T^{-1} + Q log|(g_T^{-1})'| at the pairing
/// level. T = 0 returns the functionals unchanged with zero offsets. Throws
/// SupportError when a functional cannot be pulled back (boundary atoms or a
/// reverse trajectory that leaves H).
CuttingResult cutting_operation(const FieldModel& field, std::span<const LinearFunctional> fs,
                                const DrivingPath& driving, double T, int cells_per_radius = 8);

// ---------------------------------------------------------------------------

/// Driving of the reverse flow, dY_i = sqrt(kappa) dB_i - sum_j 4/(Y_i - Y_j) dt,
/// started at the marked points y0. Its time reversal is a forward driving
/// with X_T = y0. The pairwise drift is attracting, so collisions are
/// possible and surface as CollisionFailure.
DrivingModel reverse_driving_model(std::size_t n, double kappa);
DrivingPath simulate_reverse_driving(const ParticleConfig& y0, double kappa, double T, double dt,
                                     std::uint64_t seed);

enum class StationarityMode { welding, flowline };

const char* to_string(StationarityMode mode);

struct StationarityConfig {
  StationarityMode mode = StationarityMode::welding;
  /// flowline: initial points of the forward driving. welding: marked points
  /// of the target field, where the reverse driving starts.
  ParticleConfig x0;
  double T = 0.25;
  double dt = 1e-3;
  /// welding: kappa = gamma^2. flowline: kappa in (0, 4].
  double gamma = 1.0;
  double kappa = 1.0;
  /// Replace alpha_i (welding) or chi (flowline) to build negative controls.
  std::optional<double> alpha_override;
  std::optional<double> chi_override;
  std::vector<LinearFunctional> functionals;
  std::size_t replicas = 2000;
  std::uint64_t seed = 0;
  int cells_per_radius = 6;
  unsigned threads = 1;
  double level = 0.01;
  double max_discard_fraction = 0.05;
  GramOptions gram;
};

struct FunctionalComparison {
  std::string label;
  double ks_stat = 0.0;
  double p_value = 1.0;
  double meanA = 0.0, meanB = 0.0;
  double varA = 0.0, varB = 0.0;
};

struct StationarityReport {
  StationarityMode mode = StationarityMode::welding;
  std::size_t replicas = 0;
  std::size_t discarded = 0;
  double discard_fraction = 0.0;
  /// level / number of functionals.
  double corrected_level = 0.0;
  std::vector<FunctionalComparison> functionals;
  /// Every p-value is above corrected_level and the discard fraction is
  /// below the configured maximum.
  bool passed = false;
};

/// Sample A pairs the decorated field at x0 with each functional. Sample B
/// pairs the transported field: welding pulls the field decorated at Y_T back
/// through the reverse flow driven by Y (the cutting operation for the forward
/// driving X_t = Y_{T-t}, which ends at X_T = x0); flowline pushes through the
/// forward coordinate change g_T. Every replica uses its own driving path;
/// replicas with a collision, a swallowed point or a cell too close to the
/// boundary are discarded. Throws InsufficientReplicas for fewer than 100
/// replicas.
StationarityReport stationarity_test(const StationarityConfig& config);

}  // namespace loewnerlab
