#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "loewnerlab/cftaux.hpp"
#include "loewnerlab/particles.hpp"

namespace loewnerlab {

enum class DrivingKind { dyson, wishart, inhomogeneous, custom };

/// Writes the drift of every coordinate at configuration `x` into `out`.
using DriftFunction =
    std::function<void(std::span<const double> x, std::span<double> out)>;

/// Interacting-particle SDE  dX_i = sqrt(kappa_i) dB_i + drift_i(X) dt.
///
/// Dyson and Wishart are the time-changed processes X_{kappa t}, so kappa
/// multiplies the drift of the unit-time SDE and sqrt(kappa) the noise.
/// With beta = 8/kappa the Dyson drift is sum_j 4/(x_i - x_j).
struct DrivingModel {
  DrivingKind kind = DrivingKind::dyson;
  std::size_t N = 1;
  double kappa = 1.0;
  double beta = 2.0;
  double nu = 0.0;
  double delta = 0.0;
  std::vector<double> lambdas;
  std::vector<double> kappas;
  std::vector<double> alphas;
  DriftFunction custom_drift;

  static DrivingModel dyson(std::size_t n, double beta, double kappa = 1.0);
  static DrivingModel wishart(std::size_t n, double beta, double nu,
                              double kappa = 1.0);
  /// Drift from the inhomogeneous martingale condition; noise sqrt(kappa_i).
  static DrivingModel inhomogeneous(std::vector<double> lambdas,
                                    std::vector<double> kappas,
                                    std::vector<double> alphas);
  static DrivingModel custom(std::size_t n, double kappa, DriftFunction drift);

  /// Throws DomainError on any violated parameter constraint.
  void validate() const;

  Chamber chamber() const noexcept {
    return kind == DrivingKind::wishart ? Chamber::positive_half_line
                                        : Chamber::full_line;
  }
  double noise_scale(std::size_t i) const;
  void drift(std::span<const double> x, std::span<double> out) const;
};

/// Discretized driving path on the uniform grid t_k = k dt, k = 0..K.
/// Values are stored row-major, one row of N coordinates per time.
class DrivingPath {
 public:
  DrivingPath() = default;

  /// Path with the given rows; no SDE semantics attached.
  static DrivingPath from_values(std::size_t n, double dt,
                                 std::vector<double> values);
  /// Path frozen at `x` on [0, T] with K = ceil(T/dt) steps.
  static DrivingPath constant(const ParticleConfig& x, double T, double dt);

  std::size_t N() const noexcept { return n_; }
  std::size_t steps() const noexcept { return steps_; }
  double dt() const noexcept { return dt_; }
  double horizon() const noexcept { return dt_ * static_cast<double>(steps_); }
  double time(std::size_t k) const noexcept { return dt_ * static_cast<double>(k); }

  std::span<const double> at(std::size_t k) const;
  ParticleConfig config(std::size_t k) const;
  /// Piecewise-linear interpolation at time t in [0, horizon].
  void interpolate(double t, std::span<double> out) const;
  /// Stored Brownian increment of step k (before the sqrt(kappa_i) scale).
  std::span<const double> increment(std::size_t k) const;

  /// Grid index of `t`; throws GridError if t is not a grid time.
  std::size_t grid_index(double t) const;

  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<double>& noise() const noexcept { return noise_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const DrivingModel& model() const noexcept { return model_; }
  bool reversed() const noexcept { return reversed_; }
  bool noise_suppressed() const noexcept { return noise_suppressed_; }
  /// Total number of step halvings used by the collision guard.
  std::size_t refinements() const noexcept { return refinements_; }

  /// CSV with header `t,x1,...,xN`, 17 significant digits.
  void write_csv(std::ostream& os) const;

 private:
  friend struct DrivingPathBuilder;
  std::size_t n_ = 0;
  std::size_t steps_ = 0;
  double dt_ = 0.0;
  std::vector<double> values_;
  std::vector<double> noise_;
  std::uint64_t seed_ = 0;
  DrivingModel model_;
  bool reversed_ = false;
  bool noise_suppressed_ = false;
  std::size_t refinements_ = 0;
};

struct SimulationOptions {
  /// Replace every Gaussian increment by zero (deterministic ODE).
  bool suppress_noise = false;
  double gap_floor = 1e-9;
  int max_halvings = 40;
};

/// Euler-Maruyama on K = ceil(T/dt) uniform steps of size T/K. A step that
/// breaks ordering (or a gap below gap_floor) is split in two using a
/// Brownian bridge of the stored increment, recursively.
DrivingPath simulate_driving(const DrivingModel& model, const ParticleConfig& x0,
                             double T, double dt, std::uint64_t seed,
                             const SimulationOptions& options = {});

enum class DriftScheme { canonical, inhomogeneous, from_aux_function };

/// canonical: sum_j 4/(x_i - x_j).
/// inhomogeneous: (2/alpha_i) sum_j (alpha_i lambda_j + alpha_j lambda_i)/(x_i - x_j).
/// from_aux_function: drift_from_Z with the forward canonical Z for model.kappa.
std::vector<double> drift_eval(DriftScheme scheme, const DrivingModel& model,
                               std::span<const double> x);

/// Inhomogeneous drift written directly in terms of its parameters.
std::vector<double> inhomogeneous_drift(std::span<const double> x,
                                        std::span<const double> lambdas,
                                        std::span<const double> alphas);

/// Y_{T;t_k} = X_{T - t_k}. Noise is reversed and negated so that reversing
/// twice restores the path exactly.
DrivingPath time_reverse(const DrivingPath& path, double T);

}  // namespace loewnerlab
