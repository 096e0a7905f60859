#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "loewnerlab/driving.hpp"

namespace loewnerlab {

using cplx = std::complex<double>;

enum class Geometry { halfplane, quadrant, custom };
enum class Direction { forward, reverse };

/// Vector field Psi(z, x) of a generalized Loewner equation dg/dt = Psi(g, X_t).
using LoewnerField = std::function<cplx(cplx z, std::span<const double> x)>;

/// Numerical realization of g_t (forward) or f_t (reverse) driven by a path.
///
/// Forward half-plane:  dg/dt = sum_i 2/(g - X_i).
/// Reverse half-plane:  df/dt = -sum_i 2/(f - Y_i), with the driving taken as
/// given (pass a time-reversed path to obtain f^T_t).
/// Quadrant:            dg/dt = sum_i (2/(g - X_i) + 2/(g + X_i)) + 4 delta / g.
///
/// Each call owns its workspace; an evaluator can be shared across threads.
struct MapEvaluator {
  std::shared_ptr<const DrivingPath> driving;
  Geometry geometry = Geometry::halfplane;
  Direction direction = Direction::forward;
  double delta = 0.0;
  LoewnerField psi;             ///< custom geometry only
  LoewnerField psi_derivative;  ///< optional d/dz Psi; differenced if empty
  /// Substep is min(grid remainder, step_safety * d_min^2 / N).
  double step_safety = 0.02;
  double swallow_tolerance = 1e-6;
  /// Smallest admissible substep, measured inside one driving interval.
  double min_step = 1e-18;

  MapEvaluator() = default;
  MapEvaluator(DrivingPath path, Geometry g = Geometry::halfplane,
               Direction d = Direction::forward);

  const DrivingPath& path() const;
  cplx field(cplx z, std::span<const double> x) const;
  cplx field_derivative(cplx z, std::span<const double> x) const;
  /// Distance from z to the nearest singularity of the vector field.
  double singular_distance(cplx z, std::span<const double> x) const;
  bool in_domain(cplx z) const;
};

struct TrackedPoint {
  cplx value;
  bool swallowed = false;
  /// Time at which the point was flagged; equals the target time otherwise.
  double stop_time = 0.0;
  /// log of the map derivative at the input point (principal branch
  /// continued along the flow).
  cplx log_derivative{0.0, 0.0};
};

/// Rates of real accumulators as functions of the current tracked points and
/// driving values. Used for time integrals along a flow.
using AccumulatorRates = std::function<void(std::span<const cplx> points,
                                            std::span<const double> x,
                                            std::span<double> rates)>;

struct JointFlowResult {
  std::vector<TrackedPoint> points;
  std::vector<double> accumulators;
  /// Every point was tracked to the target without swallowing.
  bool complete = true;
  double stop_time = 0.0;
  /// Accumulator values at each driving grid time reached (row per time).
  std::vector<std::vector<double>> accumulator_history;
};

/// Integrates all points jointly with a common substep (RK4, driving linearly
/// interpolated, substeps never straddle grid times). Integration stops at the
/// first swallowed point.
JointFlowResult integrate_joint(const MapEvaluator& ev, std::span<const cplx> points,
                                double t_target, std::size_t n_accumulators = 0,
                                const AccumulatorRates& rates = {},
                                bool record_history = false);

/// Each point is integrated independently; swallowed points are flagged and
/// frozen. t_target = 0 returns the inputs unchanged.
std::vector<TrackedPoint> evolve(const MapEvaluator& ev, std::span<const cplx> points,
                                 double t_target);
TrackedPoint evolve_point(const MapEvaluator& ev, cplx z, double t_target);

/// g_T^{-1}(w) via the reverse flow driven by time_reverse(driving, T).
/// `log_derivative` of the result holds log (g_T^{-1})'(w).
TrackedPoint invert_tracked(const MapEvaluator& forward, cplx w, double T);
cplx invert(const MapEvaluator& forward, cplx w, double T);

struct SlitSet {
  /// slits[i][k] is the tip estimate of slit i at times[k].
  std::vector<std::vector<cplx>> slits;
  std::vector<double> times;
  std::vector<double> anchors;

  /// CSV `slit_index,t,re,im`.
  void write_csv(std::ostream& os) const;
};

/// eta_i(t_k) ~ g_{t_k}^{-1}(X_i(t_k) + i tip_offset) for every `stride`-th
/// grid time; O(K^2) flow steps overall.
SlitSet trace_slits(const MapEvaluator& forward, double tip_offset,
                    std::size_t stride = 1);
SlitSet trace_slits(const DrivingPath& driving, double tip_offset,
                    std::size_t stride = 1);

struct CapacityEstimate {
  double T = 0.0;
  std::size_t N = 0;
  double capacity = 0.0;
  double fit_residual = 0.0;
  /// Raised when the two radii disagree beyond the fit threshold.
  bool poor_fit = false;
};

/// Fits C in g_T(z) = z + C/z + ... at z = iR and 2iR and extrapolates
/// 2 C(2iR) - C(iR) to cancel the 1/z correction.
CapacityEstimate capacity_estimate(const MapEvaluator& forward, double T,
                                   double radius = 100.0);

}  // namespace loewnerlab
