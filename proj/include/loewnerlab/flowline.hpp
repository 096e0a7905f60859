#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loewnerlab/field.hpp"

namespace loewnerlab {

/// Real-valued field evaluated along a trace.
using SmoothField = std::function<double(cplx)>;
/// Distance from z to the boundary of the domain; non-positive outside.
using BoundaryDistance = std::function<double(cplx)>;

/// Im z, the distance to the real line.
double halfplane_distance(cplx z);

enum class FlowTermination { max_steps, boundary };

std::string to_string(FlowTermination t);

/// Polyline of the unit-speed curve d eta/ds = exp(i h(eta) / chi). Points are
/// dt apart in chord length; `s` is the integrated arclength at each point
/// and `tangents` the unit direction there.
struct FlowLine {
  cplx start;
  double chi = 1.0;
  double dt = 0.0;
  std::vector<cplx> points;
  std::vector<double> s;
  std::vector<cplx> tangents;
  FlowTermination termination = FlowTermination::max_steps;

  double length() const { return s.empty() ? 0.0 : s.back(); }
  /// Cubic Hermite interpolation in arclength, clamped to [0, length()].
  cplx at(double arclength) const;
  /// CSV with header `s,re,im`.
  void write_csv(std::ostream& os) const;
};

/// Fourth-order Runge-Kutta trace started at `start`. Each step length is
/// adjusted so that the chord is exactly dt. Stops once the boundary distance
/// falls below dt or after max_steps steps. Field failures (exceptions or
/// non-finite values) are rethrown as FieldEvaluationError with the arclength
/// reached.
FlowLine trace_flow_line(const SmoothField& h, double chi, cplx start, double dt,
                         std::size_t max_steps,
                         const BoundaryDistance& distance = halfplane_distance);

/// Conformal map with its derivative.
struct ConformalMap {
  std::function<cplx(cplx)> map;
  std::function<cplx(cplx)> derivative;

  static ConformalMap identity();
  static ConformalMap scaling(double factor);
  /// (a z + b) / (c z + d) with ad - bc > 0, an automorphism of H.
  static ConformalMap mobius(double a, double b, double c, double d);
};

struct CovarianceReport {
  /// Hausdorff distance between psi(eta~) and eta over the common arclength.
  double distance = 0.0;
  double compared_length = 0.0;
  FlowLine direct;
  FlowLine transported;
};

/// Traces eta from psi(start) under h and eta~ from start under
/// h o psi - chi arg psi', then compares psi(eta~) with eta. Throws
/// TruncatedComparison when the common arclength is shorter than 10 dt.
CovarianceReport covariance_check(const SmoothField& h, double chi, const ConformalMap& psi,
                                  cplx start, double dt, std::size_t max_steps,
                                  const BoundaryDistance& distance = halfplane_distance);

/// Hausdorff distance between two polylines.
double hausdorff_distance(const std::vector<cplx>& a, const std::vector<cplx>& b);

struct BoundaryJump {
  double kappa = 0.0;
  std::size_t N = 0;
  std::size_t i = 0;
  double chi = 0.0;
  double theta = 0.0;
  /// Boundary value on (X^(i), X^(i+1)).
  double lambda_i = 0.0;
  /// Limits of the field on either side of a strand from X^(i) with tangent
  /// angle theta.
  double left_limit = 0.0;
  double right_limit = 0.0;
  double jump = 0.0;
};

/// Plateau and strand-side values for kappa in (0, 4], 1 <= i <= N.
BoundaryJump boundary_jump(double kappa, std::size_t N, std::size_t i, double theta = 0.0);

/// Gaussian field mollified at scale sigma on a rectangular window: the
/// Dirichlet Green covariance of bumps of radius sigma / 2 on a lattice of
/// spacing sigma, interpolated with Gaussian weights of width sigma.
class MollifiedField {
 public:
  MollifiedField(cplx lower_left, cplx upper_right, double sigma, std::uint64_t seed);

  /// Throws DomainError outside the window.
  double operator()(cplx z) const;
  double sigma() const noexcept { return sigma_; }
  const std::vector<cplx>& nodes() const noexcept { return nodes_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

 private:
  cplx lower_left_, upper_right_;
  double sigma_;
  std::size_t nx_ = 0, ny_ = 0;
  std::vector<cplx> nodes_;
  Eigen::MatrixXd covariance_;
  Eigen::VectorXd values_;
};

}  // namespace loewnerlab
