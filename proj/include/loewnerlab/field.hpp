#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loewnerlab/particles.hpp"

namespace loewnerlab {

using cplx = std::complex<double>;

enum class Boundary { dirichlet, free };
enum class FieldDomain { halfplane, orthant };

/// Green function on the upper half-plane:
///   dirichlet: -log|z - w| + log|z - conj(w)|
///   free:      -log|z - w| - log|z - conj(w)|
double green(Boundary kind, cplx z, cplx w);

// ---------------------------------------------------------------------------
// Test functionals

/// Radially symmetric probability measures, scaled by `weight`.
///  - circle:     uniform on |z - center| = radius
///  - disc:       uniform on |z - center| < radius
///  - bump:       density proportional to exp(-1 / (1 - |z - c|^2 / r^2))
///  - semicircle: uniform on {center + radius e^{it}, t in [0, pi]}, center real
enum class AtomShape { circle, disc, bump, semicircle };

struct Atom {
  AtomShape shape = AtomShape::bump;
  cplx center;
  double radius = 0.0;
  double weight = 1.0;
};

/// Shape of the small cell a discretized point stands for. The self-pairing
/// of a cell uses the exact mean log-distance of the shape.
enum class CellShape { square, segment };

/// Point mass standing for a small cell of the given side length (square) or
/// arc length (segment) around `z`.
struct CloudPoint {
  cplx z;
  double weight = 0.0;
  double cell = 0.0;
  CellShape shape = CellShape::square;
};

/// Finite combination of atoms and discretized point clouds.
struct LinearFunctional {
  std::string label;
  std::vector<Atom> atoms;
  std::vector<CloudPoint> cloud;

  double mass() const;
  double total_variation() const;
  bool zero_mass(double rel_tol = 1e-12) const;

  static LinearFunctional bump(cplx center, double radius, double weight = 1.0);
  static LinearFunctional circle_average(cplx z, double eps);
  static LinearFunctional disc_average(cplx z, double radius);
  static LinearFunctional semicircle_average(double x, double eps);
  /// +1 bump at c1 and -1 bump at c2.
  static LinearFunctional signed_pair(cplx c1, double r1, cplx c2, double r2);
  static LinearFunctional zero();
};

/// Replaces every atom of `f` by a cloud: square cells of side
/// radius / cells_per_radius for circle-free shapes, arc segments of the same
/// length for circles. Semicircle atoms are kept as atoms.
LinearFunctional discretize(const LinearFunctional& f, int cells_per_radius = 8);

struct GramOptions {
  /// Allow non-zero-mass functionals for the free field by using the kernel
  /// -log|z-w| - log|z-conj w| itself as the covariance (fixed additive
  /// constant convention).
  bool kernel_representative = false;
  double quadrature_tolerance = 1e-11;
};

/// Entry (a, b) is the double integral of f_a(z) G(z, w) f_b(w). Throws
/// AdmissibilityError for non-zero-mass functionals against the free field
/// unless kernel_representative is set, DomainError for supports leaving H.
Eigen::MatrixXd gram_matrix(Boundary boundary, std::span<const LinearFunctional> fs,
                            const GramOptions& options = {});

/// Covariance of a single pair of functionals.
double pairing_covariance(Boundary boundary, const LinearFunctional& a,
                          const LinearFunctional& b, const GramOptions& options = {});

/// Gaussian sampler for a fixed covariance, factorized once.
class GaussianFactor {
 public:
  /// Throws FactorizationError if the smallest eigenvalue is below
  /// -1e-10 * max |eigenvalue|.
  explicit GaussianFactor(const Eigen::MatrixXd& covariance);
  std::size_t dimension() const noexcept { return static_cast<std::size_t>(factor_.rows()); }
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }
  /// factor * z for a standard normal vector z.
  Eigen::VectorXd apply(const Eigen::VectorXd& z) const { return factor_ * z; }

 private:
  Eigen::MatrixXd factor_;
  double min_eigenvalue_ = 0.0;
};

struct PairingSample {
  Eigen::MatrixXd gram;
  /// replicas x M, one independent draw per row.
  Eigen::MatrixXd samples;
  std::uint64_t seed = 0;
};

PairingSample sample_pairings(Boundary boundary, std::span<const LinearFunctional> fs,
                              std::size_t replicas, std::uint64_t seed,
                              const GramOptions& options = {});

/// Draws from N(0, factor factor^T) addressed by (seed, replica) in the
/// field stream; `tag` separates independent uses within one seed.
Eigen::VectorXd draw_gaussian(const GaussianFactor& factor, std::uint64_t seed,
                              std::uint64_t tag, std::uint64_t replica);

// ---------------------------------------------------------------------------
// Decorations and field models

enum class DecorationKind { log, arg, orthant };

/// log:     sum_i alpha_i log|z - x_i|
/// arg:     -sum_i beta_i arg(z - x_i), beta_i = 2/sqrt(kappa) unless given
/// orthant: sum_i alpha_i (log|z - x_i| + log|z + x_i|) + Q log|z|
struct Decoration {
  DecorationKind kind = DecorationKind::log;
  ParticleConfig anchors;
  std::vector<double> weights;
  double Q = 0.0;

  static Decoration log(ParticleConfig x, std::vector<double> alphas);
  static Decoration log(ParticleConfig x, double alpha);
  static Decoration arg(ParticleConfig x, double kappa);
  static Decoration arg(ParticleConfig x, std::vector<double> betas);
  static Decoration orthant(ParticleConfig x, std::vector<double> alphas, double Q);
};

double decoration_eval(const Decoration& d, cplx z);

struct FieldModel {
  Boundary boundary = Boundary::free;
  FieldDomain domain = FieldDomain::halfplane;
  double gamma = 1.0;
  double chi = 0.0;
  std::vector<Decoration> decorations;

  FieldModel() = default;
  FieldModel(Boundary b, double gamma_, double chi_ = 0.0,
             FieldDomain d = FieldDomain::halfplane);

  /// 2/gamma + gamma/2.
  double Q() const noexcept { return 2.0 / gamma + gamma / 2.0; }
  void validate() const;
  /// Sum of all decorations at z.
  double decoration(cplx z) const;
};

double decoration_eval(const FieldModel& model, DecorationKind kind, cplx z);

/// Deterministic pairing of the model's decorations with a functional.
double decoration_pairing(const FieldModel& model, const LinearFunctional& f);
double decoration_pairing(const Decoration& d, const LinearFunctional& f);

// ---------------------------------------------------------------------------
// Regularized quantum measures

/// Midpoint grid x_k on [a, b] with ceil((b - a)/eps) cells.
std::vector<double> boundary_grid(double a, double b, double eps);

/// Semicircle-average functionals on boundary_grid(a, b, eps).
std::vector<LinearFunctional> boundary_functionals(double a, double b, double eps);

/// sum_k eps^{gamma^2/4} exp(gamma h_eps(x_k) / 2) dx over the midpoint grid,
/// where h_eps(x_k) = field_draw[k] + semicircle average of the decorations.
/// Throws GridError if field_draw does not match the grid of spacing <= eps.
double quantum_boundary_length(const FieldModel& model, double a, double b, double eps,
                               std::span<const double> field_draw);

/// Two-dimensional analogue over a rectangle of square cells of side eps:
/// sum eps^{gamma^2/2} exp(gamma h_eps(z_k)) eps^2.
double quantum_area(const FieldModel& model, cplx lower_left, cplx upper_right,
                    double eps, std::span<const double> field_draw);
std::vector<cplx> area_grid(cplx lower_left, cplx upper_right, double eps);

}  // namespace loewnerlab
