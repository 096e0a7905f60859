#include "loewnerlab/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "loewnerlab/errors.hpp"
#include "loewnerlab/random.hpp"

namespace loewnerlab {

namespace {

constexpr double kPi = std::numbers::pi;
// Mean of log|U - V| for U, V independent uniform on the unit square and on
// the unit segment.
constexpr double kMeanLogSquare = -0.80508672195008715;
constexpr double kMeanLogSegment = -1.5;

template <class F>
double integrate(F f, double a, double b, double tol) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol,
                                                                       &err);
}

template <class F>
double integrate_split(F f, double a, double b, std::vector<double> cuts, double tol) {
  cuts.push_back(a);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = std::max(a, cuts[k]);
    const double hi = std::min(b, cuts[k + 1]);
    if (hi > lo) total += integrate(f, lo, hi, tol);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Bump profile tables on the unit disc.

double bump_phi(double u) {
  if (u >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - u * u));
}

class BumpTable {
 public:
  static const BumpTable& get() {
    static const BumpTable table;
    return table;
  }

  /// Radial probability density of |Z| for Z with density ~ phi(|z|).
  double density(double u) const { return u >= 1.0 ? 0.0 : 2.0 * kPi * u * bump_phi(u) / z0_; }
  /// Unnormalized planar density at radius u (integrates to 1 over the disc).
  double planar(double u) const { return bump_phi(u) / z0_; }

  /// P(|Z| <= u).
  double cdf(double u) const {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return hermite(cdf_, [this](double t) { return density(t); }, u);
  }

  /// E log max(u, |Z|).
  double potential(double u) const {
    if (u >= 1.0) return std::log(u);
    return hermite(pot_, [this](double t) { return t > 0.0 ? cdf(t) / t : 0.0; }, u);
  }

 private:
  static constexpr int kCells = 4096;

  BumpTable() {
    z0_ = 1.0;
    const double raw = integrate([](double u) { return 2.0 * kPi * u * bump_phi(u); }, 0.0,
                                 1.0, 1e-15);
    z0_ = raw;
    const double h = 1.0 / kCells;
    cdf_.assign(kCells + 1, 0.0);
    for (int k = 0; k < kCells; ++k) {
      cdf_[k + 1] = cdf_[k] + gauss15([this](double u) { return density(u); }, k * h,
                                      (k + 1) * h);
    }
    // Tail integrals of log(t) * density(t) from the top.
    std::vector<double> tail(kCells + 1, 0.0);
    for (int k = kCells - 1; k >= 0; --k) {
      tail[k] = tail[k + 1] + gauss15([this](double u) { return std::log(u) * density(u); },
                                      k * h, (k + 1) * h);
    }
    const double norm = cdf_[kCells];
    pot_.assign(kCells + 1, 0.0);
    for (int k = 0; k <= kCells; ++k) {
      cdf_[k] /= norm;
      tail[k] /= norm;
      const double u = k * h;
      pot_[k] = (k == 0 ? 0.0 : std::log(u) * cdf_[k]) + tail[k];
    }
    z0_ *= norm;
  }

  template <class F>
  static double gauss15(F f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0);
  }

  /// Cubic Hermite interpolation of tabulated values with exact derivative.
  template <class D>
  static double hermite(const std::vector<double>& v, D deriv, double u) {
    const double h = 1.0 / kCells;
    int k = static_cast<int>(u / h);
    if (k >= kCells) k = kCells - 1;
    const double u0 = k * h;
    const double t = (u - u0) / h;
    const double d0 = deriv(u0) * h;
    const double d1 = deriv(u0 + h) * h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * v[k] + (t3 - 2 * t2 + t) * d0 +
           (-2 * t3 + 3 * t2) * v[k + 1] + (t3 - t2) * d1;
  }

  double z0_ = 1.0;
  std::vector<double> cdf_;
  std::vector<double> pot_;
};

// ---------------------------------------------------------------------------
// Radial profiles

bool is_radial(AtomShape s) { return s != AtomShape::semicircle; }

/// E log max(rho, R) where R is the radius of a point drawn from the profile.
double profile_potential(AtomShape shape, double s, double rho) {
  if (rho >= s) return std::log(rho);
  switch (shape) {
    case AtomShape::circle:
    case AtomShape::semicircle:
      return std::log(s);
    case AtomShape::disc:
      return std::log(s) - 0.5 * (1.0 - rho * rho / (s * s));
    case AtomShape::bump:
      return std::log(s) + BumpTable::get().potential(rho / s);
  }
  return 0.0;
}

/// Mean of log max(|d + r e^{it}|, s) over t: mean log-distance between
/// uniform points on circles of radii s and r whose centres are d apart.
double circle_circle(double d, double s, double r, double tol) {
  if (d >= s + r) return std::log(d);
  if (s >= d + r) return std::log(s);
  if (r >= d + s) return std::log(r);
  const double c = std::clamp((s * s - d * d - r * r) / (2.0 * d * r), -1.0, 1.0);
  const double tstar = std::acos(c);
  const double outside = integrate(
      [&](double t) { return 0.5 * std::log(d * d + r * r + 2.0 * d * r * std::cos(t)); }, 0.0,
      tstar, tol);
  return (outside + (kPi - tstar) * std::log(s)) / kPi;
}

/// Mean over t of profile_potential(|d + r e^{it}|) for profile (shape, s).
double ring_average(AtomShape shape, double s, double d, double r, double tol) {
  if (r == 0.0) return profile_potential(shape, s, d);
  if (d >= s + r) return std::log(d);
  if (r >= d + s) return std::log(r);
  if (shape == AtomShape::circle || shape == AtomShape::semicircle) {
    return circle_circle(d, s, r, tol);
  }
  if (shape == AtomShape::disc && d + r <= s) {
    return std::log(s) - 0.5 * (1.0 - (d * d + r * r) / (s * s));
  }
  if (d == 0.0) return profile_potential(shape, s, r);
  auto f = [&](double t) {
    const double rho = std::sqrt(std::max(0.0, d * d + r * r + 2.0 * d * r * std::cos(t)));
    return profile_potential(shape, s, rho);
  };
  std::vector<double> cuts;
  const double c = (s * s - d * d - r * r) / (2.0 * d * r);
  if (c > -1.0 && c < 1.0) cuts.push_back(std::acos(c));
  return integrate_split(f, 0.0, kPi, cuts, tol) / kPi;
}

/// Radial density of a profile on [0, s] (not used for circles).
double profile_density(AtomShape shape, double s, double r) {
  switch (shape) {
    case AtomShape::disc:
      return r < s ? 2.0 * r / (s * s) : 0.0;
    case AtomShape::bump:
      return BumpTable::get().density(r / s) / s;
    default:
      return 0.0;
  }
}

/// E log|Z - W| for Z, W independent draws from two radial profiles whose
/// centres are d apart.
double direct_log_mean(AtomShape sa, double ra, AtomShape sb, double rb, double d,
                       double tol) {
  if (d >= ra + rb) return std::log(d);
  const bool a_ring = sa == AtomShape::circle || sa == AtomShape::semicircle;
  const bool b_ring = sb == AtomShape::circle || sb == AtomShape::semicircle;
  if (b_ring) return ring_average(sa, ra, d, rb, tol);
  if (a_ring) return ring_average(sb, rb, d, ra, tol);
  auto f = [&](double r) { return profile_density(sb, rb, r) * ring_average(sa, ra, d, r, tol); };
  std::vector<double> cuts;
  for (double c : {std::abs(d - ra), ra - d, d + ra}) {
    if (c > 0.0 && c < rb) cuts.push_back(c);
  }
  return integrate_split(f, 0.0, rb, cuts, tol);
}

double sigma(Boundary b) { return b == Boundary::dirichlet ? 1.0 : -1.0; }

double kernel(Boundary b, cplx z, cplx w) {
  const double dx = z.real() - w.real();
  const double dy = z.imag() - w.imag();
  const double sy = z.imag() + w.imag();
  const double direct2 = dx * dx + dy * dy;
  const double image2 = dx * dx + sy * sy;
  if (b == Boundary::dirichlet) return 0.5 * std::log(image2 / direct2);
  return -0.5 * std::log(direct2 * image2);
}

cplx semicircle_point(const Atom& a, double t) {
  return a.center + a.radius * cplx{std::cos(t), std::sin(t)};
}

/// Integral of G(z, w) against the unit-mass atom in z.
double atom_potential(Boundary b, const Atom& a, cplx w, double tol) {
  if (is_radial(a.shape)) {
    return -profile_potential(a.shape, a.radius, std::abs(w - a.center)) +
           sigma(b) * std::log(std::abs(a.center - std::conj(w)));
  }
  if (b == Boundary::free) {
    return -2.0 * std::log(std::max(std::abs(w - a.center), a.radius));
  }
  // Dirichlet semicircle: direct quadrature, split where w meets the arc.
  std::vector<double> cuts;
  const cplx rel = w - a.center;
  if (std::abs(rel) > 0.0) {
    const double tw = std::arg(rel);
    if (tw > 0.0 && tw < kPi) cuts.push_back(tw);
  }
  auto f = [&](double t) {
    const cplx z = semicircle_point(a, t);
    const double direct = std::abs(z - w);
    if (direct == 0.0) return 0.0;
    return -std::log(direct) + std::log(std::abs(z - std::conj(w)));
  };
  return integrate_split(f, 0.0, kPi, cuts, tol) / kPi;
}

double atom_atom(Boundary b, const Atom& x, const Atom& y, double tol) {
  const double d = std::abs(x.center - y.center);
  if (is_radial(x.shape) && is_radial(y.shape)) {
    return -direct_log_mean(x.shape, x.radius, y.shape, y.radius, d, tol) +
           sigma(b) * std::log(std::abs(x.center - std::conj(y.center)));
  }
  if (b == Boundary::free) {
    // A semicircle under the free kernel acts as twice a full circle with no
    // image term; the other factor may be radial or another semicircle.
    const AtomShape sx = is_radial(x.shape) ? x.shape : AtomShape::circle;
    const AtomShape sy = is_radial(y.shape) ? y.shape : AtomShape::circle;
    return -2.0 * direct_log_mean(sx, x.radius, sy, y.radius, d, tol);
  }
  const Atom& semi = is_radial(x.shape) ? y : x;
  const Atom& other = is_radial(x.shape) ? x : y;
  auto f = [&](double t) { return atom_potential(b, other, semicircle_point(semi, t), tol); };
  return integrate(f, 0.0, kPi, tol) / kPi;
}

double self_term(Boundary b, const CloudPoint& p) {
  const double mean_log = p.shape == CellShape::square ? kMeanLogSquare : kMeanLogSegment;
  return -(std::log(p.cell) + mean_log) + sigma(b) * std::log(2.0 * p.z.imag());
}

double cloud_cloud(Boundary b, const std::vector<CloudPoint>& u,
                   const std::vector<CloudPoint>& v, bool same) {
  double total = 0.0;
  if (same) {
    for (std::size_t k = 0; k < u.size(); ++k) {
      total += u[k].weight * u[k].weight * self_term(b, u[k]);
      double row = 0.0;
      for (std::size_t l = k + 1; l < u.size(); ++l) row += u[l].weight * kernel(b, u[k].z, u[l].z);
      total += 2.0 * u[k].weight * row;
    }
    return total;
  }
  for (const auto& p : u) {
    double row = 0.0;
    for (const auto& q : v) {
      row += q.weight * (p.z == q.z ? self_term(b, p) : kernel(b, p.z, q.z));
    }
    total += p.weight * row;
  }
  return total;
}

void validate_support(const LinearFunctional& f) {
  for (const Atom& a : f.atoms) {
    if (!(a.radius > 0.0) || !std::isfinite(a.radius)) {
      throw DomainError("functional '" + f.label + "' has a non-positive radius");
    }
    if (is_radial(a.shape)) {
      if (!(a.center.imag() - a.radius > 0.0)) {
        throw DomainError("functional '" + f.label + "' has support touching the boundary");
      }
    } else if (a.center.imag() != 0.0) {
      throw DomainError("semicircle atom must be centred on the real line");
    }
  }
  for (const CloudPoint& p : f.cloud) {
    if (!(p.z.imag() > 0.0) || !(p.cell > 0.0)) {
      throw DomainError("functional '" + f.label + "' has a cloud point outside H");
    }
  }
}

void check_admissible(Boundary b, const LinearFunctional& f, const GramOptions& o) {
  if (b == Boundary::free && !o.kernel_representative && !f.zero_mass()) {
    throw AdmissibilityError("functional '" + f.label +
                             "' has non-zero mass; free-field pairings need zero mass");
  }
}

}  // namespace

double green(Boundary kind, cplx z, cplx w) {
  if (!(z.imag() > 0.0) || !(w.imag() > 0.0)) {
    throw DomainError("Green function arguments must lie in the open upper half-plane");
  }
  if (z == w) throw SingularityError("Green function evaluated on the diagonal");
  const double direct = std::abs(z - w);
  const double image = std::abs(z - std::conj(w));
  return kind == Boundary::dirichlet ? -std::log(direct) + std::log(image)
                                     : -std::log(direct) - std::log(image);
}

// ---------------------------------------------------------------------------

double LinearFunctional::mass() const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.weight;
  for (const auto& p : cloud) m += p.weight;
  return m;
}

double LinearFunctional::total_variation() const {
  double m = 0.0;
  for (const auto& a : atoms) m += std::abs(a.weight);
  for (const auto& p : cloud) m += std::abs(p.weight);
  return m;
}

bool LinearFunctional::zero_mass(double rel_tol) const {
  return std::abs(mass()) <= rel_tol * std::max(1.0, total_variation());
}

LinearFunctional LinearFunctional::bump(cplx center, double radius, double weight) {
  LinearFunctional f;
  f.label = "bump";
  f.atoms.push_back({AtomShape::bump, center, radius, weight});
  return f;
}

LinearFunctional LinearFunctional::circle_average(cplx z, double eps) {
  LinearFunctional f;
  f.label = "circle";
  f.atoms.push_back({AtomShape::circle, z, eps, 1.0});
  return f;
}

LinearFunctional LinearFunctional::disc_average(cplx z, double radius) {
  LinearFunctional f;
  f.label = "disc";
  f.atoms.push_back({AtomShape::disc, z, radius, 1.0});
  return f;
}

LinearFunctional LinearFunctional::semicircle_average(double x, double eps) {
  LinearFunctional f;
  f.label = "semicircle";
  f.atoms.push_back({AtomShape::semicircle, cplx{x, 0.0}, eps, 1.0});
  return f;
}

LinearFunctional LinearFunctional::signed_pair(cplx c1, double r1, cplx c2, double r2) {
  LinearFunctional f;
  f.label = "pair";
  f.atoms.push_back({AtomShape::bump, c1, r1, 1.0});
  f.atoms.push_back({AtomShape::bump, c2, r2, -1.0});
  return f;
}

LinearFunctional LinearFunctional::zero() {
  LinearFunctional f;
  f.label = "zero";
  return f;
}

LinearFunctional discretize(const LinearFunctional& f, int cells_per_radius) {
  if (cells_per_radius < 1) throw DomainError("cells_per_radius must be positive");
  LinearFunctional out;
  out.label = f.label;
  out.cloud = f.cloud;
  for (const Atom& a : f.atoms) {
    if (a.shape == AtomShape::semicircle) {
      out.atoms.push_back(a);
      continue;
    }
    const double s = a.radius;
    if (a.shape == AtomShape::circle) {
      const int n = static_cast<int>(std::ceil(2.0 * kPi * cells_per_radius));
      const double arc = 2.0 * kPi * s / n;
      for (int k = 0; k < n; ++k) {
        const double t = 2.0 * kPi * (k + 0.5) / n;
        out.cloud.push_back({a.center + s * cplx{std::cos(t), std::sin(t)}, a.weight / n, arc,
                             CellShape::segment});
      }
      continue;
    }
    const double h = s / cells_per_radius;
    std::vector<CloudPoint> cells;
    double total = 0.0;
    for (int i = -cells_per_radius; i < cells_per_radius; ++i) {
      for (int j = -cells_per_radius; j < cells_per_radius; ++j) {
        const cplx off{(i + 0.5) * h, (j + 0.5) * h};
        double w = 0.0;
        if (a.shape == AtomShape::bump) {
          w = BumpTable::get().planar(std::abs(off) / s);
        } else {
          // Fraction of the cell inside the disc, on a 4x4 sub-grid.
          int inside = 0;
          for (int p = 0; p < 4; ++p)
            for (int q = 0; q < 4; ++q) {
              const cplx sub = off + h * cplx{(p + 0.5) / 4.0 - 0.5, (q + 0.5) / 4.0 - 0.5};
              inside += std::abs(sub) < s ? 1 : 0;
            }
          w = inside / 16.0;
        }
        if (w <= 0.0) continue;
        cells.push_back({a.center + off, w, h, CellShape::square});
        total += w;
      }
    }
    for (auto& c : cells) {
      c.weight *= a.weight / total;
      out.cloud.push_back(c);
    }
  }
  return out;
}

double pairing_covariance(Boundary boundary, const LinearFunctional& a,
                          const LinearFunctional& b, const GramOptions& options) {
  validate_support(a);
  validate_support(b);
  check_admissible(boundary, a, options);
  check_admissible(boundary, b, options);
  const double tol = options.quadrature_tolerance;
  const bool same = &a == &b;
  double total = 0.0;
  for (const Atom& x : a.atoms) {
    if (x.weight == 0.0) continue;
    for (const Atom& y : b.atoms) {
      if (y.weight == 0.0) continue;
      total += x.weight * y.weight * atom_atom(boundary, x, y, tol);
    }
    for (const CloudPoint& q : b.cloud) {
      total += x.weight * q.weight * atom_potential(boundary, x, q.z, tol);
    }
  }
  for (const Atom& y : b.atoms) {
    if (y.weight == 0.0) continue;
    for (const CloudPoint& p : a.cloud) {
      total += y.weight * p.weight * atom_potential(boundary, y, p.z, tol);
    }
  }
  if (!a.cloud.empty() && !b.cloud.empty()) {
    total += cloud_cloud(boundary, a.cloud, b.cloud, same);
  }
  return total;
}

Eigen::MatrixXd gram_matrix(Boundary boundary, std::span<const LinearFunctional> fs,
                            const GramOptions& options) {
  const auto m = static_cast<Eigen::Index>(fs.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      const double v = pairing_covariance(boundary, fs[static_cast<std::size_t>(i)],
                                          fs[static_cast<std::size_t>(j)], options);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

GaussianFactor::GaussianFactor(const Eigen::MatrixXd& covariance) {
  const Eigen::Index m = covariance.rows();
  if (covariance.cols() != m) throw FactorizationError("covariance is not square");
  factor_ = Eigen::MatrixXd::Zero(m, m);
  if (m == 0) return;
  const Eigen::MatrixXd sym = 0.5 * (covariance + covariance.transpose());
  if (!sym.allFinite()) throw FactorizationError("covariance has non-finite entries");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw FactorizationError("eigen-decomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double scale = lambda.cwiseAbs().maxCoeff();
  min_eigenvalue_ = lambda.minCoeff();
  if (min_eigenvalue_ < -1e-10 * scale) {
    throw FactorizationError("covariance is not positive semidefinite (min eigenvalue " +
                             std::to_string(min_eigenvalue_) + ")");
  }
  factor_ = eig.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd draw_gaussian(const GaussianFactor& factor, std::uint64_t seed,
                              std::uint64_t tag, std::uint64_t replica) {
  const auto m = static_cast<Eigen::Index>(factor.dimension());
  Eigen::VectorXd z(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    z(j) = gaussian(seed, Stream::field_pairings, replica, tag, static_cast<std::uint64_t>(j));
  }
  return factor.apply(z);
}

PairingSample sample_pairings(Boundary boundary, std::span<const LinearFunctional> fs,
                              std::size_t replicas, std::uint64_t seed,
                              const GramOptions& options) {
  PairingSample out;
  out.seed = seed;
  out.gram = gram_matrix(boundary, fs, options);
  const GaussianFactor factor(out.gram);
  const auto m = static_cast<Eigen::Index>(fs.size());
  out.samples.resize(static_cast<Eigen::Index>(replicas), m);
  for (std::size_t r = 0; r < replicas; ++r) {
    if (m > 0) out.samples.row(static_cast<Eigen::Index>(r)) = draw_gaussian(factor, seed, 0, r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decorations

Decoration Decoration::log(ParticleConfig x, std::vector<double> alphas) {
  if (alphas.size() != x.size()) throw DomainError("one alpha per anchor is required");
  Decoration d;
  d.kind = DecorationKind::log;
  d.anchors = std::move(x);
  d.weights = std::move(alphas);
  return d;
}

Decoration Decoration::log(ParticleConfig x, double alpha) {
  const std::size_t n = x.size();
  return log(std::move(x), std::vector<double>(n, alpha));
}

Decoration Decoration::arg(ParticleConfig x, double kappa) {
  if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
  const std::size_t n = x.size();
  return arg(std::move(x), std::vector<double>(n, 2.0 / std::sqrt(kappa)));
}

Decoration Decoration::arg(ParticleConfig x, std::vector<double> betas) {
  if (betas.size() != x.size()) throw DomainError("one beta per anchor is required");
  Decoration d;
  d.kind = DecorationKind::arg;
  d.anchors = std::move(x);
  d.weights = std::move(betas);
  return d;
}

Decoration Decoration::orthant(ParticleConfig x, std::vector<double> alphas, double Q) {
  if (alphas.size() != x.size()) throw DomainError("one alpha per anchor is required");
  Decoration d;
  d.kind = DecorationKind::orthant;
  d.anchors = std::move(x);
  d.weights = std::move(alphas);
  d.Q = Q;
  return d;
}

double decoration_eval(const Decoration& d, cplx z) {
  double v = 0.0;
  for (std::size_t i = 0; i < d.anchors.size(); ++i) {
    const double xi = d.anchors[i];
    if (z == cplx{xi, 0.0}) throw SingularityError("decoration evaluated at an anchor");
    switch (d.kind) {
      case DecorationKind::log:
        v += d.weights[i] * std::log(std::abs(z - xi));
        break;
      case DecorationKind::arg:
        v -= d.weights[i] * std::arg(z - xi);
        break;
      case DecorationKind::orthant:
        if (z == cplx{-xi, 0.0}) throw SingularityError("decoration evaluated at a mirror anchor");
        v += d.weights[i] * (std::log(std::abs(z - xi)) + std::log(std::abs(z + xi)));
        break;
    }
  }
  if (d.kind == DecorationKind::orthant && d.Q != 0.0) {
    if (z == cplx{}) throw SingularityError("orthant decoration evaluated at the origin");
    v += d.Q * std::log(std::abs(z));
  }
  return v;
}

FieldModel::FieldModel(Boundary b, double gamma_, double chi_, FieldDomain d)
    : boundary(b), domain(d), gamma(gamma_), chi(chi_) {
  validate();
}

void FieldModel::validate() const {
  if (!(gamma > 0.0 && gamma < 2.0)) throw DomainError("gamma must lie in (0, 2)");
  if (!std::isfinite(chi)) throw DomainError("chi must be finite");
}

double FieldModel::decoration(cplx z) const {
  double v = 0.0;
  for (const auto& d : decorations) v += decoration_eval(d, z);
  return v;
}

double decoration_eval(const FieldModel& model, DecorationKind kind, cplx z) {
  double v = 0.0;
  for (const auto& d : model.decorations) {
    if (d.kind == kind) v += decoration_eval(d, z);
  }
  return v;
}

double decoration_pairing(const Decoration& d, const LinearFunctional& f) {
  double total = 0.0;
  for (const Atom& a : f.atoms) {
    if (a.weight == 0.0) continue;
    if (is_radial(a.shape)) {
      // Decorations are harmonic on H, so the mean-value property is exact.
      total += a.weight * decoration_eval(d, a.center);
      continue;
    }
    const double x = a.center.real();
    const double eps = a.radius;
    if (d.kind == DecorationKind::arg) {
      auto f_arg = [&](double t) { return decoration_eval(d, semicircle_point(a, t)); };
      std::vector<double> cuts;
      for (double xi : d.anchors.values()) {
        const double c = (xi - x) / eps;
        if (c > -1.0 && c < 1.0) cuts.push_back(std::acos(c));
      }
      total += a.weight * integrate_split(f_arg, 0.0, kPi, cuts, 1e-12) / kPi;
      continue;
    }
    // log|z - c| averaged over the upper semicircle equals its full-circle
    // average for real c.
    double v = 0.0;
    for (std::size_t i = 0; i < d.anchors.size(); ++i) {
      const double xi = d.anchors[i];
      v += d.weights[i] * std::log(std::max(eps, std::abs(x - xi)));
      if (d.kind == DecorationKind::orthant) {
        v += d.weights[i] * std::log(std::max(eps, std::abs(x + xi)));
      }
    }
    if (d.kind == DecorationKind::orthant) v += d.Q * std::log(std::max(eps, std::abs(x)));
    total += a.weight * v;
  }
  for (const CloudPoint& p : f.cloud) total += p.weight * decoration_eval(d, p.z);
  return total;
}

double decoration_pairing(const FieldModel& model, const LinearFunctional& f) {
  double total = 0.0;
  for (const auto& d : model.decorations) total += decoration_pairing(d, f);
  return total;
}

// ---------------------------------------------------------------------------
// Quantum measures

std::vector<double> boundary_grid(double a, double b, double eps) {
  if (!(b > a) || !(eps > 0.0)) throw GridError("boundary grid needs a < b and eps > 0");
  const auto n = static_cast<std::size_t>(std::ceil((b - a) / eps - 1e-12));
  const double dx = (b - a) / static_cast<double>(n);
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = a + (static_cast<double>(k) + 0.5) * dx;
  return x;
}

std::vector<LinearFunctional> boundary_functionals(double a, double b, double eps) {
  std::vector<LinearFunctional> fs;
  for (double x : boundary_grid(a, b, eps)) fs.push_back(LinearFunctional::semicircle_average(x, eps));
  return fs;
}

double quantum_boundary_length(const FieldModel& model, double a, double b, double eps,
                               std::span<const double> field_draw) {
  model.validate();
  const auto grid = boundary_grid(a, b, eps);
  if (field_draw.size() != grid.size()) {
    throw GridError("field draw has " + std::to_string(field_draw.size()) +
                    " values but the grid of spacing <= eps has " + std::to_string(grid.size()));
  }
  const double dx = (b - a) / static_cast<double>(grid.size());
  const double g = model.gamma;
  const double prefactor = std::pow(eps, g * g / 4.0);
  double total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double h = field_draw[k];
    if (!model.decorations.empty()) {
      h += decoration_pairing(model, LinearFunctional::semicircle_average(grid[k], eps));
    }
    total += prefactor * std::exp(g * h / 2.0) * dx;
  }
  return total;
}

std::vector<cplx> area_grid(cplx lower_left, cplx upper_right, double eps) {
  if (!(eps > 0.0) || !(upper_right.real() > lower_left.real()) ||
      !(upper_right.imag() > lower_left.imag())) {
    throw GridError("area grid needs a non-empty rectangle and eps > 0");
  }
  const auto nx = static_cast<std::size_t>(
      std::round((upper_right.real() - lower_left.real()) / eps));
  const auto ny = static_cast<std::size_t>(
      std::round((upper_right.imag() - lower_left.imag()) / eps));
  std::vector<cplx> pts;
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i)
      pts.push_back(lower_left + eps * cplx{i + 0.5, j + 0.5});
  return pts;
}

double quantum_area(const FieldModel& model, cplx lower_left, cplx upper_right, double eps,
                    std::span<const double> field_draw) {
  model.validate();
  const auto grid = area_grid(lower_left, upper_right, eps);
  if (field_draw.size() != grid.size()) throw GridError("field draw does not match the area grid");
  const double g = model.gamma;
  const double prefactor = std::pow(eps, g * g / 2.0);
  double total = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double h = field_draw[k] + model.decoration(grid[k]);
    total += prefactor * std::exp(g * h) * eps * eps;
  }
  return total;
}

}  // namespace loewnerlab
