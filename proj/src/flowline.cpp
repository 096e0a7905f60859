#include "loewnerlab/flowline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>

#include "loewnerlab/errors.hpp"
#include "loewnerlab/random.hpp"

namespace loewnerlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kMollifierTag = 7;

class Direction {
 public:
  Direction(const SmoothField& h, double chi) : h_(h), chi_(chi) {}

  cplx operator()(cplx z, double arclength) const {
    double v = 0.0;
    try {
      v = h_(z);
    } catch (const std::exception& e) {
      throw FieldEvaluationError(std::string("field evaluation failed: ") + e.what(), arclength);
    }
    if (!std::isfinite(v)) throw FieldEvaluationError("field is not finite", arclength);
    return std::polar(1.0, v / chi_);
  }

 private:
  const SmoothField& h_;
  double chi_;
};

cplx rk4(const Direction& dir, cplx z, double h, double s) {
  const cplx k1 = dir(z, s);
  const cplx k2 = dir(z + 0.5 * h * k1, s);
  const cplx k3 = dir(z + 0.5 * h * k2, s);
  const cplx k4 = dir(z + h * k3, s);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double segment_distance(cplx p, cplx a, cplx b) {
  const cplx ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(p - a);
  const double t = std::clamp(((p - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

/// Uniform grid of segment buckets for nearest-segment queries.
class SegmentIndex {
 public:
  explicit SegmentIndex(const std::vector<cplx>& pts) : pts_(pts) {
    lo_ = hi_ = pts.front();
    double longest = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      lo_ = {std::min(lo_.real(), pts[k].real()), std::min(lo_.imag(), pts[k].imag())};
      hi_ = {std::max(hi_.real(), pts[k].real()), std::max(hi_.imag(), pts[k].imag())};
      if (k > 0) longest = std::max(longest, std::abs(pts[k] - pts[k - 1]));
    }
    const double extent = std::max(hi_.real() - lo_.real(), hi_.imag() - lo_.imag());
    cell_ = std::max({longest, extent / 64.0, 1e-300});
    nx_ = static_cast<long>((hi_.real() - lo_.real()) / cell_) + 1;
    ny_ = static_cast<long>((hi_.imag() - lo_.imag()) / cell_) + 1;
    buckets_.resize(static_cast<std::size_t>(nx_ * ny_));
    const std::size_t nseg = pts.size() > 1 ? pts.size() - 1 : 1;
    for (std::size_t k = 0; k < nseg; ++k) {
      const cplx a = pts[k];
      const cplx b = pts.size() > 1 ? pts[k + 1] : a;
      const long x0 = cx(std::min(a.real(), b.real())), x1 = cx(std::max(a.real(), b.real()));
      const long y0 = cy(std::min(a.imag(), b.imag())), y1 = cy(std::max(a.imag(), b.imag()));
      for (long i = x0; i <= x1; ++i) {
        for (long j = y0; j <= y1; ++j) buckets_[static_cast<std::size_t>(i * ny_ + j)].push_back(k);
      }
    }
  }

  double nearest(cplx p) const {
    const long px = raw_x(p.real()), py = raw_y(p.imag());
    double best = std::numeric_limits<double>::infinity();
    const long rmax = std::max({std::abs(px) + nx_, std::abs(py) + ny_}) + 1;
    for (long r = 0; r <= rmax; ++r) {
      for (long i = std::max(px - r, 0L); i <= std::min(px + r, nx_ - 1); ++i) {
        const bool edge = i == px - r || i == px + r;
        const long step = edge ? 1 : 2 * r;
        for (long j = py - r; j <= py + r; j += std::max(step, 1L)) {
          if (j >= 0 && j < ny_) scan(p, i, j, best);
        }
      }
      // Everything within r * cell of p has been visited.
      if (best <= static_cast<double>(r) * cell_) break;
    }
    return best;
  }

 private:
  void scan(cplx p, long i, long j, double& best) const {
    for (std::size_t k : buckets_[static_cast<std::size_t>(i * ny_ + j)]) {
      const cplx b = pts_.size() > 1 ? pts_[k + 1] : pts_[k];
      best = std::min(best, segment_distance(p, pts_[k], b));
    }
  }

  long raw_x(double x) const { return static_cast<long>(std::floor((x - lo_.real()) / cell_)); }
  long raw_y(double y) const { return static_cast<long>(std::floor((y - lo_.imag()) / cell_)); }
  long cx(double x) const { return std::clamp(raw_x(x), 0L, nx_ - 1); }
  long cy(double y) const { return std::clamp(raw_y(y), 0L, ny_ - 1); }

  const std::vector<cplx>& pts_;
  cplx lo_, hi_;
  double cell_ = 1.0;
  long nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Polyline truncated at arclength S along cumulative chord lengths s.
std::vector<cplx> truncate(const std::vector<cplx>& pts, const std::vector<double>& s, double S) {
  std::vector<cplx> out;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (s[k] <= S) {
      out.push_back(pts[k]);
      continue;
    }
    const double w = (S - s[k - 1]) / (s[k] - s[k - 1]);
    out.push_back(pts[k - 1] + w * (pts[k] - pts[k - 1]));
    break;
  }
  return out;
}

std::vector<double> chord_lengths(const std::vector<cplx>& pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t k = 1; k < pts.size(); ++k) s[k] = s[k - 1] + std::abs(pts[k] - pts[k - 1]);
  return s;
}

}  // namespace

double halfplane_distance(cplx z) { return z.imag(); }

std::string to_string(FlowTermination t) {
  return t == FlowTermination::boundary ? "boundary" : "max_steps";
}

cplx FlowLine::at(double arclength) const {
  if (points.empty()) throw DomainError("empty flow line");
  if (arclength <= 0.0) return points.front();
  if (arclength >= s.back()) return points.back();
  const auto it = std::upper_bound(s.begin(), s.end(), arclength);
  const std::size_t k = static_cast<std::size_t>(it - s.begin());
  const double h = s[k] - s[k - 1];
  const double w = (arclength - s[k - 1]) / h;
  const double w2 = w * w, w3 = w2 * w;
  return (2 * w3 - 3 * w2 + 1) * points[k - 1] + (w3 - 2 * w2 + w) * h * tangents[k - 1] +
         (-2 * w3 + 3 * w2) * points[k] + (w3 - w2) * h * tangents[k];
}

void FlowLine::write_csv(std::ostream& os) const {
  os << "s,re,im\n";
  char buf[80];
  for (std::size_t k = 0; k < points.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s[k], points[k].real(),
                  points[k].imag());
    os << buf;
  }
}

FlowLine trace_flow_line(const SmoothField& h, double chi, cplx start, double dt,
                         std::size_t max_steps, const BoundaryDistance& distance) {
  if (!h) throw DomainError("flow line needs a field");
  if (chi == 0.0 || !std::isfinite(chi)) throw DomainError("chi must be finite and non-zero");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  if (!(distance(start) >= 0.0)) throw DomainError("flow line starts outside the domain");

  FlowLine line;
  line.start = start;
  line.chi = chi;
  line.dt = dt;
  line.points.reserve(max_steps + 1);
  line.s.reserve(max_steps + 1);
  line.tangents.reserve(max_steps + 1);

  const Direction dir(h, chi);
  line.points.push_back(start);
  line.s.push_back(0.0);
  line.tangents.push_back(dir(start, 0.0));
  cplx z = start;
  double s = 0.0;
  for (std::size_t step = 0; step < max_steps; ++step) {
    // Find the step length whose RK4 chord is exactly dt.
    double len = dt;
    cplx next = z;
    double chord = 0.0;
    const double tol = 1e-14 * (dt + std::abs(z));
    for (int it = 0; it < 30; ++it) {
      next = rk4(dir, z, len, s);
      chord = std::abs(next - z);
      if (std::abs(chord - dt) <= tol || !(chord > 0.05 * dt)) break;
      len *= dt / chord;
    }
    if (!(std::abs(chord - dt) <= 1e-12) || len > 2.0 * dt) {
      throw FieldEvaluationError("field turns on the scale of the step", s);
    }
    const double d = distance(next);
    if (d > 0.0) {
      z = next;
      s += len;
      line.points.push_back(z);
      line.s.push_back(s);
      line.tangents.push_back(dir(z, s));
    }
    if (!(d >= dt)) {
      line.termination = FlowTermination::boundary;
      break;
    }
  }
  return line;
}

ConformalMap ConformalMap::identity() {
  return {[](cplx z) { return z; }, [](cplx) { return cplx{1.0, 0.0}; }};
}

ConformalMap ConformalMap::scaling(double factor) {
  if (!(factor > 0.0)) throw DomainError("scaling factor must be positive");
  return {[factor](cplx z) { return factor * z; }, [factor](cplx) { return cplx{factor, 0.0}; }};
}

ConformalMap ConformalMap::mobius(double a, double b, double c, double d) {
  const double det = a * d - b * c;
  if (!(det > 0.0)) throw DomainError("Mobius map must have positive determinant");
  return {[=](cplx z) { return (a * z + b) / (c * z + d); },
          [=](cplx z) { return det / ((c * z + d) * (c * z + d)); }};
}

double hausdorff_distance(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.empty() || b.empty()) throw DomainError("Hausdorff distance of an empty polyline");
  const SegmentIndex ia(a), ib(b);
  double d = 0.0;
  for (cplx p : a) d = std::max(d, ib.nearest(p));
  for (cplx p : b) d = std::max(d, ia.nearest(p));
  return d;
}

CovarianceReport covariance_check(const SmoothField& h, double chi, const ConformalMap& psi,
                                  cplx start, double dt, std::size_t max_steps,
                                  const BoundaryDistance& distance) {
  if (!psi.map || !psi.derivative) throw DomainError("conformal map needs map and derivative");
  CovarianceReport r;
  r.direct = trace_flow_line(h, chi, psi.map(start), dt, max_steps, distance);
  const SmoothField pulled = [&](cplx z) {
    return h(psi.map(z)) - chi * std::arg(psi.derivative(z));
  };
  r.transported = trace_flow_line(pulled, chi, start, dt, max_steps, distance);

  std::vector<cplx> image;
  image.reserve(r.transported.points.size());
  for (cplx z : r.transported.points) image.push_back(psi.map(z));
  // Both curves are cut by chord length so that equal polylines compare equal.
  const auto s_direct = chord_lengths(r.direct.points);
  const auto s_image = chord_lengths(image);
  const double S = std::min(s_direct.back(), s_image.back());
  if (!(S >= 10.0 * dt)) {
    throw TruncatedComparison("traces share less than 10 steps of arclength");
  }
  r.compared_length = S;
  r.distance = hausdorff_distance(truncate(r.direct.points, s_direct, S),
                                  truncate(image, s_image, S));
  return r;
}

BoundaryJump boundary_jump(double kappa, std::size_t N, std::size_t i, double theta) {
  if (!(kappa > 0.0 && kappa <= 4.0)) throw DomainError("kappa must lie in (0, 4]");
  if (i < 1 || i > N) throw DomainError("strand index must satisfy 1 <= i <= N");
  BoundaryJump b;
  b.kappa = kappa;
  b.N = N;
  b.i = i;
  b.theta = theta;
  const double rk = std::sqrt(kappa);
  b.chi = 2.0 / rk - rk / 2.0;
  const double step = 2.0 * kPi / rk;
  const double below = static_cast<double>(N - i);
  b.lambda_i = -step * below;
  b.right_limit = -step * below + b.chi * theta - b.chi * kPi;
  b.left_limit = -step * (below + 1.0) + b.chi * theta;
  // right - left = 2 pi / sqrt(kappa) - chi pi, simplified.
  b.jump = rk * kPi / 2.0;
  return b;
}

MollifiedField::MollifiedField(cplx lower_left, cplx upper_right, double sigma,
                               std::uint64_t seed)
    : lower_left_(lower_left), upper_right_(upper_right), sigma_(sigma) {
  if (!(sigma > 0.0)) throw DomainError("mollifier scale must be positive");
  if (!(lower_left.imag() >= 0.0) || !(upper_right.real() > lower_left.real()) ||
      !(upper_right.imag() > lower_left.imag())) {
    throw DomainError("mollifier window must be a rectangle in the closed half-plane");
  }
  nx_ = static_cast<std::size_t>((upper_right.real() - lower_left.real()) / sigma) + 1;
  ny_ = static_cast<std::size_t>((upper_right.imag() - lower_left.imag()) / sigma);
  if (ny_ == 0) throw DomainError("mollifier window is thinner than sigma");
  for (std::size_t a = 0; a < nx_; ++a) {
    for (std::size_t b = 0; b < ny_; ++b) {
      nodes_.emplace_back(lower_left.real() + sigma * static_cast<double>(a),
                          lower_left.imag() + sigma * static_cast<double>(b + 1));
    }
  }
  const auto m = static_cast<Eigen::Index>(nodes_.size());
  // Bumps of radius sigma/2 on a lattice of spacing sigma never overlap, so
  // off-diagonal pairings are Green function values at the centres.
  const cplx c0 = nodes_.front();
  const double self0 =
      pairing_covariance(Boundary::dirichlet, LinearFunctional::bump(c0, 0.5 * sigma),
                         LinearFunctional::bump(c0, 0.5 * sigma)) -
      std::log(2.0 * c0.imag());
  covariance_.resize(m, m);
  for (Eigen::Index p = 0; p < m; ++p) {
    covariance_(p, p) = self0 + std::log(2.0 * nodes_[p].imag());
    for (Eigen::Index q = p + 1; q < m; ++q) {
      covariance_(p, q) = covariance_(q, p) = green(Boundary::dirichlet, nodes_[p], nodes_[q]);
    }
  }
  Eigen::VectorXd z(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    z(j) = gaussian(seed, Stream::field_pairings, 0, kMollifierTag, static_cast<std::uint64_t>(j));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
  if (llt.info() == Eigen::Success) {
    values_ = llt.matrixL() * z;
  } else {
    values_ = GaussianFactor(covariance_).apply(z);
  }
}

double MollifiedField::operator()(cplx z) const {
  if (z.real() < lower_left_.real() || z.real() > upper_right_.real() ||
      z.imag() < lower_left_.imag() || z.imag() > upper_right_.imag()) {
    throw DomainError("point outside the mollified window");
  }
  // Gaussian-weighted average over nodes and their negated mirror images,
  // which pins the value on the real axis to zero.
  const double reach = 3.0 * sigma_;
  const double x = z.real() - lower_left_.real();
  const double y = z.imag() - lower_left_.imag();
  const auto lo = [&](double v) {
    return static_cast<long>(std::max(0.0, std::ceil((v - reach) / sigma_)));
  };
  const long a0 = lo(x), a1 = std::min<long>(static_cast<long>(nx_) - 1,
                                             static_cast<long>(std::floor((x + reach) / sigma_)));
  const long b0 = std::max(0L, lo(y) - 1);
  const long b1 = std::min<long>(static_cast<long>(ny_) - 1,
                                 static_cast<long>(std::floor((y + reach) / sigma_)));
  double num = 0.0, den = 0.0;
  const double inv = 1.0 / (2.0 * sigma_ * sigma_);
  for (long a = a0; a <= a1; ++a) {
    for (long b = b0; b <= b1; ++b) {
      const std::size_t k = static_cast<std::size_t>(a) * ny_ + static_cast<std::size_t>(b);
      const double w = std::exp(-std::norm(z - nodes_[k]) * inv);
      num += w * values_(static_cast<Eigen::Index>(k));
      den += w;
      if (lower_left_.imag() == 0.0) {
        const double wm = std::exp(-std::norm(z - std::conj(nodes_[k])) * inv);
        num -= wm * values_(static_cast<Eigen::Index>(k));
        den += wm;
      }
    }
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace loewnerlab
