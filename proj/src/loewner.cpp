#include "loewnerlab/loewner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "loewnerlab/errors.hpp"

namespace loewnerlab {

MapEvaluator::MapEvaluator(DrivingPath p, Geometry g, Direction d)
    : driving(std::make_shared<const DrivingPath>(std::move(p))),
      geometry(g),
      direction(d) {}

const DrivingPath& MapEvaluator::path() const {
  if (!driving) throw DomainError("map evaluator has no driving path");
  return *driving;
}

cplx MapEvaluator::field(cplx z, std::span<const double> x) const {
  cplx v{0.0, 0.0};
  switch (geometry) {
    case Geometry::halfplane:
      for (double xi : x) v += 2.0 / (z - xi);
      break;
    case Geometry::quadrant:
      for (double xi : x) v += 2.0 / (z - xi) + 2.0 / (z + xi);
      if (delta != 0.0) v += 4.0 * delta / z;
      break;
    case Geometry::custom:
      v = psi(z, x);
      break;
  }
  return direction == Direction::forward ? v : -v;
}

cplx MapEvaluator::field_derivative(cplx z, std::span<const double> x) const {
  cplx v{0.0, 0.0};
  switch (geometry) {
    case Geometry::halfplane:
      for (double xi : x) v -= 2.0 / ((z - xi) * (z - xi));
      break;
    case Geometry::quadrant:
      for (double xi : x) v -= 2.0 / ((z - xi) * (z - xi)) + 2.0 / ((z + xi) * (z + xi));
      if (delta != 0.0) v -= 4.0 * delta / (z * z);
      break;
    case Geometry::custom:
      if (psi_derivative) {
        v = psi_derivative(z, x);
      } else {
        const double h = 1e-6 * std::max(1.0, std::abs(z));
        v = (psi(z + h, x) - psi(z - h, x)) / (2.0 * h);
      }
      break;
  }
  return direction == Direction::forward ? v : -v;
}

double MapEvaluator::singular_distance(cplx z, std::span<const double> x) const {
  double d = std::numeric_limits<double>::infinity();
  for (double xi : x) {
    d = std::min(d, std::abs(z - xi));
    if (geometry == Geometry::quadrant) d = std::min(d, std::abs(z + xi));
  }
  if (geometry == Geometry::quadrant && delta != 0.0) d = std::min(d, std::abs(z));
  return d;
}

bool MapEvaluator::in_domain(cplx z) const {
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  switch (geometry) {
    case Geometry::halfplane:
      return z.imag() > 0.0;
    case Geometry::quadrant:
      return z.imag() > 0.0 && z.real() > 0.0;
    case Geometry::custom:
      return true;
  }
  return true;
}

namespace {

struct State {
  std::vector<cplx> z;
  std::vector<cplx> logd;
  std::vector<double> acc;
};

class JointIntegrator {
 public:
  JointIntegrator(const MapEvaluator& ev, std::size_t m, std::size_t n_acc,
                  const AccumulatorRates& rates)
      : ev_(ev),
        path_(ev.path()),
        n_(path_.N()),
        rates_(rates),
        x_(n_),
        a_(n_),
        b_(n_) {
    for (State* s : {&k1_, &k2_, &k3_, &k4_, &tmp_}) {
      s->z.resize(m);
      s->logd.resize(m);
      s->acc.resize(n_acc);
    }
    singular_terms_ = static_cast<double>(
        std::max<std::size_t>(1, ev.geometry == Geometry::quadrant ? 2 * n_ : n_));
  }

  void set_interval(std::size_t k) {
    const auto a = path_.at(k);
    const auto b = path_.at(k + 1);
    std::copy(a.begin(), a.end(), a_.begin());
    std::copy(b.begin(), b.end(), b_.begin());
  }

  void driving_at(double tau) {
    const double w = tau / path_.dt();
    for (std::size_t i = 0; i < n_; ++i) x_[i] = a_[i] + w * (b_[i] - a_[i]);
  }

  void rhs(const State& s, double tau, State& out) {
    driving_at(tau);
    for (std::size_t p = 0; p < s.z.size(); ++p) {
      out.z[p] = ev_.field(s.z[p], x_);
      out.logd[p] = ev_.field_derivative(s.z[p], x_);
    }
    if (!s.acc.empty()) rates_(s.z, x_, out.acc);
  }

  /// Minimum singular distance over points at local time tau, and its index.
  std::pair<double, std::size_t> nearest(const State& s, double tau) {
    driving_at(tau);
    double d = std::numeric_limits<double>::infinity();
    std::size_t who = 0;
    for (std::size_t p = 0; p < s.z.size(); ++p) {
      const double dp = ev_.singular_distance(s.z[p], x_);
      if (dp < d) {
        d = dp;
        who = p;
      }
    }
    return {d, who};
  }

  double suggested_step(double d) const {
    return ev_.step_safety * d * d / singular_terms_;
  }

  /// One RK4 step from s at local time tau; result in out.
  void rk4(const State& s, double tau, double h, State& out) {
    rhs(s, tau, k1_);
    axpy(s, 0.5 * h, k1_, tmp_);
    rhs(tmp_, tau + 0.5 * h, k2_);
    axpy(s, 0.5 * h, k2_, tmp_);
    rhs(tmp_, tau + 0.5 * h, k3_);
    axpy(s, h, k3_, tmp_);
    rhs(tmp_, tau + h, k4_);
    const double c = h / 6.0;
    for (std::size_t p = 0; p < s.z.size(); ++p) {
      out.z[p] = s.z[p] + c * (k1_.z[p] + 2.0 * k2_.z[p] + 2.0 * k3_.z[p] + k4_.z[p]);
      out.logd[p] = s.logd[p] + c * (k1_.logd[p] + 2.0 * k2_.logd[p] +
                                     2.0 * k3_.logd[p] + k4_.logd[p]);
    }
    for (std::size_t q = 0; q < s.acc.size(); ++q) {
      out.acc[q] = s.acc[q] + c * (k1_.acc[q] + 2.0 * k2_.acc[q] + 2.0 * k3_.acc[q] +
                                   k4_.acc[q]);
    }
  }

 private:
  static void axpy(const State& s, double h, const State& k, State& out) {
    for (std::size_t p = 0; p < s.z.size(); ++p) {
      out.z[p] = s.z[p] + h * k.z[p];
      out.logd[p] = s.logd[p] + h * k.logd[p];
    }
    for (std::size_t q = 0; q < s.acc.size(); ++q) out.acc[q] = s.acc[q] + h * k.acc[q];
  }

  const MapEvaluator& ev_;
  const DrivingPath& path_;
  std::size_t n_;
  const AccumulatorRates& rates_;
  std::vector<double> x_, a_, b_;
  State k1_, k2_, k3_, k4_, tmp_;
  double singular_terms_ = 1.0;
};

}  // namespace

JointFlowResult integrate_joint(const MapEvaluator& ev, std::span<const cplx> points,
                                double t_target, std::size_t n_accumulators,
                                const AccumulatorRates& rates, bool record_history) {
  const DrivingPath& path = ev.path();
  if (n_accumulators > 0 && !rates) {
    throw DomainError("accumulators requested without a rate function");
  }
  const double horizon = path.horizon();
  if (!(t_target >= 0.0) || t_target > horizon * (1.0 + 1e-12)) {
    throw DomainError("target time " + std::to_string(t_target) +
                      " outside the driving horizon");
  }
  for (cplx z : points) {
    if (!ev.in_domain(z)) throw DomainError("tracked point outside the open domain");
  }

  const std::size_t m = points.size();
  State s;
  s.z.assign(points.begin(), points.end());
  s.logd.assign(m, cplx{0.0, 0.0});
  s.acc.assign(n_accumulators, 0.0);

  JointFlowResult result;
  if (record_history) result.accumulator_history.push_back(s.acc);

  JointIntegrator integ(ev, m, n_accumulators, rates);
  State next = s;
  const double dt = path.dt();
  double t_done = 0.0;
  bool swallowed = false;
  std::size_t swallowed_index = 0;

  for (std::size_t k = 0; k < path.steps() && !swallowed; ++k) {
    const double t_k = path.time(k);
    const double length = std::min(dt, t_target - t_k);
    if (!(length > 1e-12 * dt)) break;
    integ.set_interval(k);
    double tau = 0.0;
    while (tau < length) {
      const auto [d, who] = integ.nearest(s, tau);
      if (d < ev.swallow_tolerance) {
        swallowed = true;
        swallowed_index = who;
        t_done = t_k + tau;
        break;
      }
      double h = std::min(length - tau, integ.suggested_step(d));
      for (;;) {
        if (h < ev.min_step) {
          throw StiffnessFailure("Loewner substep collapsed below min_step at t=" +
                                 std::to_string(t_k + tau));
        }
        integ.rk4(s, tau, h, next);
        bool ok = true;
        for (cplx z : next.z) ok &= ev.in_domain(z);
        if (ok) break;
        h *= 0.5;
      }
      std::swap(s, next);
      tau = (h == length - tau) ? length : tau + h;
    }
    if (!swallowed) {
      t_done = t_k + length;
      if (record_history) result.accumulator_history.push_back(s.acc);
    }
  }

  result.points.resize(m);
  for (std::size_t p = 0; p < m; ++p) {
    result.points[p].value = s.z[p];
    result.points[p].log_derivative = s.logd[p];
    result.points[p].stop_time = swallowed ? t_done : t_target;
  }
  if (swallowed) {
    result.complete = false;
    result.points[swallowed_index].swallowed = true;
  }
  result.accumulators = s.acc;
  result.stop_time = swallowed ? t_done : t_target;
  return result;
}

TrackedPoint evolve_point(const MapEvaluator& ev, cplx z, double t_target) {
  const cplx pts[] = {z};
  return integrate_joint(ev, pts, t_target).points[0];
}

std::vector<TrackedPoint> evolve(const MapEvaluator& ev, std::span<const cplx> points,
                                 double t_target) {
  std::vector<TrackedPoint> out;
  out.reserve(points.size());
  for (cplx z : points) out.push_back(evolve_point(ev, z, t_target));
  return out;
}

TrackedPoint invert_tracked(const MapEvaluator& forward, cplx w, double T) {
  if (!forward.in_domain(w)) throw DomainError("inversion point outside the domain");
  if (T == 0.0) {
    TrackedPoint tp;
    tp.value = w;
    return tp;
  }
  MapEvaluator reverse = forward;
  reverse.driving = std::make_shared<const DrivingPath>(time_reverse(forward.path(), T));
  reverse.direction =
      forward.direction == Direction::forward ? Direction::reverse : Direction::forward;
  TrackedPoint tp;
  try {
    tp = evolve_point(reverse, w, T);
  } catch (const StiffnessFailure& e) {
    throw InversionFailure(std::string("reverse flow stalled: ") + e.what(), T);
  }
  if (tp.swallowed || !forward.in_domain(tp.value)) {
    throw InversionFailure("reverse trajectory left the domain", tp.stop_time);
  }
  return tp;
}

cplx invert(const MapEvaluator& forward, cplx w, double T) {
  return invert_tracked(forward, w, T).value;
}

void SlitSet::write_csv(std::ostream& os) const {
  os << "slit_index,t,re,im\n";
  char buf[96];
  for (std::size_t i = 0; i < slits.size(); ++i) {
    for (std::size_t k = 0; k < slits[i].size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", i, times[k],
                    slits[i][k].real(), slits[i][k].imag());
      os << buf;
    }
  }
}

SlitSet trace_slits(const MapEvaluator& forward, double tip_offset, std::size_t stride) {
  if (!(tip_offset > 0.0)) throw DomainError("tip_offset must be positive");
  if (stride == 0) throw DomainError("stride must be positive");
  const DrivingPath& path = forward.path();
  const std::size_t n = path.N();
  SlitSet out;
  out.slits.resize(n);
  const auto x0 = path.at(0);
  out.anchors.assign(x0.begin(), x0.end());
  for (std::size_t k = 0; k <= path.steps(); k += stride) {
    const double t = path.time(k);
    out.times.push_back(t);
    const auto xk = path.at(k);
    for (std::size_t i = 0; i < n; ++i) {
      try {
        out.slits[i].push_back(invert(forward, cplx{xk[i], tip_offset}, t));
      } catch (const InversionFailure& e) {
        throw InversionFailure(std::string(e.what()) + " while tracing slit " +
                                   std::to_string(i) + " at t=" + std::to_string(t),
                               t);
      }
    }
  }
  return out;
}

SlitSet trace_slits(const DrivingPath& driving, double tip_offset, std::size_t stride) {
  return trace_slits(MapEvaluator(driving), tip_offset, stride);
}

CapacityEstimate capacity_estimate(const MapEvaluator& forward, double T,
                                   double radius) {
  if (!(radius > 0.0)) throw DomainError("capacity radius must be positive");
  CapacityEstimate est;
  est.T = T;
  est.N = forward.path().N();
  if (T == 0.0) return est;
  const cplx z1{0.0, radius};
  const cplx z2{0.0, 2.0 * radius};
  const cplx pts[] = {z1, z2};
  const auto res = integrate_joint(forward, pts, T);
  if (!res.complete) throw NumericalBlowup("capacity probe point was swallowed");
  const cplx c1 = (res.points[0].value - z1) * z1;
  const cplx c2 = (res.points[1].value - z2) * z2;
  const cplx c = 2.0 * c2 - c1;
  est.capacity = c.real();
  est.fit_residual =
      std::abs(c - c2) / std::max(std::abs(c), std::numeric_limits<double>::min());
  est.poor_fit = est.fit_residual > 0.05 || std::abs(c.imag()) > 0.05 * std::abs(c.real());
  return est;
}

}  // namespace loewnerlab
