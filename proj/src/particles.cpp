#include "loewnerlab/particles.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "loewnerlab/errors.hpp"

namespace loewnerlab {

ParticleConfig::ParticleConfig(std::vector<double> points, Chamber chamber)
    : points_(std::move(points)), chamber_(chamber) {
  if (!admissible(points_, chamber_)) {
    std::ostringstream msg;
    msg << "configuration is not strictly increasing";
    if (chamber_ == Chamber::positive_half_line) msg << " on (0, inf)";
    msg << ":";
    for (double x : points_) msg << ' ' << x;
    throw DomainError(msg.str());
  }
}

bool ParticleConfig::admissible(std::span<const double> points, Chamber chamber,
                                double gap_floor) noexcept {
  for (double x : points) {
    if (!std::isfinite(x)) return false;
  }
  if (chamber == Chamber::positive_half_line && !points.empty() &&
      !(points.front() > gap_floor)) {
    return false;
  }
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i] - points[i - 1] > gap_floor)) return false;
  }
  return true;
}

double ParticleConfig::min_gap() const noexcept {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < points_.size(); ++i) {
    gap = std::min(gap, points_[i] - points_[i - 1]);
  }
  return gap;
}

}  // namespace loewnerlab
