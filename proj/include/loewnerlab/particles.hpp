#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace loewnerlab {

enum class Chamber { full_line, positive_half_line };

/// Strictly increasing N-point configuration on the real line or on the
/// positive half-line. Construction validates the chamber; an instance is
/// always valid.
class ParticleConfig {
 public:
  ParticleConfig() = default;
  explicit ParticleConfig(std::vector<double> points,
                          Chamber chamber = Chamber::full_line);

  /// True when `points` would form a valid configuration. `gap_floor` is the
  /// minimum admissible spacing between neighbours.
  static bool admissible(std::span<const double> points, Chamber chamber,
                         double gap_floor = 0.0) noexcept;

  std::span<const double> points() const noexcept { return points_; }
  const std::vector<double>& values() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  Chamber chamber() const noexcept { return chamber_; }

  /// Smallest neighbour spacing; +inf for N <= 1.
  double min_gap() const noexcept;

  bool operator==(const ParticleConfig&) const = default;

 private:
  std::vector<double> points_;
  Chamber chamber_ = Chamber::full_line;
};

}  // namespace loewnerlab
