#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "../support/generators.hpp"
#include "loewnerlab/cftaux.hpp"
#include "loewnerlab/driving.hpp"
#include "loewnerlab/errors.hpp"

using namespace loewnerlab;
using loewnerlab::testing::random_config;

namespace {

double log_z(const std::vector<double>& x, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) s += p * std::log(std::abs(x[i] - x[j]));
  return s;
}

// Richardson-extrapolated central differences of Z itself, normalized by Z.
double fd_first(const std::vector<double>& x, double p, std::size_t i, double h) {
  auto d = [&](double step) {
    auto a = x, b = x;
    a[i] += step;
    b[i] -= step;
    return (std::exp(log_z(a, p) - log_z(x, p)) - std::exp(log_z(b, p) - log_z(x, p))) /
           (2 * step);
  };
  return (4 * d(h / 2) - d(h)) / 3;
}

double fd_second(const std::vector<double>& x, double p, std::size_t i, double h) {
  auto d = [&](double step) {
    auto a = x, b = x;
    a[i] += step;
    b[i] -= step;
    return (std::exp(log_z(a, p) - log_z(x, p)) - 2.0 +
            std::exp(log_z(b, p) - log_z(x, p))) /
           (step * step);
  };
  return (4 * d(h / 2) - d(h)) / 3;
}

// D_i Z / Z evaluated from finite differences of Z.
double fd_operator(const std::vector<double>& x, double p, double kappa, Side side,
                   std::size_t i) {
  const ConformalWeights w = weights(kappa);
  const double h = 1e-3;
  double sum = 0.5 * kappa * fd_second(x, p, i, h);
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (j == i) continue;
    const double d = x[j] - x[i];
    if (side == Side::forward) {
      sum += 2.0 / d * fd_first(x, p, j, h) + 2.0 * w.h_kappa / (d * d);
    } else {
      sum += -2.0 / d * fd_first(x, p, j, h) + 2.0 * w.h_kappa_R / (d * d);
    }
  }
  return sum;
}

}  // namespace

TEST(Weights, ClosedForms) {
  EXPECT_EQ(weights(6.0).h_kappa, 0.0);
  EXPECT_DOUBLE_EQ(weights(4.0).h_kappa, -0.25);
  EXPECT_DOUBLE_EQ(weights(2.0).h_kappa_R, -2.0);
  EXPECT_DOUBLE_EQ(weights(2.0).c_kappa_R, 28.0);
  EXPECT_THROW(weights(0.0), DomainError);
  EXPECT_THROW(weights(-1.0), DomainError);
}

TEST(Annihilation, ForwardTwoPointExample) {
  const auto spec = AuxiliaryFunctionSpec::canonical(3.0, Side::forward);
  EXPECT_LT(annihilation_residual(spec, ParticleConfig({0.0, 1.0}), 1), 1e-10);
}

TEST(Annihilation, WrongExponentIsDetected) {
  const AuxiliaryFunctionSpec spec{1.0, 3.0, Side::forward};
  // Terms: (3/2)(p^2 - p) = 0, transport 2p = 2, potential 2 h_3 = -1.
  EXPECT_NEAR(annihilation_residual(spec, ParticleConfig({0.0, 1.0}), 1), 1.0 / 3.0,
              1e-15);
}

TEST(Annihilation, ReverseThreePointRandom) {
  CounterEngine rng(11, Stream::property_tests, 1);
  const auto spec = AuxiliaryFunctionSpec::canonical(2.0, Side::reverse);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_config(rng, 3, -3, 3, 0.05);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LT(annihilation_residual(spec, x, i), 1e-10);
  }
}

TEST(Annihilation, CanonicalVanishesForAllSizesAndKappas) {
  CounterEngine rng(12, Stream::property_tests, 2);
  for (double kappa : {2.0, 3.0, 4.0, 6.0, 8.0}) {
    for (Side side : {Side::forward, Side::reverse}) {
      const auto spec = AuxiliaryFunctionSpec::canonical(kappa, side);
      for (std::size_t n = 1; n <= 6; ++n) {
        for (int trial = 0; trial < 100; ++trial) {
          const auto x = random_config(rng, n, -5, 5, 1e-2);
          for (std::size_t i = 0; i < n; ++i) {
            ASSERT_LT(annihilation_residual(spec, x, i), 1e-10)
                << "kappa=" << kappa << " n=" << n << " i=" << i;
          }
        }
      }
    }
  }
}

TEST(Annihilation, ClosedFormMatchesFiniteDifferenceOperator) {
  CounterEngine rng(13, Stream::property_tests, 3);
  for (double p : {2.0 / 3.0, -0.5, 1.0, 0.3}) {
    for (Side side : {Side::forward, Side::reverse}) {
      const double kappa = 3.0;
      const AuxiliaryFunctionSpec spec{p, kappa, side};
      const auto x = random_config(rng, 4, -2, 2, 0.4);
      for (std::size_t i = 0; i < 4; ++i) {
        const double fd = fd_operator(x.values(), p, kappa, side, i);
        // Rebuild the unnormalized sum from closed-form pieces.
        const ConformalWeights w = weights(kappa);
        const double g = log_z_gradient(spec, x, i);
        double sum = 0.5 * kappa * (log_z_hessian_diag(spec, x, i) + g * g);
        for (std::size_t j = 0; j < 4; ++j) {
          if (j == i) continue;
          const double d = x[j] - x[i];
          const double hw = side == Side::forward ? w.h_kappa : w.h_kappa_R;
          const double sgn = side == Side::forward ? 1.0 : -1.0;
          sum += sgn * 2.0 / d * log_z_gradient(spec, x, j) + 2.0 * hw / (d * d);
        }
        EXPECT_NEAR(sum, fd, 1e-5 * (1.0 + std::abs(sum)));
      }
    }
  }
}

TEST(DriftFromZ, Examples) {
  const ParticleConfig x({0.0, 1.0});
  const auto fwd = drift_from_Z(AuxiliaryFunctionSpec::canonical(3.0, Side::forward), x);
  EXPECT_NEAR(fwd[0], -4.0, 1e-14);
  EXPECT_NEAR(fwd[1], 4.0, 1e-14);
  const auto rev = drift_from_Z(AuxiliaryFunctionSpec::canonical(3.0, Side::reverse), x);
  EXPECT_NEAR(rev[0], 4.0, 1e-14);
  EXPECT_NEAR(rev[1], -4.0, 1e-14);
  const auto one = drift_from_Z(AuxiliaryFunctionSpec::canonical(3.0, Side::forward),
                                ParticleConfig({0.7}));
  EXPECT_EQ(one[0], 0.0);
}

TEST(DriftFromZ, ForwardCanonicalEqualsCanonicalDrift) {
  CounterEngine rng(14, Stream::property_tests, 4);
  for (double kappa : {2.0, 3.0, 4.0, 6.0, 8.0}) {
    const auto model = DrivingModel::dyson(1, 8.0 / kappa, kappa);
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = random_config(rng, 1 + trial % 6, -4, 4, 1e-2);
      const auto a = drift_from_Z(AuxiliaryFunctionSpec::canonical(kappa, Side::forward), x);
      const auto b = drift_eval(DriftScheme::canonical, model, x.points());
      for (std::size_t i = 0; i < x.size(); ++i)
        ASSERT_NEAR(a[i], b[i], 1e-10 * (1.0 + std::abs(b[i])));
    }
  }
}
