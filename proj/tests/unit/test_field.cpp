#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "loewnerlab/errors.hpp"
#include "loewnerlab/field.hpp"
#include "loewnerlab/random.hpp"
#include "loewnerlab/stats.hpp"

using namespace loewnerlab;

namespace {
const double kPi = std::numbers::pi;
const cplx I{0.0, 1.0};
}  // namespace

TEST(Green, ClosedFormExamples) {
  EXPECT_NEAR(green(Boundary::dirichlet, I, 2.0 * I), std::log(3.0), 1e-15);
  EXPECT_NEAR(green(Boundary::dirichlet, I, 2.0 * I), 1.09861, 1e-5);
  EXPECT_NEAR(green(Boundary::free, I, 2.0 * I), -1.09861, 1e-5);
}

TEST(Green, SymmetryAndBoundaryVanishing) {
  CounterEngine rng(1, Stream::property_tests, 10);
  for (int k = 0; k < 200; ++k) {
    const cplx z{rng.uniform(-3, 3), rng.uniform(0.01, 3)};
    const cplx w{rng.uniform(-3, 3), rng.uniform(0.01, 3)};
    for (Boundary b : {Boundary::dirichlet, Boundary::free})
      EXPECT_EQ(green(b, z, w), green(b, w, z));
    EXPECT_LT(std::abs(green(Boundary::dirichlet, z, cplx{w.real(), 1e-8})), 1e-6);
  }
  EXPECT_THROW(green(Boundary::free, I, I), SingularityError);
  EXPECT_THROW(green(Boundary::free, I, cplx{1.0, 0.0}), DomainError);
}

TEST(Gram, DirichletCircleAverageVariance) {
  // Staggered 2D midpoint-grid oracle (n = 4000, 8000) with Richardson
  // extrapolation: 2.9957322735539926. The closed form is log 20.
  const LinearFunctional f[] = {LinearFunctional::circle_average(I, 0.1)};
  const double v = gram_matrix(Boundary::dirichlet, f)(0, 0);
  EXPECT_NEAR(v, 2.9957322735539926, 1e-4 * 2.9957322735539926);
  EXPECT_NEAR(v, std::log(20.0), 1e-13);
}

TEST(Gram, CrossingCircles) {
  // Mean log-distances of crossing circles from an independent angular
  // double integral (mpmath): M(0.15, 0.1, 0.1) and M(0.05, 0.1, 0.08).
  const cplx c{0.0, 1.0};
  const LinearFunctional a[] = {LinearFunctional::circle_average(c, 0.1),
                                LinearFunctional::circle_average(c + 0.15, 0.1),
                                LinearFunctional::circle_average(c + 0.05, 0.08)};
  const auto g = gram_matrix(Boundary::dirichlet, a);
  const double img01 = std::log(std::abs(c - std::conj(c + 0.15)));
  const double img02 = std::log(std::abs(c - std::conj(c + 0.05)));
  EXPECT_NEAR(g(0, 1), 1.8071415401129981 + img01, 1e-9);
  EXPECT_NEAR(g(0, 2), 2.2215778774446580 + img02, 1e-9);
}

TEST(Gram, BumpSelfPairing) {
  // E log|U - V| for U, V iid from the unit bump: -0.57987087724254690 (mpmath).
  const cplx c{0.3, 1.5};
  const double r = 0.2;
  const LinearFunctional f[] = {LinearFunctional::bump(c, r)};
  const double v = gram_matrix(Boundary::dirichlet, f)(0, 0);
  EXPECT_NEAR(v, -std::log(r) + 0.57987087724254690 + std::log(2 * c.imag()), 1e-9);
}

TEST(Gram, DiscSelfPairing) {
  // Mean log-distance in the unit disc is -1/4.
  const cplx c{-1.0, 2.0};
  const LinearFunctional f[] = {LinearFunctional::disc_average(c, 0.5)};
  EXPECT_NEAR(gram_matrix(Boundary::dirichlet, f)(0, 0),
              -std::log(0.5) + 0.25 + std::log(4.0), 1e-9);
}

TEST(Gram, FarBumpsPairLikePointMasses) {
  const cplx c1{-2.0, 1.0}, c2{3.0, 2.0};
  const LinearFunctional f[] = {LinearFunctional::bump(c1, 0.3, 2.0),
                                LinearFunctional::bump(c2, 0.5, 2.0)};
  const auto g = gram_matrix(Boundary::dirichlet, f);
  const double oracle = 4.0 * green(Boundary::dirichlet, c1, c2);
  EXPECT_NEAR(g(0, 1), oracle, 0.01 * std::abs(oracle));
}

TEST(Gram, ZeroFunctionalGivesZeroRowAndColumn) {
  const LinearFunctional f[] = {LinearFunctional::signed_pair(I, 0.2, 2.0 + I, 0.3),
                                LinearFunctional::zero(),
                                LinearFunctional::signed_pair(1.0 + 2.0 * I, 0.5, -1.0 + I, 0.2)};
  for (Boundary b : {Boundary::dirichlet, Boundary::free}) {
    const auto g = gram_matrix(b, f);
    for (int k = 0; k < 3; ++k) {
      EXPECT_EQ(g(1, k), 0.0);
      EXPECT_EQ(g(k, 1), 0.0);
    }
  }
}

TEST(Gram, SymmetricPsdAndPermutationCovariant) {
  std::vector<LinearFunctional> fs = {
      LinearFunctional::signed_pair(I, 0.3, 0.5 + 1.2 * I, 0.2),
      LinearFunctional::signed_pair(-0.4 + 0.8 * I, 0.2, 0.3 + 0.6 * I, 0.25),
      LinearFunctional::signed_pair(2.0 * I, 0.5, 1.0 + 2.0 * I, 0.5),
      LinearFunctional::signed_pair(0.1 + 0.5 * I, 0.1, 0.2 + 0.5 * I, 0.05)};
  for (Boundary b : {Boundary::dirichlet, Boundary::free}) {
    const auto g = gram_matrix(b, fs);
    EXPECT_LT((g - g.transpose()).norm(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff());
    std::vector<LinearFunctional> perm = {fs[2], fs[0], fs[3], fs[1]};
    const int idx[] = {2, 0, 3, 1};
    const auto gp = gram_matrix(b, perm);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) EXPECT_NEAR(gp(i, j), g(idx[i], idx[j]), 1e-12);
  }
}

TEST(Gram, FreeFieldAdmissibility) {
  const LinearFunctional f[] = {LinearFunctional::bump(I, 0.2)};
  EXPECT_THROW(gram_matrix(Boundary::free, f), AdmissibilityError);
  GramOptions opt;
  opt.kernel_representative = true;
  EXPECT_NO_THROW(gram_matrix(Boundary::free, f, opt));
  EXPECT_NO_THROW(gram_matrix(Boundary::dirichlet, f));
}

TEST(Gram, SupportMustStayInside) {
  const LinearFunctional f[] = {LinearFunctional::circle_average(cplx{0.0, 0.1}, 0.1)};
  EXPECT_THROW(gram_matrix(Boundary::dirichlet, f), DomainError);
}

TEST(Gram, SemicircleAverages) {
  GramOptions opt;
  opt.kernel_representative = true;
  const double eps = 0.1;
  const LinearFunctional s[] = {LinearFunctional::semicircle_average(0.0, eps),
                                LinearFunctional::semicircle_average(0.5, eps),
                                LinearFunctional::semicircle_average(0.15, eps)};
  const auto g = gram_matrix(Boundary::free, s, opt);
  EXPECT_NEAR(g(0, 0), -2.0 * std::log(eps), 1e-13);
  EXPECT_NEAR(g(0, 1), -2.0 * std::log(0.5), 1e-13);
  EXPECT_NEAR(g(0, 2), 2.0 * 1.8071415401129981, 1e-9);
  // Staggered-grid oracle with Richardson extrapolation.
  const auto gd = gram_matrix(Boundary::dirichlet, s);
  EXPECT_NEAR(gd(0, 0), 0.8525568415997312, 1e-6);
}

TEST(Gram, SemicircleAgainstBumpUsesFullCirclePotential) {
  GramOptions opt;
  opt.kernel_representative = true;
  const cplx c{0.2, 1.0};
  const LinearFunctional f[] = {LinearFunctional::semicircle_average(0.0, 0.05),
                                LinearFunctional::bump(c, 0.3)};
  const auto g = gram_matrix(Boundary::free, f, opt);
  EXPECT_NEAR(g(0, 1), -2.0 * std::log(std::abs(c)), 1e-12);
  // Dirichlet kernel: the semicircle average of G(., c) by brute force.
  const auto gd = gram_matrix(Boundary::dirichlet, f);
  double sum = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double t = kPi * (k + 0.5) / n;
    const cplx w = 0.05 * cplx{std::cos(t), std::sin(t)};
    sum += -std::log(std::abs(w - c)) + std::log(std::abs(std::conj(w) - c));
  }
  EXPECT_NEAR(gd(0, 1), sum / n, 1e-8);
}

TEST(Gram, DiscretizedCloudMatchesExactGram) {
  const std::vector<LinearFunctional> exact = {
      LinearFunctional::signed_pair(0.0 + 1.0 * I, 0.3, 0.8 + 1.2 * I, 0.3),
      LinearFunctional::signed_pair(-0.5 + 0.7 * I, 0.25, 0.4 + 1.0 * I, 0.2),
      LinearFunctional::circle_average(0.3 + 1.5 * I, 0.2)};
  std::vector<LinearFunctional> cloud;
  for (const auto& f : exact) cloud.push_back(discretize(f, 8));
  const auto ge = gram_matrix(Boundary::dirichlet, exact);
  const auto gc = gram_matrix(Boundary::dirichlet, cloud);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(gc(i, j), ge(i, j), 3e-3 * std::sqrt(ge(i, i) * ge(j, j))) << i << "," << j;
  // Mixed atom/cloud pairings agree too.
  const LinearFunctional mixed[] = {exact[0], cloud[1]};
  EXPECT_NEAR(gram_matrix(Boundary::dirichlet, mixed)(0, 1), ge(0, 1), 3e-3);
  EXPECT_NEAR(cloud[0].mass(), 0.0, 1e-14);
}

TEST(Sampling, VarianceDeterminismAndLaw) {
  const LinearFunctional f[] = {LinearFunctional::circle_average(I, 0.1)};
  const auto s = sample_pairings(Boundary::dirichlet, f, 10000, 42);
  const auto s2 = sample_pairings(Boundary::dirichlet, f, 10000, 42);
  EXPECT_EQ(s.samples, s2.samples);
  const double v = s.gram(0, 0);
  std::vector<double> col(s.samples.col(0).data(), s.samples.col(0).data() + 10000);
  EXPECT_NEAR(moments(col).variance, v, 0.05 * v);
  const auto ks = ks_one_sample(col, [&](double x) { return normal_cdf(x, 0.0, std::sqrt(v)); });
  EXPECT_GT(ks.p_value, 0.01);
}

TEST(Sampling, EmpiricalCovarianceApproachesGram) {
  const std::vector<LinearFunctional> fs = {
      LinearFunctional::signed_pair(I, 0.3, 0.8 + I, 0.3),
      LinearFunctional::signed_pair(0.4 + I, 0.3, 1.2 + I, 0.3)};
  const std::size_t R = 20000;
  const auto s = sample_pairings(Boundary::free, fs, R, 7);
  const Eigen::MatrixXd emp = s.samples.transpose() * s.samples / static_cast<double>(R);
  EXPECT_LT((emp - s.gram).norm() / s.gram.norm(), 5.0 / std::sqrt(static_cast<double>(R)));
}

TEST(Sampling, EmptyFamilyAndBadCovariance) {
  const auto s = sample_pairings(Boundary::dirichlet, std::span<const LinearFunctional>{}, 5, 1);
  EXPECT_EQ(s.samples.cols(), 0);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(GaussianFactor{bad}, FactorizationError);
}

TEST(Decoration, Examples) {
  EXPECT_NEAR(decoration_eval(Decoration::log(ParticleConfig({0.0}), 1.0), 2.0 * I), std::log(2.0),
              1e-15);
  EXPECT_NEAR(decoration_eval(Decoration::arg(ParticleConfig({0.0}), 4.0), I), -kPi / 2, 1e-15);
  EXPECT_THROW(decoration_eval(Decoration::log(ParticleConfig({0.0}), 1.0), cplx{}), SingularityError);
  const auto w = Decoration::orthant(ParticleConfig({1.0}, Chamber::positive_half_line), {2.0}, 3.0);
  const cplx z{1.0, 1.0};
  EXPECT_NEAR(decoration_eval(w, z),
              2.0 * (std::log(1.0) + std::log(std::abs(z + 1.0))) + 3.0 * std::log(std::abs(z)), 1e-14);
}

TEST(Decoration, ArgPlateausOnTheBoundary) {
  for (double kappa : {1.0, 2.0, 3.0, 4.0}) {
    const ParticleConfig x({-1.0, 0.0, 0.7, 2.0});
    const auto d = Decoration::arg(x, kappa);
    const std::size_t N = x.size();
    const double probes[] = {-3.0, -0.5, 0.3, 1.0, 5.0};
    for (std::size_t i = 0; i <= N; ++i) {
      const double plateau = -(2 * kPi / std::sqrt(kappa)) * static_cast<double>(N - i);
      EXPECT_NEAR(decoration_eval(d, cplx{probes[i], 0.0}), plateau, 1e-12);
    }
  }
}

TEST(Decoration, DiscreteLaplacianVanishes) {
  const FieldModel dummy;
  const double h = 1e-3;
  CounterEngine rng(3, Stream::property_tests, 11);
  const std::vector<Decoration> decs = {
      Decoration::log(ParticleConfig({-1.0, 0.5}), {1.5, -0.7}),
      Decoration::arg(ParticleConfig({-0.3, 0.9}), 2.0),
      Decoration::orthant(ParticleConfig({0.5, 1.5}, Chamber::positive_half_line), {1.0, 2.0}, 2.5)};
  for (const auto& d : decs) {
    for (int k = 0; k < 50; ++k) {
      // Unit distance from every anchor keeps the O(h^2) remainder small.
      const cplx z{rng.uniform(-2, 2), rng.uniform(1.0, 2.5)};
      const double lap = (decoration_eval(d, z + h) + decoration_eval(d, z - h) +
                          decoration_eval(d, z + h * I) + decoration_eval(d, z - h * I) -
                          4 * decoration_eval(d, z)) /
                         (h * h);
      EXPECT_LT(std::abs(lap), 1e-4);
    }
  }
}

TEST(Decoration, LogarithmicGrowthAtInfinity) {
  const auto d = Decoration::log(ParticleConfig({-1.0, 0.3, 2.0}), {0.5, 1.0, 2.0});
  for (double angle : {0.3, 1.2, 2.5}) {
    const cplx z = 1e6 * cplx{std::cos(angle), std::sin(angle)};
    EXPECT_LT(std::abs(decoration_eval(d, z) - 3.5 * std::log(1e6)), 1e-4);
  }
}

TEST(Decoration, PairingsUseMeanValues) {
  const auto d = Decoration::log(ParticleConfig({0.0, 1.0}), {1.0, 2.0});
  const cplx c{0.5, 0.8};
  EXPECT_NEAR(decoration_pairing(d, LinearFunctional::bump(c, 0.3, 2.0)),
              2.0 * decoration_eval(d, c), 1e-14);
  const auto cloud = discretize(LinearFunctional::bump(c, 0.3), 8);
  EXPECT_NEAR(decoration_pairing(d, cloud), decoration_eval(d, c), 1e-6);
  // Semicircle: log max(eps, |x - x_i|).
  EXPECT_NEAR(decoration_pairing(d, LinearFunctional::semicircle_average(0.02, 0.05)),
              std::log(0.05) + 2.0 * std::log(0.98), 1e-14);
  // Arg decoration on a semicircle by brute force.
  const auto a = Decoration::arg(ParticleConfig({0.0, 0.5}), 2.0);
  double sum = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double t = kPi * (k + 0.5) / n;
    sum += decoration_eval(a, cplx{0.01, 0.0} + 0.1 * cplx{std::cos(t), std::sin(t)});
  }
  EXPECT_NEAR(decoration_pairing(a, LinearFunctional::semicircle_average(0.01, 0.1)), sum / n, 1e-7);
}

TEST(FieldModel, DerivedQuantities) {
  const FieldModel m(Boundary::free, 1.0);
  EXPECT_NEAR(m.Q(), 2.5, 1e-15);
  const FieldModel m2(Boundary::free, std::sqrt(2.0));
  EXPECT_NEAR(m2.Q(), 2.0 / std::sqrt(2.0) + std::sqrt(2.0) / 2.0, 1e-15);
  EXPECT_THROW(FieldModel(Boundary::free, 2.0), DomainError);
  EXPECT_THROW(FieldModel(Boundary::free, 0.0), DomainError);
}

TEST(QuantumLength, ConstantFieldAndShift) {
  const FieldModel m(Boundary::free, 1.0);
  const auto grid = boundary_grid(0.0, 1.0, 0.01);
  ASSERT_EQ(grid.size(), 100u);
  std::vector<double> zero(grid.size(), 0.0), shifted(grid.size(), 0.7);
  EXPECT_NEAR(quantum_boundary_length(m, 0.0, 1.0, 0.01, zero), std::pow(0.01, 0.25), 1e-14);
  EXPECT_NEAR(quantum_boundary_length(m, 0.0, 1.0, 0.01, zero), 0.31623, 1e-5);
  EXPECT_NEAR(quantum_boundary_length(m, 0.0, 1.0, 0.01, shifted),
              std::exp(0.35) * quantum_boundary_length(m, 0.0, 1.0, 0.01, zero), 1e-14);
  EXPECT_THROW(quantum_boundary_length(m, 0.0, 1.0, 0.01, std::vector<double>(50, 0.0)), GridError);
}

TEST(QuantumLength, DecorationEntersThroughSemicircleAverages) {
  FieldModel m(Boundary::free, 1.0);
  m.decorations.push_back(Decoration::log(ParticleConfig({2.0}), 1.0));
  const auto grid = boundary_grid(0.0, 1.0, 0.1);
  std::vector<double> zero(grid.size(), 0.0);
  double expect = 0.0;
  for (double x : grid) expect += std::pow(0.1, 0.25) * std::exp(0.5 * std::log(2.0 - x)) * 0.1;
  EXPECT_NEAR(quantum_boundary_length(m, 0.0, 1.0, 0.1, zero), expect, 1e-13);
}

TEST(QuantumArea, ConstantField) {
  const FieldModel m(Boundary::dirichlet, 1.0);
  const auto grid = area_grid(cplx{0.0, 1.0}, cplx{1.0, 2.0}, 0.1);
  ASSERT_EQ(grid.size(), 100u);
  std::vector<double> zero(grid.size(), 0.0);
  EXPECT_NEAR(quantum_area(m, cplx{0.0, 1.0}, cplx{1.0, 2.0}, 0.1, zero), std::pow(0.1, 0.5), 1e-13);
}
