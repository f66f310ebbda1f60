#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cflab/bernstein.hpp"
#include "cflab/kinetic.hpp"
#include "helpers.hpp"

using namespace cflab;
using namespace cflab::bernstein;

namespace {

const std::vector<double> kSamples = {0.0, 1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0};

// Field sampled from a closed form F(x, t), derivatives supplied analytically.
template <class Fn, class Dx, class Dxx>
BernsteinField synthetic(std::vector<double> x, std::vector<double> t, Fn f, Dx fx, Dxx fxx) {
  BernsteinField field;
  field.x_grid = std::move(x);
  field.times = std::move(t);
  for (double tt : field.times)
    for (double xx : field.x_grid) {
      field.F.push_back(f(xx, tt));
      field.Fx.push_back(fx(xx, tt));
      field.Fxx.push_back(fxx(xx, tt));
    }
  return field;
}

BernsteinField kinetic_field(double ds, std::size_t bins, double dt, std::size_t every,
                             const std::vector<double>& x) {
  const auto init = make_initial(Monodisperse{1.0, 1.0}, SizeGrid(ds, bins));
  kinetic::SolverConfig cfg;
  cfg.dt = dt;
  cfg.t_end = 0.3;
  cfg.output_every = every;
  cfg.spec = KernelSpec(0.1, 0);
  cfg.scenario = ScenarioParams::from_initial(init);
  return transform(kinetic::simulate(cfg, init), x);
}

}  // namespace

TEST(Transform, UnitPointMass) {
  const Distribution d(SizeGrid(1.0, 4), {1.0, 0.0, 0.0, 0.0});
  const std::vector<double> x = {0.0, 1.0, 3.0};
  const auto f = transform(d, x);
  EXPECT_EQ(f.F[0], 0.0);
  EXPECT_NEAR(f.F[1], 0.632121, 1e-6);
  EXPECT_DOUBLE_EQ(f.F[2], 1.0 - std::exp(-3.0));
  EXPECT_DOUBLE_EQ(f.Fx[1], std::exp(-1.0));
  EXPECT_DOUBLE_EQ(f.Fxx[1], -std::exp(-1.0));
  EXPECT_DOUBLE_EQ(f.Fx[0], 1.0);
  EXPECT_DOUBLE_EQ(f.Fxx[0], -1.0);
}

TEST(Transform, ExponentialDensityApproachesRationalForm) {
  // ∫ (1 - e^{-xs}) e^{-s} ds = x / (1 + x); the lattice sum is an O(ds) rule.
  const std::vector<double> x = {0.25, 1.0, 4.0};
  double previous = 1.0;
  for (double ds : {0.1, 0.05, 0.025}) {
    const auto d = make_initial(Exponential{1.0, 1.0}, SizeGrid(ds, static_cast<std::size_t>(60.0 / ds)));
    const auto f = transform(d, x);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(f.F[i] - x[i] / (1.0 + x[i])));
    EXPECT_LE(err, 2.0 * ds) << "ds = " << ds;
    EXPECT_LT(err, previous);
    previous = err;
    EXPECT_NEAR(f.F[1], 0.5, 2.0 * ds);
  }
}

TEST(Transform, RejectsBadGrids) {
  const Distribution d(SizeGrid(1.0, 2), {1.0, 1.0});
  const std::vector<double> bad = {0.0, 1.0, 1.0};
  EXPECT_THROW(transform(d, bad), std::invalid_argument);
  const std::vector<double> negative = {-1.0, 1.0};
  EXPECT_THROW(transform(d, negative), std::invalid_argument);
}

TEST(Transform, DefaultGridStartsAtZeroAndEndsAtUpperLimit) {
  const auto x = default_x_grid();
  ASSERT_EQ(x.size(), 64u);
  EXPECT_EQ(x.front(), 0.0);
  EXPECT_DOUBLE_EQ(x[1], 1e-3);
  EXPECT_DOUBLE_EQ(x.back(), 20.0);
  EXPECT_NEAR(x[2] / x[1], x[3] / x[2], 1e-12);
}

TEST(TransformProperty, IsAdditive) {
  std::mt19937_64 rng(3);
  const SizeGrid g(0.1, 80);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = cflab::testing::random_distribution(rng, g, 0.5);
    const auto b = cflab::testing::random_distribution(rng, g, 0.5);
    std::vector<double> sum(g.bins());
    for (std::size_t i = 0; i < g.bins(); ++i) sum[i] = a.count(i) + b.count(i);
    const auto fa = transform(a, kSamples), fb = transform(b, kSamples);
    const auto fs = transform(Distribution(g, sum), kSamples);
    for (std::size_t i = 0; i < kSamples.size(); ++i) {
      EXPECT_NEAR(fs.F[i], fa.F[i] + fb.F[i], 1e-12 * std::max(1.0, fs.F[i]));
      EXPECT_NEAR(fs.Fx[i], fa.Fx[i] + fb.Fx[i], 1e-12 * std::max(1.0, fs.Fx[i]));
      EXPECT_NEAR(fs.Fxx[i], fa.Fxx[i] + fb.Fxx[i], 1e-12 * std::max(1.0, -fs.Fxx[i]));
    }
  }
}

TEST(TransformProperty, TermwiseBounds) {
  std::mt19937_64 rng(4);
  const SizeGrid g(0.2, 60);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = cflab::testing::random_distribution(rng, g, 0.3);
    const double m1 = moment(d, 1), m2 = moment(d, 2);
    const auto f = transform(d, kSamples);
    for (std::size_t i = 0; i < kSamples.size(); ++i) {
      EXPECT_GE(f.F[i], 0.0);
      EXPECT_LE(f.F[i], m1 * kSamples[i] * (1.0 + 1e-14));
      EXPECT_GE(f.Fx[i], 0.0);
      EXPECT_LE(f.Fx[i], m1 * (1.0 + 1e-14));
      EXPECT_LE(f.Fxx[i], 0.0);
      EXPECT_LE(-f.Fxx[i], m2 * (1.0 + 1e-14));
    }
  }
}

TEST(Derivative, SpecificValues) {
  const Distribution two(SizeGrid(1.0, 4), {0.0, 1.0, 0.0, 0.0});
  EXPECT_DOUBLE_EQ(derivative(two, 0.0, 3), 8.0);
  EXPECT_DOUBLE_EQ(derivative(two, 0.0, 2), -4.0);
  const auto d = make_initial(Exponential{1.0, 1.0}, SizeGrid(0.1, 400));
  EXPECT_NEAR(derivative(d, 0.0, 1), moment(d, 1), 1e-12);
  EXPECT_NEAR(derivative(d, 0.0, 2), -moment(d, 2), 1e-12);
  EXPECT_THROW(derivative(d, 0.0, 0), std::invalid_argument);
}

TEST(Derivative, AgreesWithTransformColumns) {
  std::mt19937_64 rng(5);
  const auto d = cflab::testing::random_distribution(rng, SizeGrid(0.1, 50), 0.8);
  const auto f = transform(d, kSamples);
  for (std::size_t i = 0; i < kSamples.size(); ++i) {
    EXPECT_NEAR(derivative(d, kSamples[i], 1), f.Fx[i], 1e-12 * f.Fx[0]);
    EXPECT_NEAR(derivative(d, kSamples[i], 2), f.Fxx[i], 1e-12 * -f.Fxx[0]);
  }
}

TEST(DerivativeProperty, ExactSumSignsHoldForEveryOrder) {
  std::mt19937_64 rng(6);
  const SizeGrid g(0.25, 40);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = cflab::testing::random_distribution(rng, g, 0.4);
    for (int k = 1; k <= 12; ++k)
      for (double x : kSamples) {
        const double v = derivative(d, x, k);
        EXPECT_GE((k % 2 == 1) ? v : -v, 0.0) << "k = " << k << " x = " << x;
      }
    const auto rep = complete_monotonicity_report(d, 12, kSamples);
    EXPECT_TRUE(rep.pass());
    EXPECT_EQ(rep.violations, 0u);
    EXPECT_EQ(rep.checked, 12u * kSamples.size());
  }
}

TEST(CompleteMonotonicity, SampledKineticFieldPasses) {
  const auto d = make_initial(Exponential{1.0, 1.0}, SizeGrid(0.05, 800));
  const auto f = transform(d, default_x_grid(64, 1e-2, 10.0));
  for (int k = 1; k <= 4; ++k) EXPECT_TRUE(complete_monotonicity_report(f, k).pass()) << k;
}

TEST(CompleteMonotonicity, SquareFieldFailsAtOrderTwo) {
  std::vector<double> x;
  for (int i = 0; i <= 20; ++i) x.push_back(i / 20.0);
  auto f = synthetic(x, {0.0}, [](double s, double) { return s * s; },
                     [](double s, double) { return 2 * s; }, [](double, double) { return 2.0; });
  f.mass = 1.0;
  EXPECT_TRUE(complete_monotonicity_report(f, 1).pass());
  const auto rep = complete_monotonicity_report(f, 2);
  EXPECT_FALSE(rep.pass());
  EXPECT_EQ(rep.worst_k, 2);
  EXPECT_NEAR(rep.worst_value, -2.0, 1e-9);
  EXPECT_THROW(complete_monotonicity_report(f, 5), std::invalid_argument);
}

TEST(HjResidual, LinearFieldHasZeroResidual) {
  const double m = 1.7;
  auto f = synthetic({0.0, 0.5, 1.0, 2.0}, {0.0, 0.1, 0.2, 0.3},
                     [&](double x, double) { return m * x; }, [&](double, double) { return m; },
                     [](double, double) { return 0.0; });
  EXPECT_NEAR(hj_residual(f, ScenarioParams(m, 1.0), 0.0), 0.0, 1e-14);
}

TEST(HjResidual, ZeroField) {
  auto zero = [](double, double) { return 0.0; };
  auto f = synthetic({0.0, 0.5, 1.0}, {0.0, 0.1, 0.2}, zero, zero, zero);
  EXPECT_NEAR(hj_residual(f, ScenarioParams(1.0, 1.0), 0.0), 0.0, 1e-15);
  EXPECT_NEAR(hj_residual(f, ScenarioParams(2.0, 1.0), 0.0), 1.0, 1e-15);
}

TEST(HjResidual, NeedsThreeTimes) {
  auto zero = [](double, double) { return 0.0; };
  auto f = synthetic({0.0, 0.5, 1.0}, {0.0, 0.1}, zero, zero, zero);
  EXPECT_THROW(hj_residual(f, ScenarioParams(1.0, 1.0), 0.0), std::invalid_argument);
  auto g = synthetic({0.0, 0.5, 1.0}, {0.0, 0.1, 0.2}, zero, zero, zero);
  EXPECT_THROW(hj_residual(g, ScenarioParams(1.0, 1.0), 0.1), std::invalid_argument);
}

TEST(HjResidual, TimeDerivativeIsExactForQuadraticsInTime) {
  auto f = synthetic({0.0, 1.0, 2.0}, {0.0, 0.1, 0.25, 0.3},
                     [](double x, double t) { return x * t * t; }, [](double, double t) { return t * t; },
                     [](double, double) { return 0.0; });
  const auto ft = time_derivative(f);
  for (std::size_t ti = 0; ti < f.nt(); ++ti)
    EXPECT_NEAR(ft[f.index(ti, 2)], 2.0 * 2.0 * f.times[ti], 1e-12);
}

TEST(HjResidual, KineticFieldIsSmallAndShrinksUnderRefinement) {
  // Within x <= 1/ds the residual is the lattice quadrature error, about ds^2 x / 12.
  const auto x = default_x_grid(48, 1e-2, 5.0);
  const auto coarse = kinetic_field(0.1, 320, 5e-4, 20, x);
  const auto fine = kinetic_field(0.05, 640, 2.5e-4, 40, x);
  const ScenarioParams sc(1.0, 1.0);
  const double rc = hj_residual(coarse, sc, 0.1), rf = hj_residual(fine, sc, 0.1);
  EXPECT_LE(rc, 1e-2);
  EXPECT_LE(rf, 1e-2);
  EXPECT_LT(rf, 0.5 * rc) << "coarse " << rc << " fine " << rf;
}

TEST(GEpsBound, PointMassAtTimeZero) {
  const Distribution d(SizeGrid(1.0, 4), {1.0, 0.0, 0.0, 0.0});
  const auto f = transform(d, default_x_grid());
  const ScenarioParams sc = ScenarioParams::from_initial(d);
  const auto rep = g_eps_bound_check(f, sc, 0.0);
  EXPECT_TRUE(rep.passed());
  EXPECT_EQ(f.G_eps[0], 0.0);
  for (std::size_t i = 1; i < f.nx(); ++i) {
    const double x = f.x_grid[i];
    const double direct = 0.5 + 0.5 * std::exp(-x) + std::expm1(-x) / x;
    EXPECT_NEAR(f.G_eps[i], direct, 1e-9);
  }
}

TEST(GEpsBound, NearBlowupTheBoundIsLoose) {
  const Distribution d(SizeGrid(1.0, 4), {1.0, 0.0, 0.0, 0.0});
  const auto f = transform(d, default_x_grid());
  const auto rep = g_eps_bound_check(f, ScenarioParams(1.0, 1.0), 1.0 - 1e-9);
  EXPECT_TRUE(rep.passed());
  EXPECT_GT(rep.worst_margin, 1e8);
}

TEST(GEpsBound, SyntheticViolationFailsAndBadHorizonThrows) {
  auto f = synthetic({0.0, 1.0}, {0.0}, [](double x, double) { return x; },
                     [](double, double) { return 1.0; }, [](double, double) { return 0.0; });
  f.G_eps = {0.0, 10.0};
  const ScenarioParams sc(1.0, 1.0);
  EXPECT_FALSE(g_eps_bound_check(f, sc, 0.0).passed());
  EXPECT_THROW(g_eps_bound_check(f, sc, 1.0), std::invalid_argument);
  f.G_eps.clear();
  EXPECT_THROW(g_eps_bound_check(f, sc, 0.0), std::invalid_argument);
}

TEST(FieldFromSamples, RecoversDerivativesOfSmoothData) {
  const auto x = default_x_grid(200, 1e-2, 5.0);
  std::vector<double> F;
  for (double xx : x) F.push_back(-std::expm1(-xx));
  const std::vector<double> t = {0.0};
  const auto f = field_from_samples(x, t, F, 1.0);
  for (std::size_t i = 2; i + 2 < x.size(); ++i) {
    EXPECT_NEAR(f.Fx[i], std::exp(-x[i]), 2e-3);
    EXPECT_NEAR(f.Fxx[i], -std::exp(-x[i]), 5e-2);
  }
}
