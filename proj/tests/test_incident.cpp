// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "cavity_td/incident.hpp"

using namespace cavity_td;

namespace
{

// w(t) = 1 - exp(-t) for t >= 0, so w'(t) = exp(-t): its boundary data has a closed-form
// Laplace transform.
struct ExpRamp
{
  double value(double t) const { return t < 0.0 ? 0.0 : 1.0 - std::exp(-t); }
  double d1(double t) const { return t < 0.0 ? 0.0 : std::exp(-t); }
  double d2(double t) const { return t < 0.0 ? 0.0 : -std::exp(-t); }
  double d3(double t) const { return t < 0.0 ? 0.0 : std::exp(-t); }
  std::pair<double, double> support() const { return {0.0, 60.0}; }
};

static_assert(PulseProfile<ExpRamp>);
static_assert(PulseProfile<WaveProfile>);

WaveProfile gaussian(double center, double width, double amp = 1.0)
{
  WaveProfile p;
  p.center = center;
  p.width = width;
  p.amplitude = amp;
  return p;
}

double total_field(const PlaneWave<> &pw, double x, double y, double t)
{
  return evaluate_incident(pw, x, y, t) + evaluate_reflected(pw, x, y, t);
}

}  // namespace

TEST(Profile, GaussianValues)
{
  const WaveProfile p = gaussian(8.0, 1.0);
  EXPECT_NEAR(p.value(8.0), 1.0, 1e-15);
  EXPECT_NEAR(p.value(0.0), std::exp(-32.0), 1e-28);
  EXPECT_EQ(p.d1(8.0), 0.0);
}

TEST(Profile, DerivativesMatchFiniteDifferences)
{
  WaveProfile bump = gaussian(2.0, 0.7);
  bump.kind = WaveProfile::Kind::SmoothBump;
  for (const WaveProfile &p : {gaussian(3.0, 0.4), bump})
  {
    const double h = 1e-4;
    for (double t : {1.7, 2.05, 2.3, 2.9, 3.3})
    {
      EXPECT_NEAR(p.d1(t), (p.value(t + h) - p.value(t - h)) / (2 * h), 1e-6);
      EXPECT_NEAR(p.d2(t), (p.d1(t + h) - p.d1(t - h)) / (2 * h), 1e-5);
      EXPECT_NEAR(p.d3(t), (p.d2(t + h) - p.d2(t - h)) / (2 * h), 1e-4);
    }
  }
}

TEST(Profile, BumpVanishesOutsideSupport)
{
  WaveProfile p = gaussian(2.0, 0.5);
  p.kind = WaveProfile::Kind::SmoothBump;
  EXPECT_EQ(p.value(1.5), 0.0);
  EXPECT_EQ(p.value(2.5), 0.0);
  EXPECT_EQ(p.value(0.0), 0.0);
  EXPECT_NEAR(p.value(2.0), 1.0, 1e-15);
}

TEST(Profile, PulseTrainRepeats)
{
  WaveProfile p = gaussian(3.0, 0.4);
  p.repeat_period = 5.0;
  p.repeat_count = 3;
  EXPECT_NEAR(p.value(3.0), 1.0, 1e-15);
  EXPECT_NEAR(p.value(8.0), 1.0, 1e-15);
  EXPECT_NEAR(p.value(13.0), 1.0, 1e-15);
  EXPECT_LT(p.value(18.0), 1e-30);
  EXPECT_NEAR(p.support().second, 3.0 + 4.0 + 10.0, 1e-12);
  p.repeat_period = 0.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(PlaneWaveTest, NormalIncidence)
{
  const PlaneWave<> pw(gaussian(8.0, 1.0), std::numbers::pi / 2);
  EXPECT_NEAR(pw.c1(), 0.0, 1e-16);
  EXPECT_DOUBLE_EQ(pw.c2(), 1.0);
  EXPECT_NEAR(evaluate_incident(pw, 0.0, 0.0, 0.0), std::exp(-32.0), 1e-28);
  // The field depends on t + y only.
  EXPECT_NEAR(evaluate_incident(pw, 5.0, 1.0, 7.0), 1.0, 1e-15);
}

TEST(PlaneWaveTest, InvalidAngle)
{
  EXPECT_THROW(PlaneWave<>(gaussian(8, 1), 0.0), Error);
  EXPECT_THROW(PlaneWave<>(gaussian(8, 1), std::numbers::pi), Error);
}

TEST(PlaneWaveTest, TotalFieldVanishesOnGround)
{
  const double A = 3.5;
  const PlaneWave<> pw(gaussian(4.0, 0.6, A), 1.1);
  for (double x : {-3.0, -0.2, 0.0, 1.7})
  {
    for (double t = 0.0; t < 10.0; t += 0.37)
    {
      EXPECT_LE(std::abs(total_field(pw, x, 0.0, t)), 1e-14 * A);
    }
  }
}

TEST(PlaneWaveTest, SolvesWaveEquation)
{
  // Second-order central differences of u_tt - c^2 (u_xx + u_yy) shrink like h^2.
  const double eps0 = 2.0, mu0 = 0.5;
  const PlaneWave<> pw(gaussian(4.0, 0.8), 0.9, eps0, mu0);
  const double c2 = 1.0 / (eps0 * mu0);
  auto residual = [&](double h)
  {
    double worst = 0.0;
    for (double t : {3.0, 3.6, 4.2})
    {
      const double x = 0.4, y = 0.7;
      auto u = [&](double xx, double yy, double tt) { return total_field(pw, xx, yy, tt); };
      const double utt = (u(x, y, t + h) - 2 * u(x, y, t) + u(x, y, t - h)) / (h * h);
      const double uxx = (u(x + h, y, t) - 2 * u(x, y, t) + u(x - h, y, t)) / (h * h);
      const double uyy = (u(x, y + h, t) - 2 * u(x, y, t) + u(x, y - h, t)) / (h * h);
      worst = std::max(worst, std::abs(utt - c2 * (uxx + uyy)));
    }
    return worst;
  };
  const double r1 = residual(0.02), r2 = residual(0.01);
  EXPECT_LT(r1, 1e-2);
  EXPECT_NEAR(r1 / r2, 4.0, 0.4);
}

TEST(BoundaryData, MatchesNormalDerivativeOfTotalField)
{
  const PlaneWave<> pw(gaussian(4.0, 0.6), 1.2);
  const double h = 1e-4;
  for (double x : {-1.0, 0.0, 0.8})
  {
    for (double t : {3.0, 3.5, 4.0, 4.6})
    {
      const double fd = (total_field(pw, x, h, t) - total_field(pw, x, -h, t)) / (2 * h);
      EXPECT_NEAR(boundary_data_point(pw, x, t), fd, 1e-6);
    }
  }
}

TEST(BoundaryData, TimeDerivatives)
{
  const PlaneWave<> pw(gaussian(4.0, 0.6), 1.2);
  const double h = 1e-4, x = 0.3, t = 4.1;
  EXPECT_NEAR(boundary_data_point(pw, x, t, 1),
              (boundary_data_point(pw, x, t + h) - boundary_data_point(pw, x, t - h)) / (2 * h),
              1e-5);
  EXPECT_NEAR(boundary_data_point(pw, x, t, 2),
              (boundary_data_point(pw, x, t + h, 1) - boundary_data_point(pw, x, t - h, 1)) / (2 * h),
              1e-4);
}

TEST(BoundaryData, AmplitudeLinearity)
{
  const TraceGrid grid(8.0, 128, {});
  const PlaneWave<> a(gaussian(3.0, 0.5, 1.0), 0.8), b(gaussian(3.0, 0.5, 2.5), 0.8);
  const TraceVector ga = boundary_data_time(a, grid, 3.2), gb = boundary_data_time(b, grid, 3.2);
  EXPECT_LE((gb.values - 2.5 * ga.values).norm(), 1e-14 * gb.values.norm());
  const TraceVector fa = boundary_data_freq(a, grid, cplx(1.0, 2.0));
  const TraceVector fb = boundary_data_freq(b, grid, cplx(1.0, 2.0));
  EXPECT_LE((fb.values - 2.5 * fa.values).norm(), 1e-12 * fb.values.norm());
}

TEST(BoundaryData, LaplaceClosedForm)
{
  // For c1 x >= 0: g^(x, s) = 2 c2 exp(-c1 x) / (s + 1).
  const TraceGrid grid(4.0, 64, {});
  const PlaneWave<ExpRamp> pw(ExpRamp{}, 1.0);
  for (cplx s : {cplx(0.5), cplx(1.0, 3.0), cplx(4.0, -7.0)})
  {
    const TraceVector g = boundary_data_freq(pw, grid, s);
    for (int k = grid.N() / 2; k < grid.N(); k++)
    {
      const double x = grid.x(k);
      const cplx expect = 2.0 * pw.c2() * std::exp(-pw.c1() * x) / (s + 1.0);
      EXPECT_NEAR(std::abs(g.values[k] - expect), 0.0, 1e-10 * std::abs(expect));
    }
  }
}

TEST(BoundaryData, LaplaceOfGaussianAgainstQuadratureOracle)
{
  // Independent trapezoid sum on a fine grid.
  const PlaneWave<> pw(gaussian(3.0, 0.4), 1.0);
  const TraceGrid grid(4.0, 64, {});
  const cplx s(0.8, 2.0);
  const TraceVector g = boundary_data_freq(pw, grid, s);
  for (int k : {0, 20, 40, 63})
  {
    const double x = grid.x(k);
    cplx acc = 0.0;
    const int n = 200000;
    const double T = 12.0, dt = T / n;
    for (int i = 0; i <= n; i++)
    {
      const double t = i * dt;
      acc += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(-s * t) * boundary_data_point(pw, x, t);
    }
    acc *= dt;
    EXPECT_NEAR(std::abs(g.values[k] - acc), 0.0, 1e-8);
  }
}

TEST(BoundaryData, TmRejected)
{
  const PlaneWave<> pw(gaussian(3.0, 0.4), 1.0, 1.0, 1.0, Polarization::TM);
  const TraceGrid grid(4.0, 64, {});
  try
  {
    boundary_data_time(pw, grid, 0.0);
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::UnsupportedPolarization);
  }
  EXPECT_THROW(boundary_data_freq(pw, grid, 1.0), Error);
}

TEST(BoundaryData, FreqRejectsLeftHalfPlane)
{
  const PlaneWave<> pw(gaussian(3.0, 0.4), 1.0);
  const TraceGrid grid(4.0, 64, {});
  EXPECT_THROW(boundary_data_freq(pw, grid, cplx(0.0, 1.0)), Error);
}

TEST(Causality, DefectDetectsEarlyPulses)
{
  const PlaneWave<> late(gaussian(8.0, 1.0), 1.0), early(gaussian(1.0, 1.0), 1.0);
  EXPECT_LT(causality_defect(late, -1.0, 1.0), 1e-6);
  EXPECT_GT(causality_defect(early, -1.0, 1.0), 1e-3);
}
