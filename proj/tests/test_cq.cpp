// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include <gtest/gtest.h>

#include "cavity_td/cq.hpp"

using namespace cavity_td;

namespace
{

std::vector<Eigen::VectorXd> scalar_series(const CqScheme &sc, const std::function<double(double)> &f)
{
  std::vector<Eigen::VectorXd> x(sc.nodes(), Eigen::VectorXd(1));
  for (int n = 0; n < sc.nodes(); n++)
  {
    x[n][0] = f(sc.time(n));
  }
  return x;
}

auto multiply_by(std::function<cplx(cplx)> K)
{
  return [K](int, cplx s, const Eigen::VectorXcd &X) -> Eigen::VectorXcd { return K(s) * X; };
}

Discretization small_disc(const std::string &cavities, double L, int N, double h = 0.1)
{
  const Scene scene = build_scene(json::parse(R"({"scene": {"cavities": [)" + cavities + "]}}"));
  return Discretization(scene, mesh_scene(scene, h), make_trace_grid(scene, L, N));
}

PlaneWave<> pulse(double amp = 1.0, double theta = 1.0)
{
  WaveProfile p;
  p.center = 1.5;
  p.width = 0.2;
  p.amplitude = amp;
  return PlaneWave<>(p, theta);
}

}  // namespace

TEST(CqNodes, FirstNodeFormula)
{
  const CqScheme sc{0.1, 40, 0.0};
  const double r = sc.radius();
  EXPECT_NEAR(r, std::pow(1e-14, 1.0 / 82.0), 1e-15);
  const auto s = cq_frequencies(sc);
  EXPECT_EQ(s.size(), 41u);
  EXPECT_NEAR(std::abs(s[0] - (1.0 - r) * (3.0 - r) / (2.0 * sc.dt)), 0.0, 1e-12);
  EXPECT_EQ(s[0].imag(), 0.0);
}

TEST(CqNodes, ConjugateSymmetryAndHalfPlane)
{
  for (int steps : {15, 16, 64})
  {
    const CqScheme sc{0.05, steps, 0.0};
    const auto s = cq_frequencies(sc);
    const int M = sc.nodes();
    for (int l = 1; l < M; l++)
    {
      EXPECT_NEAR(std::abs(s[M - l] - std::conj(s[l])), 0.0, 1e-10 * std::abs(s[l]));
      EXPECT_GT(s[l].real(), 0.0);
    }
  }
}

TEST(CqNodes, UnitRadiusLimit)
{
  // As lambda -> 1 the first node tends to zero and the others to delta(zeta_l) / dt.
  const CqScheme a{0.1, 31, 0.999}, b{0.1, 31, 0.999999};
  const auto sa = cq_frequencies(a), sb = cq_frequencies(b);
  EXPECT_LT(std::abs(sb[0]), std::abs(sa[0]));
  EXPECT_LT(std::abs(sb[0]), 1e-4);
  const cplx zeta = std::polar(1.0, -2.0 * std::numbers::pi * 5 / 32);
  EXPECT_NEAR(std::abs(sb[5] - CqScheme::delta(zeta) / 0.1), 0.0, 1e-4);
}

TEST(CqNodes, InvalidSchemes)
{
  EXPECT_THROW((CqScheme{0.0, 10, 0.0}).validate(), Error);
  EXPECT_THROW((CqScheme{0.1, 1, 0.0}).validate(), Error);
  EXPECT_THROW((CqScheme{0.1, 10, 1.5}).validate(), Error);
}

TEST(CqConvolve, DerivativeExactOnQuadratics)
{
  const CqScheme sc{0.05, 100, 0.0};
  for (auto f : {std::function<double(double)>([](double t) { return t; }),
                 std::function<double(double)>([](double t) { return 3.0 * t * t - t; })})
  {
    const auto x = scalar_series(sc, f);
    const auto y = cq_convolve(sc, x, 1, multiply_by([](cplx s) { return s; }));
    const auto d = time_derivative(x, sc.dt);
    for (int n = 2; n < sc.nodes(); n++)
    {
      const double t = sc.time(n);
      const double exact = (f(t + 1e-6) - f(t - 1e-6)) / 2e-6;
      EXPECT_NEAR(y[n][0], exact, 1e-6 * std::max(1.0, std::abs(exact)));
      EXPECT_NEAR(d[n][0], exact, 1e-6 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST(CqConvolve, SecondOrderConvergence)
{
  // K(s) = 1 / (s + 1) applied to a causal bump against the exact convolution.
  auto f = [](double t) { return t <= 0 ? 0.0 : t * t * std::exp(-t); };
  // int_0^t exp(-(t - r)) r^2 exp(-r) dr = t^3 exp(-t) / 3
  auto exact = [](double t) { return t * t * t * std::exp(-t) / 3.0; };
  std::vector<double> errs;
  for (double dt : {0.1, 0.05, 0.025})
  {
    const CqScheme sc{dt, static_cast<int>(std::lround(4.0 / dt)), 0.0};
    const auto y = cq_convolve(sc, scalar_series(sc, f), 1,
                               multiply_by([](cplx s) { return 1.0 / (s + 1.0); }));
    double err = 0.0;
    for (int n = 0; n < sc.nodes(); n++)
    {
      err = std::max(err, std::abs(y[n][0] - exact(sc.time(n))));
    }
    errs.push_back(err);
  }
  EXPECT_GT(std::log2(errs[0] / errs[1]), 1.7);
  EXPECT_GT(std::log2(errs[1] / errs[2]), 1.7);
}

TEST(CqConvolve, RealAndCausal)
{
  // Long enough horizon for the response to decay; the wrapped tail then stays below 1e-10.
  const CqScheme sc{0.05, 255, 0.0};
  auto f = [](double t) { return t < 2.0 ? 0.0 : std::sin(3.0 * t) * std::exp(-(t - 2.0)); };
  CqStats st;
  const auto y = cq_convolve(sc, scalar_series(sc, f), 1,
                             multiply_by([](cplx s) { return std::sqrt(s * s + 1.0); }), 1, &st);
  EXPECT_LE(st.max_imag, 1e-10 * st.max_abs);
  for (int n = 0; sc.time(n) < 2.0 - 1e-12; n++)
  {
    EXPECT_LE(std::abs(y[n][0]), 1e-10 * st.max_abs);
  }
}

TEST(CqConvolve, ThreadCountDoesNotChangeResult)
{
  const CqScheme sc{0.05, 63, 0.0};
  auto f = [](double t) { return std::exp(-4.0 * (t - 1.5) * (t - 1.5)); };
  const auto K = multiply_by([](cplx s) { return std::exp(-0.3 * s) / (s + 2.0); });
  const auto a = cq_convolve(sc, scalar_series(sc, f), 1, K, 1);
  const auto b = cq_convolve(sc, scalar_series(sc, f), 1, K, 4);
  for (int n = 0; n < sc.nodes(); n++)
  {
    EXPECT_EQ(a[n][0], b[n][0]);
  }
}

TEST(CqConvolve, LengthMismatch)
{
  const CqScheme sc{0.05, 16, 0.0};
  std::vector<Eigen::VectorXd> x(5, Eigen::VectorXd::Zero(1));
  EXPECT_THROW(cq_convolve(sc, x, 1, multiply_by([](cplx s) { return s; })), Error);
}

TEST(TimeDomain, ZeroDataGivesZero)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  const TimeSolution sol = run_time_domain(disc, pulse(0.0), CqScheme{0.05, 40, 0.0});
  for (const auto &u : sol.u)
  {
    EXPECT_EQ(u.norm(), 0.0);
  }
}

TEST(TimeDomain, LinearInAmplitude)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  const CqScheme sc{0.05, 60, 0.0};
  const TimeSolution a = run_time_domain(disc, pulse(1.0), sc);
  const TimeSolution b = run_time_domain(disc, pulse(3.0), sc);
  double peak = 0.0, diff = 0.0;
  for (int n = 0; n < sc.nodes(); n++)
  {
    peak = std::max(peak, b.u[n].norm());
    diff = std::max(diff, (b.u[n] - 3.0 * a.u[n]).norm());
  }
  EXPECT_GT(peak, 0.0);
  EXPECT_LE(diff, 1e-12 * peak);
}

TEST(TimeDomain, CausalAndReal)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 16.0, 512);
  const CqScheme sc{0.05, 160, 0.0};
  PlaneWave<> pw = pulse();
  pw.profile.center = 3.0;
  const TimeSolution sol = run_time_domain(disc, pw, sc);
  double peak = 0.0;
  for (const auto &u : sol.u)
  {
    peak = std::max(peak, u.norm());
  }
  EXPECT_LE(sol.u.front().norm(), 1e-6 * peak);
  EXPECT_LE(sol.imag_ratio(), 1e-10);
  // Nothing happens while the pulse is still negligible on the aperture.
  const double arrival = pw.profile.center - 6.0 * pw.profile.width - std::abs(pw.c1()) * 0.5;
  for (int n = 0; sc.time(n) < arrival; n++)
  {
    EXPECT_LE(sol.u[n].norm(), 1e-6 * peak);
  }
}

TEST(TimeDomain, CausalityViolationDetected)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  WaveProfile p;
  p.center = 0.0001;
  p.width = 0.2;
  const PlaneWave<> early(p, std::numbers::pi / 2);
  try
  {
    run_time_domain(disc, early, CqScheme{0.05, 40, 0.0});
    FAIL();
  }
  catch (const Error &e)
  {
    EXPECT_EQ(e.kind(), ErrorKind::CausalityViolation);
  }
}

TEST(TimeDomain, IlluminationMask)
{
  const Discretization disc =
    small_disc(R"({"aperture": [-1.5, -0.5], "depth": 0.3}, {"aperture": [0.5, 1.5], "depth": 0.3})", 16.0, 512);
  const CqScheme sc{0.05, 120, 0.0};
  const auto b = load_series(disc, pulse(), sc, {0});
  for (const auto &bn : b)
  {
    EXPECT_EQ(disc.block(bn, 1).norm(), 0.0);
  }
  CqOptions opt;
  opt.illuminated = {0};
  const TimeSolution sol = run_time_domain(disc, pulse(), sc, opt);
  double far = 0.0;
  for (const auto &u : sol.u)
  {
    far = std::max(far, disc.block(u, 1).norm());
  }
  EXPECT_GT(far, 0.0);
}

TEST(TimeDomain, SnapshotAndProbeOutput)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 16.0, 512);
  const CqScheme sc{0.05, 120, 0.0};
  const TimeSolution sol = run_time_domain(disc, pulse(), sc);
  std::ostringstream probes, vtk;
  write_probe_csv(probes, disc, sol, {Probe{0, 0.0, -0.15}});
  const std::string text = probes.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), sc.nodes() + 1);
  write_snapshot_vtk(vtk, disc, sol, 20, 0);
  EXPECT_NE(vtk.str().find("POINT_DATA"), std::string::npos);
}

TEST(PointValue, LinearFieldReproduced)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  const Mesh &mesh = disc.meshes[0];
  Eigen::VectorXd f(mesh.vertices.size());
  for (std::size_t v = 0; v < mesh.vertices.size(); v++)
  {
    f[v] = 2.0 * mesh.vertices[v].x - mesh.vertices[v].y + 0.5;
  }
  EXPECT_NEAR(point_value(mesh, f, 0.123, -0.177), 2.0 * 0.123 + 0.177 + 0.5, 1e-12);
  EXPECT_TRUE(std::isnan(point_value(mesh, f, 3.0, -0.1)));
}
