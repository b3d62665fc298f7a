// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "cavity_td/diagnostics.hpp"

using namespace cavity_td;

namespace
{

Discretization small_disc(const std::string &cavities, double L, int N, double h = 0.1)
{
  const Scene scene = build_scene(json::parse(R"({"scene": {"cavities": [)" + cavities + "]}}"));
  return Discretization(scene, mesh_scene(scene, h), make_trace_grid(scene, L, N));
}

PlaneWave<> pulse(double amp = 1.0)
{
  WaveProfile p;
  p.center = 1.5;
  p.width = 0.2;
  p.amplitude = amp;
  return PlaneWave<>(p, 1.0);
}

TimeSolution synthetic(const CqScheme &sc, const std::function<Eigen::VectorXd(double)> &u)
{
  TimeSolution sol;
  sol.scheme = sc;
  for (int n = 0; n < sc.nodes(); n++)
  {
    sol.t.push_back(sc.time(n));
    sol.u.push_back(u(sc.time(n)));
  }
  return sol;
}

}  // namespace

TEST(Energy, ZeroSolutionHasZeroEnergy)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  const CqScheme sc{0.05, 40, 0.0};
  const TimeSolution sol = run_time_domain(disc, pulse(0.0), sc);
  const EnergyTrace et = energy(sol, disc);
  for (double e : et.e)
  {
    EXPECT_EQ(e, 0.0);
  }
}

TEST(Energy, KineticConstantForLinearGrowth)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3, "epsilon": 2})", 8.0, 256);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd w(disc.dofs());
  for (int i = 0; i < w.size(); i++)
  {
    w[i] = U(rng);
  }
  const CqScheme sc{0.1, 20, 0.0};
  const TimeSolution sol = synthetic(sc, [&](double t) { return Eigen::VectorXd(t * w); });
  const EnergyTrace et = energy(sol, disc);
  const SpMat M = disc.stacked(&FemMatrices::M);
  const SpMat K = disc.stacked(&FemMatrices::K);
  const double kin = w.dot(M * w);
  for (int n = 1; n < sc.nodes(); n++)
  {
    EXPECT_NEAR(et.kinetic[n], kin, 1e-12 * kin);
    const double t = sc.time(n);
    EXPECT_NEAR(et.potential[n], t * t * w.dot(K * w), 1e-12 * et.potential[n]);
  }
}

TEST(Energy, TwoPathsAgree)
{
  const Discretization disc =
    small_disc(R"js({"aperture": [-1.5, -0.5], "depth": 0.3, "epsilon": "2 + sin(pi*x)", "mu": 1},
                  {"aperture": [0.5, 1.5], "depth": 0.4, "epsilon": 1.5})js", 8.0, 256);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  Eigen::VectorXd a(disc.dofs()), b(disc.dofs());
  for (int i = 0; i < a.size(); i++)
  {
    a[i] = U(rng);
    b[i] = U(rng);
  }
  const CqScheme sc{0.1, 30, 0.0};
  const TimeSolution sol =
    synthetic(sc, [&](double t) { return Eigen::VectorXd(std::sin(t) * a + t * t * b); });
  const EnergyTrace et = energy(sol, disc);
  const auto direct = energy_direct(sol, disc);
  for (int n = 0; n < sc.nodes(); n++)
  {
    EXPECT_NEAR(et.e[n], direct[n], 1e-10 * std::max(1.0, et.e[n]));
  }
}

TEST(Energy, DissipationCheckFlagsGrowth)
{
  EnergyTrace et;
  et.t = {0, 1, 2, 3, 4};
  et.e = {0, 5, 4, 3, 2};
  EXPECT_TRUE(dissipation_check(et, 0.5).pass);
  et.e = {0, 5, 4, 4.5, 2};
  const DissipationReport r = dissipation_check(et, 0.5);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.step, 2);
  EXPECT_NEAR(r.worst, 0.125, 1e-15);
  // Nothing to check after the last sample.
  EXPECT_FALSE(dissipation_check(et, 10.0).pass);
}

TEST(Energy, DecaysAfterPulseOnShallowCavity)
{
  const Scene scene =
    build_scene(json::parse(R"({"scene": {"cavities": [{"aperture": [-0.5, 0.5], "depth": 0.25}]}})"));
  WaveProfile p;
  p.center = 3.0;
  p.width = 0.4;
  const PlaneWave<> pw(p, std::numbers::pi / 3);
  const CqScheme sc{0.05, 400, 0.0};
  const double span = 1.0;
  const Discretization disc(scene, mesh_scene(scene, 0.05),
                            make_trace_grid(scene, 0.05, sc.horizon() + 2 * span));
  const TimeSolution sol = run_time_domain(disc, pw, sc);
  const EnergyTrace et = energy(sol, disc);
  const DissipationReport r = dissipation_check(et, data_shutoff(pw, scene));
  EXPECT_GT(r.checked, 100);
  EXPECT_TRUE(r.pass) << "worst relative growth " << r.worst << " at step " << r.step;
}

TEST(DataNorms, SeriesAndAccumulation)
{
  DataSeries d;
  d.t = {0.0, 1.0, 2.0};
  d.g = {0.0, 2.0, 2.0};
  d.dg = {1.0, 3.0, 2.0};
  d.d2g = {0.0, 0.0, 4.0};
  accumulate(d);
  EXPECT_DOUBLE_EQ(d.g_l1[2], 3.0);
  EXPECT_DOUBLE_EQ(d.dg_l1[2], 4.5);
  EXPECT_DOUBLE_EQ(d.d2g_l1[2], 2.0);
  EXPECT_DOUBLE_EQ(d.dg_max[2], 3.0);
}

TEST(DataNorms, ArrivalAndShutoff)
{
  const Scene scene =
    build_scene(json::parse(R"({"scene": {"cavities": [{"aperture": [-1, 0], "depth": 1}, {"aperture": [1, 2], "depth": 1}]}})"));
  const PlaneWave<> pw = pulse();
  const auto [lo, hi] = pw.profile.support();
  EXPECT_NEAR(data_arrival(pw, scene), lo - 2.0 * pw.c1(), 1e-14);
  EXPECT_NEAR(data_shutoff(pw, scene), hi + pw.c1(), 1e-14);
}

TEST(Stability, RatioIsScaleInvariant)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  const CqScheme sc{0.05, 60, 0.0};
  std::vector<double> times;
  for (int n = 0; n < sc.nodes(); n++)
  {
    times.push_back(sc.time(n));
  }
  const PlaneWave<> a = pulse(1.0), b = pulse(4.0);
  const StabilityReport ra = stability_check(run_time_domain(disc, a, sc), disc, data_series(a, disc.grid, times));
  const StabilityReport rb = stability_check(run_time_domain(disc, b, sc), disc, data_series(b, disc.grid, times));
  EXPECT_GT(ra.ratio, 0.0);
  EXPECT_NEAR(rb.ratio, ra.ratio, 1e-12 * ra.ratio);
  EXPECT_NEAR(rb.rhs, 4.0 * ra.rhs, 1e-12 * rb.rhs);
  const StabilityReport tight =
    stability_check(run_time_domain(disc, a, sc), disc, data_series(a, disc.grid, times), 0.5 * ra.ratio);
  EXPECT_FALSE(tight.pass);
}

TEST(Apriori, ZeroDataGivesZeroReport)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  const CqScheme sc{0.05, 40, 0.0};
  std::vector<double> times;
  for (int n = 0; n < sc.nodes(); n++)
  {
    times.push_back(sc.time(n));
  }
  const PlaneWave<> pw = pulse(0.0);
  const AprioriReport r = apriori_check(run_time_domain(disc, pw, sc), disc, data_series(pw, disc.grid, times));
  EXPECT_EQ(r.linf_lhs, 0.0);
  EXPECT_EQ(r.linf_rhs, 0.0);
  EXPECT_EQ(r.linf_ratio, 0.0);
  EXPECT_EQ(r.l2_ratio, 0.0);
  EXPECT_DOUBLE_EQ(r.T, sc.horizon());
}

TEST(Apriori, MismatchedSeriesRejected)
{
  const Discretization disc = small_disc(R"({"aperture": [-0.5, 0.5], "depth": 0.3})", 8.0, 256);
  const CqScheme sc{0.05, 40, 0.0};
  const PlaneWave<> pw = pulse();
  const DataSeries d = data_series(pw, disc.grid, {0.0, 0.1});
  EXPECT_THROW(apriori_check(run_time_domain(disc, pw, sc), disc, d), Error);
}

TEST(Passivity, ZeroTracesGiveZero)
{
  const TraceGrid grid(8.0, 256, {{-2.0, -1.0}, {0.0, 1.0}});
  const std::vector<TraceVector> z(2, TraceVector::zeros(grid));
  EXPECT_EQ(passivity_defect(z, cplx(1.0, 2.0), 1.0, grid, DtnSymbol{}), 0.0);
  const CqScheme sc{0.05, 31, 0.0};
  const auto [form, scale] =
    cq_boundary_form(std::vector<Eigen::VectorXd>(sc.nodes(), Eigen::VectorXd::Zero(grid.N())), sc, grid, DtnSymbol{});
  EXPECT_EQ(form, 0.0);
  EXPECT_EQ(scale, 0.0);
}

TEST(Passivity, SuitePassesOnThreeApertures)
{
  const TraceGrid grid(16.0, 512, {{-3.0, -2.0}, {-1.0, 0.5}, {1.0, 2.5}});
  const PassivityReport r = passivity_suite(grid, DtnSymbol{1.0}, 100, 42);
  EXPECT_TRUE(r.pass());
  EXPECT_EQ(r.trials, 100);
  EXPECT_GE(r.min_single, 0.0);
  EXPECT_GE(r.min_pair, -1e-12);
  EXPECT_GE(r.min_all, -1e-12);
  EXPECT_GE(r.min_time, -1e-12);
}

TEST(Passivity, SuiteIsDeterministicAcrossThreads)
{
  const TraceGrid grid(8.0, 256, {{-1.0, 0.0}, {1.0, 2.0}});
  const PassivityReport a = passivity_suite(grid, DtnSymbol{1.0}, 50, 7, 1.0, 1);
  const PassivityReport b = passivity_suite(grid, DtnSymbol{1.0}, 50, 7, 1.0, 3);
  EXPECT_EQ(a.min_single, b.min_single);
  EXPECT_EQ(a.min_pair, b.min_pair);
  EXPECT_EQ(a.min_time, b.min_time);
}

TEST(Passivity, RandomDrawsInRange)
{
  std::mt19937_64 rng(1);
  const TraceGrid grid(8.0, 256, {{-1.0, 0.0}});
  for (int i = 0; i < 200; i++)
  {
    const cplx s = random_laplace_parameter(rng);
    EXPECT_GE(s.real(), 1e-2);
    EXPECT_LE(s.real(), 1e2);
    EXPECT_LE(std::abs(s.imag()), 100.0);
  }
  const TraceVector t = random_aperture_trace(rng, grid, 0);
  EXPECT_NEAR(trace_norm_weighted(t, 0.0, grid), 1.0, 1e-14);
  EXPECT_NE(split_seed(1, 0), split_seed(1, 1));
  EXPECT_NE(split_seed(1, 0), split_seed(2, 0));
}

TEST(TraceChecksTest, ContinuityConstant)
{
  EXPECT_DOUBLE_EQ(continuity_constant(1.0, 1.0), 1.0);
  EXPECT_NEAR(continuity_constant(2.0, 1.0), 2.0, 1e-15);
  EXPECT_NEAR(continuity_constant(cplx(1.0, 1.0), 1.0), std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(continuity_constant(0.1, 1.0), 1.0);
}

TEST(TraceChecksTest, DefaultGridPasses)
{
  const TraceGrid grid(8.0, 256, {{-1.0, 0.0}, {1.0, 2.0}});
  const TraceChecks c = trace_checks(grid, DtnSymbol{1.0}, 2000, 1);
  EXPECT_TRUE(c.branch_sign);
  EXPECT_LE(c.branch_error, 1e-12);
  EXPECT_LE(c.continuity_margin, 1e-9);
  EXPECT_LE(c.oracle_error, 1e-10);
}

TEST(EnergyCsv, HeaderAndRows)
{
  EnergyTrace et;
  et.t = {0.0, 0.1};
  et.e = {0.0, 1.0};
  et.kinetic = {0.0, 0.5};
  et.potential = {0.0, 0.5};
  std::ostringstream os;
  write_energy_csv(os, et);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,e,kinetic,potential");
}
