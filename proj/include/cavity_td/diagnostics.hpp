// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_DIAGNOSTICS_HPP
#define CAVITY_TD_DIAGNOSTICS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cavity_td/cq.hpp"
#include "cavity_td/error.hpp"
#include "cavity_td/fem.hpp"
#include "cavity_td/freq.hpp"
#include "cavity_td/incident.hpp"
#include "cavity_td/parallel.hpp"
#include "cavity_td/trace.hpp"

namespace cavity_td
{

//
// H^{-1/2} norms of the boundary data and its first two time derivatives on the aperture
// union, sampled on the time grid, with running integrals (trapezoid) and maxima.
//
struct DataSeries
{
  std::vector<double> t;
  std::vector<double> g, dg, d2g;  // |d^k g(., t_n)|_{-1/2}
  std::vector<double> g_l1, dg_l1, d2g_l1, dg_max;

  std::size_t size() const { return t.size(); }
  double horizon() const { return t.empty() ? 0.0 : t.back(); }
};

inline void accumulate(DataSeries &d)
{
  const std::size_t n = d.t.size();
  d.g_l1.assign(n, 0.0);
  d.dg_l1.assign(n, 0.0);
  d.d2g_l1.assign(n, 0.0);
  d.dg_max.assign(n, 0.0);
  for (std::size_t i = 0; i < n; i++)
  {
    d.dg_max[i] = std::max(i ? d.dg_max[i - 1] : 0.0, d.dg[i]);
    if (i == 0)
    {
      continue;
    }
    const double h = d.t[i] - d.t[i - 1];
    d.g_l1[i] = d.g_l1[i - 1] + 0.5 * h * (d.g[i] + d.g[i - 1]);
    d.dg_l1[i] = d.dg_l1[i - 1] + 0.5 * h * (d.dg[i] + d.dg[i - 1]);
    d.d2g_l1[i] = d.d2g_l1[i - 1] + 0.5 * h * (d.d2g[i] + d.d2g[i - 1]);
  }
}

// Boundary data restricted to the illuminated apertures (all when the list is empty).
inline TraceVector illuminated_trace(const TraceVector &g, const TraceGrid &grid,
                                     const std::vector<int> &illuminated)
{
  if (illuminated.empty())
  {
    return restrict_to_union(g, grid);
  }
  TraceVector out = TraceVector::zeros(grid, Support::Union);
  for (int j : illuminated)
  {
    out.values += restrict_to(g, j, grid).values;
  }
  return out;
}

template <class Profile>
DataSeries data_series(const PlaneWave<Profile> &pw, const TraceGrid &grid,
                       const std::vector<double> &times, const std::vector<int> &illuminated = {})
{
  DataSeries d;
  d.t = times;
  for (double t : times)
  {
    for (int order = 0; order < 3; order++)
    {
      const TraceVector g = illuminated_trace(boundary_data_time(pw, grid, t, order), grid, illuminated);
      (order == 0 ? d.g : order == 1 ? d.dg : d.d2g).push_back(trace_norm(g, -0.5, grid));
    }
  }
  accumulate(d);
  return d;
}

// Time after which g vanishes on every aperture (to the profile's support).
template <class Profile>
double data_shutoff(const PlaneWave<Profile> &pw, const Scene &scene)
{
  double t = -std::numeric_limits<double>::infinity();
  const double hi = pw.profile.support().second;
  for (const auto &cav : scene.cavities)
  {
    t = std::max({t, hi - pw.c1() * cav.x_a, hi - pw.c1() * cav.x_b});
  }
  return t;
}

// First time the pulse reaches any aperture.
template <class Profile>
double data_arrival(const PlaneWave<Profile> &pw, const Scene &scene)
{
  double t = std::numeric_limits<double>::infinity();
  const double lo = pw.profile.support().first;
  for (const auto &cav : scene.cavities)
  {
    t = std::min({t, lo - pw.c1() * cav.x_a, lo - pw.c1() * cav.x_b});
  }
  return t;
}

struct EnergyTrace
{
  std::vector<double> t;
  std::vector<double> e, kinetic, potential;
  DataSeries data;  // empty unless supplied
};

inline EnergyTrace energy(const TimeSolution &sol, const Discretization &disc,
                          const DataSeries *data = nullptr)
{
  const auto d = time_derivative(sol);
  const SpMat M = disc.stacked(&FemMatrices::M);
  const SpMat K = disc.stacked(&FemMatrices::K);
  EnergyTrace et;
  et.t = sol.t;
  for (std::size_t n = 0; n < sol.u.size(); n++)
  {
    const double kin = d[n].dot(M * d[n]);
    const double pot = sol.u[n].dot(K * sol.u[n]);
    et.kinetic.push_back(kin);
    et.potential.push_back(pot);
    et.e.push_back(kin + pot);
  }
  if (data)
  {
    et.data = *data;
  }
  return et;
}

// Second path: element-by-element quadrature of eps |d_t u|^2 + mu^{-1} |grad u|^2.
inline std::vector<double> energy_direct(const TimeSolution &sol, const Discretization &disc)
{
  const auto d = time_derivative(sol);
  std::vector<double> e(sol.u.size(), 0.0);
  for (std::size_t j = 0; j < disc.cavities(); j++)
  {
    const Mesh &mesh = disc.meshes[j];
    const auto &cav = disc.scene.cavities[j];
    for (std::size_t n = 0; n < sol.u.size(); n++)
    {
      const Eigen::VectorXd u = nodal_field(disc, sol.u[n], j);
      const Eigen::VectorXd v = nodal_field(disc, d[n], j);
      double acc = 0.0;
      for (std::size_t t = 0; t < mesh.triangles.size(); t++)
      {
        const auto &tri = mesh.triangles[t];
        const Point &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]], &c = mesh.vertices[tri[2]];
        const double area = mesh.signed_area(t);
        const double ux = (u[tri[0]] * (b.y - c.y) + u[tri[1]] * (c.y - a.y) + u[tri[2]] * (a.y - b.y)) / (2 * area);
        const double uy = (u[tri[0]] * (c.x - b.x) + u[tri[1]] * (a.x - c.x) + u[tri[2]] * (b.x - a.x)) / (2 * area);
        for (int q = 0; q < 3; q++)
        {
          const int p0 = tri[q], p1 = tri[(q + 1) % 3];
          const Point &P = mesh.vertices[p0], &Q = mesh.vertices[p1];
          const double mx = 0.5 * (P.x + Q.x), my = 0.5 * (P.y + Q.y);
          const double vq = 0.5 * (v[p0] + v[p1]);
          acc += area / 3.0 * (cav.epsilon(mx, my) * vq * vq + (ux * ux + uy * uy) / cav.mu(mx, my));
        }
      }
      e[n] += acc;
    }
  }
  return e;
}

struct DissipationReport
{
  double worst = 0.0;  // max over n of (e_{n+1} - e_n) / e_n after t*
  int step = -1;       // where the worst value occurs
  int checked = 0;     // number of step pairs examined
  bool pass = true;
};

// e(t_{n+1}) <= e(t_n) (1 + tol) for every t_n > t_star.
inline DissipationReport dissipation_check(const EnergyTrace &et, double t_star, double tol = 1e-8)
{
  DissipationReport r;
  r.worst = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n + 1 < et.e.size(); n++)
  {
    if (et.t[n] <= t_star)
    {
      continue;
    }
    r.checked++;
    const double rel = et.e[n] > 0.0 ? (et.e[n + 1] - et.e[n]) / et.e[n]
                                     : (et.e[n + 1] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (rel > r.worst)
    {
      r.worst = rel;
      r.step = static_cast<int>(n);
    }
  }
  r.pass = r.checked > 0 && r.worst <= tol;
  return r;
}

struct StabilityReport
{
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
  bool pass = true;
};

// lhs = max_n |d_t u| + |d_t grad u|; rhs = |g|_{L1 H^{-1/2}} + max |d_t g| + |d_t^2 g|_{L1 H^{-1/2}}.
inline StabilityReport stability_check(const TimeSolution &sol, const Discretization &disc,
                                       const DataSeries &data,
                                       double bound = std::numeric_limits<double>::infinity())
{
  verify(data.size() == sol.u.size(), ErrorKind::DimensionMismatch,
         "data series and solution are sampled on different time grids");
  const auto d = time_derivative(sol);
  const SpMat M0 = disc.stacked(&FemMatrices::M0);
  const SpMat K0 = disc.stacked(&FemMatrices::K0);
  StabilityReport r;
  for (const auto &dn : d)
  {
    r.lhs = std::max(r.lhs, energy_norm(M0, dn) + energy_norm(K0, dn));
  }
  const std::size_t last = data.size() - 1;
  r.rhs = data.g_l1[last] + data.dg_max[last] + data.d2g_l1[last];
  r.ratio = r.rhs == 0.0 ? 0.0 : r.lhs / r.rhs;
  r.pass = r.ratio <= bound;
  return r;
}

struct AprioriReport
{
  double T = 0.0;
  double linf_lhs = 0.0, linf_rhs = 0.0, linf_ratio = 0.0;
  double l2_lhs = 0.0, l2_rhs = 0.0, l2_ratio = 0.0;
};

inline AprioriReport apriori_check(const TimeSolution &sol, const Discretization &disc,
                                   const DataSeries &data)
{
  verify(data.size() == sol.u.size(), ErrorKind::DimensionMismatch,
         "data series and solution are sampled on different time grids");
  const SpMat M0 = disc.stacked(&FemMatrices::M0);
  const SpMat K0 = disc.stacked(&FemMatrices::K0);
  AprioriReport r;
  r.T = sol.t.back();
  double max_u = 0.0, max_grad = 0.0, l2_u = 0.0, l2_grad = 0.0;
  std::vector<double> nu, ng;
  for (const auto &u : sol.u)
  {
    nu.push_back(energy_norm(M0, u));
    ng.push_back(energy_norm(K0, u));
    max_u = std::max(max_u, nu.back());
    max_grad = std::max(max_grad, ng.back());
  }
  for (std::size_t n = 1; n < sol.u.size(); n++)
  {
    const double h = sol.t[n] - sol.t[n - 1];
    l2_u += 0.5 * h * (nu[n] * nu[n] + nu[n - 1] * nu[n - 1]);
    l2_grad += 0.5 * h * (ng[n] * ng[n] + ng[n - 1] * ng[n - 1]);
  }
  const std::size_t last = data.size() - 1;
  const double g1 = data.g_l1[last], dg1 = data.dg_l1[last];
  r.linf_lhs = max_u + max_grad;
  r.linf_rhs = r.T * g1 + dg1;
  r.l2_lhs = std::sqrt(l2_u) + std::sqrt(l2_grad);
  r.l2_rhs = std::pow(r.T, 1.5) * g1 + std::sqrt(r.T) * dg1;
  r.linf_ratio = r.linf_rhs == 0.0 ? 0.0 : r.linf_lhs / r.linf_rhs;
  r.l2_ratio = r.l2_rhs == 0.0 ? 0.0 : r.l2_lhs / r.l2_rhs;
  return r;
}

inline void write_energy_csv(std::ostream &out, const EnergyTrace &et)
{
  out.precision(17);
  const bool with_data = et.data.size() == et.t.size();
  out << "t,e,kinetic,potential";
  if (with_data)
  {
    out << ",g_l1,dg_max,d2g_l1";
  }
  out << '\n';
  for (std::size_t n = 0; n < et.t.size(); n++)
  {
    out << et.t[n] << ',' << et.e[n] << ',' << et.kinetic[n] << ',' << et.potential[n];
    if (with_data)
    {
      out << ',' << et.data.g_l1[n] << ',' << et.data.dg_max[n] << ',' << et.data.d2g_l1[n];
    }
    out << '\n';
  }
}

//
// Randomized passivity checks of the boundary operator.
//

// SplitMix64 finalizer: independent per-trial streams from one seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream)
{
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform complex samples in the unit square on aperture j, zero elsewhere, unit L2 norm.
inline TraceVector random_aperture_trace(std::mt19937_64 &rng, const TraceGrid &grid, int j)
{
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  TraceVector t = TraceVector::zeros(grid, Support::Cavity, j);
  for (int k = 0; k < grid.N(); k++)
  {
    if (grid.in(j, k))
    {
      t.values[k] = cplx(U(rng), U(rng));
    }
  }
  const double n = trace_norm_weighted(t, 0.0, grid);
  if (n > 0.0)
  {
    t.values /= n;
  }
  return t;
}

// s1 log-uniform on [1e-2, 1e2], s2 uniform on [-100, 100].
inline cplx random_laplace_parameter(std::mt19937_64 &rng)
{
  std::uniform_real_distribution<double> E(-2.0, 2.0), S(-100.0, 100.0);
  return {std::pow(10.0, E(rng)), S(rng)};
}

struct PassivityReport
{
  int trials = 0;
  double min_single = std::numeric_limits<double>::infinity();
  double min_pair = std::numeric_limits<double>::infinity();
  double min_all = std::numeric_limits<double>::infinity();
  double min_time = std::numeric_limits<double>::infinity();  // relative to |Tu| |d_t u|
  int failures = 0;
  double tolerance = 1e-12;

  bool pass() const { return failures == 0; }
};

//
// Discrete time-domain quadratic form sum_n lambda^{2n} <(T u)_n, (d_t u)_n>_Gamma for a
// causal trace history u_n, with T and d_t both realized by the same BDF2 CQ. Returns the
// form and the product of the two weighted norms.
//
inline std::pair<double, double> cq_boundary_form(const std::vector<Eigen::VectorXd> &history,
                                                  const CqScheme &scheme, const TraceGrid &grid,
                                                  const DtnSymbol &sym)
{
  const int N = grid.N();
  auto apply_T = [&](int, cplx s, const Eigen::VectorXcd &U) -> Eigen::VectorXcd
  {
    TraceVector t{U, Support::Union, -1};
    return restrict_to_union(apply_B(t, s, grid, sym), grid).values;
  };
  auto apply_dt = [&](int, cplx s, const Eigen::VectorXcd &U) -> Eigen::VectorXcd { return s * U; };
  const auto Tu = cq_convolve(scheme, history, N, apply_T);
  const auto Du = cq_convolve(scheme, history, N, apply_dt);
  const double r = scheme.radius();
  double form = 0.0, na = 0.0, nb = 0.0, w = 1.0;
  for (std::size_t n = 0; n < history.size(); n++)
  {
    form += w * w * Tu[n].dot(Du[n]);
    na += w * w * Tu[n].squaredNorm();
    nb += w * w * Du[n].squaredNorm();
    w *= r;
  }
  return {form * grid.dx(), std::sqrt(na * nb) * grid.dx()};
}

// Smooth causal history: a few separable terms bump(t) v(x) on the aperture union.
inline std::vector<Eigen::VectorXd> random_trace_history(std::mt19937_64 &rng, const TraceGrid &grid,
                                                         const CqScheme &scheme)
{
  std::uniform_real_distribution<double> U(-1.0, 1.0), C(0.25, 0.6), W(0.05, 0.2);
  const double T = scheme.horizon();
  std::vector<Eigen::VectorXd> h(scheme.nodes(), Eigen::VectorXd::Zero(grid.N()));
  for (int term = 0; term < 3; term++)
  {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(grid.N());
    for (int k = 0; k < grid.N(); k++)
    {
      if (grid.in_union(k))
      {
        v[k] = U(rng);
      }
    }
    const double center = C(rng) * T, width = W(rng) * T;
    for (int n = 0; n < scheme.nodes(); n++)
    {
      const double r = (scheme.time(n) - center) / width;
      if (std::abs(r) < 1.0)
      {
        h[n] += std::exp(1.0 - 1.0 / (1.0 - r * r)) * v;
      }
    }
  }
  return h;
}

inline PassivityReport passivity_suite(const TraceGrid &grid, const DtnSymbol &sym, int trials,
                                       std::uint64_t seed, double mu0 = 1.0, unsigned threads = 1,
                                       double tolerance = 1e-12)
{
  verify(trials >= 1, ErrorKind::PreconditionViolation, "passivity suite needs trials >= 1");
  PassivityReport rep;
  rep.trials = trials;
  rep.tolerance = tolerance;
  const int n_ap = static_cast<int>(grid.cavities());
  std::vector<double> single(trials), pair(trials, rep.min_pair), all(trials, rep.min_all),
    timed(trials, rep.min_time);
  const int time_trials = std::max(1, trials / 100);
  const CqScheme scheme{0.05, 63, 0.0};
  parallel_for(static_cast<std::size_t>(trials), threads,
               [&](std::size_t i)
               {
                 std::mt19937_64 rng(split_seed(seed, i));
                 const cplx s = random_laplace_parameter(rng);
                 const int j = static_cast<int>(i % n_ap);
                 single[i] = passivity_defect({random_aperture_trace(rng, grid, j)}, s, mu0, grid, sym);
                 if (n_ap >= 2)
                 {
                   const int a = static_cast<int>(i % (n_ap - 1));
                   std::vector<TraceVector> tr(a + 2, TraceVector::zeros(grid));
                   tr[a] = random_aperture_trace(rng, grid, a);
                   tr[a + 1] = random_aperture_trace(rng, grid, a + 1);
                   pair[i] = passivity_defect(tr, s, mu0, grid, sym);
                 }
                 if (n_ap >= 3)
                 {
                   std::vector<TraceVector> tr;
                   for (int k = 0; k < n_ap; k++)
                   {
                     tr.push_back(random_aperture_trace(rng, grid, k));
                   }
                   all[i] = passivity_defect(tr, s, mu0, grid, sym);
                 }
                 if (static_cast<int>(i) < time_trials)
                 {
                   const auto [form, scale] = cq_boundary_form(random_trace_history(rng, grid, scheme),
                                                               scheme, grid, sym);
                   timed[i] = scale == 0.0 ? 0.0 : -form / scale;
                 }
               });
  for (int i = 0; i < trials; i++)
  {
    rep.min_single = std::min(rep.min_single, single[i]);
    rep.min_pair = std::min(rep.min_pair, pair[i]);
    rep.min_all = std::min(rep.min_all, all[i]);
    rep.min_time = std::min(rep.min_time, timed[i]);
    rep.failures += (single[i] < -tolerance) + (pair[i] < -tolerance) + (all[i] < -tolerance) +
                    (timed[i] < -tolerance);
  }
  return rep;
}

//
// Trace-operator invariants shared by the CLI validation command.
//
struct TraceChecks
{
  double branch_error = 0.0;      // max relative |beta^2 - (xi^2 + s^2/c^2)|
  bool branch_sign = true;        // Re beta < 0 everywhere
  double continuity_margin = 0.0; // max of |Bu|_{-1/2} - C |u|_{1/2} (should be <= 1e-9)
  double oracle_error = 0.0;      // max relative |FFT apply - dense apply|
};

inline double continuity_constant(cplx s, double c)
{
  const double a = (s.real() * s.real() - s.imag() * s.imag()) / (c * c);
  const double b = 2.0 * s.real() * s.imag() / (c * c);
  return std::max(std::pow(a * a + b * b, 0.25), 1.0);
}

inline TraceChecks trace_checks(const TraceGrid &grid, const DtnSymbol &sym, int samples,
                                std::uint64_t seed)
{
  TraceChecks out;
  std::mt19937_64 rng(split_seed(seed, 0xbeef));
  std::uniform_real_distribution<double> X(-1e3, 1e3), S1(1e-6, 100.0), S2(-100.0, 100.0);
  for (int i = 0; i < samples; i++)
  {
    const double xi = X(rng);
    const cplx s(S1(rng), S2(rng));
    const cplx b = sym(xi, s);
    const cplx target = xi * xi + s * s / (sym.c * sym.c);
    out.branch_sign = out.branch_sign && b.real() < 0.0;
    out.branch_error = std::max(out.branch_error, std::abs(b * b - target) / std::abs(target));
  }
  for (int i = 0; i < std::max(1, samples / 100); i++)
  {
    const cplx s(S1(rng), S2(rng));
    TraceVector u = TraceVector::zeros(grid);
    for (std::size_t j = 0; j < grid.cavities(); j++)
    {
      u.values += random_aperture_trace(rng, grid, static_cast<int>(j)).values;
    }
    const TraceVector Bu = apply_B(u, s, grid, sym);
    const double lhs = trace_norm(Bu, -0.5, grid);
    const double rhs = continuity_constant(s, sym.c) * trace_norm(u, 0.5, grid);
    out.continuity_margin = std::max(out.continuity_margin, lhs - rhs);
    if (grid.N() <= 1024 && i < 5)
    {
      const Eigen::MatrixXcd D = dtn_dense(grid, s, sym);
      const double err = (D * u.values - Bu.values).norm() / Bu.values.norm();
      out.oracle_error = std::max(out.oracle_error, err);
    }
  }
  return out;
}

}  // namespace cavity_td

#endif  // CAVITY_TD_DIAGNOSTICS_HPP
