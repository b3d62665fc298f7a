// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_CQ_HPP
#define CAVITY_TD_CQ_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "cavity_td/error.hpp"
#include "cavity_td/fem.hpp"
#include "cavity_td/freq.hpp"
#include "cavity_td/incident.hpp"
#include "cavity_td/parallel.hpp"
#include "cavity_td/trace.hpp"

namespace cavity_td
{

// BDF2 convolution quadrature on t_n = n dt, n = 0..steps.
struct CqScheme
{
  double dt = 0.05;
  int steps = 256;
  double lambda = 0.0;  // contour radius; 0 selects (1e-14)^{1/(2 steps + 2)}

  static cplx delta(cplx zeta) { return (3.0 - 4.0 * zeta + zeta * zeta) / 2.0; }

  int nodes() const { return steps + 1; }
  double radius() const
  {
    return lambda > 0.0 ? lambda : std::pow(1e-14, 1.0 / (2.0 * steps + 2.0));
  }
  double horizon() const { return dt * steps; }
  double time(int n) const { return n * dt; }

  void validate() const
  {
    verify(dt > 0.0 && std::isfinite(dt), ErrorKind::ConfigError, "time step must be positive");
    verify(steps >= 2, ErrorKind::ConfigError, "at least two time steps are needed");
    const double r = radius();
    verify(r > 0.0 && r < 1.0, ErrorKind::ConfigError, "contour radius must lie in (0, 1)");
  }
};

// s_l = delta(lambda exp(-2 pi i l / (N+1))) / dt, l = 0..N.
inline std::vector<cplx> cq_frequencies(const CqScheme &scheme)
{
  scheme.validate();
  const int M = scheme.nodes();
  const double r = scheme.radius();
  std::vector<cplx> s(M);
  for (int l = 0; l < M; l++)
  {
    const double phi = -2.0 * std::numbers::pi * l / M;
    s[l] = CqScheme::delta(std::polar(r, phi)) / scheme.dt;
    verify(s[l].real() > 0.0, ErrorKind::ContractViolation,
           "CQ frequency " + std::to_string(l) + " has Re s <= 0; adjust lambda or dt");
  }
  return s;
}

struct CqStats
{
  double max_abs = 0.0;   // largest |Re| of the reconstruction
  double max_imag = 0.0;  // largest |Im| of the reconstruction before it is discarded
};

//
// All-at-once CQ: y = K(d_t) x for real vector sequences x_0..x_N. The transfer K(l, s_l, X)
// is called once per l <= (N+1)/2; the remaining nodes are conjugates. Transforms run in
// extended precision because unscaling by lambda^{-n} amplifies their round-off by up to
// lambda^{-N}. cq_convolve_extended takes a transfer on VectorXcl and keeps the whole
// frequency side in long double; cq_convolve rounds each sample to double for K.
//
namespace detail
{

template <bool extended, class Transfer>
std::vector<Eigen::VectorXd> cq_convolve(const CqScheme &scheme, const std::vector<Eigen::VectorXd> &x,
                                         int out_dim, Transfer &&K, unsigned threads, CqStats *stats)
{
  const auto s = cq_frequencies(scheme);
  const int M = scheme.nodes();
  verify(static_cast<int>(x.size()) == M, ErrorKind::DimensionMismatch,
         "sequence length must be steps + 1");
  const int in_dim = static_cast<int>(x.front().size());
  const long double r = scheme.radius();
  std::vector<long double> rpow(M);
  rpow[0] = 1.0L;
  for (int n = 1; n < M; n++)
  {
    rpow[n] = rpow[n - 1] * r;
  }
  const int half = M / 2;

  Eigen::FFT<long double> fft;
  using MatrixXcl = Eigen::Matrix<lcplx, Eigen::Dynamic, Eigen::Dynamic>;
  MatrixXcl X = MatrixXcl::Zero(in_dim, half + 1);
  {
    std::vector<lcplx> series(M), spec(M);
    for (int d = 0; d < in_dim; d++)
    {
      bool any = false;
      for (int n = 0; n < M; n++)
      {
        verify(x[n].size() == in_dim, ErrorKind::DimensionMismatch, "ragged input sequence");
        series[n] = lcplx(rpow[n] * static_cast<long double>(x[n][d]), 0.0L);
        any = any || x[n][d] != 0.0;
      }
      if (!any)
      {
        continue;
      }
      fft.fwd(spec, series);
      for (int l = 0; l <= half; l++)
      {
        X(d, l) = spec[l];
      }
    }
  }

  MatrixXcl Y(out_dim, half + 1);
  parallel_for(static_cast<std::size_t>(half + 1), threads,
               [&](std::size_t l)
               {
                 const int li = static_cast<int>(l);
                 VectorXcl col;
                 if constexpr (extended)
                 {
                   col = K(li, s[l], VectorXcl(X.col(li)));
                 }
                 else
                 {
                   col = Eigen::VectorXcd(K(li, s[l], Eigen::VectorXcd(X.col(li).template cast<cplx>())))
                           .template cast<lcplx>();
                 }
                 verify(col.size() == out_dim, ErrorKind::DimensionMismatch,
                        "transfer returned a vector of the wrong size");
                 Y.col(li) = col;
               });

  std::vector<Eigen::VectorXd> y(M, Eigen::VectorXd::Zero(out_dim));
  std::vector<lcplx> spec(M), series(M);
  CqStats st;
  for (int d = 0; d < out_dim; d++)
  {
    for (int l = 0; l <= half; l++)
    {
      spec[l] = Y(d, l);
    }
    for (int l = half + 1; l < M; l++)
    {
      spec[l] = std::conj(spec[M - l]);
    }
    if (M % 2 == 0)
    {
      // Nyquist node: s is real there, keep the sample real as its own conjugate.
      spec[half] = lcplx(spec[half].real(), 0.0L);
    }
    fft.inv(series, spec);
    for (int n = 0; n < M; n++)
    {
      const long double re = series[n].real() / rpow[n];
      const long double im = series[n].imag() / rpow[n];
      y[n][d] = static_cast<double>(re);
      st.max_abs = std::max(st.max_abs, static_cast<double>(std::abs(re)));
      st.max_imag = std::max(st.max_imag, static_cast<double>(std::abs(im)));
    }
  }
  if (stats)
  {
    *stats = st;
  }
  return y;
}

}  // namespace detail

template <class Transfer>
std::vector<Eigen::VectorXd> cq_convolve(const CqScheme &scheme, const std::vector<Eigen::VectorXd> &x,
                                         int out_dim, Transfer &&K, unsigned threads = 1,
                                         CqStats *stats = nullptr)
{
  return detail::cq_convolve<false>(scheme, x, out_dim, std::forward<Transfer>(K), threads, stats);
}

template <class Transfer>
std::vector<Eigen::VectorXd> cq_convolve_extended(const CqScheme &scheme,
                                                  const std::vector<Eigen::VectorXd> &x, int out_dim,
                                                  Transfer &&K, unsigned threads = 1,
                                                  CqStats *stats = nullptr)
{
  return detail::cq_convolve<true>(scheme, x, out_dim, std::forward<Transfer>(K), threads, stats);
}

struct TimeSolution
{
  CqScheme scheme;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> u;  // stacked free dofs per step
  CqStats stats;

  int steps() const { return static_cast<int>(u.size()) - 1; }
  // Imaginary residue of the reconstruction relative to max |u|.
  double imag_ratio() const { return stats.max_abs == 0.0 ? 0.0 : stats.max_imag / stats.max_abs; }
};

struct CqOptions
{
  unsigned threads = 1;
  SystemOptions system{};
  bool check_causality = true;
  std::vector<int> illuminated;  // cavities that receive the incident data; empty = all
};

// Real load vectors int_Gamma g(., t_n) phi_i for n = 0..N.
template <class Profile>
std::vector<Eigen::VectorXd> load_series(const Discretization &disc, const PlaneWave<Profile> &pw,
                                         const CqScheme &scheme,
                                         const std::vector<int> &illuminated = {})
{
  std::vector<Eigen::VectorXd> b(scheme.nodes());
  for (int n = 0; n < scheme.nodes(); n++)
  {
    b[n] = apply_rhs(boundary_data_time(pw, disc.grid, scheme.time(n)), disc).real();
    mask_cavities(disc, b[n], illuminated);
  }
  return b;
}

template <class Profile>
TimeSolution run_time_domain(const Discretization &disc, const PlaneWave<Profile> &pw,
                             const CqScheme &scheme, const CqOptions &opt = {})
{
  require_te(pw.polarization);
  require_te(disc.scene.polarization);
  scheme.validate();
  const double mu0 = disc.scene.mu0;
  TimeSolution sol;
  sol.scheme = scheme;
  for (int n = 0; n < scheme.nodes(); n++)
  {
    sol.t.push_back(scheme.time(n));
  }
  auto transfer = [&](int, cplx s, const VectorXcl &b) -> VectorXcl
  {
    if (b.squaredNorm() == 0.0L)
    {
      return VectorXcl::Zero(disc.dofs());
    }
    const SystemOperator op = build_system(disc, s, opt.system);
    const VectorXcl rhs = b / (lcplx(s) * static_cast<long double>(mu0));
    VectorXcl u = op.solve_refined(rhs);
    const Eigen::VectorXcd rd = rhs.cast<cplx>();
    const double res = (op.apply(u.cast<cplx>()) - rd).norm() / rd.norm();
    verify(res <= 1e-10, ErrorKind::FactorizationFailure,
           "direct solve residual " + std::to_string(res) + " at s = (" +
             std::to_string(s.real()) + ", " + std::to_string(s.imag()) + ")");
    return u;
  };
  sol.u = cq_convolve_extended(scheme, load_series(disc, pw, scheme, opt.illuminated), disc.dofs(),
                               transfer, opt.threads, &sol.stats);
  if (opt.check_causality)
  {
    double peak = 0.0;
    for (const auto &u : sol.u)
    {
      peak = std::max(peak, u.norm());
    }
    std::ostringstream msg;
    msg << std::scientific << std::setprecision(3) << "field at t = 0 is not negligible: |u_0| = "
        << sol.u.front().norm() << ", peak " << peak;
    verify(sol.u.front().norm() <= 1e-8 * peak, ErrorKind::CausalityViolation, msg.str());
  }
  return sol;
}

// BDF2 difference quotients; BDF1 at n = 1 and zero at n = 0.
inline std::vector<Eigen::VectorXd> time_derivative(const std::vector<Eigen::VectorXd> &u, double dt)
{
  verify(u.size() >= 3, ErrorKind::PreconditionViolation, "time derivative needs N >= 2");
  std::vector<Eigen::VectorXd> d(u.size());
  d[0] = Eigen::VectorXd::Zero(u[0].size());
  d[1] = (u[1] - u[0]) / dt;
  for (std::size_t n = 2; n < u.size(); n++)
  {
    d[n] = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) / (2.0 * dt);
  }
  return d;
}

inline std::vector<Eigen::VectorXd> time_derivative(const TimeSolution &sol)
{
  return time_derivative(sol.u, sol.scheme.dt);
}

// Point value of a nodal field by barycentric interpolation; NaN outside the mesh.
inline double point_value(const Mesh &mesh, const Eigen::VectorXd &nodal, double x, double y)
{
  for (std::size_t t = 0; t < mesh.triangles.size(); t++)
  {
    const auto &tri = mesh.triangles[t];
    const Point &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]], &c = mesh.vertices[tri[2]];
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((x - a.x) * (c.y - a.y) - (c.x - a.x) * (y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (y - a.y) - (x - a.x) * (b.y - a.y)) / det;
    const double l0 = 1.0 - l1 - l2;
    constexpr double tol = -1e-12;
    if (l0 >= tol && l1 >= tol && l2 >= tol)
    {
      return l0 * nodal[tri[0]] + l1 * nodal[tri[1]] + l2 * nodal[tri[2]];
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

struct Probe
{
  std::size_t cavity = 0;
  double x = 0.0, y = 0.0;
};

inline void write_probe_csv(std::ostream &out, const Discretization &disc, const TimeSolution &sol,
                            const std::vector<Probe> &probes)
{
  out.precision(17);
  out << "t";
  for (std::size_t p = 0; p < probes.size(); p++)
  {
    out << ",u" << p;
  }
  out << '\n';
  for (std::size_t n = 0; n < sol.u.size(); n++)
  {
    out << sol.t[n];
    for (const auto &p : probes)
    {
      verify(p.cavity < disc.cavities(), ErrorKind::IndexError, "probe cavity out of range");
      const Eigen::VectorXd nodal = nodal_field(disc, sol.u[n], p.cavity);
      out << ',' << point_value(disc.meshes[p.cavity], nodal, p.x, p.y);
    }
    out << '\n';
  }
}

// Legacy VTK unstructured grid with the nodal field of cavity j at step n.
inline void write_snapshot_vtk(std::ostream &out, const Discretization &disc, const TimeSolution &sol,
                               std::size_t n, std::size_t j)
{
  verify(n < sol.u.size() && j < disc.cavities(), ErrorKind::IndexError, "snapshot out of range");
  const Mesh &mesh = disc.meshes[j];
  const Eigen::VectorXd nodal = nodal_field(disc, sol.u[n], j);
  out.precision(17);
  out << "# vtk DataFile Version 3.0\n";
  out << "cavity " << disc.scene.cavities[j].id << " t=" << sol.t[n] << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.vertices.size() << " double\n";
  for (const auto &p : mesh.vertices)
  {
    out << p.x << ' ' << p.y << " 0\n";
  }
  out << "CELLS " << mesh.triangles.size() << ' ' << 4 * mesh.triangles.size() << '\n';
  for (const auto &t : mesh.triangles)
  {
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  out << "CELL_TYPES " << mesh.triangles.size() << '\n';
  for (std::size_t t = 0; t < mesh.triangles.size(); t++)
  {
    out << "5\n";
  }
  out << "POINT_DATA " << mesh.vertices.size() << "\nSCALARS u double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < nodal.size(); v++)
  {
    out << nodal[v] << '\n';
  }
}

}  // namespace cavity_td

#endif  // CAVITY_TD_CQ_HPP
