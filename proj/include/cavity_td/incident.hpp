// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_INCIDENT_HPP
#define CAVITY_TD_INCIDENT_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <string>
#include <utility>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cavity_td/error.hpp"
#include "cavity_td/scene.hpp"
#include "cavity_td/trace.hpp"

namespace cavity_td
{

//
// Temporal pulse w(t) carried by the plane wave. The incident field is
// u_inc = f(-t - c1 x - c2 y) with f(tau) = w(-tau), so w is written in arrival-time form:
// a causal profile is one with w(t) ~ 0 for t <= 0.
//
// A profile with repeat_count > 1 is the pulse train sum_k w(t - k * repeat_period).
//
struct WaveProfile
{
  enum class Kind
  {
    GaussianPulse,
    SmoothBump
  };

  Kind kind = Kind::GaussianPulse;
  double center = 8.0;     // tau0 > 0
  double width = 1.0;      // sigma > 0
  double amplitude = 1.0;  // A
  double causality_tol = 1e-6;
  double repeat_period = 0.0;
  int repeat_count = 1;

  // w and its first three time derivatives.
  double value(double t) const { return sum(t, 0); }
  double d1(double t) const { return sum(t, 1); }
  double d2(double t) const { return sum(t, 2); }
  double d3(double t) const { return sum(t, 3); }

  // Interval outside which every derivative of w is below double precision noise.
  std::pair<double, double> support() const
  {
    const double half = kind == Kind::GaussianPulse ? 10.0 * width : width;
    const double extra = repeat_count > 1 ? (repeat_count - 1) * repeat_period : 0.0;
    return {center - half, center + half + extra};
  }

  void validate() const
  {
    verify(center > 0.0 && width > 0.0, ErrorKind::ConfigError,
           "pulse needs center > 0 and width > 0");
    verify(repeat_count >= 1 && (repeat_count == 1 || repeat_period > 0.0),
           ErrorKind::ConfigError, "pulse train needs repeat_count >= 1 and a positive period");
  }

private:
  double sum(double t, int order) const
  {
    double acc = 0.0;
    for (int k = 0; k < repeat_count; k++)
    {
      acc += single(t - k * repeat_period, order);
    }
    return acc;
  }

  double single(double t, int order) const
  {
    const double r = (t - center) / width;
    if (kind == Kind::GaussianPulse)
    {
      const double g = amplitude * std::exp(-0.5 * r * r);
      switch (order)
      {
        case 0: return g;
        case 1: return -r / width * g;
        case 2: return (r * r - 1.0) / (width * width) * g;
        default: return -(r * r * r - 3.0 * r) / (width * width * width) * g;
      }
    }
    // exp(1 - 1/(1 - r^2)) on |r| < 1, zero outside.
    if (std::abs(r) >= 1.0)
    {
      return 0.0;
    }
    const double p = 1.0 - r * r;
    const double q = 1.0 - 1.0 / p;
    if (q < -700.0)
    {
      return 0.0;
    }
    const double phi = amplitude * std::exp(q);
    const double q1 = -2.0 * r / (p * p);
    const double q2 = -2.0 / (p * p) - 8.0 * r * r / (p * p * p);
    const double q3 = -24.0 * r / (p * p * p) - 48.0 * r * r * r / (p * p * p * p);
    switch (order)
    {
      case 0: return phi;
      case 1: return q1 * phi / width;
      case 2: return (q2 + q1 * q1) * phi / (width * width);
      default: return (q3 + 3.0 * q1 * q2 + q1 * q1 * q1) * phi / (width * width * width);
    }
  }
};

template <class P>
concept PulseProfile = requires(const P &p, double t) {
  { p.value(t) } -> std::convertible_to<double>;
  { p.d1(t) } -> std::convertible_to<double>;
  { p.d2(t) } -> std::convertible_to<double>;
  { p.d3(t) } -> std::convertible_to<double>;
  { p.support() } -> std::convertible_to<std::pair<double, double>>;
};

template <PulseProfile Profile = WaveProfile>
struct PlaneWave
{
  Profile profile;
  double theta = std::numbers::pi / 2;
  double eps0 = 1.0;
  double mu0 = 1.0;
  Polarization polarization = Polarization::TE;

  PlaneWave() = default;
  PlaneWave(Profile p, double theta_, double eps0_ = 1.0, double mu0_ = 1.0,
            Polarization pol = Polarization::TE)
    : profile(std::move(p)), theta(theta_), eps0(eps0_), mu0(mu0_), polarization(pol)
  {
    verify(theta > 0.0 && theta < std::numbers::pi, ErrorKind::DomainError,
           "incidence angle must lie in (0, pi)");
    verify(eps0 > 0.0 && mu0 > 0.0, ErrorKind::NonPositiveMaterial,
           "eps0 and mu0 must be positive");
  }

  double c1() const { return std::cos(theta) / std::sqrt(eps0 * mu0); }
  double c2() const { return std::sin(theta) / std::sqrt(eps0 * mu0); }

  // Reflected-field sign: -1 for TE, +1 for TM.
  double reflection_sign() const { return polarization == Polarization::TE ? -1.0 : 1.0; }
};

inline void require_te(Polarization p)
{
  verify(p == Polarization::TE, ErrorKind::UnsupportedPolarization,
         "only TE polarization is solved (TM needs Neumann walls)");
}

template <class Profile>
double evaluate_incident(const PlaneWave<Profile> &pw, double x, double y, double t)
{
  return pw.profile.value(t + pw.c1() * x + pw.c2() * y);
}

template <class Profile>
double evaluate_reflected(const PlaneWave<Profile> &pw, double x, double y, double t)
{
  require_te(pw.polarization);
  return pw.reflection_sign() * pw.profile.value(t + pw.c1() * x - pw.c2() * y);
}

// d^order/dt^order of g(x, t) = d_y (u_inc + u_r)|_{y=0} = 2 c2 w'(t + c1 x).
template <class Profile>
double boundary_data_point(const PlaneWave<Profile> &pw, double x, double t, int order = 0)
{
  const double tau = t + pw.c1() * x;
  const double d = order == 0 ? pw.profile.d1(tau)
                   : order == 1 ? pw.profile.d2(tau)
                                : pw.profile.d3(tau);
  return 2.0 * pw.c2() * d;
}

template <class Profile>
TraceVector boundary_data_time(const PlaneWave<Profile> &pw, const TraceGrid &grid, double t,
                               int order = 0)
{
  require_te(pw.polarization);
  TraceVector g = TraceVector::zeros(grid);
  for (int k = 0; k < grid.N(); k++)
  {
    g.values[k] = boundary_data_point(pw, grid.x(k), t, order);
  }
  return g;
}

// int_{t0}^{t1} exp(-s t) f(t) dt by adaptive Gauss-Kronrod on the real and imaginary parts.
template <class F>
cplx laplace_integral(F &&f, cplx s, double t0, double t1, double tol = 1e-10)
{
  if (t1 <= t0)
  {
    return 0.0;
  }
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  double err_re = 0.0, err_im = 0.0, l1_re = 0.0, l1_im = 0.0;
  const double re = GK::integrate([&](double t) { return (std::exp(-s * t) * f(t)).real(); },
                                  t0, t1, 20, tol, &err_re, &l1_re);
  const double im = GK::integrate([&](double t) { return (std::exp(-s * t) * f(t)).imag(); },
                                  t0, t1, 20, tol, &err_im, &l1_im);
  const double scale = std::max({1e-300, l1_re, l1_im});
  verify(err_re <= 1e3 * tol * scale && err_im <= 1e3 * tol * scale, ErrorKind::QuadratureFailure,
         "Laplace quadrature did not converge");
  return {re, im};
}

// Laplace transform of the boundary data at each trace sample.
template <class Profile>
TraceVector boundary_data_freq(const PlaneWave<Profile> &pw, const TraceGrid &grid, cplx s)
{
  require_te(pw.polarization);
  check_half_plane(s);
  const auto [lo, hi] = pw.profile.support();
  TraceVector g = TraceVector::zeros(grid);
  for (int k = 0; k < grid.N(); k++)
  {
    const double x = grid.x(k);
    const double shift = pw.c1() * x;
    g.values[k] = laplace_integral([&](double t) { return boundary_data_point(pw, x, t); }, s,
                                   std::max(0.0, lo - shift), std::max(0.0, hi - shift));
  }
  return g;
}

// Largest |g| over t <= 0 at the horizontal extent of a scene (checked on a dense sample).
template <class Profile>
double causality_defect(const PlaneWave<Profile> &pw, double x_lo, double x_hi)
{
  const auto [lo, hi] = pw.profile.support();
  const double span = std::max(1.0, hi - lo);
  double worst = 0.0;
  for (double x : {x_lo, x_hi})
  {
    for (int i = 0; i <= 4000; i++)
    {
      const double t = -span * i / 4000.0;
      worst = std::max(worst, std::abs(pw.profile.value(t + pw.c1() * x)));
    }
  }
  return worst;
}

}  // namespace cavity_td

#endif  // CAVITY_TD_INCIDENT_HPP
