// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_TRACE_HPP
#define CAVITY_TD_TRACE_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "cavity_td/error.hpp"
#include "cavity_td/scene.hpp"

namespace cavity_td
{

using cplx = std::complex<double>;
using lcplx = std::complex<long double>;
using VectorXcl = Eigen::Matrix<lcplx, Eigen::Dynamic, 1>;

//
// Uniform periodic sampling of the aperture line y = 0 on [-L/2, L/2).
//
// Transform convention (used by every nonlocal operation here and by dtn_dense):
//   U_m = sum_k u_k exp(-2 pi i m k / N),   u_k = (1/N) sum_m U_m exp(2 pi i m k / N),
// with FFT bin m carrying the frequency xi_m = 2 pi m~ / L, m~ = m for m < N/2 and
// m - N otherwise. All multipliers used are even in xi, so the sign of the exponent and
// the half-period phase of x_0 = -L/2 drop out.
//
class TraceGrid
{
public:
  struct Aperture
  {
    double x_a, x_b;
  };

  TraceGrid(double L, int N, std::vector<Aperture> apertures)
    : L_(L), N_(N), apertures_(std::move(apertures))
  {
    verify(L > 0.0, ErrorKind::GridMismatch, "trace grid period must be positive");
    verify(N >= 2 && (N & (N - 1)) == 0, ErrorKind::GridMismatch,
           "trace grid sample count must be a power of two");
    masks_.assign(apertures_.size(), std::vector<std::uint8_t>(N, 0));
    for (std::size_t j = 0; j < apertures_.size(); j++)
    {
      const auto [xa, xb] = apertures_[j];
      verify(xa >= -L / 4 && xb <= L / 4, ErrorKind::GridMismatch,
             "aperture " + std::to_string(j) + " leaves the central half [-L/4, L/4]");
      int count = 0;
      for (int k = 0; k < N; k++)
      {
        const double xk = x(k);
        if (xk > xa && xk < xb)
        {
          masks_[j][k] = 1;
          count++;
        }
      }
      verify(count >= 16, ErrorKind::GridMismatch,
             "aperture " + std::to_string(j) + " holds only " + std::to_string(count) +
               " trace samples (need 16)");
    }
    for (int k = 0; k < N; k++)
    {
      int owners = 0;
      for (const auto &m : masks_)
      {
        owners += m[k];
      }
      verify(owners <= 1, ErrorKind::GridMismatch, "aperture masks overlap");
    }
  }

  double L() const { return L_; }
  int N() const { return N_; }
  double dx() const { return L_ / N_; }
  double x(int k) const { return -L_ / 2 + k * L_ / N_; }
  double xi(int bin) const
  {
    const int m = bin < N_ / 2 ? bin : bin - N_;
    return 2.0 * std::numbers::pi * m / L_;
  }
  std::size_t cavities() const { return apertures_.size(); }
  const Aperture &aperture(std::size_t j) const { return apertures_.at(j); }
  bool in(std::size_t j, int k) const { return masks_[j][k] != 0; }
  bool in_union(int k) const
  {
    for (const auto &m : masks_)
    {
      if (m[k])
      {
        return true;
      }
    }
    return false;
  }

  bool operator==(const TraceGrid &o) const
  {
    return L_ == o.L_ && N_ == o.N_ && masks_ == o.masks_;
  }

private:
  double L_;
  int N_;
  std::vector<Aperture> apertures_;
  std::vector<std::vector<std::uint8_t>> masks_;
};

// Builds a grid for a scene: L is four times the larger of the horizontal extent and the
// largest |x| (or min_period if that is longer), and the spacing resolves both h/2 and 1/20
// of the narrowest aperture.
inline TraceGrid make_trace_grid(const Scene &scene, double h, double min_period = 0.0)
{
  const auto [lo, hi] = scene.extent();
  const double L = std::max(4.0 * std::max({hi - lo, std::abs(lo), std::abs(hi)}), min_period);
  double narrowest = scene.cavities.front().width();
  for (const auto &cav : scene.cavities)
  {
    narrowest = std::min(narrowest, cav.width());
  }
  const double spacing = std::min(h / 2.0, narrowest / 20.0);
  int N = 64;
  while (L / N > spacing)
  {
    N *= 2;
  }
  std::vector<TraceGrid::Aperture> aps;
  for (const auto &cav : scene.cavities)
  {
    aps.push_back({cav.x_a, cav.x_b});
  }
  return TraceGrid(L, N, std::move(aps));
}

inline TraceGrid make_trace_grid(const Scene &scene, double L, int N)
{
  std::vector<TraceGrid::Aperture> aps;
  for (const auto &cav : scene.cavities)
  {
    aps.push_back({cav.x_a, cav.x_b});
  }
  return TraceGrid(L, N, std::move(aps));
}

enum class Support
{
  FullLine,
  Cavity,
  Union
};

struct TraceVector
{
  Eigen::VectorXcd values;
  Support support = Support::FullLine;
  int cavity = -1;  // for Support::Cavity

  static TraceVector zeros(const TraceGrid &grid, Support sup = Support::FullLine, int j = -1)
  {
    return {Eigen::VectorXcd::Zero(grid.N()), sup, j};
  }
};

inline void check_grid(const TraceVector &u, const TraceGrid &grid)
{
  verify(u.values.size() == grid.N(), ErrorKind::GridMismatch,
         "trace vector has " + std::to_string(u.values.size()) + " samples, grid has " +
           std::to_string(grid.N()));
}

inline void check_half_plane(cplx s)
{
  verify(s.real() > 0.0, ErrorKind::DomainError,
         "Laplace parameter needs Re s > 0 (got " + std::to_string(s.real()) + ")");
}

// Root of xi^2 + s^2/c^2 with strictly negative real part.
inline cplx beta(double xi, cplx s, double c)
{
  check_half_plane(s);
  verify(c > 0.0, ErrorKind::DomainError, "light speed must be positive");
  const cplx sc = s / c;
  const cplx root = std::sqrt(xi * xi + sc * sc);
  verify(root.real() != 0.0, ErrorKind::DomainError, "symbol root on the branch cut");
  return -root;
}

struct DtnSymbol
{
  double c = 1.0;
  cplx operator()(double xi, cplx s) const { return beta(xi, s, c); }
};

namespace detail
{

inline Eigen::VectorXcd fft(const Eigen::VectorXcd &u)
{
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(u.size());
  fft.fwd(out, u);
  return out;
}

inline Eigen::VectorXcd ifft(const Eigen::VectorXcd &U)
{
  Eigen::FFT<double> fft;
  Eigen::VectorXcd out(U.size());
  fft.inv(out, U);
  return out;
}

template <class Multiplier>
Eigen::VectorXcd apply_multiplier(const Eigen::VectorXcd &u, const TraceGrid &grid, Multiplier &&m)
{
  Eigen::VectorXcd U = fft(u);
  for (int bin = 0; bin < grid.N(); bin++)
  {
    U[bin] *= m(grid.xi(bin));
  }
  return ifft(U);
}

}  // namespace detail

// Discrete boundary operator: Fourier coefficients multiplied by beta(xi_m, s).
inline TraceVector apply_B(const TraceVector &u, cplx s, const TraceGrid &grid,
                           const DtnSymbol &sym)
{
  check_grid(u, grid);
  check_half_plane(s);
  return {detail::apply_multiplier(u.values, grid, [&](double xi) { return sym(xi, s); }),
          Support::FullLine, -1};
}

// First column of the circulant matrix of apply_B: (B)_{pq} = kernel[(p - q) mod N].
inline Eigen::VectorXcd dtn_kernel(const TraceGrid &grid, cplx s, const DtnSymbol &sym)
{
  TraceVector delta = TraceVector::zeros(grid);
  delta.values[0] = 1.0;
  return apply_B(delta, s, grid, sym).values;
}

// Dense matrix of the discrete boundary operator, summed mode by mode without an FFT.
inline Eigen::MatrixXcd dtn_dense(const TraceGrid &grid, cplx s, const DtnSymbol &sym)
{
  check_half_plane(s);
  const int N = grid.N();
  verify(N <= 1024, ErrorKind::SizeError, "dtn_dense is limited to N <= 1024");
  std::vector<cplx> symbol(N);
  for (int m = 0; m < N; m++)
  {
    symbol[m] = sym(grid.xi(m), s);
  }
  // Entry (p, q) depends on (p - q) mod N only; sum that column directly.
  std::vector<cplx> col(N);
  for (int d = 0; d < N; d++)
  {
    cplx acc = 0.0;
    for (int m = 0; m < N; m++)
    {
      const double phase = 2.0 * std::numbers::pi * static_cast<double>((1LL * m * d) % N) / N;
      acc += symbol[m] * cplx(std::cos(phase), std::sin(phase));
    }
    col[d] = acc / static_cast<double>(N);
  }
  Eigen::MatrixXcd B(N, N);
  for (int p = 0; p < N; p++)
  {
    for (int q = 0; q < N; q++)
    {
      B(p, q) = col[((p - q) % N + N) % N];
    }
  }
  return B;
}

// Zero extension of the part of u on aperture j.
inline TraceVector restrict_to(const TraceVector &u, int j, const TraceGrid &grid)
{
  check_grid(u, grid);
  verify(j >= 0 && static_cast<std::size_t>(j) < grid.cavities(), ErrorKind::IndexError,
         "cavity index " + std::to_string(j) + " out of range");
  TraceVector out = TraceVector::zeros(grid, Support::Cavity, j);
  for (int k = 0; k < grid.N(); k++)
  {
    if (grid.in(j, k))
    {
      out.values[k] = u.values[k];
    }
  }
  return out;
}

// Zero extension of the part of u on the union of apertures.
inline TraceVector restrict_to_union(const TraceVector &u, const TraceGrid &grid)
{
  check_grid(u, grid);
  TraceVector out = TraceVector::zeros(grid, Support::Union);
  for (int k = 0; k < grid.N(); k++)
  {
    if (grid.in_union(k))
    {
      out.values[k] = u.values[k];
    }
  }
  return out;
}

// Row j of the coupled boundary condition: the restriction to aperture j of the
// boundary operator applied to the sum of all zero-extended aperture traces.
inline TraceVector coupled_B_row(const std::vector<TraceVector> &traces, int j, cplx s,
                                 const TraceGrid &grid, const DtnSymbol &sym)
{
  verify(!traces.empty(), ErrorKind::DimensionMismatch, "no traces");
  TraceVector sum = TraceVector::zeros(grid, Support::Union);
  for (const auto &t : traces)
  {
    check_grid(t, grid);
    sum.values += t.values;
  }
  return restrict_to(apply_B(sum, s, grid, sym), j, grid);
}

// Discrete H^nu norm with multiplier (1 + xi^2)^nu; nu = 0 gives the L2 norm on the grid.
inline double trace_norm_weighted(const TraceVector &u, double nu, const TraceGrid &grid)
{
  check_grid(u, grid);
  const Eigen::VectorXcd U = detail::fft(u.values);
  double acc = 0.0;
  for (int bin = 0; bin < grid.N(); bin++)
  {
    const double xi = grid.xi(bin);
    acc += std::pow(1.0 + xi * xi, nu) * std::norm(U[bin]);
  }
  return std::sqrt(acc * grid.L() / (static_cast<double>(grid.N()) * grid.N()));
}

inline double trace_norm(const TraceVector &u, double order, const TraceGrid &grid)
{
  verify(order == 0.5 || order == -0.5, ErrorKind::DomainError,
         "trace norm order must be +1/2 or -1/2");
  return trace_norm_weighted(u, order, grid);
}

// Trapezoidal L2 pairing over aperture j: <u, v>_{Gamma_j} = sum_{k in j} dx u_k conj(v_k).
inline cplx aperture_inner(const TraceVector &u, const TraceVector &v, int j,
                           const TraceGrid &grid)
{
  cplx acc = 0.0;
  for (int k = 0; k < grid.N(); k++)
  {
    if (grid.in(j, k))
    {
      acc += u.values[k] * std::conj(v.values[k]);
    }
  }
  return acc * grid.dx();
}

// D = -Re sum_j sum_i <(s mu0)^{-1} B u_i, u_j>_{Gamma_j}; passivity means D >= 0.
inline double passivity_defect(const std::vector<TraceVector> &traces, cplx s, double mu0,
                               const TraceGrid &grid, const DtnSymbol &sym)
{
  check_half_plane(s);
  verify(traces.size() <= grid.cavities(), ErrorKind::DimensionMismatch,
         "more traces than apertures");
  std::vector<TraceVector> Bu;
  Bu.reserve(traces.size());
  for (const auto &t : traces)
  {
    Bu.push_back(apply_B(t, s, grid, sym));
  }
  cplx acc = 0.0;
  for (std::size_t j = 0; j < traces.size(); j++)
  {
    for (std::size_t i = 0; i < traces.size(); i++)
    {
      acc += aperture_inner(Bu[i], traces[j], static_cast<int>(j), grid);
    }
  }
  return -(acc / (s * mu0)).real();
}

// Scattered field on the line at height y: modes multiplied by exp(beta(xi_m) y).
inline TraceVector propagate_exterior(const TraceVector &trace, cplx s, double y,
                                      const TraceGrid &grid, const DtnSymbol &sym)
{
  check_grid(trace, grid);
  check_half_plane(s);
  verify(y >= 0.0, ErrorKind::DomainError, "exterior height must be non-negative");
  return {detail::apply_multiplier(trace.values, grid,
                                   [&](double xi) { return std::exp(sym(xi, s) * y); }),
          Support::FullLine, -1};
}

// CSV: header "x,re,im", one row per sample, 17 significant digits.
inline void write_trace_csv(std::ostream &out, const TraceVector &u, const TraceGrid &grid)
{
  check_grid(u, grid);
  out.precision(17);
  out << "x,re,im\n";
  for (int k = 0; k < grid.N(); k++)
  {
    out << grid.x(k) << ',' << u.values[k].real() << ',' << u.values[k].imag() << '\n';
  }
}

inline TraceVector read_trace_csv(std::istream &in, const TraceGrid &grid)
{
  std::string line;
  std::getline(in, line);
  TraceVector u = TraceVector::zeros(grid);
  int k = 0;
  while (std::getline(in, line) && !line.empty())
  {
    verify(k < grid.N(), ErrorKind::GridMismatch, "trace CSV has more rows than grid samples");
    std::istringstream row(line);
    double x = 0.0, re = 0.0, im = 0.0;
    char comma = 0;
    row >> x >> comma >> re >> comma >> im;
    verify(!row.fail(), ErrorKind::ConfigError, "malformed trace CSV row: " + line);
    verify(std::abs(x - grid.x(k)) <= 1e-12 * grid.L(), ErrorKind::GridMismatch,
           "trace CSV abscissa does not match the grid");
    u.values[k++] = cplx(re, im);
  }
  verify(k == grid.N(), ErrorKind::GridMismatch, "trace CSV has fewer rows than grid samples");
  return u;
}

inline void write_symbol_csv(std::ostream &out, cplx s, const TraceGrid &grid,
                             const DtnSymbol &sym)
{
  out.precision(17);
  out << "xi,re,im\n";
  for (int bin = 0; bin < grid.N(); bin++)
  {
    const cplx b = sym(grid.xi(bin), s);
    out << grid.xi(bin) << ',' << b.real() << ',' << b.imag() << '\n';
  }
}

}  // namespace cavity_td

#endif  // CAVITY_TD_TRACE_HPP
