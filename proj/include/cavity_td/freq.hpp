// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_FREQ_HPP
#define CAVITY_TD_FREQ_HPP

#include <chrono>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cavity_td/error.hpp"
#include "cavity_td/fem.hpp"
#include "cavity_td/trace.hpp"

namespace cavity_td
{

struct FrequencySolution
{
  cplx s;
  Eigen::VectorXcd u;  // stacked free dofs, cavity j at disc.offsets[j]
  double residual = 0.0;
  double wall_time = 0.0;  // seconds
};

// Values on every mesh vertex of cavity j, zero on the walls.
template <class Vec>
Eigen::Matrix<typename Vec::Scalar, Eigen::Dynamic, 1> nodal_field(const Discretization &disc,
                                                                   const Vec &u, std::size_t j)
{
  using Out = Eigen::Matrix<typename Vec::Scalar, Eigen::Dynamic, 1>;
  const auto &fem = disc.fem[j];
  Out full = Out::Zero(static_cast<int>(fem.free_index.size()));
  for (int d = 0; d < fem.dofs(); d++)
  {
    full[fem.free_vertices[d]] = u[disc.offsets[j] + d];
  }
  return full;
}

// sqrt(u^H A u) for a symmetric positive semi-definite real A.
template <class Vec>
double energy_norm(const SpMat &A, const Vec &u)
{
  const double v = std::real(u.dot(A * u));
  return std::sqrt(std::max(0.0, v));
}

namespace detail
{

inline double relative_residual(const SystemOperator &op, const Eigen::VectorXcd &u,
                                const Eigen::VectorXcd &b)
{
  const double nb = b.norm();
  return nb == 0.0 ? (op.apply(u)).norm() : (op.apply(u) - b).norm() / nb;
}

}  // namespace detail

// Load for data g at parameter s: (s mu0)^{-1} int_Gamma g phi_i.
inline Eigen::VectorXcd frequency_load(const Discretization &disc, cplx s, const TraceVector &g)
{
  return apply_rhs(g, disc) / (s * disc.scene.mu0);
}

//
// Direct solver with one factorization per s, reused across right-hand sides. Distinct
// s-values may be solved from different threads; solves at one s are serialized.
//
class FrequencySolver
{
public:
  explicit FrequencySolver(const Discretization &disc, SystemOptions opt = {},
                           Ordering ordering = Ordering::Colamd)
    : disc_(disc), opt_(opt), ordering_(ordering)
  {
  }

  const Discretization &discretization() const { return disc_; }

  FrequencySolution solve(cplx s, const TraceVector &g) const
  {
    check_half_plane(s);
    check_grid(g, disc_.grid);
    return solve_load(s, frequency_load(disc_, s, g));
  }

  FrequencySolution solve_load(cplx s, const Eigen::VectorXcd &b) const
  {
    check_half_plane(s);
    const auto start = std::chrono::steady_clock::now();
    Entry &entry = lookup(s);
    std::lock_guard<std::mutex> lock(entry.mutex);
    if (!entry.op)
    {
      entry.op = std::make_unique<SystemOperator>(build_system(disc_, s, opt_, ordering_));
    }
    FrequencySolution sol{s, Eigen::VectorXcd::Zero(b.size()), 0.0, 0.0};
    if (b.squaredNorm() > 0.0)
    {
      sol.u = entry.op->solve(b);
      sol.residual = detail::relative_residual(*entry.op, sol.u, b);
    }
    verify(sol.residual <= 1e-10, ErrorKind::FactorizationFailure,
           "direct solve residual " + std::to_string(sol.residual) + " at s = (" +
             std::to_string(s.real()) + ", " + std::to_string(s.imag()) + ")");
    sol.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return sol;
  }

  // Drops the factorization kept for s.
  void release(cplx s) const
  {
    std::lock_guard<std::mutex> lock(map_mutex_);
    cache_.erase(key(s));
  }

  std::size_t cached() const
  {
    std::lock_guard<std::mutex> lock(map_mutex_);
    return cache_.size();
  }

private:
  struct Entry
  {
    std::mutex mutex;
    std::unique_ptr<SystemOperator> op;
  };

  static std::pair<double, double> key(cplx s) { return {s.real(), s.imag()}; }

  Entry &lookup(cplx s) const
  {
    std::lock_guard<std::mutex> lock(map_mutex_);
    auto &slot = cache_[key(s)];
    if (!slot)
    {
      slot = std::make_unique<Entry>();
    }
    return *slot;
  }

  const Discretization &disc_;
  SystemOptions opt_;
  Ordering ordering_;
  mutable std::mutex map_mutex_;
  mutable std::map<std::pair<double, double>, std::unique_ptr<Entry>> cache_;
};

inline FrequencySolution solve_frequency(const Discretization &disc, cplx s, const TraceVector &g,
                                         SystemOptions opt = {},
                                         Ordering ordering = Ordering::Colamd)
{
  return FrequencySolver(disc, opt, ordering).solve(s, g);
}

struct EstimateReport
{
  double s1 = 0.0, s2 = 0.0;
  double lhs = 0.0, rhs = 0.0, ratio = 0.0;
};

// lhs = |grad u| + |s u|, rhs = |s| / s1 * |g|_{-1/2} with g zero-extended from the apertures.
inline EstimateReport estimate_report(const FrequencySolution &sol, const TraceVector &g,
                                      const Discretization &disc)
{
  EstimateReport r;
  r.s1 = sol.s.real();
  r.s2 = sol.s.imag();
  const SpMat M0 = disc.stacked(&FemMatrices::M0);
  const SpMat K0 = disc.stacked(&FemMatrices::K0);
  r.lhs = energy_norm(K0, sol.u) + std::abs(sol.s) * energy_norm(M0, sol.u);
  r.rhs = std::abs(sol.s) / r.s1 * trace_norm(restrict_to_union(g, disc.grid), -0.5, disc.grid);
  r.ratio = r.rhs == 0.0 ? 0.0 : r.lhs / r.rhs;
  return r;
}

inline void write_solution_csv(std::ostream &out, const Discretization &disc,
                               const FrequencySolution &sol, std::size_t j)
{
  out.precision(17);
  out << "x,y,re,im\n";
  const Eigen::VectorXcd full = nodal_field(disc, sol.u, j);
  const auto &verts = disc.meshes[j].vertices;
  for (std::size_t v = 0; v < verts.size(); v++)
  {
    out << verts[v].x << ',' << verts[v].y << ',' << full[v].real() << ',' << full[v].imag()
        << '\n';
  }
}

inline void write_estimate_csv(std::ostream &out, const std::vector<EstimateReport> &rows)
{
  out.precision(17);
  out << "s1,s2,lhs,rhs,ratio\n";
  for (const auto &r : rows)
  {
    out << r.s1 << ',' << r.s2 << ',' << r.lhs << ',' << r.rhs << ',' << r.ratio << '\n';
  }
}

}  // namespace cavity_td

#endif  // CAVITY_TD_FREQ_HPP
