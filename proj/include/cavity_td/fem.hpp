// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_FEM_HPP
#define CAVITY_TD_FEM_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "cavity_td/error.hpp"
#include "cavity_td/scene.hpp"
#include "cavity_td/trace.hpp"

namespace cavity_td
{

using SpMat = Eigen::SparseMatrix<double>;
using SpMatC = Eigen::SparseMatrix<cplx>;

//
// P1 matrices of one cavity. "Full" matrices act on all mesh vertices; the unqualified
// ones act on the free (non-wall) vertices only.
//
struct FemMatrices
{
  SpMat M_full, K_full;   // eps-weighted mass, mu^{-1}-weighted stiffness
  SpMat M, K;             // after wall elimination
  SpMat M0, K0;           // unit-weight mass and stiffness (norms), after elimination
  std::vector<int> free_index;     // vertex -> free dof, -1 on walls
  std::vector<int> free_vertices;  // free dof -> vertex
  SpMat R;                          // trace samples <- free dofs (linear interpolation)
  int cavity = -1;                  // aperture index on the trace grid

  int dofs() const { return static_cast<int>(free_vertices.size()); }
};

namespace detail
{

// Edge-midpoint rule: exact for quadratics on a triangle.
inline void element_matrices(const Mesh &mesh, std::size_t t, const MaterialField &eps,
                             const MaterialField &mu, double mass[3][3], double stiff[3][3],
                             double mass0[3][3], double stiff0[3][3])
{
  const auto &tri = mesh.triangles[t];
  const Point &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]], &c = mesh.vertices[tri[2]];
  const double area = mesh.signed_area(t);
  verify(area > 0.0, ErrorKind::SingularElement,
         "triangle " + std::to_string(t) + " has non-positive area");
  // Gradients of the barycentric coordinates.
  const double gx[3] = {(b.y - c.y) / (2 * area), (c.y - a.y) / (2 * area), (a.y - b.y) / (2 * area)};
  const double gy[3] = {(c.x - b.x) / (2 * area), (a.x - c.x) / (2 * area), (b.x - a.x) / (2 * area)};
  const Point mid[3] = {{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)},
                        {0.5 * (b.x + c.x), 0.5 * (b.y + c.y)},
                        {0.5 * (c.x + a.x), 0.5 * (c.y + a.y)}};
  // Basis values at the midpoints: edge q joins local vertices q and q+1.
  const double phi[3][3] = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
  double eps_q[3], inv_mu_q[3], inv_mu_sum = 0.0;
  for (int q = 0; q < 3; q++)
  {
    eps_q[q] = eps(mid[q].x, mid[q].y);
    inv_mu_q[q] = 1.0 / mu(mid[q].x, mid[q].y);
    inv_mu_sum += inv_mu_q[q];
  }
  for (int i = 0; i < 3; i++)
  {
    for (int j = 0; j < 3; j++)
    {
      double m = 0.0, m0 = 0.0;
      for (int q = 0; q < 3; q++)
      {
        m += eps_q[q] * phi[q][i] * phi[q][j];
        m0 += phi[q][i] * phi[q][j];
      }
      mass[i][j] = m * area / 3.0;
      mass0[i][j] = m0 * area / 3.0;
      const double grad = (gx[i] * gx[j] + gy[i] * gy[j]) * area;
      stiff[i][j] = grad * inv_mu_sum / 3.0;
      stiff0[i][j] = grad;
    }
  }
}

inline SpMat eliminate(const SpMat &full, const std::vector<int> &free_vertices)
{
  const int n = static_cast<int>(free_vertices.size());
  std::vector<int> index(full.rows(), -1);
  for (int i = 0; i < n; i++)
  {
    index[free_vertices[i]] = i;
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (int col = 0; col < full.outerSize(); col++)
  {
    for (SpMat::InnerIterator it(full, col); it; ++it)
    {
      const int r = index[it.row()], c = index[it.col()];
      if (r >= 0 && c >= 0)
      {
        trip.emplace_back(r, c, it.value());
      }
    }
  }
  SpMat out(n, n);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

}  // namespace detail

// Mass and stiffness matrices of one cavity with walls eliminated symmetrically.
inline FemMatrices assemble(const Mesh &mesh, const CavitySpec &cavity)
{
  const int nv = static_cast<int>(mesh.vertices.size());
  std::vector<Eigen::Triplet<double>> tm, tk, tm0, tk0;
  tm.reserve(9 * mesh.triangles.size());
  tk.reserve(9 * mesh.triangles.size());
  tm0.reserve(9 * mesh.triangles.size());
  tk0.reserve(9 * mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); t++)
  {
    double m[3][3], k[3][3], m0[3][3], k0[3][3];
    detail::element_matrices(mesh, t, cavity.epsilon, cavity.mu, m, k, m0, k0);
    for (int i = 0; i < 3; i++)
    {
      for (int j = 0; j < 3; j++)
      {
        const int r = mesh.triangles[t][i], c = mesh.triangles[t][j];
        tm.emplace_back(r, c, m[i][j]);
        tk.emplace_back(r, c, k[i][j]);
        tm0.emplace_back(r, c, m0[i][j]);
        tk0.emplace_back(r, c, k0[i][j]);
      }
    }
  }
  FemMatrices fem;
  fem.M_full.resize(nv, nv);
  fem.K_full.resize(nv, nv);
  SpMat M0_full(nv, nv), K0_full(nv, nv);
  fem.M_full.setFromTriplets(tm.begin(), tm.end());
  fem.K_full.setFromTriplets(tk.begin(), tk.end());
  M0_full.setFromTriplets(tm0.begin(), tm0.end());
  K0_full.setFromTriplets(tk0.begin(), tk0.end());

  const auto wall = mesh.wall_mask();
  fem.free_index.assign(nv, -1);
  for (int v = 0; v < nv; v++)
  {
    if (!wall[v])
    {
      fem.free_index[v] = fem.dofs();
      fem.free_vertices.push_back(v);
    }
  }
  fem.M = detail::eliminate(fem.M_full, fem.free_vertices);
  fem.K = detail::eliminate(fem.K_full, fem.free_vertices);
  fem.M0 = detail::eliminate(M0_full, fem.free_vertices);
  fem.K0 = detail::eliminate(K0_full, fem.free_vertices);
  return fem;
}

// Linear interpolation from the aperture nodes of a mesh to the trace samples of
// aperture j. Wall (endpoint) nodes carry u = 0 and are dropped.
inline SpMat aperture_restriction(const Mesh &mesh, const FemMatrices &fem, const TraceGrid &grid,
                                  int j)
{
  verify(j >= 0 && static_cast<std::size_t>(j) < grid.cavities(), ErrorKind::IndexError,
         "aperture index out of range");
  const auto &nodes = mesh.aperture_nodes;
  std::vector<Eigen::Triplet<double>> trip;
  std::size_t p = 0;
  for (int k = 0; k < grid.N(); k++)
  {
    if (!grid.in(j, k))
    {
      continue;
    }
    const double x = grid.x(k);
    while (p + 2 < nodes.size() && mesh.vertices[nodes[p + 1]].x < x)
    {
      p++;
    }
    const double x0 = mesh.vertices[nodes[p]].x, x1 = mesh.vertices[nodes[p + 1]].x;
    verify(x >= x0 && x <= x1, ErrorKind::DimensionMismatch,
           "trace sample outside the meshed aperture");
    const double theta = (x - x0) / (x1 - x0);
    const int d0 = fem.free_index[nodes[p]], d1 = fem.free_index[nodes[p + 1]];
    if (d0 >= 0)
    {
      trip.emplace_back(k, d0, 1.0 - theta);
    }
    if (d1 >= 0)
    {
      trip.emplace_back(k, d1, theta);
    }
  }
  SpMat R(grid.N(), fem.dofs());
  R.setFromTriplets(trip.begin(), trip.end());
  return R;
}

inline FemMatrices assemble(const Mesh &mesh, const CavitySpec &cavity, const TraceGrid &grid, int j)
{
  FemMatrices fem = assemble(mesh, cavity);
  fem.R = aperture_restriction(mesh, fem, grid, j);
  fem.cavity = j;
  return fem;
}

//
// Everything that does not depend on s: scene, meshes, per-cavity matrices, trace grid,
// and the layout of the stacked unknown vector.
//
struct Discretization
{
  Scene scene;
  std::vector<Mesh> meshes;
  TraceGrid grid;
  std::vector<FemMatrices> fem;
  std::vector<int> offsets;  // offsets[j] = first stacked dof of cavity j; back() = total

  Discretization(Scene sc, std::vector<Mesh> ms, TraceGrid g)
    : scene(std::move(sc)), meshes(std::move(ms)), grid(std::move(g))
  {
    verify(meshes.size() == scene.size() && grid.cavities() == scene.size(),
           ErrorKind::DimensionMismatch, "scene, meshes and trace grid disagree on cavity count");
    offsets.push_back(0);
    for (std::size_t j = 0; j < scene.size(); j++)
    {
      fem.push_back(assemble(meshes[j], scene.cavities[j], grid, static_cast<int>(j)));
      offsets.push_back(offsets.back() + fem.back().dofs());
    }
  }

  int dofs() const { return offsets.back(); }
  std::size_t cavities() const { return scene.size(); }

  template <class Vec>
  auto block(Vec &u, std::size_t j) const
  {
    return u.segment(offsets[j], offsets[j + 1] - offsets[j]);
  }

  // Stacked block-diagonal matrix from a per-cavity member.
  SpMat stacked(SpMat FemMatrices::*member) const
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t j = 0; j < cavities(); j++)
    {
      const SpMat &A = fem[j].*member;
      for (int col = 0; col < A.outerSize(); col++)
      {
        for (SpMat::InnerIterator it(A, col); it; ++it)
        {
          trip.emplace_back(offsets[j] + it.row(), offsets[j] + it.col(), it.value());
        }
      }
    }
    SpMat out(dofs(), dofs());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  }

  // Stacked restriction: N x dofs, rows of distinct apertures never overlap.
  SpMat restriction() const
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t j = 0; j < cavities(); j++)
    {
      const SpMat &R = fem[j].R;
      for (int col = 0; col < R.outerSize(); col++)
      {
        for (SpMat::InnerIterator it(R, col); it; ++it)
        {
          trip.emplace_back(it.row(), offsets[j] + it.col(), it.value());
        }
      }
    }
    SpMat out(grid.N(), dofs());
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
  }

  // Material bounds over all cavities: {eps_min, eps_max, mu_min, mu_max}.
  std::array<double, 4> material_bounds() const
  {
    std::array<double, 4> b{std::numeric_limits<double>::infinity(), 0.0,
                            std::numeric_limits<double>::infinity(), 0.0};
    for (const auto &cav : scene.cavities)
    {
      const auto box = cav.box();
      const Interval e = cav.epsilon.bounds(box[0], box[1], box[2], box[3]);
      const Interval m = cav.mu.bounds(box[0], box[1], box[2], box[3]);
      b[0] = std::min(b[0], e.lo);
      b[1] = std::max(b[1], e.hi);
      b[2] = std::min(b[2], m.lo);
      b[3] = std::max(b[3], m.hi);
    }
    return b;
  }
};

enum class Ordering
{
  Colamd,
  Natural
};

struct SystemOptions
{
  bool coupled = true;     // false: each aperture sees only its own trace
  double dtn_scale = 1.0;  // 0 removes the boundary term (tests)
};

namespace detail
{

// Dense aperture block sum_{k,l} R_{k a} B_{kl} R_{l b} over the samples that carry a
// nonzero row of R. With coupled == false, pairs from distinct apertures are skipped.
struct ApertureBlock
{
  std::vector<int> dofs;   // global dof of each local index
  Eigen::MatrixXcd block;  // R^T B R restricted to those dofs
};

inline ApertureBlock aperture_block(const std::vector<const SpMat *> &Rs,
                                    const std::vector<int> &offsets,
                                    const Eigen::VectorXcd &kernel, bool coupled)
{
  struct Row
  {
    int sample;
    int owner;
    std::array<std::pair<int, double>, 2> entries;
    int count = 0;
  };
  const int N = static_cast<int>(kernel.size());
  std::vector<int> local(offsets.back(), -1);
  ApertureBlock out;
  std::vector<Row> rows;
  for (std::size_t j = 0; j < Rs.size(); j++)
  {
    const SpMat Rt = Rs[j]->transpose();  // column per sample
    for (int k = 0; k < Rt.outerSize(); k++)
    {
      Row row{k, static_cast<int>(j), {}, 0};
      for (SpMat::InnerIterator it(Rt, k); it; ++it)
      {
        const int dof = offsets[j] + it.row();
        if (local[dof] < 0)
        {
          local[dof] = static_cast<int>(out.dofs.size());
          out.dofs.push_back(dof);
        }
        row.entries[row.count++] = {local[dof], it.value()};
      }
      if (row.count > 0)
      {
        rows.push_back(row);
      }
    }
  }
  const int n = static_cast<int>(out.dofs.size());
  out.block = Eigen::MatrixXcd::Zero(n, n);
  for (const Row &rk : rows)
  {
    for (const Row &rl : rows)
    {
      if (!coupled && rk.owner != rl.owner)
      {
        continue;
      }
      const cplx b = kernel[((rk.sample - rl.sample) % N + N) % N];
      for (int a = 0; a < rk.count; a++)
      {
        for (int c = 0; c < rl.count; c++)
        {
          out.block(rk.entries[a].first, rl.entries[c].first) +=
            rk.entries[a].second * rl.entries[c].second * b;
        }
      }
    }
  }
  return out;
}

inline SpMatC combine(cplx s, const SpMat &M, const SpMat &K, const ApertureBlock &ap, cplx dtn_coef)
{
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(M.nonZeros() + K.nonZeros() + ap.block.size());
  for (int col = 0; col < M.outerSize(); col++)
  {
    for (SpMat::InnerIterator it(M, col); it; ++it)
    {
      trip.emplace_back(it.row(), it.col(), s * it.value());
    }
  }
  for (int col = 0; col < K.outerSize(); col++)
  {
    for (SpMat::InnerIterator it(K, col); it; ++it)
    {
      trip.emplace_back(it.row(), it.col(), it.value() / s);
    }
  }
  const int n = static_cast<int>(ap.dofs.size());
  for (int a = 0; a < n; a++)
  {
    for (int b = 0; b < n; b++)
    {
      trip.emplace_back(ap.dofs[a], ap.dofs[b], dtn_coef * ap.block(a, b));
    }
  }
  SpMatC A(M.rows(), M.cols());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

}  // namespace detail

//
// Discrete form  a(u, v) = sum_j int (s mu)^{-1} grad u . grad v + s eps u v
//                          - <(s mu0)^{-1} B u~, v~>_Gamma
// as the matrix  s M + K / s - (dx / (s mu0)) R^T B_h R  with a direct factorization.
//
class SystemOperator
{
public:
  SystemOperator(cplx s, SpMatC A, Ordering ordering = Ordering::Colamd)
    : s_(s), A_(std::move(A)), ordering_(ordering)
  {
  }

  cplx s() const { return s_; }
  const SpMatC &matrix() const { return A_; }
  int dofs() const { return static_cast<int>(A_.rows()); }

  Eigen::VectorXcd apply(const Eigen::VectorXcd &u) const
  {
    verify(u.size() == A_.cols(), ErrorKind::DimensionMismatch, "operator/vector size mismatch");
    return A_ * u;
  }

  // Factorizes on first use; later solves reuse the factorization.
  Eigen::VectorXcd solve(const Eigen::VectorXcd &b) const
  {
    verify(b.size() == A_.rows(), ErrorKind::DimensionMismatch, "operator/rhs size mismatch");
    if (ordering_ == Ordering::Colamd)
    {
      return solve_with(colamd_, b);
    }
    return solve_with(natural_, b);
  }

  // Extended-precision solve: iterative refinement on the double factorization with
  // residuals in long double.
  VectorXcl solve_refined(const VectorXcl &b, int sweeps = 4) const
  {
    verify(b.size() == A_.rows(), ErrorKind::DimensionMismatch, "operator/rhs size mismatch");
    if (!A_long_)
    {
      A_long_ = std::make_unique<Eigen::SparseMatrix<lcplx>>(A_.cast<lcplx>());
    }
    VectorXcl x = solve(b.cast<cplx>()).cast<lcplx>();
    const long double bn = b.norm();
    for (int k = 0; k < sweeps && bn > 0.0L; k++)
    {
      const VectorXcl r = b - (*A_long_) * x;
      if (r.norm() <= 1e-19L * bn)
      {
        break;
      }
      x += solve(r.cast<cplx>()).cast<lcplx>();
    }
    return x;
  }

private:
  template <class Solver>
  Eigen::VectorXcd solve_with(std::unique_ptr<Solver> &lu, const Eigen::VectorXcd &b) const
  {
    if (!lu)
    {
      lu = std::make_unique<Solver>();
      lu->analyzePattern(A_);
      lu->factorize(A_);
      if (lu->info() != Eigen::Success)
      {
        lu.reset();
        throw Error(ErrorKind::FactorizationFailure,
                    "sparse LU failed at s = (" + std::to_string(s_.real()) + ", " +
                      std::to_string(s_.imag()) + ")");
      }
    }
    return lu->solve(b);
  }

  cplx s_;
  SpMatC A_;
  Ordering ordering_;
  mutable std::unique_ptr<Eigen::SparseLU<SpMatC, Eigen::COLAMDOrdering<int>>> colamd_;
  mutable std::unique_ptr<Eigen::SparseLU<SpMatC, Eigen::NaturalOrdering<int>>> natural_;
  mutable std::unique_ptr<Eigen::SparseMatrix<lcplx>> A_long_;
};

// Coupled operator over all cavities; cross-cavity blocks come only from the shared
// boundary operator on the union trace.
inline SystemOperator build_system(const Discretization &disc, cplx s, SystemOptions opt = {},
                                   Ordering ordering = Ordering::Colamd)
{
  check_half_plane(s);
  const DtnSymbol sym{disc.scene.c()};
  const Eigen::VectorXcd kernel = dtn_kernel(disc.grid, s, sym);
  std::vector<const SpMat *> Rs;
  for (const auto &f : disc.fem)
  {
    Rs.push_back(&f.R);
  }
  const auto ap = detail::aperture_block(Rs, disc.offsets, kernel, opt.coupled);
  const cplx coef = -opt.dtn_scale * disc.grid.dx() / (s * disc.scene.mu0);
  return SystemOperator(s, detail::combine(s, disc.stacked(&FemMatrices::M),
                                           disc.stacked(&FemMatrices::K), ap, coef),
                        ordering);
}

inline SystemOperator build_system(const Scene &scene, const std::vector<Mesh> &meshes,
                                   const TraceGrid &grid, cplx s)
{
  return build_system(Discretization(scene, meshes, grid), s);
}

// The single-cavity form a1 assembled directly from one cavity's matrices.
inline SystemOperator build_single_cavity_system(const FemMatrices &fem, const TraceGrid &grid,
                                                 cplx s, double c, double mu0)
{
  check_half_plane(s);
  const Eigen::VectorXcd kernel = dtn_kernel(grid, s, DtnSymbol{c});
  const auto ap = detail::aperture_block({&fem.R}, {0, fem.dofs()}, kernel, true);
  const cplx coef = -grid.dx() / (s * mu0);
  return SystemOperator(s, detail::combine(s, fem.M, fem.K, ap, coef));
}

// Load vector b_i = int_Gamma I(g) phi_i over every aperture, I being linear interpolation
// of the trace samples; returns the stacked free-dof vector.
inline Eigen::VectorXcd aperture_load_full(const Mesh &mesh, const TraceVector &g,
                                           const TraceGrid &grid)
{
  check_grid(g, grid);
  const double dx = grid.dx();
  auto interp = [&](double x)
  {
    const double u = (x + grid.L() / 2) / dx;
    const double fl = std::floor(u);
    const double frac = u - fl;
    const int N = grid.N();
    const int k0 = ((static_cast<int>(fl) % N) + N) % N;
    const int k1 = (k0 + 1) % N;
    return (1.0 - frac) * g.values[k0] + frac * g.values[k1];
  };
  Eigen::VectorXcd b = Eigen::VectorXcd::Zero(static_cast<int>(mesh.vertices.size()));
  const auto &nodes = mesh.aperture_nodes;
  for (std::size_t p = 0; p + 1 < nodes.size(); p++)
  {
    const double x0 = mesh.vertices[nodes[p]].x, x1 = mesh.vertices[nodes[p + 1]].x;
    std::vector<double> cuts{x0};
    const int kfirst = static_cast<int>(std::floor((x0 + grid.L() / 2) / dx)) + 1;
    for (int k = kfirst; grid.x(0) + k * dx < x1; k++)
    {
      cuts.push_back(grid.x(0) + k * dx);
    }
    cuts.push_back(x1);
    for (std::size_t q = 0; q + 1 < cuts.size(); q++)
    {
      const double a = cuts[q], c = cuts[q + 1];
      if (c <= a)
      {
        continue;
      }
      const cplx ga = interp(a), gc = interp(c);
      // phi_p falls linearly from 1 at x0 to 0 at x1; phi_{p+1} = 1 - phi_p.
      const double pa = (x1 - a) / (x1 - x0), pc = (x1 - c) / (x1 - x0);
      const double w = (c - a) / 6.0;
      b[nodes[p]] += w * (2.0 * ga * pa + ga * pc + gc * pa + 2.0 * gc * pc);
      b[nodes[p + 1]] += w * (2.0 * ga * (1 - pa) + ga * (1 - pc) + gc * (1 - pa) + 2.0 * gc * (1 - pc));
    }
  }
  return b;
}

inline Eigen::VectorXcd apply_rhs(const TraceVector &g, const Discretization &disc)
{
  Eigen::VectorXcd b(disc.dofs());
  for (std::size_t j = 0; j < disc.cavities(); j++)
  {
    const Eigen::VectorXcd full = aperture_load_full(disc.meshes[j], g, disc.grid);
    const auto &fv = disc.fem[j].free_vertices;
    for (std::size_t d = 0; d < fv.size(); d++)
    {
      b[disc.offsets[j] + static_cast<int>(d)] = full[fv[d]];
    }
  }
  return b;
}

// Zeroes the blocks of every cavity not listed in keep (an empty list keeps all).
template <class Vec>
void mask_cavities(const Discretization &disc, Vec &b, const std::vector<int> &keep)
{
  if (keep.empty())
  {
    return;
  }
  for (std::size_t j = 0; j < disc.cavities(); j++)
  {
    if (std::find(keep.begin(), keep.end(), static_cast<int>(j)) == keep.end())
    {
      disc.block(b, j).setZero();
    }
  }
}

// Coordinate text export: "row col re im" per stored entry.
inline void write_matrix_coo(std::ostream &out, const SpMatC &A)
{
  out.precision(17);
  for (int col = 0; col < A.outerSize(); col++)
  {
    for (SpMatC::InnerIterator it(A, col); it; ++it)
    {
      out << it.row() << ' ' << it.col() << ' ' << it.value().real() << ' ' << it.value().imag()
          << '\n';
    }
  }
}

}  // namespace cavity_td

#endif  // CAVITY_TD_FEM_HPP
