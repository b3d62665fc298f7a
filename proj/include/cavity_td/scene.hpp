// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_SCENE_HPP
#define CAVITY_TD_SCENE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cavity_td/error.hpp"
#include "cavity_td/expression.hpp"

namespace cavity_td
{

using json = nlohmann::json;

struct Point
{
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point &) const = default;
};

enum class Polarization
{
  TE,
  TM
};

inline std::string to_string(Polarization p) { return p == Polarization::TE ? "TE" : "TM"; }

//
// A material coefficient on one cavity: either a constant or an expression in (x, y),
// optionally with declared bounds [min, max] that the field must respect.
//
class MaterialField
{
public:
  MaterialField(double value = 1.0) : value_(value) {}
  explicit MaterialField(Expression expr, std::optional<Interval> declared = std::nullopt)
    : value_(std::move(expr)), declared_(declared)
  {
  }

  bool is_constant() const { return std::holds_alternative<double>(value_); }
  double constant() const { return std::get<double>(value_); }
  const std::optional<Interval> &declared() const { return declared_; }
  void set_declared(std::optional<Interval> d) { declared_ = d; }

  double operator()(double x, double y) const
  {
    if (is_constant())
    {
      return constant();
    }
    return std::get<Expression>(value_)(x, y);
  }

  // Enclosure of the field over a box; exact for constants.
  Interval bounds(double x0, double x1, double y0, double y1) const
  {
    if (is_constant())
    {
      return Interval::point(constant());
    }
    return std::get<Expression>(value_).bounds(x0, x1, y0, y1);
  }

  json to_json() const
  {
    if (is_constant() && !declared_)
    {
      return constant();
    }
    json j;
    if (is_constant())
    {
      j["value"] = constant();
    }
    else
    {
      j["expr"] = std::get<Expression>(value_).source();
    }
    if (declared_)
    {
      j["min"] = declared_->lo;
      j["max"] = declared_->hi;
    }
    return j;
  }

  static MaterialField from_json(const json &j)
  {
    if (j.is_number())
    {
      return MaterialField(j.get<double>());
    }
    if (j.is_string())
    {
      return MaterialField(Expression(j.get<std::string>()));
    }
    verify(j.is_object(), ErrorKind::ConfigError,
           "material must be a number, an expression string, or an object");
    MaterialField f = j.contains("expr") ? MaterialField(Expression(j.at("expr").get<std::string>()))
                                         : MaterialField(j.at("value").get<double>());
    if (j.contains("min") || j.contains("max"))
    {
      verify(j.contains("min") && j.contains("max"), ErrorKind::ConfigError,
             "material bounds need both min and max");
      f.set_declared(Interval{j.at("min").get<double>(), j.at("max").get<double>()});
    }
    return f;
  }

  bool operator==(const MaterialField &o) const
  {
    if (is_constant() != o.is_constant())
    {
      return false;
    }
    const bool same_value = is_constant()
                              ? constant() == o.constant()
                              : std::get<Expression>(value_).source() ==
                                  std::get<Expression>(o.value_).source();
    const bool same_bounds = declared_.has_value() == o.declared_.has_value() &&
                             (!declared_ || (declared_->lo == o.declared_->lo &&
                                             declared_->hi == o.declared_->hi));
    return same_value && same_bounds;
  }

private:
  std::variant<double, Expression> value_;
  std::optional<Interval> declared_;
};

//
// One cavity below the ground line. Either an axis-aligned rectangle
// [x_a, x_b] x [-depth, 0] or a polygon whose only edge on y = 0 is the aperture.
//
struct CavitySpec
{
  int id = 0;
  double x_a = 0.0;
  double x_b = 1.0;
  double depth = 1.0;            // rectangles only
  std::vector<Point> vertices;   // polygons only, counter-clockwise
  std::string mesh_file;         // polygons only
  MaterialField epsilon{1.0};
  MaterialField mu{1.0};
  double collar = 0.0;           // declared mu = mu0 layer thickness under the aperture

  bool is_polygon() const { return !vertices.empty(); }
  double width() const { return x_b - x_a; }

  double area() const
  {
    if (!is_polygon())
    {
      return width() * depth;
    }
    double a = 0.0;
    for (std::size_t i = 0; i < vertices.size(); i++)
    {
      const Point &p = vertices[i];
      const Point &q = vertices[(i + 1) % vertices.size()];
      a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
  }

  // Bounding box {xmin, xmax, ymin, ymax}.
  std::array<double, 4> box() const
  {
    if (!is_polygon())
    {
      return {x_a, x_b, -depth, 0.0};
    }
    std::array<double, 4> b{vertices[0].x, vertices[0].x, vertices[0].y, vertices[0].y};
    for (const Point &p : vertices)
    {
      b[0] = std::min(b[0], p.x);
      b[1] = std::max(b[1], p.x);
      b[2] = std::min(b[2], p.y);
      b[3] = std::max(b[3], p.y);
    }
    return b;
  }

  bool operator==(const CavitySpec &) const = default;
};

struct Scene
{
  std::vector<CavitySpec> cavities;  // ordered by aperture position
  double eps0 = 1.0;
  double mu0 = 1.0;
  Polarization polarization = Polarization::TE;

  double c() const { return 1.0 / std::sqrt(eps0 * mu0); }
  std::size_t size() const { return cavities.size(); }

  // Horizontal extent [min x, max x] over all cavities.
  std::pair<double, double> extent() const
  {
    double lo = cavities.front().box()[0], hi = cavities.front().box()[1];
    for (const auto &cav : cavities)
    {
      lo = std::min(lo, cav.box()[0]);
      hi = std::max(hi, cav.box()[1]);
    }
    return {lo, hi};
  }

  bool operator==(const Scene &) const = default;
};

namespace detail
{

inline bool segments_intersect(Point p1, Point p2, Point q1, Point q2)
{
  auto cross = [](Point o, Point a, Point b)
  { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  const double d1 = cross(q1, q2, p1), d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1), d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
  {
    return true;
  }
  auto on_segment = [](Point a, Point b, Point p)
  {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
  };
  return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2)) ||
         (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

inline void validate_polygon(CavitySpec &cav)
{
  auto &v = cav.vertices;
  const std::string tag = "cavity " + std::to_string(cav.id);
  verify(v.size() >= 3, ErrorKind::ConfigError, tag + ": polygon needs at least 3 vertices");
  if (cav.area() < 0.0)
  {
    std::reverse(v.begin(), v.end());
  }
  const std::size_t n = v.size();
  std::vector<std::size_t> on_line;
  for (std::size_t i = 0; i < n; i++)
  {
    verify(v[i].y <= 0.0, ErrorKind::ConfigError, tag + ": polygon vertex above y = 0");
    if (v[i].y == 0.0)
    {
      on_line.push_back(i);
    }
  }
  verify(on_line.size() == 2, ErrorKind::ConfigError,
         tag + ": polygon must touch y = 0 in exactly the two aperture endpoints");
  const std::size_t i0 = on_line[0], i1 = on_line[1];
  verify(i1 == i0 + 1 || (i0 == 0 && i1 == n - 1), ErrorKind::ConfigError,
         tag + ": the polygon's top edge must be the aperture");
  const double xa = std::min(v[i0].x, v[i1].x), xb = std::max(v[i0].x, v[i1].x);
  verify(xa == cav.x_a && xb == cav.x_b, ErrorKind::ConfigError,
         tag + ": polygon top edge does not match the aperture interval");
  for (std::size_t i = 0; i < n; i++)
  {
    for (std::size_t j = i + 1; j < n; j++)
    {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent)
      {
        continue;
      }
      verify(!segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]),
             ErrorKind::ConfigError, tag + ": polygon is not simple");
    }
  }
  verify(cav.area() > 0.0, ErrorKind::MeshFailure, tag + ": degenerate polygon");
}

inline void validate_material(const MaterialField &f, const CavitySpec &cav, const char *name)
{
  const auto b = cav.box();
  const Interval enc = f.bounds(b[0], b[1], b[2], b[3]);
  const std::string tag = "cavity " + std::to_string(cav.id) + " " + name;
  verify(std::isfinite(enc.lo) && std::isfinite(enc.hi), ErrorKind::NonPositiveMaterial,
         tag + ": cannot bound the field on the cavity box");
  verify(enc.lo > 0.0, ErrorKind::NonPositiveMaterial,
         tag + ": lower bound " + std::to_string(enc.lo) + " is not positive");
  if (const auto &d = f.declared())
  {
    verify(d->lo > 0.0 && d->lo <= d->hi, ErrorKind::NonPositiveMaterial,
           tag + ": declared bounds must satisfy 0 < min <= max");
    const double slack = 1e-12 * std::max(1.0, std::abs(d->hi));
    verify(enc.lo >= d->lo - slack && enc.hi <= d->hi + slack, ErrorKind::NonPositiveMaterial,
           tag + ": field range [" + std::to_string(enc.lo) + ", " + std::to_string(enc.hi) +
             "] leaves the declared bounds");
  }
}

inline bool mu_matches(double mu, double mu0) { return std::abs(mu - mu0) <= 1e-12 * mu0; }

inline void validate_collar(const CavitySpec &cav, double mu0)
{
  const std::string tag = "cavity " + std::to_string(cav.id);
  if (cav.mu.is_constant())
  {
    verify(mu_matches(cav.mu.constant(), mu0), ErrorKind::ApertureCollarViolation,
           tag + ": mu differs from mu0 under the aperture");
    return;
  }
  if (cav.collar <= 0.0)
  {
    // Checked against the first mesh layer at meshing time.
    return;
  }
  constexpr int nx = 33, ny = 9;
  for (int i = 0; i < nx; i++)
  {
    for (int j = 0; j < ny; j++)
    {
      const double x = cav.x_a + cav.width() * i / (nx - 1);
      const double y = -cav.collar * j / (ny - 1);
      verify(mu_matches(cav.mu(x, y), mu0), ErrorKind::ApertureCollarViolation,
             tag + ": mu differs from mu0 inside the declared collar");
    }
  }
}

}  // namespace detail

// Parses and validates a scene. Accepts either the whole config document (with a
// "scene" member) or the scene object itself.
inline Scene build_scene(const json &config)
{
  const json &js = config.contains("scene") ? config.at("scene") : config;
  Scene scene;
  try
  {
    scene.eps0 = js.value("eps0", 1.0);
    scene.mu0 = js.value("mu0", 1.0);
    const std::string pol = js.value("polarization", std::string("TE"));
    verify(pol == "TE" || pol == "TM", ErrorKind::ConfigError, "polarization must be TE or TM");
    scene.polarization = pol == "TE" ? Polarization::TE : Polarization::TM;
    verify(js.contains("cavities") && js.at("cavities").is_array() && !js.at("cavities").empty(),
           ErrorKind::ConfigError, "scene needs a non-empty cavities array");
    int next_id = 1;
    for (const json &jc : js.at("cavities"))
    {
      CavitySpec cav;
      cav.id = jc.value("id", next_id);
      next_id = cav.id + 1;
      const auto ap = jc.at("aperture").get<std::vector<double>>();
      verify(ap.size() == 2, ErrorKind::ConfigError, "aperture must be [x_a, x_b]");
      cav.x_a = ap[0];
      cav.x_b = ap[1];
      if (jc.contains("vertices"))
      {
        for (const auto &p : jc.at("vertices"))
        {
          const auto xy = p.get<std::vector<double>>();
          verify(xy.size() == 2, ErrorKind::ConfigError, "vertex must be [x, y]");
          cav.vertices.push_back({xy[0], xy[1]});
        }
        cav.mesh_file = jc.value("mesh_file", std::string());
        cav.depth = 0.0;
      }
      else
      {
        cav.depth = jc.at("depth").get<double>();
      }
      cav.epsilon = MaterialField::from_json(jc.value("epsilon", json(1.0)));
      cav.mu = MaterialField::from_json(jc.value("mu", json(1.0)));
      cav.collar = jc.value("collar", 0.0);
      scene.cavities.push_back(std::move(cav));
    }
  }
  catch (const json::exception &e)
  {
    throw Error(ErrorKind::ConfigError, e.what());
  }

  verify(scene.eps0 > 0.0 && scene.mu0 > 0.0, ErrorKind::NonPositiveMaterial,
         "eps0 and mu0 must be positive");
  std::sort(scene.cavities.begin(), scene.cavities.end(),
            [](const CavitySpec &a, const CavitySpec &b) { return a.x_a < b.x_a; });
  for (auto &cav : scene.cavities)
  {
    const std::string tag = "cavity " + std::to_string(cav.id);
    verify(cav.x_a < cav.x_b, ErrorKind::ConfigError, tag + ": aperture needs x_a < x_b");
    if (cav.is_polygon())
    {
      detail::validate_polygon(cav);
    }
    else
    {
      verify(cav.depth > 0.0, ErrorKind::ConfigError, tag + ": depth must be positive");
    }
    verify(cav.collar >= 0.0, ErrorKind::ConfigError, tag + ": collar must be non-negative");
    detail::validate_material(cav.epsilon, cav, "epsilon");
    detail::validate_material(cav.mu, cav, "mu");
    detail::validate_collar(cav, scene.mu0);
  }
  for (std::size_t i = 1; i < scene.cavities.size(); i++)
  {
    const auto &a = scene.cavities[i - 1], &b = scene.cavities[i];
    verify(a.x_b < b.x_a, ErrorKind::OverlappingApertures,
           "apertures of cavities " + std::to_string(a.id) + " and " + std::to_string(b.id) +
             " intersect or touch");
  }
  return scene;
}

inline json serialize(const Scene &scene)
{
  json js;
  js["eps0"] = scene.eps0;
  js["mu0"] = scene.mu0;
  js["polarization"] = to_string(scene.polarization);
  js["cavities"] = json::array();
  for (const auto &cav : scene.cavities)
  {
    json jc;
    jc["id"] = cav.id;
    jc["aperture"] = {cav.x_a, cav.x_b};
    if (cav.is_polygon())
    {
      jc["vertices"] = json::array();
      for (const auto &p : cav.vertices)
      {
        jc["vertices"].push_back({p.x, p.y});
      }
      if (!cav.mesh_file.empty())
      {
        jc["mesh_file"] = cav.mesh_file;
      }
    }
    else
    {
      jc["depth"] = cav.depth;
    }
    jc["epsilon"] = cav.epsilon.to_json();
    jc["mu"] = cav.mu.to_json();
    if (cav.collar > 0.0)
    {
      jc["collar"] = cav.collar;
    }
    js["cavities"].push_back(std::move(jc));
  }
  return json{{"scene", js}};
}

//
// Triangulation of one cavity.
//
enum class BoundaryTag
{
  Wall,
  Aperture
};

struct BoundaryEdge
{
  int a = 0;
  int b = 0;
  BoundaryTag tag = BoundaryTag::Wall;
};

struct Mesh
{
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary;
  std::vector<int> aperture_nodes;  // vertices on y = 0, increasing x

  double signed_area(std::size_t t) const
  {
    const Point &a = vertices[triangles[t][0]], &b = vertices[triangles[t][1]],
                &c = vertices[triangles[t][2]];
    return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
  }

  double total_area() const
  {
    double a = 0.0;
    for (std::size_t t = 0; t < triangles.size(); t++)
    {
      a += signed_area(t);
    }
    return a;
  }

  double max_edge_length() const
  {
    double h = 0.0;
    for (const auto &tri : triangles)
    {
      for (int k = 0; k < 3; k++)
      {
        const Point &p = vertices[tri[k]], &q = vertices[tri[(k + 1) % 3]];
        h = std::max(h, std::hypot(q.x - p.x, q.y - p.y));
      }
    }
    return h;
  }

  std::vector<bool> wall_mask() const
  {
    std::vector<bool> wall(vertices.size(), false);
    for (const auto &e : boundary)
    {
      if (e.tag == BoundaryTag::Wall)
      {
        wall[e.a] = wall[e.b] = true;
      }
    }
    return wall;
  }
};

namespace detail
{

inline void collect_aperture_nodes(Mesh &mesh)
{
  mesh.aperture_nodes.clear();
  for (std::size_t i = 0; i < mesh.vertices.size(); i++)
  {
    if (mesh.vertices[i].y == 0.0)
    {
      mesh.aperture_nodes.push_back(static_cast<int>(i));
    }
  }
  std::sort(mesh.aperture_nodes.begin(), mesh.aperture_nodes.end(),
            [&](int a, int b) { return mesh.vertices[a].x < mesh.vertices[b].x; });
}

}  // namespace detail

// Checks the structural mesh invariants against its cavity; throws MeshFailure.
inline void validate_mesh(const Mesh &mesh, const CavitySpec &cav)
{
  const std::string tag = "cavity " + std::to_string(cav.id) + " mesh";
  verify(!mesh.triangles.empty(), ErrorKind::MeshFailure, tag + ": no triangles");
  const int nv = static_cast<int>(mesh.vertices.size());
  std::map<std::pair<int, int>, int> edge_count;
  for (std::size_t t = 0; t < mesh.triangles.size(); t++)
  {
    for (int k = 0; k < 3; k++)
    {
      const int a = mesh.triangles[t][k], b = mesh.triangles[t][(k + 1) % 3];
      verify(a >= 0 && a < nv && b >= 0 && b < nv, ErrorKind::MeshFailure,
             tag + ": vertex index out of range");
      edge_count[{std::min(a, b), std::max(a, b)}]++;
    }
    verify(mesh.signed_area(t) > 0.0, ErrorKind::MeshFailure,
           tag + ": triangle " + std::to_string(t) + " has non-positive signed area");
  }
  std::map<std::pair<int, int>, int> tagged;
  for (const auto &e : mesh.boundary)
  {
    const auto key = std::make_pair(std::min(e.a, e.b), std::max(e.a, e.b));
    verify(edge_count.count(key) && edge_count.at(key) == 1, ErrorKind::MeshFailure,
           tag + ": tagged edge is not a boundary edge");
    verify(++tagged[key] == 1, ErrorKind::MeshFailure, tag + ": boundary edge tagged twice");
    if (e.tag == BoundaryTag::Aperture)
    {
      const Point &p = mesh.vertices[e.a], &q = mesh.vertices[e.b];
      verify(p.y == 0.0 && q.y == 0.0 && std::min(p.x, q.x) >= cav.x_a &&
               std::max(p.x, q.x) <= cav.x_b,
             ErrorKind::MeshFailure, tag + ": aperture edge off the aperture");
    }
  }
  for (const auto &[key, count] : edge_count)
  {
    verify(count <= 2, ErrorKind::MeshFailure, tag + ": non-manifold edge");
    if (count == 1)
    {
      verify(tagged.count(key) == 1, ErrorKind::MeshFailure, tag + ": untagged boundary edge");
    }
  }
  const double area = cav.area();
  verify(std::abs(mesh.total_area() - area) <= 1e-12 * area, ErrorKind::MeshFailure,
         tag + ": triangle areas do not sum to the cavity area");
  verify(mesh.aperture_nodes.size() >= 2, ErrorKind::MeshFailure, tag + ": aperture unresolved");
  for (std::size_t i = 1; i < mesh.aperture_nodes.size(); i++)
  {
    verify(mesh.vertices[mesh.aperture_nodes[i]].x > mesh.vertices[mesh.aperture_nodes[i - 1]].x,
           ErrorKind::MeshFailure, tag + ": aperture node x-coordinates not increasing");
  }
  verify(mesh.vertices[mesh.aperture_nodes.front()].x == cav.x_a &&
           mesh.vertices[mesh.aperture_nodes.back()].x == cav.x_b,
         ErrorKind::MeshFailure, tag + ": aperture endpoints are not mesh nodes");
}

// Plain-text mesh format:
//   N_v, then N_v lines "x y"; N_t, then N_t lines "i j k" (0-based, counter-clockwise);
//   N_b, then N_b lines "i j TAG" with TAG in {WALL, APERTURE}.
inline Mesh read_mesh(std::istream &in)
{
  Mesh mesh;
  auto fail = [](const std::string &what) { throw Error(ErrorKind::MeshFailure, what); };
  std::size_t nv = 0, nt = 0, nb = 0;
  if (!(in >> nv))
  {
    fail("mesh file: missing vertex count");
  }
  mesh.vertices.resize(nv);
  for (auto &p : mesh.vertices)
  {
    if (!(in >> p.x >> p.y))
    {
      fail("mesh file: truncated vertex block");
    }
  }
  if (!(in >> nt))
  {
    fail("mesh file: missing triangle count");
  }
  mesh.triangles.resize(nt);
  for (auto &t : mesh.triangles)
  {
    if (!(in >> t[0] >> t[1] >> t[2]))
    {
      fail("mesh file: truncated triangle block");
    }
  }
  if (!(in >> nb))
  {
    fail("mesh file: missing boundary edge count");
  }
  mesh.boundary.resize(nb);
  for (auto &e : mesh.boundary)
  {
    std::string t;
    if (!(in >> e.a >> e.b >> t))
    {
      fail("mesh file: truncated boundary block");
    }
    if (t == "WALL")
    {
      e.tag = BoundaryTag::Wall;
    }
    else if (t == "APERTURE")
    {
      e.tag = BoundaryTag::Aperture;
    }
    else
    {
      fail("mesh file: unknown boundary tag '" + t + "'");
    }
  }
  detail::collect_aperture_nodes(mesh);
  return mesh;
}

inline void write_mesh(std::ostream &out, const Mesh &mesh)
{
  out.precision(17);
  out << mesh.vertices.size() << '\n';
  for (const auto &p : mesh.vertices)
  {
    out << p.x << ' ' << p.y << '\n';
  }
  out << mesh.triangles.size() << '\n';
  for (const auto &t : mesh.triangles)
  {
    out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  out << mesh.boundary.size() << '\n';
  for (const auto &e : mesh.boundary)
  {
    out << e.a << ' ' << e.b << ' ' << (e.tag == BoundaryTag::Wall ? "WALL" : "APERTURE") << '\n';
  }
}

inline Mesh structured_rectangle_mesh(const CavitySpec &cav, double h)
{
  // An even column count lets the diagonals mirror about the aperture midpoint.
  int nx = static_cast<int>(std::ceil(cav.width() / h - 1e-9));
  nx += nx % 2;
  const int ny = static_cast<int>(std::ceil(cav.depth / h - 1e-9));
  const double hx = cav.width() / nx, hy = cav.depth / ny;
  Mesh mesh;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; j++)
  {
    for (int i = 0; i <= nx; i++)
    {
      // Snap the last column/row to the exact cavity corners.
      const double x = i == nx ? cav.x_b : cav.x_a + i * hx;
      const double y = j == 0 ? 0.0 : (j == ny ? -cav.depth : -j * hy);
      mesh.vertices.push_back({x, y});
    }
  }
  for (int j = 0; j < ny; j++)
  {
    for (int i = 0; i < nx; i++)
    {
      const int bl = id(i, j + 1), br = id(i + 1, j + 1), tr = id(i + 1, j), tl = id(i, j);
      if (2 * i < nx)
      {
        mesh.triangles.push_back({bl, br, tr});
        mesh.triangles.push_back({bl, tr, tl});
      }
      else
      {
        mesh.triangles.push_back({bl, br, tl});
        mesh.triangles.push_back({br, tr, tl});
      }
    }
  }
  for (int i = 0; i < nx; i++)
  {
    mesh.boundary.push_back({id(i, 0), id(i + 1, 0), BoundaryTag::Aperture});
    mesh.boundary.push_back({id(i, ny), id(i + 1, ny), BoundaryTag::Wall});
  }
  for (int j = 0; j < ny; j++)
  {
    mesh.boundary.push_back({id(0, j), id(0, j + 1), BoundaryTag::Wall});
    mesh.boundary.push_back({id(nx, j), id(nx, j + 1), BoundaryTag::Wall});
  }
  detail::collect_aperture_nodes(mesh);
  return mesh;
}

// Meshes one cavity with target edge length h. Rectangles get a structured mesh;
// polygons load their declared triangulation file.
inline Mesh mesh_cavity(const CavitySpec &cav, double h)
{
  const std::string tag = "cavity " + std::to_string(cav.id);
  Mesh mesh;
  if (cav.is_polygon())
  {
    verify(cav.area() > 0.0, ErrorKind::MeshFailure, tag + ": degenerate polygon");
    verify(!cav.mesh_file.empty(), ErrorKind::MeshFailure,
           tag + ": polygon cavities need an imported triangulation (mesh_file)");
    std::ifstream in(cav.mesh_file);
    verify(in.good(), ErrorKind::MeshFailure, tag + ": cannot open " + cav.mesh_file);
    mesh = read_mesh(in);
  }
  else
  {
    verify(h > 0.0 && h <= std::min(cav.width(), cav.depth) / 2.0,
           ErrorKind::PreconditionViolation,
           tag + ": mesh size h must satisfy 0 < h <= min(width, depth)/2");
    mesh = structured_rectangle_mesh(cav, h);
  }
  validate_mesh(mesh, cav);
  return mesh;
}

// First-layer collar check for expression-valued mu (vertices and edge midpoints of
// every triangle with an aperture vertex).
inline void check_mesh_collar(const Mesh &mesh, const CavitySpec &cav, double mu0)
{
  if (cav.mu.is_constant())
  {
    return;
  }
  for (const auto &tri : mesh.triangles)
  {
    bool touches = false;
    for (int k = 0; k < 3; k++)
    {
      touches = touches || mesh.vertices[tri[k]].y == 0.0;
    }
    if (!touches)
    {
      continue;
    }
    for (int k = 0; k < 3; k++)
    {
      const Point &p = mesh.vertices[tri[k]], &q = mesh.vertices[tri[(k + 1) % 3]];
      for (const Point &r : {p, Point{0.5 * (p.x + q.x), 0.5 * (p.y + q.y)}})
      {
        verify(detail::mu_matches(cav.mu(r.x, r.y), mu0), ErrorKind::ApertureCollarViolation,
               "cavity " + std::to_string(cav.id) +
                 ": mu differs from mu0 on the element layer under the aperture");
      }
    }
  }
}

inline std::vector<Mesh> mesh_scene(const Scene &scene, double h)
{
  std::vector<Mesh> meshes;
  meshes.reserve(scene.size());
  for (const auto &cav : scene.cavities)
  {
    meshes.push_back(mesh_cavity(cav, h));
    check_mesh_collar(meshes.back(), cav, scene.mu0);
  }
  return meshes;
}

}  // namespace cavity_td

#endif  // CAVITY_TD_SCENE_HPP
