// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_CONFIG_HPP
#define CAVITY_TD_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cavity_td/cq.hpp"
#include "cavity_td/error.hpp"
#include "cavity_td/fem.hpp"
#include "cavity_td/incident.hpp"
#include "cavity_td/scene.hpp"
#include "cavity_td/trace.hpp"

namespace cavity_td
{

//
// Run configuration document:
//
//   scene           see build_scene
//   incident        { theta, profile: { kind: gaussian|bump, center, width, amplitude,
//                     causality_tol, repeat_period, repeat_count }, illuminate: [ids] }
//   discretization  { h, trace: { L, N } }
//   frequency       { s: [ s1 | [s1, s2] | {re, im} ... ],
//                     sweep: { s1_min, s1_max, count, s2 } }
//   time            { dt, steps, lambda, probes: [{cavity, x, y}], snapshots: [n ...],
//                     stability_bound }
//   validate        { trials, samples }
//
struct RunConfig
{
  json raw;
  std::filesystem::path dir;
  Scene scene;
  PlaneWave<> wave;
  std::vector<int> illuminated;  // cavity indices (sorted-scene order); empty = all
  double h = 0.05;
  std::optional<std::pair<double, int>> trace;
  std::vector<cplx> s_list;
  std::optional<CqScheme> scheme;
  std::vector<Probe> probes;
  std::vector<int> snapshots;
  double stability_bound = std::numeric_limits<double>::infinity();
  int trials = 1000;
  int samples = 10000;
};

// FNV-1a 64 of the canonical (key-sorted, compact) JSON text.
inline std::uint64_t config_hash(const json &j)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump())
  {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v)
{
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

namespace detail
{

inline cplx parse_s(const json &j)
{
  if (j.is_number())
  {
    return {j.get<double>(), 0.0};
  }
  if (j.is_array())
  {
    const auto v = j.get<std::vector<double>>();
    verify(v.size() == 2, ErrorKind::ConfigError, "s must be a number or [re, im]");
    return {v[0], v[1]};
  }
  return {j.at("re").get<double>(), j.value("im", 0.0)};
}

inline WaveProfile parse_profile(const json &j)
{
  WaveProfile p;
  const std::string kind = j.value("kind", std::string("gaussian"));
  verify(kind == "gaussian" || kind == "bump", ErrorKind::ConfigError,
         "profile kind must be gaussian or bump");
  p.kind = kind == "gaussian" ? WaveProfile::Kind::GaussianPulse : WaveProfile::Kind::SmoothBump;
  p.center = j.value("center", p.center);
  p.width = j.value("width", p.width);
  p.amplitude = j.value("amplitude", p.amplitude);
  p.causality_tol = j.value("causality_tol", p.causality_tol);
  p.repeat_period = j.value("repeat_period", p.repeat_period);
  p.repeat_count = j.value("repeat_count", p.repeat_count);
  p.validate();
  return p;
}

}  // namespace detail

inline RunConfig parse_config(const json &doc, const std::filesystem::path &dir = {})
{
  RunConfig cfg;
  cfg.raw = doc;
  cfg.dir = dir;
  verify(doc.is_object() && doc.contains("scene"), ErrorKind::ConfigError,
         "config needs a scene block");
  cfg.scene = build_scene(doc);
  for (auto &cav : cfg.scene.cavities)
  {
    if (!cav.mesh_file.empty() && std::filesystem::path(cav.mesh_file).is_relative())
    {
      cav.mesh_file = (dir / cav.mesh_file).string();
    }
  }
  try
  {
    const json inc = doc.value("incident", json::object());
    cfg.wave = PlaneWave<>(detail::parse_profile(inc.value("profile", json::object())),
                           inc.value("theta", std::numbers::pi / 2), cfg.scene.eps0,
                           cfg.scene.mu0, cfg.scene.polarization);
    for (int id : inc.value("illuminate", std::vector<int>{}))
    {
      bool found = false;
      for (std::size_t j = 0; j < cfg.scene.size(); j++)
      {
        if (cfg.scene.cavities[j].id == id)
        {
          cfg.illuminated.push_back(static_cast<int>(j));
          found = true;
        }
      }
      verify(found, ErrorKind::ConfigError, "illuminate names unknown cavity " + std::to_string(id));
    }

    const json disc = doc.value("discretization", json::object());
    cfg.h = disc.value("h", cfg.h);
    verify(cfg.h > 0.0, ErrorKind::ConfigError, "mesh size h must be positive");
    if (disc.contains("trace"))
    {
      cfg.trace = std::make_pair(disc.at("trace").at("L").get<double>(),
                                 disc.at("trace").at("N").get<int>());
    }

    const json freq = doc.value("frequency", json::object());
    for (const auto &s : freq.value("s", json::array()))
    {
      cfg.s_list.push_back(detail::parse_s(s));
    }
    if (freq.contains("sweep"))
    {
      const json &sw = freq.at("sweep");
      const double lo = sw.at("s1_min").get<double>(), hi = sw.at("s1_max").get<double>();
      const int count = sw.at("count").get<int>();
      const double s2 = sw.value("s2", 0.0);
      verify(count >= 1, ErrorKind::ConfigError, "sweep count must be at least 1");
      verify(lo > 0.0 && hi > 0.0, ErrorKind::DomainError, "sweep needs Re s > 0");
      for (int i = 0; i < count; i++)
      {
        const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
        cfg.s_list.emplace_back(lo * std::pow(hi / lo, f), s2);
      }
    }
    for (const cplx &s : cfg.s_list)
    {
      check_half_plane(s);
    }

    if (doc.contains("time"))
    {
      const json &t = doc.at("time");
      CqScheme sc;
      sc.dt = t.value("dt", sc.dt);
      sc.steps = t.value("steps", sc.steps);
      sc.lambda = t.value("lambda", sc.lambda);
      sc.validate();
      cfg.scheme = sc;
      // The pulse must still be silent on every aperture at t = 0.
      const auto [x_lo, x_hi] = cfg.scene.extent();
      const double early = causality_defect(cfg.wave, x_lo, x_hi);
      verify(early <= cfg.wave.profile.causality_tol, ErrorKind::CausalityViolation,
             "incident pulse already reaches the apertures at t = 0 (|w| = " + std::to_string(early) +
               "); increase the profile center");
      for (const auto &p : t.value("probes", json::array()))
      {
        const int id = p.value("cavity", cfg.scene.cavities.front().id);
        std::optional<std::size_t> idx;
        for (std::size_t j = 0; j < cfg.scene.size(); j++)
        {
          if (cfg.scene.cavities[j].id == id)
          {
            idx = j;
          }
        }
        verify(idx.has_value(), ErrorKind::ConfigError, "probe names unknown cavity " + std::to_string(id));
        cfg.probes.push_back({*idx, p.at("x").get<double>(), p.at("y").get<double>()});
      }
      cfg.snapshots = t.value("snapshots", std::vector<int>{});
      for (int n : cfg.snapshots)
      {
        verify(n >= 0 && n <= sc.steps, ErrorKind::ConfigError, "snapshot step out of range");
      }
      if (t.contains("stability_bound"))
      {
        cfg.stability_bound = t.at("stability_bound").get<double>();
      }
    }

    const json val = doc.value("validate", json::object());
    cfg.trials = val.value("trials", cfg.trials);
    cfg.samples = val.value("samples", cfg.samples);
    verify(cfg.trials >= 1 && cfg.samples >= 1, ErrorKind::ConfigError,
           "validate trials and samples must be positive");
  }
  catch (const json::exception &e)
  {
    throw Error(ErrorKind::ConfigError, e.what());
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path &path)
{
  std::ifstream in(path);
  verify(in.good(), ErrorKind::ConfigError, "cannot open config " + path.string());
  json doc;
  try
  {
    doc = json::parse(in);
  }
  catch (const json::exception &e)
  {
    throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc, path.parent_path());
}

// Trace grid of a run. Without an explicit {L, N}, the period is long enough that no
// signal from a periodic image reaches the apertures within the time horizon.
inline TraceGrid run_grid(const RunConfig &cfg)
{
  if (cfg.trace)
  {
    return make_trace_grid(cfg.scene, cfg.trace->first, cfg.trace->second);
  }
  double min_period = 0.0;
  if (cfg.scheme)
  {
    const auto [lo, hi] = cfg.scene.extent();
    min_period = cfg.scene.c() * cfg.scheme->horizon() + 2.0 * (hi - lo);
  }
  return make_trace_grid(cfg.scene, cfg.h, min_period);
}

inline Discretization run_discretization(const RunConfig &cfg)
{
  return Discretization(cfg.scene, mesh_scene(cfg.scene, cfg.h), run_grid(cfg));
}

}  // namespace cavity_td

#endif  // CAVITY_TD_CONFIG_HPP
