// Copyright the cavity-td contributors.
// SPDX-License-Identifier: Apache-2.0

#ifndef CAVITY_TD_CLI_HPP
#define CAVITY_TD_CLI_HPP

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cavity_td/config.hpp"
#include "cavity_td/cq.hpp"
#include "cavity_td/diagnostics.hpp"
#include "cavity_td/error.hpp"
#include "cavity_td/fem.hpp"
#include "cavity_td/freq.hpp"
#include "cavity_td/incident.hpp"

namespace cavity_td
{

inline constexpr const char *kVersion = "0.1.0";

struct CliOptions
{
  std::filesystem::path config;
  std::filesystem::path out = "out";
  unsigned threads = 1;
  std::uint64_t seed = 1;
};

// Exit status for an error kind: 2 for rejected input, 1 for failures while computing.
inline int exit_code(ErrorKind kind)
{
  switch (kind)
  {
    case ErrorKind::FactorizationFailure:
    case ErrorKind::QuadratureFailure:
    case ErrorKind::ContractViolation:
    case ErrorKind::CausalityViolation:
    case ErrorKind::SingularElement:
      return 1;
    default:
      return 2;
  }
}

//
// Output directory plus the manifest that lists every file written.
//
class RunOutputs
{
public:
  RunOutputs(std::filesystem::path dir, std::string command, const RunConfig &cfg,
             const CliOptions &opt)
    : dir_(std::move(dir)), start_(std::chrono::steady_clock::now())
  {
    std::filesystem::create_directories(dir_);
    manifest_["tool"] = {{"name", "cavity-td"}, {"version", kVersion}};
    manifest_["command"] = std::move(command);
    manifest_["config"] = opt.config.string();
    manifest_["config_hash"] = hex64(config_hash(cfg.raw));
    manifest_["seed"] = opt.seed;
    manifest_["threads"] = opt.threads;
    manifest_["outputs"] = json::array();
  }

  std::ofstream open(const std::string &name)
  {
    std::ofstream out(dir_ / name);
    verify(out.good(), ErrorKind::ConfigError, "cannot write " + (dir_ / name).string());
    manifest_["outputs"].push_back(name);
    return out;
  }

  json &manifest() { return manifest_; }

  void lap(const std::string &what)
  {
    const auto now = std::chrono::steady_clock::now();
    manifest_["wall_times"][what] = std::chrono::duration<double>(now - start_).count();
  }

  void finish()
  {
    lap("total");
    std::ofstream out(dir_ / "manifest.json");
    out << manifest_.dump(2) << '\n';
  }

private:
  std::filesystem::path dir_;
  std::chrono::steady_clock::time_point start_;
  json manifest_;
};

inline std::filesystem::path resolve_out(const CliOptions &opt)
{
  if (const char *env = std::getenv("CAVITY_TD_OUT"); env && *env)
  {
    return env;
  }
  return opt.out;
}

inline json mesh_stats(const Discretization &disc)
{
  json stats = json::array();
  for (std::size_t j = 0; j < disc.cavities(); j++)
  {
    stats.push_back({{"cavity", disc.scene.cavities[j].id},
                     {"vertices", disc.meshes[j].vertices.size()},
                     {"triangles", disc.meshes[j].triangles.size()},
                     {"dofs", disc.fem[j].dofs()},
                     {"h_max", disc.meshes[j].max_edge_length()}});
  }
  return stats;
}

inline json grid_json(const TraceGrid &grid) { return {{"L", grid.L()}, {"N", grid.N()}}; }

inline std::string fixed_index(std::size_t i)
{
  std::string s = std::to_string(i);
  return s.size() < 3 ? std::string(3 - s.size(), '0') + s : s;
}

// Re a(u, u) >= C s1 / |s|^2 (|grad u|^2 + |s|^2 |u|^2), C = min(1/mu_max, eps_min),
// tested on random vectors. Returns the smallest ratio of the two sides.
inline double coercivity_ratio(const Discretization &disc, const SystemOperator &op,
                               std::mt19937_64 &rng, int samples)
{
  const auto b = disc.material_bounds();
  const double C = std::min(1.0 / b[3], b[0]);
  const SpMat M0 = disc.stacked(&FemMatrices::M0);
  const SpMat K0 = disc.stacked(&FemMatrices::K0);
  const cplx s = op.s();
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; i++)
  {
    Eigen::VectorXcd u(op.dofs());
    for (int k = 0; k < u.size(); k++)
    {
      u[k] = cplx(U(rng), U(rng));
    }
    const double lhs = u.dot(op.apply(u)).real();
    const double rhs = C * s.real() / std::norm(s) *
                       (u.dot(K0 * u).real() + std::norm(s) * u.dot(M0 * u).real());
    worst = std::min(worst, lhs / rhs);
  }
  return worst;
}

inline int cmd_validate(const CliOptions &opt, std::ostream &log)
{
  const RunConfig cfg = load_config(opt.config);
  const Discretization disc = run_discretization(cfg);
  RunOutputs out(resolve_out(opt), "validate", cfg, opt);
  out.manifest()["mesh"] = mesh_stats(disc);
  out.manifest()["trace_grid"] = grid_json(disc.grid);
  const DtnSymbol sym{cfg.scene.c()};
  json report;
  bool ok = true;
  auto record = [&](const std::string &name, bool pass, json detail)
  {
    detail["pass"] = pass;
    report[name] = std::move(detail);
    ok = ok && pass;
    log << (pass ? "PASS " : "FAIL ") << name << '\n';
  };

  const TraceChecks tc = trace_checks(disc.grid, sym, cfg.samples, opt.seed);
  record("symbol_branch", tc.branch_sign && tc.branch_error <= 1e-12,
         {{"max_relative_error", tc.branch_error}, {"negative_real_part", tc.branch_sign}});
  record("operator_continuity", tc.continuity_margin <= 1e-9, {{"max_margin", tc.continuity_margin}});
  if (disc.grid.N() <= 1024)
  {
    record("oracle_equivalence", tc.oracle_error <= 1e-10, {{"max_relative_error", tc.oracle_error}});
  }
  out.lap("trace_checks");

  const PassivityReport pr = passivity_suite(disc.grid, sym, cfg.trials, opt.seed, cfg.scene.mu0, opt.threads);
  record("passivity", pr.pass(),
         {{"trials", pr.trials},
          {"min_single", pr.min_single},
          {"min_pair", std::isfinite(pr.min_pair) ? json(pr.min_pair) : json(nullptr)},
          {"min_all", std::isfinite(pr.min_all) ? json(pr.min_all) : json(nullptr)},
          {"min_time_relative", pr.min_time},
          {"failures", pr.failures}});
  out.lap("passivity");

  require_te(cfg.scene.polarization);
  std::vector<cplx> s_list = cfg.s_list.empty() ? std::vector<cplx>{cplx(1.0, 0.0)} : cfg.s_list;
  FrequencySolver solver(disc);
  std::mt19937_64 rng(split_seed(opt.seed, 0xc0e));
  double worst_res = 0.0, worst_coercive = std::numeric_limits<double>::infinity();
  json ratios = json::array();
  for (const cplx &s : s_list)
  {
    const TraceVector g = boundary_data_freq(cfg.wave, disc.grid, s);
    Eigen::VectorXcd b = frequency_load(disc, s, g);
    mask_cavities(disc, b, cfg.illuminated);
    const FrequencySolution sol = solver.solve_load(s, b);
    worst_res = std::max(worst_res, sol.residual);
    ratios.push_back(estimate_report(sol, illuminated_trace(g, disc.grid, cfg.illuminated), disc).ratio);
    worst_coercive = std::min(worst_coercive,
                              coercivity_ratio(disc, build_system(disc, s), rng, 8));
    solver.release(s);
  }
  record("frequency_solves", worst_res <= 1e-10, {{"max_residual", worst_res}, {"estimate_ratios", ratios}});
  record("coercivity", worst_coercive >= 1.0 - 1e-10, {{"min_ratio", worst_coercive}});
  out.lap("frequency");

  out.open("validate_report.json") << report.dump(2) << '\n';
  {
    auto summary = out.open("validate_summary.txt");
    for (const auto &[name, detail] : report.items())
    {
      summary << (detail.at("pass").get<bool>() ? "PASS " : "FAIL ") << name << '\n';
    }
    summary << (ok ? "all checks passed" : "some checks failed") << '\n';
  }
  out.manifest()["validation"] = {{"pass", ok}};
  out.finish();
  return ok ? 0 : 1;
}

inline int solve_frequencies(const CliOptions &opt, std::ostream &log, bool write_fields)
{
  const RunConfig cfg = load_config(opt.config);
  verify(!cfg.s_list.empty(), ErrorKind::ConfigError, "frequency block lists no s values");
  require_te(cfg.scene.polarization);
  const Discretization disc = run_discretization(cfg);
  RunOutputs out(resolve_out(opt), write_fields ? "solve-freq" : "sweep", cfg, opt);
  out.manifest()["mesh"] = mesh_stats(disc);
  out.manifest()["trace_grid"] = grid_json(disc.grid);
  FrequencySolver solver(disc);
  std::vector<EstimateReport> rows;
  for (std::size_t i = 0; i < cfg.s_list.size(); i++)
  {
    const cplx s = cfg.s_list[i];
    const TraceVector g = boundary_data_freq(cfg.wave, disc.grid, s);
    Eigen::VectorXcd b = frequency_load(disc, s, g);
    mask_cavities(disc, b, cfg.illuminated);
    const FrequencySolution sol = solver.solve_load(s, b);
    solver.release(s);
    rows.push_back(estimate_report(sol, illuminated_trace(g, disc.grid, cfg.illuminated), disc));
    if (write_fields)
    {
      for (std::size_t j = 0; j < disc.cavities(); j++)
      {
        auto f = out.open("freq_s" + fixed_index(i) + "_c" +
                          std::to_string(disc.scene.cavities[j].id) + ".csv");
        write_solution_csv(f, disc, sol, j);
      }
    }
    log << "s = (" << s.real() << ", " << s.imag() << ")  ratio " << rows.back().ratio << '\n';
  }
  auto rep = out.open(write_fields ? "estimate_report.csv" : "sweep.csv");
  write_estimate_csv(rep, rows);
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto &r : rows)
  {
    if (r.ratio > 0.0)
    {
      lo = std::min(lo, r.ratio);
      hi = std::max(hi, r.ratio);
    }
  }
  out.manifest()["estimate"] = {{"min_ratio", hi > 0.0 ? json(lo) : json(nullptr)},
                                {"max_ratio", hi > 0.0 ? json(hi) : json(nullptr)}};
  out.finish();
  return 0;
}

inline int cmd_solve_time(const CliOptions &opt, std::ostream &log)
{
  const RunConfig cfg = load_config(opt.config);
  verify(cfg.scheme.has_value(), ErrorKind::ConfigError, "config has no time block");
  require_te(cfg.scene.polarization);
  const Discretization disc = run_discretization(cfg);
  const CqScheme &scheme = *cfg.scheme;
  RunOutputs out(resolve_out(opt), "solve-time", cfg, opt);
  out.manifest()["mesh"] = mesh_stats(disc);
  out.manifest()["trace_grid"] = grid_json(disc.grid);
  out.manifest()["scheme"] = {{"method", "BDF2"},
                              {"dt", scheme.dt},
                              {"steps", scheme.steps},
                              {"lambda", scheme.radius()}};
  CqOptions cq;
  cq.threads = opt.threads;
  cq.illuminated = cfg.illuminated;
  const TimeSolution sol = run_time_domain(disc, cfg.wave, scheme, cq);
  out.lap("solve");

  // Data norms follow the data actually applied.
  const DataSeries data = data_series(cfg.wave, disc.grid, sol.t, cfg.illuminated);
  const EnergyTrace et = energy(sol, disc, &data);
  const double t_star = data_shutoff(cfg.wave, cfg.scene);
  const DissipationReport diss = dissipation_check(et, t_star);
  const StabilityReport stab = stability_check(sol, disc, data, cfg.stability_bound);
  const AprioriReport apr = apriori_check(sol, disc, data);

  {
    auto f = out.open("energy.csv");
    write_energy_csv(f, et);
  }
  if (!cfg.probes.empty())
  {
    auto f = out.open("probes.csv");
    write_probe_csv(f, disc, sol, cfg.probes);
  }
  for (int n : cfg.snapshots)
  {
    for (std::size_t j = 0; j < disc.cavities(); j++)
    {
      auto f = out.open("snapshot_n" + std::to_string(n) + "_c" +
                        std::to_string(disc.scene.cavities[j].id) + ".vtk");
      write_snapshot_vtk(f, disc, sol, static_cast<std::size_t>(n), j);
    }
  }
  {
    auto f = out.open("reports.csv");
    f.precision(17);
    f << "quantity,value\n";
    f << "stability_lhs," << stab.lhs << "\nstability_rhs," << stab.rhs << "\nstability_ratio,"
      << stab.ratio << '\n';
    f << "apriori_T," << apr.T << "\napriori_linf_ratio," << apr.linf_ratio
      << "\napriori_l2_ratio," << apr.l2_ratio << '\n';
    f << "shutoff_time," << t_star << "\ndissipation_worst," << diss.worst << '\n';
    f << "imag_ratio," << sol.imag_ratio() << '\n';
  }
  out.manifest()["validation"] = {{"dissipation_pass", diss.pass},
                                  {"stability_pass", stab.pass},
                                  {"imag_ratio", sol.imag_ratio()}};
  log << "energy non-increasing after t* = " << t_star << ": " << (diss.pass ? "yes" : "no")
      << "\nstability ratio " << stab.ratio << ", a-priori ratio " << apr.linf_ratio << '\n';
  out.finish();
  return 0;
}

inline int cmd_mesh_export(const CliOptions &opt, std::ostream &log)
{
  const RunConfig cfg = load_config(opt.config);
  const auto meshes = mesh_scene(cfg.scene, cfg.h);
  RunOutputs out(resolve_out(opt), "mesh-export", cfg, opt);
  json stats = json::array();
  for (std::size_t j = 0; j < meshes.size(); j++)
  {
    const std::string id = std::to_string(cfg.scene.cavities[j].id);
    {
      auto f = out.open("mesh_c" + id + ".txt");
      write_mesh(f, meshes[j]);
    }
    stats.push_back({{"cavity", cfg.scene.cavities[j].id},
                     {"vertices", meshes[j].vertices.size()},
                     {"triangles", meshes[j].triangles.size()},
                     {"h_max", meshes[j].max_edge_length()}});
    log << "cavity " << id << ": " << meshes[j].vertices.size() << " vertices, "
        << meshes[j].triangles.size() << " triangles\n";
  }
  out.manifest()["mesh"] = stats;
  out.finish();
  return 0;
}

inline int run_cli(int argc, char **argv, std::ostream &log = std::cout, std::ostream &err = std::cerr)
{
  CLI::App app{"Transient scattering by open cavities in a ground plane"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  CliOptions opt;
  auto add_common = [&](CLI::App *sub)
  {
    sub->add_option("--config", opt.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "output directory (CAVITY_TD_OUT overrides)");
    sub->add_option("--threads", opt.threads, "cap on worker threads (0 = all cores)");
    sub->add_option("--seed", opt.seed, "seed for randomized checks");
  };
  auto *validate = app.add_subcommand("validate", "run the property suite");
  auto *solve_freq = app.add_subcommand("solve-freq", "solve at the configured Laplace parameters");
  auto *solve_time = app.add_subcommand("solve-time", "time-domain solve by convolution quadrature");
  auto *sweep = app.add_subcommand("sweep", "frequency estimate sweep without field output");
  auto *mesh_export = app.add_subcommand("mesh-export", "write the cavity meshes");
  for (auto *sub : {validate, solve_freq, solve_time, sweep, mesh_export})
  {
    add_common(sub);
  }
  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::Success &e)
  {
    return app.exit(e, log, err);
  }
  catch (const CLI::ParseError &e)
  {
    app.exit(e, log, err);
    return 2;
  }
  try
  {
    if (validate->parsed())
    {
      return cmd_validate(opt, log);
    }
    if (solve_freq->parsed())
    {
      return solve_frequencies(opt, log, true);
    }
    if (sweep->parsed())
    {
      return solve_frequencies(opt, log, false);
    }
    if (solve_time->parsed())
    {
      return cmd_solve_time(opt, log);
    }
    return cmd_mesh_export(opt, log);
  }
  catch (const Error &e)
  {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }
  catch (const std::exception &e)
  {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cavity_td

#endif  // CAVITY_TD_CLI_HPP
