// Command-line front end.  Everything below the flag layer goes through the
// shared C API; this translation unit includes no library internals.
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "eigenflow/eigenflow.h"

namespace {

struct Flags {
  std::string config;
  std::string mesh;
  std::string generator;
  int level = 0;
  int refine = 0;
  bool sphere_project = false;
  std::string out;
  std::uint64_t seed = 0;
  std::string kind;
  int count = 0;
  double eig_tol = 0.0;
  bool dump_matrices = false;
  bool quiet = false;
  std::vector<std::string> sets;
};

void add_common_options(CLI::App* cmd, Flags& fl) {
  cmd->add_option("-c,--config", fl.config, "INI config file (key = value sections)");
  cmd->add_option("--mesh", fl.mesh, "ASCII OFF mesh path (overrides the generator)");
  cmd->add_option("--generator", fl.generator,
                  "built-in mesh: octahedron|icosahedron|icosphere|flat_torus|"
                  "unit_disk|square_with_hole");
  cmd->add_option("--level", fl.level, "generator parameter");
  cmd->add_option("--refine", fl.refine, "midpoint refinement rounds");
  cmd->add_flag("--sphere-project", fl.sphere_project,
                "project refined midpoints to the unit sphere");
  cmd->add_option("--out", fl.out, "artifact directory");
  cmd->add_option("--seed", fl.seed, "initial-factor seed");
  cmd->add_option("--kind", fl.kind, "problem kind: laplace|steklov");
  cmd->add_option("--count", fl.count, "eigenvalues above the constant mode");
  cmd->add_option("--eig-tol", fl.eig_tol, "eigensolver relative residual target");
  cmd->add_flag("--dump-matrices", fl.dump_matrices,
                "write stiffness/mass matrices as MatrixMarket");
  cmd->add_flag("--quiet", fl.quiet, "do not print the summary to stdout");
  cmd->add_option("--set", fl.sets, "extra override as section.key=value")
      ->take_all();
}

int report(const char* context) {
  std::fprintf(stderr, "error: %s (%s)\n", ef_last_error(), context);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonsmooth spectral optimization over conformal densities"};
  app.require_subcommand(1);
  Flags fl;
  add_common_options(app.add_subcommand("spectrum", "solve the lowest eigenpairs"), fl);
  add_common_options(app.add_subcommand("subgrad", "subdifferential and criticality"), fl);
  add_common_options(app.add_subcommand("flow", "gradient-like descent flow"), fl);
  add_common_options(app.add_subcommand("minmax", "path deformation min-max"), fl);
  add_common_options(app.add_subcommand("diagnose", "health report at a point"), fl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return EF_ERR_CONFIG;
  }
  const CLI::App* sub = app.get_subcommands().front();

  ef_config* cfg = nullptr;
  const ef_status loaded = fl.config.empty() ? ef_config_create(&cfg)
                                             : ef_config_load(fl.config.c_str(), &cfg);
  if (loaded != EF_OK) {
    std::fprintf(stderr, "error: %s\n", ef_last_error());
    return loaded;
  }

  std::vector<std::pair<std::string, std::string>> overrides;
  if (sub->count("--mesh")) overrides.emplace_back("mesh.path", fl.mesh);
  if (sub->count("--generator")) overrides.emplace_back("mesh.generator", fl.generator);
  if (sub->count("--level")) overrides.emplace_back("mesh.level", std::to_string(fl.level));
  if (sub->count("--refine")) overrides.emplace_back("mesh.refine", std::to_string(fl.refine));
  if (sub->count("--sphere-project")) overrides.emplace_back("mesh.sphere_project", "true");
  if (sub->count("--out")) overrides.emplace_back("run.out", fl.out);
  if (sub->count("--seed")) overrides.emplace_back("factor.seed", std::to_string(fl.seed));
  if (sub->count("--kind")) overrides.emplace_back("functional.kind", fl.kind);
  if (sub->count("--count")) overrides.emplace_back("run.count", std::to_string(fl.count));
  if (sub->count("--eig-tol")) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", fl.eig_tol);
    overrides.emplace_back("solver.eig_tol", buf);
  }
  if (sub->count("--dump-matrices")) overrides.emplace_back("run.dump_matrices", "true");
  for (const std::string& kv : fl.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::fprintf(stderr, "error: --set expects section.key=value, got '%s'\n",
                   kv.c_str());
      ef_config_free(cfg);
      return EF_ERR_CONFIG;
    }
    overrides.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [key, value] : overrides) {
    const ef_status st = ef_config_set(cfg, key.c_str(), value.c_str());
    if (st != EF_OK) {
      const int code = report(key.c_str());
      ef_config_free(cfg);
      return code == 1 ? st : code;
    }
  }

  char* summary = nullptr;
  const ef_status st = ef_run(cfg, sub->get_name().c_str(), &summary);
  if (st != EF_OK) {
    std::fprintf(stderr, "error: %s\n", ef_last_error());
    ef_config_free(cfg);
    return st;
  }
  if (!fl.quiet && summary) std::fputs(summary, stdout);
  ef_string_free(summary);
  ef_config_free(cfg);
  return EF_OK;
}
