#include "eigenflow/eigenflow.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "cli_io.hpp"
#include "errors.hpp"

using namespace eigenflow;

struct ef_config {
  RunConfig cfg;
};

struct ef_mesh {
  TriMesh mesh;
};

namespace {

thread_local std::string g_last_error;

ef_status fail(ErrorCode code, const std::string& message) {
  g_last_error = message;
  return static_cast<ef_status>(static_cast<int>(code));
}

ef_status fail_null(const char* what) {
  return fail(ErrorCode::config, std::string("null argument: ") + what);
}

// Every entry point funnels through here so exceptions never cross the C
// boundary and the thread's error slot always reflects the last call.
template <typename Fn>
ef_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::bad_alloc&) {
    return fail(ErrorCode::numeric, "out of memory");
  } catch (const std::exception& e) {
    return fail(ErrorCode::numeric, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* buf = static_cast<char*>(std::malloc(s.size() + 1));
  if (!buf) throw std::bad_alloc();
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return buf;
}

}  // namespace

extern "C" {

const char* ef_last_error(void) { return g_last_error.c_str(); }

void ef_version(int* major, int* minor, int* patch) {
  if (major) *major = 1;
  if (minor) *minor = 0;
  if (patch) *patch = 0;
}

ef_status ef_config_create(ef_config** out) {
  if (!out) return fail_null("out");
  return guarded([&] {
    *out = new ef_config{RunConfig{}};
    return EF_OK;
  });
}

ef_status ef_config_parse(const char* text, ef_config** out) {
  if (!text) return fail_null("text");
  if (!out) return fail_null("out");
  return guarded([&] {
    *out = new ef_config{parse_config(text)};
    return EF_OK;
  });
}

ef_status ef_config_load(const char* path, ef_config** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return guarded([&] {
    *out = new ef_config{load_config(path)};
    return EF_OK;
  });
}

ef_status ef_config_set(ef_config* cfg, const char* dotted_key, const char* value) {
  if (!cfg) return fail_null("cfg");
  if (!dotted_key) return fail_null("dotted_key");
  if (!value) return fail_null("value");
  return guarded([&] {
    apply_setting(cfg->cfg, dotted_key, value);
    return EF_OK;
  });
}

void ef_config_free(ef_config* cfg) { delete cfg; }

ef_status ef_run(const ef_config* cfg, const char* subcommand, char** summary_json) {
  if (!cfg) return fail_null("cfg");
  if (!subcommand) return fail_null("subcommand");
  return guarded([&] {
    const std::string summary = run(subcommand, cfg->cfg);
    if (summary_json) *summary_json = dup_string(summary);
    return EF_OK;
  });
}

void ef_string_free(char* s) { std::free(s); }

ef_status ef_mesh_load_off(const char* path, ef_mesh** out) {
  if (!path) return fail_null("path");
  if (!out) return fail_null("out");
  return guarded([&] {
    *out = new ef_mesh{TriMesh::load_off(path)};
    return EF_OK;
  });
}

ef_status ef_mesh_generate(const char* generator, int level, ef_mesh** out) {
  if (!generator) return fail_null("generator");
  if (!out) return fail_null("out");
  return guarded([&] {
    RunConfig cfg;
    cfg.mesh_generator = generator;
    cfg.mesh_level = level;
    *out = new ef_mesh{build_mesh(cfg)};
    return EF_OK;
  });
}

ef_status ef_mesh_refine(ef_mesh* mesh, int levels, int sphere_project) {
  if (!mesh) return fail_null("mesh");
  return guarded([&] {
    if (levels < 0) throw Error::config("refinement levels must be >= 0");
    mesh->mesh = mesh->mesh.refined(levels, sphere_project != 0);
    return EF_OK;
  });
}

ef_status ef_mesh_save_off(const ef_mesh* mesh, const char* path) {
  if (!mesh) return fail_null("mesh");
  if (!path) return fail_null("path");
  return guarded([&] {
    mesh->mesh.save_off(path);
    return EF_OK;
  });
}

int ef_mesh_vertex_count(const ef_mesh* mesh) {
  return mesh ? mesh->mesh.vertex_count() : 0;
}

int ef_mesh_triangle_count(const ef_mesh* mesh) {
  return mesh ? mesh->mesh.triangle_count() : 0;
}

void ef_mesh_free(ef_mesh* mesh) { delete mesh; }

ef_status ef_spectrum_compute(const ef_mesh* mesh, const char* kind, int count,
                              double eig_tol, int renormalized, double* values) {
  if (!mesh) return fail_null("mesh");
  if (!kind) return fail_null("kind");
  if (!values) return fail_null("values");
  return guarded([&] {
    if (count < 1) throw Error::config("eigenvalue count must be >= 1");
    const std::string k(kind);
    FactorSupport support;
    if (k == "laplace") support = FactorSupport::area;
    else if (k == "steklov") support = FactorSupport::boundary;
    else throw Error::config("unknown problem kind: '" + k + "' (laplace|steklov)");
    const ConformalFactor f = uniform_factor(mesh->mesh, support);
    const SpectralProblem problem = build_problem(mesh->mesh, f);
    SolveOptions opts;
    if (!(eig_tol > 0.0)) throw Error::config("eig_tol must be positive");
    opts.eig_tol = eig_tol;
    const EigenPackage pkg = solve_spectrum(problem, count + 1, opts);
    const Eigen::VectorXd& src = renormalized ? pkg.renormalized : pkg.values;
    for (int i = 0; i < count; ++i) values[i] = src(i + 1);
    return EF_OK;
  });
}

}  // extern "C"
