#ifndef EIGENFLOW_H
#define EIGENFLOW_H

/* C interface to the spectral-optimization library.  All functions return an
 * ef_status; on failure ef_last_error() carries a human-readable message for
 * the calling thread.  Handles are opaque and must be released with their
 * matching *_free function. */

#ifdef __cplusplus
extern "C" {
#endif

/* Mirrors the library's error classification; doubles as a CLI exit code. */
typedef enum ef_status {
  EF_OK = 0,
  EF_ERR_CONFIG = 1,  /* bad configuration or invalid request */
  EF_ERR_NUMERIC = 2, /* solver failure, degenerate geometry */
  EF_ERR_IO = 3       /* file system or parse problems */
} ef_status;

/* Message for the last failing call on this thread ("" after a success).
 * Valid until the next API call from the same thread. */
const char* ef_last_error(void);

void ef_version(int* major, int* minor, int* patch);

/* ---- configuration ---------------------------------------------------- */
typedef struct ef_config ef_config;

/* A config with library defaults. */
ef_status ef_config_create(ef_config** out);
/* INI-style text: "key = value" lines under [section] headers. */
ef_status ef_config_parse(const char* text, ef_config** out);
ef_status ef_config_load(const char* path, ef_config** out);
/* Override one value by its dotted name, e.g. ("mesh.level", "4"). */
ef_status ef_config_set(ef_config* cfg, const char* dotted_key, const char* value);
void ef_config_free(ef_config* cfg);

/* ---- runs -------------------------------------------------------------- */
/* Execute one subcommand (spectrum | subgrad | flow | minmax | diagnose),
 * writing summary.json and companion artifacts under the configured output
 * directory.  On success *summary_json (when not NULL) receives the malloc'd
 * summary text; release it with ef_string_free. */
ef_status ef_run(const ef_config* cfg, const char* subcommand, char** summary_json);
void ef_string_free(char* s);

/* ---- direct mesh access ------------------------------------------------ */
typedef struct ef_mesh ef_mesh;

ef_status ef_mesh_load_off(const char* path, ef_mesh** out);
/* generator: octahedron | icosahedron | icosphere | flat_torus | unit_disk |
 * square_with_hole; `level` is the generator parameter where one applies. */
ef_status ef_mesh_generate(const char* generator, int level, ef_mesh** out);
/* Midpoint 1->4 refinement; nonzero sphere_project normalizes new vertices
 * to the unit sphere. */
ef_status ef_mesh_refine(ef_mesh* mesh, int levels, int sphere_project);
ef_status ef_mesh_save_off(const ef_mesh* mesh, const char* path);
/* 0 when mesh is NULL. */
int ef_mesh_vertex_count(const ef_mesh* mesh);
int ef_mesh_triangle_count(const ef_mesh* mesh);
void ef_mesh_free(ef_mesh* mesh);

/* Lowest `count` eigenvalues above the constant mode for the uniform unit
 * density, ascending, written to values[0..count-1].  kind is "laplace" or
 * "steklov"; nonzero `renormalized` multiplies by the total measure. */
ef_status ef_spectrum_compute(const ef_mesh* mesh, const char* kind, int count,
                              double eig_tol, int renormalized, double* values);

#ifdef __cplusplus
}
#endif

#endif /* EIGENFLOW_H */
