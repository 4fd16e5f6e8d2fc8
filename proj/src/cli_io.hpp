#pragma once

#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "flow.hpp"

namespace eigenflow {

// Everything a run needs, filled from an INI-style config file ("key = value"
// under [section] headers) plus optional per-key overrides.  Field names
// below mirror the section.key names exactly; see parse_config.
struct RunConfig {
  // [mesh] — either a path to an ASCII OFF file or a built-in generator.
  std::string mesh_path;                     // mesh.path (wins over generator)
  std::string mesh_generator = "icosphere";  // mesh.generator
  int mesh_level = 2;                        // mesh.level (generator parameter)
  int refine = 0;                            // mesh.refine (midpoint refinements)
  bool sphere_project = false;               // mesh.sphere_project

  // [functional] — kind, form, indices, coefficients.  Custom functional
  // forms are callbacks and cannot be expressed in a config file.
  FunctionalSpec functional;

  // [factor] — the initial conformal density.
  std::string factor_init = "uniform";  // uniform | perturbed | file
  double factor_amplitude = 0.3;        // factor.amplitude, in [0, 1)
  std::uint64_t factor_seed = 17;       // factor.seed
  std::string factor_path;              // factor.path (.field file, init = file)

  // [solver] / [candidates] — shared by every subcommand; resolve_config
  // copies them into flow.solver / flow.candidates and minmax.flow.
  SolveOptions solver;
  GenerateOptions candidates;

  // [flow] / [minmax]
  FlowConfig flow;
  MinmaxConfig minmax;
  int minmax_interior_nodes = 15;          // minmax.interior_nodes
  std::string minmax_end_init = "perturbed";  // minmax.end_init
  double minmax_end_amplitude = 0.3;       // minmax.end_amplitude
  std::uint64_t minmax_end_seed = 99;      // minmax.end_seed
  std::string minmax_end_path;             // minmax.end_path

  // [run]
  std::string out = "out";            // run.out (artifact directory)
  int count = 8;                      // run.count (eigenvalues above constant)
  double criticality_tol = 0.05;      // run.criticality_tol (relative)
  int k_m = 1;                        // run.k_m (concentration reference index)
  std::vector<double> radii = {0.35, 0.55};  // run.radii (geodesic ball grid)
  int max_centers = 256;              // run.max_centers
  bool svg = true;                    // run.svg (emit line plots)
  bool dump_matrices = false;         // run.dump_matrices (MatrixMarket)
};

// Parse config text / file into a RunConfig.  Unknown sections or keys, bad
// numbers, and duplicate keys are ConfigErrors naming the offending line;
// unreadable files are IoErrors naming the path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Assign one "section.key" to its typed field (the same dispatch the parser
// uses), so callers can override single values after loading a file.
void apply_setting(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

// Copy the shared [solver]/[candidates]/[flow] blocks into the nested flow
// and minmax structs, then validate everything that is cheap to check before
// meshes are built.  Called by run(); idempotent.
void resolve_config(RunConfig& cfg);

// Deterministic JSON emission: keys in insertion order, two-space indent,
// numbers through "%.17g" (round-trip exact), non-finite numbers as the
// strings "inf"/"-inf"/"nan".  Identical data produces identical bytes.
class JsonWriter {
 public:
  JsonWriter();
  void begin_object(const std::string& key = "");
  void end_object();
  void begin_array(const std::string& key = "");
  void end_array();
  void field(const std::string& key, double v);
  void field(const std::string& key, int v);
  void field(const std::string& key, std::uint64_t v);
  void field(const std::string& key, bool v);
  void field(const std::string& key, const std::string& v);
  void field(const std::string& key, const char* v);
  void element(double v);
  void element(int v);
  void element(const std::string& v);
  // Convenience: an array field of doubles / ints in one call.
  void array(const std::string& key, const Eigen::VectorXd& v);
  void array(const std::string& key, const std::vector<double>& v);
  void array(const std::string& key, const std::vector<int>& v);
  std::string str();  // closes the root object; writer is spent afterwards

  static std::string number(double v);  // the shared "%.17g" formatting

 private:
  void indent();
  void key_prefix(const std::string& key);
  std::string out_;
  std::vector<char> stack_;  // '{' or '['
  std::vector<bool> first_;
  bool done_ = false;
};

// Build the mesh / initial factor a config describes (shared by subcommands
// and by embedders who want the pieces without the artifact layer).
TriMesh build_mesh(const RunConfig& cfg);
ConformalFactor build_factor(const RunConfig& cfg, const TriMesh& mesh);

// Per-vertex scalar field files: one "%.17g" value per line, aligned to mesh
// vertex order (boundary-supported data is expanded with `fill` at interior
// vertices: 1 for densities, 0 for measures).  Readers accept exactly
// vertex_count lines.
void write_field(const std::string& path, const TriMesh& mesh, FactorSupport support,
                 const Eigen::VectorXd& values, double fill = 1.0);
Eigen::VectorXd read_field(const std::string& path, int vertex_count);

// Execute one subcommand (spectrum | subgrad | flow | minmax | diagnose),
// write <out>/{summary.json, trace.csv, *.field, *.svg} as applicable, and
// return the summary JSON text.  Every summary embeds the resolved config.
// Throws Error; the caller maps Error::code to an exit status.
std::string run(const std::string& subcommand, const RunConfig& config);

}  // namespace eigenflow
