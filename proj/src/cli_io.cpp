#include "cli_io.hpp"

#include <algorithm>
#include <cerrno>
#include <climits>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "errors.hpp"
#include "fem.hpp"

namespace eigenflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> parts;
  std::string p;
  while (in >> p) parts.push_back(p);
  return parts;
}

double parse_double(const std::string& key, const std::string& s) {
  const char* c = s.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(c, &end);
  if (end == c || *end != '\0')
    throw Error::config("bad number for " + key + ": '" + s + "'");
  return v;  // inf is legal (e.g. flow.ps_eps = inf disables the stopping rule)
}

int parse_int(const std::string& key, const std::string& s) {
  const char* c = s.c_str();
  char* end = nullptr;
  errno = 0;
  const long v = std::strtol(c, &end, 10);
  if (end == c || *end != '\0' || errno == ERANGE || v < INT_MIN || v > INT_MAX)
    throw Error::config("bad integer for " + key + ": '" + s + "'");
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& s) {
  if (s.empty() || s[0] == '-')
    throw Error::config("bad seed for " + key + ": '" + s + "'");
  const char* c = s.c_str();
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(c, &end, 10);
  if (end == c || *end != '\0' || errno == ERANGE)
    throw Error::config("bad seed for " + key + ": '" + s + "'");
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw Error::config("bad boolean for " + key + ": '" + s + "' (use true/false)");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& s) {
  std::vector<int> out;
  for (const std::string& p : split_ws(s)) out.push_back(parse_int(key, p));
  return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const std::string& p : split_ws(s)) out.push_back(parse_double(key, p));
  return out;
}

const char* kind_name(ProblemKind k) {
  return k == ProblemKind::laplace ? "laplace" : "steklov";
}

const char* form_name(FunctionalForm f) {
  switch (f) {
    case FunctionalForm::neg_sum: return "neg_sum";
    case FunctionalForm::inv_sum: return "inv_sum";
    default: return "custom";
  }
}

bool known_init(const std::string& s) {
  return s == "uniform" || s == "perturbed" || s == "file";
}

}  // namespace

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  // [mesh]
  if (key == "mesh.path") { cfg.mesh_path = value; return; }
  if (key == "mesh.generator") { cfg.mesh_generator = value; return; }
  if (key == "mesh.level") { cfg.mesh_level = parse_int(key, value); return; }
  if (key == "mesh.refine") { cfg.refine = parse_int(key, value); return; }
  if (key == "mesh.sphere_project") { cfg.sphere_project = parse_bool(key, value); return; }
  // [functional]
  if (key == "functional.kind") {
    if (value == "laplace") cfg.functional.kind = ProblemKind::laplace;
    else if (value == "steklov") cfg.functional.kind = ProblemKind::steklov;
    else throw Error::config("bad value for " + key + ": '" + value + "' (laplace|steklov)");
    return;
  }
  if (key == "functional.form") {
    if (value == "neg_sum") cfg.functional.form = FunctionalForm::neg_sum;
    else if (value == "inv_sum") cfg.functional.form = FunctionalForm::inv_sum;
    else throw Error::config("bad value for " + key + ": '" + value +
                             "' (neg_sum|inv_sum; custom forms are callbacks, not config)");
    return;
  }
  if (key == "functional.indices") { cfg.functional.indices = parse_int_list(key, value); return; }
  if (key == "functional.coefficients") {
    const std::vector<double> c = parse_double_list(key, value);
    cfg.functional.coefficients =
        Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    return;
  }
  // [factor]
  if (key == "factor.init") { cfg.factor_init = value; return; }
  if (key == "factor.amplitude") { cfg.factor_amplitude = parse_double(key, value); return; }
  if (key == "factor.seed") { cfg.factor_seed = parse_u64(key, value); return; }
  if (key == "factor.path") { cfg.factor_path = value; return; }
  // [solver]
  if (key == "solver.eig_tol") { cfg.solver.eig_tol = parse_double(key, value); return; }
  if (key == "solver.cluster_tol") { cfg.solver.cluster_tol = parse_double(key, value); return; }
  if (key == "solver.max_iterations") { cfg.solver.max_iterations = parse_int(key, value); return; }
  if (key == "solver.seed") { cfg.solver.seed = parse_u64(key, value); return; }
  // [candidates]
  if (key == "candidates.samples") { cfg.candidates.samples = parse_int(key, value); return; }
  if (key == "candidates.seed") { cfg.candidates.seed = parse_u64(key, value); return; }
  if (key == "candidates.max_cluster") { cfg.candidates.max_cluster = parse_int(key, value); return; }
  // [flow]
  if (key == "flow.dt_init") { cfg.flow.dt_init = parse_double(key, value); return; }
  if (key == "flow.dt_min") { cfg.flow.dt_min = parse_double(key, value); return; }
  if (key == "flow.dt_max") { cfg.flow.dt_max = parse_double(key, value); return; }
  if (key == "flow.armijo_c") { cfg.flow.armijo_c = parse_double(key, value); return; }
  if (key == "flow.ps_eps") { cfg.flow.ps_eps = parse_double(key, value); return; }
  if (key == "flow.ps_eps_rel") { cfg.flow.ps_eps_rel = parse_double(key, value); return; }
  if (key == "flow.max_steps") { cfg.flow.max_steps = parse_int(key, value); return; }
  if (key == "flow.f_floor") { cfg.flow.f_floor = parse_double(key, value); return; }
  if (key == "flow.renormalize") { cfg.flow.renormalize_each_step = parse_bool(key, value); return; }
  if (key == "flow.smooth_rounds") { cfg.flow.smooth_rounds = parse_int(key, value); return; }
  if (key == "flow.snapshot_every") { cfg.flow.snapshot_every = parse_int(key, value); return; }
  // [minmax]
  if (key == "minmax.sweeps") { cfg.minmax.sweeps = parse_int(key, value); return; }
  if (key == "minmax.interior_nodes") { cfg.minmax_interior_nodes = parse_int(key, value); return; }
  if (key == "minmax.level_eps_rel") { cfg.minmax.level_eps_rel = parse_double(key, value); return; }
  if (key == "minmax.reparametrize") { cfg.minmax.reparametrize = parse_bool(key, value); return; }
  if (key == "minmax.stall_rtol") { cfg.minmax.stall_rtol = parse_double(key, value); return; }
  if (key == "minmax.patience") { cfg.minmax.patience = parse_int(key, value); return; }
  if (key == "minmax.step_over_spacing") { cfg.minmax.step_over_spacing = parse_double(key, value); return; }
  if (key == "minmax.level_refine") { cfg.minmax.level_refine = parse_int(key, value); return; }
  if (key == "minmax.end_init") { cfg.minmax_end_init = value; return; }
  if (key == "minmax.end_amplitude") { cfg.minmax_end_amplitude = parse_double(key, value); return; }
  if (key == "minmax.end_seed") { cfg.minmax_end_seed = parse_u64(key, value); return; }
  if (key == "minmax.end_path") { cfg.minmax_end_path = value; return; }
  // [run]
  if (key == "run.out") { cfg.out = value; return; }
  if (key == "run.count") { cfg.count = parse_int(key, value); return; }
  if (key == "run.criticality_tol") { cfg.criticality_tol = parse_double(key, value); return; }
  if (key == "run.k_m") { cfg.k_m = parse_int(key, value); return; }
  if (key == "run.radii") { cfg.radii = parse_double_list(key, value); return; }
  if (key == "run.max_centers") { cfg.max_centers = parse_int(key, value); return; }
  if (key == "run.svg") { cfg.svg = parse_bool(key, value); return; }
  if (key == "run.dump_matrices") { cfg.dump_matrices = parse_bool(key, value); return; }
  throw Error::config("unknown config key: " + key);
}

RunConfig parse_config(const std::string& text) {
  static const char* sections[] = {"mesh", "functional", "factor", "solver",
                                   "candidates", "flow", "minmax", "run"};
  RunConfig cfg;
  std::istringstream in(text);
  std::string line, section;
  std::vector<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto cut = line.find_first_of("#;");
    if (cut != std::string::npos) line.erase(cut);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = " (line " + std::to_string(lineno) + ")";
    if (line.front() == '[') {
      if (line.back() != ']')
        throw Error::config("unterminated section header" + at);
      section = trim(line.substr(1, line.size() - 2));
      if (std::find_if(std::begin(sections), std::end(sections), [&](const char* s) {
            return section == s;
          }) == std::end(sections))
        throw Error::config("unknown config section [" + section + "]" + at);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error::config("expected key = value" + at + ": '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error::config("empty key" + at);
    if (section.empty())
      throw Error::config("key '" + key + "' appears before any [section]" + at);
    const std::string dotted = section + "." + key;
    if (std::find(seen.begin(), seen.end(), dotted) != seen.end())
      throw Error::config("duplicate config key " + dotted + at);
    seen.push_back(dotted);
    apply_setting(cfg, dotted, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void resolve_config(RunConfig& cfg) {
  if (cfg.functional.indices.empty()) cfg.functional.indices = {1};
  if (cfg.functional.coefficients.size() == 0)
    cfg.functional.coefficients =
        Eigen::VectorXd::Ones(static_cast<Eigen::Index>(cfg.functional.indices.size()));
  validate(cfg.functional);
  if (!cfg.mesh_path.empty()) {
    // load path wins; generator fields are ignored
  } else {
    static const char* generators[] = {"octahedron",   "icosahedron", "icosphere",
                                       "flat_torus",   "unit_disk",   "square_with_hole"};
    if (std::find_if(std::begin(generators), std::end(generators), [&](const char* g) {
          return cfg.mesh_generator == g;
        }) == std::end(generators))
      throw Error::config("unknown mesh.generator: '" + cfg.mesh_generator + "'");
  }
  if (cfg.mesh_level < 0) throw Error::config("mesh.level must be >= 0");
  if (cfg.refine < 0) throw Error::config("mesh.refine must be >= 0");
  if (!known_init(cfg.factor_init))
    throw Error::config("factor.init must be uniform, perturbed, or file");
  if (cfg.factor_init == "file" && cfg.factor_path.empty())
    throw Error::config("factor.init = file needs factor.path");
  if (!known_init(cfg.minmax_end_init))
    throw Error::config("minmax.end_init must be uniform, perturbed, or file");
  if (cfg.minmax_end_init == "file" && cfg.minmax_end_path.empty())
    throw Error::config("minmax.end_init = file needs minmax.end_path");
  if (!(cfg.solver.eig_tol > 0.0) || !(cfg.solver.cluster_tol > 0.0))
    throw Error::config("solver tolerances must be positive");
  if (cfg.solver.max_iterations < 1)
    throw Error::config("solver.max_iterations must be >= 1");
  if (cfg.candidates.samples < 0) throw Error::config("candidates.samples must be >= 0");
  if (cfg.candidates.max_cluster < 1) throw Error::config("candidates.max_cluster must be >= 1");
  if (!(cfg.flow.dt_min > 0.0) || !(cfg.flow.dt_init >= cfg.flow.dt_min) ||
      !(cfg.flow.dt_max >= cfg.flow.dt_init))
    throw Error::config("need 0 < flow.dt_min <= flow.dt_init <= flow.dt_max");
  if (!(cfg.flow.armijo_c > 0.0) || !(cfg.flow.armijo_c < 1.0))
    throw Error::config("flow.armijo_c must lie in (0,1)");
  if (!(cfg.flow.f_floor > 0.0)) throw Error::config("flow.f_floor must be positive");
  if (cfg.flow.max_steps < 0 || cfg.flow.smooth_rounds < 0 || cfg.flow.snapshot_every < 0)
    throw Error::config("negative flow step counters");
  if (cfg.flow.ps_eps < 0.0 || cfg.flow.ps_eps_rel < 0.0)
    throw Error::config("flow stopping targets must be nonnegative");
  if (cfg.minmax.sweeps < 0 || cfg.minmax.patience < 1 || cfg.minmax.level_eps_rel < 0.0 ||
      !(cfg.minmax.step_over_spacing > 0.0) || cfg.minmax.level_refine < 0)
    throw Error::config("bad minmax sweep parameters");
  if (cfg.minmax_interior_nodes < 1)
    throw Error::config("minmax.interior_nodes must be >= 1");
  if (cfg.out.empty()) throw Error::config("run.out must name a directory");
  if (cfg.count < 1) throw Error::config("run.count must be >= 1");
  if (!(cfg.criticality_tol > 0.0))
    throw Error::config("run.criticality_tol must be positive");
  if (cfg.k_m < 1) throw Error::config("run.k_m must be >= 1");
  if (cfg.max_centers < 1) throw Error::config("run.max_centers must be >= 1");
  cfg.flow.solver = cfg.solver;
  cfg.flow.candidates = cfg.candidates;
  cfg.minmax.flow = cfg.flow;
}

// ---------------------------------------------------------------------------
// JSON

JsonWriter::JsonWriter() {
  out_ = "{";
  stack_.push_back('{');
  first_.push_back(true);
}

std::string JsonWriter::number(double v) {
  if (std::isnan(v)) return "\"nan\"";
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {
std::string json_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}
}  // namespace

void JsonWriter::indent() {
  out_ += '\n';
  out_.append(2 * stack_.size(), ' ');
}

void JsonWriter::key_prefix(const std::string& key) {
  if (done_ || stack_.empty()) throw Error::invalid("json writer is closed");
  if (stack_.back() == '{' && key.empty())
    throw Error::invalid("json object member needs a key");
  if (stack_.back() == '[' && !key.empty())
    throw Error::invalid("json array element cannot carry a key");
  if (!first_.back()) out_ += ',';
  first_.back() = false;
  indent();
  if (!key.empty()) {
    out_ += '"';
    out_ += json_escape(key);
    out_ += "\": ";
  }
}

void JsonWriter::begin_object(const std::string& key) {
  key_prefix(key);
  out_ += '{';
  stack_.push_back('{');
  first_.push_back(true);
}

void JsonWriter::end_object() {
  if (done_ || stack_.size() < 2 || stack_.back() != '{')
    throw Error::invalid("unbalanced json object");
  const bool empty = first_.back();
  stack_.pop_back();
  first_.pop_back();
  if (!empty) {
    out_ += '\n';
    out_.append(2 * stack_.size(), ' ');
  }
  out_ += '}';
}

void JsonWriter::begin_array(const std::string& key) {
  key_prefix(key);
  out_ += '[';
  stack_.push_back('[');
  first_.push_back(true);
}

void JsonWriter::end_array() {
  if (done_ || stack_.size() < 2 || stack_.back() != '[')
    throw Error::invalid("unbalanced json array");
  const bool empty = first_.back();
  stack_.pop_back();
  first_.pop_back();
  if (!empty) {
    out_ += '\n';
    out_.append(2 * stack_.size(), ' ');
  }
  out_ += ']';
}

void JsonWriter::field(const std::string& key, double v) {
  key_prefix(key);
  out_ += number(v);
}

void JsonWriter::field(const std::string& key, int v) {
  key_prefix(key);
  out_ += std::to_string(v);
}

void JsonWriter::field(const std::string& key, std::uint64_t v) {
  key_prefix(key);
  out_ += std::to_string(v);
}

void JsonWriter::field(const std::string& key, bool v) {
  key_prefix(key);
  out_ += v ? "true" : "false";
}

void JsonWriter::field(const std::string& key, const std::string& v) {
  key_prefix(key);
  out_ += '"';
  out_ += json_escape(v);
  out_ += '"';
}

void JsonWriter::field(const std::string& key, const char* v) {
  field(key, std::string(v));
}

void JsonWriter::element(double v) {
  key_prefix("");
  out_ += number(v);
}

void JsonWriter::element(int v) {
  key_prefix("");
  out_ += std::to_string(v);
}

void JsonWriter::element(const std::string& v) {
  key_prefix("");
  out_ += '"';
  out_ += json_escape(v);
  out_ += '"';
}

void JsonWriter::array(const std::string& key, const Eigen::VectorXd& v) {
  begin_array(key);
  for (Eigen::Index i = 0; i < v.size(); ++i) element(v(i));
  end_array();
}

void JsonWriter::array(const std::string& key, const std::vector<double>& v) {
  begin_array(key);
  for (const double x : v) element(x);
  end_array();
}

void JsonWriter::array(const std::string& key, const std::vector<int>& v) {
  begin_array(key);
  for (const int x : v) element(x);
  end_array();
}

std::string JsonWriter::str() {
  if (done_) throw Error::invalid("json writer is closed");
  if (stack_.size() != 1) throw Error::invalid("unbalanced json writer");
  const bool empty = first_.back();
  stack_.pop_back();
  first_.pop_back();
  out_ += empty ? "}" : "\n}";
  out_ += '\n';
  done_ = true;
  return out_;
}

// ---------------------------------------------------------------------------
// Inputs

TriMesh build_mesh(const RunConfig& cfg) {
  TriMesh mesh = [&] {
    if (!cfg.mesh_path.empty()) return TriMesh::load_off(cfg.mesh_path);
    const std::string& g = cfg.mesh_generator;
    if (g == "octahedron") return TriMesh::octahedron();
    if (g == "icosahedron") return TriMesh::icosahedron();
    if (g == "icosphere") return TriMesh::icosphere(cfg.mesh_level);
    if (g == "flat_torus") return TriMesh::flat_torus(cfg.mesh_level);
    if (g == "unit_disk") return TriMesh::unit_disk(cfg.mesh_level);
    if (g == "square_with_hole") return TriMesh::square_with_hole();
    throw Error::config("unknown mesh.generator: '" + g + "'");
  }();
  if (cfg.refine > 0) mesh = mesh.refined(cfg.refine, cfg.sphere_project);
  return mesh;
}

namespace {

ConformalFactor factor_from_field(const TriMesh& mesh, FactorSupport support,
                                  const std::string& path) {
  const Eigen::VectorXd full = read_field(path, mesh.vertex_count());
  ConformalFactor f;
  f.support = support;
  if (support == FactorSupport::area) {
    f.values = full;
  } else {
    const std::vector<int>& bv = mesh.boundary_vertices();
    f.values.resize(static_cast<Eigen::Index>(bv.size()));
    for (std::size_t i = 0; i < bv.size(); ++i) f.values(static_cast<Eigen::Index>(i)) = full(bv[i]);
  }
  if (!(f.values.minCoeff() > 0.0))
    throw Error::config("factor field carries non-positive values: " + path);
  return f;
}

ConformalFactor make_factor(const TriMesh& mesh, FactorSupport support,
                            const std::string& init, double amplitude,
                            std::uint64_t seed, const std::string& path) {
  if (init == "uniform") return uniform_factor(mesh, support);
  if (init == "perturbed") return perturbed_factor(mesh, support, amplitude, seed);
  if (init == "file") return factor_from_field(mesh, support, path);
  throw Error::config("unknown factor init: '" + init + "'");
}

}  // namespace

ConformalFactor build_factor(const RunConfig& cfg, const TriMesh& mesh) {
  const FactorSupport support = cfg.functional.kind == ProblemKind::laplace
                                    ? FactorSupport::area
                                    : FactorSupport::boundary;
  return make_factor(mesh, support, cfg.factor_init, cfg.factor_amplitude,
                     cfg.factor_seed, cfg.factor_path);
}

void write_field(const std::string& path, const TriMesh& mesh, FactorSupport support,
                 const Eigen::VectorXd& values, double fill) {
  const int n = mesh.vertex_count();
  Eigen::VectorXd full = Eigen::VectorXd::Constant(n, fill);
  if (support == FactorSupport::area) {
    if (values.size() != n)
      throw Error::invalid("field length does not match the vertex count");
    full = values;
  } else {
    const std::vector<int>& bv = mesh.boundary_vertices();
    if (values.size() != static_cast<Eigen::Index>(bv.size()))
      throw Error::invalid("field length does not match the boundary vertex count");
    for (std::size_t i = 0; i < bv.size(); ++i) full(bv[i]) = values(static_cast<Eigen::Index>(i));
  }
  std::ofstream out(path);
  if (!out) throw Error::io("cannot write field file: " + path);
  char buf[40];
  for (int v = 0; v < n; ++v) {
    std::snprintf(buf, sizeof buf, "%.17g", full(v));
    out << buf << '\n';
  }
  out.flush();
  if (!out) throw Error::io("failed writing field file: " + path);
}

Eigen::VectorXd read_field(const std::string& path, int vertex_count) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open field file: " + path);
  std::vector<double> vals;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const char* c = line.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(c, &end);
    if (end == c || *end != '\0')
      throw Error::parse("bad field value at line " + std::to_string(lineno) + ": " + path);
    vals.push_back(v);
  }
  if (static_cast<int>(vals.size()) != vertex_count)
    throw Error::parse("field file has " + std::to_string(vals.size()) + " values, expected " +
                       std::to_string(vertex_count) + ": " + path);
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

// ---------------------------------------------------------------------------
// Artifacts

namespace {

std::string fmt(const char* f, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot write file: " + path);
  out << text;
  out.flush();
  if (!out) throw Error::io("failed writing file: " + path);
}

// Static line plot; everything derived from the data so identical inputs give
// identical bytes.
void write_line_plot(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<double>& xs, const std::vector<double>& ys) {
  const double W = 640, H = 400, L = 70, R = 620, T = 40, B = 350;
  std::vector<double> px, py;
  for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i)
    if (std::isfinite(xs[i]) && std::isfinite(ys[i])) {
      px.push_back(xs[i]);
      py.push_back(ys[i]);
    }
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!px.empty()) {
    xmin = *std::min_element(px.begin(), px.end());
    xmax = *std::max_element(px.begin(), px.end());
    ymin = *std::min_element(py.begin(), py.end());
    ymax = *std::max_element(py.begin(), py.end());
  }
  if (!(xmax > xmin)) { xmin -= 0.5; xmax += 0.5; }
  const double ypad = (ymax > ymin) ? 0.0 : std::max(0.5, std::abs(ymax) * 0.05);
  ymin -= ypad;
  ymax += ypad;
  auto mx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (R - L); };
  auto my = [&](double y) { return B - (y - ymin) / (ymax - ymin) * (B - T); };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
       "viewBox=\"0 0 640 400\">\n";
  s += "<rect width=\"" + fmt("%.0f", W) + "\" height=\"" + fmt("%.0f", H) +
       "\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" "
       "font-size=\"14\">" + title + "</text>\n";
  s += "<line x1=\"70\" y1=\"350\" x2=\"620\" y2=\"350\" stroke=\"black\"/>\n";
  s += "<line x1=\"70\" y1=\"40\" x2=\"70\" y2=\"350\" stroke=\"black\"/>\n";
  s += "<text x=\"345\" y=\"388\" text-anchor=\"middle\" font-family=\"monospace\" "
       "font-size=\"12\">" + x_label + "</text>\n";
  s += "<text x=\"18\" y=\"195\" transform=\"rotate(-90 18 195)\" text-anchor=\"middle\" "
       "font-family=\"monospace\" font-size=\"12\">" + y_label + "</text>\n";
  s += "<text x=\"70\" y=\"366\" text-anchor=\"middle\" font-family=\"monospace\" "
       "font-size=\"11\">" + fmt("%.6g", xmin) + "</text>\n";
  s += "<text x=\"620\" y=\"366\" text-anchor=\"middle\" font-family=\"monospace\" "
       "font-size=\"11\">" + fmt("%.6g", xmax) + "</text>\n";
  s += "<text x=\"64\" y=\"354\" text-anchor=\"end\" font-family=\"monospace\" "
       "font-size=\"11\">" + fmt("%.6g", ymin) + "</text>\n";
  s += "<text x=\"64\" y=\"44\" text-anchor=\"end\" font-family=\"monospace\" "
       "font-size=\"11\">" + fmt("%.6g", ymax) + "</text>\n";
  if (px.size() == 1) {
    s += "<circle cx=\"" + fmt("%.2f", mx(px[0])) + "\" cy=\"" + fmt("%.2f", my(py[0])) +
         "\" r=\"3\" fill=\"#2266aa\"/>\n";
  } else if (!px.empty()) {
    s += "<polyline fill=\"none\" stroke=\"#2266aa\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < px.size(); ++i) {
      if (i) s += ' ';
      s += fmt("%.2f", mx(px[i])) + "," + fmt("%.2f", my(py[i]));
    }
    s += "\"/>\n";
  }
  s += "</svg>\n";
  write_text_file(path, s);
}

std::string join(const std::filesystem::path& dir, const std::string& name) {
  return (dir / name).string();
}

void write_config_json(JsonWriter& w, const RunConfig& cfg) {
  w.begin_object("config");
  w.begin_object("mesh");
  w.field("path", cfg.mesh_path);
  w.field("generator", cfg.mesh_generator);
  w.field("level", cfg.mesh_level);
  w.field("refine", cfg.refine);
  w.field("sphere_project", cfg.sphere_project);
  w.end_object();
  w.begin_object("functional");
  w.field("kind", kind_name(cfg.functional.kind));
  w.field("form", form_name(cfg.functional.form));
  w.array("indices", cfg.functional.indices);
  w.array("coefficients", cfg.functional.coefficients);
  w.end_object();
  w.begin_object("factor");
  w.field("init", cfg.factor_init);
  w.field("amplitude", cfg.factor_amplitude);
  w.field("seed", cfg.factor_seed);
  w.field("path", cfg.factor_path);
  w.end_object();
  w.begin_object("solver");
  w.field("eig_tol", cfg.solver.eig_tol);
  w.field("cluster_tol", cfg.solver.cluster_tol);
  w.field("max_iterations", cfg.solver.max_iterations);
  w.field("seed", cfg.solver.seed);
  w.end_object();
  w.begin_object("candidates");
  w.field("samples", cfg.candidates.samples);
  w.field("seed", cfg.candidates.seed);
  w.field("max_cluster", cfg.candidates.max_cluster);
  w.end_object();
  w.begin_object("flow");
  w.field("dt_init", cfg.flow.dt_init);
  w.field("dt_min", cfg.flow.dt_min);
  w.field("dt_max", cfg.flow.dt_max);
  w.field("armijo_c", cfg.flow.armijo_c);
  w.field("ps_eps", cfg.flow.ps_eps);
  w.field("ps_eps_rel", cfg.flow.ps_eps_rel);
  w.field("max_steps", cfg.flow.max_steps);
  w.field("f_floor", cfg.flow.f_floor);
  w.field("renormalize", cfg.flow.renormalize_each_step);
  w.field("smooth_rounds", cfg.flow.smooth_rounds);
  w.field("snapshot_every", cfg.flow.snapshot_every);
  w.end_object();
  w.begin_object("minmax");
  w.field("sweeps", cfg.minmax.sweeps);
  w.field("interior_nodes", cfg.minmax_interior_nodes);
  w.field("level_eps_rel", cfg.minmax.level_eps_rel);
  w.field("reparametrize", cfg.minmax.reparametrize);
  w.field("stall_rtol", cfg.minmax.stall_rtol);
  w.field("patience", cfg.minmax.patience);
  w.field("step_over_spacing", cfg.minmax.step_over_spacing);
  w.field("level_refine", cfg.minmax.level_refine);
  w.field("end_init", cfg.minmax_end_init);
  w.field("end_amplitude", cfg.minmax_end_amplitude);
  w.field("end_seed", cfg.minmax_end_seed);
  w.field("end_path", cfg.minmax_end_path);
  w.end_object();
  w.begin_object("run");
  w.field("out", cfg.out);
  w.field("count", cfg.count);
  w.field("criticality_tol", cfg.criticality_tol);
  w.field("k_m", cfg.k_m);
  w.array("radii", cfg.radii);
  w.field("max_centers", cfg.max_centers);
  w.field("svg", cfg.svg);
  w.field("dump_matrices", cfg.dump_matrices);
  w.end_object();
  w.end_object();
}

void write_mesh_json(JsonWriter& w, const TriMesh& mesh) {
  w.begin_object("mesh_info");
  w.field("vertices", mesh.vertex_count());
  w.field("triangles", mesh.triangle_count());
  w.field("edges", mesh.edge_count());
  w.field("euler_characteristic", mesh.euler_characteristic());
  w.field("genus", mesh.genus());
  w.field("boundary_loops", static_cast<int>(mesh.boundary_loops().size()));
  w.field("total_area", mesh.total_area());
  w.end_object();
}

void write_evaluation_json(JsonWriter& w, const Evaluation& ev) {
  w.begin_object("energy");
  w.field("value", ev.value);
  w.array("indices", ev.indices);
  w.array("lambda_bar", ev.lambda_bar);
  w.array("gradient", ev.d);
  w.field("total_measure", ev.problem->total_measure);
  w.field("monotonicity_warning", ev.monotonicity_warning);
  w.end_object();
}

void write_sparse_vector(JsonWriter& w, const std::string& key, const Eigen::VectorXd& v,
                         const std::vector<int>* labels) {
  w.begin_array(key);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) <= 1e-12) continue;
    w.begin_object();
    w.field("index", labels ? (*labels)[static_cast<std::size_t>(i)] : static_cast<int>(i));
    w.field("weight", v(i));
    w.end_object();
  }
  w.end_array();
}

void write_criticality_json(JsonWriter& w, const SubgradientSet& set,
                            const PseudoNormResult& pn, const CriticalityReport& crit,
                            double tol_abs) {
  w.field("pseudo_norm", pn.value);
  w.field("duality_gap", pn.duality_gap);
  w.field("scale", set.scale);
  w.field("candidates", static_cast<int>(set.candidates.size()));
  w.begin_array("provenances");
  for (const Subgradient& g : set.candidates) w.element(g.provenance);
  w.end_array();
  write_sparse_vector(w, "tau", pn.tau, &set.active);
  w.field("critical", crit.critical);
  w.begin_object("certificate");
  w.field("tolerance", tol_abs);
  w.field("value", crit.value);
  w.field("duality_gap", crit.duality_gap);
  w.field("mix_residual", crit.mix_residual);
  w.field("nonneg_member", crit.nonneg_member);
  write_sparse_vector(w, "mix", crit.mix, nullptr);
  w.end_object();
}

void dump_matrices(const RunConfig& cfg, const SpectralProblem& problem,
                   const std::filesystem::path& dir) {
  if (!cfg.dump_matrices) return;
  write_matrix_market(problem.stiffness, join(dir, "stiffness.mtx"));
  Eigen::SparseMatrix<double> mass(problem.mass.size(), problem.mass.size());
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index i = 0; i < problem.mass.size(); ++i)
    if (problem.mass(i) != 0.0) trips.emplace_back(i, i, problem.mass(i));
  mass.setFromTriplets(trips.begin(), trips.end());
  write_matrix_market(mass, join(dir, "mass.mtx"));
}

// --- subcommands ---

void run_spectrum(const RunConfig& cfg, const TriMesh& mesh,
                  const std::filesystem::path& dir, JsonWriter& w) {
  const ConformalFactor f = build_factor(cfg, mesh);
  const SpectralProblem problem = build_problem(mesh, f);
  const EigenPackage pkg = solve_spectrum(problem, cfg.count + 1, cfg.solver);
  w.begin_object("spectrum");
  w.field("kind", kind_name(cfg.functional.kind));
  w.field("total_measure", pkg.total_measure);
  w.array("values", pkg.values);
  w.array("renormalized", pkg.renormalized);
  w.array("residuals", pkg.residuals);
  w.begin_array("clusters");
  for (const std::vector<int>& c : pkg.clusters) {
    w.begin_array();
    for (const int i : c) w.element(i);
    w.end_array();
  }
  w.end_array();
  w.end_object();
  write_field(join(dir, "factor.field"), mesh, f.support, f.values);
  dump_matrices(cfg, problem, dir);
}

void run_subgrad(const RunConfig& cfg, const TriMesh& mesh,
                 const std::filesystem::path& dir, JsonWriter& w) {
  const ConformalFactor f = build_factor(cfg, mesh);
  const Evaluation ev = evaluate(cfg.functional, mesh, f, cfg.solver);
  const SubgradientSet set = generate_candidates(ev, cfg.candidates);
  const PseudoNormResult pn = pseudo_norm(set);
  const CriticalityReport crit = is_critical(set, cfg.criticality_tol * set.scale);
  write_evaluation_json(w, ev);
  w.begin_object("subgrad");
  write_criticality_json(w, set, pn, crit, cfg.criticality_tol * set.scale);
  w.end_object();
  write_field(join(dir, "factor.field"), mesh, f.support, f.values);
  write_field(join(dir, "tau.field"), mesh, f.support, pn.tau, 0.0);
  dump_matrices(cfg, *ev.problem, dir);
}

void write_flow_trace_csv(const std::string& path, const FlowTrace& trace) {
  std::string s = "step,energy,pseudo_norm,dt,accepted,ps_target\n";
  for (const FlowRecord& r : trace.records) {
    s += std::to_string(r.step) + "," + JsonWriter::number(r.energy) + "," +
         JsonWriter::number(r.pseudo_norm) + "," + JsonWriter::number(r.dt) + "," +
         (r.accepted ? "1" : "0") + "," + JsonWriter::number(r.ps_target) + "\n";
  }
  write_text_file(path, s);
}

void write_flow_summary_json(JsonWriter& w, const FlowTrace& trace) {
  w.begin_object("flow");
  w.field("records", static_cast<int>(trace.records.size()));
  int accepted = 0;
  for (const FlowRecord& r : trace.records)
    if (r.accepted && r.step > 0) ++accepted;
  w.field("accepted_steps", accepted);
  w.field("reached_target", trace.reached_target);
  w.field("stalled", trace.stalled);
  w.array("ps_points", trace.ps_points);
  w.begin_object("initial");
  w.field("energy", trace.records.front().energy);
  w.field("pseudo_norm", trace.records.front().pseudo_norm);
  w.end_object();
  w.begin_object("final");
  w.field("energy", trace.records.back().energy);
  w.field("pseudo_norm", trace.records.back().pseudo_norm);
  w.field("ps_target", trace.records.back().ps_target);
  w.array("lambda_bar", trace.final_eval.lambda_bar);
  w.field("total_measure", trace.final_eval.problem->total_measure);
  w.end_object();
  w.end_object();
}

void run_flow_cmd(const RunConfig& cfg, const TriMesh& mesh,
                  const std::filesystem::path& dir, JsonWriter& w) {
  const ConformalFactor f0 = build_factor(cfg, mesh);
  const FlowTrace trace = run_flow(cfg.functional, mesh, f0, cfg.flow);
  write_flow_summary_json(w, trace);
  write_flow_trace_csv(join(dir, "trace.csv"), trace);
  write_field(join(dir, "factor_initial.field"), mesh, f0.support, f0.values);
  write_field(join(dir, "factor_final.field"), mesh, trace.final_factor.support,
              trace.final_factor.values);
  for (std::size_t i = 1; i + 1 < trace.records.size(); ++i) {
    const FlowRecord& r = trace.records[i];
    if (!r.has_snapshot) continue;
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%04d.field", r.step);
    write_field(join(dir, name), mesh, r.snapshot.support, r.snapshot.values);
  }
  if (cfg.svg) {
    std::vector<double> xs, es, ps;
    for (const FlowRecord& r : trace.records) {
      xs.push_back(r.step);
      es.push_back(r.energy);
      ps.push_back(r.pseudo_norm);
    }
    write_line_plot(join(dir, "energy.svg"), "descent flow", "step", "energy", xs, es);
    write_line_plot(join(dir, "pseudo_norm.svg"), "descent flow", "step", "pseudo-norm",
                    xs, ps);
  }
}

void run_minmax_cmd(const RunConfig& cfg, const TriMesh& mesh,
                    const std::filesystem::path& dir, JsonWriter& w) {
  const FactorSupport support = cfg.functional.kind == ProblemKind::laplace
                                    ? FactorSupport::area
                                    : FactorSupport::boundary;
  const ConformalFactor f_start = build_factor(cfg, mesh);
  const ConformalFactor f_end =
      make_factor(mesh, support, cfg.minmax_end_init, cfg.minmax_end_amplitude,
                  cfg.minmax_end_seed, cfg.minmax_end_path);
  const PathFamily family = make_path(f_start, f_end, cfg.minmax_interior_nodes);
  const MinmaxResult res = minmax_deform(cfg.functional, mesh, family, cfg.minmax);

  w.begin_object("minmax");
  w.field("c_estimate", res.c_estimate);
  w.field("sweeps_run", static_cast<int>(res.sweep_max.size()));
  w.array("sweep_max", res.sweep_max);
  w.field("nodes", static_cast<int>(res.final_nodes.size()));
  w.array("final_energy", res.final_energy);
  w.array("final_pseudo_norm", res.final_pseudo_norm);
  w.array("ps_candidates", res.ps_candidates);
  w.array("condition3", res.condition3);
  w.end_object();

  std::string csv = "step,energy,pseudo_norm,dt,node,accepted\n";
  for (std::size_t node = 0; node < res.node_traces.size(); ++node) {
    for (const FlowRecord& r : res.node_traces[node].records) {
      csv += std::to_string(r.step) + "," + JsonWriter::number(r.energy) + "," +
             JsonWriter::number(r.pseudo_norm) + "," + JsonWriter::number(r.dt) + "," +
             std::to_string(node + 1) + "," + (r.accepted ? "1" : "0") + "\n";
    }
  }
  write_text_file(join(dir, "trace.csv"), csv);

  for (std::size_t i = 0; i < res.final_nodes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "node_%02d.field", static_cast<int>(i));
    write_field(join(dir, name), mesh, res.final_nodes[i].support, res.final_nodes[i].values);
  }
  if (cfg.svg) {
    std::vector<double> sx, sy;
    for (std::size_t i = 0; i < res.sweep_max.size(); ++i) {
      sx.push_back(static_cast<double>(i + 1));
      sy.push_back(res.sweep_max[i]);
    }
    write_line_plot(join(dir, "energy.svg"), "minmax level", "sweep", "path max energy",
                    sx, sy);
    std::vector<double> nx;
    for (std::size_t i = 0; i < res.final_pseudo_norm.size(); ++i)
      nx.push_back(static_cast<double>(i));
    write_line_plot(join(dir, "pseudo_norm.svg"), "final path", "node", "pseudo-norm",
                    nx, res.final_pseudo_norm);
  }
}

void run_diagnose(const RunConfig& cfg, const TriMesh& mesh,
                  const std::filesystem::path& dir, JsonWriter& w) {
  const ConformalFactor f = build_factor(cfg, mesh);
  const Evaluation ev = evaluate(cfg.functional, mesh, f, cfg.solver);
  const SubgradientSet set = generate_candidates(ev, cfg.candidates);
  const PseudoNormResult pn = pseudo_norm(set);
  const CriticalityReport crit = is_critical(set, cfg.criticality_tol * set.scale);
  const EnergyIdentity ei = energy_identity_check(ev);

  write_evaluation_json(w, ev);
  w.begin_object("diagnose");
  write_criticality_json(w, set, pn, crit, cfg.criticality_tol * set.scale);
  w.begin_object("energy_identity");
  w.field("dirichlet_energy", ei.dirichlet_energy);
  w.field("mass_weighted_sum", ei.mass_weighted_sum);
  w.field("gap", ei.gap);
  w.end_object();
  const bool laplace = cfg.functional.kind == ProblemKind::laplace;
  if (laplace) {
    const SphereMapReport map = sphere_map_report(mesh, ev);
    w.begin_object("sphere_map");
    w.array("members", map.members);
    w.array("t", map.t);
    w.field("delta", map.delta);
    w.field("omega_energy", map.omega_energy);
    w.field("harmonic_residual", map.harmonic_residual);
    w.field("measure_integral", map.measure_integral);
    w.field("mass_integral", map.mass_integral);
    w.field("energy_integral", map.energy_integral);
    w.end_object();
    write_field(join(dir, "omega.field"), mesh, FactorSupport::area, map.omega);
  } else {
    w.field("sphere_map", "skipped: boundary-measure problem");
  }
  if (laplace) {
    const EigenPackage* pkg = ev.eigen.get();
    EigenPackage wide;
    if (cfg.k_m + 1 > static_cast<int>(pkg->values.size())) {
      wide = solve_spectrum(*ev.problem, cfg.k_m + 1, cfg.solver);
      pkg = &wide;
    }
    const BadPointReport bad = bad_point_scan(mesh, f, *pkg, cfg.k_m, cfg.radii,
                                              cfg.max_centers);
    w.begin_object("bad_points");
    w.field("k_m", bad.k_m);
    w.field("lambda_reference", bad.lambda_reference);
    w.field("centers", static_cast<int>(bad.centers.size()));
    w.array("radii", bad.radii);
    int hits = 0;
    for (const BallSolveRecord& b : bad.balls)
      if (b.hit) ++hits;
    w.field("hits", hits);
    w.begin_array("disjoint_hits");
    for (const std::size_t idx : bad.disjoint_hits) {
      const BallSolveRecord& b = bad.balls[idx];
      w.begin_object();
      w.field("center", b.center);
      w.field("radius", b.radius);
      w.field("lambda_star", b.lambda_star);
      w.field("interior_count", b.interior_count);
      w.end_object();
    }
    w.end_array();
    w.field("count_bound_ok", bad.count_bound_ok);
    w.end_object();
  } else {
    w.field("bad_points", "skipped: boundary-measure problem");
  }
  w.end_object();
  write_field(join(dir, "factor.field"), mesh, f.support, f.values);
}

}  // namespace

std::string run(const std::string& subcommand, const RunConfig& config) {
  RunConfig cfg = config;
  resolve_config(cfg);
  const bool known = subcommand == "spectrum" || subcommand == "subgrad" ||
                     subcommand == "flow" || subcommand == "minmax" ||
                     subcommand == "diagnose";
  if (!known)
    throw Error::config("unknown subcommand: '" + subcommand +
                        "' (spectrum|subgrad|flow|minmax|diagnose)");
  const TriMesh mesh = build_mesh(cfg);
  const std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error::io("cannot create output directory: " + cfg.out);

  JsonWriter w;
  w.field("command", subcommand);
  write_config_json(w, cfg);
  write_mesh_json(w, mesh);
  if (subcommand == "spectrum") run_spectrum(cfg, mesh, dir, w);
  else if (subcommand == "subgrad") run_subgrad(cfg, mesh, dir, w);
  else if (subcommand == "flow") run_flow_cmd(cfg, mesh, dir, w);
  else if (subcommand == "minmax") run_minmax_cmd(cfg, mesh, dir, w);
  else run_diagnose(cfg, mesh, dir, w);
  const std::string summary = w.str();
  write_text_file(join(dir, "summary.json"), summary);
  return summary;
}

}  // namespace eigenflow
