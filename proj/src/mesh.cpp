#include "mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <unordered_map>

#include "errors.hpp"
#include "rng.hpp"

namespace eigenflow {

namespace {

// Directed halfedge key; valid while vertex ids fit in 32 bits.
inline std::uint64_t half_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

inline std::uint64_t edge_key(int a, int b) {
  return a < b ? half_key(a, b) : half_key(b, a);
}

}  // namespace

TriMesh TriMesh::from_data(std::vector<Eigen::Vector3d> vertices,
                           std::vector<std::array<int, 3>> triangles) {
  TriMesh m;
  m.vertices_ = std::move(vertices);
  m.triangles_ = std::move(triangles);
  m.finalize();
  return m;
}

void TriMesh::finalize() {
  const int nv = vertex_count();
  const int nt = triangle_count();
  if (nv < 3 || nt < 1) throw Error::topology("mesh needs at least one triangle");

  Eigen::Vector3d lo = vertices_[0], hi = vertices_[0];
  for (const auto& p : vertices_) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  scale_ = (hi - lo).norm();
  if (!(scale_ > 0.0)) throw Error::topology("mesh has zero spatial extent");

  for (const auto& t : triangles_) {
    for (int c = 0; c < 3; ++c) {
      if (t[c] < 0 || t[c] >= nv) throw Error::topology("triangle index out of range");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw Error::topology("triangle with repeated vertex");
  }

  // Directed halfedges must be unique: catches duplicate faces, >2 triangles
  // on an edge, and inconsistent orientation in one pass.
  std::unordered_map<std::uint64_t, int> half;  // halfedge -> triangle
  half.reserve(static_cast<std::size_t>(nt) * 3 * 2);
  for (int t = 0; t < nt; ++t) {
    for (int c = 0; c < 3; ++c) {
      const int a = triangles_[t][c], b = triangles_[t][(c + 1) % 3];
      if (!half.emplace(half_key(a, b), t).second) {
        std::ostringstream os;
        os << "halfedge (" << a << "," << b
           << ") used twice: duplicate face or inconsistent orientation";
        throw Error::topology(os.str());
      }
    }
  }

  std::unordered_map<std::uint64_t, int> edge_id;
  edge_id.reserve(half.size());
  edges_.clear();
  neighbors_.assign(nv, {});
  for (int t = 0; t < nt; ++t) {
    for (int c = 0; c < 3; ++c) {
      const int a = triangles_[t][c], b = triangles_[t][(c + 1) % 3];
      if (edge_id.emplace(edge_key(a, b), static_cast<int>(edges_.size())).second) {
        edges_.push_back({std::min(a, b), std::max(a, b)});
        neighbors_[a].push_back(b);
        neighbors_[b].push_back(a);
      }
    }
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());

  // Single-fan vertex links (rejects bowtie configurations).  For vertex v,
  // each incident triangle (v,a,b) contributes the link edge a->b; a manifold
  // link is one cycle (interior) or one open chain (boundary).
  {
    std::vector<std::unordered_map<int, int>> link_next(nv), link_indeg(nv);
    for (const auto& t : triangles_) {
      for (int c = 0; c < 3; ++c) {
        const int v = t[c], a = t[(c + 1) % 3], b = t[(c + 2) % 3];
        link_next[v].emplace(a, b);
        link_indeg[v][b] = 1;
      }
    }
    for (int v = 0; v < nv; ++v) {
      if (link_next[v].empty()) throw Error::topology("vertex not referenced by any triangle");
      std::unordered_map<int, char> seen;
      int components = 0;
      // Open chains first (start nodes without incoming link edge).
      for (const auto& [a, b] : link_next[v]) {
        (void)b;
        if (link_indeg[v].count(a)) continue;
        ++components;
        int cur = a;
        while (true) {
          seen[cur] = 1;
          auto it = link_next[v].find(cur);
          if (it == link_next[v].end()) break;
          cur = it->second;
        }
      }
      for (const auto& [a, b] : link_next[v]) {
        (void)b;
        if (seen.count(a)) continue;
        ++components;
        int cur = a;
        while (!seen.count(cur)) {
          seen[cur] = 1;
          cur = link_next[v].at(cur);
        }
      }
      if (components != 1) throw Error::topology("non-manifold vertex link");
    }
  }

  const double area_floor = 1e-14 * scale_ * scale_;
  for (int t = 0; t < nt; ++t) {
    if (!(triangle_area(t) > area_floor)) {
      std::ostringstream os;
      os << "triangle " << t << " has near-zero area";
      throw Error::degenerate_triangle(os.str());
    }
  }

  // Boundary halfedges are those without an opposite; they chain head to
  // tail into disjoint loops.
  boundary_loops_.clear();
  boundary_vertices_.clear();
  boundary_flag_.assign(nv, 0);
  {
    std::unordered_map<int, int> next;
    for (const auto& [key, t] : half) {
      (void)t;
      const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
      if (!half.count(half_key(b, a))) {
        if (!next.emplace(a, b).second)
          throw Error::topology("boundary forks at a vertex");
      }
    }
    std::unordered_map<int, char> used;
    for (const auto& [start, first] : next) {
      (void)first;
      if (used.count(start)) continue;
      std::vector<int> loop;
      int cur = start;
      while (!used.count(cur)) {
        used[cur] = 1;
        loop.push_back(cur);
        auto it = next.find(cur);
        if (it == next.end()) throw Error::topology("boundary chain is not closed");
        cur = it->second;
      }
      if (cur != start) throw Error::topology("boundary chain is not closed");
      boundary_loops_.push_back(std::move(loop));
    }
    // Deterministic loop order: by smallest vertex id, rotated to start there.
    for (auto& loop : boundary_loops_) {
      auto it = std::min_element(loop.begin(), loop.end());
      std::rotate(loop.begin(), it, loop.end());
    }
    std::sort(boundary_loops_.begin(), boundary_loops_.end(),
              [](const auto& a, const auto& b) { return a[0] < b[0]; });
    for (const auto& loop : boundary_loops_)
      for (int v : loop) boundary_flag_[v] = 1;
    for (int v = 0; v < nv; ++v)
      if (boundary_flag_[v]) boundary_vertices_.push_back(v);
  }

  // Connectivity.
  {
    std::vector<char> seen(nv, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    int reached = 1;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int w : neighbors_[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++reached;
          q.push(w);
        }
      }
    }
    if (reached != nv) throw Error::topology("mesh is not connected");
  }

  const int chi = euler_characteristic();
  const int b = static_cast<int>(boundary_loops_.size());
  if ((2 - b - chi) % 2 != 0 || (2 - b - chi) < 0)
    throw Error::topology("Euler characteristic inconsistent with an orientable surface");
}

int TriMesh::euler_characteristic() const {
  return vertex_count() - edge_count() + triangle_count();
}

int TriMesh::genus() const {
  return (2 - static_cast<int>(boundary_loops_.size()) - euler_characteristic()) / 2;
}

double TriMesh::triangle_area(int t) const {
  const auto& tri = triangles_[t];
  const Eigen::Vector3d& a = vertices_[tri[0]];
  return 0.5 * (vertices_[tri[1]] - a).cross(vertices_[tri[2]] - a).norm();
}

double TriMesh::total_area() const {
  double s = 0.0;
  for (int t = 0; t < triangle_count(); ++t) s += triangle_area(t);
  return s;
}

TriMesh TriMesh::load_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error::io("cannot open mesh file: " + path);

  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (!toks.empty()) rows.push_back(std::move(toks));
  }
  if (rows.empty()) throw Error::parse("empty OFF file: " + path);

  std::size_t r = 0;
  if (rows[0].size() == 1 && rows[0][0] == "OFF") ++r;
  auto want_row = [&](const char* what) -> const std::vector<std::string>& {
    if (r >= rows.size()) throw Error::parse(std::string("truncated OFF file, expected ") + what);
    return rows[r++];
  };
  auto to_long = [](const std::string& s, const char* what) {
    try {
      std::size_t used = 0;
      const long v = std::stol(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error::parse(std::string("bad integer for ") + what + ": " + s);
    }
  };
  auto to_double = [](const std::string& s, const char* what) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw Error::parse(std::string("bad number for ") + what + ": " + s);
    }
  };

  const auto& counts = want_row("counts");
  if (counts.size() < 2) throw Error::parse("OFF counts row needs vertex and face counts");
  const long nv = to_long(counts[0], "vertex count");
  const long nf = to_long(counts[1], "face count");
  if (nv <= 0 || nf <= 0) throw Error::parse("OFF counts must be positive");

  std::vector<Eigen::Vector3d> verts;
  verts.reserve(nv);
  for (long i = 0; i < nv; ++i) {
    const auto& row = want_row("vertex");
    if (row.size() < 3) throw Error::parse("vertex row needs three coordinates");
    verts.emplace_back(to_double(row[0], "x"), to_double(row[1], "y"), to_double(row[2], "z"));
  }

  std::vector<std::array<int, 3>> tris;
  tris.reserve(nf);
  for (long i = 0; i < nf; ++i) {
    const auto& row = want_row("face");
    if (row.empty()) throw Error::parse("empty face row");
    const long n = to_long(row[0], "face size");
    if (n != 3) throw Error::parse("only triangle faces are supported");
    if (row.size() < 4) throw Error::parse("face row needs three indices");
    std::array<int, 3> t;
    for (int c = 0; c < 3; ++c) {
      const long idx = to_long(row[1 + c], "face index");
      if (idx < 0 || idx >= nv) throw Error::parse("face index out of range");
      t[c] = static_cast<int>(idx);
    }
    tris.push_back(t);
  }
  return from_data(std::move(verts), std::move(tris));
}

void TriMesh::save_off(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error::io("cannot write mesh file: " + path);
  out << "OFF\n" << vertex_count() << ' ' << triangle_count() << " 0\n";
  char buf[96];
  for (const auto& p : vertices_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
  for (const auto& t : triangles_) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  if (!out) throw Error::io("failed writing mesh file: " + path);
}

TriMesh TriMesh::refined(int levels, bool sphere_project) const {
  if (levels < 0) throw Error::invalid("refine levels must be >= 0");
  TriMesh cur = *this;
  for (int l = 0; l < levels; ++l) {
    std::vector<Eigen::Vector3d> verts = cur.vertices_;
    std::vector<std::array<int, 3>> tris;
    tris.reserve(cur.triangles_.size() * 4);
    std::unordered_map<std::uint64_t, int> mid;
    mid.reserve(cur.edges_.size());
    auto midpoint = [&](int a, int b) {
      const auto key = edge_key(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      Eigen::Vector3d p = 0.5 * (verts[a] + verts[b]);
      if (sphere_project) {
        const double n = p.norm();
        if (n > 0.0) p /= n;
      }
      const int id = static_cast<int>(verts.size());
      verts.push_back(p);
      mid.emplace(key, id);
      return id;
    };
    for (const auto& t : cur.triangles_) {
      const int ab = midpoint(t[0], t[1]);
      const int bc = midpoint(t[1], t[2]);
      const int ca = midpoint(t[2], t[0]);
      tris.push_back({t[0], ab, ca});
      tris.push_back({ab, t[1], bc});
      tris.push_back({ca, bc, t[2]});
      tris.push_back({ab, bc, ca});
    }
    cur = from_data(std::move(verts), std::move(tris));
  }
  return cur;
}

std::vector<int> TriMesh::geodesic_ball(int center, double radius,
                                        const ConformalFactor* factor) const {
  const int nv = vertex_count();
  if (center < 0 || center >= nv) throw Error::invalid("ball center out of range");
  if (!(radius > 0.0)) throw Error::invalid("ball radius must be positive");
  if (factor) {
    if (factor->support != FactorSupport::area)
      throw Error::invalid("geodesic_ball needs an area-supported factor");
    if (factor->values.size() != nv)
      throw Error::invalid("factor size does not match vertex count");
  }

  std::vector<double> dist(nv, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[center] = 0.0;
  pq.push({0.0, center});
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v] || d > radius) continue;
    for (int w : neighbors_[v]) {
      double len = (vertices_[v] - vertices_[w]).norm();
      if (factor)
        len *= std::sqrt(0.5 * (factor->values[v] + factor->values[w]));
      const double nd = d + len;
      if (nd < dist[w]) {
        dist[w] = nd;
        pq.push({nd, w});
      }
    }
  }

  std::vector<int> ball;
  for (int v = 0; v < nv; ++v)
    if (dist[v] <= radius) ball.push_back(v);
  if (ball.size() <= 1) throw Error::empty_ball("ball contains only its center");
  return ball;
}

std::vector<int> TriMesh::support_vertices(FactorSupport support) const {
  if (support == FactorSupport::boundary) {
    if (!has_boundary()) throw Error::no_boundary("mesh has no boundary");
    return boundary_vertices_;
  }
  std::vector<int> all(vertex_count());
  for (int v = 0; v < vertex_count(); ++v) all[v] = v;
  return all;
}

TriMesh TriMesh::octahedron() {
  std::vector<Eigen::Vector3d> v = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                    {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  std::vector<std::array<int, 3>> f = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                                       {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  return from_data(std::move(v), std::move(f));
}

TriMesh TriMesh::icosahedron() {
  const double t = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<Eigen::Vector3d> v = {
      {-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  return from_data(std::move(v), std::move(f));
}

TriMesh TriMesh::icosphere(int level) { return icosahedron().refined(level, true); }

TriMesh TriMesh::flat_torus(int n) {
  if (n < 4 || n % 2 != 0) throw Error::invalid("flat torus needs an even n >= 4");
  // Positions realize every edge length of the flat unit-square metric with
  // grid step 1/n: ring radius R makes horizontal chords 1/n, the vertical
  // zigzag spans 1/n, diagonals come out sqrt(2)/n.
  const double R = 1.0 / (2.0 * n * std::sin(M_PI / n));
  std::vector<Eigen::Vector3d> v;
  v.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * M_PI * i / n;
      v.emplace_back(R * std::cos(a), R * std::sin(a), (j % 2) ? 1.0 / n : 0.0);
    }
  }
  auto id = [n](int i, int j) { return ((i % n + n) % n) + n * ((j % n + n) % n); };
  std::vector<std::array<int, 3>> f;
  f.reserve(static_cast<std::size_t>(2) * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j), v11 = id(i + 1, j + 1), v01 = id(i, j + 1);
      f.push_back({v00, v10, v11});
      f.push_back({v00, v11, v01});
    }
  }
  return from_data(std::move(v), std::move(f));
}

TriMesh TriMesh::unit_disk(int rings) {
  if (rings < 1) throw Error::invalid("disk needs at least one ring");
  std::vector<Eigen::Vector3d> v;
  v.push_back({0, 0, 0});
  auto ring_start = [](int k) { return 1 + 3 * k * (k - 1); };
  for (int k = 1; k <= rings; ++k) {
    const double r = static_cast<double>(k) / rings;
    for (int t = 0; t < 6 * k; ++t) {
      const double a = 2.0 * M_PI * t / (6 * k);
      v.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
    }
  }
  std::vector<std::array<int, 3>> f;
  {
    // Center fan.
    for (int t = 0; t < 6; ++t)
      f.push_back({0, ring_start(1) + t, ring_start(1) + (t + 1) % 6});
  }
  for (int k = 2; k <= rings; ++k) {
    const int a = 6 * (k - 1), b = 6 * k;
    const int ia = ring_start(k - 1), ib = ring_start(k);
    // Angular zipper between consecutive rings: advance whichever ring's
    // next vertex comes first in angle.
    int i = 0, j = 0;
    while (i < a || j < b) {
      const double next_in = (i < a) ? 2.0 * M_PI * (i + 1) / a : std::numeric_limits<double>::infinity();
      const double next_out = (j < b) ? 2.0 * M_PI * (j + 1) / b : std::numeric_limits<double>::infinity();
      if (next_in <= next_out) {
        f.push_back({ia + i % a, ib + j % b, ia + (i + 1) % a});
        ++i;
      } else {
        f.push_back({ia + i % a, ib + j % b, ib + (j + 1) % b});
        ++j;
      }
    }
  }
  return from_data(std::move(v), std::move(f));
}

TriMesh TriMesh::square_with_hole() {
  std::vector<Eigen::Vector3d> v;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) v.emplace_back(i, j, 0.0);
  auto id = [](int i, int j) { return i + 4 * j; };
  std::vector<std::array<int, 3>> f;
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      if (i == 1 && j == 1) continue;
      const int v00 = id(i, j), v10 = id(i + 1, j), v11 = id(i + 1, j + 1), v01 = id(i, j + 1);
      f.push_back({v00, v10, v11});
      f.push_back({v00, v11, v01});
    }
  }
  return from_data(std::move(v), std::move(f));
}

ConformalFactor uniform_factor(const TriMesh& mesh, FactorSupport support) {
  ConformalFactor f;
  f.support = support;
  f.values = Eigen::VectorXd::Ones(
      static_cast<Eigen::Index>(mesh.support_vertices(support).size()));
  return f;
}

ConformalFactor perturbed_factor(const TriMesh& mesh, FactorSupport support,
                                 double amplitude, std::uint64_t seed) {
  if (!(amplitude >= 0.0 && amplitude < 1.0))
    throw Error::invalid("perturbation amplitude must lie in [0, 1)");
  const auto verts = mesh.support_vertices(support);
  Rng rng(seed);
  std::array<Eigen::Vector3d, 3> dir;
  std::array<double, 3> phase;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
    const double n = d.norm();
    dir[i] = (n > 0) ? Eigen::Vector3d(d / n) : Eigen::Vector3d(1, 0, 0);
    phase[i] = 2.0 * M_PI * rng.unit();
  }
  const double L = mesh.scale();
  Eigen::VectorXd g(static_cast<Eigen::Index>(verts.size()));
  for (std::size_t k = 0; k < verts.size(); ++k) {
    const Eigen::Vector3d& p = mesh.vertices()[verts[k]];
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += std::cos(M_PI * dir[i].dot(p) / L + phase[i]);
    g[static_cast<Eigen::Index>(k)] = s;
  }
  const double m = g.cwiseAbs().maxCoeff();
  ConformalFactor f;
  f.support = support;
  f.values = Eigen::VectorXd::Ones(g.size());
  if (m > 1e-12) f.values += (amplitude / m) * g;
  return f;
}

}  // namespace eigenflow
