#pragma once

#include "pvem/geometry.hpp"

#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace pvem {

struct Edge {
  int v0 = -1, v1 = -1;
  int left = -1;   // cell that traverses v0 -> v1 counter-clockwise
  int right = -1;  // neighbour, -1 on the domain boundary
};

struct AdaptForest;

/// Polygonal mesh of the unit square. Cells are CCW vertex lists; hanging
/// vertices are ordinary polygon vertices.
struct PolyMesh {
  std::vector<Vec2> vertices;
  std::vector<long> vkey;  // forest point id per vertex
  std::vector<std::vector<int>> cells;
  std::vector<int> node;  // forest node per cell
  std::vector<Edge> edges;
  std::vector<std::vector<int>> cell_edges;  // edge of side i (v_i -> v_{i+1})
  std::vector<double> area, h_cell, h_edge;
  std::vector<Vec2> center;
  std::vector<char> vertex_on_boundary;
  long generation = 0;
  std::shared_ptr<AdaptForest> forest;

  int num_cells() const { return int(cells.size()); }
  int num_vertices() const { return int(vertices.size()); }
  int num_edges() const { return int(edges.size()); }
  bool boundary_edge(int e) const { return edges[e].right < 0; }

  std::vector<Vec2> polygon(int c) const {
    std::vector<Vec2> p;
    p.reserve(cells[c].size());
    for (int v : cells[c]) p.push_back(vertices[v]);
    return p;
  }

  /// Build edges, adjacency and geometric data from vertices and cells.
  void finalize() {
    edges.clear();
    cell_edges.assign(cells.size(), {});
    area.assign(cells.size(), 0.0);
    h_cell.assign(cells.size(), 0.0);
    center.assign(cells.size(), Vec2::Zero());
    std::map<std::pair<int, int>, int> lookup;
    for (int c = 0; c < num_cells(); ++c) {
      const auto& cv = cells[c];
      const int n = int(cv.size());
      for (int i = 0; i < n; ++i) {
        const int a = cv[i], b = cv[(i + 1) % n];
        const auto key = std::minmax(a, b);
        auto it = lookup.find(key);
        if (it == lookup.end()) {
          lookup.emplace(key, int(edges.size()));
          cell_edges[c].push_back(int(edges.size()));
          edges.push_back({a, b, c, -1});
        } else {
          Edge& e = edges[it->second];
          if (e.right >= 0 || e.v0 != b) throw Error("PolyMesh: non-manifold or misoriented edge");
          e.right = c;
          cell_edges[c].push_back(it->second);
        }
      }
      const auto p = polygon(c);
      area[c] = signed_area(p);
      if (area[c] <= 0) throw Error("PolyMesh: cell not counter-clockwise");
      h_cell[c] = diameter(p);
      center[c] = pvem::centroid(p);
    }
    h_edge.resize(edges.size());
    vertex_on_boundary.assign(vertices.size(), 0);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      h_edge[e] = (vertices[edges[e].v1] - vertices[edges[e].v0]).norm();
      if (edges[e].right < 0) vertex_on_boundary[edges[e].v0] = vertex_on_boundary[edges[e].v1] = 1;
    }
  }

  double total_area() const { return std::accumulate(area.begin(), area.end(), 0.0); }
};

struct ForestNode {
  enum Kind { Root, Child, Agglomerate };
  Kind kind = Root;
  int parent = -1;
  std::vector<int> children;  // split children, filled when first refined
  std::vector<int> members;   // agglomerated cells
  std::vector<long> outline;  // CCW forest point ids at creation
};

/// Refinement/agglomeration history shared by every mesh generation of a run.
struct AdaptForest {
  long id = 0;
  long next_generation = 1;
  std::vector<Vec2> points;
  std::vector<ForestNode> nodes;
  std::map<std::pair<long, long>, long> midpoints;

  AdaptForest() {
    static std::atomic<long> counter{0};
    id = ++counter;
  }

  long add_point(const Vec2& x) {
    points.push_back(x);
    return long(points.size()) - 1;
  }

  long midpoint(long a, long b) {
    const auto key = std::minmax(a, b);
    auto it = midpoints.find(key);
    if (it != midpoints.end()) return it->second;
    const long m = add_point(0.5 * (points[a] + points[b]));
    midpoints.emplace(key, m);
    return m;
  }

  int add_node(ForestNode n) {
    nodes.push_back(std::move(n));
    return int(nodes.size()) - 1;
  }

  /// Finest never-split primitive nodes covering `n`.
  void leaves(int n, std::vector<int>& out) const {
    const ForestNode& fn = nodes[n];
    if (!fn.children.empty()) {
      for (int c : fn.children) leaves(c, out);
    } else if (fn.kind == ForestNode::Agglomerate) {
      for (int c : fn.members) leaves(c, out);
    } else {
      out.push_back(n);
    }
  }

  std::vector<Vec2> outline_coords(int n) const {
    std::vector<Vec2> p;
    for (long v : nodes[n].outline) p.push_back(points[v]);
    return p;
  }
};

namespace detail {

/// Uniform bucket grid over forest points for on-segment queries.
struct PointGrid {
  double cell = 1.0;
  int nb = 1;
  std::unordered_map<long, std::vector<long>> buckets;
  const std::vector<Vec2>* pts = nullptr;

  long key(int i, int j) const { return long(i) * 1000003L + j; }
  int index(double v) const { return std::clamp(int(std::floor(v / cell)), -1, nb); }

  void build(const std::vector<Vec2>& all, const std::vector<long>& ids) {
    pts = &all;
    nb = std::max(1, int(std::sqrt(double(ids.size()))));
    cell = 1.0 / nb;
    for (long id : ids) buckets[key(index(all[id].x()), index(all[id].y()))].push_back(id);
  }

  /// Ids strictly inside segment [a,b], sorted along it.
  std::vector<long> on_segment(long a, long b, double tol) const {
    const Vec2& pa = (*pts)[a];
    const Vec2& pb = (*pts)[b];
    const int i0 = index(std::min(pa.x(), pb.x()) - tol), i1 = index(std::max(pa.x(), pb.x()) + tol);
    const int j0 = index(std::min(pa.y(), pb.y()) - tol), j1 = index(std::max(pa.y(), pb.y()) + tol);
    std::vector<std::pair<double, long>> hit;
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        auto it = buckets.find(key(i, j));
        if (it == buckets.end()) continue;
        for (long id : it->second) {
          if (id == a || id == b) continue;
          const double s = interior_param((*pts)[id], pa, pb, tol);
          if (s > 0) hit.emplace_back(s, id);
        }
      }
    std::sort(hit.begin(), hit.end());
    std::vector<long> out;
    for (auto& h : hit) out.push_back(h.second);
    return out;
  }
};

}  // namespace detail

/// Assemble a conforming mesh from forest nodes: every active outline vertex
/// lying on another cell's side is inserted into that cell's polygon.
inline PolyMesh build_from_nodes(const std::shared_ptr<AdaptForest>& forest, std::vector<int> active,
                                 long generation) {
  std::sort(active.begin(), active.end());
  std::set<long> vset;
  for (int n : active)
    for (long v : forest->nodes[n].outline) vset.insert(v);
  const std::vector<long> vids(vset.begin(), vset.end());
  detail::PointGrid grid;
  grid.build(forest->points, vids);
  std::unordered_map<long, int> local;
  PolyMesh m;
  m.forest = forest;
  m.generation = generation;
  for (long id : vids) {
    local[id] = int(m.vertices.size());
    m.vertices.push_back(forest->points[id]);
    m.vkey.push_back(id);
  }
  for (int n : active) {
    const auto& ol = forest->nodes[n].outline;
    std::vector<int> cell;
    for (std::size_t i = 0; i < ol.size(); ++i) {
      const long a = ol[i], b = ol[(i + 1) % ol.size()];
      cell.push_back(local.at(a));
      const double tol = 1e-9 * (forest->points[a] - forest->points[b]).norm();
      for (long v : grid.on_segment(a, b, tol)) cell.push_back(local.at(v));
    }
    m.cells.push_back(std::move(cell));
    m.node.push_back(n);
  }
  m.finalize();
  return m;
}

/// n x n axis-aligned squares on the unit square.
inline PolyMesh build_uniform_quad_mesh(int n) {
  if (n < 1) throw Error("build_uniform_quad_mesh: n must be positive");
  auto forest = std::make_shared<AdaptForest>();
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) forest->add_point(Vec2(double(i) / n, double(j) / n));
  auto pid = [n](int i, int j) { return long(j) * (n + 1) + i; };
  std::vector<int> active;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      ForestNode fn;
      fn.outline = {pid(i, j), pid(i + 1, j), pid(i + 1, j + 1), pid(i, j + 1)};
      active.push_back(forest->add_node(fn));
    }
  return build_from_nodes(forest, active, 0);
}

/// Mesh from explicit polygons; each cell becomes a forest root.
inline PolyMesh mesh_from_polygons(const std::vector<Vec2>& verts, const std::vector<std::vector<int>>& cells,
                                   long generation = 0) {
  auto forest = std::make_shared<AdaptForest>();
  for (const auto& v : verts) forest->add_point(v);
  std::vector<int> active;
  for (const auto& c : cells) {
    ForestNode fn;
    for (int v : c) fn.outline.push_back(v);
    active.push_back(forest->add_node(fn));
  }
  PolyMesh m = build_from_nodes(forest, active, generation);
  forest->next_generation = generation + 1;
  return m;
}

inline void check_forest(const PolyMesh& mesh, const AdaptForest& forest) {
  if (mesh.forest.get() != &forest) throw Error("UnrelatedMeshes");
}

/// Split marked cells: agglomerates return to their members, primitive cells are
/// cut through side midpoints and the centroid.
inline PolyMesh refine_cells(const PolyMesh& mesh, AdaptForest& forest, const std::set<int>& marks) {
  check_forest(mesh, forest);
  for (int c : marks)
    if (c < 0 || c >= mesh.num_cells()) throw Error("MarkUnknownCell");
  std::vector<int> active;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const int n = mesh.node[c];
    if (!marks.count(c)) {
      active.push_back(n);
      continue;
    }
    if (forest.nodes[n].kind == ForestNode::Agglomerate) {
      for (int mbr : forest.nodes[n].members) active.push_back(mbr);
      continue;
    }
    if (forest.nodes[n].children.empty()) {
      const std::vector<long> corners = forest.nodes[n].outline;
      const long ctr = forest.add_point(centroid(forest.outline_coords(n)));
      const int k = int(corners.size());
      std::vector<long> mids(k);
      for (int i = 0; i < k; ++i) mids[i] = forest.midpoint(corners[i], corners[(i + 1) % k]);
      std::vector<int> kids;
      for (int i = 0; i < k; ++i) {
        ForestNode ch;
        ch.kind = ForestNode::Child;
        ch.parent = n;
        ch.outline = {corners[i], mids[i], ctr, mids[(i + k - 1) % k]};
        kids.push_back(forest.add_node(ch));
      }
      forest.nodes[n].children = kids;
    }
    for (int ch : forest.nodes[n].children) active.push_back(ch);
  }
  return build_from_nodes(mesh.forest, active, forest.next_generation++);
}

struct CoarsenResult {
  PolyMesh mesh;
  int merged = 0;
  int rejected = 0;
  std::vector<std::vector<int>> rejected_components;
};

namespace detail {

/// Outer boundary of a union of cells as a CCW forest-point cycle; empty when the
/// union is not a simply connected polygon with a simple boundary.
inline std::vector<long> trace_outline(const PolyMesh& mesh, const std::vector<int>& cells) {
  std::set<std::pair<long, long>> directed;
  for (int c : cells) {
    const auto& cv = mesh.cells[c];
    for (std::size_t i = 0; i < cv.size(); ++i)
      directed.emplace(mesh.vkey[cv[i]], mesh.vkey[cv[(i + 1) % cv.size()]]);
  }
  std::map<long, long> next;
  for (const auto& [a, b] : directed) {
    if (directed.count({b, a})) continue;
    if (next.count(a)) return {};
    next[a] = b;
  }
  if (next.empty()) return {};
  std::vector<long> cyc;
  long v = next.begin()->first;
  do {
    cyc.push_back(v);
    auto it = next.find(v);
    if (it == next.end() || cyc.size() > next.size()) return {};
    v = it->second;
  } while (v != cyc.front());
  if (cyc.size() != next.size()) return {};
  return cyc;
}

}  // namespace detail

/// Agglomerate edge-connected components of marked cells. Components larger than
/// max_patch (when positive) are split greedily in breadth-first order.
inline CoarsenResult coarsen_patches(const PolyMesh& mesh, AdaptForest& forest, const std::set<int>& marks,
                                     double rho = 0.05, int max_patch = 0) {
  check_forest(mesh, forest);
  std::vector<std::vector<int>> nbr(mesh.num_cells());
  for (const Edge& e : mesh.edges)
    if (e.right >= 0 && marks.count(e.left) && marks.count(e.right)) {
      nbr[e.left].push_back(e.right);
      nbr[e.right].push_back(e.left);
    }
  for (auto& v : nbr) std::sort(v.begin(), v.end());
  std::vector<char> seen(mesh.num_cells(), 0);
  std::vector<std::vector<int>> patches;
  for (int s : marks) {
    if (seen[s]) continue;
    std::vector<int> comp;
    std::vector<int> queue = {s};
    seen[s] = 1;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const int c = queue[q];
      comp.push_back(c);
      if (max_patch > 0 && int(comp.size()) >= max_patch) break;
      for (int d : nbr[c])
        if (!seen[d]) {
          seen[d] = 1;
          queue.push_back(d);
        }
    }
    for (std::size_t q = comp.size(); q < queue.size(); ++q) seen[queue[q]] = 0;
    patches.push_back(comp);
  }
  CoarsenResult res;
  std::set<int> removed;
  std::vector<int> added;
  for (auto& p : patches) {
    if (p.size() < 2) continue;
    std::set<int> pnodes;
    for (int c : p) pnodes.insert(mesh.node[c]);
    const int par = forest.nodes[mesh.node[p[0]]].parent;
    if (par >= 0 && forest.nodes[par].children.size() == p.size() &&
        std::all_of(forest.nodes[par].children.begin(), forest.nodes[par].children.end(),
                    [&](int ch) { return pnodes.count(ch) > 0; })) {
      for (int c : p) removed.insert(c);
      added.push_back(par);
      ++res.merged;
      continue;
    }
    const auto ol = detail::trace_outline(mesh, p);
    std::vector<Vec2> poly;
    for (long v : ol) poly.push_back(forest.points[v]);
    if (ol.size() < 3 || signed_area(poly) <= 0 || !star_shaped(poly, rho)) {
      ++res.rejected;
      res.rejected_components.push_back(p);
      continue;
    }
    ForestNode g;
    g.kind = ForestNode::Agglomerate;
    g.outline = ol;
    for (int c : p) {
      g.members.push_back(mesh.node[c]);
      removed.insert(c);
    }
    added.push_back(forest.add_node(g));
    ++res.merged;
  }
  std::vector<int> active = added;
  for (int c = 0; c < mesh.num_cells(); ++c)
    if (!removed.count(c)) active.push_back(mesh.node[c]);
  res.mesh = build_from_nodes(mesh.forest, active, forest.next_generation++);
  return res;
}

/// Leaf-level correspondence between two meshes of one forest.
struct LeafMap {
  std::vector<int> leaf;    // forest leaf nodes of the changed region
  std::vector<int> cell_a;  // covering cell in mesh a
  std::vector<int> cell_b;  // covering cell in mesh b
};

struct CommonCoarsening {
  std::vector<std::vector<int>> cells_a, cells_b;  // per group
  std::vector<int> group_a, group_b;               // group of each cell
  LeafMap leaves;                                  // only for groups with a change
  std::vector<std::vector<int>> group_leaves;      // indices into leaves per group
  bool identical = false;
};

inline CommonCoarsening common_coarsening(const PolyMesh& a, const PolyMesh& b) {
  if (!a.forest || a.forest != b.forest) throw Error("UnrelatedMeshes");
  const AdaptForest& f = *a.forest;
  CommonCoarsening cc;
  cc.group_a.assign(a.num_cells(), -1);
  cc.group_b.assign(b.num_cells(), -1);
  std::unordered_map<int, int> bnode;
  for (int c = 0; c < b.num_cells(); ++c) bnode[b.node[c]] = c;
  std::vector<int> changed_a, changed_b;
  std::unordered_map<int, int> anode;
  for (int c = 0; c < a.num_cells(); ++c) {
    anode[a.node[c]] = c;
    auto it = bnode.find(a.node[c]);
    if (it != bnode.end()) {
      cc.group_a[c] = cc.group_b[it->second] = int(cc.cells_a.size());
      cc.cells_a.push_back({c});
      cc.cells_b.push_back({it->second});
      cc.group_leaves.emplace_back();
    } else {
      changed_a.push_back(c);
    }
  }
  for (int c = 0; c < b.num_cells(); ++c)
    if (!anode.count(b.node[c])) changed_b.push_back(c);
  cc.identical = changed_a.empty() && changed_b.empty();
  if (cc.identical) return cc;
  // union-find over leaves of the changed cells
  std::unordered_map<int, int> leaf_idx;
  std::vector<int> parent;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  auto add_cells = [&](const PolyMesh& m, const std::vector<int>& cs, bool is_a) {
    for (int c : cs) {
      std::vector<int> lv;
      f.leaves(m.node[c], lv);
      int first = -1;
      for (int l : lv) {
        auto it = leaf_idx.find(l);
        int li;
        if (it == leaf_idx.end()) {
          li = int(cc.leaves.leaf.size());
          leaf_idx[l] = li;
          cc.leaves.leaf.push_back(l);
          cc.leaves.cell_a.push_back(-1);
          cc.leaves.cell_b.push_back(-1);
          parent.push_back(li);
        } else {
          li = it->second;
        }
        (is_a ? cc.leaves.cell_a : cc.leaves.cell_b)[li] = c;
        if (first < 0)
          first = li;
        else
          parent[find(li)] = find(first);
      }
    }
  };
  add_cells(a, changed_a, true);
  add_cells(b, changed_b, false);
  for (std::size_t i = 0; i < cc.leaves.leaf.size(); ++i)
    if (cc.leaves.cell_a[i] < 0 || cc.leaves.cell_b[i] < 0) throw Error("UnrelatedMeshes: coverage mismatch");
  std::unordered_map<int, int> root_group;
  for (std::size_t i = 0; i < cc.leaves.leaf.size(); ++i) {
    const int r = find(int(i));
    auto it = root_group.find(r);
    int g;
    if (it == root_group.end()) {
      g = int(cc.cells_a.size());
      root_group[r] = g;
      cc.cells_a.emplace_back();
      cc.cells_b.emplace_back();
      cc.group_leaves.emplace_back();
    } else {
      g = it->second;
    }
    cc.group_leaves[g].push_back(int(i));
    const int ca = cc.leaves.cell_a[i], cb = cc.leaves.cell_b[i];
    if (cc.group_a[ca] < 0) {
      cc.group_a[ca] = g;
      cc.cells_a[g].push_back(ca);
    }
    if (cc.group_b[cb] < 0) {
      cc.group_b[cb] = g;
      cc.cells_b[g].push_back(cb);
    }
  }
  return cc;
}

/// Finest common coarsening as a mesh (cells are traced unions).
inline PolyMesh finest_common_coarsening(const PolyMesh& a, const PolyMesh& b) {
  const CommonCoarsening cc = common_coarsening(a, b);
  auto forest = std::make_shared<AdaptForest>();
  forest->points = a.forest->points;
  std::vector<int> active;
  for (std::size_t g = 0; g < cc.cells_a.size(); ++g) {
    ForestNode fn;
    if (cc.cells_a[g].size() == 1) {
      for (int v : a.cells[cc.cells_a[g][0]]) fn.outline.push_back(a.vkey[v]);
    } else if (cc.cells_b[g].size() == 1) {
      for (int v : b.cells[cc.cells_b[g][0]]) fn.outline.push_back(b.vkey[v]);
    } else {
      fn.outline = detail::trace_outline(a, cc.cells_a[g]);
      if (fn.outline.empty()) throw Error("finest_common_coarsening: group with a hole");
    }
    active.push_back(forest->add_node(fn));
  }
  PolyMesh m = build_from_nodes(forest, active, std::max(a.generation, b.generation));
  return m;
}

struct MeshDiff {
  std::vector<int> cells_only_in_new, cells_only_in_old;
  std::vector<int> edges_only_in_old;
  std::vector<double> hhat_old_cell;  // per old cell (0 outside the diff)
  std::vector<double> hhat_old_edge;  // per old edge (0 outside the diff)
  bool empty() const { return cells_only_in_new.empty() && cells_only_in_old.empty() && edges_only_in_old.empty(); }
};

inline MeshDiff mesh_diff(const PolyMesh& next, const PolyMesh& prev) {
  const CommonCoarsening cc = common_coarsening(prev, next);
  MeshDiff d;
  d.hhat_old_cell.assign(prev.num_cells(), 0.0);
  d.hhat_old_edge.assign(prev.num_edges(), 0.0);
  for (std::size_t g = 0; g < cc.cells_a.size(); ++g) {
    if (cc.group_leaves[g].empty()) continue;
    for (int c : cc.cells_a[g]) d.cells_only_in_old.push_back(c);
    for (int c : cc.cells_b[g]) d.cells_only_in_new.push_back(c);
    for (int li : cc.group_leaves[g]) {
      const int ca = cc.leaves.cell_a[li], cb = cc.leaves.cell_b[li];
      d.hhat_old_cell[ca] = std::max({d.hhat_old_cell[ca], prev.h_cell[ca], next.h_cell[cb]});
    }
  }
  std::sort(d.cells_only_in_old.begin(), d.cells_only_in_old.end());
  std::sort(d.cells_only_in_new.begin(), d.cells_only_in_new.end());
  std::set<std::pair<long, long>> new_edges;
  for (const Edge& e : next.edges) new_edges.insert(std::minmax(next.vkey[e.v0], next.vkey[e.v1]));
  for (int e = 0; e < prev.num_edges(); ++e) {
    const Edge& ed = prev.edges[e];
    if (new_edges.count(std::minmax(prev.vkey[ed.v0], prev.vkey[ed.v1]))) continue;
    d.edges_only_in_old.push_back(e);
    double h = prev.h_edge[e];
    for (int c : {ed.left, ed.right})
      if (c >= 0) h = std::max({h, d.hhat_old_cell[c], prev.h_cell[c]});
    d.hhat_old_edge[e] = h;
  }
  return d;
}

/// Integration pieces of the common refinement of two meshes of one forest.
struct Overlay {
  struct Piece {
    int ca = -1, cb = -1;
    std::vector<Vec2> poly;
    int group = -1;  // cell of the finest common coarsening
  };
  std::vector<Piece> pieces;
  int num_groups = 0;
  bool identical = false;
};

inline Overlay make_overlay(const PolyMesh& a, const PolyMesh& b) {
  Overlay ov;
  if (&a == &b || (a.forest == b.forest && a.generation == b.generation)) {
    ov.identical = true;
    for (int c = 0; c < a.num_cells(); ++c) ov.pieces.push_back({c, c, a.polygon(c), c});
    ov.num_groups = a.num_cells();
    return ov;
  }
  const CommonCoarsening cc = common_coarsening(a, b);
  ov.identical = cc.identical;
  ov.num_groups = int(cc.cells_a.size());
  for (std::size_t g = 0; g < cc.cells_a.size(); ++g) {
    if (cc.group_leaves[g].empty()) {
      ov.pieces.push_back({cc.cells_a[g][0], cc.cells_b[g][0], a.polygon(cc.cells_a[g][0]), int(g)});
      continue;
    }
    for (int li : cc.group_leaves[g])
      ov.pieces.push_back({cc.leaves.cell_a[li], cc.leaves.cell_b[li], a.forest->outline_coords(cc.leaves.leaf[li]), int(g)});
  }
  return ov;
}

struct MeshReport {
  bool ok = true;
  std::vector<std::string> problems;
  double area_error = 0.0;
  double min_edge_ratio = 1e300;
  int non_star = 0;
};

/// Check the PolyMesh invariants for a given rho.
inline MeshReport validate_mesh(const PolyMesh& m, double rho = 0.05, bool check_edge_ratio = false) {
  MeshReport r;
  r.area_error = std::abs(m.total_area() - 1.0);
  if (r.area_error > 1e-12) r.problems.push_back("area");
  for (int c = 0; c < m.num_cells(); ++c) {
    const auto p = m.polygon(c);
    const int n = int(p.size());
    for (int i = 0; i < n; ++i)
      for (int j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;
        const Vec2 a = p[i], b = p[(i + 1) % n], c2 = p[j], d = p[(j + 1) % n];
        const double d1 = cross(b - a, c2 - a), d2 = cross(b - a, d - a);
        const double d3 = cross(d - c2, a - c2), d4 = cross(d - c2, b - c2);
        if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
          r.problems.push_back("self-intersection in cell " + std::to_string(c));
      }
    if (!star_shaped(p, rho)) ++r.non_star;
    for (int e : m.cell_edges[c]) r.min_edge_ratio = std::min(r.min_edge_ratio, m.h_edge[e] / m.h_cell[c]);
  }
  if (r.non_star) r.problems.push_back("non-star-shaped cells");
  for (const Edge& e : m.edges) {
    const bool on_bdry = [&] {
      const Vec2 x = 0.5 * (m.vertices[e.v0] + m.vertices[e.v1]);
      return std::min({x.x(), x.y(), 1 - x.x(), 1 - x.y()}) < 1e-12;
    }();
    if ((e.right < 0) != on_bdry) r.problems.push_back("edge adjacency");
  }
  if (check_edge_ratio && r.min_edge_ratio < rho) r.problems.push_back("edge ratio");
  r.ok = r.problems.empty();
  return r;
}

/// Plain-text serialization ("POLYMESH 1").
inline void write_polymesh(std::ostream& os, const PolyMesh& m) {
  os << "POLYMESH 1\n";
  os << "generation " << m.generation << "\n";
  os << "vertices " << m.num_vertices() << "\n";
  os << std::setprecision(17);
  for (const auto& v : m.vertices) os << v.x() << " " << v.y() << "\n";
  os << "cells " << m.num_cells() << "\n";
  for (const auto& c : m.cells) {
    os << c.size();
    for (int v : c) os << " " << v;
    os << "\n";
  }
  os << "edges " << m.num_edges() << "\n";
  for (const Edge& e : m.edges) os << e.v0 << " " << e.v1 << " " << e.left << " " << e.right << "\n";
}

inline PolyMesh read_polymesh(std::istream& is) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "POLYMESH" || version != 1) throw Error("read_polymesh: bad header");
  long gen = 0;
  int nv = 0, nc = 0;
  is >> tag >> gen >> tag >> nv;
  std::vector<Vec2> verts(nv);
  for (auto& v : verts) is >> v.x() >> v.y();
  is >> tag >> nc;
  std::vector<std::vector<int>> cells(nc);
  for (auto& c : cells) {
    int k = 0;
    is >> k;
    c.resize(k);
    for (auto& v : c) is >> v;
  }
  if (!is) throw Error("read_polymesh: truncated input");
  return mesh_from_polygons(verts, cells, gen);
}

}  // namespace pvem
