#pragma once

#include "pvem/mesh.hpp"

#include <algorithm>
#include <numeric>

namespace pvem {

/// Marking parameters. Thresholds are fractions of the largest indicator.
struct MarkingConfig {
  double refine_fraction = 0.5;
  double coarsen_fraction = 0.05;
  int refine_period = 5;
  int coarsen_period = 10;
  int max_depth = 3;
  int max_cells = 100000;
  int max_patch = 4;
  double rho = 0.05;

  void validate() const {
    if (!(coarsen_fraction < refine_fraction)) throw Error("MarkingConfig: coarsen threshold must be below refine");
    if (refine_period < 1 || coarsen_period < 1) throw Error("MarkingConfig: periods must be >= 1");
  }
};

struct AdaptLog {
  int cells_before = 0;
  int cells_after = 0;
  int refined = 0;
  int merged = 0;
  int merges_rejected = 0;
  bool budget_hit = false;
  bool changed() const { return refined > 0 || merged > 0; }
};

/// Number of splits between a forest node and its root; agglomerates count as
/// their shallowest member.
inline int node_depth(const AdaptForest& f, int n) {
  const ForestNode& nd = f.nodes[n];
  if (nd.kind == ForestNode::Agglomerate) {
    int d = 1 << 20;
    for (int m : nd.members) d = std::min(d, node_depth(f, m));
    return d;
  }
  return nd.kind == ForestNode::Child ? 1 + node_depth(f, nd.parent) : 0;
}

inline bool refine_step(const MarkingConfig& c, int step) { return step > 0 && step % c.refine_period == 0; }
inline bool coarsen_step(const MarkingConfig& c, int step) { return step > 0 && step % c.coarsen_period == 0; }

/// One marking round on `mesh` from per-cell indicators. Refinement is applied
/// first; coarsening then acts on marked cells the refinement left untouched.
inline PolyMesh adapt_mesh(const PolyMesh& mesh, const std::vector<double>& ind, const MarkingConfig& cfg,
                           int step, AdaptLog& log) {
  if (int(ind.size()) != mesh.num_cells()) throw Error("adapt_mesh: indicator size mismatch");
  AdaptForest& forest = *mesh.forest;
  log = AdaptLog{};
  log.cells_before = log.cells_after = mesh.num_cells();
  const double mx = *std::max_element(ind.begin(), ind.end());
  if (!(mx > 0)) return mesh;

  std::set<int> rmarks, cmarks;
  if (refine_step(cfg, step)) {
    std::vector<int> cand;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      if (ind[c] <= cfg.refine_fraction * mx) continue;
      const ForestNode& nd = forest.nodes[mesh.node[c]];
      if (nd.kind != ForestNode::Agglomerate && node_depth(forest, mesh.node[c]) >= cfg.max_depth) continue;
      cand.push_back(c);
    }
    std::sort(cand.begin(), cand.end(), [&](int a, int b) { return ind[a] > ind[b]; });
    int budget = cfg.max_cells - mesh.num_cells();
    for (int c : cand) {
      const ForestNode& nd = forest.nodes[mesh.node[c]];
      const int extra = (nd.kind == ForestNode::Agglomerate ? int(nd.members.size()) : int(nd.outline.size())) - 1;
      if (extra > budget) {
        log.budget_hit = true;
        break;
      }
      budget -= extra;
      rmarks.insert(c);
    }
  }
  if (coarsen_step(cfg, step))
    for (int c = 0; c < mesh.num_cells(); ++c)
      if (ind[c] < cfg.coarsen_fraction * mx && !rmarks.count(c)) cmarks.insert(c);

  PolyMesh cur = rmarks.empty() ? mesh : refine_cells(mesh, forest, rmarks);
  log.refined = int(rmarks.size());
  if (cmarks.size() >= 2) {
    std::unordered_map<int, int> where;
    for (int c = 0; c < cur.num_cells(); ++c) where[cur.node[c]] = c;
    std::set<int> marks;
    for (int c : cmarks) marks.insert(where.at(mesh.node[c]));
    CoarsenResult res = coarsen_patches(cur, forest, marks, cfg.rho, cfg.max_patch);
    log.merged = res.merged;
    log.merges_rejected = res.rejected;
    if (res.merged > 0) cur = std::move(res.mesh);
  }
  log.cells_after = cur.num_cells();
  return cur;
}

}  // namespace pvem
