#include "support.hpp"

#include <catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

using namespace pvem;
using Catch::Approx;

namespace {

ExperimentConfig parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  read_config(is, c);
  return c;
}

std::vector<std::string> csv_lines(const ExperimentConfig& c) {
  std::ostringstream os;
  RunHooks h;
  h.csv = &os;
  const RunResult r = run_experiment(c, h);
  REQUIRE(r.ok);
  std::vector<std::string> lines;
  std::istringstream is(os.str());
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  return lines;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("config parsing", "[experiment]") {
  const ExperimentConfig c = parse(
      "# comment line\n"
      "benchmark = vem_layer   # trailing comment\n"
      "k=2\n"
      "\n"
      "tau = 0.01\n"
      "adapt = on\n"
      "max_depth = 2\n");
  CHECK(c.benchmark == "vem_layer");
  CHECK(c.k == 2);
  CHECK(c.tau_rule == "fixed");
  CHECK(c.tau == 0.01);
  CHECK(c.adapt);
  CHECK(c.marking.max_depth == 2);
  CHECK(c.resolved_backend() == "vem");
  CHECK_NOTHROW(validate(c));

  CHECK_THROWS_AS(parse("colour = blue\n"), ConfigError);
  CHECK_THROWS_AS(parse("k = two\n"), ConfigError);
  CHECK_THROWS_AS(parse("just words\n"), ConfigError);
  CHECK_THROWS_AS(validate(parse("k = 3\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse("tau = -1\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse("benchmark = fem_hat\nadapt = true\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse("benchmark = vem_layer\nbackend = fem\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse("lambda = 1\n")), ConfigError);
  CHECK_THROWS_AS(validate(parse("transfer = nodal\n")), ConfigError);

  ExperimentConfig o;
  apply_override(o, "index=4");
  CHECK(o.index == 4);
  CHECK(o.cells_per_side() == 16);
  CHECK_THROWS_AS(apply_override(o, "index"), ConfigError);
  ExperimentConfig f;
  f.benchmark = "fem_hat";
  f.index = 1;
  CHECK(f.resolved_backend() == "fem");
  CHECK(f.cells_per_side() == 8);
}

TEST_CASE("marking configuration", "[adapt]") {
  MarkingConfig m;
  CHECK_NOTHROW(m.validate());
  CHECK(refine_step(m, 5));
  CHECK_FALSE(refine_step(m, 0));
  CHECK_FALSE(refine_step(m, 7));
  CHECK(coarsen_step(m, 10));
  CHECK_FALSE(coarsen_step(m, 5));
  m.coarsen_fraction = 0.6;
  CHECK_THROWS_AS(m.validate(), Error);
  MarkingConfig z;
  z.refine_period = 0;
  CHECK_THROWS_AS(z.validate(), Error);
}

TEST_CASE("indicators below the coarsening threshold merge cells", "[adapt]") {
  PolyMesh m = build_uniform_quad_mesh(4);
  m = refine_cells(m, *m.forest, {0, 5, 10, 15});
  std::vector<double> ind(m.num_cells(), 1e-3);
  ind[0] = 1.0;
  MarkingConfig cfg;
  cfg.refine_period = 7;  // step 10 coarsens only
  AdaptLog log;
  const PolyMesh r = adapt_mesh(m, ind, cfg, 10, log);
  CHECK(log.merged > 0);
  CHECK(log.refined == 0);
  CHECK(r.num_cells() < m.num_cells());
  CHECK(log.cells_after == r.num_cells());
  CHECK(validate_mesh(r).ok);
}

TEST_CASE("indicators between the thresholds keep the mesh", "[adapt]") {
  const PolyMesh m = build_uniform_quad_mesh(4);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> U(0.1, 0.45);
  std::vector<double> ind(m.num_cells());
  for (auto& x : ind) x = U(rng);
  ind[3] = 1.0;
  MarkingConfig cfg;
  cfg.max_depth = 0;  // nothing may be split
  AdaptLog log;
  const PolyMesh r = adapt_mesh(m, ind, cfg, 10, log);
  CHECK_FALSE(log.changed());
  CHECK(r.generation == m.generation);
  CHECK(r.num_cells() == m.num_cells());
}

TEST_CASE("refinement respects depth and cell budget", "[adapt]") {
  PolyMesh m = build_uniform_quad_mesh(2);
  MarkingConfig cfg;
  cfg.max_depth = 2;
  AdaptLog log;
  for (int round = 0; round < 4; ++round) {
    std::vector<double> ind(m.num_cells(), 1.0);
    m = adapt_mesh(m, ind, cfg, 5, log);
  }
  CHECK(m.num_cells() == 64);
  for (int c = 0; c < m.num_cells(); ++c) CHECK(node_depth(*m.forest, m.node[c]) <= 2);

  PolyMesh b = build_uniform_quad_mesh(4);
  cfg.max_cells = 25;
  std::vector<double> ind(b.num_cells(), 1.0);
  b = adapt_mesh(b, ind, cfg, 5, log);
  CHECK(log.budget_hit);
  CHECK(b.num_cells() <= 25);
  CHECK_THROWS_AS(adapt_mesh(b, {1.0}, cfg, 5, log), Error);
}

TEST_CASE("refining an agglomerate restores its members", "[adapt]") {
  PolyMesh m = build_uniform_quad_mesh(4);
  const std::set<int> before(m.node.begin(), m.node.end());
  CoarsenResult cr = coarsen_patches(m, *m.forest, {0, 1, 4, 5});
  REQUIRE(cr.merged == 1);
  m = cr.mesh;
  std::vector<double> ind(m.num_cells(), 0.2);
  for (int c = 0; c < m.num_cells(); ++c)
    if (m.forest->nodes[m.node[c]].kind == ForestNode::Agglomerate) ind[c] = 1.0;
  MarkingConfig cfg;
  AdaptLog log;
  const PolyMesh r = adapt_mesh(m, ind, cfg, 5, log);
  CHECK(std::set<int>(r.node.begin(), r.node.end()) == before);
}

TEST_CASE("zero run produces zero columns", "[experiment]") {
  ExperimentConfig c = parse("benchmark = custom\nn = 4\ntau = 0.25\n");
  const auto lines = csv_lines(c);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == result_header());
  const auto cols = split(lines[0]);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto v = split(lines[r]);
    REQUIRE(v.size() == cols.size());
    for (std::size_t j = 3; j < 19; ++j) {
      if (cols[j].rfind("eff_", 0) == 0) CHECK(v[j].empty());
      else CHECK(v[j] == "0");
    }
  }
}

TEST_CASE("runs are reproducible", "[experiment]") {
  ExperimentConfig c;
  c.benchmark = "vem_oscillating";
  c.index = 2;
  c.k = 2;
  const auto a = csv_lines(c), b = csv_lines(c);
  CHECK(a == b);
  CHECK(a.size() == 1 + 1 + 3);  // header, t = 0, ceil(1 / h) steps
}

TEST_CASE("csv rows use twelve significant digits", "[experiment]") {
  ResultRow r;
  r.t = 1.0 / 3.0;
  r.err_LinfL2 = 2.0 / 3.0;
  std::ostringstream os;
  write_row(os, r);
  const auto v = split(os.str().substr(0, os.str().size() - 1));
  CHECK(v[0] == "0.333333333333");
  CHECK(v[3] == "0.666666666667");
  r.has_exact = false;
  std::ostringstream os2;
  write_row(os2, r);
  CHECK(split(os2.str())[3].empty());
}

TEST_CASE("observed rates", "[experiment]") {
  CHECK(observed_rate(1.0, 0.5, 0.2, 0.1) == Approx(1.0).epsilon(1e-14));
  CHECK(observed_rate(1.0, 0.25, 0.2, 0.1) == Approx(2.0).epsilon(1e-14));
  CHECK(std::isnan(observed_rate(0.0, 0.0, 0.2, 0.1)));
  CHECK(std::isnan(observed_rate(1.0, 0.5, 0.1, 0.1)));
}

TEST_CASE("oscillating run converges", "[experiment]") {
  ExperimentConfig c;
  c.benchmark = "vem_oscillating";
  std::vector<RunResult> r;
  for (int i : {2, 3}) {
    c.index = i;
    r.push_back(run_experiment(c));
    REQUIRE(r.back().ok);
  }
  const ConvergenceRates q = final_rates(r[0], r[1]);
  CHECK(q.err_LinfL2 > 0.5);
  CHECK(q.est_L2H1 > 0);
  CHECK(r[1].last().eff_LinfL2 > 0);
  CHECK(r[1].last().eff_L2H1 > 0);
}

TEST_CASE("coarse moving-mesh run completes", "[experiment]") {
  ExperimentConfig c;
  c.benchmark = "fem_hat";
  c.index = 0;
  c.tau_rule = "fixed";
  c.tau = 0.5;
  c.T = 1.0;
  const RunResult r = run_experiment(c);
  CHECK(r.ok);
  CHECK(r.steps == 2);
}

TEST_CASE("checkpoints can be read back", "[experiment]") {
  const std::string dir = (std::filesystem::temp_directory_path() / "pvem_ckpt_test").string();
  std::filesystem::remove_all(dir);
  ExperimentConfig c = parse("benchmark = vem_layer\nn = 6\ntau = 0.05\nT = 0.2\nadapt = true\n"
                             "refine_period = 2\ncheckpoint_every = 2\nname = ck\n");
  RunHooks h;
  h.checkpoint_dir = dir;
  const RunResult r = run_experiment(c, h);
  REQUIRE(r.ok);
  std::ifstream in(dir + "/ck_step000004.polymesh");
  REQUIRE(in);
  const PolyMesh m = read_polymesh(in);
  CHECK(m.num_cells() == r.final_mesh->num_cells());
  std::ifstream d(dir + "/ck_step000004.dofs");
  std::string tag;
  double t = 0;
  d >> tag >> t;
  CHECK(t == Approx(0.2));
  std::filesystem::remove_all(dir);
}

TEST_CASE("layer refinement follows the front", "[adapt][experiment]") {
  ExperimentConfig c = parse("benchmark = vem_layer\nn = 20\ntau = 0.01\nT = 0.5\nadapt = true\n");
  bool mesh_only_at_adapt = true;
  RunHooks h;
  h.on_step = [&](const StepState& s, const ResultRow& row) {
    const bool adapt_step = s.n > 1 && ((s.n - 1) % 5 == 0);
    if (row.step_eta_mesh > 0 && !adapt_step) mesh_only_at_adapt = false;
  };
  const RunResult r = run_experiment(c, h);
  REQUIRE(r.ok);
  CHECK(mesh_only_at_adapt);
  const PolyMesh& m = *r.final_mesh;
  CHECK(validate_mesh(m).ok);
  const double h0 = std::sqrt(2.0) / 20;
  int fine = 0, near = 0;
  for (int c2 = 0; c2 < m.num_cells(); ++c2) {
    if (m.h_cell[c2] >= h0 - 1e-12) continue;
    ++fine;
    const Vec2 x = m.center[c2];
    if (std::abs(x.x() + x.y() - 0.5) / std::sqrt(2.0) < 0.1) ++near;
  }
  REQUIRE(fine > 0);
  // pilot run: 0.503
  CHECK(double(near) / fine >= 0.45);
}
