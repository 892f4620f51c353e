#pragma once

#include "pvem/adapt.hpp"
#include "pvem/estimators.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace pvem {

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error("ConfigError: " + what) {}
};

/// Run description. Unset numeric fields (negative) take the benchmark defaults.
struct ExperimentConfig {
  std::string benchmark = "vem_oscillating";
  std::string backend;  // "vem" or "fem"; derived from the benchmark when empty
  int k = 1;
  int index = 3;
  int n = 0;  // cells per side, overrides index when positive
  std::string tau_rule = "h";  // h, h2 or fixed
  double tau = 0.0;            // used by tau_rule = fixed
  double T = -1.0;
  double lambda = 0.5;
  double diffusion = -1.0;
  std::string transfer;  // local, l2, elliptic; backend default when empty
  bool adapt = false;
  MarkingConfig marking;
  std::string custom_u0 = "zero";  // custom benchmark: zero or sine
  double C_stab = 1.0;
  unsigned seed = 0;
  int checkpoint_every = 0;
  bool convergence = false;
  std::string name;
  std::string output = "results";

  std::string resolved_backend() const {
    if (!backend.empty()) return backend;
    return benchmark == "fem_hat" ? "fem" : "vem";
  }
  int cells_per_side() const {
    if (n > 0) return n;
    return resolved_backend() == "fem" ? 1 << (index + 2) : 1 << index;
  }
  double mesh_size() const { return std::sqrt(2.0) / cells_per_side(); }
  std::string run_name() const {
    if (!name.empty()) return name;
    return benchmark + "_k" + std::to_string(k) + "_i" + std::to_string(index) + "_tau" + tau_rule;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& k, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("bad boolean for " + k + ": " + v);
}

template <class T>
T parse_num(const std::string& k, const std::string& v) {
  std::istringstream is(v);
  T x{};
  is >> x;
  if (!is || !is.eof()) throw ConfigError("bad number for " + k + ": " + v);
  return x;
}

}  // namespace detail

inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_num;
  const std::string& v = value;
  if (key == "benchmark") c.benchmark = v;
  else if (key == "backend") c.backend = v;
  else if (key == "k") c.k = parse_num<int>(key, v);
  else if (key == "index" || key == "i") c.index = parse_num<int>(key, v);
  else if (key == "n") c.n = parse_num<int>(key, v);
  else if (key == "tau_rule") c.tau_rule = v;
  else if (key == "tau") {
    c.tau = parse_num<double>(key, v);
    c.tau_rule = "fixed";
  } else if (key == "T") c.T = parse_num<double>(key, v);
  else if (key == "lambda") c.lambda = parse_num<double>(key, v);
  else if (key == "diffusion") c.diffusion = parse_num<double>(key, v);
  else if (key == "transfer") c.transfer = v;
  else if (key == "adapt") c.adapt = parse_bool(key, v);
  else if (key == "refine_fraction") c.marking.refine_fraction = parse_num<double>(key, v);
  else if (key == "coarsen_fraction") c.marking.coarsen_fraction = parse_num<double>(key, v);
  else if (key == "refine_period") c.marking.refine_period = parse_num<int>(key, v);
  else if (key == "coarsen_period") c.marking.coarsen_period = parse_num<int>(key, v);
  else if (key == "max_depth") c.marking.max_depth = parse_num<int>(key, v);
  else if (key == "max_cells") c.marking.max_cells = parse_num<int>(key, v);
  else if (key == "max_patch") c.marking.max_patch = parse_num<int>(key, v);
  else if (key == "rho") c.marking.rho = parse_num<double>(key, v);
  else if (key == "custom_u0") c.custom_u0 = v;
  else if (key == "C_stab") c.C_stab = parse_num<double>(key, v);
  else if (key == "seed") c.seed = parse_num<unsigned>(key, v);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_num<int>(key, v);
  else if (key == "convergence") c.convergence = parse_bool(key, v);
  else if (key == "name") c.name = v;
  else if (key == "output") c.output = v;
  else throw ConfigError("unknown key: " + key);
}

/// Parse "key = value" lines; '#' starts a comment.
inline void read_config(std::istream& is, ExperimentConfig& c) {
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    apply_setting(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

inline void apply_override(ExperimentConfig& c, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
  apply_setting(c, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
}

inline void validate(const ExperimentConfig& c) {
  static const std::set<std::string> known = {"fem_hat", "vem_oscillating", "vem_layer", "vem_circulating",
                                              "custom"};
  if (!known.count(c.benchmark)) throw ConfigError("unknown benchmark: " + c.benchmark);
  const std::string be = c.resolved_backend();
  if (be != "vem" && be != "fem") throw ConfigError("unknown backend: " + be);
  if (c.benchmark == "fem_hat" && be != "fem") throw ConfigError("fem_hat needs the fem backend");
  if (c.benchmark.rfind("vem_", 0) == 0 && be != "vem") throw ConfigError(c.benchmark + " needs the vem backend");
  if (be == "vem" && c.k != 1 && c.k != 2) throw ConfigError("k must be 1 or 2");
  if (be == "fem" && c.k != 1) throw ConfigError("fem backend is bilinear (k = 1)");
  if (be == "fem" && c.adapt) throw ConfigError("adaptivity needs the vem backend");
  if (c.n <= 0 && (c.index < 0 || c.index > 10)) throw ConfigError("index out of range");
  if (c.tau_rule != "h" && c.tau_rule != "h2" && c.tau_rule != "fixed") throw ConfigError("bad tau_rule");
  if (c.tau_rule == "fixed" && !(c.tau > 0)) throw ConfigError("tau must be positive");
  if (!(c.lambda > 0 && c.lambda < 1)) throw ConfigError("lambda must lie in (0, 1)");
  if (c.custom_u0 != "zero" && c.custom_u0 != "sine") throw ConfigError("custom_u0 must be zero or sine");
  if (!c.transfer.empty()) {
    try {
      parse_transfer(c.transfer);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (c.convergence && c.n > 0) throw ConfigError("convergence mode uses index, not n");
  try {
    c.marking.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

/// Heat equation with f = 0: u = exp(-2 pi^2 a t) sin(pi x) sin(pi y), or u = 0.
inline ProblemData custom_problem(bool sine, double alpha, double T) {
  ProblemData p;
  p.name = "custom";
  set_isotropic(p, alpha);
  p.T = T;
  if (!sine) {
    p.u = [](const Vec2&, double) { return 0.0; };
    p.grad_u = [](const Vec2&, double) { return Vec2(0.0, 0.0); };
    return p;
  }
  const double d = 2 * kPi * kPi * alpha;
  p.u = [d](const Vec2& x, double t) { return std::exp(-d * t) * std::sin(kPi * x.x()) * std::sin(kPi * x.y()); };
  p.grad_u = [d](const Vec2& x, double t) {
    const double a = std::exp(-d * t) * kPi;
    return Vec2(a * std::cos(kPi * x.x()) * std::sin(kPi * x.y()), a * std::sin(kPi * x.x()) * std::cos(kPi * x.y()));
  };
  p.u0 = [u = p.u](const Vec2& x) { return u(x, 0.0); };
  return p;
}

inline ProblemData make_problem(const ExperimentConfig& c) {
  ProblemData p;
  if (c.benchmark == "vem_oscillating") p = oscillating_problem();
  else if (c.benchmark == "vem_layer") p = layer_problem();
  else if (c.benchmark == "vem_circulating") p = circulating_problem();
  else if (c.benchmark == "fem_hat") p = hat_problem();
  else p = custom_problem(c.custom_u0 == "sine", 1.0, 1.0);
  const double T = c.T > 0 ? c.T : p.T;
  if (c.diffusion > 0) {
    if (c.benchmark == "vem_oscillating") p = oscillating_problem(c.diffusion, T);
    else if (c.benchmark == "vem_layer") p = layer_problem(c.diffusion, T);
    else if (c.benchmark == "vem_circulating") p = circulating_problem(c.diffusion, T);
    else if (c.benchmark == "fem_hat") p = hat_problem(c.diffusion, T);
    else p = custom_problem(c.custom_u0 == "sine", c.diffusion, T);
  }
  p.T = T;
  return p;
}

/// One CSV line per time step.
struct ResultRow {
  double t = 0;
  int n_cells = 0, n_dofs = 0;
  double err_LinfL2 = 0, est_LinfL2 = 0, eff_LinfL2 = 0;
  double err_L2H1 = 0, est_L2H1 = 0, eff_L2H1 = 0;
  double eta_ellip_L2 = 0, eta_ellip_H1 = 0, eta_space = 0, eta_time = 0, eta_dataT = 0, eta_dataS = 0,
         eta_mesh = 0;
  double step_eta_space = 0, step_eta_time = 0, step_eta_mesh = 0;
  int cells_before = 0, cells_after = 0, merges_rejected = 0;
  bool has_exact = true;
};

inline const char* result_header() {
  return "t,n_cells,n_dofs,err_LinfL2,est_LinfL2,eff_LinfL2,err_L2H1,est_L2H1,eff_L2H1,eta_ellip_L2,"
         "eta_ellip_H1,eta_space,eta_time,eta_dataT,eta_dataS,eta_mesh,step_eta_space,step_eta_time,"
         "step_eta_mesh,cells_before,cells_after,merges_rejected";
}

namespace detail {

/// Empty field for undefined values (no exact solution, 0/0).
inline std::string num(double v, bool defined = true) {
  if (!defined || !std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

inline double ratio(double a, double b) { return b > 0 ? a / b : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace detail

inline void write_row(std::ostream& os, const ResultRow& r) {
  using detail::num;
  const bool ex = r.has_exact;
  os << num(r.t) << ',' << r.n_cells << ',' << r.n_dofs << ',' << num(r.err_LinfL2, ex) << ','
     << num(r.est_LinfL2) << ',' << num(r.eff_LinfL2, ex) << ',' << num(r.err_L2H1, ex) << ',' << num(r.est_L2H1)
     << ',' << num(r.eff_L2H1, ex) << ',' << num(r.eta_ellip_L2) << ',' << num(r.eta_ellip_H1) << ','
     << num(r.eta_space) << ',' << num(r.eta_time) << ',' << num(r.eta_dataT) << ',' << num(r.eta_dataS) << ','
     << num(r.eta_mesh) << ',' << num(r.step_eta_space) << ',' << num(r.step_eta_time) << ','
     << num(r.step_eta_mesh) << ',' << r.cells_before << ',' << r.cells_after << ',' << r.merges_rejected << '\n';
}

struct RunResult {
  std::vector<ResultRow> rows;
  double h = 0, tau = 0;
  int steps = 0;
  bool ok = true;
  int failed_step = -1;
  std::string message;
  double seconds = 0;
  int total_merges_rejected = 0;
  bool budget_hit = false;
  std::shared_ptr<const PolyMesh> final_mesh;

  const ResultRow& last() const { return rows.back(); }
};

struct RunHooks {
  std::ostream* csv = nullptr;
  std::function<void(const StepState&, const ResultRow&)> on_step;
  std::string checkpoint_dir;  // empty: no checkpoints
};

namespace detail {

inline void write_checkpoint(const std::string& dir, const std::string& name, const StepState& s) {
  std::filesystem::create_directories(dir);
  std::ostringstream stem;
  stem << dir << "/" << name << "_step" << std::setw(6) << std::setfill('0') << s.n;
  {
    std::ofstream m(stem.str() + ".polymesh");
    write_polymesh(m, s.space->poly_mesh());
  }
  std::ofstream u(stem.str() + ".dofs");
  u << "t " << std::setprecision(17) << s.t << "\nndofs " << s.U.size() << "\n";
  for (int i = 0; i < s.U.size(); ++i) u << s.U[i] << "\n";
}

}  // namespace detail

/// Time loop for one configuration.
inline RunResult run_experiment(const ExperimentConfig& cfg, const RunHooks& hooks = {}) {
  validate(cfg);
  const auto clock0 = std::chrono::steady_clock::now();
  const auto prob = std::make_shared<const ProblemData>(make_problem(cfg));
  const bool fem = cfg.resolved_backend() == "fem";
  const int nside = cfg.cells_per_side();
  RunResult res;
  res.h = cfg.mesh_size();
  double tau = cfg.tau_rule == "h" ? res.h : cfg.tau_rule == "h2" ? res.h * res.h : cfg.tau;
  const int N = std::max(1, int(std::ceil(prob->T / tau - 1e-9)));
  tau = prob->T / N;
  res.tau = tau;
  const TransferKind kind = !cfg.transfer.empty() ? parse_transfer(cfg.transfer)
                            : fem                 ? TransferKind::Elliptic
                                                  : TransferKind::LocalLagrange;
  const WarpMap warp;

  auto make_space = [&](double t, std::shared_ptr<const PolyMesh> m) -> std::shared_ptr<const DiscreteSpace> {
    if (fem) return std::make_shared<FemSpace>(nside, warp, t, *prob);
    return std::make_shared<VemSpace>(std::move(m), *prob, cfg.k, cfg.C_stab);
  };

  std::shared_ptr<const PolyMesh> mesh;
  if (!fem) mesh = std::make_shared<PolyMesh>(build_uniform_quad_mesh(nside));
  std::shared_ptr<const DiscreteSpace> space;
  try {
    space = make_space(0.0, mesh);
  } catch (const Error& e) {
    res.ok = false;
    res.failed_step = 0;
    res.message = e.what();
    return res;
  }

  const bool exact = prob->has_exact();
  EstimatorTotals tot;
  tot.alpha = alpha_lambda(*prob, cfg.lambda);
  ErrorTracker err;
  const std::string name = cfg.run_name();

  if (hooks.csv) *hooks.csv << result_header() << '\n';

  auto emit = [&](const StepState& s, const StepEstimates& e, const AdaptLog* log) {
    ResultRow r;
    r.t = s.t;
    r.n_cells = s.space->num_cells();
    r.n_dofs = s.space->ndofs;
    r.has_exact = exact;
    r.err_LinfL2 = err.LinfL2;
    r.err_L2H1 = err.L2H1();
    r.est_LinfL2 = tot.total_LinfL2();
    r.est_L2H1 = tot.total_L2H1();
    r.eff_LinfL2 = detail::ratio(r.est_LinfL2, r.err_LinfL2);
    r.eff_L2H1 = detail::ratio(r.est_L2H1, r.err_L2H1);
    const double t = tot.t, a = tot.alpha;
    r.eta_ellip_L2 = tot.L2ell.Linf;
    r.eta_ellip_H1 = tot.H1ell.L2();
    r.eta_space = t > 0 ? tot.S.A(t, a) : 0.0;
    r.eta_time = t > 0 ? tot.T.A(t, a) : 0.0;
    r.eta_dataT = t > 0 ? tot.thT.A(t, a) : 0.0;
    r.eta_dataS = t > 0 ? tot.thS.A_tilde(t, a) : 0.0;
    r.eta_mesh = t > 0 ? tot.M.A(t, a) : 0.0;
    r.step_eta_space = e.eta_S;
    r.step_eta_time = e.eta_T;
    r.step_eta_mesh = e.eta_M;
    r.cells_before = log ? log->cells_before : r.n_cells;
    r.cells_after = log ? log->cells_after : r.n_cells;
    r.merges_rejected = log ? log->merges_rejected : 0;
    res.rows.push_back(r);
    if (hooks.csv) write_row(*hooks.csv, r);
    if (hooks.on_step) hooks.on_step(s, r);
  };

  StepState s = initial_state(space);
  tot.seed = s.seed;
  if (exact) err.start(s);
  StepEstimates e0 = estimate_step(s, nullptr, nullptr);
  tot.add(e0, 0.0);
  emit(s, e0, nullptr);
  if (!hooks.checkpoint_dir.empty() && cfg.checkpoint_every > 0) detail::write_checkpoint(hooks.checkpoint_dir, name, s);

  std::shared_ptr<const StepPair> same_pair;
  std::vector<double> indicators = e0.ell.cell_L2;
  for (int j = 1; j <= N; ++j) {
    try {
      std::shared_ptr<const DiscreteSpace> next = space;
      AdaptLog log;
      bool adapted = false;
      if (fem) {
        next = make_space(s.t + tau, nullptr);
      } else if (cfg.adapt && (refine_step(cfg.marking, s.n) || coarsen_step(cfg.marking, s.n))) {
        PolyMesh nm = adapt_mesh(*mesh, indicators, cfg.marking, s.n, log);
        res.total_merges_rejected += log.merges_rejected;
        res.budget_hit = res.budget_hit || log.budget_hit;
        if (log.changed()) {
          mesh = std::make_shared<PolyMesh>(std::move(nm));
          next = make_space(s.t + tau, mesh);
          adapted = true;
        }
      }
      StepState s1 = advance(s, next, kind, tau);
      std::shared_ptr<const StepPair> pr;
      if (next == space && !fem) {
        if (!same_pair) same_pair = std::make_shared<StepPair>(make_step_pair(*next, *next));
        pr = same_pair;
      } else {
        pr = std::make_shared<StepPair>(make_step_pair(*next, *space));
        same_pair.reset();
      }
      const StepEstimates e = estimate_step(s1, &s, pr.get());
      tot.add(e, tau);
      if (exact) err.add(s1, s, *pr);
      indicators = e.ell.cell_L2;
      space = next;
      s = std::move(s1);
      emit(s, e, adapted ? &log : nullptr);
      if (!hooks.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && (j % cfg.checkpoint_every == 0 || j == N))
        detail::write_checkpoint(hooks.checkpoint_dir, name, s);
    } catch (const Error& ex) {
      res.ok = false;
      res.failed_step = j;
      res.message = ex.what();
      break;
    }
  }
  res.steps = int(res.rows.size()) - 1;
  res.final_mesh = fem ? std::make_shared<PolyMesh>(space->poly_mesh()) : mesh;
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
  return res;
}

/// log(E_coarse / E_fine) / log(h_coarse / h_fine); NaN when undefined.
inline double observed_rate(double e_coarse, double e_fine, double h_coarse, double h_fine) {
  if (!(e_coarse > 0) || !(e_fine > 0) || h_coarse == h_fine) return std::numeric_limits<double>::quiet_NaN();
  return std::log(e_coarse / e_fine) / std::log(h_coarse / h_fine);
}

struct ConvergenceRates {
  double err_LinfL2, est_LinfL2, err_L2H1, est_L2H1, eta_time, eta_ellip_H1;
};

inline ConvergenceRates final_rates(const RunResult& coarse, const RunResult& fine) {
  const ResultRow &a = coarse.last(), &b = fine.last();
  auto r = [&](double x, double y) { return observed_rate(x, y, coarse.h, fine.h); };
  return {r(a.err_LinfL2, b.err_LinfL2), r(a.est_LinfL2, b.est_LinfL2), r(a.err_L2H1, b.err_L2H1),
          r(a.est_L2H1, b.est_L2H1),     r(a.eta_time, b.eta_time),       r(a.eta_ellip_H1, b.eta_ellip_H1)};
}

inline std::string timestamp_comment() {
  const std::time_t now = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return std::string("# generated ") + buf;
}

}  // namespace pvem
