// Batch runner for the parabolic VEM/FEM benchmarks.
//
//   pvem_cli run <config> [--override key=value ...] [--out dir] [--quiet]
//
// Exit codes: 0 ok, 2 configuration error, 3 solver failure.

#include "pvem/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace pvem;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  bool quiet = false;
};

void print_summary(const ExperimentConfig& cfg, const RunResult& r, const std::string& csv) {
  const ResultRow& f = r.last();
  std::cout << cfg.run_name() << ": " << r.steps << " steps, h=" << r.h << ", tau=" << r.tau << ", "
            << f.n_cells << " cells, " << r.seconds << " s\n";
  std::cout << "  LinfL2 error " << f.err_LinfL2 << " estimator " << f.est_LinfL2 << " effectivity "
            << f.eff_LinfL2 << "\n";
  std::cout << "  L2H1   error " << f.err_L2H1 << " estimator " << f.est_L2H1 << " effectivity " << f.eff_L2H1
            << "\n";
  if (cfg.adapt) std::cout << "  rejected merges " << r.total_merges_rejected << (r.budget_hit ? ", cell budget hit" : "") << "\n";
  std::cout << "  csv " << csv << "\n";
}

int run_one(const ExperimentConfig& cfg, const Options& opt, RunResult& out) {
  std::filesystem::create_directories(cfg.output);
  const std::string path = cfg.output + "/" + cfg.run_name() + ".csv";
  std::ofstream csv(path);
  if (!csv) {
    std::cerr << "cannot write " << path << "\n";
    return 2;
  }
  csv << timestamp_comment() << '\n';
  RunHooks hooks;
  hooks.csv = &csv;
  if (cfg.checkpoint_every > 0) hooks.checkpoint_dir = cfg.output + "/checkpoints";
  int last_pct = -1;
  if (!opt.quiet)
    hooks.on_step = [&](const StepState& s, const ResultRow&) {
      const int pct = int(100.0 * s.t / s.space->prob->T);
      if (pct / 10 != last_pct / 10) {
        std::cerr << "  " << cfg.run_name() << " t=" << s.t << " (" << pct << "%)\n";
        last_pct = pct;
      }
    };
  out = run_experiment(cfg, hooks);
  if (!out.ok) {
    std::cerr << "run failed at step " << out.failed_step << ": " << out.message << "\n";
    return 3;
  }
  if (!opt.quiet) print_summary(cfg, out, path);
  return 0;
}

int run_command(const Options& opt) {
  ExperimentConfig cfg;
  try {
    std::ifstream in(opt.config);
    if (!in) throw ConfigError("cannot open " + opt.config);
    read_config(in, cfg);
    for (const auto& kv : opt.overrides) apply_override(cfg, kv);
    if (!opt.out.empty()) cfg.output = opt.out;
    validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (!cfg.convergence) {
      RunResult r;
      return run_one(cfg, opt, r);
    }
    ExperimentConfig coarse = cfg;
    coarse.index = cfg.index - 1;
    if (coarse.index < 0) {
      std::cerr << "ConfigError: convergence mode needs index >= 1\n";
      return 2;
    }
    if (!cfg.name.empty()) coarse.name = cfg.name + "_coarse";
    RunResult rc, rf;
    if (int code = run_one(coarse, opt, rc)) return code;
    if (int code = run_one(cfg, opt, rf)) return code;
    const ConvergenceRates q = final_rates(rc, rf);
    const std::string path = cfg.output + "/" + cfg.run_name() + "_rates.csv";
    std::ofstream os(path);
    os << "quantity,rate\n";
    const std::pair<const char*, double> rows[] = {{"err_LinfL2", q.err_LinfL2}, {"est_LinfL2", q.est_LinfL2},
                                                   {"err_L2H1", q.err_L2H1},     {"est_L2H1", q.est_L2H1},
                                                   {"eta_time", q.eta_time},     {"eta_ellip_H1", q.eta_ellip_H1}};
    for (const auto& [k, v] : rows) os << k << ',' << detail::num(v) << '\n';
    if (!opt.quiet) {
      std::cout << "final-time rates (index " << coarse.index << " -> " << cfg.index << ")\n";
      for (const auto& [k, v] : rows) std::cout << "  " << k << " " << v << "\n";
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive VEM/FEM solver for parabolic problems with a posteriori estimates"};
  app.require_subcommand(1);
  Options opt;
  auto* run = app.add_subcommand("run", "Run one experiment from a key = value config file");
  run->add_option("config", opt.config, "Config file")->required();
  run->add_option("--override", opt.overrides, "Override a config entry, key=value")->take_all();
  run->add_option("--out", opt.out, "Output directory");
  run->add_flag("--quiet", opt.quiet, "Suppress progress and summary");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return run_command(opt);
}
