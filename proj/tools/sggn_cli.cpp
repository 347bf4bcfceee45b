// sggn: run experiments, presets and conditioning sweeps from the shell.
//
//   sggn run <config.json>
//   sggn preset <name> [--out DIR] [--iters K] [--eps-c V] [--svd-tol-mass V] [--svd-tol-gn V]
//   sggn sweep --ns 8,16,32,64,128 --out FILE [--layout uniform|clustered]
//   sggn validate <config.json>
//
// Exit status: 0 success, 2 configuration error, 3 numerical failure.

#include <sggn/sggn.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kConfigError = 2;
constexpr int kNumericalError = 3;

void print_summary(const sggn::RunManifest& m) {
  for (const auto& r : m.runs) {
    std::printf("%-20s iterations %5d  initial %.6e  final %.6e  best %.6e @ %d\n", r.label.c_str(),
                r.iterations, r.initial_loss, r.final_loss, r.best_loss, r.best_iteration);
    if (r.diagnostic) std::printf("%-20s %s\n", "", r.diagnostic->c_str());
  }
  std::printf("manifest: %s\n", m.manifest_path.c_str());
}

sggn::ProgressCallback progress_printer(bool quiet, int every) {
  if (quiet) return {};
  return [every](const std::string& label, const sggn::IterationRecord& r) {
    if (r.k == 1 || r.k % every == 0)
      std::fprintf(stderr, "[%s] iter %5d  loss %.6e  gamma %.3e  active %d\n", label.c_str(), r.k,
                   r.loss, r.gamma, r.active_count);
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-guided Gauss-Newton training of shallow ReLU networks"};
  app.set_version_flag("--version", std::string(sggn::kVersion));
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  int print_every = 25;
  app.add_flag("-q,--quiet", quiet, "Suppress per-iteration progress on stderr");
  app.add_option("--print-every", print_every, "Progress line cadence")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
  std::string run_config;
  run->add_option("config", run_config, "Config file")->required();

  auto* pre = app.add_subcommand("preset", "Run one of the built-in experiments");
  std::string preset_name;
  std::optional<std::string> out_dir;
  std::optional<int> iters;
  std::optional<double> eps_c, tol_mass, tol_gn;
  pre->add_option("name", preset_name,
                  "step1d, delta1d, step2d, synthetic2d_h, synthetic2d_v or lm_step1d")
      ->required();
  pre->add_option("--out", out_dir, "Output directory (default out/<name>)");
  pre->add_option("--iters", iters, "Iteration count")->check(CLI::PositiveNumber);
  pre->add_option("--eps-c", eps_c, "Active-neuron threshold")->check(CLI::PositiveNumber);
  pre->add_option("--svd-tol-mass", tol_mass, "Relative truncation for the mass solve");
  pre->add_option("--svd-tol-gn", tol_gn, "Relative truncation for the layer solve");

  auto* sweep = app.add_subcommand("sweep", "Condition numbers of A and H for uniform breakpoints");
  std::vector<int> ns = {8, 16, 32, 64, 128};
  std::string sweep_out;
  std::string layout = "uniform";
  sweep->add_option("--ns", ns, "Neuron counts")->delimiter(',');
  sweep->add_option("--out", sweep_out, "CSV file")->required();
  sweep->add_option("--layout", layout, "Breakpoint layout")
      ->check(CLI::IsMember({"uniform", "clustered"}));

  auto* val = app.add_subcommand("validate", "Parse and check a config without running it");
  std::string val_config;
  val->add_option("config", val_config, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) {
      const auto cfg = sggn::load_experiment(run_config);
      print_summary(sggn::run_experiment(cfg, progress_printer(quiet, print_every)));
    } else if (*pre) {
      auto cfg = sggn::preset(preset_name);
      if (out_dir) cfg.output.dir = *out_dir;
      if (iters) {
        cfg.sggn.max_iters = *iters;
        cfg.lm.max_iters = *iters;
      }
      if (eps_c) cfg.sggn.eps_c = *eps_c;
      if (tol_mass) {
        cfg.sggn.mass_tol = *tol_mass;
        cfg.lm.mass_tol = *tol_mass;
      }
      if (tol_gn) cfg.sggn.gn_tol = *tol_gn;
      print_summary(sggn::run_experiment(cfg, progress_printer(quiet, print_every)));
    } else if (*sweep) {
      sggn::SweepConfig sc;
      sc.layout = layout == "clustered" ? sggn::BreakpointLayout::clustered
                                        : sggn::BreakpointLayout::uniform;
      const auto reps = sggn::run_condition_sweep(ns, sweep_out, sc);
      for (const auto& r : reps)
        std::printf("n %4d  %-14s kappa2 %.6e\n", r.n, sggn::to_string(r.tag), r.kappa2);
      if (ns.size() >= 2) {
        for (auto tag : {sggn::MatrixTag::mass, sggn::MatrixTag::layer_gn,
                         sggn::MatrixTag::layer_gn_bias})
          std::printf("log-log slope %-14s %.3f\n", sggn::to_string(tag), sggn::loglog_slope(reps, tag));
      }
    } else if (*val) {
      const auto cfg = sggn::load_experiment(val_config);
      std::printf("ok: %s, d = %d, n = %d, optimizer %s, output %s\n", cfg.name.c_str(),
                  cfg.problem.domain.dim(), cfg.n, sggn::to_string(cfg.optimizer),
                  cfg.output.dir.c_str());
    }
  } catch (const sggn::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const sggn::DimensionError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const sggn::NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  } catch (const sggn::DegenerateNeuronError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kNumericalError;
  }
  return 0;
}
