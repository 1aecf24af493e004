// Command-line driver: single runs, convergence studies, and kappa sweeps.
#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "okflow/okflow.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGeneric = 1;
constexpr int kExitConfig = 2;
constexpr int kExitStep = 3;
constexpr int kExitIo = 4;

struct CommonArgs {
  std::string config_path;
  std::string output_dir;
  long long seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "path to a key=value config")
      ->required();
  cmd->add_option("--output-dir", args.output_dir,
                  "override the configured output directory");
  cmd->add_option("--seed", args.seed, "override the configured RNG seed");
  cmd->add_option("--threads", args.threads,
                  "max concurrent simulations (0 = hardware)");
}

okflow::RunConfig load_with_overrides(const CommonArgs& args) {
  okflow::RunConfig cfg = okflow::load_config(args.config_path);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (args.threads >= 0) cfg.threads = args.threads;
  return cfg;
}

int do_run(const CommonArgs& args) {
  const okflow::RunConfig cfg = load_with_overrides(args);
  const auto out = okflow::run_simulation(cfg);
  const auto& reports = out.result.reports;
  std::printf("run: %zu reports written to %s\n", reports.size(),
              out.directory.string().c_str());
  if (!reports.empty()) {
    const auto& last = reports.back();
    std::printf("  t = %g  mass = %.12g  energy = %.12g\n", last.time,
                last.mass, last.energy);
  }
  if (!out.result.completed) {
    std::fprintf(stderr, "run aborted: %s\n", out.result.error_message.c_str());
    return kExitStep;
  }
  return kExitOk;
}

int do_converge(const CommonArgs& args) {
  const okflow::RunConfig cfg = load_with_overrides(args);
  const auto out = okflow::run_convergence(cfg);
  std::printf("%4s %6s %12s %12s %7s %12s %7s %12s %7s\n", "k", "n", "h",
              "err(phi)", "eoc", "err(mu)", "eoc", "err(nu)", "eoc");
  for (const auto& row : out.rows)
    std::printf("%4d %6d %12.4e %12.4e %7.2f %12.4e %7.2f %12.4e %7.2f\n",
                row.k, row.n, row.h, row.err_phi, row.eoc_phi, row.err_mu,
                row.eoc_mu, row.err_nu, row.eoc_nu);
  if (!out.rates_csv.empty())
    std::printf("rates written to %s\n", out.rates_csv.string().c_str());
  return kExitOk;
}

int do_compare(const CommonArgs& args) {
  const okflow::RunConfig cfg = load_with_overrides(args);
  const auto out = okflow::run_compare(cfg);
  for (std::size_t i = 0; i < out.kappas.size(); ++i) {
    const auto& reports = out.runs[i].result.reports;
    if (reports.empty()) continue;
    const auto& last = reports.back();
    std::printf("kappa = %-8g final t = %-8g mass = %-16.10g energy = %.10g\n",
                out.kappas[i], last.time, last.mass, last.energy);
  }
  if (!out.joined_csv.empty())
    std::printf("joined table written to %s\n", out.joined_csv.string().c_str());
  if (!out.all_completed) {
    std::fprintf(stderr, "compare: at least one run aborted early\n");
    return kExitStep;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"structure-preserving phase-field solver"};
  app.require_subcommand(1);

  CommonArgs run_args, converge_args, compare_args;
  auto* run_cmd = app.add_subcommand("run", "execute a single simulation");
  add_common(run_cmd, run_args);
  auto* converge_cmd =
      app.add_subcommand("converge", "mesh-refinement convergence study");
  add_common(converge_cmd, converge_args);
  auto* compare_cmd =
      app.add_subcommand("compare", "sweep over repulsion strengths");
  add_common(compare_cmd, compare_args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return do_run(run_args);
    if (converge_cmd->parsed()) return do_converge(converge_args);
    if (compare_cmd->parsed()) return do_compare(compare_args);
  } catch (const okflow::ConfigError& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return kExitConfig;
  } catch (const okflow::StepError& err) {
    std::fprintf(stderr, "step error: %s\n", err.what());
    return kExitStep;
  } catch (const okflow::IoError& err) {
    std::fprintf(stderr, "io error: %s\n", err.what());
    return kExitIo;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitGeneric;
  }
  return kExitGeneric;
}
