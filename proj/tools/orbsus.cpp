#include <CLI11.hpp>
#include <iostream>

#include "orbsus/run.hpp"
#include "orbsus/version.hpp"

namespace {

void add_model_options(CLI::App* cmd, orbsus::RunConfig& cfg) {
  cmd->add_option("--model", cfg.model_source,
                  "registry name (dirac-l, dirac-d, honeycomb) or model file path");
  cmd->add_option("--delta", cfg.delta, "gap parameter for the dirac models");
  cmd->add_option("--t", cfg.t, "honeycomb hopping amplitude");
  cmd->add_option("--gap", cfg.onsite_gap, "honeycomb on-site gap");
  cmd->add_option("--a", cfg.lattice_a, "honeycomb lattice constant");
  cmd->add_option("--zone", cfg.zone_shape, "zone shape for analytic models (disk|square)");
  cmd->add_option("--zone-K", cfg.zone_K, "zone half-width / radius K");
  cmd->add_option("--grid,-g", cfg.grid, "k-grid order");
  cmd->add_option("--tol", cfg.tol, "relative grid-doubling tolerance");
  cmd->add_option("-o,--output", cfg.output_path, "output CSV path (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"orbital susceptibility of 2-D tight-binding crystals"};
  app.set_version_flag("--version", ORBSUS_VERSION);
  app.require_subcommand(1);

  orbsus::RunConfig cfg;
  std::string sweep_text;

  CLI::App* chi = app.add_subcommand("chi", "bulk zero-field susceptibility");
  add_model_options(chi, cfg);
  chi->add_option("--method", cfg.method, "contour|residue|zerot|split")
      ->check(CLI::IsMember({"contour", "residue", "zerot", "split"}));
  chi->add_option("--beta", cfg.beta, "inverse temperature");
  chi->add_option("--rho0", cfg.rho0, "particle density per site");
  chi->add_option("--sweep", sweep_text, "parameter sweep, e.g. delta=1e-3:1e-1:log:9");

  CLI::App* bands = app.add_subcommand("bands", "band energies along a k-path");
  add_model_options(bands, cfg);
  bands->add_option("--path", cfg.kpath, "waypoints kx,ky:kx,ky:...");
  bands->add_option("--num", cfg.kpath_points, "points along the path");

  CLI::App* finite = app.add_subcommand("finite", "finite-lattice studies");
  add_model_options(finite, cfg);
  finite->add_option("--study", cfg.finite_study, "pressure|kernels|ttilde")
      ->check(CLI::IsMember({"pressure", "kernels", "ttilde"}));
  finite->add_option("--N", cfg.finite_N, "half-width of the box");
  finite->add_option("--b", cfg.finite_b, "cyclotron parameter b");
  finite->add_option("--beta", cfg.beta, "inverse temperature");

  CLI::App* validate = app.add_subcommand("validate", "run the invariant suite");
  validate->add_option("--seed", cfg.seed, "seed for randomized checks");
  validate->add_option("-o,--output", cfg.output_path, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (chi->parsed()) {
    cfg.method = cfg.method.empty() ? "residue" : cfg.method;
    if (!sweep_text.empty()) {
      try {
        cfg.sweep = orbsus::parse_sweep(sweep_text);
      } catch (const orbsus::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
      }
    }
  } else if (bands->parsed()) {
    cfg.method = "bands";
  } else if (finite->parsed()) {
    cfg.method = "finite";
  } else if (validate->parsed()) {
    cfg.method = "validate";
  }

  return orbsus::run(cfg, std::cout, std::cerr);
}
