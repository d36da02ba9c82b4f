// nehari spectrum|gap-check|assumptions|solve|sweep --config <path>
//        [--seed N] [--out DIR] [--emit-plot-data]

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "nehari/commands.hpp"
#include "nehari/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Ground states and multiple solutions of discrete NLS on periodic tori"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nehari::kVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool plot = false;

  const char* commands[][2] = {
      {"spectrum", "eigenvalues of -Delta + V (CSV) and a band summary (JSON)"},
      {"gap-check", "check that 0 lies in a spectral gap"},
      {"assumptions", "audit the nonlinearity hypotheses"},
      {"solve", "multistart search for ground state and distinct solutions"},
      {"sweep", "repeat solve over the sides listed in sweep.sides"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--seed", seed, "override solver.seed");
    sub->add_option("--out", out_dir, "override output.dir");
    sub->add_flag("--emit-plot-data", plot, "also write gnuplot-ready .dat files");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nehari::kExitConfig;
  }

  nehari::RunConfig cfg;
  try {
    cfg = nehari::load_config(config_path);
  } catch (const nehari::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return nehari::kExitConfig;
  }
  if (seed) cfg.solver.options.seed = *seed;
  if (out_dir) cfg.output.dir = *out_dir;
  if (plot) cfg.output.emit_plot_data = true;

  return nehari::run_command(app.get_subcommands().front()->get_name(), cfg,
                             std::cout, std::cerr);
}
