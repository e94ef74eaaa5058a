// Experiment runner for the LOD elasticity convergence studies.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lodelast/lodelast.hpp"

namespace {

int run(lodelast::ExperimentConfig cfg) {
  namespace fs = std::filesystem;
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const auto report = lodelast::run_experiment(cfg, [](const std::string& s) { std::cerr << s << '\n'; });
  const std::string name = lodelast::to_string(cfg.kind);
  lodelast::emit_csv(report, fs::path(cfg.out_dir) / (name + ".csv"));
  if (cfg.plots && cfg.kind != lodelast::ExperimentCase::decay)
    lodelast::emit_plot(report, fs::path(cfg.out_dir) / (name + ".svg"));
  if (cfg.kind == lodelast::ExperimentCase::multiscale || cfg.kind == lodelast::ExperimentCase::decay) {
    std::ofstream os(fs::path(cfg.out_dir) / (name + "_coefficients.txt"));
    lodelast::write_coefficients(os, lodelast::experiment_coefficient(cfg));
  }

  if (cfg.kind == lodelast::ExperimentCase::decay) {
    std::cout << "element " << report.decay_element << '\n';
    for (std::size_t k = 0; k < report.decay_tails.size(); ++k)
      std::cout << "k = " << k << "  tail = " << report.decay_tails[k] << '\n';
    return 0;
  }
  std::cout << "n,H,k,err_gfem,err_fem\n";
  for (const auto& l : report.levels)
    std::cout << l.n << ',' << l.H << ',' << l.k << ',' << l.err_gfem << ',' << l.err_fem << '\n';
  std::cout << "slope_gfem = " << report.slope_gfem << ", slope_fem = " << report.slope_fem << '\n';
  if (report.reference_error)
    std::cout << "reference error ||grad(I_h u - u_h)|| / ||grad I_h u|| = " << *report.reference_error << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized orthogonal decomposition for 2D linear elasticity"};
  app.require_subcommand(1);
  auto* sub = app.add_subcommand("run", "run a convergence or decay study");

  std::string kind, config_path, coarse, k_list;
  int fine = 0;
  std::uint64_t seed = lodelast::default_seed;
  std::string out = ".";
  bool plots = false;
  sub->add_option("--case", kind, "constant | multiscale | locking | decay")
      ->check(CLI::IsMember({"constant", "multiscale", "locking", "decay"}));
  sub->add_option("--fine", fine, "fine level n_h (squares per side)");
  sub->add_option("--coarse", coarse, "comma-separated coarse levels");
  sub->add_option("--k", k_list, "comma-separated patch layer counts (default: ceil(0.8 ln 1/H))");
  auto* seed_opt = sub->add_option("--seed", seed, "checkerboard seed");
  auto* out_opt = sub->add_option("--out", out, "output directory");
  sub->add_flag("--plots", plots, "also write an SVG plot");
  auto* cfg_opt = sub->add_option("--config", config_path, "key-value config file")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    lodelast::ExperimentConfig cfg;
    if (*cfg_opt) {
      std::ifstream is(config_path);
      cfg = lodelast::parse_config(is);
      if (!kind.empty()) cfg.kind = lodelast::parse_case(kind);
    } else {
      if (kind.empty()) throw std::invalid_argument("--case or --config is required");
      cfg = lodelast::ExperimentConfig::defaults_for(lodelast::parse_case(kind));
    }
    if (fine > 0) cfg.fine_level = fine;
    if (!coarse.empty()) cfg.coarse_levels = lodelast::parse_int_list(coarse);
    if (!k_list.empty()) cfg.k = lodelast::parse_int_list(k_list);
    if (*seed_opt) cfg.seed = seed;
    if (*out_opt) cfg.out_dir = out;
    if (plots) cfg.plots = true;
    return run(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
}
