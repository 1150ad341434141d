// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "dfrc/array_scene.hpp"
#include "dfrc/experiments.hpp"

namespace {

int cmd_figure(const std::string& id, int trials, std::int64_t seed, const std::string& out,
               bool gnuplot) {
  const dfrc::ExperimentId fig = dfrc::experiment_from_string(id);
  if (fig == dfrc::ExperimentId::pipeline)
    throw std::invalid_argument("'pipeline' is a separate subcommand, not a figure id");
  dfrc::ExperimentConfig cfg = dfrc::default_config(fig);
  if (trials > 0) cfg.trials = trials;
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.out_dir = out;
  cfg.emit_gnuplot = gnuplot;
  const dfrc::ExperimentResult res = dfrc::run_experiment(cfg);
  for (const auto& f : res.files_written) std::cout << "wrote " << f << "\n";
  return 0;
}

int cmd_pipeline(const std::string& config, std::int64_t seed) {
  dfrc::ExperimentConfig cfg = config == "default"
                                   ? dfrc::default_config(dfrc::ExperimentId::pipeline)
                                   : dfrc::load_config(config);
  if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
  return dfrc::run_pipeline(cfg, std::cout);
}

int cmd_scene_gen(const std::string& out, int k, int l, int slices, std::uint64_t seed) {
  dfrc::Rng rng = dfrc::make_rng(seed, {0x5cu});
  const dfrc::Scene scene = dfrc::generate_scene(k, l, slices, rng);
  dfrc::save_scene(scene, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_scene_show(const std::string& in) {
  const dfrc::Scene scene = dfrc::load_scene(in);
  std::cout << "targets (" << scene.k_targets() << "):\n";
  for (int k = 0; k < scene.k_targets(); ++k)
    std::cout << "  " << scene.target_angles_deg[static_cast<std::size_t>(k)] << " deg, gain "
              << scene.target_gains[static_cast<std::size_t>(k)] << "\n";
  std::cout << "comm paths (" << scene.comm_path_count << "), UE AoAs:\n";
  for (int l = 0; l < scene.comm_path_count; ++l)
    std::cout << "  " << scene.ue_aoas_deg[static_cast<std::size_t>(l)] << " deg, gain "
              << scene.comm_gains[static_cast<std::size_t>(l)] << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmWave massive-MIMO dual-function radar-communication simulator"};
  app.require_subcommand(1);

  auto* fig = app.add_subcommand("figure", "run a figure experiment, write CSV data");
  std::string fig_id;
  int trials = -1;
  std::int64_t seed = -1;
  std::string out_dir = ".";
  bool gnuplot = false;
  fig->add_option("--id", fig_id, "experiment id, fig4..fig13")->required();
  fig->add_option("--trials", trials, "override the per-figure default trial count");
  fig->add_option("--seed", seed, "master seed (non-negative)");
  fig->add_option("--out", out_dir, "output directory");
  fig->add_flag("--gnuplot", gnuplot, "also emit a gnuplot script");

  auto* pipe = app.add_subcommand("pipeline", "run stages 1-3 end to end on one scene");
  std::string config = "default";
  pipe->add_option("--config", config, "config file path, or 'default'")->required();
  pipe->add_option("--seed", seed, "override the config seed");

  auto* scene = app.add_subcommand("scene", "generate or inspect scene files");
  scene->require_subcommand(1);
  auto* gen = scene->add_subcommand("gen", "draw a random scene and save it");
  std::string scene_out = "scene.txt", scene_in;
  int k = 8, l = 4, slices = 180;
  std::uint64_t scene_seed = 1;
  gen->add_option("--out", scene_out, "output file");
  gen->add_option("--k", k, "target count");
  gen->add_option("--l", l, "communication path count");
  gen->add_option("--slices", slices, "angle grid slices");
  gen->add_option("--seed", scene_seed, "seed");
  auto* show = scene->add_subcommand("show", "print a saved scene");
  show->add_option("--in", scene_in, "scene file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  }

  try {
    if (fig->parsed()) return cmd_figure(fig_id, trials, seed, out_dir, gnuplot);
    if (pipe->parsed()) return cmd_pipeline(config, seed);
    if (gen->parsed()) return cmd_scene_gen(scene_out, k, l, slices, scene_seed);
    if (show->parsed()) return cmd_scene_show(scene_in);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
