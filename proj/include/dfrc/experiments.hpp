// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dfrc/array_scene.hpp"
#include "dfrc/stage1_estimation.hpp"
#include "dfrc/stage2_beamforming.hpp"
#include "dfrc/stage3_tracking.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

enum class Variant { fd_zf, hbf_opt, hbf_null };
enum class ExperimentId { fig4, fig5, fig6, fig7, fig8, fig9, fig10, fig11, fig12, fig13, pipeline };

std::string to_string(Variant v);
std::string to_string(ExperimentId id);
ExperimentId experiment_from_string(const std::string& name);
Variant variant_from_string(const std::string& name);

struct ExperimentConfig {
  ArrayConfig arrays{};
  int k_targets = 8;
  int l_paths = 4;
  int grid_slices = 180;
  int t_pilot = 100;
  double power = 1.0;
  std::vector<double> snr_grid_db;
  std::vector<int> pilot_length_grid;
  std::vector<int> k_grid;  // fig9 sweep over the target count
  FramePlan frame{};
  std::vector<int> overlap_grid;         // fig11 sweep, in slots
  double delta_max_deg = 1.0;
  std::vector<double> delta_max_grid_deg;  // fig13 sweep
  double track_step_deg = 0.02;
  int sync_slots = 8;
  int trials = 200;
  std::uint64_t seed = 1;
  std::vector<Variant> variant_set = {Variant::fd_zf, Variant::hbf_opt, Variant::hbf_null};
  ExperimentId experiment_id = ExperimentId::pipeline;
  std::string out_dir = ".";
  bool emit_gnuplot = false;

  void validate() const;
};

/// Defaults per figure; every experiment shares the same base setup and
/// overrides only what its figure sweeps.
ExperimentConfig default_config(ExperimentId id);

/// The fixed scene a single-realization figure (fig4, fig5, fig8) uses for
/// the given master seed (its first trial's gain draws included).
Scene presentation_scene(ExperimentId id, std::uint64_t seed);

ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

struct MetricSeries {
  std::string metric_name;
  std::string x_name;
  std::vector<double> x_values;
  std::vector<std::string> variants;
  std::map<std::string, std::vector<double>> mean;
  std::map<std::string, std::vector<double>> se;
  std::map<std::string, std::vector<int>> n_ok;
};

struct ExperimentResult {
  std::vector<MetricSeries> series;
  std::vector<std::string> files_written;
};

/// Runs the configured figure experiment, writes its CSV outputs under
/// cfg.out_dir, and returns the aggregated series. Deterministic in
/// (config, seed) down to the emitted bytes.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Stages 1 -> 2 -> 3 on one scene, reporting to the stream (CLI `pipeline`).
int run_pipeline(const ExperimentConfig& cfg, std::ostream& os);

/// Worker count for trial parallelism; DFRC_MAX_WORKERS caps it.
int worker_count(int trials);

/// Runs `body(trial)` for trial = 0..trials-1, possibly concurrently.
/// Results keep trial order; exceptions mark the trial failed. Throws if
/// more than half the trials fail.
template <typename R>
std::vector<std::optional<R>> run_trials(int trials, const std::function<R(int)>& body) {
  std::vector<std::optional<R>> out(static_cast<std::size_t>(trials));
  const int workers = worker_count(trials);
  std::atomic<int> next{0};
  std::atomic<int> failures{0};
  auto work = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= trials) return;
      try {
        out[static_cast<std::size_t>(i)] = body(i);
      } catch (const std::exception&) {
        failures.fetch_add(1);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failures.load() * 2 > trials)
    throw std::runtime_error("run_trials: more than half the trials failed");
  return out;
}

}  // namespace dfrc
