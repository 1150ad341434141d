// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dfrc/array_scene.hpp"
#include "dfrc/stage1_estimation.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Slot accounting of one PRI: radar/DL block of T slots, uplink block of
/// T_c slots, the last `overlap` radar slots shared with the first uplink
/// slots. The guard period never carries signal; it is bookkeeping only.
struct FramePlan {
  int t_radar = 140;
  int t_ul = 140;
  int overlap = 42;
  int guard = 10;

  int total() const { return t_radar + t_ul - overlap; }
  void validate() const;
};

/// Per-PRI angular motion; the first l_paths target entries also move the
/// communication departure angles.
struct DriftModel {
  double delta_max_deg = 1.0;
  std::vector<double> target_drift_deg;  // K signed deltas
  std::vector<double> ue_drift_deg;      // L signed deltas

  void validate() const;
};

DriftModel random_drift(int k_targets, int l_paths, double delta_max_deg, Rng& rng);

/// Scene one PRI later: angles shifted by the drift (clamped to [-90, 90]),
/// reflection and scattering gains redrawn CN(0,1).
Scene apply_drift(const Scene& scene, const DriftModel& drift, Rng& gain_rng);

/// Received frame [echo-only | echo+uplink | uplink-only] of width
/// t_radar + t_ul - overlap. All slots share one noise variance
/// (noise.sigma2_ul); the stage-3 experiments always drive echo and uplink
/// at the same SNR.
CMatrix assemble_frame(const Scene& scene_drifted, const ArrayConfig& arrays,
                       const CMatrix& x_radar, const CMatrix& x_ul, const FramePlan& plan,
                       const NoiseConfig& noise);

/// Combiner whose first K rows point at the previously estimated AoAs; the
/// remaining rows are random unit-modulus for redundant observations.
AnalogCombiner tracking_combiner(const std::vector<double>& theta_prev_deg, int n_rf, int n_tx,
                                 double spacing_over_wavelength, Rng& rng);

struct TrackResult {
  std::vector<double> angles_deg;      // per target, same order as the priors
  std::vector<bool> interval_flagged;  // no interior peak; window argmax used
};

/// Per-target MUSIC peak restricted to [prev - delta_max, prev + delta_max].
TrackResult track_angles(const CMatrix& y0_combined, const AnalogCombiner& combiner,
                         const std::vector<double>& theta_prev_deg, double delta_max_deg,
                         double grid_step_deg, double spacing_over_wavelength);

/// Interval-restricted MUSIC at the fully digital UE for the path AoAs.
TrackResult ue_track_angles(const CMatrix& y_dl, const std::vector<double>& phi_prev_deg,
                            double delta_max_deg, double grid_step_deg,
                            double spacing_over_wavelength);

/// Known uplink prefix: l orthogonal unit-modulus rows over l_sync slots.
CMatrix sync_prefix(int l, int l_sync);

struct SicOptions {
  bool subtraction = true;  // false = no-SIC baseline (nothing reconstructed)
  // test hooks: bypass the gain estimators with ground truth
  const std::vector<cd>* refl_gains_override = nullptr;
  const std::vector<cd>* comm_gains_override = nullptr;
};

struct SicResult {
  CMatrix equalized;           // L x T_c baseband stream estimate
  std::vector<cd> refl_gains;  // re-estimated reflection coefficients
  std::vector<cd> comm_gains;  // re-estimated scattering coefficients
  CMatrix w_bb;                // L x N_RF baseband equalizer
  std::vector<bool> apes_regularized;
};

/// Reconstructs the echo from the tracked angles plus amplitude estimates
/// taken on the clean echo window, subtracts it from the overlap, estimates
/// the scattering gains on the known prefix and zero-forces the uplink.
SicResult sic_decode(const CMatrix& y0_combined, const CMatrix& x_radar,
                     const std::vector<double>& tracked_deg, int l_paths, const FramePlan& plan,
                     const AnalogCombiner& combiner, const CMatrix& sync_block,
                     double spacing_over_wavelength, const SicOptions& opt);

struct UlSeReport {
  double r1 = 0.0;   // overlapped-window SE
  double r2 = 0.0;   // clean-window SE
  double r_ul = 0.0; // slot-weighted combination
  double residual_norm = 0.0;
};

/// Uplink SE from the residual echo over the overlap window (y_res, N_t x
/// overlap, truth minus reconstruction) and the clean-window noise floor.
UlSeReport ul_se(const CMatrix& h_ul, const CMatrix& f_ue, const CMatrix& w_rf,
                 const CMatrix& w_bb, const CMatrix& y_res, const FramePlan& plan, double rho,
                 double sigma2_ul);

struct Stage3Report {
  std::vector<double> tracked_angles_deg;  // K
  std::vector<double> ue_tracked_deg;      // L (UE-side path AoAs)
  std::vector<cd> refl_gains;              // K
  std::vector<cd> comm_gains;              // L
  double r1 = 0.0;
  double r2 = 0.0;
  double ul_se = 0.0;
  double residual_norm = 0.0;
};

}  // namespace dfrc
