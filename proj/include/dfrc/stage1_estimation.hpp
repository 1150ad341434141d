// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dfrc/array_scene.hpp"
#include "dfrc/types.hpp"

namespace dfrc {

/// Phase-shifter network in front of the BS RF chains.
struct AnalogCombiner {
  enum class Mode { random, steered };
  CMatrix w_rf;  // N_RF x N_t, every entry unit modulus
  Mode mode = Mode::random;

  int n_rf() const { return static_cast<int>(w_rf.rows()); }
  int n_tx() const { return static_cast<int>(w_rf.cols()); }
  /// Reduced steering vector W_RF * a(theta).
  CVector reduced_steering(double angle_deg, double spacing_over_wavelength) const;
  void validate() const;
};

/// Entries exp(j*psi), psi uniform on [0, 2*pi), filled column-major.
AnalogCombiner random_combiner(int n_rf, int n_tx, Rng& rng);

struct MusicResult {
  std::vector<double> angles_deg;  // found peaks, ascending; may be < requested
  std::vector<double> grid_deg;    // evaluation grid
  std::vector<double> spectrum;    // pseudo-spectrum per grid point
  bool degenerate = false;         // fewer peaks than requested
};

/// Eigenvectors of (1/T) y y^H belonging to the n - n_sources smallest
/// eigenvalues, i.e. the noise subspace of the sample covariance.
CMatrix noise_subspace(const CMatrix& y, int n_sources);

/// 1 / ||M a(theta)||^2 per grid column, with M the noise-subspace projector
/// already folded with any analog combining.
std::vector<double> music_spectrum(const CMatrix& m, const CMatrix& steer_grid);

/// Single-pulse MUSIC through the analog combiner; returns the k largest
/// strict local maxima (peaks closer than 0.5 deg are merged, keeping the
/// larger). Requires k < N_RF so a noise subspace exists.
MusicResult music_aoa(const CMatrix& y_combined, const AnalogCombiner& combiner, int k,
                      const AngleGrid& grid, double spacing_over_wavelength);

/// Same estimator at the fully digital UE (no combining), l < N_r.
MusicResult ue_music(const CMatrix& y_dl, int l, const AngleGrid& grid,
                     double spacing_over_wavelength);

struct ApesEstimate {
  cd gain{0.0, 0.0};
  bool regularized = false;  // filter covariance needed a diagonal bump
};

/// Minimum-distortion complex-amplitude estimate at a fixed angle, given the
/// known transmitted block x_known. Normalization uses the sample energy
/// a^T x x^H a*, which reduces to T*P for the orthogonal pilot and stays
/// unbiased for precoded (non-orthogonal) transmissions.
ApesEstimate apes_gain(const CMatrix& y_combined, const CMatrix& x_known,
                       const AnalogCombiner& combiner, double theta_deg,
                       double spacing_over_wavelength);

/// UE transmit beamformer zero-forcing its own steering matrix:
/// F_UE = B*(Phi) (B^T(Phi) B*(Phi))^-1, satisfying B^T F_UE = I.
CMatrix ue_zf_precoder(const std::vector<double>& phi_deg, int n_rx,
                       double spacing_over_wavelength);

/// Correlates the uplink-pilot block against all estimated target angles and
/// returns the indices (ascending) of the l targets with the largest row
/// energy, i.e. the targets that also scatter the communication signal.
std::vector<int> identify_paths(const CMatrix& y_up, const std::vector<double>& theta_hat_deg,
                                int l, double spacing_over_wavelength);

struct CommGainFit {
  std::vector<cd> gains;        // per uplink-pilot column
  std::vector<int> angle_index; // per column, index into theta1_hat_deg
  double residual_norm = 0.0;
};

/// Least-squares fit of the uplink-pilot block to steered rank-one terms.
/// Each column is associated with the angle carrying its dominant LS
/// coefficient, so the pairing between UE-side path order and BS-side
/// angles is read off the data rather than assumed.
CommGainFit ls_comm_gains(const CMatrix& y_up, const std::vector<double>& theta1_hat_deg,
                          double spacing_over_wavelength);

struct Stage1Report {
  std::vector<double> bs_angles_deg;         // estimated target AoAs, ascending
  std::vector<cd> bs_gains;                  // reflection coefficients per AoA
  std::vector<bool> bs_gain_regularized;
  std::vector<double> ue_angles_deg;         // estimated UE AoAs, ascending
  std::vector<double> comm_path_angles_deg;  // AoD per uplink-pilot column
  std::vector<cd> comm_gains;                // scattering coefficient per column
  std::vector<int> comm_path_index;          // per column, index into bs_angles_deg
  MusicResult bs_spectrum;
  MusicResult ue_spectrum;
  double ls_residual_norm = 0.0;
  bool degenerate = false;

  void save_text(const std::string& path) const;
};

struct Stage1Options {
  AngleGrid grid{-90.0, 90.0, 0.1};
  int t_pilot = 100;
  double power = 1.0;
};

/// Full first-stage pipeline: omnidirectional pilot, echo MUSIC + APES at
/// the BS, downlink MUSIC at the UE, zero-forced uplink pilot, path
/// identification and scattering-gain LS.
Stage1Report run_stage1(const Scene& scene, const ArrayConfig& arrays, const NoiseConfig& noise,
                        const Stage1Options& opt, Rng& rng);

/// A(angles) diag(gains) A^T(angles); serves both the estimate and the truth.
CMatrix radar_channel_matrix(const std::vector<double>& angles_deg, const std::vector<cd>& gains,
                             int n_tx, double spacing_over_wavelength);

/// B(ue_aoas) diag(betas) A^T(aods) with per-path association (m-th entries
/// belong together).
CMatrix comm_channel_matrix(const std::vector<double>& ue_aoas_deg, const std::vector<cd>& betas,
                            const std::vector<double>& aods_deg, int n_rx, int n_tx,
                            double spacing_over_wavelength);

void save_spectrum_csv(const MusicResult& result, const std::string& path);

}  // namespace dfrc
