// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dfrc/types.hpp"

namespace dfrc {

/// Uniform-linear-array geometry of the BS/UE pair.
struct ArrayConfig {
  int n_tx = 64;                         // BS antennas
  int n_rx = 10;                         // UE antennas
  int n_rf = 16;                         // BS RF chains
  double spacing_over_wavelength = 0.5;  // d / lambda

  void validate() const;
};

/// Ground-truth propagation environment: K point targets seen by the BS,
/// of which the first L double as scatterers of the communication channel.
struct Scene {
  std::vector<double> target_angles_deg;  // K azimuths, each in [-90, 90]
  std::vector<cd> target_gains;           // K reflection coefficients
  int comm_path_count = 0;                // L <= K
  std::vector<double> ue_aoas_deg;        // L arrival angles at the UE
  std::vector<cd> comm_gains;             // L scattering coefficients

  int k_targets() const { return static_cast<int>(target_angles_deg.size()); }
  /// First L target angles, i.e. the departure angles of the comm paths.
  std::vector<double> comm_aod_deg() const;

  void validate() const;
};

/// Per-link noise variances plus the seed all signal-synthesis noise
/// derives from. Same seed + config => bit-identical realizations.
struct NoiseConfig {
  double sigma2_radar = 0.0;
  double sigma2_dl = 0.0;
  double sigma2_ul = 0.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// ULA steering vector: element m = exp(j*2*pi*(d/lambda)*m*sin(angle)).
CVector steering_vector(double angle_deg, int n_elements, double spacing_over_wavelength);

/// Steering vectors stacked as columns, one per angle.
CMatrix steering_matrix(const std::vector<double>& angles_deg, int n_elements,
                        double spacing_over_wavelength);

/// Random scene: k distinct angles on the centers of `grid_slices` uniform
/// slices of [-90, 90], gains CN(0,1). The UE arrival angles are drawn from
/// the same grid. Draw order is fixed so a seed pins the scene.
Scene generate_scene(int k_targets, int l_paths, int grid_slices, Rng& rng);

/// Noiseless monostatic echo A(Theta) diag(alpha) A^T(Theta) x.
CMatrix echo_matrix(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x);

/// Echo plus CN(0, sigma2_radar) noise.
CMatrix radar_echo(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x,
                   const NoiseConfig& noise);

/// Narrowband geometric channel H = B(Phi) diag(beta) A^T(Theta_1), N_r x N_t.
CMatrix dl_channel(const Scene& scene, const ArrayConfig& arrays);

/// H x + CN(0, sigma2_dl) noise, as observed at the UE.
CMatrix dl_received(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x,
                    const NoiseConfig& noise);

/// Noiseless uplink A(Theta_1) diag(beta) B^T(Phi) x, the transpose channel.
CMatrix ul_matrix(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x_ul);

/// Uplink through the reciprocal channel plus CN(0, sigma2_ul) noise.
CMatrix ul_received(const Scene& scene, const ArrayConfig& arrays, const CMatrix& x_ul,
                    const NoiseConfig& noise);

/// Key/value text round-trip so an experiment can pin a scene across runs.
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);

}  // namespace dfrc
