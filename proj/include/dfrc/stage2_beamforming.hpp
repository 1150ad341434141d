// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dfrc/types.hpp"

namespace dfrc {

/// Joint radar/communication transmit beamformer: unit-modulus analog part
/// steering one beam per target, scaled-unitary digital part.
struct HybridBeamformer {
  enum class Variant { hbf_opt, hbf_null };
  CMatrix f_rf;  // N_t x K, unit-modulus entries
  CMatrix f_bb;  // K x K, F_BB F_BB^H = P/(K*N_t) I
  Variant variant = Variant::hbf_opt;
  double power = 1.0;

  CMatrix composite() const { return f_rf * f_bb; }
  void validate() const;
};

struct ZfPair {
  CMatrix f_bs;  // N_t x L, right pseudo-inverse of the reduced channel
  CMatrix w_ue;  // L x N_r, left pseudo-inverse of the UE steering matrix
};

/// Zero-forcing pair for the factored channel H = B(Phi) H_tilde:
/// F_BS = H~^H (H~ H~^H)^-1 and W_UE = (B^H B)^-1 B^H, so W_UE H F_BS = I.
ZfPair zf_pair(const CMatrix& h_tilde, const CMatrix& b_phi);

/// Analog beamformer with column i = a*(theta_i).
CMatrix analog_from_angles(const std::vector<double>& theta_deg, int n_tx,
                           double spacing_over_wavelength);

enum class AuxMode { zero, nullspace };

/// Closed-form scaled-unitary digital beamformer minimizing
/// ||F_RF F_BB - [F_BS, F_aux]||_F over F_BB with F_BB F_BB^H = P/(K N_t) I.
/// AuxMode::zero pads with zeros; AuxMode::nullspace pads with basis vectors
/// of the channel null space (chosen to maximize energy under F_RF^H).
CMatrix opp_digital(const CMatrix& f_rf, const CMatrix& f_bs, AuxMode mode, double power);

/// Analog-from-angles plus opp_digital in one step.
HybridBeamformer design_hybrid(const std::vector<double>& theta_deg, const CMatrix& f_bs,
                               AuxMode mode, double power, int n_tx,
                               double spacing_over_wavelength);

/// Transmit pattern d(theta) = P/(K N_t) * a^T F_RF F_RF^H a* per grid angle.
std::vector<double> beampattern(const CMatrix& f_rf, double power,
                                const std::vector<double>& grid_deg,
                                double spacing_over_wavelength);

/// Pattern of an arbitrary already-scaled precoder: a^T F F^H a*.
std::vector<double> transmit_pattern(const CMatrix& f_composite,
                                     const std::vector<double>& grid_deg,
                                     double spacing_over_wavelength);

/// log2 det(I + (rho / n_streams) R_in^-1 U U^H); throws if R_in is not
/// positive definite.
double mimo_se_bits(const CMatrix& useful, const CMatrix& r_in, double rho, int n_streams);

struct DLLinkReport {
  double se_bits_per_hz = 0.0;
  CMatrix r_in;  // interference-plus-noise covariance after the UE combiner
};

/// Post-combining downlink spectral efficiency for a hybrid transmitter:
/// the first L digital columns carry data, the rest are radar-only streams
/// counted as interference.
DLLinkReport dl_se(const CMatrix& h, const CMatrix& w_ue, const CMatrix& f_rf,
                   const CMatrix& f_bb, double rho, double sigma2_dl);

/// Communication-only fully digital ZF reference with the same per-stream
/// power budget power/k_total as the hybrid design.
CMatrix fd_zf_precoder(const CMatrix& f_bs, double power, int k_total);

/// Spectral efficiency of an interference-free precoder (e.g. the ZF
/// reference): R_in reduces to the combined noise covariance.
DLLinkReport dl_se_digital(const CMatrix& h, const CMatrix& w_ue, const CMatrix& f,
                           double rho, double sigma2_dl);

}  // namespace dfrc
