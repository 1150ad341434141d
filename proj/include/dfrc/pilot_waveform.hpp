// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "dfrc/types.hpp"

namespace dfrc {

/// Chirp pilot: entry (n, t), both 1-based, equals
/// sqrt(P/N_t) * exp(j*2*pi*n*(t-1)/T) * exp(j*pi*(t-1)^2/T).
/// Rows are exactly orthogonal, (1/T) S S^H = (P/N_t) I, whenever
/// t_slots >= n_tx; shorter blocks lose that property but stay valid
/// search waveforms. Storage is 0-based; this is the single indexing
/// conversion point: row r, column c map to n = r + 1, t = c + 1.
CMatrix lfm_pilot(int n_tx, int t_slots, double power);

/// Per-slot hybrid factorization of the chirp pilot. The analog matrix at
/// slot 1 is all ones, subsequent slots multiply diag(u) on; the baseband
/// column picks up the scalar v_t per slot. Analog matrices are kept
/// implicitly (slot-1 matrix plus u) and materialized on demand.
struct HybridPilot {
  CMatrix s_dp;  // N_t x T direct pilot
  CMatrix s_bb;  // N_RF x T baseband columns
  CVector u;     // length N_t, u(n) = exp(j*2*pi*(n+1)/T): antenna phase ratio
  CVector v;     // length T-1, v(t) = exp(j*pi*(2t+1)/T): slot phase ratio
  double power = 0.0;
  int n_rf = 0;

  int n_tx() const { return static_cast<int>(s_dp.rows()); }
  int t_slots() const { return static_cast<int>(s_dp.cols()); }

  /// Analog matrix of a single slot (0-based), entries unit modulus.
  CMatrix analog_at(int slot) const;
  CVector baseband_at(int slot) const { return s_bb.col(slot); }

  /// Walks every slot in order, materializing the analog matrix by the
  /// recursion itself rather than by direct exponentiation.
  void walk_slots(const std::function<void(int slot, const CMatrix& f_rf,
                                           const CVector& s_bb_col)>& visit) const;
};

HybridPilot had_factorize(int n_tx, int n_rf, int t_slots, double power);

}  // namespace dfrc
