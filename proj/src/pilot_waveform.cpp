// SPDX-License-Identifier: Apache-2.0
#include "dfrc/pilot_waveform.hpp"

#include <cmath>
#include <stdexcept>

namespace dfrc {

CMatrix lfm_pilot(int n_tx, int t_slots, double power) {
  if (n_tx < 1) throw std::invalid_argument("lfm_pilot: n_tx must be >= 1");
  if (t_slots < 1) throw std::invalid_argument("lfm_pilot: t_slots must be >= 1");
  if (power < 0.0) throw std::invalid_argument("lfm_pilot: power must be non-negative");
  const double amp = std::sqrt(power / static_cast<double>(n_tx));
  const double t = static_cast<double>(t_slots);
  CMatrix s(n_tx, t_slots);
  for (int c = 0; c < t_slots; ++c) {
    const double chirp = kPi * static_cast<double>(c) * static_cast<double>(c) / t;
    for (int r = 0; r < n_tx; ++r) {
      const double lin = 2.0 * kPi * static_cast<double>(r + 1) * static_cast<double>(c) / t;
      s(r, c) = std::polar(amp, lin + chirp);
    }
  }
  return s;
}

HybridPilot had_factorize(int n_tx, int n_rf, int t_slots, double power) {
  if (n_rf < 1) throw std::invalid_argument("had_factorize: n_rf must be >= 1");
  HybridPilot p;
  p.s_dp = lfm_pilot(n_tx, t_slots, power);
  p.power = power;
  p.n_rf = n_rf;
  const double t = static_cast<double>(t_slots);

  p.u = CVector(n_tx);
  for (int r = 0; r < n_tx; ++r) p.u(r) = std::polar(1.0, 2.0 * kPi * static_cast<double>(r + 1) / t);
  p.v = CVector(t_slots - 1);
  for (int c = 0; c + 1 < t_slots; ++c)
    p.v(c) = std::polar(1.0, kPi * static_cast<double>(2 * c + 1) / t);

  p.s_bb = CMatrix(n_rf, t_slots);
  const double bb0 = std::sqrt(power / (static_cast<double>(n_rf) * static_cast<double>(n_rf) *
                                        static_cast<double>(n_tx)));
  p.s_bb.col(0).setConstant(cd(bb0, 0.0));
  for (int c = 0; c + 1 < t_slots; ++c) p.s_bb.col(c + 1) = p.s_bb.col(c) * p.v(c);
  return p;
}

CMatrix HybridPilot::analog_at(int slot) const {
  if (slot < 0 || slot >= t_slots()) throw std::out_of_range("HybridPilot: slot out of range");
  const double t = static_cast<double>(t_slots());
  CMatrix f(n_tx(), n_rf);
  for (int r = 0; r < n_tx(); ++r) {
    // u(r)^slot evaluated in closed form for random access
    const cd w = std::polar(1.0, 2.0 * kPi * static_cast<double>(r + 1) *
                                     static_cast<double>(slot) / t);
    f.row(r).setConstant(w);
  }
  return f;
}

void HybridPilot::walk_slots(const std::function<void(int, const CMatrix&, const CVector&)>& visit) const {
  CMatrix f_rf = CMatrix::Ones(n_tx(), n_rf);
  for (int slot = 0; slot < t_slots(); ++slot) {
    if (slot > 0) f_rf = u.asDiagonal() * f_rf;
    visit(slot, f_rf, s_bb.col(slot));
  }
}

}  // namespace dfrc
