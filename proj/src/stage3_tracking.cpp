// SPDX-License-Identifier: Apache-2.0
#include "dfrc/stage3_tracking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dfrc/stage2_beamforming.hpp"

namespace dfrc {

void FramePlan::validate() const {
  if (t_radar < 1 || t_ul < 1) throw std::invalid_argument("FramePlan: block lengths must be >= 1");
  if (guard < 0) throw std::invalid_argument("FramePlan: guard must be non-negative");
  if (overlap < 0 || overlap > std::min(t_radar, t_ul))
    throw std::invalid_argument("FramePlan: overlap must be in [0, min(T, T_c)]");
}

void DriftModel::validate() const {
  if (delta_max_deg < 0.0) throw std::invalid_argument("DriftModel: delta_max must be >= 0");
  for (double d : target_drift_deg)
    if (std::abs(d) > delta_max_deg) throw std::invalid_argument("DriftModel: target drift too large");
  for (double d : ue_drift_deg)
    if (std::abs(d) > delta_max_deg) throw std::invalid_argument("DriftModel: UE drift too large");
}

DriftModel random_drift(int k_targets, int l_paths, double delta_max_deg, Rng& rng) {
  DriftModel d;
  d.delta_max_deg = delta_max_deg;
  std::uniform_real_distribution<double> u(-delta_max_deg, delta_max_deg);
  d.target_drift_deg.resize(static_cast<std::size_t>(k_targets));
  for (auto& x : d.target_drift_deg) x = u(rng);
  d.ue_drift_deg.resize(static_cast<std::size_t>(l_paths));
  for (auto& x : d.ue_drift_deg) x = u(rng);
  return d;
}

Scene apply_drift(const Scene& scene, const DriftModel& drift, Rng& gain_rng) {
  drift.validate();
  if (drift.target_drift_deg.size() != scene.target_angles_deg.size() ||
      drift.ue_drift_deg.size() != scene.ue_aoas_deg.size())
    throw std::invalid_argument("apply_drift: drift sizes must match the scene");
  Scene s = scene;
  auto clamp = [](double a) { return std::clamp(a, -90.0, 90.0); };
  for (std::size_t k = 0; k < s.target_angles_deg.size(); ++k)
    s.target_angles_deg[k] = clamp(s.target_angles_deg[k] + drift.target_drift_deg[k]);
  for (std::size_t l = 0; l < s.ue_aoas_deg.size(); ++l)
    s.ue_aoas_deg[l] = clamp(s.ue_aoas_deg[l] + drift.ue_drift_deg[l]);
  for (auto& g : s.target_gains) g = sample_cn(gain_rng, 1.0);
  for (auto& g : s.comm_gains) g = sample_cn(gain_rng, 1.0);
  return s;
}

CMatrix assemble_frame(const Scene& scene_drifted, const ArrayConfig& arrays,
                       const CMatrix& x_radar, const CMatrix& x_ul, const FramePlan& plan,
                       const NoiseConfig& noise) {
  plan.validate();
  noise.validate();
  if (x_radar.rows() != arrays.n_tx || x_radar.cols() != plan.t_radar)
    throw std::invalid_argument("assemble_frame: x_radar must be n_tx x t_radar");
  if (x_ul.rows() != arrays.n_rx || x_ul.cols() != plan.t_ul)
    throw std::invalid_argument("assemble_frame: x_ul must be n_rx x t_ul");
  const int t0 = plan.total();
  CMatrix y0 = CMatrix::Zero(arrays.n_tx, t0);
  y0.leftCols(plan.t_radar) = echo_matrix(scene_drifted, arrays, x_radar);
  y0.rightCols(plan.t_ul) += ul_matrix(scene_drifted, arrays, x_ul);
  if (noise.sigma2_ul > 0.0) {
    Rng rng = make_rng(noise.rng_seed, {4u});
    y0 += cn_matrix(arrays.n_tx, t0, noise.sigma2_ul, rng);
  }
  return y0;
}

AnalogCombiner tracking_combiner(const std::vector<double>& theta_prev_deg, int n_rf, int n_tx,
                                 double spacing, Rng& rng) {
  const int k = static_cast<int>(theta_prev_deg.size());
  if (k > n_rf) throw std::invalid_argument("tracking_combiner: more targets than RF chains");
  AnalogCombiner c;
  c.mode = AnalogCombiner::Mode::steered;
  c.w_rf = CMatrix(n_rf, n_tx);
  for (int row = 0; row < k; ++row)
    c.w_rf.row(row) = steering_vector(theta_prev_deg[static_cast<std::size_t>(row)], n_tx, spacing)
                          .adjoint();
  std::uniform_real_distribution<double> psi(0.0, 2.0 * kPi);
  for (int row = k; row < n_rf; ++row)
    for (int col = 0; col < n_tx; ++col) c.w_rf(row, col) = std::polar(1.0, psi(rng));
  return c;
}

namespace {

struct IntervalPeak {
  double angle_deg = 0.0;
  bool flagged = false;
};

// Largest interior local maximum of the restricted spectrum; falls back to
// the window argmax when the peak sits on the window edge.
IntervalPeak interval_peak(const CMatrix& projector, double center_deg, double delta_max_deg,
                           double step_deg, int n_elements, double spacing) {
  AngleGrid grid{std::max(-90.0, center_deg - delta_max_deg),
                 std::min(90.0, center_deg + delta_max_deg), step_deg};
  const std::vector<double> pts = grid.points();
  const std::vector<double> p =
      music_spectrum(projector, steering_matrix(pts, n_elements, spacing));
  IntervalPeak out;
  double best = -1.0;
  for (std::size_t i = 1; i + 1 < p.size(); ++i)
    if (p[i] > p[i - 1] && p[i] > p[i + 1] && p[i] > best) {
      best = p[i];
      out.angle_deg = pts[i];
    }
  if (best < 0.0) {
    const auto arg = static_cast<std::size_t>(
        std::max_element(p.begin(), p.end()) - p.begin());
    out.angle_deg = pts[arg];
    out.flagged = true;
  }
  return out;
}

}  // namespace

TrackResult track_angles(const CMatrix& y0_combined, const AnalogCombiner& combiner,
                         const std::vector<double>& theta_prev_deg, double delta_max_deg,
                         double grid_step_deg, double spacing) {
  const int k = static_cast<int>(theta_prev_deg.size());
  const CMatrix u_n = noise_subspace(y0_combined, k);
  const CMatrix m = u_n.adjoint() * combiner.w_rf;
  TrackResult res;
  for (double prev : theta_prev_deg) {
    const IntervalPeak pk =
        interval_peak(m, prev, delta_max_deg, grid_step_deg, combiner.n_tx(), spacing);
    res.angles_deg.push_back(pk.angle_deg);
    res.interval_flagged.push_back(pk.flagged);
  }
  return res;
}

TrackResult ue_track_angles(const CMatrix& y_dl, const std::vector<double>& phi_prev_deg,
                            double delta_max_deg, double grid_step_deg, double spacing) {
  const int l = static_cast<int>(phi_prev_deg.size());
  const CMatrix u_n = noise_subspace(y_dl, l);
  const CMatrix m = u_n.adjoint();
  TrackResult res;
  for (double prev : phi_prev_deg) {
    const IntervalPeak pk = interval_peak(m, prev, delta_max_deg, grid_step_deg,
                                          static_cast<int>(y_dl.rows()), spacing);
    res.angles_deg.push_back(pk.angle_deg);
    res.interval_flagged.push_back(pk.flagged);
  }
  return res;
}

CMatrix sync_prefix(int l, int l_sync) {
  if (l < 1 || l_sync < l) throw std::invalid_argument("sync_prefix: need 1 <= l <= l_sync");
  CMatrix s(l, l_sync);
  for (int r = 0; r < l; ++r)
    for (int c = 0; c < l_sync; ++c)
      s(r, c) = std::polar(1.0, -2.0 * kPi * static_cast<double>(r) * static_cast<double>(c) /
                                    static_cast<double>(l_sync));
  return s;
}

SicResult sic_decode(const CMatrix& y0_combined, const CMatrix& x_radar,
                     const std::vector<double>& tracked_deg, int l_paths, const FramePlan& plan,
                     const AnalogCombiner& combiner, const CMatrix& sync_block, double spacing,
                     const SicOptions& opt) {
  plan.validate();
  const int k = static_cast<int>(tracked_deg.size());
  if (l_paths < 1 || l_paths > k) throw std::invalid_argument("sic_decode: need 1 <= L <= K");
  if (y0_combined.cols() != plan.total())
    throw std::invalid_argument("sic_decode: frame width disagrees with the plan");
  const int t = plan.t_radar;
  const int dt = plan.overlap;
  const int t_clean = t - dt;

  SicResult res;

  // reflection amplitudes from the interference-free echo window; with fewer
  // clean slots than RF chains the sample covariance is singular and the
  // amplitude filter undefined, so the echo cannot be recovered at all
  if (opt.refl_gains_override) {
    res.refl_gains = *opt.refl_gains_override;
    res.apes_regularized.assign(static_cast<std::size_t>(k), false);
  } else if (t_clean >= combiner.n_rf()) {
    const CMatrix y_clean = y0_combined.leftCols(t_clean);
    const CMatrix x_clean = x_radar.leftCols(t_clean);
    for (double th : tracked_deg) {
      const ApesEstimate est = apes_gain(y_clean, x_clean, combiner, th, spacing);
      res.refl_gains.push_back(est.gain);
      res.apes_regularized.push_back(est.regularized);
    }
  } else {
    res.refl_gains.assign(static_cast<std::size_t>(k), cd(0.0, 0.0));
    res.apes_regularized.assign(static_cast<std::size_t>(k), true);
  }

  // uplink block in the combined domain, echo removed over the overlap
  CMatrix ul_block = y0_combined.rightCols(plan.t_ul).eval();
  if (opt.subtraction && dt > 0) {
    const CMatrix a_track = steering_matrix(tracked_deg, combiner.n_tx(), spacing);
    CVector alpha(k);
    for (int i = 0; i < k; ++i) alpha(i) = res.refl_gains[static_cast<std::size_t>(i)];
    const CMatrix echo_rec = (combiner.w_rf * a_track) * alpha.asDiagonal() *
                             (a_track.transpose() * x_radar.rightCols(dt));
    ul_block.leftCols(dt) -= echo_rec;
  }

  // scattering gains by LS over the known prefix slots
  const std::vector<double> theta1(tracked_deg.begin(), tracked_deg.begin() + l_paths);
  const CMatrix a1_red =
      combiner.w_rf * steering_matrix(theta1, combiner.n_tx(), spacing);  // N_RF x L
  if (opt.comm_gains_override) {
    res.comm_gains = *opt.comm_gains_override;
  } else {
    const int n_sync = static_cast<int>(std::min<Eigen::Index>(sync_block.cols(), plan.t_ul));
    if (sync_block.rows() != l_paths)
      throw std::invalid_argument("sic_decode: sync prefix must have one row per path");
    const CMatrix v = ul_block.leftCols(n_sync);
    CMatrix design(static_cast<Eigen::Index>(combiner.n_rf()) * n_sync, l_paths);
    for (int l = 0; l < l_paths; ++l) {
      const CMatrix basis = a1_red.col(l) * sync_block.row(l).leftCols(n_sync);
      design.col(l) = basis.reshaped();
    }
    const CVector beta = design.colPivHouseholderQr().solve(CVector(v.reshaped()));
    res.comm_gains.assign(beta.data(), beta.data() + beta.size());
  }

  CVector beta(l_paths);
  for (int l = 0; l < l_paths; ++l) beta(l) = res.comm_gains[static_cast<std::size_t>(l)];
  const CMatrix effective = a1_red * beta.asDiagonal();  // N_RF x L
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(effective);
  if (cod.rank() < l_paths)
    throw std::invalid_argument("sic_decode: effective uplink matrix rank deficient");
  res.w_bb = cod.pseudoInverse();
  res.equalized = res.w_bb * ul_block;
  return res;
}

UlSeReport ul_se(const CMatrix& h_ul, const CMatrix& f_ue, const CMatrix& w_rf,
                 const CMatrix& w_bb, const CMatrix& y_res, const FramePlan& plan, double rho,
                 double sigma2_ul) {
  plan.validate();
  if (sigma2_ul <= 0.0) throw std::invalid_argument("ul_se: sigma2_ul must be positive");
  const int dt = plan.overlap;
  if (y_res.cols() != dt) throw std::invalid_argument("ul_se: y_res must span the overlap window");
  const CMatrix g = w_bb * w_rf;  // L x N_t
  const CMatrix useful = g * h_ul * f_ue;
  const auto l = static_cast<int>(useful.rows());
  UlSeReport rep;
  rep.residual_norm = y_res.norm();
  const CMatrix gg = g * g.adjoint();
  rep.r2 = mimo_se_bits(useful, CMatrix(sigma2_ul * gg), rho, l);
  if (dt > 0) {
    const CMatrix r_in =
        g * ((y_res * y_res.adjoint()) / static_cast<double>(dt)) * g.adjoint() + sigma2_ul * gg;
    rep.r1 = mimo_se_bits(useful, r_in, rho, l);
  }
  const double w1 = static_cast<double>(dt) / static_cast<double>(plan.t_ul);
  rep.r_ul = w1 * rep.r1 + (1.0 - w1) * rep.r2;
  return rep;
}

}  // namespace dfrc
