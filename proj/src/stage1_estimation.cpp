// SPDX-License-Identifier: Apache-2.0
#include "dfrc/stage1_estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dfrc/pilot_waveform.hpp"

namespace dfrc {

CVector AnalogCombiner::reduced_steering(double angle_deg, double spacing) const {
  return w_rf * steering_vector(angle_deg, n_tx(), spacing);
}

void AnalogCombiner::validate() const {
  for (Eigen::Index c = 0; c < w_rf.cols(); ++c)
    for (Eigen::Index r = 0; r < w_rf.rows(); ++r)
      if (std::abs(std::abs(w_rf(r, c)) - 1.0) > 1e-12)
        throw std::invalid_argument("AnalogCombiner: entry off the unit circle");
}

AnalogCombiner random_combiner(int n_rf, int n_tx, Rng& rng) {
  if (n_rf < 1 || n_rf > n_tx) throw std::invalid_argument("random_combiner: need 1 <= n_rf <= n_tx");
  AnalogCombiner c;
  c.mode = AnalogCombiner::Mode::random;
  c.w_rf = CMatrix(n_rf, n_tx);
  std::uniform_real_distribution<double> psi(0.0, 2.0 * kPi);
  for (Eigen::Index col = 0; col < n_tx; ++col)
    for (Eigen::Index row = 0; row < n_rf; ++row) c.w_rf(row, col) = std::polar(1.0, psi(rng));
  return c;
}

CMatrix noise_subspace(const CMatrix& y, int n_sources) {
  const Eigen::Index n = y.rows();
  if (n_sources < 0 || n_sources >= n)
    throw std::invalid_argument("noise_subspace: need 0 <= n_sources < channel count");
  const CMatrix r = (y * y.adjoint()) / static_cast<double>(y.cols());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(r);
  if (es.info() != Eigen::Success) throw std::runtime_error("noise_subspace: eigensolver failed");
  // eigenvalues ascending: leading columns span the noise subspace
  return es.eigenvectors().leftCols(n - n_sources);
}

std::vector<double> music_spectrum(const CMatrix& m, const CMatrix& steer_grid) {
  const CMatrix g = m * steer_grid;
  std::vector<double> p(static_cast<std::size_t>(g.cols()));
  for (Eigen::Index c = 0; c < g.cols(); ++c) p[static_cast<std::size_t>(c)] = 1.0 / g.col(c).squaredNorm();
  return p;
}

namespace {

// Strict interior local maxima, tallest first, with peaks closer than
// merge_tol_deg suppressed in favor of the taller one.
std::vector<std::size_t> find_peaks(const std::vector<double>& spectrum,
                                    const std::vector<double>& grid_deg, double merge_tol_deg) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < spectrum.size(); ++i)
    if (spectrum[i] > spectrum[i - 1] && spectrum[i] > spectrum[i + 1]) candidates.push_back(i);
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](std::size_t a, std::size_t b) { return spectrum[a] > spectrum[b]; });
  std::vector<std::size_t> kept;
  for (std::size_t c : candidates) {
    const bool shadowed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return std::abs(grid_deg[c] - grid_deg[k]) < merge_tol_deg;
    });
    if (!shadowed) kept.push_back(c);
  }
  return kept;
}

MusicResult music_core(const CMatrix& y, const CMatrix& projector_base, int n_elements,
                       int n_sources, const AngleGrid& grid, double spacing) {
  const CMatrix u_n = noise_subspace(y, n_sources);
  // fold the combiner into the noise projector before hitting the grid
  const CMatrix m = projector_base.size() > 0 ? CMatrix(u_n.adjoint() * projector_base)
                                              : CMatrix(u_n.adjoint());
  MusicResult res;
  res.grid_deg = grid.points();
  const CMatrix steer = steering_matrix(res.grid_deg, n_elements, spacing);
  res.spectrum = music_spectrum(m, steer);
  const auto peaks = find_peaks(res.spectrum, res.grid_deg, 0.5);
  const std::size_t take = std::min<std::size_t>(peaks.size(), static_cast<std::size_t>(n_sources));
  for (std::size_t i = 0; i < take; ++i) res.angles_deg.push_back(res.grid_deg[peaks[i]]);
  std::sort(res.angles_deg.begin(), res.angles_deg.end());
  res.degenerate = take < static_cast<std::size_t>(n_sources);
  return res;
}

}  // namespace

MusicResult music_aoa(const CMatrix& y_combined, const AnalogCombiner& combiner, int k,
                      const AngleGrid& grid, double spacing) {
  if (k >= combiner.n_rf())
    throw std::invalid_argument("music_aoa: k must be below the RF-chain count");
  if (y_combined.rows() != combiner.n_rf())
    throw std::invalid_argument("music_aoa: y rows must match RF-chain count");
  return music_core(y_combined, combiner.w_rf, combiner.n_tx(), k, grid, spacing);
}

MusicResult ue_music(const CMatrix& y_dl, int l, const AngleGrid& grid, double spacing) {
  if (l >= y_dl.rows()) throw std::invalid_argument("ue_music: l must be below the antenna count");
  return music_core(y_dl, CMatrix(), static_cast<int>(y_dl.rows()), l, grid, spacing);
}

ApesEstimate apes_gain(const CMatrix& y_combined, const CMatrix& x_known,
                       const AnalogCombiner& combiner, double theta_deg, double spacing) {
  const auto t = static_cast<double>(y_combined.cols());
  if (x_known.cols() != y_combined.cols())
    throw std::invalid_argument("apes_gain: x and y must cover the same slots");
  const CVector a = steering_vector(theta_deg, combiner.n_tx(), spacing);
  const CVector a_red = combiner.w_rf * a;
  const CVector xa = x_known.transpose() * a;  // per-slot projection of the known block
  const double scale = xa.squaredNorm();       // a^T x x^H a*; equals T*P for the pilot
  ApesEstimate est;
  if (scale <= 0.0) {
    est.regularized = true;
    return est;
  }
  const CVector z = y_combined * xa.conjugate();
  const CMatrix r = (y_combined * y_combined.adjoint()) / t;
  CMatrix q = r - (z * z.adjoint()) / (t * scale);

  Eigen::LDLT<CMatrix> ldlt(q);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) {
    const double eps = 1e-10 * q.real().trace() / static_cast<double>(q.rows());
    est.regularized = true;
    CVector w;
    if (eps > 0.0) {
      q += eps * CMatrix::Identity(q.rows(), q.cols());
      ldlt.compute(q);
    }
    if (eps <= 0.0 || ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
      // covariance carries no usable structure; fall back to matched filtering
      w = a_red / a_red.squaredNorm();
      est.gain = (w.adjoint() * z)(0) / scale;
      return est;
    }
  }
  const CVector qa = ldlt.solve(a_red);
  const cd denom = (a_red.adjoint() * qa)(0);
  const CVector w = qa / denom;
  est.gain = (w.adjoint() * z)(0) / scale;
  return est;
}

CMatrix ue_zf_precoder(const std::vector<double>& phi_deg, int n_rx, double spacing) {
  const auto l = static_cast<Eigen::Index>(phi_deg.size());
  if (l == 0) throw std::invalid_argument("ue_zf_precoder: need at least one angle");
  if (l > n_rx) throw std::invalid_argument("ue_zf_precoder: more paths than antennas");
  const CMatrix b = steering_matrix(phi_deg, n_rx, spacing);
  const CMatrix gram = b.transpose() * b.conjugate();  // Hermitian PD for distinct angles
  Eigen::LDLT<CMatrix> ldlt(gram);
  if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-12) {
    double best = 1e300;
    std::pair<double, double> pair{0.0, 0.0};
    for (std::size_t i = 0; i < phi_deg.size(); ++i)
      for (std::size_t j = i + 1; j < phi_deg.size(); ++j)
        if (std::abs(phi_deg[i] - phi_deg[j]) < best) {
          best = std::abs(phi_deg[i] - phi_deg[j]);
          pair = {phi_deg[i], phi_deg[j]};
        }
    std::ostringstream msg;
    msg << "ue_zf_precoder: steering gram near singular; closest angles " << pair.first
        << " and " << pair.second << " deg";
    throw std::invalid_argument(msg.str());
  }
  return b.conjugate() * ldlt.solve(CMatrix::Identity(l, l));
}

std::vector<int> identify_paths(const CMatrix& y_up, const std::vector<double>& theta_hat_deg,
                                int l, double spacing) {
  const int k = static_cast<int>(theta_hat_deg.size());
  if (l < 1 || l > k) throw std::invalid_argument("identify_paths: need 1 <= l <= K");
  const CMatrix a = steering_matrix(theta_hat_deg, static_cast<int>(y_up.rows()), spacing);
  const CMatrix g = a.adjoint();  // steered combiner, row k = a^H(theta_k)
  const CMatrix z = g * y_up;
  // solve the steered observation back through the known candidate gram so a
  // weak path is not out-scored by the sidelobe leakage of strong ones
  const CMatrix coeff = (g * a).colPivHouseholderQr().solve(z);
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  // per-row energy aggregated over every uplink-pilot column; ties keep lower index
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
    return coeff.row(i).squaredNorm() > coeff.row(j).squaredNorm();
  });
  std::vector<int> picked(order.begin(), order.begin() + l);
  std::sort(picked.begin(), picked.end());
  return picked;
}

CommGainFit ls_comm_gains(const CMatrix& y_up, const std::vector<double>& theta1_hat_deg,
                          double spacing) {
  const auto l = static_cast<Eigen::Index>(theta1_hat_deg.size());
  if (l == 0) throw std::invalid_argument("ls_comm_gains: need at least one angle");
  const CMatrix a = steering_matrix(theta1_hat_deg, static_cast<int>(y_up.rows()), spacing);
  Eigen::ColPivHouseholderQR<CMatrix> qr(a);
  if (qr.rank() < l) throw std::invalid_argument("ls_comm_gains: steering matrix rank deficient");
  const CMatrix coeff = qr.solve(y_up);  // least-squares fit, L x columns
  CommGainFit fit;
  fit.residual_norm = (y_up - a * coeff).norm();
  // one-to-one assignment of columns to angles, strongest coefficients first;
  // a per-column argmax could hand two columns the same angle when the
  // identified set is partly wrong
  struct Entry {
    double mag;
    Eigen::Index i, m;
  };
  std::vector<Entry> entries;
  for (Eigen::Index m = 0; m < coeff.cols(); ++m)
    for (Eigen::Index i = 0; i < coeff.rows(); ++i)
      entries.push_back({std::abs(coeff(i, m)), i, m});
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    return x.mag > y.mag;
  });
  std::vector<int> assigned(static_cast<std::size_t>(coeff.cols()), -1);
  std::vector<bool> angle_used(static_cast<std::size_t>(coeff.rows()), false);
  for (const Entry& e : entries) {
    if (assigned[static_cast<std::size_t>(e.m)] >= 0 || angle_used[static_cast<std::size_t>(e.i)])
      continue;
    assigned[static_cast<std::size_t>(e.m)] = static_cast<int>(e.i);
    angle_used[static_cast<std::size_t>(e.i)] = true;
  }
  for (Eigen::Index m = 0; m < coeff.cols(); ++m) {
    const int i = assigned[static_cast<std::size_t>(m)];
    fit.gains.push_back(coeff(i, m));
    fit.angle_index.push_back(i);
  }
  return fit;
}

Stage1Report run_stage1(const Scene& scene, const ArrayConfig& arrays, const NoiseConfig& noise,
                        const Stage1Options& opt, Rng& rng) {
  scene.validate();
  arrays.validate();
  const int k = scene.k_targets();
  const int l = scene.comm_path_count;
  if (l > arrays.n_rx) throw std::invalid_argument("run_stage1: more comm paths than UE antennas");

  const HybridPilot pilot = had_factorize(arrays.n_tx, arrays.n_rf, opt.t_pilot, opt.power);
  const CMatrix& s_dp = pilot.s_dp;
  const AnalogCombiner comb = random_combiner(arrays.n_rf, arrays.n_tx, rng);

  Stage1Report rep;

  // target search on the combined echo
  const CMatrix y_echo = radar_echo(scene, arrays, s_dp, noise);
  const CMatrix y_tilde = comb.w_rf * y_echo;
  rep.bs_spectrum = music_aoa(y_tilde, comb, k, opt.grid, arrays.spacing_over_wavelength);
  rep.bs_angles_deg = rep.bs_spectrum.angles_deg;
  for (double th : rep.bs_angles_deg) {
    const ApesEstimate est =
        apes_gain(y_tilde, s_dp, comb, th, arrays.spacing_over_wavelength);
    rep.bs_gains.push_back(est.gain);
    rep.bs_gain_regularized.push_back(est.regularized);
  }

  // UE-side arrival angles from the same downlink block
  const CMatrix y_dl = dl_received(scene, arrays, s_dp, noise);
  rep.ue_spectrum = ue_music(y_dl, l, opt.grid, arrays.spacing_over_wavelength);
  rep.ue_angles_deg = rep.ue_spectrum.angles_deg;
  rep.degenerate = rep.bs_spectrum.degenerate || rep.ue_spectrum.degenerate;

  if (rep.bs_angles_deg.empty() || rep.ue_angles_deg.empty()) return rep;

  // zero-forced uplink pilot (identity payload) and path identification
  const CMatrix f_ue =
      ue_zf_precoder(rep.ue_angles_deg, arrays.n_rx, arrays.spacing_over_wavelength);
  const CMatrix y_up = ul_received(scene, arrays, f_ue, noise);
  const int l_found = static_cast<int>(rep.ue_angles_deg.size());
  const int l_pick = std::min<int>(l_found, static_cast<int>(rep.bs_angles_deg.size()));
  const std::vector<int> picked =
      identify_paths(y_up, rep.bs_angles_deg, l_pick, arrays.spacing_over_wavelength);
  std::vector<double> theta1;
  theta1.reserve(picked.size());
  for (int idx : picked) theta1.push_back(rep.bs_angles_deg[static_cast<std::size_t>(idx)]);

  const CommGainFit fit = ls_comm_gains(y_up, theta1, arrays.spacing_over_wavelength);
  rep.ls_residual_norm = fit.residual_norm;
  for (std::size_t m = 0; m < fit.gains.size(); ++m) {
    const int local = fit.angle_index[m];
    rep.comm_gains.push_back(fit.gains[m]);
    rep.comm_path_angles_deg.push_back(theta1[static_cast<std::size_t>(local)]);
    rep.comm_path_index.push_back(picked[static_cast<std::size_t>(local)]);
  }
  return rep;
}

CMatrix radar_channel_matrix(const std::vector<double>& angles_deg, const std::vector<cd>& gains,
                             int n_tx, double spacing) {
  if (angles_deg.size() != gains.size())
    throw std::invalid_argument("radar_channel_matrix: angle/gain count mismatch");
  const CMatrix a = steering_matrix(angles_deg, n_tx, spacing);
  CVector g(static_cast<Eigen::Index>(gains.size()));
  for (std::size_t i = 0; i < gains.size(); ++i) g(static_cast<Eigen::Index>(i)) = gains[i];
  return a * g.asDiagonal() * a.transpose();
}

CMatrix comm_channel_matrix(const std::vector<double>& ue_aoas_deg, const std::vector<cd>& betas,
                            const std::vector<double>& aods_deg, int n_rx, int n_tx,
                            double spacing) {
  if (ue_aoas_deg.size() != betas.size() || betas.size() != aods_deg.size())
    throw std::invalid_argument("comm_channel_matrix: per-path lists must align");
  const CMatrix b = steering_matrix(ue_aoas_deg, n_rx, spacing);
  const CMatrix a = steering_matrix(aods_deg, n_tx, spacing);
  CVector g(static_cast<Eigen::Index>(betas.size()));
  for (std::size_t i = 0; i < betas.size(); ++i) g(static_cast<Eigen::Index>(i)) = betas[i];
  return b * g.asDiagonal() * a.transpose();
}

void Stage1Report::save_text(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("Stage1Report: cannot open " + path);
  os << std::setprecision(17);
  auto line = [&os](const std::string& key, const auto& values) {
    os << key << ":";
    for (const auto& v : values) os << " " << v;
    os << "\n";
  };
  line("bs_angles_deg", bs_angles_deg);
  os << "bs_gains:";
  for (cd g : bs_gains) os << " " << g.real() << (g.imag() < 0 ? "" : "+") << g.imag() << "j";
  os << "\n";
  line("ue_angles_deg", ue_angles_deg);
  line("comm_path_angles_deg", comm_path_angles_deg);
  os << "comm_gains:";
  for (cd g : comm_gains) os << " " << g.real() << (g.imag() < 0 ? "" : "+") << g.imag() << "j";
  os << "\n";
  os << "ls_residual_norm: " << ls_residual_norm << "\n";
  os << "degenerate: " << (degenerate ? 1 : 0) << "\n";
}

void save_spectrum_csv(const MusicResult& result, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("save_spectrum_csv: cannot open " + path);
  os << std::setprecision(17);
  os << "angle_deg,p_music\n";
  for (std::size_t i = 0; i < result.grid_deg.size(); ++i)
    os << result.grid_deg[i] << "," << result.spectrum[i] << "\n";
}

}  // namespace dfrc
