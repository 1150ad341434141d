// SPDX-License-Identifier: Apache-2.0
#include "dfrc/stage2_beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dfrc/array_scene.hpp"

namespace dfrc {

void HybridBeamformer::validate() const {
  const auto k = f_bb.rows();
  const double c = power / (static_cast<double>(k) * static_cast<double>(f_rf.rows()));
  const CMatrix gram = f_bb * f_bb.adjoint();
  if ((gram - c * CMatrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10 * c)
    throw std::invalid_argument("HybridBeamformer: digital part not scaled-unitary");
  const double total = composite().squaredNorm();
  if (std::abs(total - power) > 1e-8 * power)
    throw std::invalid_argument("HybridBeamformer: power budget violated");
  for (Eigen::Index cidx = 0; cidx < f_rf.cols(); ++cidx)
    for (Eigen::Index r = 0; r < f_rf.rows(); ++r)
      if (std::abs(std::abs(f_rf(r, cidx)) - 1.0) > 1e-12)
        throw std::invalid_argument("HybridBeamformer: analog entry off the unit circle");
}

ZfPair zf_pair(const CMatrix& h_tilde, const CMatrix& b_phi) {
  const auto l = h_tilde.rows();
  if (b_phi.cols() != l) throw std::invalid_argument("zf_pair: factor widths must both be L");
  ZfPair zf;
  {
    const CMatrix gram = h_tilde * h_tilde.adjoint();
    Eigen::LDLT<CMatrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
      throw std::invalid_argument("zf_pair: reduced channel h_tilde rank deficient");
    zf.f_bs = h_tilde.adjoint() * ldlt.solve(CMatrix::Identity(l, l));
  }
  {
    const CMatrix gram = b_phi.adjoint() * b_phi;
    Eigen::LDLT<CMatrix> ldlt(gram);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
      throw std::invalid_argument("zf_pair: UE steering matrix b_phi rank deficient");
    zf.w_ue = ldlt.solve(b_phi.adjoint());
  }
  return zf;
}

CMatrix analog_from_angles(const std::vector<double>& theta_deg, int n_tx, double spacing) {
  return steering_matrix(theta_deg, n_tx, spacing).conjugate();
}

namespace {

// Basis of the orthogonal complement of col(f_bs) (= the channel null space,
// since col(F_BS) equals the row space of H~), trimmed to the k-l columns
// with the most energy under f_rf^H.
CMatrix nullspace_aux(const CMatrix& f_rf, const CMatrix& f_bs) {
  const auto n_tx = f_bs.rows();
  const auto l = f_bs.cols();
  const auto k = f_rf.cols();
  if (k - l <= 0) return CMatrix(n_tx, 0);
  Eigen::JacobiSVD<CMatrix> svd(f_bs, Eigen::ComputeFullU);
  const CMatrix basis = svd.matrixU().rightCols(n_tx - l);
  const CMatrix proj = f_rf.adjoint() * basis;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(basis.cols()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return proj.col(a).squaredNorm() > proj.col(b).squaredNorm();
  });
  CMatrix aux(n_tx, k - l);
  for (Eigen::Index i = 0; i < k - l; ++i) aux.col(i) = basis.col(order[static_cast<std::size_t>(i)]);
  return aux;
}

}  // namespace

CMatrix opp_digital(const CMatrix& f_rf, const CMatrix& f_bs, AuxMode mode, double power) {
  const auto n_tx = f_rf.rows();
  const auto k = f_rf.cols();
  const auto l = f_bs.cols();
  if (f_bs.rows() != n_tx) throw std::invalid_argument("opp_digital: f_bs rows must be n_tx");
  if (l > k) throw std::invalid_argument("opp_digital: more data streams than beams");
  {
    Eigen::ColPivHouseholderQR<CMatrix> qr(f_rf);
    if (qr.rank() < k) throw std::invalid_argument("opp_digital: f_rf not full column rank");
  }
  CMatrix target(n_tx, k);
  target.leftCols(l) = f_bs;
  if (k > l)
    target.rightCols(k - l) =
        mode == AuxMode::zero ? CMatrix::Zero(n_tx, k - l) : nullspace_aux(f_rf, f_bs);

  Eigen::JacobiSVD<CMatrix> svd(f_rf.adjoint() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("opp_digital: SVD failed");
  CMatrix u = svd.matrixU();
  CMatrix v = svd.matrixV();
  // pin the per-column phase of the SVD so outputs are reproducible
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::Index r = 0;
    v.col(i).cwiseAbs().maxCoeff(&r);
    const cd rot = std::polar(1.0, -std::arg(v(r, i)));
    v.col(i) *= rot;
    u.col(i) *= rot;
  }
  const double scale =
      std::sqrt(power / (static_cast<double>(k) * static_cast<double>(n_tx)));
  return scale * u * v.adjoint();
}

HybridBeamformer design_hybrid(const std::vector<double>& theta_deg, const CMatrix& f_bs,
                               AuxMode mode, double power, int n_tx, double spacing) {
  HybridBeamformer hbf;
  hbf.f_rf = analog_from_angles(theta_deg, n_tx, spacing);
  hbf.f_bb = opp_digital(hbf.f_rf, f_bs, mode, power);
  hbf.variant =
      mode == AuxMode::zero ? HybridBeamformer::Variant::hbf_opt : HybridBeamformer::Variant::hbf_null;
  hbf.power = power;
  return hbf;
}

std::vector<double> beampattern(const CMatrix& f_rf, double power,
                                const std::vector<double>& grid_deg, double spacing) {
  const double scale =
      power / (static_cast<double>(f_rf.cols()) * static_cast<double>(f_rf.rows()));
  const CMatrix steer = steering_matrix(grid_deg, static_cast<int>(f_rf.rows()), spacing);
  const CMatrix g = f_rf.transpose() * steer;  // column theta: F_RF^T a(theta)
  std::vector<double> d(grid_deg.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = scale * g.col(static_cast<Eigen::Index>(i)).squaredNorm();
  return d;
}

std::vector<double> transmit_pattern(const CMatrix& f_composite,
                                     const std::vector<double>& grid_deg, double spacing) {
  const CMatrix steer = steering_matrix(grid_deg, static_cast<int>(f_composite.rows()), spacing);
  const CMatrix g = f_composite.transpose() * steer;
  std::vector<double> d(grid_deg.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = g.col(static_cast<Eigen::Index>(i)).squaredNorm();
  return d;
}

double mimo_se_bits(const CMatrix& useful, const CMatrix& r_in, double rho, int n_streams) {
  Eigen::LLT<CMatrix> llt(r_in);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("mimo_se_bits: interference covariance not positive definite");
  const CMatrix white = llt.matrixL().solve(useful);  // R_in^-1/2 U
  Eigen::SelfAdjointEigenSolver<CMatrix> es(white * white.adjoint());
  double se = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lambda = std::max(0.0, es.eigenvalues()(i));
    se += std::log2(1.0 + rho / static_cast<double>(n_streams) * lambda);
  }
  return se;
}

DLLinkReport dl_se(const CMatrix& h, const CMatrix& w_ue, const CMatrix& f_rf,
                   const CMatrix& f_bb, double rho, double sigma2_dl) {
  const auto l = w_ue.rows();
  const auto k = f_bb.cols();
  if (f_bb.rows() != f_rf.cols()) throw std::invalid_argument("dl_se: f_rf/f_bb widths disagree");
  if (k < l) throw std::invalid_argument("dl_se: fewer streams than combiner outputs");
  const CMatrix front = w_ue * h * f_rf;  // L x K
  const CMatrix useful = front * f_bb.leftCols(l);
  DLLinkReport rep;
  rep.r_in = sigma2_dl * (w_ue * w_ue.adjoint());
  if (k > l) {
    const CMatrix intf = front * f_bb.rightCols(k - l);
    rep.r_in += rho * (intf * intf.adjoint());
  }
  rep.se_bits_per_hz = mimo_se_bits(useful, rep.r_in, rho, static_cast<int>(l));
  return rep;
}

CMatrix fd_zf_precoder(const CMatrix& f_bs, double power, int k_total) {
  if (k_total < 1) throw std::invalid_argument("fd_zf_precoder: k_total must be >= 1");
  CMatrix f = f_bs;
  const double per_stream = power / static_cast<double>(k_total);
  for (Eigen::Index c = 0; c < f.cols(); ++c) {
    const double n = f.col(c).norm();
    if (n == 0.0) throw std::invalid_argument("fd_zf_precoder: zero precoder column");
    f.col(c) *= std::sqrt(per_stream) / n;
  }
  return f;
}

DLLinkReport dl_se_digital(const CMatrix& h, const CMatrix& w_ue, const CMatrix& f, double rho,
                           double sigma2_dl) {
  DLLinkReport rep;
  rep.r_in = sigma2_dl * (w_ue * w_ue.adjoint());
  rep.se_bits_per_hz =
      mimo_se_bits(w_ue * h * f, rep.r_in, rho, static_cast<int>(w_ue.rows()));
  return rep;
}

}  // namespace dfrc
