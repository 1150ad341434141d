// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dfrc/array_scene.hpp"
#include "dfrc/metrics.hpp"
#include "dfrc/stage2_beamforming.hpp"
#include "dfrc/stage3_tracking.hpp"

using namespace dfrc;
using doctest::Approx;

namespace {

const ArrayConfig kArrays{64, 10, 16, 0.5};

struct PriFixture {
  Scene scene;
  CMatrix x_r;    // precoded radar block
  CMatrix x_ul;   // precoded uplink block
  CMatrix d_bb;   // transmitted baseband symbols
  CMatrix sync;
  CMatrix f_ue;
};

PriFixture make_fixture(const FramePlan& plan, Rng& rng) {
  PriFixture f;
  f.scene = generate_scene(8, 4, 180, rng);
  CVector beta(4);
  for (int l = 0; l < 4; ++l) beta(l) = f.scene.comm_gains[static_cast<std::size_t>(l)];
  const CMatrix h_tilde =
      beta.asDiagonal() * steering_matrix(f.scene.comm_aod_deg(), 64, 0.5).transpose();
  const CMatrix b = steering_matrix(f.scene.ue_aoas_deg, 10, 0.5);
  const ZfPair zf = zf_pair(h_tilde, b);
  const HybridBeamformer hbf =
      design_hybrid(f.scene.target_angles_deg, zf.f_bs, AuxMode::zero, 1.0, 64, 0.5);
  f.x_r = hbf.composite() * cn_matrix(8, plan.t_radar, 1.0, rng);
  f.f_ue = ue_zf_precoder(f.scene.ue_aoas_deg, 10, 0.5);
  f.sync = sync_prefix(4, 8);
  f.d_bb = CMatrix(4, plan.t_ul);
  f.d_bb.leftCols(8) = f.sync;
  f.d_bb.rightCols(plan.t_ul - 8) = cn_matrix(4, plan.t_ul - 8, 1.0, rng);
  f.x_ul = f.f_ue * f.d_bb;
  return f;
}

}  // namespace

TEST_CASE("frame plan accounting") {
  FramePlan plan{140, 140, 42, 10};
  plan.validate();
  CHECK(plan.total() == 238);
  plan.overlap = 0;
  CHECK(plan.total() == 280);
  plan.overlap = 141;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan.overlap = -1;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
}

TEST_CASE("drift model bounds and determinism") {
  Rng rng = make_rng(50);
  const DriftModel d = random_drift(8, 4, 1.0, rng);
  d.validate();
  CHECK(d.target_drift_deg.size() == 8);
  CHECK(d.ue_drift_deg.size() == 4);
  for (double x : d.target_drift_deg) CHECK(std::abs(x) <= 1.0);

  DriftModel bad = d;
  bad.target_drift_deg[0] = 2.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  Rng g1 = make_rng(51), g2 = make_rng(51);
  Rng s_rng = make_rng(52);
  const Scene s = generate_scene(8, 4, 180, s_rng);
  const Scene d1 = apply_drift(s, d, g1);
  const Scene d2 = apply_drift(s, d, g2);
  CHECK(d1.target_angles_deg == d2.target_angles_deg);
  CHECK(d1.target_gains == d2.target_gains);
  for (int k = 0; k < 8; ++k)
    CHECK(d1.target_angles_deg[static_cast<std::size_t>(k)] ==
          Approx(s.target_angles_deg[static_cast<std::size_t>(k)] +
                 d.target_drift_deg[static_cast<std::size_t>(k)]));
}

TEST_CASE("frame assembly windows") {
  Rng rng = make_rng(53);

  SUBCASE("zero overlap is pure concatenation") {
    FramePlan plan{40, 30, 0, 10};
    const PriFixture f = make_fixture(plan, rng);
    const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, NoiseConfig{});
    CHECK(y0.cols() == 70);
    CHECK((y0.leftCols(40) - echo_matrix(f.scene, kArrays, f.x_r)).norm() < 1e-12);
    CHECK((y0.rightCols(30) - ul_matrix(f.scene, kArrays, f.x_ul)).norm() < 1e-12);
  }

  SUBCASE("full overlap adds the two blocks") {
    FramePlan plan{40, 40, 40, 10};
    const PriFixture f = make_fixture(plan, rng);
    const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, NoiseConfig{});
    CHECK(y0.cols() == 40);
    const CMatrix expect =
        echo_matrix(f.scene, kArrays, f.x_r) + ul_matrix(f.scene, kArrays, f.x_ul);
    CHECK((y0 - expect).norm() < 1e-12);
  }

  SUBCASE("mixture window is echo plus uplink") {
    FramePlan plan{40, 30, 12, 10};
    const PriFixture f = make_fixture(plan, rng);
    const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, NoiseConfig{});
    CHECK(y0.cols() == 58);
    const CMatrix echo = echo_matrix(f.scene, kArrays, f.x_r);
    const CMatrix ul = ul_matrix(f.scene, kArrays, f.x_ul);
    const CMatrix mid = y0.block(0, 28, 64, 12);
    CHECK((mid - (echo.rightCols(12) + ul.leftCols(12))).norm() < 1e-12);
  }

  SUBCASE("shape violations rejected") {
    FramePlan plan{40, 30, 12, 10};
    const PriFixture f = make_fixture(plan, rng);
    CHECK_THROWS_AS(assemble_frame(f.scene, kArrays, f.x_r.leftCols(39), f.x_ul, plan,
                                   NoiseConfig{}),
                    std::invalid_argument);
  }
}

TEST_CASE("tracking combiner layout") {
  Rng rng = make_rng(54);
  const std::vector<double> prev{-70.5, -40.5, -26.5, -24.5, 5.5, 25.5, 27.5, 55.5};
  const AnalogCombiner c = tracking_combiner(prev, 16, 64, 0.5, rng);
  CHECK(c.mode == AnalogCombiner::Mode::steered);
  c.validate();
  for (int k = 0; k < 8; ++k) {
    const CVector a = steering_vector(prev[static_cast<std::size_t>(k)], 64, 0.5);
    CHECK((c.w_rf.row(k) - a.adjoint()).norm() < 1e-14);
  }
  Rng rng2 = make_rng(54);
  const AnalogCombiner c2 = tracking_combiner(prev, 16, 64, 0.5, rng2);
  CHECK((c.w_rf - c2.w_rf).norm() == 0.0);
  CHECK_THROWS_AS(tracking_combiner(std::vector<double>(17, 0.0), 16, 64, 0.5, rng),
                  std::invalid_argument);
}

TEST_CASE("interval-restricted tracking") {
  FramePlan plan{140, 140, 42, 10};
  Rng rng = make_rng(55);
  const PriFixture f = make_fixture(plan, rng);

  SUBCASE("zero drift, noiseless: returns the priors within a grid step") {
    const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, NoiseConfig{});
    Rng comb_rng = make_rng(56);
    const AnalogCombiner comb =
        tracking_combiner(f.scene.target_angles_deg, 16, 64, 0.5, comb_rng);
    const TrackResult res = track_angles(comb.w_rf * y0, comb, f.scene.target_angles_deg, 1.0,
                                         0.02, 0.5);
    REQUIRE(res.angles_deg.size() == 8);
    for (int k = 0; k < 8; ++k)
      CHECK(std::abs(res.angles_deg[static_cast<std::size_t>(k)] -
                     f.scene.target_angles_deg[static_cast<std::size_t>(k)]) <= 0.02 + 1e-12);
  }

  SUBCASE("drifted angles recovered at moderate noise") {
    Rng drift_rng = make_rng(57);
    const DriftModel drift = random_drift(8, 4, 1.0, drift_rng);
    const Scene drifted = apply_drift(f.scene, drift, drift_rng);
    NoiseConfig noise;
    noise.sigma2_ul = 0.1;
    noise.rng_seed = 58;
    const CMatrix y0 = assemble_frame(drifted, kArrays, f.x_r, f.x_ul, plan, noise);
    Rng comb_rng = make_rng(59);
    const AnalogCombiner comb =
        tracking_combiner(f.scene.target_angles_deg, 16, 64, 0.5, comb_rng);
    const TrackResult res =
        track_angles(comb.w_rf * y0, comb, f.scene.target_angles_deg, 1.0, 0.02, 0.5);
    for (int k = 0; k < 8; ++k)
      CHECK(std::abs(res.angles_deg[static_cast<std::size_t>(k)] -
                     drifted.target_angles_deg[static_cast<std::size_t>(k)]) < 0.25);
  }

  SUBCASE("UE-side tracking through the downlink") {
    // well-separated arrival angles; a 10-element array cannot split
    //near-coincident paths regardless of estimator
    Scene base = f.scene;
    base.ue_aoas_deg = {-50.5, -15.5, 20.5, 60.5};
    Rng drift_rng = make_rng(60);
    const DriftModel drift = random_drift(8, 4, 1.0, drift_rng);
    Scene drifted = apply_drift(base, drift, drift_rng);
    for (std::size_t l = 0; l < drifted.comm_gains.size(); ++l)
      drifted.comm_gains[l] = std::polar(1.0, 0.7 * static_cast<double>(l));
    NoiseConfig noise;
    noise.sigma2_dl = 0.1;
    noise.rng_seed = 61;
    const CMatrix y_dl = dl_received(drifted, kArrays, f.x_r, noise);
    const TrackResult res = ue_track_angles(y_dl, base.ue_aoas_deg, 1.0, 0.02, 0.5);
    for (int l = 0; l < 4; ++l)
      CHECK(std::abs(res.angles_deg[static_cast<std::size_t>(l)] -
                     drifted.ue_aoas_deg[static_cast<std::size_t>(l)]) < 0.5);
  }
}

TEST_CASE("sync prefix rows are orthogonal and unit modulus") {
  const CMatrix s = sync_prefix(4, 8);
  CHECK((s * s.adjoint() - 8.0 * CMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 8; ++c) CHECK(std::abs(std::abs(s(r, c)) - 1.0) < 1e-14);
  CHECK_THROWS_AS(sync_prefix(4, 2), std::invalid_argument);
}

TEST_CASE("sic cancellation is exact with injected truth") {
  // isolates the cancellation and equalization logic from estimation error
  for (int overlap : {0, 42, 140}) {
    CAPTURE(overlap);
    FramePlan plan{140, 140, overlap, 10};
    Rng rng = make_rng(62, {static_cast<std::uint32_t>(overlap)});
    const PriFixture f = make_fixture(plan, rng);
    const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, NoiseConfig{});
    Rng comb_rng = make_rng(63);
    const AnalogCombiner comb =
        tracking_combiner(f.scene.target_angles_deg, 16, 64, 0.5, comb_rng);
    SicOptions opt;
    opt.refl_gains_override = &f.scene.target_gains;
    opt.comm_gains_override = &f.scene.comm_gains;
    const SicResult res = sic_decode(comb.w_rf * y0, f.x_r, f.scene.target_angles_deg, 4, plan,
                                     comb, f.sync, 0.5, opt);
    CHECK((res.equalized - f.d_bb).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("sic with estimated parameters cancels a noiseless frame") {
  FramePlan plan{140, 140, 42, 10};
  Rng rng = make_rng(64);
  const PriFixture f = make_fixture(plan, rng);
  const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, NoiseConfig{});
  Rng comb_rng = make_rng(65);
  const AnalogCombiner comb =
      tracking_combiner(f.scene.target_angles_deg, 16, 64, 0.5, comb_rng);
  const SicResult res = sic_decode(comb.w_rf * y0, f.x_r, f.scene.target_angles_deg, 4, plan,
                                   comb, f.sync, 0.5, SicOptions{});
  // reflection and scattering gains re-estimated from the frame itself
  for (int k = 0; k < 8; ++k)
    CHECK(std::abs(res.refl_gains[static_cast<std::size_t>(k)] -
                   f.scene.target_gains[static_cast<std::size_t>(k)]) < 1e-5);
  for (int l = 0; l < 4; ++l)
    CHECK(std::abs(res.comm_gains[static_cast<std::size_t>(l)] -
                   f.scene.comm_gains[static_cast<std::size_t>(l)]) < 1e-5);
  CHECK((res.equalized - f.d_bb).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("uplink spectral efficiency windows") {
  FramePlan plan{140, 140, 42, 10};
  Rng rng = make_rng(66);
  const PriFixture f = make_fixture(plan, rng);
  const CMatrix h_ul = dl_channel(f.scene, kArrays).transpose();
  Rng comb_rng = make_rng(67);
  const AnalogCombiner comb =
      tracking_combiner(f.scene.target_angles_deg, 16, 64, 0.5, comb_rng);
  NoiseConfig noise;
  noise.sigma2_ul = 0.01;
  noise.rng_seed = 68;
  const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, noise);
  const SicResult sic = sic_decode(comb.w_rf * y0, f.x_r, f.scene.target_angles_deg, 4, plan,
                                   comb, f.sync, 0.5, SicOptions{});

  SUBCASE("zero residual makes both windows equal") {
    const CMatrix y_res = CMatrix::Zero(64, 42);
    const UlSeReport rep = ul_se(h_ul, f.f_ue, comb.w_rf, sic.w_bb, y_res, plan, 1.0, 0.01);
    CHECK(rep.r1 == Approx(rep.r2).epsilon(1e-9));
    CHECK(rep.r_ul == Approx((42.0 / 140.0) * rep.r1 + (98.0 / 140.0) * rep.r2));
  }

  SUBCASE("zero overlap skips the interfered window") {
    FramePlan no_overlap{140, 140, 0, 10};
    const CMatrix y_res(64, 0);
    const UlSeReport rep =
        ul_se(h_ul, f.f_ue, comb.w_rf, sic.w_bb, y_res, no_overlap, 1.0, 0.01);
    CHECK(rep.r1 == 0.0);
    CHECK(rep.r_ul == Approx(rep.r2));
  }

  SUBCASE("residual interference reduces the overlapped-window rate") {
    const CMatrix echo_ov = echo_matrix(f.scene, kArrays, f.x_r.rightCols(42));
    const UlSeReport clean =
        ul_se(h_ul, f.f_ue, comb.w_rf, sic.w_bb, CMatrix::Zero(64, 42), plan, 1.0, 0.01);
    const UlSeReport dirty = ul_se(h_ul, f.f_ue, comb.w_rf, sic.w_bb, echo_ov, plan, 1.0, 0.01);
    CHECK(dirty.r1 < clean.r1);
    CHECK(dirty.r2 == Approx(clean.r2));
    CHECK(dirty.residual_norm == Approx(echo_ov.norm()));
  }
}

TEST_CASE("shared echo and uplink energy helps the comm-path angles on average") {
  FramePlan plan{140, 140, 42, 10};
  std::vector<double> comm_sq, other_sq;
  for (int trial = 0; trial < 150; ++trial) {
    Rng rng = make_rng(800, {static_cast<std::uint32_t>(trial)});
    PriFixture f = make_fixture(plan, rng);
    const DriftModel drift = random_drift(8, 4, 1.0, rng);
    const Scene drifted = apply_drift(f.scene, drift, rng);
    NoiseConfig noise;
    noise.sigma2_ul = 100.0;  // -20 dB, where tracking errors are visible
    noise.rng_seed = 900 + static_cast<std::uint64_t>(trial);
    const CMatrix y0 = assemble_frame(drifted, kArrays, f.x_r, f.x_ul, plan, noise);
    const AnalogCombiner comb =
        tracking_combiner(f.scene.target_angles_deg, 16, 64, 0.5, rng);
    const TrackResult res =
        track_angles(comb.w_rf * y0, comb, f.scene.target_angles_deg, 1.0, 0.02, 0.5);
    for (int k = 0; k < 8; ++k) {
      const double e = res.angles_deg[static_cast<std::size_t>(k)] -
                       drifted.target_angles_deg[static_cast<std::size_t>(k)];
      (k < 4 ? comm_sq : other_sq).push_back(e * e);
    }
  }
  const double rmse_comm = std::sqrt(kahan_sum(comm_sq) / comm_sq.size());
  const double rmse_other = std::sqrt(kahan_sum(other_sq) / other_sq.size());
  CHECK(rmse_comm <= rmse_other + 0.05);  // non-strict ordering, sampling tolerance
}

TEST_CASE("sic refuses to reconstruct from a rank-deficient clean window") {
  FramePlan plan{140, 140, 130, 10};  // only 10 clean slots for 16 chains
  Rng rng = make_rng(69);
  const PriFixture f = make_fixture(plan, rng);
  const CMatrix y0 = assemble_frame(f.scene, kArrays, f.x_r, f.x_ul, plan, NoiseConfig{});
  Rng comb_rng = make_rng(70);
  const AnalogCombiner comb =
      tracking_combiner(f.scene.target_angles_deg, 16, 64, 0.5, comb_rng);
  const SicResult res = sic_decode(comb.w_rf * y0, f.x_r, f.scene.target_angles_deg, 4, plan,
                                   comb, f.sync, 0.5, SicOptions{});
  for (cd g : res.refl_gains) CHECK(std::abs(g) == 0.0);
  for (bool flag : res.apes_regularized) CHECK(flag);
}
