// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <complex>
#include <cstdio>
#include <filesystem>

#include "dfrc/array_scene.hpp"

using namespace dfrc;
using doctest::Approx;

namespace {

Scene single_path_scene(double theta, double phi, cd alpha, cd beta) {
  Scene s;
  s.target_angles_deg = {theta};
  s.target_gains = {alpha};
  s.comm_path_count = 1;
  s.ue_aoas_deg = {phi};
  s.comm_gains = {beta};
  return s;
}

// orthonormal basis of the column space, for subspace-containment checks
CMatrix orth(const CMatrix& a) {
  Eigen::HouseholderQR<CMatrix> qr(a);
  return CMatrix(qr.householderQ()) .leftCols(a.cols());
}

}  // namespace

TEST_CASE("steering vector closed-form values") {
  const CVector broadside = steering_vector(0.0, 4, 0.5);
  for (int m = 0; m < 4; ++m) CHECK(std::abs(broadside(m) - cd{1.0, 0.0}) < 1e-15);

  const CVector endfire = steering_vector(90.0, 2, 0.5);
  CHECK(std::abs(endfire(0) - cd{1.0, 0.0}) < 1e-15);
  CHECK(std::abs(endfire(1) - cd{-1.0, 0.0}) < 1e-12);

  // sin 30 deg = 1/2: phases 0, pi/2, pi
  const CVector thirty = steering_vector(30.0, 3, 0.5);
  CHECK(std::abs(thirty(0) - cd{1.0, 0.0}) < 1e-12);
  CHECK(std::abs(thirty(1) - cd{0.0, 1.0}) < 1e-12);
  CHECK(std::abs(thirty(2) - cd{-1.0, 0.0}) < 1e-12);
}

TEST_CASE("steering vector properties") {
  Rng rng = make_rng(7);
  std::uniform_real_distribution<double> angle(-90.0, 90.0);
  for (int i = 0; i < 50; ++i) {
    const double th = angle(rng);
    const CVector a = steering_vector(th, 64, 0.5);
    for (int m = 0; m < 64; ++m) CHECK(std::abs(std::abs(a(m)) - 1.0) < 1e-12);
    // sin is odd, so negating the angle conjugates the vector
    const CVector neg = steering_vector(-th, 64, 0.5);
    CHECK((neg - a.conjugate()).norm() < 1e-10);
  }
  CHECK_THROWS_AS(steering_vector(0.0, 0, 0.5), std::invalid_argument);
}

TEST_CASE("generate_scene contract") {
  Rng rng = make_rng(11);
  const Scene s = generate_scene(8, 4, 180, rng);
  CHECK(s.k_targets() == 8);
  CHECK(s.comm_path_count == 4);
  CHECK(s.comm_aod_deg() == std::vector<double>(s.target_angles_deg.begin(),
                                                s.target_angles_deg.begin() + 4));
  for (std::size_t i = 0; i < 8; ++i) {
    // slice centers of a 1-degree grid
    const double frac = s.target_angles_deg[i] - std::floor(s.target_angles_deg[i]);
    CHECK(frac == Approx(0.5));
    for (std::size_t j = i + 1; j < 8; ++j)
      CHECK(s.target_angles_deg[i] != s.target_angles_deg[j]);
  }

  Rng rng_a = make_rng(3), rng_b = make_rng(3);
  const Scene a = generate_scene(8, 4, 180, rng_a);
  const Scene b = generate_scene(8, 4, 180, rng_b);
  CHECK(a.target_angles_deg == b.target_angles_deg);
  CHECK(a.target_gains == b.target_gains);
  CHECK(a.ue_aoas_deg == b.ue_aoas_deg);

  Rng rng_c = make_rng(5);
  const Scene minimal = generate_scene(1, 1, 180, rng_c);
  CHECK(minimal.k_targets() == 1);
  CHECK(minimal.comm_path_count == 1);

  Rng rng_d = make_rng(5);
  CHECK_THROWS_AS(generate_scene(200, 4, 180, rng_d), std::invalid_argument);
  CHECK_THROWS_AS(generate_scene(4, 5, 180, rng_d), std::invalid_argument);
}

TEST_CASE("gain statistics are unit-variance circular Gaussian") {
  Rng rng = make_rng(17);
  double acc = 0.0, acc_re = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const cd g = sample_cn(rng, 1.0);
    acc += std::norm(g);
    acc_re += g.real();
  }
  CHECK(acc / n == Approx(1.0).epsilon(0.1));
  CHECK(std::abs(acc_re / n) < 0.05);
}

TEST_CASE("radar echo closed forms") {
  const ArrayConfig arrays{8, 4, 4, 0.5};
  const int t = 10;

  SUBCASE("zero gains give a zero matrix") {
    Scene s = single_path_scene(12.5, -20.5, cd{0.0, 0.0}, cd{1.0, 0.0});
    const CMatrix x = CMatrix::Random(8, t);
    CHECK(radar_echo(s, arrays, x, NoiseConfig{}).norm() == 0.0);
  }

  SUBCASE("single broadside target with all-ones transmit") {
    Scene s = single_path_scene(0.0, 0.0, cd{1.0, 0.0}, cd{1.0, 0.0});
    const double p = 2.0;
    const double amp = std::sqrt(p / 8.0);
    const CMatrix x = amp * CMatrix::Ones(8, t);
    const CMatrix y = radar_echo(s, arrays, x, NoiseConfig{});
    // a(0) = 1, so y = amp * N_t * ones
    CHECK((y - amp * 8.0 * CMatrix::Ones(8, t)).norm() < 1e-12);
  }

  SUBCASE("noiseless echo column space lies in span of the steering matrix") {
    Rng rng = make_rng(23);
    const Scene s = generate_scene(4, 2, 180, rng);
    const CMatrix x = cn_matrix(8, t, 1.0, rng);
    const CMatrix y = echo_matrix(s, arrays, x);
    const CMatrix q = orth(steering_matrix(s.target_angles_deg, 8, 0.5));
    CHECK((y - q * (q.adjoint() * y)).norm() < 1e-10 * y.norm());
  }

  SUBCASE("noise separates bit-exactly from the clean echo") {
    Rng rng = make_rng(29);
    const Scene s = generate_scene(4, 2, 180, rng);
    const CMatrix x = cn_matrix(8, t, 1.0, rng);
    NoiseConfig noise;
    noise.sigma2_radar = 0.3;
    noise.rng_seed = 99;
    const CMatrix noisy = radar_echo(s, arrays, x, noise);
    Rng noise_rng = make_rng(99, {1u});
    CMatrix expect = echo_matrix(s, arrays, x);
    expect += cn_matrix(8, t, 0.3, noise_rng);
    CHECK((noisy - expect).norm() == 0.0);
  }

  SUBCASE("dimension mismatch rejected") {
    Scene s = single_path_scene(0.0, 0.0, cd{1.0, 0.0}, cd{1.0, 0.0});
    CHECK_THROWS_AS(radar_echo(s, arrays, CMatrix::Ones(7, t), NoiseConfig{}),
                    std::invalid_argument);
  }
}

TEST_CASE("downlink channel structure") {
  const ArrayConfig arrays{64, 10, 16, 0.5};

  SUBCASE("single broadside path gives the all-ones matrix") {
    Scene s = single_path_scene(0.0, 0.0, cd{1.0, 0.0}, cd{1.0, 0.0});
    const CMatrix h = dl_channel(s, arrays);
    CHECK((h - CMatrix::Ones(10, 64)).norm() < 1e-12);
  }

  SUBCASE("rank equals the path count") {
    Rng rng = make_rng(31);
    const Scene s = generate_scene(8, 4, 180, rng);
    const CMatrix h = dl_channel(s, arrays);
    Eigen::JacobiSVD<CMatrix> svd(h);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-8 * sv(0)) ++rank;
    CHECK(rank == 4);
  }

  SUBCASE("factored form matches the per-path sum") {
    Rng rng = make_rng(37);
    const Scene s = generate_scene(6, 3, 180, rng);
    const CMatrix h = dl_channel(s, arrays);
    CMatrix sum = CMatrix::Zero(10, 64);
    for (int l = 0; l < 3; ++l)
      sum += s.comm_gains[static_cast<std::size_t>(l)] *
             steering_vector(s.ue_aoas_deg[static_cast<std::size_t>(l)], 10, 0.5) *
             steering_vector(s.target_angles_deg[static_cast<std::size_t>(l)], 64, 0.5)
                 .transpose();
    CHECK((h - sum).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("uplink is the transpose channel") {
  const ArrayConfig arrays{16, 6, 8, 0.5};
  Rng rng = make_rng(41);
  const Scene s = generate_scene(5, 3, 180, rng);
  const CMatrix x = cn_matrix(6, 9, 1.0, rng);
  const CMatrix y = ul_received(s, arrays, x, NoiseConfig{});
  CHECK((y - dl_channel(s, arrays).transpose() * x).norm() < 1e-10);

  SUBCASE("zero input is pure noise with the configured variance") {
    NoiseConfig noise;
    noise.sigma2_ul = 2.0;
    noise.rng_seed = 5;
    const CMatrix pure = ul_received(s, arrays, CMatrix::Zero(6, 4000), noise);
    CHECK(pure.squaredNorm() / (16.0 * 4000.0) == Approx(2.0).epsilon(0.05));
  }

  SUBCASE("matched single-path input reproduces the BS steering vector") {
    Scene one = single_path_scene(0.0, 0.0, cd{1.0, 0.0}, cd{1.0, 0.0});
    const CMatrix x = CMatrix::Ones(6, 1) / 6.0;  // b*(0) / N_r
    const CMatrix y = ul_received(one, arrays, x, NoiseConfig{});
    CHECK((y - steering_vector(0.0, 16, 0.5)).norm() < 1e-12);
  }
}

TEST_CASE("scene text round-trip") {
  Rng rng = make_rng(43);
  const Scene s = generate_scene(8, 4, 180, rng);
  const std::string path =
      (std::filesystem::temp_directory_path() / "dfrc_scene_roundtrip.txt").string();
  save_scene(s, path);
  const Scene back = load_scene(path);
  CHECK(back.target_angles_deg == s.target_angles_deg);
  CHECK(back.target_gains == s.target_gains);
  CHECK(back.comm_path_count == s.comm_path_count);
  CHECK(back.ue_aoas_deg == s.ue_aoas_deg);
  CHECK(back.comm_gains == s.comm_gains);
  std::remove(path.c_str());
}

TEST_CASE("scene validation") {
  Scene s;
  s.target_angles_deg = {100.0};
  s.target_gains = {cd{1.0, 0.0}};
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.target_angles_deg = {10.0};
  s.comm_path_count = 2;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
