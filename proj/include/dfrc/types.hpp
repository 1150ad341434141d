// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace dfrc {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Deterministic generator for a (seed, stream...) tuple. Distinct streams
/// (e.g. per trial, per noise source) never share state.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint32_t> stream = {}) {
  std::vector<std::uint32_t> words;
  words.push_back(static_cast<std::uint32_t>(seed & 0xffffffffu));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (auto s : stream) words.push_back(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// One draw from CN(0, variance): real and imaginary parts are independent
/// N(0, variance/2). Real part is always drawn first.
inline cd sample_cn(Rng& rng, double variance = 1.0) {
  std::normal_distribution<double> n(0.0, std::sqrt(variance / 2.0));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

/// Matrix of i.i.d. CN(0, variance) entries, filled column-major.
inline CMatrix cn_matrix(Eigen::Index rows, Eigen::Index cols, double variance, Rng& rng) {
  CMatrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = sample_cn(rng, variance);
  return m;
}

/// Uniformly spaced angle grid in degrees, inclusive of both endpoints.
struct AngleGrid {
  double start_deg = -90.0;
  double stop_deg = 90.0;
  double step_deg = 0.1;

  std::vector<double> points() const {
    std::vector<double> g;
    const auto n = static_cast<std::size_t>((stop_deg - start_deg) / step_deg + 0.5);
    g.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) g.push_back(start_deg + static_cast<double>(i) * step_deg);
    return g;
  }
};

}  // namespace dfrc
