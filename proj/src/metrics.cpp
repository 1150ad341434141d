// SPDX-License-Identifier: Apache-2.0
#include "dfrc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dfrc {

double kahan_sum(const std::vector<double>& values) {
  double sum = 0.0;
  double carry = 0.0;
  for (double v : values) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr ms;
  ms.n = static_cast<int>(values.size());
  if (ms.n == 0) return ms;
  ms.mean = kahan_sum(values) / static_cast<double>(ms.n);
  if (ms.n < 2) return ms;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - ms.mean;
    sq[i] = d * d;
  }
  const double var = kahan_sum(sq) / static_cast<double>(ms.n - 1);
  ms.se = std::sqrt(var / static_cast<double>(ms.n));
  return ms;
}

double nmse_db(const CMatrix& estimate, const CMatrix& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols())
    throw std::invalid_argument("nmse_db: shape mismatch");
  const double den = truth.squaredNorm();
  if (den == 0.0) throw std::invalid_argument("nmse_db: zero truth");
  const double num = (estimate - truth).squaredNorm();
  if (num == 0.0) return -300.0;
  return std::max(-300.0, 10.0 * std::log10(num / den));
}

std::vector<double> match_errors_deg(const std::vector<double>& estimated_deg,
                                     const std::vector<double>& truth_deg) {
  struct Pair {
    double err;
    std::size_t e, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < truth_deg.size(); ++t)
    for (std::size_t e = 0; e < estimated_deg.size(); ++e)
      pairs.push_back({std::abs(estimated_deg[e] - truth_deg[t]), e, t});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.err != b.err) return a.err < b.err;
    if (a.t != b.t) return a.t < b.t;
    return a.e < b.e;
  });
  std::vector<double> errors(truth_deg.size(), std::numeric_limits<double>::infinity());
  std::vector<bool> e_used(estimated_deg.size(), false), t_used(truth_deg.size(), false);
  for (const Pair& p : pairs) {
    if (e_used[p.e] || t_used[p.t]) continue;
    e_used[p.e] = true;
    t_used[p.t] = true;
    errors[p.t] = p.err;
  }
  return errors;
}

double rms(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = values[i] * values[i];
  return std::sqrt(kahan_sum(sq) / static_cast<double>(values.size()));
}

double rmse_deg(const std::vector<double>& estimated_deg, const std::vector<double>& truth_deg) {
  return rms(match_errors_deg(estimated_deg, truth_deg));
}

}  // namespace dfrc
