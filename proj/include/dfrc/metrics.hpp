// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "dfrc/types.hpp"

namespace dfrc {

/// Compensated (Kahan) summation so aggregate statistics do not depend on
/// trial execution order beyond ~1e-12.
double kahan_sum(const std::vector<double>& values);

struct MeanStderr {
  double mean = 0.0;
  double se = 0.0;
  int n = 0;
};

MeanStderr mean_stderr(const std::vector<double>& values);

/// 10*log10(||est - truth||_F^2 / ||truth||_F^2), capped below at -300 dB.
/// A zero truth matrix is rejected.
double nmse_db(const CMatrix& estimate, const CMatrix& truth);

/// Greedy one-to-one nearest matching; returns one absolute error per truth
/// angle, +inf for truths left unmatched (fewer estimates than truths).
std::vector<double> match_errors_deg(const std::vector<double>& estimated_deg,
                                     const std::vector<double>& truth_deg);

/// RMS of the matched per-target errors.
double rmse_deg(const std::vector<double>& estimated_deg, const std::vector<double>& truth_deg);

double rms(const std::vector<double>& values);

}  // namespace dfrc
