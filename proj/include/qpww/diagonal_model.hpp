#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

namespace qpww {

/// d_j = m1 j + (1 + m_half) sqrt|j| + m0 sign(j) + r_j, with r_j stored for
/// |j| <= r_bound() and zero beyond.
struct DiagonalModel {
  double m1 = 0.0;
  double m_half = 0.0;
  double m0 = 0.0;
  /// r_j at index j + r_bound().
  std::vector<double> r;
  /// Root-mean-square residual of the least-squares fit.
  double fit_residual = 0.0;

  long r_bound() const { return r.empty() ? 0 : static_cast<long>(r.size() / 2); }
  double r_at(long j) const {
    const long b = r_bound();
    return (r.empty() || j < -b || j > b) ? 0.0 : r[static_cast<std::size_t>(j + b)];
  }
  double d(long j) const {
    if (j == 0) return 0.0;
    const double s = j > 0 ? 1.0 : -1.0;
    return m1 * static_cast<double>(j) + (1.0 + m_half) * std::sqrt(std::abs(static_cast<double>(j))) +
           m0 * s + r_at(j);
  }
  /// sup_j |j|^{-1/2} |r_j|.
  double r_weighted_sup() const {
    double m = 0.0;
    const long b = r_bound();
    for (long j = -b; j <= b; ++j)
      if (j != 0) m = std::max(m, std::abs(r_at(j)) / std::sqrt(std::abs(static_cast<double>(j))));
    return m;
  }
  double r_sup() const {
    double m = 0.0;
    for (double v : r) m = std::max(m, std::abs(v));
    return m;
  }
};

}  // namespace qpww
