#pragma once

// Dirichlet-Neumann operator of the infinite-depth fluid domain
// {y < eta(x)}: G(eta)psi = (Phi_y - eta_x Phi_x)|_{y = eta} for the harmonic
// Phi with Phi|_{y=eta} = psi and Phi_y -> 0 as y -> -infinity.
//
// Evaluation is a Taylor expansion in eta. Writing Phi as the harmonic
// extension of a(x) from y = 0 and expanding the boundary traces gives, with
// D = -i d/dx and a = sum_n a_n homogeneous of degree n in eta,
//
//   a_0 = psi,          a_n   = - sum_{m=1..n} eta^m/m! |D|^m a_{n-m},
//   G_0 = |D|,          G_n psi = |D| a_n + D sum_{m=1..n} eta^m/m! D |D|^{m-1} a_{n-m}.
//
// The mean of eta is removed first: the domain is unbounded below, so a
// vertical shift of the surface leaves G unchanged.

#include <cmath>
#include <string>
#include <vector>

#include "qpww/error.hpp"
#include "qpww/spectral.hpp"

namespace qpww::dno {

using spectral::cplx;
using spectral::Field;
using spectral::Grid;
using spectral::ModeSpace;
using spectral::Spectrum;

struct DnoConfig {
  /// Highest retained homogeneity degree M; error is O(|eta|^{M+1}).
  int order = 8;
  /// Term ratio above which a term counts as non-decaying.
  double divergence_ratio = 0.9;
  /// Consecutive non-decaying terms that trigger a divergence error.
  int divergence_run = 3;
};

class DnoDivergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline double spectrum_norm(const Spectrum& s) {
  double acc = 0.0;
  for (const auto& v : s) acc += std::norm(v);
  return std::sqrt(acc);
}

}  // namespace detail

/// Surface elevation prepared for repeated DNO applications: mean-free
/// physical values and the scaled powers eta^m / m!.
class Surface {
 public:
  Surface(const Grid& eta_values, int order) {
    const auto n = eta_values.size();
    double mean = 0.0;
    for (const auto& v : eta_values) mean += v.real();
    mean /= static_cast<double>(n);
    powers_.assign(static_cast<std::size_t>(order) + 1, std::vector<double>(n, 1.0));
    for (int m = 1; m <= order; ++m)
      for (std::size_t g = 0; g < n; ++g)
        powers_[m][g] = powers_[m - 1][g] * (eta_values[g].real() - mean) / m;
  }
  Surface(const Field& eta, int order) : Surface(eta.to_grid(), order) {}

  std::size_t grid_points() const { return powers_.front().size(); }
  int order() const { return static_cast<int>(powers_.size()) - 1; }
  /// eta^m / m! on the grid.
  const std::vector<double>& scaled_power(int m) const { return powers_[m]; }

 private:
  std::vector<std::vector<double>> powers_;
};

/// G(eta) applied to padded-grid coefficients psi on space s; returns
/// padded-grid coefficients. psi may be complex valued and s may carry a
/// wavenumber offset (a momentum block) as long as the grid matches eta's.
inline Spectrum apply_spectrum(const ModeSpace& s, const Surface& surf, const Spectrum& psi,
                               const DnoConfig& cfg) {
  if (surf.grid_points() != s.grid_points() || psi.size() != s.grid_points())
    throw InvalidArgument("dno: surface and potential grids differ");
  const int order = std::min(cfg.order, surf.order());
  auto abs_pow = [](int m) {
    return [m](long j) { return std::pow(static_cast<double>(std::labs(j)), m); };
  };
  auto d_abs_pow = [](int m) {
    return [m](long j) { return static_cast<double>(j) * std::pow(static_cast<double>(std::labs(j)), m); };
  };
  auto abs_d = [](long j) { return static_cast<double>(std::labs(j)); };
  auto d = [](long j) { return static_cast<double>(j); };

  std::vector<Spectrum> a;
  a.reserve(static_cast<std::size_t>(order) + 1);
  a.push_back(psi);
  Spectrum total = spectral::scale_by_wavenumber(s, psi, abs_d);

  const std::size_t n = psi.size();
  double prev_norm = detail::spectrum_norm(total);
  int run = 0;
  for (int order_n = 1; order_n <= order; ++order_n) {
    Grid acc_a(n), acc_g(n);
    for (int m = 1; m <= order_n; ++m) {
      const auto& p = surf.scaled_power(m);
      const Spectrum& prev = a[static_cast<std::size_t>(order_n - m)];
      Grid ga = spectral::to_physical(s, spectral::scale_by_wavenumber(s, prev, abs_pow(m)));
      Grid gg = spectral::to_physical(s, spectral::scale_by_wavenumber(s, prev, d_abs_pow(m - 1)));
      for (std::size_t g = 0; g < n; ++g) {
        acc_a[g] += p[g] * ga[g];
        acc_g[g] += p[g] * gg[g];
      }
    }
    Spectrum an = spectral::to_spectral(s, acc_a);
    for (auto& v : an) v = -v;
    // |D|^m amplifies rounding noise in unresolved modes; keep a_n on the box.
    spectral::restrict_to_box(s, an);
    Spectrum term = spectral::scale_by_wavenumber(s, an, abs_d);
    const Spectrum tg = spectral::scale_by_wavenumber(s, spectral::to_spectral(s, acc_g), d);
    for (std::size_t g = 0; g < n; ++g) {
      term[g] += tg[g];
      total[g] += term[g];
    }
    a.push_back(std::move(an));

    const double tn = detail::spectrum_norm(term);
    // Terms at rounding level (including structural zeros of low orders)
    // carry no decay information.
    const bool resolved = tn > 1e-13 * detail::spectrum_norm(total);
    if (resolved && prev_norm > 0.0 && tn > cfg.divergence_ratio * prev_norm) {
      if (++run >= cfg.divergence_run)
        throw DnoDivergence("dno: expansion terms stopped decaying at order " +
                            std::to_string(order_n) + "; surface too large for order " +
                            std::to_string(cfg.order));
    } else {
      run = 0;
    }
    prev_norm = tn;
  }
  return total;
}

/// Derivative of eta -> G(eta) psi, for the truncated expansion itself, in
/// the direction d_eta (physical values on the padded grid). Differentiates
/// the recursion term by term, so it is exact for the computed operator.
inline Spectrum apply_eta_derivative(const ModeSpace& s, const Surface& surf, const Spectrum& psi,
                                     const Grid& d_eta, const DnoConfig& cfg) {
  if (surf.grid_points() != s.grid_points() || psi.size() != s.grid_points() || d_eta.size() != s.grid_points())
    throw InvalidArgument("dno: surface, potential and direction grids differ");
  const int order = std::min(cfg.order, surf.order());
  const std::size_t n = psi.size();
  auto abs_pow = [](int m) {
    return [m](long j) { return std::pow(static_cast<double>(std::labs(j)), m); };
  };
  auto d_abs_pow = [](int m) {
    return [m](long j) { return static_cast<double>(j) * std::pow(static_cast<double>(std::labs(j)), m); };
  };
  auto abs_d = [](long j) { return static_cast<double>(std::labs(j)); };
  auto d = [](long j) { return static_cast<double>(j); };

  // The surface is mean free, so is the admissible direction.
  std::vector<double> dir(n);
  double mean = 0.0;
  for (const auto& v : d_eta) mean += v.real();
  mean /= static_cast<double>(n);
  for (std::size_t g = 0; g < n; ++g) dir[g] = d_eta[g].real() - mean;

  std::vector<Spectrum> a{psi}, da{Spectrum(n)};
  Spectrum dtotal(n);
  for (int order_n = 1; order_n <= order; ++order_n) {
    Grid acc_a(n), dacc_a(n), dacc_g(n);
    for (int m = 1; m <= order_n; ++m) {
      const auto& p = surf.scaled_power(m);
      const auto& q = surf.scaled_power(m - 1);
      const auto k = static_cast<std::size_t>(order_n - m);
      const Grid ga = spectral::to_physical(s, spectral::scale_by_wavenumber(s, a[k], abs_pow(m)));
      const Grid gg = spectral::to_physical(s, spectral::scale_by_wavenumber(s, a[k], d_abs_pow(m - 1)));
      for (std::size_t g = 0; g < n; ++g) {
        acc_a[g] += p[g] * ga[g];
        dacc_a[g] += q[g] * dir[g] * ga[g];
        dacc_g[g] += q[g] * dir[g] * gg[g];
      }
      if (k == 0) continue;  // da_0 = 0
      const Grid dga = spectral::to_physical(s, spectral::scale_by_wavenumber(s, da[k], abs_pow(m)));
      const Grid dgg = spectral::to_physical(s, spectral::scale_by_wavenumber(s, da[k], d_abs_pow(m - 1)));
      for (std::size_t g = 0; g < n; ++g) {
        dacc_a[g] += p[g] * dga[g];
        dacc_g[g] += p[g] * dgg[g];
      }
    }
    Spectrum an = spectral::to_spectral(s, acc_a), dan = spectral::to_spectral(s, dacc_a);
    for (auto& v : an) v = -v;
    for (auto& v : dan) v = -v;
    spectral::restrict_to_box(s, an);
    spectral::restrict_to_box(s, dan);
    const Spectrum t1 = spectral::scale_by_wavenumber(s, dan, abs_d);
    const Spectrum t2 = spectral::scale_by_wavenumber(s, spectral::to_spectral(s, dacc_g), d);
    for (std::size_t g = 0; g < n; ++g) dtotal[g] += t1[g] + t2[g];
    a.push_back(std::move(an));
    da.push_back(std::move(dan));
  }
  return dtotal;
}

/// G(eta) psi truncated to the box of psi.
inline Field dno_apply(const Field& eta, const Field& psi, const DnoConfig& cfg = {}) {
  if (cfg.order < 0) throw InvalidArgument("dno: expansion order must be >= 0");
  if (!eta.space().compatible(psi.space()))
    throw InvalidArgument("dno: eta and psi live on different mode spaces");
  Surface surf(eta, cfg.order);
  return Field::from_spectrum(psi.space(), apply_spectrum(psi.space(), surf, psi.to_spectrum(), cfg));
}

/// Integral over T of psi1 * G(eta) psi2 (circle fields).
inline double dno_bilinear(const Field& eta, const Field& psi1, const Field& psi2,
                           const DnoConfig& cfg = {}) {
  const Field g = dno_apply(eta, psi2, cfg);
  return 2.0 * spectral::kPi * spectral::mean_product(psi1, g).real();
}

}  // namespace qpww::dno
