#pragma once

// Quartic Birkhoff normal form on the tangential sites,
//
//   H4 = 1/(4 pi) sum_k |k|^3 |u_k|^4
//      + 1/pi sum_{sign k1 = sign k2, |k2| < |k1|} |k1| |k2|^2 |u_k1|^2 |u_k2|^2
//      = 1/2 A I . I,   I_k = |u_k|^2,
//
// and the first-order frequency-to-amplitude map omega = omega_bar + A zeta.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "qpww/error.hpp"
#include "qpww/sites.hpp"

namespace qpww::normalform {

class SingularTwist : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

struct TwistMatrix {
  std::vector<long> sites;
  Eigen::MatrixXd a;

  double determinant() const { return a.determinant(); }
};

inline TwistMatrix twist_matrix(const TangentialSet& s) {
  const int nu = s.nu();
  TwistMatrix t{{s.sites().begin(), s.sites().end()}, Eigen::MatrixXd::Zero(nu, nu)};
  const double pi = std::numbers::pi;
  for (int p = 0; p < nu; ++p) {
    const double kp = static_cast<double>(std::labs(s[p]));
    t.a(p, p) = kp * kp * kp / (2.0 * pi);
    for (int q = 0; q < p; ++q) {
      if ((s[p] > 0) != (s[q] > 0)) continue;
      const double kq = static_cast<double>(std::labs(s[q]));
      const double hi = std::max(kp, kq), lo = std::min(kp, kq);
      t.a(p, q) = t.a(q, p) = hi * lo * lo / pi;
    }
  }
  return t;
}

namespace detail {

inline void check_size(std::size_t n, int nu, const char* what) {
  if (static_cast<int>(n) != nu) throw InvalidArgument(std::string(what) + ": length differs from nu");
}

}  // namespace detail

/// A zeta.
inline std::vector<double> frequency_shift(const TwistMatrix& t, std::span<const double> zeta) {
  const int nu = static_cast<int>(t.a.rows());
  detail::check_size(zeta.size(), nu, "frequency_amplitude");
  std::vector<double> w(zeta.size(), 0.0);
  for (int p = 0; p < nu; ++p) {
    if (zeta[p] < 0.0) throw InvalidArgument("frequency_amplitude: negative action");
    for (int q = 0; q < nu; ++q) w[p] += t.a(p, q) * zeta[q];
  }
  return w;
}

/// omega_bar + A zeta.
inline std::vector<double> frequency_amplitude(const TwistMatrix& t, std::span<const double> omega_bar,
                                               std::span<const double> zeta) {
  detail::check_size(omega_bar.size(), static_cast<int>(t.a.rows()), "frequency_amplitude");
  auto w = frequency_shift(t, zeta);
  for (std::size_t p = 0; p < w.size(); ++p) w[p] += omega_bar[p];
  return w;
}

inline std::vector<double> frequency_amplitude(const TangentialSet& s, std::span<const double> zeta) {
  return frequency_amplitude(twist_matrix(s), s.omega_bar(), zeta);
}

struct InverseResult {
  std::vector<double> zeta;
  /// Some component is <= 0: the target lies outside the bifurcation cone.
  bool outside_cone = false;
};

/// Solves A zeta = omega_target - omega_bar.
inline InverseResult invert_frequency_amplitude(const TwistMatrix& t, std::span<const double> omega_bar,
                                                std::span<const double> omega_target) {
  const auto nu = t.a.rows();
  detail::check_size(omega_target.size(), static_cast<int>(nu), "invert_frequency_amplitude");
  detail::check_size(omega_bar.size(), static_cast<int>(nu), "invert_frequency_amplitude");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(t.a);
  lu.setThreshold(1e-12);
  if (lu.rank() < nu) throw SingularTwist("invert_frequency_amplitude: twist matrix is singular");
  Eigen::VectorXd rhs(nu);
  for (Eigen::Index p = 0; p < nu; ++p) rhs(p) = omega_target[p] - omega_bar[p];
  const Eigen::VectorXd z = lu.solve(rhs);
  InverseResult r{{z.data(), z.data() + nu}, false};
  for (double v : r.zeta) r.outside_cone = r.outside_cone || v <= 0.0;
  return r;
}

inline InverseResult invert_frequency_amplitude(const TangentialSet& s,
                                                std::span<const double> omega_target) {
  const auto wb = s.omega_bar();
  return invert_frequency_amplitude(twist_matrix(s), wb, omega_target);
}

/// sum_k sqrt|k| I_k + 1/2 A I . I.
inline double birkhoff_energy(const TangentialSet& s, std::span<const double> actions) {
  detail::check_size(actions.size(), s.nu(), "birkhoff_energy");
  const auto t = twist_matrix(s);
  const auto wb = s.omega_bar();
  double h = 0.0;
  for (int p = 0; p < s.nu(); ++p) {
    if (actions[p] < 0.0) throw InvalidArgument("birkhoff_energy: negative action");
    h += wb[p] * actions[p];
    for (int q = 0; q < s.nu(); ++q) h += 0.5 * t.a(p, q) * actions[p] * actions[q];
  }
  return h;
}

/// Action-angle coordinates u_k = sqrt(I_k) e^{-i theta_k} on the sites.
struct ActionAngleState {
  std::vector<double> actions;
  std::vector<double> angles;
};

inline ActionAngleState to_action_angle(std::span<const std::complex<double>> u_sites) {
  ActionAngleState s;
  for (const auto& u : u_sites) {
    if (u == std::complex<double>{}) throw InvalidArgument("to_action_angle: zero amplitude has no angle");
    s.actions.push_back(std::norm(u));
    s.angles.push_back(-std::arg(u));
  }
  return s;
}

inline std::vector<std::complex<double>> from_action_angle(const ActionAngleState& s) {
  if (s.actions.size() != s.angles.size()) throw InvalidArgument("from_action_angle: size mismatch");
  std::vector<std::complex<double>> u;
  for (std::size_t i = 0; i < s.actions.size(); ++i) {
    if (!(s.actions[i] > 0.0)) throw InvalidArgument("from_action_angle: actions must be positive");
    u.push_back(std::polar(std::sqrt(s.actions[i]), -s.angles[i]));
  }
  return u;
}

}  // namespace qpww::normalform
