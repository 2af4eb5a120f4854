#pragma once

// Gravity water waves in Zakharov-Craig-Sulem form,
//
//   eta_t = G(eta) psi,
//   psi_t = -g eta - psi_x^2 / 2 + (eta_x psi_x + G(eta) psi)^2 / (2 (1 + eta_x^2)),
//
// on the zero-mean subspace. The spatial means evolve apart from the rest:
// mean(eta) is constant and mean(psi) drifts with slope -g mean(eta); they
// are carried as scalar side channels by the integrator.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qpww/dno.hpp"
#include "qpww/error.hpp"
#include "qpww/spectral.hpp"

namespace qpww::wavesys {

using spectral::cplx;
using spectral::Field;
using spectral::Grid;
using spectral::ModeSpace;
using spectral::Spectrum;

struct WaveConfig {
  dno::DnoConfig dno{};
  double gravity = 1.0;
};

/// Phase-space point (eta, psi); both zero mean and real valued.
struct SurfaceState {
  Field eta;
  Field psi;

  explicit SurfaceState(const ModeSpace& s) : eta(s), psi(s) {}
  SurfaceState(Field e, Field p) : eta(std::move(e)), psi(std::move(p)) {
    if (!eta.space().compatible(psi.space()))
      throw InvalidArgument("SurfaceState: eta and psi on different mode spaces");
  }
  const ModeSpace& space() const { return eta.space(); }

  SurfaceState& operator+=(const SurfaceState& o) {
    eta += o.eta;
    psi += o.psi;
    return *this;
  }
  SurfaceState& operator*=(double a) {
    eta *= a;
    psi *= a;
    return *this;
  }
  friend SurfaceState operator+(SurfaceState a, const SurfaceState& b) { return a += b; }
  friend SurfaceState operator*(double a, SurfaceState s) { return s *= a; }
  friend SurfaceState operator-(SurfaceState a, const SurfaceState& b) {
    a.eta -= b.eta;
    a.psi -= b.psi;
    return a;
  }
  double norm() const { return std::hypot(eta.norm(), psi.norm()); }
};

/// Vector field value with the removed psi-mean reported separately.
struct Tangent {
  SurfaceState rate;
  /// Mean (x- and torus-average) of the nonlinear part of psi_t; zero for
  /// the exact system, so its size measures truncation error.
  double psi_mean_rate = 0.0;
  /// Largest zero-wavenumber coefficient removed from psi_t.
  double removed_mean = 0.0;
};

namespace detail {

inline void clear_zero_wavenumber(Field& f, double* removed = nullptr) {
  for (std::size_t b = 0; b < f.size(); ++b) {
    if (f.space().box_wavenumber(b) == 0) {
      if (removed) *removed = std::max(*removed, std::abs(f[b]));
      f[b] = 0.0;
    }
  }
}

inline double mean_coefficient(const Field& f) {
  const std::vector<int> zero(static_cast<std::size_t>(f.space().dim()), 0);
  return f.at(zero).real();
}

}  // namespace detail

/// X_H(s). With linear_only the linearization at the flat state is used.
inline Tangent vector_field(const SurfaceState& s, const WaveConfig& cfg = {},
                            bool linear_only = false) {
  const auto& sp = s.space();
  const double g = cfg.gravity;
  if (linear_only) {
    Tangent t{SurfaceState(spectral::multiplier_apply(s.psi, spectral::Multiplier::abs_d()),
                           cplx(-g) * s.eta)};
    detail::clear_zero_wavenumber(t.rate.eta);
    detail::clear_zero_wavenumber(t.rate.psi);
    return t;
  }
  const Spectrum eta_hat = s.eta.to_spectrum();
  const Spectrum psi_hat = s.psi.to_spectrum();
  const Grid eta_g = spectral::to_physical(sp, eta_hat);
  dno::Surface surf(eta_g, cfg.dno.order);
  const Spectrum gpsi_hat = dno::apply_spectrum(sp, surf, psi_hat, cfg.dno);
  auto ddx = [](long j) { return cplx(0.0, static_cast<double>(j)); };
  const Grid eta_x = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, eta_hat, ddx));
  const Grid psi_x = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, psi_hat, ddx));
  const Grid gpsi = spectral::to_physical(sp, gpsi_hat);

  Grid rate(eta_g.size());
  for (std::size_t i = 0; i < rate.size(); ++i) {
    const double ex = eta_x[i].real(), px = psi_x[i].real(), gp = gpsi[i].real();
    const double n = ex * px + gp;
    rate[i] = -0.5 * px * px + 0.5 * n * n / (1.0 + ex * ex);
  }
  Field psi_rate = Field::from_grid(sp, rate);
  Tangent t{SurfaceState(Field::from_spectrum(sp, gpsi_hat), std::move(psi_rate))};
  t.psi_mean_rate = detail::mean_coefficient(t.rate.psi);
  detail::clear_zero_wavenumber(t.rate.psi, &t.removed_mean);
  t.rate.psi -= cplx(g) * s.eta;
  detail::clear_zero_wavenumber(t.rate.psi);
  detail::clear_zero_wavenumber(t.rate.eta);
  return t;
}

/// H = 1/2 int psi G(eta) psi dx + g/2 int eta^2 dx (circle states).
inline double hamiltonian(const SurfaceState& s, const WaveConfig& cfg = {}) {
  const Field gpsi = dno::dno_apply(s.eta, s.psi, cfg.dno);
  const double two_pi = 2.0 * spectral::kPi;
  return 0.5 * two_pi * spectral::mean_product(s.psi, gpsi).real() +
         0.5 * cfg.gravity * two_pi * spectral::mean_product(s.eta, s.eta).real();
}

/// M = int eta_x psi dx (circle states).
inline double momentum(const SurfaceState& s) {
  return 2.0 * spectral::kPi * spectral::mean_product(spectral::x_derivative(s.eta), s.psi).real();
}

// ---------------------------------------------------------------------------
// Complex coordinates u = (|D|^{-1/4} eta + i |D|^{1/4} psi) / sqrt 2.

/// Coefficients u_j on the box of the state; the j = 0 slots stay zero.
struct ComplexState {
  Field u;
};

inline ComplexState to_complex(const SurfaceState& s) {
  const auto& sp = s.space();
  Field u(sp);
  for (std::size_t b = 0; b < u.size(); ++b) {
    const long j = sp.box_wavenumber(b);
    if (j == 0) {
      if (!spectral::negligible_mean(s.eta, b) || !spectral::negligible_mean(s.psi, b))
        throw InvalidArgument("to_complex: state has a nonzero mean component");
      continue;
    }
    const double q = std::pow(static_cast<double>(std::labs(j)), 0.25);
    u[b] = (s.eta[b] / q + cplx(0.0, 1.0) * q * s.psi[b]) / std::sqrt(2.0);
  }
  return {std::move(u)};
}

inline SurfaceState from_complex(const ComplexState& c) {
  const auto& sp = c.u.space();
  SurfaceState s(sp);
  for (std::size_t b = 0; b < c.u.size(); ++b) {
    const long j = sp.box_wavenumber(b);
    if (j == 0) {
      if (c.u[b] != cplx{}) throw InvalidArgument("from_complex: u has a zero-wavenumber mode");
      continue;
    }
    const double q = std::pow(static_cast<double>(std::labs(j)), 0.25);
    const cplx up = c.u[b];
    const cplx um = std::conj(c.u[sp.box_negative(b)]);
    s.eta[b] = q * (up + um) / std::sqrt(2.0);
    s.psi[b] = (up - um) / (std::sqrt(2.0) * cplx(0.0, 1.0) * q);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Symmetries.

/// Involution S(eta, psi)(x) = (eta(-x), -psi(-x)).
inline SurfaceState involution(const SurfaceState& s) {
  return SurfaceState(spectral::reflect(s.eta), cplx(-1.0) * spectral::reflect(s.psi));
}

struct SymmetryReport {
  /// |X_H(S s) + S X_H(s)|.
  double reversibility_defect = 0.0;
  /// Odd part of X_H(s) when s is x-even; empty otherwise.
  std::optional<double> parity_defect;
};

inline SymmetryReport symmetry_check(const SurfaceState& s, const WaveConfig& cfg = {}) {
  SymmetryReport r;
  const SurfaceState xs = vector_field(s, cfg).rate;
  const SurfaceState xss = vector_field(involution(s), cfg).rate;
  r.reversibility_defect = (xss + involution(xs)).norm();
  auto odd = [](const Field& f) { return 0.5 * (f - spectral::reflect(f)).norm(); };
  const double scale = std::max(1.0, s.norm());
  if (odd(s.eta) <= 1e-14 * scale && odd(s.psi) <= 1e-14 * scale)
    r.parity_defect = std::hypot(odd(xs.eta), odd(xs.psi));
  return r;
}

// ---------------------------------------------------------------------------
// Validation integrator.

struct EvolveOptions {
  /// Snapshot every this many steps (the last step is always recorded).
  int save_every = 100;
  /// Modes j = 1..n_modes exported as amplitudes 2|eta_j|.
  int n_modes = 8;
  /// Step-doubling local error check every this many steps; 0 disables.
  int error_check_every = 1000;
  /// Relative local error above which the step size is rejected.
  double error_tolerance = 1e-6;
  /// Initial mean modes (side channels).
  double mean_eta = 0.0;
  double mean_psi = 0.0;
  /// Keep full states at snapshot times.
  bool keep_states = false;
};

struct Snapshot {
  double t = 0.0;
  double hamiltonian = 0.0;
  double momentum = 0.0;
  double mean_eta = 0.0;
  double mean_psi = 0.0;
  std::vector<double> amplitudes;
};

struct ConservationReport {
  double max_rel_energy_drift = 0.0;
  double max_rel_momentum_drift = 0.0;
  double max_abs_momentum_drift = 0.0;
  double max_mean_eta_drift = 0.0;
  /// max |mean_psi(t) + g mean_eta t - mean_psi(0)|.
  double max_mean_psi_defect = 0.0;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  std::vector<SurfaceState> states;
  SurfaceState final_state;
  ConservationReport report;
};

namespace detail {

struct Extended {
  SurfaceState s;
  double eta0;
  double psi0;
};

inline Extended rate(const Extended& x, const WaveConfig& cfg) {
  Tangent t = vector_field(x.s, cfg);
  return {std::move(t.rate), 0.0, -cfg.gravity * x.eta0 + t.psi_mean_rate};
}

inline Extended axpy(const Extended& x, double a, const Extended& k) {
  return {x.s + a * k.s, x.eta0 + a * k.eta0, x.psi0 + a * k.psi0};
}

inline Extended rk4_step(const Extended& x, double dt, const WaveConfig& cfg) {
  const Extended k1 = rate(x, cfg);
  const Extended k2 = rate(axpy(x, 0.5 * dt, k1), cfg);
  const Extended k3 = rate(axpy(x, 0.5 * dt, k2), cfg);
  const Extended k4 = rate(axpy(x, dt, k3), cfg);
  Extended out = x;
  out.s += (dt / 6.0) * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s);
  out.eta0 += dt / 6.0 * (k1.eta0 + 2.0 * k2.eta0 + 2.0 * k3.eta0 + k4.eta0);
  out.psi0 += dt / 6.0 * (k1.psi0 + 2.0 * k2.psi0 + 2.0 * k3.psi0 + k4.psi0);
  return out;
}

}  // namespace detail

/// Classical RK4 with fixed step dt up to time T.
inline Trajectory evolve(const SurfaceState& s0, double T, double dt, const WaveConfig& cfg = {},
                         const EvolveOptions& opt = {}) {
  if (!(dt > 0.0) || !(T >= 0.0)) throw InvalidArgument("evolve: need dt > 0 and T >= 0");
  if (s0.space().dim() != 1) throw InvalidArgument("evolve: circle states only");
  SurfaceState start = s0;
  for (Field* f : {&start.eta, &start.psi}) {
    const std::vector<int> zero{0};
    const std::size_t b = *f->space().box_index(zero);
    if (!spectral::negligible_mean(*f, b))
      throw InvalidArgument("evolve: state must be zero mean; pass means as side channels");
    (*f)[b] = 0.0;
  }
  const auto steps = static_cast<long>(std::llround(T / dt));

  auto snapshot = [&](double t, const detail::Extended& x) {
    Snapshot sn;
    sn.t = t;
    sn.hamiltonian = hamiltonian(x.s, cfg);
    sn.momentum = momentum(x.s);
    sn.mean_eta = x.eta0;
    sn.mean_psi = x.psi0;
    for (int j = 1; j <= opt.n_modes; ++j) {
      const int k[1] = {j};
      sn.amplitudes.push_back(2.0 * std::abs(x.s.eta.at(k)));
    }
    return sn;
  };

  detail::Extended x{start, opt.mean_eta, opt.mean_psi};
  Trajectory traj{{}, {}, start, {}};
  traj.snapshots.push_back(snapshot(0.0, x));
  if (opt.keep_states) traj.states.push_back(x.s);
  const Snapshot first = traj.snapshots.front();

  auto account = [&](const Snapshot& sn) {
    auto& r = traj.report;
    const double h0 = std::abs(first.hamiltonian);
    if (h0 > 0.0)
      r.max_rel_energy_drift =
          std::max(r.max_rel_energy_drift, std::abs(sn.hamiltonian - first.hamiltonian) / h0);
    const double dm = std::abs(sn.momentum - first.momentum);
    r.max_abs_momentum_drift = std::max(r.max_abs_momentum_drift, dm);
    if (std::abs(first.momentum) > 0.0)
      r.max_rel_momentum_drift = std::max(r.max_rel_momentum_drift, dm / std::abs(first.momentum));
    r.max_mean_eta_drift = std::max(r.max_mean_eta_drift, std::abs(sn.mean_eta - first.mean_eta));
    r.max_mean_psi_defect =
        std::max(r.max_mean_psi_defect,
                 std::abs(sn.mean_psi + cfg.gravity * first.mean_eta * sn.t - first.mean_psi));
  };

  for (long n = 1; n <= steps; ++n) {
    if (opt.error_check_every > 0 && (n - 1) % opt.error_check_every == 0) {
      const detail::Extended full = detail::rk4_step(x, dt, cfg);
      const detail::Extended half =
          detail::rk4_step(detail::rk4_step(x, 0.5 * dt, cfg), 0.5 * dt, cfg);
      const double err = (full.s - half.s).norm() / 15.0;
      const double scale = std::max(x.s.norm(), 1e-300);
      if (x.s.norm() > 0.0 && err > opt.error_tolerance * scale)
        throw NumericalError("evolve: step rejected at t = " + std::to_string((n - 1) * dt) +
                             " (local error estimate " + std::to_string(err / scale) + ")");
      x = half;
    } else {
      x = detail::rk4_step(x, dt, cfg);
    }
    if (n % opt.save_every == 0 || n == steps) {
      Snapshot sn = snapshot(n * dt, x);
      account(sn);
      traj.snapshots.push_back(std::move(sn));
      if (opt.keep_states) traj.states.push_back(x.s);
    }
  }
  traj.final_state = x.s;
  return traj;
}

/// CSV export: t,H,M,mean_eta,mean_psi,amp_1..amp_K; '.' decimals, LF endings.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t k = traj.snapshots.empty() ? 0 : traj.snapshots.front().amplitudes.size();
  out << "t,H,M,mean_eta,mean_psi";
  for (std::size_t j = 1; j <= k; ++j) out << ",amp_" << j;
  out << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (const auto& sn : traj.snapshots) {
    put(sn.t);
    for (double v : {sn.hamiltonian, sn.momentum, sn.mean_eta, sn.mean_psi}) {
      out << ',';
      put(v);
    }
    for (double a : sn.amplitudes) {
      out << ',';
      put(a);
    }
    out << '\n';
  }
}

}  // namespace qpww::wavesys
