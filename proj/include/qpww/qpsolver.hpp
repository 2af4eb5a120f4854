#pragma once

// Traveling quasi-periodic solutions U(phi, x) = U~(phi - v x) on the
// Theta-torus T^nu, with v the signed tangential sites. The profile is a pair
// of real fields (eta~, psi~) on ModeSpace::traveling(v, L); torus mode k
// carries x-wavenumber -v . k, so x-derivatives, the DNO and pointwise
// products act slice by slice exactly as on the circle.
//
// The torus equation is F = omega . d_Theta U~ - X_H(U~) = 0 on modes with
// nonzero wavenumber (zero-wavenumber modes of eta~ vanish by mean
// conservation, those of psi~ are a gauge). Newton solves for the profile and
// omega with the actions and phases of the tangential coordinates
// u_{-e_i} = sqrt(zeta_i) prescribed.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <thread>
#include <utility>
#include <vector>

#include "qpww/dno.hpp"
#include "qpww/error.hpp"
#include "qpww/normalform.hpp"
#include "qpww/sites.hpp"
#include "qpww/spectral.hpp"
#include "qpww/wavesys.hpp"

namespace qpww::qpsolver {

using spectral::cplx;
using spectral::Field;
using spectral::Grid;
using spectral::ModeSpace;
using spectral::Spectrum;
using wavesys::SurfaceState;
using wavesys::WaveConfig;

struct TorusEmbedding {
  TangentialSet sites;
  SurfaceState profile;
  std::vector<double> omega;

  std::vector<int> velocity() const { return sites.velocity(); }
  const ModeSpace& space() const { return profile.space(); }
  int bound() const { return profile.space().bound(); }
};

inline ModeSpace embedding_space(const TangentialSet& s, int bound) {
  return ModeSpace::traveling(s.velocity(), bound);
}

inline TorusEmbedding zero_embedding(const TangentialSet& s, int bound) {
  return {s, SurfaceState(embedding_space(s, bound)), s.omega_bar()};
}

/// Box index of the tangential mode -e_i (x-wavenumber j_i).
inline std::size_t tangential_index(const ModeSpace& sp, int i) {
  std::vector<int> k(static_cast<std::size_t>(sp.dim()), 0);
  k[static_cast<std::size_t>(i)] = -1;
  const auto b = sp.box_index(k);
  if (!b) throw InvalidArgument("qpsolver: mode bound must be at least 1");
  return *b;
}

/// eta~ = sum_i sqrt(2 zeta_i) |j_i|^{1/4} cos Theta_i,
/// psi~ = -sum_i sqrt(2 zeta_i) |j_i|^{-1/4} sin Theta_i, omega = omega_bar + A zeta.
inline TorusEmbedding first_order_ansatz(const TangentialSet& s, std::span<const double> zeta, int bound) {
  if (static_cast<int>(zeta.size()) != s.nu()) throw InvalidArgument("first_order_ansatz: zeta length differs from nu");
  TorusEmbedding e = zero_embedding(s, bound);
  e.omega = normalform::frequency_amplitude(s, zeta);
  const auto& sp = e.space();
  for (int i = 0; i < s.nu(); ++i) {
    if (zeta[i] < 0.0) throw InvalidArgument("first_order_ansatz: negative action");
    const double aj = std::abs(static_cast<double>(s[i]));
    const double a = std::sqrt(2.0 * zeta[i]) * std::pow(aj, 0.25);
    const double c = std::sqrt(2.0 * zeta[i]) * std::pow(aj, -0.25);
    const std::size_t m = tangential_index(sp, i), p = sp.box_negative(m);
    e.profile.eta[m] += 0.5 * a;
    e.profile.eta[p] += 0.5 * a;
    // -c sin Theta = -c (e^{i Theta} - e^{-i Theta}) / (2i)
    e.profile.psi[p] += cplx(0.0, 0.5 * c);
    e.profile.psi[m] += cplx(0.0, -0.5 * c);
  }
  return e;
}

/// u_{-e_i} = (|j|^{-1/4} eta_k + i |j|^{1/4} psi_k) / sqrt 2.
inline cplx tangential_coordinate(const TorusEmbedding& e, int i) {
  const std::size_t b = tangential_index(e.space(), i);
  const double q = std::pow(std::abs(static_cast<double>(e.sites[i])), 0.25);
  return (e.profile.eta[b] / q + cplx(0.0, q) * e.profile.psi[b]) / std::sqrt(2.0);
}

inline std::vector<double> actions(const TorusEmbedding& e) {
  std::vector<double> a;
  for (int i = 0; i < e.sites.nu(); ++i) a.push_back(std::norm(tangential_coordinate(e, i)));
  return a;
}

/// Same embedding on a box of a different bound (zero padding or truncation).
inline TorusEmbedding resize(const TorusEmbedding& e, int bound) {
  TorusEmbedding out = zero_embedding(e.sites, bound);
  out.omega = e.omega;
  const auto& from = e.space();
  const auto& to = out.space();
  for (std::size_t b = 0; b < from.box_size(); ++b) {
    const auto t = to.box_index(from.box_mode(b));
    if (!t) continue;
    out.profile.eta[*t] = e.profile.eta[b];
    out.profile.psi[*t] = e.profile.psi[b];
  }
  return out;
}

/// Theta -> Theta + shift on both components.
inline TorusEmbedding shifted(const TorusEmbedding& e, std::span<const double> shift) {
  TorusEmbedding out = e;
  out.profile = SurfaceState(spectral::torus_shift(e.profile.eta, shift), spectral::torus_shift(e.profile.psi, shift));
  return out;
}

/// The time-reversed solution S U(-t, x): velocity -v, profile (eta~(-Theta), -psi~(-Theta)).
inline TorusEmbedding reversed(const TorusEmbedding& e) {
  std::vector<long> neg;
  for (long j : e.sites.sites()) neg.push_back(-j);
  TorusEmbedding out = zero_embedding(TangentialSet(std::move(neg)), e.bound());
  out.omega = e.omega;
  const auto& sp = e.space();
  for (std::size_t b = 0; b < sp.box_size(); ++b) {
    out.profile.eta[sp.box_negative(b)] = e.profile.eta[b];
    out.profile.psi[sp.box_negative(b)] = -e.profile.psi[b];
  }
  return out;
}

struct ResidualConfig {
  WaveConfig wave{};
  /// Sobolev index of the reported norm.
  double sobolev = 4.0;
  /// Replace X_H by its linearization at the flat state.
  bool linear_only = false;
};

struct Residual {
  SurfaceState field;
  /// H^s norm of (F_eta, F_psi).
  double norm = 0.0;
  double l2 = 0.0;
};

inline Residual residual(const TorusEmbedding& e, const ResidualConfig& cfg = {}) {
  if (static_cast<int>(e.omega.size()) != e.sites.nu()) throw InvalidArgument("residual: omega length differs from nu");
  const auto x = wavesys::vector_field(e.profile, cfg.wave, cfg.linear_only).rate;
  SurfaceState f(spectral::torus_directional_derivative(e.profile.eta, e.omega) - x.eta,
                 spectral::torus_directional_derivative(e.profile.psi, e.omega) - x.psi);
  wavesys::detail::clear_zero_wavenumber(f.eta);
  wavesys::detail::clear_zero_wavenumber(f.psi);
  Residual r{std::move(f)};
  r.norm = std::hypot(spectral::sobolev_norm(r.field.eta, cfg.sobolev), spectral::sobolev_norm(r.field.psi, cfg.sobolev));
  r.l2 = r.field.norm();
  return r;
}

/// How the eta-derivative of G(eta) psi is formed.
enum class ShapeDerivative {
  /// Term-by-term derivative of the truncated expansion: the exact
  /// differential of the computed vector field.
  expansion,
  /// -G(B d eta) - d_x(V d eta), exact for the untruncated operator.
  formula,
};

/// Differential of X_H at a state u:
///   d eta_t = dG,
///   d psi_t = -g d eta - psi_x d psi_x + B (d eta_x psi_x + eta_x d psi_x + dG) - B^2 eta_x d eta_x,
///   dG = G d psi + G'(eta)[d eta] psi,
/// with B = (G psi + eta_x psi_x) / (1 + eta_x^2) and V = psi_x - B eta_x.
/// Zero-wavenumber components of the output are removed.
class Linearization {
 public:
  Linearization(const SurfaceState& u, const WaveConfig& cfg, ShapeDerivative mode = ShapeDerivative::expansion)
      : space_(u.space()), cfg_(linear_config(cfg)), mode_(mode), surf_(u.eta.to_grid(), cfg.dno.order) {
    const auto& sp = space_;
    const Spectrum eh = u.eta.to_spectrum(), ph = u.psi.to_spectrum();
    psi_hat_ = ph;
    const Grid gpsi = spectral::to_physical(sp, dno::apply_spectrum(sp, surf_, ph, cfg_.dno));
    const Grid ex = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, eh, ddx));
    const Grid px = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, ph, ddx));
    const std::size_t n = gpsi.size();
    eta_x_.resize(n);
    psi_x_.resize(n);
    b_.resize(n);
    v_.resize(n);
    for (std::size_t g = 0; g < n; ++g) {
      eta_x_[g] = ex[g].real();
      psi_x_[g] = px[g].real();
      b_[g] = (gpsi[g].real() + eta_x_[g] * psi_x_[g]) / (1.0 + eta_x_[g] * eta_x_[g]);
      v_[g] = psi_x_[g] - b_[g] * eta_x_[g];
    }
  }

  const ModeSpace& space() const { return space_; }
  Field B() const { return Field::from_grid(space_, to_grid(b_)); }
  Field V() const { return Field::from_grid(space_, to_grid(v_)); }

  /// G(eta) f for f on the linearization space.
  Field dno(const Field& f) const {
    return Field::from_spectrum(space_, dno::apply_spectrum(space_, surf_, f.to_spectrum(), cfg_.dno));
  }

  SurfaceState apply(const SurfaceState& d) const {
    const auto& sp = space_;
    const std::size_t n = b_.size();
    const bool has_eta = d.eta.max_abs() > 0.0, has_psi = d.psi.max_abs() > 0.0;
    Grid dg(n);
    Grid de_x(n), dp_x(n), de(n);
    if (has_psi) {
      const Spectrum dp = d.psi.to_spectrum();
      dg = spectral::to_physical(sp, dno::apply_spectrum(sp, surf_, dp, cfg_.dno));
      dp_x = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, dp, ddx));
    }
    if (has_eta) {
      const Spectrum dh = d.eta.to_spectrum();
      de = spectral::to_physical(sp, dh);
      de_x = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, dh, ddx));
      if (mode_ == ShapeDerivative::expansion) {
        const Grid dgd = spectral::to_physical(sp, dno::apply_eta_derivative(sp, surf_, psi_hat_, de, cfg_.dno));
        for (std::size_t g = 0; g < n; ++g) dg[g] += dgd[g];
      } else {
        shape_formula(de, dg);
      }
    }
    Grid rate(n);
    const double grav = cfg_.gravity;
    for (std::size_t g = 0; g < n; ++g) {
      const double dgr = dg[g].real(), dex = de_x[g].real(), dpx = dp_x[g].real();
      rate[g] = -grav * de[g].real() - psi_x_[g] * dpx + b_[g] * (dex * psi_x_[g] + eta_x_[g] * dpx + dgr) -
                b_[g] * b_[g] * eta_x_[g] * dex;
    }
    SurfaceState out(Field::from_grid(sp, real_grid(dg)), Field::from_grid(sp, rate));
    wavesys::detail::clear_zero_wavenumber(out.eta);
    wavesys::detail::clear_zero_wavenumber(out.psi);
    return out;
  }

 private:
  // Directions at the box edge have expansion terms growing like (|j| eta)^n / n!
  // before they decay; that is not divergence of the state, so the monitor is off.
  static WaveConfig linear_config(WaveConfig c) {
    c.dno.divergence_run = c.dno.order + 1;
    return c;
  }
  static cplx ddx(long j) { return cplx(0.0, static_cast<double>(j)); }

  void shape_formula(const Grid& de, Grid& dg) const {
    const auto& sp = space_;
    const std::size_t n = b_.size();
    Grid bd(n), vd(n);
    for (std::size_t g = 0; g < n; ++g) {
      bd[g] = b_[g] * de[g].real();
      vd[g] = v_[g] * de[g].real();
    }
    const Grid gb = spectral::to_physical(sp, dno::apply_spectrum(sp, surf_, spectral::to_spectral(sp, bd), cfg_.dno));
    const Grid dvd = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, spectral::to_spectral(sp, vd), ddx));
    for (std::size_t g = 0; g < n; ++g) dg[g] -= gb[g] + dvd[g];
  }
  static Grid to_grid(const std::vector<double>& v) { return Grid(v.begin(), v.end()); }
  static Grid real_grid(Grid g) {
    for (auto& v : g) v = v.real();
    return g;
  }

  ModeSpace space_;
  WaveConfig cfg_;
  ShapeDerivative mode_;
  dno::Surface surf_;
  Spectrum psi_hat_;
  std::vector<double> eta_x_, psi_x_, b_, v_;
};

struct SolveParams {
  /// Mode bound per Newton step; the last entry is kept once exhausted.
  std::vector<int> schedule{16};
  double damping = 1.0;
  int max_iterations = 25;
  /// Target for the residual norm and the constraint defect.
  double tolerance = 1e-10;
  /// Initial residual above which the guess is rejected.
  double basin = 0.1;
  /// Sites whose phase is pinned; empty means all.
  std::vector<int> phase_sites;
  /// Prescribed actions; empty means the actions of the initial embedding.
  std::vector<double> zeta;
  /// Threads used to assemble Jacobian columns.
  int workers = 1;

  void validate(int nu) const {
    if (schedule.empty()) throw InvalidArgument("SolveParams: empty truncation schedule");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      if (schedule[i] < 1) throw InvalidArgument("SolveParams: mode bounds must be >= 1");
      if (i > 0 && schedule[i] < schedule[i - 1]) throw InvalidArgument("SolveParams: schedule must be nondecreasing");
    }
    if (!(tolerance > 0.0)) throw InvalidArgument("SolveParams: tolerance must be positive");
    if (!(damping > 0.0 && damping <= 1.0)) throw InvalidArgument("SolveParams: damping must lie in (0, 1]");
    if (max_iterations < 0) throw InvalidArgument("SolveParams: negative iteration limit");
    if (!zeta.empty() && static_cast<int>(zeta.size()) != nu) throw InvalidArgument("SolveParams: zeta length differs from nu");
    for (int i : phase_sites)
      if (i < 0 || i >= nu) throw InvalidArgument("SolveParams: phase site index out of range");
  }
};

struct IterationRecord {
  int iteration = 0;
  int bound = 0;
  double residual = 0.0;
  double constraint_defect = 0.0;
  double step = 0.0;
  std::vector<double> omega;
};

class BasinError : public NumericalError {
 public:
  BasinError(const std::string& what, double initial) : NumericalError(what), initial_residual(initial) {}
  double initial_residual;
};

class NonConvergence : public NumericalError {
 public:
  NonConvergence(const std::string& what, std::vector<IterationRecord> log)
      : NumericalError(what), log(std::move(log)) {}
  std::vector<IterationRecord> log;
};

class JacobianConditioning : public NumericalError {
 public:
  JacobianConditioning(const std::string& what, double sigma) : NumericalError(what), sigma_min(sigma) {}
  double sigma_min;
};

struct SolveResult {
  TorusEmbedding embedding;
  std::vector<IterationRecord> log;
  int iterations = 0;
};

namespace detail {

// Unknown layout: for each half-box mode h with nonzero wavenumber
// (Re eta_h, Im eta_h, Re psi_h, Im psi_h), then omega.
struct Layout {
  std::vector<std::size_t> half;
  int nu = 0;
  std::size_t field_unknowns() const { return 4 * half.size(); }
  std::size_t unknowns() const { return field_unknowns() + static_cast<std::size_t>(nu); }
};

inline Layout make_layout(const ModeSpace& sp, int nu) {
  Layout l;
  l.nu = nu;
  for (std::size_t b = 0; b < sp.box_size(); ++b)
    if (b < sp.box_negative(b) && sp.box_wavenumber(b) != 0) l.half.push_back(b);
  return l;
}

inline void write_rows(const Layout& l, const SurfaceState& f, Eigen::Ref<Eigen::VectorXd> out) {
  for (std::size_t i = 0; i < l.half.size(); ++i) {
    const std::size_t b = l.half[i];
    out(4 * i) = f.eta[b].real();
    out(4 * i + 1) = f.eta[b].imag();
    out(4 * i + 2) = f.psi[b].real();
    out(4 * i + 3) = f.psi[b].imag();
  }
}

inline SurfaceState basis_state(const ModeSpace& sp, const Layout& l, std::size_t column) {
  SurfaceState s(sp);
  const std::size_t b = l.half[column / 4];
  const int part = static_cast<int>(column % 4);
  Field& f = part < 2 ? s.eta : s.psi;
  const cplx c = part % 2 == 0 ? cplx(1.0, 0.0) : cplx(0.0, 1.0);
  f[b] = c;
  f[sp.box_negative(b)] = std::conj(c);
  return s;
}

struct Constraints {
  Eigen::VectorXd value;
  Eigen::MatrixXd gradient;  // rows x field unknowns
};

// |u_i|^2 - zeta_i and Im u_i for the pinned phases.
inline Constraints constraints(const TorusEmbedding& e, const Layout& l, std::span<const double> zeta,
                               std::span<const int> phase_sites) {
  const int nu = e.sites.nu();
  const auto rows = static_cast<Eigen::Index>(nu + phase_sites.size());
  Constraints c{Eigen::VectorXd::Zero(rows), Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(l.field_unknowns()))};
  const auto& sp = e.space();
  for (int i = 0; i < nu; ++i) {
    const std::size_t b = tangential_index(sp, i);
    const double q = std::pow(std::abs(static_cast<double>(e.sites[i])), 0.25);
    const double a = 1.0 / (q * std::sqrt(2.0)), w = q / std::sqrt(2.0);
    // The unknowns sit at b or at its mirror (complex conjugate).
    auto pos = std::find(l.half.begin(), l.half.end(), b);
    double sgn = 1.0;
    if (pos == l.half.end()) {
      pos = std::find(l.half.begin(), l.half.end(), sp.box_negative(b));
      sgn = -1.0;
    }
    const auto col = static_cast<Eigen::Index>(4 * (pos - l.half.begin()));
    const cplx u = tangential_coordinate(e, i);
    // Re u = a x1 - sgn w x4, Im u = sgn a x2 + w x3.
    Eigen::VectorXd d_re = Eigen::VectorXd::Zero(4), d_im = Eigen::VectorXd::Zero(4);
    d_re << a, 0.0, 0.0, -sgn * w;
    d_im << 0.0, sgn * a, w, 0.0;
    c.value(i) = std::norm(u) - zeta[i];
    c.gradient.block(i, col, 1, 4) = (2.0 * u.real() * d_re + 2.0 * u.imag() * d_im).transpose();
    const auto ph = std::find(phase_sites.begin(), phase_sites.end(), i);
    if (ph != phase_sites.end()) {
      const auto row = static_cast<Eigen::Index>(nu + (ph - phase_sites.begin()));
      c.value(row) = u.imag();
      c.gradient.block(row, col, 1, 4) = d_im.transpose();
    }
  }
  return c;
}

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = static_cast<std::size_t>(w); i < n; i += static_cast<std::size_t>(workers)) fn(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Jacobian of (F, constraints) with respect to (profile coefficients, omega).
inline Eigen::MatrixXd jacobian(const TorusEmbedding& e, std::span<const double> zeta, std::span<const int> phase_sites,
                                const WaveConfig& cfg, int workers = 1) {
  const auto& sp = e.space();
  const auto layout = detail::make_layout(sp, e.sites.nu());
  const Linearization lin(e.profile, cfg);
  const auto nf = static_cast<Eigen::Index>(layout.field_unknowns());
  const auto nu = static_cast<Eigen::Index>(e.sites.nu());
  const auto c = detail::constraints(e, layout, zeta, phase_sites);
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(nf + c.value.size(), nf + nu);
  detail::parallel_for(layout.field_unknowns(), workers, [&](std::size_t col) {
    const SurfaceState d = detail::basis_state(sp, layout, col);
    const SurfaceState ld = lin.apply(d);
    SurfaceState df(spectral::torus_directional_derivative(d.eta, e.omega) - ld.eta,
                    spectral::torus_directional_derivative(d.psi, e.omega) - ld.psi);
    detail::write_rows(layout, df, j.col(static_cast<Eigen::Index>(col)).head(nf));
  });
  for (Eigen::Index i = 0; i < nu; ++i) {
    SurfaceState dw(spectral::torus_partial(e.profile.eta, static_cast<int>(i)),
                    spectral::torus_partial(e.profile.psi, static_cast<int>(i)));
    detail::write_rows(layout, dw, j.col(nf + i).head(nf));
  }
  j.bottomLeftCorner(c.value.size(), nf) = c.gradient;
  return j;
}

/// Gauss-Newton on the augmented system, solved in the least-squares sense
/// by column-pivoted QR. Each step truncates to the scheduled mode bound.
inline SolveResult newton_refine(const TorusEmbedding& e0, const SolveParams& params, const ResidualConfig& cfg = {}) {
  const int nu = e0.sites.nu();
  params.validate(nu);
  std::vector<double> zeta = params.zeta.empty() ? actions(e0) : params.zeta;
  std::vector<int> phases = params.phase_sites;
  if (phases.empty())
    for (int i = 0; i < nu; ++i) phases.push_back(i);

  auto bound_at = [&](int n) {
    return params.schedule[static_cast<std::size_t>(std::min<int>(n, static_cast<int>(params.schedule.size()) - 1))];
  };
  SolveResult out{resize(e0, bound_at(0)), {}, 0};
  auto record = [&](int it, double step) {
    const auto r = residual(out.embedding, cfg);
    const auto layout = detail::make_layout(out.embedding.space(), nu);
    const auto c = detail::constraints(out.embedding, layout, zeta, phases);
    out.log.push_back({it, out.embedding.bound(), r.norm, c.value.size() ? c.value.cwiseAbs().maxCoeff() : 0.0, step,
                       out.embedding.omega});
    return out.log.back();
  };
  auto converged = [&](const IterationRecord& r) {
    return r.residual <= params.tolerance && r.constraint_defect <= params.tolerance &&
           r.bound == params.schedule.back();
  };

  IterationRecord last = record(0, 0.0);
  if (last.residual > params.basin)
    throw BasinError("newton_refine: initial residual " + std::to_string(last.residual) + " exceeds the basin threshold " +
                         std::to_string(params.basin),
                     last.residual);
  for (int it = 1; it <= params.max_iterations && !converged(last); ++it) {
    if (out.embedding.bound() != bound_at(it)) out.embedding = resize(out.embedding, bound_at(it));
    auto& e = out.embedding;
    const auto layout = detail::make_layout(e.space(), nu);
    const Eigen::MatrixXd jac = jacobian(e, zeta, phases, cfg.wave, params.workers);
    Eigen::VectorXd rhs(jac.rows());
    const auto nf = static_cast<Eigen::Index>(layout.field_unknowns());
    {
      const auto r = residual(e, cfg);
      detail::write_rows(layout, r.field, rhs.head(nf));
      rhs.tail(rhs.size() - nf) = detail::constraints(e, layout, zeta, phases).value;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac);
    qr.setThreshold(1e-12);
    if (qr.rank() < jac.cols()) {
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
      const double smin = svd.singularValues()(svd.singularValues().size() - 1);
      throw JacobianConditioning("newton_refine: Jacobian rank deficient at iteration " + std::to_string(it) +
                                     " (smallest singular value " + std::to_string(smin) + ")",
                                 smin);
    }
    const Eigen::VectorXd dx = -params.damping * qr.solve(rhs);
    for (std::size_t i = 0; i < layout.half.size(); ++i) {
      const std::size_t b = layout.half[i], m = e.space().box_negative(b);
      const cplx de(dx(4 * i), dx(4 * i + 1)), dp(dx(4 * i + 2), dx(4 * i + 3));
      e.profile.eta[b] += de;
      e.profile.eta[m] += std::conj(de);
      e.profile.psi[b] += dp;
      e.profile.psi[m] += std::conj(dp);
    }
    for (int i = 0; i < nu; ++i) e.omega[i] += dx(nf + i);
    out.iterations = it;
    last = record(it, dx.norm());
  }
  if (!converged(last))
    throw NonConvergence("newton_refine: no convergence after " + std::to_string(params.max_iterations) +
                             " iterations (residual " + std::to_string(last.residual) + ")",
                         out.log);
  return out;
}

/// Amplitude continuation along zeta = eps^2 zeta_unit from the first-order
/// ansatz. The target is tried directly; on a basin failure the step to the
/// target is halved and the path is walked from the last converged point,
/// rescaling that solution linearly in eps as the next guess.
inline SolveResult solve_continuation(const TangentialSet& s, std::span<const double> zeta_unit, double eps,
                                      SolveParams params, const ResidualConfig& cfg = {}, int max_halvings = 8) {
  if (!(eps > 0.0)) throw InvalidArgument("solve_continuation: eps must be positive");
  const int bound = params.schedule.front();
  auto zeta_at = [&](double e) {
    std::vector<double> z(zeta_unit.begin(), zeta_unit.end());
    for (auto& v : z) v *= e * e;
    return z;
  };
  std::optional<SolveResult> base;
  double base_eps = 0.0;
  double step = eps;
  std::vector<IterationRecord> log;
  while (true) {
    const double target = std::min(eps, base_eps + step);
    TorusEmbedding guess = first_order_ansatz(s, zeta_at(target), bound);
    if (base) {
      guess = resize(base->embedding, bound);
      const double scale = target / base_eps;
      guess.profile *= scale;
      guess.omega = base->embedding.omega;
    }
    params.zeta = zeta_at(target);
    try {
      SolveResult r = newton_refine(guess, params, cfg);
      log.insert(log.end(), r.log.begin(), r.log.end());
      base = std::move(r);
      base_eps = target;
      if (target >= eps) break;
    } catch (const BasinError&) {
      if (max_halvings-- <= 0) throw;
      step *= 0.5;
    }
  }
  base->log = std::move(log);
  return std::move(*base);
}

/// Physical-space view of a torus embedding: U(phi, x) = U~(phi - v x).
class FullEmbedding {
 public:
  explicit FullEmbedding(TorusEmbedding e) : e_(std::move(e)) {}

  const TorusEmbedding& embedding() const { return e_; }

  /// Smallest circle bound containing every wavenumber of the profile.
  int circle_bound() const {
    long m = 0;
    for (std::size_t b = 0; b < e_.space().box_size(); ++b) m = std::max(m, std::labs(e_.space().box_wavenumber(b)));
    return static_cast<int>(std::max(1L, m));
  }

  /// (eta, psi)(phi, x) by direct summation.
  std::pair<double, double> operator()(std::span<const double> phi, double x) const {
    const auto v = e_.velocity();
    std::vector<double> theta(phi.begin(), phi.end());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= v[i] * x;
    return {e_.profile.eta.evaluate(theta).real(), e_.profile.psi.evaluate(theta).real()};
  }

  /// x-profile at torus angle phi as a circle state of bound j_max.
  SurfaceState slice(std::span<const double> phi, int j_max = 0) const {
    if (j_max == 0) j_max = circle_bound();
    if (j_max < circle_bound()) throw InvalidArgument("FullEmbedding: circle bound below the profile support");
    const ModeSpace circle = ModeSpace::circle(j_max);
    SurfaceState s(circle);
    const auto& sp = e_.space();
    for (std::size_t b = 0; b < sp.box_size(); ++b) {
      const long j = sp.box_wavenumber(b);
      if (j == 0) continue;
      double ph = 0.0;
      const auto k = sp.box_mode(b);
      for (std::size_t i = 0; i < phi.size(); ++i) ph += k[i] * phi[i];
      const int jj[1] = {static_cast<int>(j)};
      const std::size_t c = *circle.box_index(jj);
      s.eta[c] += e_.profile.eta[b] * std::polar(1.0, ph);
      s.psi[c] += e_.profile.psi[b] * std::polar(1.0, ph);
    }
    return s;
  }

  SurfaceState at_time(double t, int j_max = 0) const {
    std::vector<double> phi(e_.omega);
    for (auto& p : phi) p *= t;
    return slice(phi, j_max);
  }

  /// CSV "t,x,eta,psi" on n_x equispaced points per time.
  void write_csv(std::ostream& out, std::span<const double> times, int n_x) const {
    out << "t,x,eta,psi\n";
    char buf[128];
    for (double t : times) {
      std::vector<double> phi(e_.omega);
      for (auto& p : phi) p *= t;
      for (int m = 0; m < n_x; ++m) {
        const double x = 2.0 * spectral::kPi * m / n_x;
        const auto [eta, psi] = (*this)(phi, x);
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", t, x, eta, psi);
        out << buf;
      }
    }
  }

 private:
  TorusEmbedding e_;
};

struct EvolveComparison {
  /// Largest coefficient-norm distance between the evolved state and U(omega t, .).
  double max_discrepancy = 0.0;
  /// Largest deviation of the momentum along the evolved trajectory.
  double momentum_drift = 0.0;
};

/// Feeds U(0, .) to the time integrator and compares with direct evaluation.
inline EvolveComparison compare_with_evolution(const TorusEmbedding& e, double T, double dt, const WaveConfig& cfg = {},
                                               int samples = 10) {
  const FullEmbedding full(e);
  const auto steps = static_cast<long>(std::llround(T / dt));
  wavesys::EvolveOptions opt;
  opt.keep_states = true;
  opt.save_every = static_cast<int>(std::max(1L, steps / std::max(1, samples)));
  opt.error_check_every = 0;
  const auto traj = wavesys::evolve(full.at_time(0.0), T, dt, cfg, opt);
  EvolveComparison c;
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const SurfaceState ref = full.at_time(traj.snapshots[i].t);
    c.max_discrepancy = std::max(c.max_discrepancy, (traj.states[i] - ref).norm());
  }
  c.momentum_drift = traj.report.max_abs_momentum_drift;
  return c;
}

}  // namespace qpww::qpsolver
