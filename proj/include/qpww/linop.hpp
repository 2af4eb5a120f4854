#pragma once

// Linearized operator at a traveling torus embedding,
//   L_omega = omega . d_phi + [[d_x V + G B, -G], [(g + B V_x) + B G B, V d_x - B G]],
// acting on (eta^, psi^). Its coefficients depend on (phi, x) only through
// Theta = phi - v x, so x-momentum v . l + j is conserved and the operator
// splits into blocks: block p holds the modes e^{i(k . phi + (p - v . k) x)},
// i.e. ModeSpace::traveling(v, L) with offset p.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qpww/diagonal_model.hpp"
#include "qpww/dno.hpp"
#include "qpww/error.hpp"
#include "qpww/melnikov.hpp"
#include "qpww/qpsolver.hpp"
#include "qpww/sites.hpp"
#include "qpww/spectral.hpp"
#include "qpww/wavesys.hpp"

namespace qpww::linop {

using spectral::cplx;
using spectral::Field;
using spectral::Grid;
using spectral::ModeSpace;
using spectral::Spectrum;
using wavesys::SurfaceState;
using wavesys::WaveConfig;

struct Coefficients {
  /// Horizontal velocity at the surface, psi_x - eta_x B.
  Field V;
  /// Vertical velocity at the surface, (G psi + eta_x psi_x) / (1 + eta_x^2).
  Field B;
};

inline Coefficients compute_VB(const SurfaceState& s, const WaveConfig& cfg) {
  const auto& sp = s.space();
  const dno::Surface surf(s.eta.to_grid(), cfg.dno.order);
  const Spectrum eh = s.eta.to_spectrum(), ph = s.psi.to_spectrum();
  auto ddx = [](long j) { return cplx(0.0, static_cast<double>(j)); };
  const Grid gpsi = spectral::to_physical(sp, dno::apply_spectrum(sp, surf, ph, cfg.dno));
  const Grid ex = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, eh, ddx));
  const Grid px = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, ph, ddx));
  Grid b(gpsi.size()), v(gpsi.size());
  for (std::size_t g = 0; g < b.size(); ++g) {
    const double e = ex[g].real(), p = px[g].real();
    b[g] = (gpsi[g].real() + e * p) / (1.0 + e * e);
    v[g] = p - b[g].real() * e;
  }
  return {Field::from_grid(sp, v), Field::from_grid(sp, b)};
}

struct Truncation {
  /// Bound on |j| of the x-wavenumber; j = 0 is excluded.
  long j_max = 64;
  /// Bound on the torus modes; -1 uses the embedding's bound.
  int l_bound = -1;
  /// Momenta to assemble; empty assembles every block that meets the box.
  std::vector<long> momenta;
  /// Restrict to the normal directions |j| not in |S|. With the tangential
  /// wavenumbers kept, the degenerate chain (k, +-j_i) is cut at the box edge
  /// and produces spurious eigenvalues off the imaginary axis.
  bool normal_only = true;
};

/// One momentum block. Rows and columns are ordered as all eta components
/// (in the order of `modes`) followed by all psi components.
struct Block {
  long momentum = 0;
  ModeSpace space;
  /// Box indices (in `space`) of the retained modes.
  std::vector<std::size_t> modes;
  Eigen::MatrixXcd matrix;

  std::size_t size() const { return modes.size(); }
  long wavenumber(std::size_t i) const { return space.box_wavenumber(modes[i]); }
  std::span<const int> torus_mode(std::size_t i) const { return space.box_mode(modes[i]); }
};

class LinearizedOperator {
 public:
  LinearizedOperator(std::vector<double> omega, std::vector<int> velocity, long j_max, std::vector<Block> blocks)
      : omega_(std::move(omega)), velocity_(std::move(velocity)), j_max_(j_max), blocks_(std::move(blocks)) {
    std::sort(blocks_.begin(), blocks_.end(), [](const Block& a, const Block& b) { return a.momentum < b.momentum; });
  }

  std::span<const double> omega() const { return omega_; }
  std::span<const int> velocity() const { return velocity_; }
  long j_max() const { return j_max_; }
  std::span<const Block> blocks() const { return blocks_; }

  const Block* block(long p) const {
    auto it = std::lower_bound(blocks_.begin(), blocks_.end(), p,
                               [](const Block& b, long q) { return b.momentum < q; });
    return (it != blocks_.end() && it->momentum == p) ? &*it : nullptr;
  }

  /// Total dimension (two components per mode).
  std::size_t dimension() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += 2 * b.size();
    return n;
  }

  /// Block-diagonal dense matrix in the concatenated block basis.
  Eigen::MatrixXcd dense() const {
    const auto n = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    Eigen::Index at = 0;
    for (const auto& b : blocks_) {
      const auto k = b.matrix.rows();
      m.block(at, at, k, k) = b.matrix;
      at += k;
    }
    return m;
  }

 private:
  std::vector<double> omega_;
  std::vector<int> velocity_;
  long j_max_;
  std::vector<Block> blocks_;
};

namespace detail {

inline cplx ddx(long j) { return cplx(0.0, static_cast<double>(j)); }

// Coefficient grids shared by every block.
struct Coefficient_grids {
  dno::Surface surf;
  std::vector<double> v, b, v_x;
};

inline Coefficient_grids coefficient_grids(const SurfaceState& s, const WaveConfig& cfg) {
  const auto vb = compute_VB(s, cfg);
  const Grid v = vb.V.to_grid(), b = vb.B.to_grid(), vx = spectral::x_derivative(vb.V).to_grid();
  Coefficient_grids c{dno::Surface(s.eta.to_grid(), cfg.dno.order), {}, {}, {}};
  c.v.resize(v.size());
  c.b.resize(v.size());
  c.v_x.resize(v.size());
  for (std::size_t g = 0; g < v.size(); ++g) {
    c.v[g] = v[g].real();
    c.b[g] = b[g].real();
    c.v_x[g] = vx[g].real();
  }
  return c;
}

inline std::vector<std::size_t> block_modes(const ModeSpace& sp, long j_max, std::span<const long> excluded) {
  std::vector<std::size_t> m;
  for (std::size_t b = 0; b < sp.box_size(); ++b) {
    const long j = sp.box_wavenumber(b);
    if (j == 0 || std::labs(j) > j_max) continue;
    if (std::find(excluded.begin(), excluded.end(), std::labs(j)) != excluded.end()) continue;
    m.push_back(b);
  }
  return m;
}

inline Block assemble_block(long p, const ModeSpace& base, const Coefficient_grids& c, std::span<const double> omega,
                            long j_max, std::span<const long> excluded, const WaveConfig& cfg) {
  Block blk{p, base.with_offset(p), {}, {}};
  const auto& sp = blk.space;
  blk.modes = block_modes(sp, j_max, excluded);
  const std::size_t n = blk.modes.size(), ng = sp.grid_points();
  blk.matrix = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(2 * n), static_cast<Eigen::Index>(2 * n));
  const double grav = cfg.gravity;
  auto G = [&](const Grid& f) {
    return spectral::to_physical(sp, dno::apply_spectrum(sp, c.surf, spectral::to_spectral(sp, f), cfg.dno));
  };
  for (std::size_t col = 0; col < 2 * n; ++col) {
    const std::size_t mode = blk.modes[col % n];
    const bool is_eta = col < n;
    Spectrum in(ng);
    in[sp.box_to_grid(mode)] = 1.0;
    const Grid f = spectral::to_physical(sp, in);
    Grid out_eta(ng), out_psi(ng);
    if (is_eta) {
      // d_x(V f) + G(B f) and (g + B V_x) f + B G(B f).
      Grid vf(ng), bf(ng);
      for (std::size_t g = 0; g < ng; ++g) {
        vf[g] = c.v[g] * f[g];
        bf[g] = c.b[g] * f[g];
      }
      const Grid dvf =
          spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, spectral::to_spectral(sp, vf), ddx));
      const Grid gbf = G(bf);
      for (std::size_t g = 0; g < ng; ++g) {
        out_eta[g] = dvf[g] + gbf[g];
        out_psi[g] = (grav + c.b[g] * c.v_x[g]) * f[g] + c.b[g] * gbf[g];
      }
    } else {
      // -G f and V f_x - B G f.
      const Grid gf = G(f);
      const Grid fx = spectral::to_physical(sp, spectral::scale_by_wavenumber(sp, in, ddx));
      for (std::size_t g = 0; g < ng; ++g) {
        out_eta[g] = -gf[g];
        out_psi[g] = c.v[g] * fx[g] - c.b[g] * gf[g];
      }
    }
    const Spectrum se = spectral::to_spectral(sp, out_eta), sq = spectral::to_spectral(sp, out_psi);
    const auto ci = static_cast<Eigen::Index>(col);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t g = sp.box_to_grid(blk.modes[r]);
      blk.matrix(static_cast<Eigen::Index>(r), ci) = se[g];
      blk.matrix(static_cast<Eigen::Index>(n + r), ci) = sq[g];
    }
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto k = sp.box_mode(blk.modes[r]);
    double w = 0.0;
    for (std::size_t i = 0; i < omega.size(); ++i) w += omega[i] * k[i];
    const auto ri = static_cast<Eigen::Index>(r), si = static_cast<Eigen::Index>(n + r);
    blk.matrix(ri, ri) += cplx(0.0, w);
    blk.matrix(si, si) += cplx(0.0, w);
  }
  return blk;
}

}  // namespace detail

/// Momenta meeting the truncation: p = j + v . k with k in the box and
/// 1 <= |j| <= j_max.
inline std::vector<long> all_momenta(std::span<const int> velocity, int l_bound, long j_max) {
  long reach = 0;
  for (int v : velocity) reach += static_cast<long>(std::abs(v)) * l_bound;
  std::vector<long> p;
  for (long q = -(j_max + reach); q <= j_max + reach; ++q) p.push_back(q);
  return p;
}

inline LinearizedOperator assemble_linearized(const qpsolver::TorusEmbedding& e, const WaveConfig& cfg,
                                              const Truncation& t, int workers = 1) {
  const long smax = e.sites.max_abs();
  if (t.j_max < 2 * smax)
    throw InvalidArgument("assemble_linearized: j_max " + std::to_string(t.j_max) + " below 2 max|S| = " +
                          std::to_string(2 * smax));
  const int lb = t.l_bound < 0 ? e.bound() : t.l_bound;
  if (lb < 0) throw InvalidArgument("assemble_linearized: negative torus bound");
  const auto profile = lb == e.bound() ? e.profile : qpsolver::resize(e, lb).profile;
  const ModeSpace& base = profile.space();
  // The divergence monitor concerns states, not single basis directions.
  WaveConfig lin = cfg;
  lin.dno.divergence_run = lin.dno.order + 1;
  const auto grids = detail::coefficient_grids(profile, lin);
  const auto velocity = e.velocity();
  const std::vector<long> momenta = t.momenta.empty() ? all_momenta(velocity, lb, t.j_max) : t.momenta;
  std::vector<long> excluded;
  if (t.normal_only)
    for (long j : e.sites.sites()) excluded.push_back(std::labs(j));
  std::vector<Block> blocks(momenta.size(), Block{0, base, {}, {}});
  qpsolver::detail::parallel_for(momenta.size(), workers, [&](std::size_t i) {
    blocks[i] = detail::assemble_block(momenta[i], base, grids, e.omega, t.j_max, excluded, lin);
  });
  std::erase_if(blocks, [](const Block& b) { return b.size() == 0; });
  return LinearizedOperator(e.omega, velocity, t.j_max, std::move(blocks));
}

/// Largest |entry| of the momentum-sorted dense matrix outside the diagonal
/// blocks; zero by construction, kept as a structural check.
inline double off_block_mass(const LinearizedOperator& op) {
  const Eigen::MatrixXcd m = op.dense();
  double worst = 0.0;
  Eigen::Index at = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> ranges;
  for (const auto& b : op.blocks()) {
    ranges.emplace_back(at, at + b.matrix.rows());
    at += b.matrix.rows();
  }
  for (const auto& [r0, r1] : ranges)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c >= r0 && c < r1) continue;
      worst = std::max(worst, m.block(r0, c, r1 - r0, 1).cwiseAbs().maxCoeff());
    }
  return worst;
}

struct BlockEigen {
  long momentum = 0;
  Eigen::VectorXcd values;
  Eigen::MatrixXcd vectors;
};

inline std::vector<BlockEigen> eigen_decompose(const LinearizedOperator& op, int workers = 1) {
  const auto blocks = op.blocks();
  std::vector<BlockEigen> out(blocks.size());
  qpsolver::detail::parallel_for(blocks.size(), workers, [&](std::size_t i) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(blocks[i].matrix, true);
    if (es.info() != Eigen::Success)
      throw NumericalError("eigen_decompose: eigensolver failed at momentum " + std::to_string(blocks[i].momentum));
    out[i] = {blocks[i].momentum, es.eigenvalues(), es.eigenvectors()};
  });
  return out;
}

/// All eigenvalues, block by block in increasing momentum.
inline std::vector<cplx> eigenvalues(const LinearizedOperator& op, int workers = 1) {
  std::vector<cplx> all;
  for (const auto& b : eigen_decompose(op, workers))
    for (Eigen::Index i = 0; i < b.values.size(); ++i) all.push_back(b.values(i));
  return all;
}

/// Flat-state values i(omega . k +- sqrt|j|) over the truncation.
inline std::vector<cplx> flat_eigenvalues(const LinearizedOperator& op) {
  std::vector<cplx> all;
  for (const auto& b : op.blocks())
    for (std::size_t i = 0; i < b.size(); ++i) {
      const auto k = b.torus_mode(i);
      double w = 0.0;
      for (std::size_t d = 0; d < op.omega().size(); ++d) w += op.omega()[d] * k[d];
      const double s = std::sqrt(std::abs(static_cast<double>(b.wavenumber(i))));
      all.emplace_back(0.0, w + s);
      all.emplace_back(0.0, w - s);
    }
  return all;
}

class BranchAmbiguity : public NumericalError {
 public:
  BranchAmbiguity(const std::string& what, long j, double mass) : NumericalError(what), j(j), mass(mass) {}
  long j;
  double mass;
};

struct FitWindow {
  /// Defaults max|S| + 3 and j_max / 2 when left at zero.
  long j_min = 0;
  long j_fit = 0;
};

/// Eigenvalue i mu of the u-branch at (l = 0, j): mu approximates d_j.
struct BranchValue {
  long j = 0;
  cplx lambda;
  /// Fraction of the eigenvector's (u, u-bar) mass on the u_j coordinate.
  double mass = 0.0;
};

struct DiagonalFit {
  DiagonalModel model;
  /// Labeled branches, including those outside the fit window.
  std::vector<BranchValue> branches;
  FitWindow window;
};

namespace detail {

// Mass fractions of an eigenvector in the coordinates
// u = (|j|^{-1/4} eta + i |j|^{1/4} psi) / sqrt 2 and u-bar (sign of i flipped).
inline double u_mass_fraction(const Block& b, const Eigen::VectorXcd& vec, std::size_t target) {
  const std::size_t n = b.size();
  double total = 0.0, on = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::pow(std::abs(static_cast<double>(b.wavenumber(i))), 0.25);
    const cplx a = vec(static_cast<Eigen::Index>(i)), p = vec(static_cast<Eigen::Index>(n + i));
    const cplx u = (a / q + cplx(0.0, q) * p) / std::sqrt(2.0);
    const cplx ub = (a / q - cplx(0.0, q) * p) / std::sqrt(2.0);
    total += std::norm(u) + std::norm(ub);
    if (i == target) on = std::norm(u);
  }
  return total > 0.0 ? on / total : 0.0;
}

inline std::optional<std::size_t> zero_mode(const Block& b) {
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto k = b.torus_mode(i);
    if (std::all_of(k.begin(), k.end(), [](int x) { return x == 0; })) return i;
  }
  return std::nullopt;
}

}  // namespace detail

/// Labels the u-branch of every block p (l = 0, j = p) by dominant eigenvector
/// mass and fits d_j = m1 j + (1 + m_half) sqrt|j| + m0 sign j + r_j on
/// j_min <= |j| <= j_fit. r_j is the fit residual on labeled j with
/// |j| <= j_fit and zero elsewhere.
inline DiagonalFit diagonalize_and_fit(const LinearizedOperator& op, const TangentialSet& s, FitWindow w = {},
                                       int workers = 1) {
  if (w.j_min <= 0) w.j_min = s.max_abs() + 3;
  if (w.j_fit <= 0) w.j_fit = op.j_max() / 2;
  if (w.j_fit < w.j_min + 1) throw InvalidArgument("diagonalize_and_fit: fit window too small");
  const auto eig = eigen_decompose(op, workers);
  DiagonalFit fit;
  fit.window = w;
  for (std::size_t bi = 0; bi < eig.size(); ++bi) {
    const Block& b = op.blocks()[bi];
    const long p = b.momentum;
    if (p == 0 || std::labs(p) > w.j_fit) continue;
    const auto z = detail::zero_mode(b);
    if (!z) continue;
    double best = -1.0;
    Eigen::Index arg = 0;
    for (Eigen::Index k = 0; k < eig[bi].values.size(); ++k) {
      const double m = detail::u_mass_fraction(b, eig[bi].vectors.col(k), *z);
      if (m > best) {
        best = m;
        arg = k;
      }
    }
    const bool in_window = std::labs(p) >= w.j_min;
    if (best < 0.5) {
      if (in_window)
        throw BranchAmbiguity("diagonalize_and_fit: branch at j = " + std::to_string(p) + " has dominant mass " +
                                  std::to_string(best),
                              p, best);
      continue;
    }
    fit.branches.push_back({p, eig[bi].values(arg), best});
  }

  std::vector<const BranchValue*> used;
  for (const auto& br : fit.branches)
    if (std::labs(br.j) >= w.j_min) used.push_back(&br);
  if (used.size() < 3) throw NumericalError("diagonalize_and_fit: fewer than three labeled branches in the window");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(used.size()), 3);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(used.size()));
  for (std::size_t i = 0; i < used.size(); ++i) {
    const double j = static_cast<double>(used[i]->j), sq = std::sqrt(std::abs(j));
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = j;
    a(r, 1) = sq;
    a(r, 2) = j > 0 ? 1.0 : -1.0;
    rhs(r) = used[i]->lambda.imag() - sq;
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(rhs);
  auto& m = fit.model;
  m.m1 = c(0);
  m.m_half = c(1);
  m.m0 = c(2);
  m.fit_residual = std::sqrt((a * c - rhs).squaredNorm() / static_cast<double>(used.size()));
  m.r.assign(static_cast<std::size_t>(2 * w.j_fit + 1), 0.0);
  // d(j) reads r, which is still zero here.
  for (const auto& br : fit.branches) m.r[static_cast<std::size_t>(br.j + w.j_fit)] = br.lambda.imag() - m.d(br.j);
  return fit;
}

/// m1 divided by the model (1/pi) sum n|n| zeta_n.
inline double m1_model_ratio(const DiagonalModel& m, const TangentialSet& s, std::span<const double> zeta) {
  return m.m1 / melnikov::m1_model(s, zeta);
}

// ---------------------------------------------------------------------------
// Transport straightening.

class SmallDivisor : public NumericalError {
 public:
  SmallDivisor(const std::string& what, std::vector<int> l, double divisor)
      : NumericalError(what), l(std::move(l)), divisor(divisor) {}
  std::vector<int> l;
  double divisor;
};

struct StraightenParams {
  double gamma = 1e-3;
  double tau = 3.0;
  double tolerance = 1e-13;
  int max_iterations = 200;
};

struct Straightening {
  double m1 = 0.0;
  /// Corrector: Theta -> Theta + v q(Theta) conjugates the transport field.
  Field q;
  /// sup-norm of (omega - V v) . d_Theta (Theta + v q) - (omega - m1 v).
  double defect = 0.0;
  int iterations = 0;
};

/// Solves (omega - V v) . d_Theta q = V - m1 on T^nu by the fixed point
/// omega . d q = V - m1 + V v . d q, m1 = mean of V (1 + v . d q).
inline Straightening straighten_transport(const Field& V, std::span<const double> omega, std::span<const int> v,
                                          const StraightenParams& p = {}) {
  const auto& sp = V.space();
  const auto nu = static_cast<std::size_t>(sp.dim());
  if (omega.size() != nu || v.size() != nu) throw InvalidArgument("straighten_transport: dimension mismatch");
  if (!(p.gamma > 0.0) || !(p.tolerance > 0.0)) throw InvalidArgument("straighten_transport: bad parameters");
  std::size_t zero = sp.box_size();
  for (std::size_t b = 0; b < sp.box_size(); ++b) {
    const auto k = sp.box_mode(b);
    if (std::all_of(k.begin(), k.end(), [](int x) { return x == 0; })) {
      zero = b;
      continue;
    }
    const double div = melnikov::lattice_divisor(omega, k);
    if (std::abs(div) < 0.5 * p.gamma * std::pow(melnikov::bracket(k), -p.tau))
      throw SmallDivisor("straighten_transport: divisor " + std::to_string(div) + " below threshold",
                         std::vector<int>(k.begin(), k.end()), div);
  }
  auto transport = [&](const Field& f) {
    Field out(sp);
    for (std::size_t i = 0; i < nu; ++i)
      if (v[i] != 0) out = out + cplx(static_cast<double>(v[i])) * spectral::torus_partial(f, static_cast<int>(i));
    return out;
  };
  auto mean = [&](const Field& f) { return f[zero].real(); };

  Straightening st{0.0, Field(sp), 0.0, 0};
  for (int it = 1; it <= p.max_iterations; ++it) {
    const Field vdq = spectral::product(V, transport(st.q));
    const Field rhs_full = V + vdq;
    const double m1 = mean(rhs_full);
    Field q(sp);
    for (std::size_t b = 0; b < sp.box_size(); ++b) {
      if (b == zero) continue;
      const double div = melnikov::lattice_divisor(omega, sp.box_mode(b));
      q[b] = rhs_full[b] / cplx(0.0, div);
    }
    double change = 0.0;
    for (std::size_t b = 0; b < sp.box_size(); ++b) change = std::max(change, std::abs(q[b] - st.q[b]));
    change = std::max(change, std::abs(m1 - st.m1));
    st.q = std::move(q);
    st.m1 = m1;
    st.iterations = it;
    if (change <= p.tolerance) break;
    if (it == p.max_iterations)
      throw NumericalError("straighten_transport: no convergence after " + std::to_string(it) + " iterations");
  }
  // Residual R = (omega - V v) . d q - (V - m1); the defect is max_i |v_i| |R|.
  Field r = spectral::torus_directional_derivative(st.q, omega) - spectral::product(V, transport(st.q)) - V;
  r[zero] += st.m1;
  double vmax = 0.0;
  for (int x : v) vmax = std::max(vmax, std::abs(static_cast<double>(x)));
  double sup = 0.0;
  for (const auto& g : r.to_grid()) sup = std::max(sup, std::abs(g));
  st.defect = vmax * sup;
  return st;
}

}  // namespace qpww::linop
