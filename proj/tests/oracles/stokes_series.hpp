#pragma once

// Deep-water Stokes wave eta(x - c t), g = k = 1, as a power series in the
// first-harmonic amplitude a (eta = a cos x + higher harmonics), built order
// by order from the kinematic and Bernoulli conditions at y = eta with
//   Phi(theta, y) = sum_k A_k(a) e^{k y} sin k theta.
// Independent of the DNO: the potential is evaluated at the surface by the
// Taylor series of e^{k eta}.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qpww::oracle {

class StokesSeries {
 public:
  /// order >= 3 is needed for the speed correction c_2.
  explicit StokesSeries(int order = 3, int harmonics = 6, int grid = 64)
      : n_(order), k_(harmonics), m_(grid) {
    if (order < 1 || harmonics < order || grid < 4 * harmonics) throw std::invalid_argument("StokesSeries: bad sizes");
    a_.assign(static_cast<std::size_t>(n_ + 1), std::vector<double>(static_cast<std::size_t>(k_ + 1), 0.0));
    b_ = a_;
    c_.assign(static_cast<std::size_t>(n_ + 1), 0.0);
    r_.assign(static_cast<std::size_t>(n_ + 1), 0.0);
    // Linear wave: eta = cos, Phi = e^y sin, c = 1.
    c_[0] = 1.0;
    b_[1][1] = 1.0;
    a_[1][1] = 1.0;
    for (int n = 2; n <= n_; ++n) solve_order(n);
  }

  int order() const { return n_; }
  /// Coefficient of a^n in the speed.
  double speed(int n) const { return c_[static_cast<std::size_t>(n)]; }
  /// Coefficient of a^n cos(k x) in eta.
  double eta(int n, int k) const { return b_[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]; }
  /// Coefficient of a^n e^{k y} sin(k x) in Phi.
  double potential(int n, int k) const { return a_[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)]; }

  /// Series of zeta = |u_1|^2, u_1 = (eta^_1 + i psi^_1) / sqrt 2, with
  /// psi(x) = Phi(x, eta(x)); entry n is the coefficient of a^n.
  std::vector<double> zeta() const {
    const auto eta_s = eta_series();
    std::vector<std::vector<double>> psi(static_cast<std::size_t>(n_ + 1), std::vector<double>(m_, 0.0));
    for (int k = 1; k <= k_; ++k) {
      const auto e = exp_series(eta_s, k);
      for (int n = 0; n <= n_; ++n)
        for (int p = 0; p + n <= n_; ++p)
          for (int g = 0; g < m_; ++g) psi[n + p][g] += a_[n][k] * e[p][g] * std::sin(k * theta(g));
    }
    std::vector<std::complex<double>> u(static_cast<std::size_t>(n_ + 1));
    for (int n = 0; n <= n_; ++n) {
      std::complex<double> ph = 0.0;
      for (int g = 0; g < m_; ++g) ph += psi[n][g] * std::exp(std::complex<double>(0.0, -theta(g)));
      ph /= static_cast<double>(m_);
      u[n] = (std::complex<double>(b_[n][1] / 2.0, 0.0) + std::complex<double>(0.0, 1.0) * ph) / std::sqrt(2.0);
    }
    std::vector<double> z(static_cast<std::size_t>(n_ + 1), 0.0);
    for (int n = 0; n <= n_; ++n)
      for (int p = 0; p + n <= n_; ++p) z[n + p] += (u[n] * std::conj(u[p])).real();
    return z;
  }

  /// d omega / d zeta at zeta = 0, with omega = c (unit wavenumber).
  double frequency_slope() const {
    if (n_ < 3) throw std::logic_error("StokesSeries: order 3 needed");
    return speed(2) / zeta()[2];
  }

 private:
  using Series = std::vector<std::vector<double>>;  // [order][grid]

  double theta(int g) const { return 2.0 * std::numbers::pi * g / m_; }

  Series zero() const { return Series(static_cast<std::size_t>(n_ + 1), std::vector<double>(m_, 0.0)); }

  Series mul(const Series& x, const Series& y) const {
    Series out = zero();
    for (int n = 0; n <= n_; ++n)
      for (int p = 0; p + n <= n_; ++p)
        for (int g = 0; g < m_; ++g) out[n + p][g] += x[n][g] * y[p][g];
    return out;
  }

  Series eta_series() const {
    Series s = zero();
    for (int n = 0; n <= n_; ++n)
      for (int k = 0; k <= k_; ++k)
        for (int g = 0; g < m_; ++g) s[n][g] += b_[n][k] * std::cos(k * theta(g));
    return s;
  }

  // e^{k eta} for eta without an a^0 term.
  Series exp_series(const Series& eta, int k) const {
    Series out = zero(), term = zero();
    for (int g = 0; g < m_; ++g) out[0][g] = term[0][g] = 1.0;
    Series keta = eta;
    for (auto& row : keta)
      for (auto& v : row) v *= k;
    for (int m = 1; m <= n_; ++m) {
      term = mul(term, keta);
      for (int n = 0; n <= n_; ++n)
        for (int g = 0; g < m_; ++g) term[n][g] /= m;
      for (int n = 0; n <= n_; ++n)
        for (int g = 0; g < m_; ++g) out[n][g] += term[n][g];
    }
    return out;
  }

  // Order-n coefficients of the kinematic and Bernoulli residuals:
  //   -c eta' + Phi_x eta' - Phi_y,   -c Phi_x + (Phi_x^2 + Phi_y^2) / 2 + eta - R.
  std::vector<double> residual(int n) const {
    const Series eta = eta_series();
    Series eta_x = zero(), px = zero(), py = zero(), c = zero(), r = zero();
    for (int p = 0; p <= n_; ++p)
      for (int k = 0; k <= k_; ++k)
        for (int g = 0; g < m_; ++g) eta_x[p][g] -= k * b_[p][k] * std::sin(k * theta(g));
    for (int k = 1; k <= k_; ++k) {
      const Series e = exp_series(eta, k);
      Series cs = zero(), sn = zero();
      for (int p = 0; p <= n_; ++p)
        for (int g = 0; g < m_; ++g) {
          cs[p][g] = k * a_[p][k] * std::cos(k * theta(g));
          sn[p][g] = k * a_[p][k] * std::sin(k * theta(g));
        }
      const Series ex = mul(cs, e), ey = mul(sn, e);
      for (int p = 0; p <= n_; ++p)
        for (int g = 0; g < m_; ++g) {
          px[p][g] += ex[p][g];
          py[p][g] += ey[p][g];
        }
    }
    for (int p = 0; p <= n_; ++p)
      for (int g = 0; g < m_; ++g) {
        c[p][g] = c_[p];
        r[p][g] = r_[p];
      }
    const Series kin_a = mul(c, eta_x), kin_b = mul(px, eta_x);
    const Series ber_a = mul(c, px), ber_b = mul(px, px), ber_c = mul(py, py);
    std::vector<double> out(static_cast<std::size_t>(2 * m_));
    for (int g = 0; g < m_; ++g) {
      out[g] = -kin_a[n][g] + kin_b[n][g] - py[n][g];
      out[m_ + g] = -ber_a[n][g] + 0.5 * (ber_b[n][g] + ber_c[n][g]) + eta[n][g] - r[n][g];
    }
    return out;
  }

  // Unknowns at order n: A_{1..K,n}, B_{2..K,n}, R_n, c_{n-1}. The order-n
  // residual is affine in them, so the matrix is read off column by column.
  void solve_order(int n) {
    const int nu = k_ + (k_ - 1) + 2;
    auto set = [&](const Eigen::VectorXd& x) {
      int i = 0;
      for (int k = 1; k <= k_; ++k) a_[n][k] = x(i++);
      for (int k = 2; k <= k_; ++k) b_[n][k] = x(i++);
      r_[n] = x(i++);
      c_[n - 1] = x(i++);
    };
    Eigen::VectorXd x = Eigen::VectorXd::Zero(nu);
    set(x);
    const auto r0 = residual(n);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r0.size()), nu);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(r0.size()));
    for (std::size_t i = 0; i < r0.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = -r0[i];
    for (int j = 0; j < nu; ++j) {
      x.setZero();
      x(j) = 1.0;
      set(x);
      const auto rj = residual(n);
      for (std::size_t i = 0; i < r0.size(); ++i) m(static_cast<Eigen::Index>(i), j) = rj[i] - r0[i];
    }
    x = m.colPivHouseholderQr().solve(rhs);
    set(x);
    const auto check = residual(n);
    double worst = 0.0;
    for (double v : check) worst = std::max(worst, std::abs(v));
    if (worst > 1e-10) throw std::runtime_error("StokesSeries: order " + std::to_string(n) + " not solvable");
  }

  int n_, k_, m_;
  std::vector<std::vector<double>> a_, b_;
  std::vector<double> c_, r_;
};

}  // namespace qpww::oracle
