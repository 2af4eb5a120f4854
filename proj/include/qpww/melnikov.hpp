#pragma once

// Small-divisor conditions.
//
//   diophantine:     |omega . l|                      >= gamma <l>^{-tau}
//   zero order:      |(omega - m1 v) . l|             >= gamma <l>^{-tau}
//   second order:    |omega . l + d_j - d_k|          >= eta_M <l>^{-tau}
//                    on v . l + j - k = 0, (l, j, k) != (0, j, j)
//   lossy variant:   |omega . l + d_j - d_k|          >= gamma <l>^{-tau} / (<j>^d <k>^d)
//
// with <l> = (1 + |l|_2^2)^{1/2}; l = 0 is excluded and ties pass. Lattice
// scans cover the box |l|_inf <= L_max; l and -l give the same divisor, so
// reported vectors are normalized to a positive first nonzero entry.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <thread>
#include <tuple>
#include <vector>

#include "qpww/diagonal_model.hpp"
#include "qpww/error.hpp"
#include "qpww/normalform.hpp"
#include "qpww/sites.hpp"

namespace qpww::melnikov {

struct MelnikovParams {
  double gamma = 1e-3;
  double tau = 3.0;
  double eta_m = 1e-9;
  /// Derivative-loss exponent of the lossy variant.
  double loss_d = 2.0;
  int l_max = 200;
  long j_max = 10000;
  int workers = 1;
  /// Violations kept in reports (the count is always exact).
  std::size_t max_violations = 1000;

  /// tau = nu + 1, gamma = eps^2.5, eta_M = gamma^3, d = 2.
  static MelnikovParams defaults(int nu, double eps) {
    MelnikovParams p;
    p.tau = nu + 1.0;
    p.gamma = std::pow(eps, 2.5);
    p.eta_m = p.gamma * p.gamma * p.gamma;
    return p;
  }
  void validate(int nu) const {
    if (!(gamma > 0.0)) throw InvalidArgument("melnikov: gamma must be positive");
    if (!(tau > nu - 1.0)) throw InvalidArgument("melnikov: tau must exceed nu - 1");
    if (l_max < 0 || j_max < 1) throw InvalidArgument("melnikov: negative scan bounds");
  }
};

inline double bracket(std::span<const int> l) {
  double s = 1.0;
  for (int v : l) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

/// (l, j, k); j = k = 0 for the lattice-only conditions.
struct Triple {
  std::vector<int> l;
  long j = 0;
  long k = 0;
  friend bool operator<(const Triple& a, const Triple& b) {
    return std::tie(a.l, a.j, a.k) < std::tie(b.l, b.j, b.k);
  }
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct Violation {
  Triple at;
  double divisor;
  double threshold;
};

struct RadiusEntry {
  std::vector<int> l;
  /// Certification radius; +inf when nothing beyond the ball is certified.
  double radius;
};

struct MelnikovReport {
  bool pass = true;
  double min_divisor = std::numeric_limits<double>::infinity();
  std::optional<Triple> argmin;
  std::vector<Violation> violations;
  long long violation_count = 0;
  long long checked = 0;
  /// Second order only: triples certified through R(l) instead of enumerated.
  long long certified = 0;
  std::vector<RadiusEntry> radius;
};

/// Divisor of the zero-order conditions.
inline double lattice_divisor(std::span<const double> omega, std::span<const int> l) {
  double s = 0.0;
  for (std::size_t i = 0; i < omega.size(); ++i) s += omega[i] * l[i];
  return s;
}

/// omega . l + d_j - d_k.
inline double second_divisor(std::span<const double> omega, const DiagonalModel& d, std::span<const int> l,
                             long j, long k) {
  return lattice_divisor(omega, l) + d.d(j) - d.d(k);
}

namespace detail {

inline bool positive_orientation(std::span<const int> l) {
  for (int v : l)
    if (v != 0) return v > 0;
  return false;
}

class Collector {
 public:
  explicit Collector(std::size_t cap) : cap_(cap) {}

  void record(MelnikovReport& r, Triple t, double divisor, double threshold) {
    ++r.checked;
    const double a = std::abs(divisor);
    if (a < r.min_divisor || (a == r.min_divisor && r.argmin && t < *r.argmin)) {
      r.min_divisor = a;
      r.argmin = t;
    }
    if (a < threshold) {
      r.pass = false;
      ++r.violation_count;
      r.violations.push_back({std::move(t), divisor, threshold});
      if (r.violations.size() > 2 * cap_) trim(r);
    }
  }
  void trim(MelnikovReport& r) const {
    std::sort(r.violations.begin(), r.violations.end(),
              [](const Violation& a, const Violation& b) { return a.at < b.at; });
    if (r.violations.size() > cap_) r.violations.resize(cap_);
  }

 private:
  std::size_t cap_;
};

inline void merge_into(MelnikovReport& out, MelnikovReport&& part) {
  out.pass = out.pass && part.pass;
  if (part.argmin &&
      (part.min_divisor < out.min_divisor || (part.min_divisor == out.min_divisor && (!out.argmin || *part.argmin < *out.argmin)))) {
    out.min_divisor = part.min_divisor;
    out.argmin = std::move(part.argmin);
  }
  out.violation_count += part.violation_count;
  out.checked += part.checked;
  out.certified += part.certified;
  for (auto& v : part.violations) out.violations.push_back(std::move(v));
  for (auto& e : part.radius) out.radius.push_back(std::move(e));
}

template <class Work>
MelnikovReport parallel_reports(long long items, int workers, std::size_t cap, Work&& work) {
  workers = std::max(1, static_cast<int>(std::min<long long>(workers, std::max<long long>(items, 1))));
  std::vector<MelnikovReport> parts(static_cast<std::size_t>(workers));
  auto run = [&](int w) {
    for (long long i = w; i < items; i += workers) work(i, parts[static_cast<std::size_t>(w)]);
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  MelnikovReport out;
  for (auto& p : parts) merge_into(out, std::move(p));
  Collector(cap).trim(out);
  std::sort(out.radius.begin(), out.radius.end(), [](const auto& a, const auto& b) { return a.l < b.l; });
  return out;
}

// Flat index -> vector in the box [-L, L]^n.
inline void unflatten(long long idx, int L, std::vector<int>& v) {
  const long long w = 2LL * L + 1;
  for (std::size_t i = v.size(); i-- > 0;) {
    v[i] = static_cast<int>(idx % w) - L;
    idx /= w;
  }
}

inline long long box_count(int n, int L) {
  long long c = 1;
  for (int i = 0; i < n; ++i) c *= 2LL * L + 1;
  return c;
}

// Visits every l with 0 < |l|_inf <= L and positive orientation that can
// attain the minimum of |w . l| or violate a threshold below |w_1| / 2. When
// gamma < |w_1| / 2 only the integers l_1 nearest to -(w_2 l_2 + ...)/w_1 are
// visited; otherwise the whole box. fn(l, divisor) returns false to stop.
template <class Fn>
void for_each_lattice_candidate(std::span<const double> w, double gamma, int L, long long outer_index,
                                std::vector<int>& l, std::vector<int>& tail, Fn&& fn) {
  const int nu = static_cast<int>(w.size());
  unflatten(outer_index, L, tail);
  double rest = 0.0;
  bool tail_zero = true;
  for (int i = 1; i < nu; ++i) {
    l[i] = tail[i - 1];
    rest += w[i] * l[i];
    tail_zero = tail_zero && l[i] == 0;
  }
  auto visit = [&](int l1) {
    if (l1 < -L || l1 > L) return true;
    l[0] = l1;
    if (!positive_orientation(l)) return true;
    return fn(std::span<const int>(l), w[0] * l1 + rest);
  };
  if (std::abs(w[0]) > 2.0 * gamma) {
    // Clamping keeps the in-box minimizer when the nearest integers fall outside.
    const double c = std::clamp(-rest / w[0], -static_cast<double>(L), static_cast<double>(L));
    const int lo = std::clamp(static_cast<int>(std::floor(c)), -L, L), hi = std::min(lo + 1, L);
    if (!visit(lo) || (hi != lo && !visit(hi))) return;
    // Tail zero: |w_1| l_1 grows while the threshold shrinks, so l_1 = 1 is the worst.
    if (tail_zero && lo != 1 && hi != 1) visit(1);
  } else {
    for (int l1 = -L; l1 <= L; ++l1)
      if (!visit(l1)) return;
  }
}

inline MelnikovReport lattice_scan(std::span<const double> w, double gamma, double tau, int L, int workers,
                                   std::size_t cap) {
  const int nu = static_cast<int>(w.size());
  if (nu < 1) throw InvalidArgument("melnikov: empty frequency vector");
  return parallel_reports(box_count(nu - 1, L), workers, cap, [&](long long idx, MelnikovReport& r) {
    Collector col(cap);
    std::vector<int> l(static_cast<std::size_t>(nu)), tail(static_cast<std::size_t>(nu - 1));
    for_each_lattice_candidate(w, gamma, L, idx, l, tail, [&](std::span<const int> lv, double div) {
      col.record(r, Triple{{lv.begin(), lv.end()}, 0, 0}, div, gamma * std::pow(bracket(lv), -tau));
      return true;
    });
  });
}

inline bool lattice_passes(std::span<const double> w, double gamma, double tau, int L) {
  const int nu = static_cast<int>(w.size());
  std::vector<int> l(static_cast<std::size_t>(nu)), tail(static_cast<std::size_t>(nu - 1));
  bool ok = true;
  const long long outer = box_count(nu - 1, L);
  for (long long idx = 0; idx < outer && ok; ++idx)
    for_each_lattice_candidate(w, gamma, L, idx, l, tail, [&](std::span<const int> lv, double div) {
      ok = std::abs(div) >= gamma * std::pow(bracket(lv), -tau);
      return ok;
    });
  return ok;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

inline MelnikovReport diophantine_check(std::span<const double> omega, double gamma, double tau, int l_max,
                                        int workers = 1, std::size_t max_violations = 1000) {
  MelnikovParams p;
  p.gamma = gamma;
  p.tau = tau;
  p.l_max = l_max;
  p.validate(static_cast<int>(omega.size()));
  return detail::lattice_scan(omega, gamma, tau, l_max, workers, max_violations);
}

inline std::vector<double> shifted_frequency(std::span<const double> omega, double m1, std::span<const int> v) {
  if (omega.size() != v.size()) throw InvalidArgument("melnikov: omega and velocity lengths differ");
  std::vector<double> w(omega.begin(), omega.end());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= m1 * v[i];
  return w;
}

inline MelnikovReport zero_melnikov(std::span<const double> omega, double m1, std::span<const int> v,
                                    double gamma, double tau, int l_max, int workers = 1,
                                    std::size_t max_violations = 1000) {
  const auto w = shifted_frequency(omega, m1, v);
  return diophantine_check(w, gamma, tau, l_max, workers, max_violations);
}

/// Radius beyond which, for |j|, |k| >= R on the momentum line of l, the
/// second-order bound follows from the zero-order one at l:
///   sqrt R >= (1 + |m_half|) |v.l| / (2 ((gamma - eta_M) <l>^{-tau} - 2 sup|r|)),
/// floored at |v.l| + 1 so that j and k share a sign. +inf when the zero-order
/// condition fails at l or the margin is not positive.
inline double reduction_radius(std::span<const double> omega, const DiagonalModel& d, std::span<const int> v,
                               std::span<const int> l, const MelnikovParams& p) {
  const auto w = shifted_frequency(omega, d.m1, v);
  const double weight = std::pow(bracket(l), -p.tau);
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (std::abs(lattice_divisor(w, l)) < p.gamma * weight) return inf;
  long m = 0;
  for (std::size_t i = 0; i < l.size(); ++i) m += static_cast<long>(v[i]) * l[i];
  const double floor_r = static_cast<double>(std::labs(m)) + 1.0;
  // j = k: the divisor is (omega - m1 v) . l itself.
  if (m == 0) return p.gamma >= p.eta_m ? floor_r : inf;
  const double margin = (p.gamma - p.eta_m) * weight - 2.0 * d.r_sup();
  if (!(margin > 0.0)) return inf;
  const double root = (1.0 + std::abs(d.m_half)) * static_cast<double>(std::labs(m)) / (2.0 * margin);
  return std::max(floor_r, root * root);
}

namespace detail {

inline long momentum(std::span<const int> v, std::span<const int> l) {
  long m = 0;
  for (std::size_t i = 0; i < l.size(); ++i) m += static_cast<long>(v[i]) * l[i];
  return m;
}

// Number of j in [-J, J] with j != 0, k = j + m != 0 and |k| <= J.
inline long long admissible_count(long J, long m) {
  const long lo = std::max(-J, -J - m), hi = std::min(J, J - m);
  if (lo > hi) return 0;
  long long c = hi - lo + 1;
  if (lo <= 0 && 0 <= hi) --c;
  if (m != 0 && lo <= -m && -m <= hi) --c;
  return c;
}

}  // namespace detail

/// Second-order scan over momentum-admissible triples with |l|_inf <= L_max
/// and |j|, |k| <= J_max. For each l only the ball min(|j|, |k|) < R(l) is
/// enumerated; the remaining admissible triples are counted as certified.
inline MelnikovReport second_melnikov(std::span<const double> omega, const DiagonalModel& d,
                                      std::span<const int> v, const MelnikovParams& p) {
  const int nu = static_cast<int>(omega.size());
  p.validate(nu);
  if (static_cast<int>(v.size()) != nu) throw InvalidArgument("second_melnikov: velocity length differs");
  const long J = p.j_max;
  return detail::parallel_reports(
      detail::box_count(nu, p.l_max), p.workers, p.max_violations, [&](long long idx, MelnikovReport& r) {
        detail::Collector col(p.max_violations);
        std::vector<int> l(static_cast<std::size_t>(nu));
        detail::unflatten(idx, p.l_max, l);
        if (std::all_of(l.begin(), l.end(), [](int x) { return x == 0; })) return;
        const long m = detail::momentum(v, l);
        const double R = reduction_radius(omega, d, v, l, p);
        r.radius.push_back({l, R});
        const double threshold = p.eta_m * std::pow(bracket(l), -p.tau);
        const double wl = lattice_divisor(omega, l);
        // Inside the ball: min(|j|, |k|) <= c.
        const long c = R > static_cast<double>(2 * J + std::labs(m) + 2)
                           ? 2 * J + std::labs(m) + 2
                           : static_cast<long>(std::ceil(R)) - 1;
        long long inside = 0;
        auto visit = [&](long j) {
          const long k = j + m;
          if (j == 0 || k == 0 || std::labs(k) > J) return;
          ++inside;
          col.record(r, Triple{l, j, k}, wl + d.d(j) - d.d(k), threshold);
        };
        const long a_lo = std::max(-J, -c), a_hi = std::min(J, c);
        for (long j = a_lo; j <= a_hi; ++j) visit(j);
        for (long j = std::max(-J, -c - m); j <= std::min(J, c - m); ++j)
          if (j < a_lo || j > a_hi) visit(j);
        r.certified += detail::admissible_count(J, m) - inside;
      });
}

/// Same scan with threshold gamma <l>^{-tau} / (<j>^d <k>^d), <j> = (1 + j^2)^{1/2};
/// every admissible triple is enumerated.
inline MelnikovReport second_melnikov_lossy(std::span<const double> omega, const DiagonalModel& d,
                                            std::span<const int> v, const MelnikovParams& p) {
  const int nu = static_cast<int>(omega.size());
  p.validate(nu);
  if (!(p.loss_d > 1.0)) throw InvalidArgument("second_melnikov_lossy: loss exponent must exceed 1");
  if (static_cast<int>(v.size()) != nu) throw InvalidArgument("second_melnikov_lossy: velocity length differs");
  const long J = p.j_max;
  return detail::parallel_reports(
      detail::box_count(nu, p.l_max), p.workers, p.max_violations, [&](long long idx, MelnikovReport& r) {
        detail::Collector col(p.max_violations);
        std::vector<int> l(static_cast<std::size_t>(nu));
        detail::unflatten(idx, p.l_max, l);
        if (std::all_of(l.begin(), l.end(), [](int x) { return x == 0; })) return;
        const long m = detail::momentum(v, l);
        const double base = p.gamma * std::pow(bracket(l), -p.tau);
        const double wl = lattice_divisor(omega, l);
        for (long j = std::max(-J, -J - m); j <= std::min(J, J - m); ++j) {
          const long k = j + m;
          if (j == 0 || k == 0) continue;
          const double bj = std::sqrt(1.0 + static_cast<double>(j) * j);
          const double bk = std::sqrt(1.0 + static_cast<double>(k) * k);
          const double threshold = base / std::pow(bj * bk, p.loss_d);
          col.record(r, Triple{l, j, k}, wl + d.d(j) - d.d(k), threshold);
        }
      });
}

/// (1/pi) sum_n n|n| zeta_n.
inline double m1_model(const TangentialSet& s, std::span<const double> zeta) {
  if (static_cast<int>(zeta.size()) != s.nu()) throw InvalidArgument("m1_model: zeta length differs from nu");
  double m = 0.0;
  for (int i = 0; i < s.nu(); ++i) m += static_cast<double>(s[i]) * static_cast<double>(std::labs(s[i])) * zeta[i];
  return m / std::numbers::pi;
}

struct MeasureResult {
  double fraction = 0.0;
  long long passed = 0;
  long long samples = 0;
};

/// Fraction of zeta uniform in [eps^2, 2 eps^2]^nu whose omega = omega_bar + A zeta
/// passes the diophantine and zero-order conditions with m1 = m1_model(S, zeta).
/// Sample i draws from its own generator seeded by (seed, i).
inline MeasureResult measure_estimate(const TangentialSet& s, double eps, const MelnikovParams& p, long long n_samples,
                                      std::uint64_t seed) {
  p.validate(s.nu());
  if (n_samples < 1) throw InvalidArgument("measure_estimate: n_samples must be positive");
  if (!(eps > 0.0)) throw InvalidArgument("measure_estimate: eps must be positive");
  const auto t = normalform::twist_matrix(s);
  const auto wb = s.omega_bar();
  const auto v = s.velocity();
  const double e2 = eps * eps;
  const int workers = std::max(1, static_cast<int>(std::min<long long>(p.workers, n_samples)));
  std::vector<long long> passed(static_cast<std::size_t>(workers), 0);
  auto run = [&](int w) {
    std::vector<double> zeta(static_cast<std::size_t>(s.nu()));
    for (long long i = w; i < n_samples; i += workers) {
      std::mt19937_64 rng(detail::splitmix64(seed ^ detail::splitmix64(static_cast<std::uint64_t>(i))));
      std::uniform_real_distribution<double> u(e2, 2.0 * e2);
      for (auto& z : zeta) z = u(rng);
      const auto omega = normalform::frequency_amplitude(t, wb, zeta);
      if (!detail::lattice_passes(omega, p.gamma, p.tau, p.l_max)) continue;
      const auto shifted = shifted_frequency(omega, m1_model(s, zeta), v);
      if (detail::lattice_passes(shifted, p.gamma, p.tau, p.l_max)) ++passed[static_cast<std::size_t>(w)];
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& th : pool) th.join();
  }
  MeasureResult r;
  r.samples = n_samples;
  for (auto c : passed) r.passed += c;
  r.fraction = static_cast<double>(r.passed) / static_cast<double>(n_samples);
  return r;
}

}  // namespace qpww::melnikov
