#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qpww/melnikov.hpp"

using namespace qpww;
using namespace qpww::melnikov;

namespace {

struct BruteLattice {
  double min_divisor = std::numeric_limits<double>::infinity();
  long long violations = 0;
};

// Every l in the box, no candidate pruning.
BruteLattice brute_lattice(const std::vector<double>& w, double gamma, double tau, int L) {
  BruteLattice b;
  const int nu = static_cast<int>(w.size());
  std::vector<int> l(nu, -L);
  while (true) {
    bool zero = true, positive = false;
    for (int v : l)
      if (v != 0) {
        positive = zero && v > 0 ? true : positive;
        zero = false;
        break;
      }
    if (!zero && positive) {
      double div = 0.0, n2 = 1.0;
      for (int i = 0; i < nu; ++i) {
        div += w[i] * l[i];
        n2 += static_cast<double>(l[i]) * l[i];
      }
      b.min_divisor = std::min(b.min_divisor, std::abs(div));
      if (std::abs(div) < gamma * std::pow(n2, -tau / 2)) ++b.violations;
    }
    int i = nu - 1;
    while (i >= 0 && l[i] == L) l[i--] = -L;
    if (i < 0) break;
    ++l[i];
  }
  return b;
}

DiagonalModel perturbed_model(std::uint64_t seed) {
  DiagonalModel d;
  d.m1 = 0.002;
  d.m_half = 0.01;
  d.m0 = 0.003;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1e-4, 1e-4);
  d.r.resize(2 * 50 + 1);
  for (auto& x : d.r) x = u(rng);
  d.r[50] = 0.0;
  return d;
}

}  // namespace

TEST(Diophantine, ResonantVectorFails) {
  const std::vector<double> w{1.0, 2.0};
  const auto r = diophantine_check(w, 1e-3, 2.0, 5);
  EXPECT_FALSE(r.pass);
  ASSERT_TRUE(r.argmin);
  EXPECT_EQ(r.argmin->l, (std::vector<int>{2, -1}));
  EXPECT_EQ(r.min_divisor, 0.0);
  EXPECT_EQ(r.violations.front().at.l, (std::vector<int>{2, -1}));
}

TEST(Diophantine, GoldenExamples) {
  const std::vector<double> w{1.0, std::numbers::sqrt2};
  EXPECT_TRUE(diophantine_check(w, 1e-4, 1.5, 1000).pass);
  const std::vector<double> one{1.0};
  const auto r = diophantine_check(one, 0.5, 1.0, 50);
  EXPECT_TRUE(r.pass);
  EXPECT_EQ(r.min_divisor, 1.0);
}

TEST(Diophantine, ZeroVectorNeverChecked) {
  const std::vector<double> w{0.0, 0.0};
  const auto r = diophantine_check(w, 0.1, 2.0, 1);
  EXPECT_EQ(r.checked, 4);
  for (const auto& v : r.violations) EXPECT_NE(v.at.l, (std::vector<int>{0, 0}));
}

TEST(Diophantine, MatchesExhaustiveScan) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int nu = 1 + trial % 3;
    std::vector<double> w(nu);
    for (auto& x : w) x = u(rng);
    const int L = nu == 3 ? 6 : 15;
    const double gamma = trial % 2 ? 0.02 : 0.6;
    const auto r = diophantine_check(w, gamma, nu + 1.0, L);
    const auto b = brute_lattice(w, gamma, nu + 1.0, L);
    EXPECT_EQ(r.violation_count, b.violations) << trial;
    EXPECT_EQ(r.pass, b.violations == 0);
    EXPECT_NEAR(r.min_divisor, b.min_divisor, 1e-15) << trial;
  }
}

TEST(Diophantine, WorkerCountIndependent) {
  const std::vector<double> w{1.0, 1.7, 0.4};
  const auto a = diophantine_check(w, 0.05, 3.0, 12, 1);
  const auto b = diophantine_check(w, 0.05, 3.0, 12, 5);
  EXPECT_EQ(a.violation_count, b.violation_count);
  EXPECT_EQ(a.min_divisor, b.min_divisor);
  EXPECT_EQ(a.argmin, b.argmin);
  ASSERT_EQ(a.violations.size(), b.violations.size());
  for (std::size_t i = 0; i < a.violations.size(); ++i) EXPECT_EQ(a.violations[i].at, b.violations[i].at);
}

TEST(Diophantine, RejectsBadParameters) {
  const std::vector<double> w{1.0, 2.0};
  EXPECT_THROW(diophantine_check(w, 0.0, 2.0, 5), InvalidArgument);
  EXPECT_THROW(diophantine_check(w, 0.1, 1.0, 5), InvalidArgument);
}

TEST(Diophantine, MonotoneInGammaAndBox) {
  const std::vector<double> w{1.0, 1.3};
  long long prev = -1;
  for (double g : {1e-4, 1e-3, 1e-2, 1e-1}) {
    const auto r = diophantine_check(w, g, 3.0, 40);
    EXPECT_GE(r.violation_count, prev);
    prev = r.violation_count;
  }
  EXPECT_LE(diophantine_check(w, 0.05, 3.0, 10).violation_count,
            diophantine_check(w, 0.05, 3.0, 20).violation_count);
}

TEST(ZeroMelnikov, ReducesToDiophantine) {
  const std::vector<double> w{1.1, 1.9};
  const std::vector<int> v{1, 2};
  const auto a = zero_melnikov(w, 0.0, v, 0.01, 3.0, 30);
  const auto b = diophantine_check(w, 0.01, 3.0, 30);
  EXPECT_EQ(a.min_divisor, b.min_divisor);
  EXPECT_EQ(a.violation_count, b.violation_count);
}

TEST(ZeroMelnikov, OneDimensional) {
  const std::vector<double> w{1.5};
  const std::vector<int> v{2};
  const auto r = zero_melnikov(w, 0.2, v, 0.5, 1.0, 20);
  EXPECT_DOUBLE_EQ(r.min_divisor, 1.1);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(zero_melnikov(w, 0.75, v, 0.5, 1.0, 20).pass);
}

TEST(ZeroMelnikov, TwistedFrequencyExample) {
  const TangentialSet s{1, 2};
  const double eps = 0.1;
  const std::vector<double> zeta{eps * eps, eps * eps};
  const auto omega = normalform::frequency_amplitude(s, zeta);
  const double m1 = m1_model(s, zeta);
  EXPECT_NEAR(m1, eps * eps * 5.0 / std::numbers::pi, 1e-16);
  const auto v = s.velocity();
  const auto loose = zero_melnikov(omega, m1, v, 1e-12, 3.0, 500);
  const auto tight = zero_melnikov(omega, m1, v, 1e-2, 3.0, 500);
  EXPECT_TRUE(loose.pass);
  EXPECT_EQ(loose.min_divisor, tight.min_divisor);
  EXPECT_GE(tight.violation_count, loose.violation_count);
  EXPECT_EQ(tight.pass, tight.violation_count == 0);
  for (const auto& x : tight.violations) EXPECT_LT(std::abs(x.divisor), x.threshold);
}

TEST(SecondMelnikov, BenjaminFeirZeroDivisor) {
  const TangentialSet s{-1, 4};
  DiagonalModel d;
  MelnikovParams p;
  p.gamma = 1e-3;
  p.tau = 3.0;
  p.eta_m = 1e-9;
  p.l_max = 2;
  p.j_max = 40;
  const auto r = second_melnikov(s.omega_bar(), d, s.velocity(), p);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.min_divisor, 0.0);
  bool found = false;
  for (const auto& x : r.violations)
    found = found || (x.at.l == std::vector<int>{1, -1} && x.at.j == 9 && x.at.k == 4);
  EXPECT_TRUE(found);
}

TEST(SecondMelnikov, TrivialTriplesExcluded) {
  const TangentialSet s{1, 2};
  MelnikovParams p;
  p.l_max = 2;
  p.j_max = 30;
  p.eta_m = 10.0;  // every enumerated triple is a violation
  const auto r = second_melnikov(s.omega_bar(), DiagonalModel{}, s.velocity(), p);
  EXPECT_GT(r.violation_count, 0);
  for (const auto& x : r.violations) EXPECT_FALSE(x.at.l == (std::vector<int>{0, 0}));
  for (const auto& e : r.radius) EXPECT_FALSE(e.l == (std::vector<int>{0, 0}));
}

TEST(SecondMelnikov, MomentumFilter) {
  const TangentialSet s{1, 3};
  MelnikovParams p;
  p.l_max = 3;
  p.j_max = 50;
  p.eta_m = 10.0;
  p.max_violations = 100000;
  const auto r = second_melnikov(s.omega_bar(), DiagonalModel{}, s.velocity(), p);
  ASSERT_EQ(static_cast<long long>(r.violations.size()), r.violation_count);
  for (const auto& x : r.violations) EXPECT_EQ(x.at.l[0] + 3 * x.at.l[1] + x.at.j - x.at.k, 0);
}

TEST(SecondMelnikov, MatchesBruteForce) {
  const TangentialSet s{1, 2};
  const auto d = perturbed_model(3);
  const std::vector<double> omega{1.0131, 1.4327};
  MelnikovParams p;
  p.gamma = 0.05;
  p.tau = 1.1;
  p.eta_m = 0.02;
  p.l_max = 4;
  p.j_max = 400;
  p.max_violations = 1000000;
  const auto r = second_melnikov(omega, d, s.velocity(), p);
  long long admissible = 0, violations = 0;
  for (int a = -4; a <= 4; ++a)
    for (int b = -4; b <= 4; ++b)
      for (long j = -400; j <= 400; ++j) {
        const long k = j + a + 2 * b;
        if (j == 0 || k == 0 || std::labs(k) > 400 || (a == 0 && b == 0)) continue;
        ++admissible;
        const double psi = omega[0] * a + omega[1] * b + d.d(j) - d.d(k);
        if (std::abs(psi) < p.eta_m * std::pow(1.0 + a * a + b * b, -p.tau / 2)) ++violations;
      }
  EXPECT_EQ(r.checked + r.certified, admissible);
  EXPECT_EQ(r.violation_count, violations);
  EXPECT_GT(r.certified, 0);
}

TEST(SecondMelnikov, ReductionSoundness) {
  const TangentialSet s{1, 2};
  const auto d = perturbed_model(11);
  const std::vector<double> omega{1.0131, 1.4327};
  const auto v = s.velocity();
  MelnikovParams p;
  p.gamma = 0.05;
  p.tau = 1.1;
  p.eta_m = 0.01;
  p.l_max = 5;
  p.j_max = 3000;
  const auto r = second_melnikov(omega, d, v, p);
  long long sampled = 0;
  std::size_t finite = 0;
  for (const auto& e : r.radius) {
    if (!std::isfinite(e.radius)) continue;
    ++finite;
    const long m = e.l[0] + 2L * e.l[1];
    EXPECT_GE(e.radius, std::labs(m) + 1.0);
    const double threshold = p.eta_m * std::pow(bracket(e.l), -p.tau);
    for (long j = -p.j_max; j <= p.j_max; ++j) {
      const long k = j + m;
      if (std::labs(k) > p.j_max || std::min(std::labs(j), std::labs(k)) < e.radius) continue;
      if ((j + 3 * p.j_max) % 10 != 0) continue;
      ++sampled;
      EXPECT_EQ((j > 0), (k > 0));
      EXPECT_GE(std::abs(second_divisor(omega, d, e.l, j, k)), threshold) << j << "," << k;
    }
  }
  EXPECT_GT(finite, 10u);
  EXPECT_GT(sampled, 1000);
}

TEST(SecondMelnikov, RadiusInfiniteWhenZeroOrderFails) {
  const std::vector<double> omega{1.0, 2.0};
  const std::vector<int> v{1, 2};
  MelnikovParams p;
  const std::vector<int> l{2, -1};
  EXPECT_TRUE(std::isinf(reduction_radius(omega, DiagonalModel{}, v, l, p)));
  const std::vector<int> l2{1, 0};
  const double R = reduction_radius(omega, DiagonalModel{}, v, l2, p);
  const double margin = (p.gamma - p.eta_m) * std::pow(2.0, -p.tau / 2);
  EXPECT_NEAR(std::sqrt(R), 1.0 / (2.0 * margin), 1e-9 * std::sqrt(R));
}

TEST(SecondMelnikov, WorkerCountIndependent) {
  const TangentialSet s{1, 2};
  const auto d = perturbed_model(5);
  const std::vector<double> omega{1.0131, 1.4327};
  MelnikovParams p;
  p.gamma = 0.05;
  p.tau = 1.1;
  p.eta_m = 0.03;
  p.l_max = 3;
  p.j_max = 200;
  auto q = p;
  q.workers = 3;
  const auto a = second_melnikov(omega, d, s.velocity(), p);
  const auto b = second_melnikov(omega, d, s.velocity(), q);
  EXPECT_EQ(a.violation_count, b.violation_count);
  EXPECT_EQ(a.argmin, b.argmin);
  EXPECT_EQ(a.certified, b.certified);
  ASSERT_EQ(a.radius.size(), b.radius.size());
  for (std::size_t i = 0; i < a.radius.size(); ++i) EXPECT_EQ(a.radius[i].l, b.radius[i].l);
}

TEST(SecondMelnikov, MonotoneInEtaAndBounds) {
  const TangentialSet s{1, 2};
  const auto d = perturbed_model(9);
  const std::vector<double> omega{1.0131, 1.4327};
  MelnikovParams p;
  p.gamma = 0.05;
  p.tau = 1.1;
  p.l_max = 3;
  p.j_max = 200;
  long long prev = -1;
  for (double eta : {1e-4, 1e-3, 1e-2, 4e-2}) {
    p.eta_m = eta;
    const auto r = second_melnikov(omega, d, s.velocity(), p);
    EXPECT_GE(r.violation_count, prev);
    prev = r.violation_count;
  }
  auto wide = p;
  wide.j_max = 400;
  wide.l_max = 4;
  EXPECT_GE(second_melnikov(omega, d, s.velocity(), wide).violation_count, prev);
}

TEST(Lossy, ComparesPerTriple) {
  const TangentialSet s{1, 2};
  const auto d = perturbed_model(2);
  const std::vector<double> omega{1.0131, 1.4327};
  MelnikovParams p;
  p.gamma = 0.05;
  p.tau = 1.1;
  p.l_max = 3;
  p.j_max = 30;
  p.eta_m = p.gamma * p.gamma * p.gamma;
  p.max_violations = 1000000;
  const auto lossy = second_melnikov_lossy(omega, d, s.velocity(), p);
  const auto plain = second_melnikov(omega, d, s.velocity(), p);
  // Each lossy violation with a threshold below eta_M <l>^{-tau} is a plain violation too.
  for (const auto& x : lossy.violations) {
    EXPECT_NEAR(x.threshold,
                p.gamma * std::pow(bracket(x.at.l), -p.tau) /
                    std::pow(std::sqrt(1.0 + x.at.j * x.at.j) * std::sqrt(1.0 + x.at.k * x.at.k), p.loss_d),
                1e-15);
    if (x.threshold <= p.eta_m * std::pow(bracket(x.at.l), -p.tau)) {
      bool seen = false;
      for (const auto& y : plain.violations) seen = seen || y.at == x.at;
      EXPECT_TRUE(seen);
    }
  }
}

TEST(Lossy, LargeExponentIsVacuous) {
  const TangentialSet s{1, 2};
  const std::vector<double> omega{1.0131, 1.4327};
  MelnikovParams p;
  p.gamma = 0.05;
  p.tau = 1.1;
  p.l_max = 3;
  p.j_max = 30;
  p.loss_d = 400.0;
  p.max_violations = 1000000;
  const auto r = second_melnikov_lossy(omega, perturbed_model(4), s.velocity(), p);
  for (const auto& x : r.violations) EXPECT_TRUE(std::labs(x.at.j) < 2 || std::labs(x.at.k) < 2);
  p.loss_d = 1.0;
  EXPECT_THROW(second_melnikov_lossy(omega, DiagonalModel{}, s.velocity(), p), InvalidArgument);
}

TEST(Lossy, EqualSitesReduceToDiophantine) {
  // v . l = 0 forces j = k and a divisor omega . l.
  const TangentialSet s{1, 2};
  const std::vector<double> omega{1.0, 1.5};
  MelnikovParams p;
  p.gamma = 10.0;
  p.tau = 1.1;
  p.l_max = 2;
  p.j_max = 5;
  p.max_violations = 1000000;
  const auto r = second_melnikov_lossy(omega, DiagonalModel{}, s.velocity(), p);
  int equal = 0;
  for (const auto& x : r.violations)
    if (x.at.j == x.at.k) {
      ++equal;
      EXPECT_EQ(x.at.l[0] + 2 * x.at.l[1], 0);
      EXPECT_DOUBLE_EQ(x.divisor, lattice_divisor(omega, x.at.l));
    }
  EXPECT_GT(equal, 0);
}

TEST(Measure, DeterministicAndWorkerIndependent) {
  const TangentialSet s{1, 2};
  auto p = MelnikovParams::defaults(2, 0.1);
  p.l_max = 60;
  const auto a = measure_estimate(s, 0.1, p, 500, 42);
  const auto b = measure_estimate(s, 0.1, p, 500, 42);
  p.workers = 4;
  const auto c = measure_estimate(s, 0.1, p, 500, 42);
  EXPECT_EQ(a.passed, b.passed);
  EXPECT_EQ(a.passed, c.passed);
  EXPECT_EQ(a.samples, 500);
}

TEST(Measure, MonotoneInGamma) {
  const TangentialSet s{1, 2};
  auto p = MelnikovParams::defaults(2, 0.1);
  p.l_max = 40;
  double prev = 2.0;
  for (double g : {1e-8, 1e-3, 1e-2, 5e-2}) {
    p.gamma = g;
    const double f = measure_estimate(s, 0.1, p, 400, 9).fraction;
    EXPECT_LE(f, prev);
    prev = f;
  }
  p.gamma = 1e-12;
  EXPECT_EQ(measure_estimate(s, 0.1, p, 400, 9).fraction, 1.0);
  p.gamma = 2.0;
  EXPECT_LT(measure_estimate(s, 0.1, p, 400, 9).fraction, 1.0);
}

TEST(Measure, Defaults) {
  const auto p = MelnikovParams::defaults(2, 0.05);
  EXPECT_EQ(p.tau, 3.0);
  EXPECT_NEAR(p.gamma, std::pow(0.05, 2.5), 1e-18);
  EXPECT_NEAR(p.eta_m, std::pow(p.gamma, 3), 1e-24);
  EXPECT_LT(p.gamma / (0.05 * 0.05), 1.0);
  EXPECT_THROW(measure_estimate(TangentialSet{1}, 0.1, p, 0, 1), InvalidArgument);
}
