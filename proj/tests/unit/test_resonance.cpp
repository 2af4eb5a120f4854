#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qpww/resonance.hpp"

using namespace qpww;
using namespace qpww::resonance;

namespace {

bool contains(const std::vector<ResonanceTuple>& list, const ResonanceTuple& t) {
  return std::binary_search(list.begin(), list.end(), t.canonical());
}

// Independent floating-point evaluation of sum l_i sqrt|j_i|.
double float_combination(std::span<const long> js, std::span<const long> ls) {
  double s = 0.0;
  for (std::size_t i = 0; i < js.size(); ++i) s += ls[i] * std::sqrt(static_cast<double>(std::labs(js[i])));
  return s;
}

}  // namespace

TEST(SquareFree, Decomposition) {
  EXPECT_EQ(square_free(1).coefficient, 1);
  EXPECT_EQ(square_free(1).kernel, 1);
  EXPECT_EQ(square_free(8).coefficient, 2);
  EXPECT_EQ(square_free(8).kernel, 2);
  EXPECT_EQ(square_free(4900).coefficient, 70);
  EXPECT_EQ(square_free(4900).kernel, 1);
  EXPECT_EQ(square_free(4998).kernel, 102);
  EXPECT_EQ(square_free(4998).coefficient, 7);
  EXPECT_THROW(square_free(0), InvalidArgument);
}

TEST(SqrtCombination, Examples) {
  const long j1[] = {2, 8}, l1[] = {2, -1};
  EXPECT_TRUE(sqrt_combination_is_zero(j1, l1));
  const long j2[] = {1, 4}, l2[] = {1, -2};
  EXPECT_FALSE(sqrt_combination_is_zero(j2, l2));
  const long j3[] = {3, 5, 7}, l3[] = {0, 0, 0};
  EXPECT_TRUE(sqrt_combination_is_zero(j3, l3));
  const long j4[] = {0, 4}, l4[] = {1, 1};
  EXPECT_THROW(sqrt_combination_is_zero(j4, l4), InvalidArgument);
}

TEST(SqrtCombination, AgreesWithFloatingPoint) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<long> site(1, 60), coef(-4, 4), len(2, 4);
  int exact_zero = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto n = static_cast<std::size_t>(len(rng));
    std::vector<long> js(n), ls(n);
    for (std::size_t i = 0; i < n; ++i) {
      js[i] = site(rng) * (rng() % 2 ? 1 : -1);
      ls[i] = coef(rng);
    }
    // Force some exact cancellations: l_0 sqrt|j_0| against a square multiple.
    if (trial % 5 == 0) {
      const long a = site(rng) % 7 + 1;
      js[1] = js[0] * a * a;
      ls[1] = -ls[0];
      ls[0] *= a;
      for (std::size_t i = 2; i < n; ++i) ls[i] = 0;
    }
    const bool exact = sqrt_combination_is_zero(js, ls);
    const double f = std::abs(float_combination(js, ls));
    if (exact) {
      ++exact_zero;
      EXPECT_LE(f, 1e-9);
    }
    if (f <= 1e-9) EXPECT_TRUE(exact);
  }
  EXPECT_GT(exact_zero, 1000);
}

TEST(ResonanceTuple, RejectsZeroSiteAndBadSigns) {
  EXPECT_THROW(ResonanceTuple({0, 1}, {1, -1}), InvalidArgument);
  EXPECT_THROW(ResonanceTuple({1, 1}, {1, 0}), InvalidArgument);
  EXPECT_THROW(ResonanceTuple({1, 1}, {1}), InvalidArgument);
}

TEST(ResonanceTuple, CanonicalFormStartsPositive) {
  const ResonanceTuple t({4, -1, 9, 4}, {-1, 1, 1, -1});
  const auto c = t.canonical();
  EXPECT_EQ(c.signs()[0], 1);
  EXPECT_EQ(ResonanceTuple({4, -1, 9, 4}, {1, -1, -1, 1}).canonical(), c);
  EXPECT_EQ(ResonanceTuple({9, 4, 4, -1}, {1, -1, -1, 1}).canonical(), c);
}

TEST(Enumerate, NoThreeWaveResonances) {
  EXPECT_TRUE(enumerate_resonances(3, 2000).empty());
}

TEST(Enumerate, FourWaveSmallBox) {
  const auto r = enumerate_resonances(4, 10);
  EXPECT_TRUE(contains(r, ResonanceTuple({-1, 4, 9, 4}, {1, -1, 1, -1})));
  for (long j = -10; j <= 10; ++j) {
    for (long k = -10; k <= 10; ++k) {
      if (j == 0 || k == 0) continue;
      EXPECT_TRUE(contains(r, ResonanceTuple({j, j, k, k}, {1, -1, 1, -1}))) << j << "," << k;
    }
  }
  for (const auto& t : r) EXPECT_EQ(t, t.canonical());
  EXPECT_TRUE(std::is_sorted(r.begin(), r.end()));
  EXPECT_EQ(std::adjacent_find(r.begin(), r.end()), r.end());
}

TEST(Enumerate, EveryTupleReverifies) {
  for (int n : {4, 5, 6}) {
    const auto r = enumerate_resonances(n, n == 4 ? 40 : 12);
    EXPECT_FALSE(r.empty());
    for (const auto& t : r) {
      long long m = 0;
      double f = 0.0;
      for (std::size_t i = 0; i < t.order(); ++i) {
        m += t.signs()[i] * t.sites()[i];
        f += t.signs()[i] * std::sqrt(static_cast<double>(std::labs(t.sites()[i])));
      }
      EXPECT_EQ(m, 0);
      EXPECT_LE(std::abs(f), 1e-10);
      EXPECT_TRUE(t.is_resonant());
    }
  }
}

TEST(Enumerate, MatchesBruteForceOnTinyBox) {
  // Independent exhaustive scan over all signed 4-tuples with |j| <= 6.
  constexpr long N = 6;
  std::vector<ResonanceTuple> brute;
  std::vector<std::pair<long, int>> alpha;
  for (long j = -N; j <= N; ++j)
    if (j != 0)
      for (int s : {-1, 1}) alpha.emplace_back(j, s);
  for (const auto& a : alpha)
    for (const auto& b : alpha)
      for (const auto& c : alpha)
        for (const auto& d : alpha) {
          ResonanceTuple t({a.first, b.first, c.first, d.first}, {a.second, b.second, c.second, d.second});
          if (t.is_resonant()) brute.push_back(t.canonical());
        }
  std::sort(brute.begin(), brute.end());
  brute.erase(std::unique(brute.begin(), brute.end()), brute.end());
  EXPECT_EQ(enumerate_resonances(4, N), brute);
}

TEST(Enumerate, DeterministicAcrossWorkers) {
  EnumerateOptions one, four;
  four.workers = 4;
  EXPECT_EQ(enumerate_resonances(4, 60, one), enumerate_resonances(4, 60, four));
}

TEST(Enumerate, Bounds) {
  EXPECT_THROW(enumerate_resonances(4, 5001), BoundExceeded);
  EXPECT_THROW(enumerate_resonances(2, 10), InvalidArgument);
  EXPECT_THROW(enumerate_resonances(7, 10), InvalidArgument);
  EnumerateOptions tight;
  tight.max_results = 10;
  EXPECT_THROW(enumerate_resonances(4, 10, tight), BoundExceeded);
}

TEST(Trivial, Examples) {
  EXPECT_TRUE(is_trivial(ResonanceTuple({5, 5, 7, 7}, {1, -1, 1, -1})));
  EXPECT_FALSE(is_trivial(ResonanceTuple({-1, 4, 9, 4}, {1, -1, 1, -1})));
  EXPECT_FALSE(is_trivial(ResonanceTuple({1, 1, 1}, {1, -1, 1})));
}

TEST(BenjaminFeir, Examples) {
  EXPECT_EQ(benjamin_feir(1, 1), ResonanceTuple({-1, 4, 9, 4}, {1, -1, 1, -1}));
  EXPECT_EQ(benjamin_feir(1, 2), ResonanceTuple({-4, 9, 49, 36}, {1, -1, 1, -1}));
  EXPECT_EQ(benjamin_feir(2, 1), ResonanceTuple({-2, 8, 18, 8}, {1, -1, 1, -1}));
  EXPECT_THROW(benjamin_feir(0, 1), InvalidArgument);
  EXPECT_THROW(benjamin_feir(1, 0), InvalidArgument);
}

TEST(BenjaminFeir, FamilyIsResonantAndNontrivial) {
  for (long lam : {-3L, -1L, 1L, 2L, 5L})
    for (long b = 1; b <= 6; ++b) {
      const auto t = benjamin_feir(lam, b);
      EXPECT_TRUE(t.is_resonant());
      EXPECT_FALSE(is_trivial(t));
      const auto p = benjamin_feir_parameters(t);
      ASSERT_TRUE(p);
      EXPECT_EQ(benjamin_feir(p->first, p->second).canonical(), t.canonical());
    }
}

TEST(BenjaminFeir, CompletesFourWaveResonances) {
  EnumerateOptions opt;
  opt.include_trivial = false;
  opt.workers = 2;
  const auto r = enumerate_resonances(4, 200, opt);
  EXPECT_FALSE(r.empty());
  for (const auto& t : r) EXPECT_TRUE(benjamin_feir_parameters(t).has_value());
}

TEST(GenericSites, SingleSiteAccepted) {
  const auto r = generic_sites_search(1, 3, 3, 10);
  EXPECT_EQ(r.sites.nu(), 1);
  EXPECT_EQ(r.sites[0], 3);
  EXPECT_NEAR(r.certificate.twist_determinant, 27.0 / (2 * std::numbers::pi), 1e-12);
}

TEST(GenericSites, RejectsDependentFrequencies) {
  const TangentialSet s{1, 4};
  const auto rel = omega_bar_relation(s, 10);
  ASSERT_TRUE(rel);
  const long js[] = {1, 4};
  EXPECT_TRUE(sqrt_combination_is_zero(js, *rel));
  EXPECT_FALSE(omega_bar_relation(TangentialSet{1, 2}, 50));
}

TEST(GenericSites, FindsOneTwo) {
  const auto r = generic_sites_search(2, 1, 10, 10);
  EXPECT_EQ(std::vector<long>(r.sites.sites().begin(), r.sites.sites().end()), (std::vector<long>{1, 2}));
  EXPECT_NE(r.certificate.twist_determinant, 0.0);
}

TEST(GenericSites, CertificateListsRejections) {
  EXPECT_THROW(generic_sites_search(2, 1, 1, 5), SearchExhausted);
  // The only pair in range is {-1, 1}.
  EXPECT_THROW(generic_sites_search(2, -1, 1, 5), SearchExhausted);
  const auto r = generic_sites_search(2, -1, 4, 5);
  EXPECT_GE(r.certificate.checks.size(), 2u);
  EXPECT_NE(r.certificate.checks.front().find("rejected"), std::string::npos);
}

TEST(TangentialSet, Invariants) {
  EXPECT_THROW(TangentialSet({1, -1}), InvalidArgument);
  EXPECT_THROW(TangentialSet({2, 2}), InvalidArgument);
  EXPECT_THROW(TangentialSet({0}), InvalidArgument);
  const TangentialSet s{1, -4};
  EXPECT_EQ(s.nu(), 2);
  EXPECT_EQ(s.omega_bar()[1], 2.0);
}
