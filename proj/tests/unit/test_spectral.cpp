#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qpww/spectral.hpp"
#include "support/fields.hpp"

using namespace qpww;
using namespace qpww::spectral;
using qpww::testing::circle_field;
using qpww::testing::max_diff;
using qpww::testing::random_real_field;

TEST(Multiplier, AbsDOnCosine) {
  const auto s = ModeSpace::circle(16);
  const Field f = circle_field(s, [](double x) { return std::cos(x); });
  EXPECT_LT(max_diff(multiplier_apply(f, Multiplier::abs_d()), f), 1e-15);
}

TEST(Multiplier, SqrtAbsDOnSine4) {
  const auto s = ModeSpace::circle(16);
  const Field f = circle_field(s, [](double x) { return std::sin(4 * x); });
  const Field expect = cplx(2.0) * f;
  EXPECT_LT(max_diff(multiplier_apply(f, Multiplier::abs_d_pow(0.5)), expect), 1e-15);
}

TEST(Multiplier, ZeroMeanProjectionKillsMean) {
  const auto s = ModeSpace::circle(16);
  const Field f = circle_field(s, [](double x) { return 1.0 + std::cos(x); });
  const Field expect = circle_field(s, [](double x) { return std::cos(x); });
  EXPECT_LT(max_diff(multiplier_apply(f, Multiplier::zero_mean_projection()), expect), 1e-15);
}

TEST(Multiplier, NegativePowerRejectsMean) {
  const auto s = ModeSpace::circle(8);
  const Field f = circle_field(s, [](double x) { return 1.0 + std::cos(x); });
  EXPECT_THROW(multiplier_apply(f, Multiplier::abs_d_pow(-0.25)), InvalidArgument);
  const Field g = circle_field(s, [](double x) { return std::cos(x); });
  EXPECT_NO_THROW(multiplier_apply(g, Multiplier::abs_d_pow(-0.25)));
}

TEST(Multiplier, Linearity) {
  std::mt19937_64 rng(11);
  const auto s = ModeSpace::circle(32);
  const Field f = random_real_field(s, rng, 1.0, 0.9);
  const Field g = random_real_field(s, rng, 1.0, 0.9);
  const cplx a(0.7, 0.0), b(-1.3, 0.0);
  for (const auto& m : {Multiplier::abs_d(), Multiplier::abs_d_pow(0.25), Multiplier::sign(),
                        Multiplier::abs_d_pow(-0.25)}) {
    const Field lhs = multiplier_apply(a * f + b * g, m);
    const Field rhs = a * multiplier_apply(f, m) + b * multiplier_apply(g, m);
    EXPECT_LT(max_diff(lhs, rhs), 1e-13);
  }
}

TEST(Multiplier, EvenSymbolPreservesHermitianSymmetry) {
  std::mt19937_64 rng(5);
  const auto s = ModeSpace::circle(24);
  const Field f = random_real_field(s, rng, 1.0, 0.9);
  EXPECT_EQ(multiplier_apply(f, Multiplier::abs_d_pow(0.5)).hermitian_defect(), 0.0);
  EXPECT_EQ(multiplier_apply(f, Multiplier::abs_d()).hermitian_defect(), 0.0);
}

TEST(TorusDerivative, SingleMode) {
  const int v[2] = {1, 2};
  const auto s = ModeSpace::traveling(v, 4);
  Field w(s);
  w.set({2, -3}, 1.0);
  const double omega[2] = {1.0, std::sqrt(2.0)};
  const Field d = torus_directional_derivative(w, omega);
  const cplx expect(0.0, 2.0 - 3.0 * std::sqrt(2.0));
  EXPECT_LT(std::abs(d.at({2, -3}) - expect), 1e-15);
  EXPECT_EQ(d.max_abs(), std::abs(expect));
}

TEST(TorusDerivative, ConstantAndZeroFrequency) {
  std::mt19937_64 rng(3);
  const int v[2] = {1, 2};
  const auto s = ModeSpace::traveling(v, 4);
  Field c(s);
  c.set({0, 0}, 3.5);
  const double omega[2] = {1.0, 1.5};
  EXPECT_EQ(torus_directional_derivative(c, omega).max_abs(), 0.0);
  const Field w = random_real_field(s, rng, 1.0);
  const double zero[2] = {0.0, 0.0};
  EXPECT_EQ(torus_directional_derivative(w, zero).max_abs(), 0.0);
}

TEST(Transform, RoundtripCircleAndTorus) {
  std::mt19937_64 rng(1);
  for (const auto& s : {ModeSpace::circle(128), ModeSpace(2, 16, {-1, -2})}) {
    const Field f = random_real_field(s, rng, 1.0, 0.95);
    const Field back = Field::from_grid(s, f.to_grid());
    EXPECT_LE((back - f).norm(), 1e-13 * f.norm());
  }
}

TEST(Transform, RealFieldHasRealGridValues) {
  std::mt19937_64 rng(8);
  const auto s = ModeSpace(2, 8, {-1, -2});
  const Field f = random_real_field(s, rng, 1.0, 0.9);
  EXPECT_EQ(f.hermitian_defect(), 0.0);
  for (const auto& v : f.to_grid()) EXPECT_LT(std::abs(v.imag()), 1e-14);
}

namespace {

// Direct convolution of box coefficients, truncated to the box.
Field convolve(const Field& a, const Field& b) {
  const auto& s = a.space();
  Field out(s);
  const int d = s.dim();
  std::vector<int> k(static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      auto ki = s.box_mode(i);
      auto kj = s.box_mode(j);
      for (int m = 0; m < d; ++m) k[m] = ki[m] + kj[m];
      if (auto idx = s.box_index(k)) out[*idx] += a[i] * b[j];
    }
  }
  return out;
}

}  // namespace

TEST(Product, MatchesExactConvolution) {
  std::mt19937_64 rng(21);
  for (const auto& s : {ModeSpace::circle(8), ModeSpace(2, 6, {-1, -2})}) {
    const Field a = random_real_field(s, rng, 1.0, 0.8);
    const Field b = random_real_field(s, rng, 1.0, 0.8);
    EXPECT_LT(max_diff(product(a, b), convolve(a, b)), 1e-12);
  }
}

TEST(ModeSpace, TravelingWavenumbers) {
  const int v[2] = {1, -2};
  const auto s = ModeSpace::traveling(v, 3);
  const int k[2] = {2, 1};
  const auto b = s.box_index(k);
  ASSERT_TRUE(b);
  EXPECT_EQ(s.box_wavenumber(*b), -(1 * 2 + (-2) * 1));
  EXPECT_EQ(s.with_offset(5).box_wavenumber(*b), 5);
}

TEST(ModeSpace, RejectsBadShapes) {
  EXPECT_THROW(ModeSpace(0, 4, {}), InvalidArgument);
  EXPECT_THROW(ModeSpace(1, -1, {1}), InvalidArgument);
  EXPECT_THROW(ModeSpace(2, 4, {1}), InvalidArgument);
  EXPECT_THROW(ModeSpace::circle(8, 10), InvalidArgument);
}

TEST(Reflect, IsInvolution) {
  std::mt19937_64 rng(4);
  const auto s = ModeSpace::circle(16);
  const Field f = random_real_field(s, rng, 1.0);
  EXPECT_EQ(max_diff(reflect(reflect(f)), f), 0.0);
  const Field c = circle_field(s, [](double x) { return std::sin(x); });
  EXPECT_LT(max_diff(reflect(c), -c), 1e-15);
}

TEST(SobolevNorm, WeightsModes) {
  const auto s = ModeSpace::circle(8);
  Field f(s);
  f.set({2}, 1.0);
  EXPECT_NEAR(sobolev_norm(f, 1.0), std::sqrt(5.0), 1e-15);
  EXPECT_NEAR(sobolev_norm(f, 0.0), 1.0, 1e-15);
}
