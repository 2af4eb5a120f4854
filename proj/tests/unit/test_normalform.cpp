#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "qpww/normalform.hpp"

using namespace qpww;
using namespace qpww::normalform;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Twist, SingleSite) {
  const auto t = twist_matrix(TangentialSet{1});
  ASSERT_EQ(t.a.rows(), 1);
  EXPECT_EQ(t.a(0, 0), 1.0 / (2 * kPi));
}

TEST(Twist, OneTwo) {
  const auto t = twist_matrix(TangentialSet{1, 2});
  EXPECT_EQ(t.a(0, 0), 1.0 / (2 * kPi));
  EXPECT_EQ(t.a(0, 1), 4.0 / (2 * kPi));
  EXPECT_EQ(t.a(1, 0), 4.0 / (2 * kPi));
  EXPECT_EQ(t.a(1, 1), 8.0 / (2 * kPi));
  EXPECT_NEAR(t.determinant(), -8.0 / (4 * kPi * kPi), 1e-15);
}

TEST(Twist, OppositeSignsDecouple) {
  const auto t = twist_matrix(TangentialSet{1, -2});
  EXPECT_EQ(t.a(0, 1), 0.0);
  EXPECT_EQ(t.a(1, 0), 0.0);
}

TEST(Twist, SymmetryAndSparsityPattern) {
  const TangentialSet s{3, -1, 5, -7, 2};
  const auto t = twist_matrix(s);
  EXPECT_EQ((t.a - t.a.transpose()).cwiseAbs().maxCoeff(), 0.0);
  for (int p = 0; p < s.nu(); ++p)
    for (int q = 0; q < s.nu(); ++q) EXPECT_EQ(t.a(p, q) != 0.0, p == q || (s[p] > 0) == (s[q] > 0));
}

TEST(FrequencyAmplitude, Examples) {
  const double z0[] = {0.0, 0.0};
  const auto w0 = frequency_amplitude(TangentialSet{1, 2}, z0);
  EXPECT_EQ(w0[0], 1.0);
  EXPECT_EQ(w0[1], std::sqrt(2.0));
  const double z1[] = {2 * kPi};
  EXPECT_NEAR(frequency_amplitude(TangentialSet{1}, z1)[0], 2.0, 1e-15);
  const double z2[] = {kPi, kPi};
  const auto w2 = frequency_amplitude(TangentialSet{1, 2}, z2);
  EXPECT_NEAR(w2[0], 3.5, 1e-14);
  EXPECT_NEAR(w2[1], std::sqrt(2.0) + 6.0, 1e-14);
}

TEST(FrequencyAmplitude, AffineAndScaling) {
  const TangentialSet s{1, 2, -3};
  const auto wb = s.omega_bar();
  const double z1[] = {0.25, 0.5, 1.0}, z2[] = {2.0, 0.125, 0.75};
  const double a = 0.5, b = 2.0;
  const double mix[] = {a * z1[0] + b * z2[0], a * z1[1] + b * z2[1], a * z1[2] + b * z2[2]};
  const auto w1 = frequency_amplitude(s, z1), w2 = frequency_amplitude(s, z2), wm = frequency_amplitude(s, mix);
  for (int p = 0; p < 3; ++p) EXPECT_NEAR(wm[p] - wb[p], a * (w1[p] - wb[p]) + b * (w2[p] - wb[p]), 1e-14);
  // Power-of-two factors keep the scaling check exact in binary arithmetic.
  const double e2 = 0.25;
  const double scaled[] = {e2 * z1[0], e2 * z1[1], e2 * z1[2]};
  const auto t = twist_matrix(s);
  const auto d1 = frequency_shift(t, z1), ds = frequency_shift(t, scaled);
  for (int p = 0; p < 3; ++p) EXPECT_EQ(ds[p], e2 * d1[p]);
  const auto ws = frequency_amplitude(s, scaled);
  for (int p = 0; p < 3; ++p) EXPECT_NEAR(ws[p] - wb[p], e2 * (w1[p] - wb[p]), 1e-15);
}

TEST(FrequencyAmplitude, RejectsNegativeActionsAndBadLength) {
  const double z[] = {-1.0};
  EXPECT_THROW(frequency_amplitude(TangentialSet{1}, z), InvalidArgument);
  const double z2[] = {1.0, 1.0};
  EXPECT_THROW(frequency_amplitude(TangentialSet{1}, z2), InvalidArgument);
}

TEST(InvertFrequencyAmplitude, Examples) {
  const TangentialSet s{1};
  const double w[] = {2.0};
  EXPECT_NEAR(invert_frequency_amplitude(s, w).zeta[0], 2 * kPi, 1e-13);
  const TangentialSet s2{1, 2};
  const auto wb = s2.omega_bar();
  const auto r = invert_frequency_amplitude(s2, wb);
  EXPECT_EQ(r.zeta[0], 0.0);
  EXPECT_EQ(r.zeta[1], 0.0);
  EXPECT_TRUE(r.outside_cone);
}

TEST(InvertFrequencyAmplitude, SingularTwistRejected) {
  TwistMatrix t{{1, 2}, Eigen::MatrixXd::Ones(2, 2)};
  const double wb[] = {1.0, 1.0}, w[] = {2.0, 3.0};
  EXPECT_THROW(invert_frequency_amplitude(t, wb, w), SingularTwist);
}

TEST(InvertFrequencyAmplitude, RoundTripOnPositiveCone) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  const TangentialSet s{1, 2, -5};
  for (int trial = 0; trial < 100; ++trial) {
    const double z[] = {u(rng), u(rng), u(rng)};
    const auto w = frequency_amplitude(s, z);
    const auto r = invert_frequency_amplitude(s, w);
    EXPECT_FALSE(r.outside_cone);
    for (int p = 0; p < 3; ++p) EXPECT_NEAR(r.zeta[p], z[p], 1e-12 * std::max(1.0, z[p]));
  }
}

TEST(BirkhoffEnergy, Examples) {
  const double zero[] = {0.0};
  EXPECT_EQ(birkhoff_energy(TangentialSet{1}, zero), 0.0);
  const double one[] = {1.0};
  EXPECT_NEAR(birkhoff_energy(TangentialSet{1}, one), 1.0 + 1.0 / (4 * kPi), 1e-15);
}

TEST(BirkhoffEnergy, GradientIsFrequencyMap) {
  const TangentialSet s{1, 2, -3};
  const double i0[] = {0.3, 0.7, 0.2};
  const auto w = frequency_amplitude(s, i0);
  const double h = 1e-5;
  for (int p = 0; p < 3; ++p) {
    double ip[] = {i0[0], i0[1], i0[2]}, im[] = {i0[0], i0[1], i0[2]};
    ip[p] += h;
    im[p] -= h;
    const double fd = (birkhoff_energy(s, ip) - birkhoff_energy(s, im)) / (2 * h);
    EXPECT_NEAR(fd, w[p], 1e-8);
  }
}

TEST(ActionAngle, RoundTrip) {
  const std::vector<std::complex<double>> u = {{0.3, -0.4}, {-0.1, 0.2}};
  const auto aa = to_action_angle(u);
  EXPECT_NEAR(aa.actions[0], 0.25, 1e-15);
  const auto back = from_action_angle(aa);
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_LT(std::abs(back[i] - u[i]), 1e-15);
  const std::vector<std::complex<double>> z = {{0.0, 0.0}};
  EXPECT_THROW(to_action_angle(z), InvalidArgument);
}
