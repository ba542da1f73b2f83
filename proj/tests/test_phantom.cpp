#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "tbss/phantom.hpp"

using namespace tbss;

namespace {

PhantomSpec small_spec() {
  PhantomSpec s;
  s.dims = {12, 48, 48};
  s.inner_radius = Profile::constant(8);
  s.outer_radius = Profile::constant(15);
  return s;
}

}  // namespace

TEST(Rng, CounterUniformIsReproducibleAndInRange) {
  EXPECT_EQ(counter_uniform(1, 2, 3), counter_uniform(1, 2, 3));
  EXPECT_NE(counter_uniform(1, 2, 3), counter_uniform(1, 2, 4));
  EXPECT_NE(counter_uniform(1, 2, 3), counter_uniform(1, 3, 3));
  EXPECT_NE(counter_uniform(1, 2, 3), counter_uniform(2, 2, 3));
  double sum = 0;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    const double u = counter_uniform(7, 0, i);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Profile, Shapes) {
  EXPECT_EQ(Profile::constant(3).at(5, 10), 3.0);
  EXPECT_EQ(Profile::linear(2, 4).at(0, 11), 2.0);
  EXPECT_EQ(Profile::linear(2, 4).at(10, 11), 4.0);
  EXPECT_EQ(Profile::linear(2, 4).at(5, 11), 3.0);
  EXPECT_EQ(Profile::linear(2, 4).at(0, 1), 2.0);
  const auto s = Profile::stenosis(10, 4, 20, 5);
  EXPECT_EQ(s.at(20, 64), 6.0);
  EXPECT_EQ(s.at(25, 64), 10.0);
  EXPECT_EQ(s.at(0, 64), 10.0);
  EXPECT_NEAR(s.at(22, 64), 10 - 4 * 0.5 * (1 + std::cos(std::numbers::pi * 0.4)), 1e-12);
}

TEST(Holes, AngleCoverage) {
  HoleSpec h;
  EXPECT_TRUE(h.covers_angle(123));
  h.angle_from = 30;
  h.angle_to = 150;
  EXPECT_TRUE(h.covers_angle(30));
  EXPECT_TRUE(h.covers_angle(90));
  EXPECT_FALSE(h.covers_angle(200));
  h.angle_from = 300;
  h.angle_to = 420;  // wraps through 0
  EXPECT_TRUE(h.covers_angle(10));
  EXPECT_FALSE(h.covers_angle(100));
}

TEST(Generate, CleanIndicatorsAreExact) {
  const auto ph = generate(small_spec());
  for (std::size_t i = 0; i < ph.gt.data().size(); ++i) {
    EXPECT_EQ(ph.inner.data()[i], ph.gt.data()[i] == 1 ? 1.0f : 0.0f);
    EXPECT_EQ(ph.outer.data()[i], ph.gt.data()[i] == 2 ? 1.0f : 0.0f);
  }
  for (bool h : ph.meta.healthy) EXPECT_TRUE(h);
}

TEST(Generate, RingsAreClosedAndDisjoint) {
  auto s = small_spec();
  s.eccentricity = Profile::linear(0, 3);
  const auto ph = generate(s);
  for (std::size_t n = 0; n < s.dims.slices; ++n) {
    const auto in = channel_slice(ph.gt, n, Label::Inner);
    const auto out = channel_slice(ph.gt, n, Label::Outer);
    EXPECT_EQ(oracle::components8(in), 1);
    EXPECT_EQ(oracle::components8(out), 1);
    EXPECT_EQ(trace_borders(in).holes.size() >= 1, true);
    EXPECT_EQ(trace_borders(out).holes.size() >= 1, true);
  }
}

TEST(Generate, FullAngleHoleZeroesTheChannel) {
  auto s = small_spec();
  s.holes = {HoleSpec{Channel::Outer, 3, 4}};
  const auto ph = generate(s);
  for (std::size_t n : {3u, 4u}) {
    for (float v : ph.outer.slice(n)) EXPECT_EQ(v, 0.0f);
    EXPECT_FALSE(ph.meta.healthy[n]);
  }
  EXPECT_TRUE(ph.meta.healthy[2]);
  EXPECT_TRUE(ph.meta.healthy[5]);
  float sum = 0;
  for (float v : ph.inner.slice(3)) sum += v;
  EXPECT_GT(sum, 0.0f);
}

TEST(Generate, PartialHoleOnlyTouchesItsArc) {
  auto s = small_spec();
  s.holes = {HoleSpec{Channel::Outer, 0, 0, 0, 90, 0.0}};
  const auto ph = generate(s);
  const int cr = 24, cc = 24;
  for (int r = 0; r < 48; ++r)
    for (int c = 0; c < 48; ++c) {
      if (ph.gt(0, r, c) != 2) continue;
      const double deg = std::fmod(std::atan2(-(r - cr), c - cc) * 180.0 / std::numbers::pi + 360.0, 360.0);
      if (deg > 1 && deg < 89) {
        EXPECT_EQ(ph.outer(0, r, c), 0.0f);
      }
      if (deg > 91 && deg < 359) {
        EXPECT_EQ(ph.outer(0, r, c), 1.0f);
      }
    }
}

TEST(Generate, ResidualAttenuates) {
  auto s = small_spec();
  s.holes = {HoleSpec{Channel::Inner, 2, 2, 0, 360, 0.25}};
  const auto ph = generate(s);
  for (std::size_t i = 0; i < ph.gt.slice(2).size(); ++i) {
    if (ph.gt.slice(2)[i] == 1) {
      EXPECT_EQ(ph.inner.slice(2)[i], 0.25f);
    }
  }
}

TEST(Generate, SameSeedSameBits) {
  auto s = small_spec();
  s.blur_sigma = 1.2;
  s.noise_amp = 0.2;
  s.seed = 42;
  const auto a = generate(s), b = generate(s);
  EXPECT_EQ(a.inner, b.inner);
  EXPECT_EQ(a.outer, b.outer);
  s.seed = 43;
  EXPECT_FALSE(generate(s).inner == a.inner);
}

TEST(Generate, NoisyValuesStayInRange) {
  auto s = small_spec();
  s.blur_sigma = 2.0;
  s.noise_amp = 1.0;
  const auto ph = generate(s);
  for (float v : ph.outer.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Generate, BlurredRingStillPeaksAtOne) {
  auto s = small_spec();
  s.blur_sigma = 1.5;
  const auto ph = generate(s);
  for (std::size_t i = 0; i < ph.gt.data().size(); ++i) {
    if (ph.gt.data()[i] == 1) {
      EXPECT_EQ(ph.inner.data()[i], 1.0f);
    }
  }
}

TEST(Generate, RadiusChangesMarkSlicesUnhealthy) {
  auto s = small_spec();
  s.dims = {40, 48, 48};
  s.inner_radius = Profile::stenosis(10, 4, 20, 5);
  const auto ph = generate(s);
  for (std::size_t n = 0; n < 40; ++n) {
    const double r = s.inner_radius.at(n, 40);
    EXPECT_EQ(ph.meta.healthy[n], std::abs(r - 10.0) <= 1.0) << n;
  }
}

TEST(Corrupt, IdentityAndBounds) {
  std::vector<float> v(2 * 8 * 8);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i % 11) / 10.0f;
  const ProbabilityVolume vol({2, 8, 8}, v);
  EXPECT_EQ(corrupt(vol, {}, 0.0, 1), vol);
  const auto noisy = corrupt(vol, {}, 0.1, 1);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LE(std::abs(noisy.data()[i] - v[i]), 0.1f + 1e-6f);
  const std::vector<HoleSpec> all{HoleSpec{Channel::Outer, 0, 1}};
  EXPECT_EQ(corrupt(vol, all, 0.0, 1), ProbabilityVolume({2, 8, 8}));
}

TEST(Spec, Validation) {
  auto expect_invalid = [](PhantomSpec s) {
    try {
      generate(s);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
  };
  auto s = small_spec();
  s.dims = {0, 48, 48};
  expect_invalid(s);
  s = small_spec();
  s.inner_radius = Profile::constant(16);
  expect_invalid(s);
  s = small_spec();
  s.outer_radius = Profile::constant(24);
  expect_invalid(s);
  s = small_spec();
  s.eccentricity = Profile::constant(17);
  expect_invalid(s);
  s = small_spec();
  s.noise_amp = 1.5;
  expect_invalid(s);
  s = small_spec();
  s.blur_sigma = -1;
  expect_invalid(s);
  s = small_spec();
  s.holes = {HoleSpec{Channel::Outer, 5, 12}};
  expect_invalid(s);
  s = small_spec();
  s.holes = {HoleSpec{Channel::Outer, 5, 4}};
  expect_invalid(s);
}

TEST(Spec, JsonRoundTrip) {
  const auto j = nlohmann::json::parse(R"({
    "dims": [20, 64, 64],
    "inner_radius": {"kind": "stenosis", "base": 10, "depth": 3, "center": 8, "width": 4},
    "outer_radius": 18,
    "eccentricity": {"kind": "linear", "from": 0, "to": 2},
    "blur_sigma": 1.0, "noise_amp": 0.1, "seed": 5,
    "holes": [{"channel": "outer", "slices": [3, 4], "angles": [30, 150], "residual": 0.2},
              {"channel": "inner", "slices": [7, 7]}]
  })");
  const auto s = phantom_spec_from_json(j);
  EXPECT_EQ(s.dims, (Dims{20, 64, 64}));
  EXPECT_EQ(s.inner_radius.at(8, 20), 7.0);
  EXPECT_EQ(s.outer_radius.at(0, 20), 18.0);
  EXPECT_EQ(s.eccentricity.at(19, 20), 2.0);
  EXPECT_EQ(s.seed, 5u);
  ASSERT_EQ(s.holes.size(), 2u);
  EXPECT_EQ(s.holes[0].angle_to, 150.0);
  EXPECT_EQ(s.holes[0].residual, 0.2);
  EXPECT_EQ(s.holes[1].channel, Channel::Inner);
  EXPECT_EQ(s.holes[1].residual, 0.0);
  const auto again = phantom_spec_from_json(phantom_spec_to_json(s));
  EXPECT_EQ(generate(again).inner, generate(s).inner);
}

TEST(Spec, JsonErrors) {
  EXPECT_THROW(phantom_spec_from_json(nlohmann::json::parse("[]")), Error);
  EXPECT_THROW(phantom_spec_from_json(nlohmann::json::parse(R"({"dims": [1, 2]})")), Error);
  EXPECT_THROW(phantom_spec_from_json(nlohmann::json::parse(R"({"dims": [4, 32, 32], "inner_radius": "x"})")),
               Error);
  EXPECT_THROW(
      phantom_spec_from_json(nlohmann::json::parse(R"({"dims": [4, 32, 32], "inner_radius": {"kind": "wave"}})")),
      Error);
}
