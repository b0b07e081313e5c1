#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "afgn/rng.hpp"
#include "afgn/spectrum.hpp"
#include "oracles.hpp"

using afgn::Image;
using afgn::SpectrumImage;

namespace {

Image random_image(int side, int channels, afgn::Rng& rng) {
  Image img(side, side, channels);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  return img;
}

std::vector<float> channel(const Image& img, int c) {
  return std::vector<float>(
      img.data.begin() + static_cast<size_t>(c) * img.pixels(),
      img.data.begin() + static_cast<size_t>(c + 1) * img.pixels());
}

}  // namespace

TEST(Dft2d, ConstantImage) {
  std::vector<float> ones(4, 1.0f);
  auto f = afgn::dft2d(ones, 2);
  EXPECT_NEAR(f[0].real(), 4.0, 1e-12);
  EXPECT_NEAR(f[0].imag(), 0.0, 1e-12);
  for (size_t i = 1; i < 4; ++i) EXPECT_NEAR(std::abs(f[i]), 0.0, 1e-12);
}

TEST(Dft2d, UnitImpulseIsFlat) {
  std::vector<float> x(16, 0.0f);
  x[0] = 1.0f;
  auto f = afgn::dft2d(x, 4);
  for (const auto& v : f) EXPECT_NEAR(std::abs(v), 1.0, 1e-12);
}

TEST(Dft2d, NyquistCheckerboard) {
  // [[1,-1],[-1,1]] concentrates everything in F(1,1)
  std::vector<float> x = {1.0f, -1.0f, -1.0f, 1.0f};
  auto f = afgn::dft2d(x, 2);
  EXPECT_NEAR(std::abs(f[0]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(f[1]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(f[2]), 0.0, 1e-12);
  EXPECT_NEAR(f[3].real(), 4.0, 1e-12);
}

TEST(Dft2d, Rejections) {
  std::vector<float> x(6, 0.0f);
  EXPECT_THROW(afgn::dft2d(x, 1), afgn::ValueError);
  EXPECT_THROW(afgn::dft2d(std::span<const float>(x.data(), 6), 3),
               afgn::ShapeError);
}

TEST(Dft2d, MatchesDirectOracleOnBothPaths) {
  afgn::Rng rng(101);
  for (int s : {4, 8, 6, 10}) {  // power-of-two and direct paths
    std::vector<float> x(static_cast<size_t>(s) * s);
    std::vector<double> xd(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
      x[i] = static_cast<float>(rng.uniform(-1, 1));
      xd[i] = x[i];
    }
    auto got = afgn::dft2d(x, s);
    auto want = oracle::dft2d_direct(xd, s);
    for (size_t i = 0; i < got.size(); ++i)
      ASSERT_NEAR(std::abs(got[i] - want[i]), 0.0, 1e-8) << "s=" << s;
  }
}

TEST(Dft2d, ParsevalWithRecipSquareFactor) {
  afgn::Rng rng(103);
  for (int s : {8, 16, 64, 12}) {
    std::vector<float> x(static_cast<size_t>(s) * s);
    double spatial = 0.0;
    for (auto& v : x) {
      v = static_cast<float>(rng.uniform(-1, 1));
      spatial += static_cast<double>(v) * v;
    }
    auto f = afgn::dft2d(x, s);
    double freq = 0.0;
    for (const auto& v : f) freq += std::norm(v);
    freq /= static_cast<double>(s) * s;
    EXPECT_NEAR(freq / spatial, 1.0, 1e-4) << "s=" << s;
  }
}

TEST(Dft2d, Linearity) {
  afgn::Rng rng(107);
  const int s = 16;
  std::vector<float> x(s * s), y(s * s), mix(s * s);
  const float a = 2.5f, b = -1.25f;
  for (size_t i = 0; i < x.size(); ++i) {
    x[i] = static_cast<float>(rng.uniform(-1, 1));
    y[i] = static_cast<float>(rng.uniform(-1, 1));
    mix[i] = a * x[i] + b * y[i];
  }
  auto fx = afgn::dft2d(x, s);
  auto fy = afgn::dft2d(y, s);
  auto fmix = afgn::dft2d(mix, s);
  for (size_t i = 0; i < fx.size(); ++i) {
    std::complex<double> want =
        std::complex<double>(a) * fx[i] + std::complex<double>(b) * fy[i];
    ASSERT_NEAR(std::abs(fmix[i] - want), 0.0, 1e-5);
  }
}

TEST(Dft2d, ConjugateSymmetryForRealInput) {
  afgn::Rng rng(109);
  const int s = 8;
  std::vector<float> x(s * s);
  for (auto& v : x) v = static_cast<float>(rng.uniform());
  auto f = afgn::dft2d(x, s);
  for (int k = 0; k < s; ++k)
    for (int l = 0; l < s; ++l) {
      auto a = f[static_cast<size_t>(k) * s + l];
      auto b = f[static_cast<size_t>((s - k) % s) * s + (s - l) % s];
      ASSERT_NEAR(std::abs(a - std::conj(b)), 0.0, 1e-9);
    }
}

TEST(Dft2d, MagnitudeInvariantUnderCircularShift) {
  afgn::Rng rng(113);
  const int s = 16;
  std::vector<float> x(s * s), shifted(s * s);
  for (auto& v : x) v = static_cast<float>(rng.uniform());
  const int dy = 5, dx = 9;
  for (int y = 0; y < s; ++y)
    for (int xx = 0; xx < s; ++xx)
      shifted[static_cast<size_t>((y + dy) % s) * s + (xx + dx) % s] =
          x[static_cast<size_t>(y) * s + xx];
  auto f1 = afgn::dft2d(x, s);
  auto f2 = afgn::dft2d(shifted, s);
  for (size_t i = 0; i < f1.size(); ++i)
    ASSERT_NEAR(std::abs(f1[i]), std::abs(f2[i]), 1e-5);
}

TEST(LogMagnitude, ConstantImageHasSingleBrightCenter) {
  Image img(8, 8, 1, 0.7f);
  SpectrumImage spec = afgn::log_magnitude_spectrum(img);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      float want = (y == 4 && x == 4) ? 1.0f : 0.0f;
      EXPECT_FLOAT_EQ(spec.at(0, y, x), want);
    }
}

TEST(LogMagnitude, DegenerateFlatSpectrumMapsToZeros) {
  // unit impulse has |F| == 1 everywhere; min-max range collapses
  Image img(8, 8, 1, 0.0f);
  img.at(0, 0, 0) = 1.0f;
  SpectrumImage spec = afgn::log_magnitude_spectrum(img);
  for (float v : spec.data) EXPECT_FLOAT_EQ(v, 0.0f);
}

TEST(LogMagnitude, ValuesInUnitIntervalAndFinite) {
  afgn::Rng rng(127);
  for (int trial = 0; trial < 5; ++trial) {
    Image img = random_image(32, 3, rng);
    SpectrumImage spec = afgn::log_magnitude_spectrum(img);
    EXPECT_EQ(spec.channels, 3);
    for (float v : spec.data) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(LogMagnitude, WhiteNoiseNeverLightsANonCenterBin) {
  // Monte-Carlo: the DC bin dominates a noise spectrum; after
  // normalization every other bin should stay far below 0.9.
  afgn::Rng rng(131);
  const int s = 64;
  int failures = 0;
  for (int seed = 0; seed < 1000; ++seed) {
    Image img = random_image(s, 1, rng);
    SpectrumImage spec = afgn::log_magnitude_spectrum(img);
    bool bad = false;
    for (int y = 0; y < s && !bad; ++y)
      for (int x = 0; x < s; ++x) {
        if (y == s / 2 && x == s / 2) continue;
        if (spec.at(0, y, x) > 0.9f) {
          bad = true;
          break;
        }
      }
    failures += bad;
  }
  EXPECT_LE(failures, 10);  // >= 99% of seeds clean
}

TEST(RadialProfile, ConstantImage) {
  Image img(64, 64, 1, 0.5f);
  auto profile = afgn::radial_profile(afgn::log_magnitude_spectrum(img));
  ASSERT_EQ(profile.size(), 32u);
  EXPECT_DOUBLE_EQ(profile[0], 1.0);
  for (size_t r = 1; r < profile.size(); ++r) EXPECT_DOUBLE_EQ(profile[r], 0.0);
}

TEST(RadialProfile, InvariantUnderQuarterRotation) {
  afgn::Rng rng(137);
  Image img = random_image(16, 1, rng);
  Image rot(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) rot.at(0, x, 15 - y) = img.at(0, y, x);
  auto p1 = afgn::radial_profile(afgn::log_magnitude_spectrum(img));
  auto p2 = afgn::radial_profile(afgn::log_magnitude_spectrum(rot));
  ASSERT_EQ(p1.size(), p2.size());
  for (size_t r = 0; r < p1.size(); ++r) ASSERT_NEAR(p1[r], p2[r], 1e-5);
}

TEST(FingerprintEnergy, ConstantImageScoresZero) {
  Image img(16, 16, 3, 0.3f);
  EXPECT_DOUBLE_EQ(
      afgn::fingerprint_energy_score(afgn::log_magnitude_spectrum(img)), 0.0);
}

TEST(FingerprintEnergy, NyquistCheckerboardScoresOne) {
  Image img(16, 16, 1);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) img.at(0, y, x) = ((x + y) & 1) ? 1.0f : 0.0f;
  // checkerboard = constant 0.5 + Nyquist tone; remove the DC part
  for (float& v : img.data) v -= 0.5f;
  EXPECT_NEAR(
      afgn::fingerprint_energy_score(afgn::log_magnitude_spectrum(img)), 1.0,
      1e-9);
}

TEST(FingerprintEnergy, ScoreStaysInUnitInterval) {
  afgn::Rng rng(139);
  for (int trial = 0; trial < 10; ++trial) {
    Image img = random_image(32, 3, rng);
    double s = afgn::fingerprint_energy_score(afgn::log_magnitude_spectrum(img));
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
  }
}

TEST(SpectrumImage, DcBinLandsOnCentralCell) {
  // a pure DC image lights exactly the central cell, both parities of S/2
  for (int s : {8, 16, 64}) {
    Image img(s, s, 1, 0.9f);
    SpectrumImage spec = afgn::log_magnitude_spectrum(img);
    int cy = s / 2, cx = s / 2;
    EXPECT_FLOAT_EQ(spec.at(0, cy, cx), 1.0f) << "side " << s;
  }
}

TEST(SpectrumImage, ChannelsTransformIndependently) {
  afgn::Rng rng(149);
  Image img = random_image(16, 3, rng);
  SpectrumImage whole = afgn::log_magnitude_spectrum(img);
  for (int c = 0; c < 3; ++c) {
    Image solo(16, 16, 1);
    auto ch = channel(img, c);
    solo.data = ch;
    SpectrumImage one = afgn::log_magnitude_spectrum(solo);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x)
        ASSERT_FLOAT_EQ(whole.at(c, y, x), one.at(0, y, x));
  }
}
