#include <cmath>

#include <gtest/gtest.h>

#include "echoprint/error.hpp"
#include "echoprint/segmentation.hpp"

using namespace echoprint;

namespace {

constexpr int kRate = 16000;

// Harmonic bursts (low spectral flatness) at the given [start, end) seconds,
// digital silence elsewhere.
AudioTrace bursts(double total_s, std::initializer_list<std::pair<double, double>> spans) {
  AudioTrace t;
  t.samples.assign(static_cast<std::size_t>(total_s * kRate), 0.0);
  for (const auto& [a, b] : spans) {
    for (auto i = static_cast<std::size_t>(a * kRate); i < static_cast<std::size_t>(b * kRate); ++i) {
      double v = 0.0;
      for (int h = 1; h <= 8; ++h) v += std::sin(2.0 * M_PI * 150.0 * h * i / kRate) / h;
      t.samples[i] = 0.2 * v;
    }
  }
  return t;
}

}  // namespace

TEST(FrameFeatures, SilenceIsFlatAndFloored) {
  AudioTrace t;
  t.samples.assign(kRate, 0.0);
  const auto f = frame_features(t, 32.0, 16.0);
  ASSERT_FALSE(f.frame_energy.empty());
  for (std::size_t i = 0; i < f.frame_energy.size(); ++i) {
    EXPECT_DOUBLE_EQ(f.spectral_flatness[i], 1.0);
    EXPECT_DOUBLE_EQ(f.frame_energy[i], kEnergyFloorDb);
  }
  EXPECT_EQ(f.frame_length, 512u);
  EXPECT_EQ(f.hop, 256u);
}

TEST(FrameFeatures, ToneIsPeaky) {
  const AudioTrace t = bursts(1.0, {{0.0, 1.0}});
  const auto f = frame_features(t, 32.0, 16.0);
  for (double v : f.spectral_flatness) EXPECT_LT(v, 0.1);
}

TEST(FrameFeatures, RejectsBadArguments) {
  AudioTrace t;
  t.samples.assign(100, 0.0);
  EXPECT_THROW(frame_features(t, 32.0, 16.0), TooShortError);
  t.samples.assign(kRate, 0.0);
  EXPECT_THROW(frame_features(t, 5.0, 2.0), ConfigError);
  EXPECT_THROW(frame_features(t, 32.0, 40.0), ConfigError);
}

TEST(Segment, SilenceGivesNothing) {
  AudioTrace t;
  t.samples.assign(2 * kRate, 0.0);
  EXPECT_TRUE(segment(t).empty());
}

TEST(Segment, FindsSeparatedBurstsWithGuards) {
  const AudioTrace t = bursts(6.0, {{0.5, 1.3}, {2.3, 3.1}, {4.1, 4.9}});
  SegmenterConfig cfg;
  const auto u = segment(t, cfg);
  ASSERT_EQ(u.size(), 3u);
  const double starts[] = {0.5, 2.3, 4.1};
  const double ends[] = {1.3, 3.1, 4.9};
  for (std::size_t i = 0; i < 3; ++i) {
    const double s = static_cast<double>(u[i].start_offset) / kRate;
    const double e = s + static_cast<double>(u[i].samples.size()) / kRate;
    // Leading guard is about one frame step; the trailing side keeps the
    // configured guard after the voiced run.
    EXPECT_LE(s, starts[i]);
    EXPECT_GT(s, starts[i] - 0.06);
    EXPECT_GE(e, ends[i] + cfg.trailing_guard_s);
    EXPECT_LT(e, ends[i] + cfg.trailing_guard_s + 0.08);
    EXPECT_NEAR(u[i].duration, static_cast<double>(u[i].samples.size()) / kRate, 1e-12);
    // The samples are the parent's.
    for (std::size_t k = 0; k < u[i].samples.size(); k += 97) {
      ASSERT_EQ(u[i].samples[k], t.samples[u[i].start_offset + k]);
    }
  }
}

TEST(Segment, TrailingGuardNeverOverlapsTheNextUtterance) {
  const AudioTrace t = bursts(4.0, {{0.5, 1.3}, {1.6, 2.4}});
  SegmenterConfig cfg;
  cfg.trailing_guard_s = 1.0;
  const auto u = segment(t, cfg);
  ASSERT_EQ(u.size(), 2u);
  EXPECT_LE(u[0].start_offset + u[0].samples.size(), u[1].start_offset);
}

TEST(Segment, MergesShortGapsAndDropsShortRuns) {
  const AudioTrace merged = bursts(4.0, {{0.5, 1.2}, {1.3, 2.0}});
  EXPECT_EQ(segment(merged).size(), 1u);
  const AudioTrace blip = bursts(4.0, {{0.5, 0.6}, {2.0, 2.8}});
  const auto u = segment(blip);
  ASSERT_EQ(u.size(), 1u);
  EXPECT_GT(u[0].start_offset, static_cast<std::size_t>(1.5 * kRate));
}

TEST(Segment, ZeroGuardKeepsTheVoicedRunTight) {
  const AudioTrace t = bursts(3.0, {{1.0, 2.0}});
  SegmenterConfig cfg;
  cfg.trailing_guard_s = 0.0;
  const auto u = segment(t, cfg);
  ASSERT_EQ(u.size(), 1u);
  const double e = static_cast<double>(u[0].start_offset + u[0].samples.size()) / kRate;
  EXPECT_NEAR(e, 2.0, 0.06);
}
