#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "echoprint/channel_sim.hpp"
#include "echoprint/error.hpp"

namespace fs = std::filesystem;
using namespace echoprint;

namespace {

constexpr int kRate = 16000;

RoomSpec box(double beta, int order) {
  RoomSpec r;
  r.dims = {6.0, 5.0, 3.0};
  r.surface_coeffs.fill(beta);
  r.source_pos = {1.5, 2.0, 1.5};
  r.mic_pos = {4.0, 3.0, 1.2};
  r.max_order = order;
  return r;
}

AudioTrace tone(double f, double seconds, double amp = 0.5) {
  AudioTrace t;
  for (int i = 0; i < static_cast<int>(seconds * kRate); ++i) t.samples.push_back(amp * std::sin(2.0 * M_PI * f * i / kRate));
  return t;
}

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> direct_convolution(const std::vector<double>& x, const std::vector<double>& h) {
  std::vector<double> y(x.size() + h.size() - 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
  }
  return y;
}

}  // namespace

TEST(ImageSource, OrderZeroIsOneDelayedTap) {
  RoomSpec r = box(0.9, 0);
  // 3.43 m at 343 m/s is exactly 10 ms, 160 samples.
  r.source_pos = {1.0, 2.0, 1.5};
  r.mic_pos = {4.43, 2.0, 1.5};
  const ImpulseResponse ir = image_source_ir(r, kRate);
  const auto peak = static_cast<std::size_t>(
      std::max_element(ir.taps.begin(), ir.taps.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) -
      ir.taps.begin());
  EXPECT_EQ(peak, 160u);
  EXPECT_NEAR(ir.taps[160], 1.0 / (4.0 * M_PI * 3.43), 1e-12);
  for (std::size_t i = 0; i < ir.taps.size(); ++i) {
    if (i != 160) {
      EXPECT_NEAR(ir.taps[i], 0.0, 1e-15) << i;
    }
  }
}

TEST(ImageSource, FirstOrderAddsSixReflections) {
  const RoomSpec r = box(0.5, 1);
  const ImpulseResponse ir0 = image_source_ir(box(0.5, 0), kRate);
  const ImpulseResponse ir1 = image_source_ir(r, kRate);
  // Six mirrored sources, each at half amplitude over its own distance.
  double expected = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int side = 0; side < 2; ++side) {
      Vec3 img = r.source_pos;
      img[a] = side == 0 ? -img[a] : 2.0 * r.dims[a] - img[a];
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) d2 += (img[k] - r.mic_pos[k]) * (img[k] - r.mic_pos[k]);
      expected += 0.5 / (4.0 * M_PI * std::sqrt(d2));
    }
  }
  const double s0 = std::accumulate(ir0.taps.begin(), ir0.taps.end(), 0.0);
  const double s1 = std::accumulate(ir1.taps.begin(), ir1.taps.end(), 0.0);
  // A windowed sinc sums to about one, so the tap sum tracks the amplitudes.
  EXPECT_NEAR(s1 - s0, expected, 0.01 * expected);
}

TEST(ImageSource, HarderWallsRingLonger) {
  const double soft = image_source_ir(box(0.6, 20), kRate).rt60_est;
  const double hard = image_source_ir(box(0.9, 20), kRate).rt60_est;
  EXPECT_GT(soft, 0.0);
  EXPECT_GT(hard, 1.5 * soft);
}

TEST(ImageSource, RejectsBadRooms) {
  RoomSpec r = box(0.5, 2);
  r.mic_pos = {7.0, 1.0, 1.0};
  EXPECT_THROW(image_source_ir(r, kRate), ConfigError);
  r = box(0.5, 2);
  r.mic_pos = r.source_pos;
  EXPECT_THROW(image_source_ir(r, kRate), DegenerateGeometryError);
  r = box(1.0, 2);
  EXPECT_THROW(image_source_ir(r, kRate), ConfigError);
  r = box(0.5, -1);
  EXPECT_THROW(image_source_ir(r, kRate), ConfigError);
  r = box(0.5, 2);
  r.dims[1] = 0.0;
  EXPECT_THROW(image_source_ir(r, kRate), ConfigError);
}

TEST(Convolution, MatchesDirectSum) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t n : {1u, 17u, 500u}) {
    std::vector<double> x(n), h(n / 3 + 5);
    for (double& v : x) v = g(rng);
    for (double& v : h) v = g(rng);
    const auto fast = convolve_raw(x, h);
    const auto slow = direct_convolution(x, h);
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-10) << i;
  }
}

TEST(Convolution, IdentityShiftAndEnergyBound) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(1000);
  for (double& v : x) v = g(rng);
  const auto same = convolve_raw(x, std::vector<double>{1.0});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(same[i], x[i], 1e-12);
  const auto shifted = convolve_raw(x, std::vector<double>{0.0, 0.0, 1.0});
  EXPECT_NEAR(shifted[0], 0.0, 1e-12);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(shifted[i + 2], x[i], 1e-12);
  // Young: ||x * h||_2 <= ||x||_2 ||h||_1.
  const ImpulseResponse ir = image_source_ir(box(0.8, 8), kRate);
  const auto y = convolve_raw(x, ir.taps);
  double l1 = 0.0;
  for (double v : ir.taps) l1 += std::abs(v);
  EXPECT_LE(rms(y) * std::sqrt(static_cast<double>(y.size())), rms(x) * std::sqrt(1000.0) * l1);
  AudioTrace dry;
  dry.samples = x;
  const AudioTrace wet = convolve(dry, ir);
  EXPECT_NEAR(peak_abs(wet.samples), 1.0, 1e-12);
}

TEST(Codec, NarrowbandStopsFiveKilohertzAndPassesOne) {
  const AudioTrace high = tone(5000.0, 1.0);
  const AudioTrace low = tone(1000.0, 1.0);
  const auto mid = [](const AudioTrace& t) {
    return std::span<const double>(t.samples).subspan(2000, t.samples.size() - 4000);
  };
  const double att = 20.0 * std::log10(rms(mid(high)) / rms(mid(codec_emulate(high, CodecMode::kNarrowband))));
  EXPECT_GE(att, 40.0);
  const double pass = 20.0 * std::log10(rms(mid(codec_emulate(low, CodecMode::kNarrowband))) / rms(mid(low)));
  EXPECT_LE(std::abs(pass), 1.0);
  // Wideband at 16 kHz keeps the 5 kHz tone.
  const double wb = 20.0 * std::log10(rms(mid(codec_emulate(high, CodecMode::kWideband))) / rms(mid(high)));
  EXPECT_LE(std::abs(wb), 1.0);
}

TEST(Codec, ModeNames) {
  for (auto m : {CodecMode::kNarrowband, CodecMode::kMediumband, CodecMode::kWideband, CodecMode::kSuperwideband}) {
    EXPECT_EQ(codec_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(codec_mode_from_string("ultraband"), ConfigError);
  EXPECT_EQ(codec_passband(CodecMode::kNarrowband), (std::pair<double, double>{300.0, 3400.0}));
}

TEST(Loss, ZeroRateIsIdentity) {
  const AudioTrace t = tone(300.0, 1.0);
  LossStats st;
  const AudioTrace out = lossy_channel(t, {0.0, 20.0, Concealment::kSilence, 1}, &st);
  EXPECT_EQ(out.samples, t.samples);
  EXPECT_EQ(st.dropped, 0u);
  EXPECT_EQ(st.frames, 50u);
}

TEST(Loss, DropCountWithinThreeSigma) {
  AudioTrace t;
  t.samples.assign(static_cast<std::size_t>(60 * kRate), 0.25);
  for (double p : {0.05, 0.1, 0.3}) {
    LossStats st;
    const AudioTrace out = lossy_channel(t, {p, 20.0, Concealment::kSilence, 3}, &st);
    const double n = static_cast<double>(st.frames);
    EXPECT_EQ(st.frames, 3000u);
    EXPECT_NEAR(static_cast<double>(st.dropped), n * p, 3.0 * std::sqrt(n * p * (1.0 - p))) << p;
    // Silence concealment: exactly the dropped frames are zeroed.
    std::size_t zero_frames = 0;
    for (std::size_t f = 0; f < st.frames; ++f) {
      bool all_zero = true;
      for (std::size_t i = f * 320; i < (f + 1) * 320; ++i) all_zero = all_zero && out.samples[i] == 0.0;
      zero_frames += all_zero ? 1 : 0;
    }
    EXPECT_EQ(zero_frames, st.dropped);
  }
}

TEST(Loss, RepeatSpectrumTracksASteadyTone) {
  const AudioTrace t = tone(440.0, 4.0);
  const AudioTrace rep = lossy_channel(t, {0.1, 20.0, Concealment::kRepeatSpectrum, 9});
  const AudioTrace sil = lossy_channel(t, {0.1, 20.0, Concealment::kSilence, 9});
  std::vector<double> e_rep(t.samples.size()), e_sil(t.samples.size());
  for (std::size_t i = 0; i < t.samples.size(); ++i) {
    e_rep[i] = rep.samples[i] - t.samples[i];
    e_sil[i] = sil.samples[i] - t.samples[i];
  }
  EXPECT_GT(rms(e_sil), 0.0);
  EXPECT_LT(rms(e_rep), 0.5 * rms(e_sil));
}

TEST(Loss, BadProfiles) {
  const AudioTrace t = tone(300.0, 0.1);
  EXPECT_THROW(lossy_channel(t, {1.5, 20.0, Concealment::kSilence, 1}), ConfigError);
  EXPECT_THROW(lossy_channel(t, {0.1, 1.0, Concealment::kSilence, 1}), ConfigError);
  EXPECT_EQ(concealment_from_string("repeat-spectrum"), Concealment::kRepeatSpectrum);
  EXPECT_THROW(concealment_from_string("guess"), ConfigError);
}

TEST(Materials, PressureCoefficientIsTheRootOfEnergyReflection) {
  const MaterialTable m = MaterialTable::defaults();
  EXPECT_NEAR(m.pressure_coeff("wood"), std::sqrt(0.90), 1e-15);
  EXPECT_THROW(m.pressure_coeff("cheese"), ConfigError);
}

TEST(Corpus, CountsLabelsAndDeterminism) {
  CorpusSpec spec;
  spec.rooms = preset_rooms(2);
  for (auto& r : spec.rooms) r.max_order = 6;
  spec.positions = 2;
  spec.seed = 5;
  const auto bank = default_dry_bank(3, 1.0, 5);
  const fs::path dir = fs::temp_directory_path() / "echoprint_test_corpus";
  fs::remove_all(dir);
  const auto a = generate_corpus(spec, bank, dir);
  const auto b = generate_corpus(spec, bank);
  ASSERT_EQ(a.size(), 2u * 2u * 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].trace.samples, b[i].trace.samples) << i;
    EXPECT_EQ(a[i].entry.label, spec.rooms[i / 6].label);
    EXPECT_EQ(a[i].entry.position_id, static_cast<int>((i / 3) % 2));
    EXPECT_EQ(a[i].entry.codec_mode, "wideband");
    EXPECT_LE(peak_abs(a[i].trace.samples), 1.0);
  }
  const auto m = DatasetManifest::load(dir / "manifest.csv");
  ASSERT_EQ(m.entries.size(), a.size());
  const AudioTrace back = read_wav(m.entries[4].path);
  EXPECT_EQ(back.samples, a[4].trace.samples);

  spec.rooms.resize(1);
  EXPECT_THROW(generate_corpus(spec, bank), ConfigError);
}

TEST(Corpus, PresetsShareGeometryAndDiffer) {
  const auto rooms = preset_rooms(10);
  ASSERT_EQ(rooms.size(), 10u);
  for (const auto& r : rooms) {
    EXPECT_EQ(r.dims, rooms[0].dims);
    EXPECT_EQ(r.max_order, kPresetMaxOrder);
  }
  for (std::size_t i = 0; i < rooms.size(); ++i) {
    for (std::size_t j = i + 1; j < rooms.size(); ++j) EXPECT_NE(rooms[i].surface_coeffs, rooms[j].surface_coeffs);
  }
}

TEST(Seeds, MixIsDeterministicAndSpreads) {
  EXPECT_EQ(mix_seed(1, 2, 3, 4), mix_seed(1, 2, 3, 4));
  EXPECT_NE(mix_seed(1, 2, 3, 4), mix_seed(1, 2, 4, 3));
  EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}
