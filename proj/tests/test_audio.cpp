#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "echoprint/audio.hpp"
#include "echoprint/error.hpp"

namespace fs = std::filesystem;
using namespace echoprint;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "echoprint_test_audio";
  fs::create_directories(dir);
  return dir / name;
}

AudioTrace pcm_grid_noise(std::size_t n, int rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> q(-32768, 32767);
  AudioTrace t;
  t.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i) t.samples.push_back(q(rng) / 32768.0);
  return t;
}

}  // namespace

TEST(Wav, RoundTripIsBitExactOnThePcmGrid) {
  for (int rate : {8000, 16000, 44100, 48000}) {
    const AudioTrace in = pcm_grid_noise(5000, rate, static_cast<std::uint64_t>(rate));
    const auto path = temp_path("rt.wav");
    write_wav(path, in);
    const AudioTrace out = read_wav(path);
    EXPECT_EQ(out.sample_rate, rate);
    ASSERT_EQ(out.samples.size(), in.samples.size());
    for (std::size_t i = 0; i < in.samples.size(); ++i) ASSERT_EQ(out.samples[i], in.samples[i]) << i;

    // Writing what was read reproduces the file byte for byte.
    const auto again = temp_path("rt2.wav");
    write_wav(again, out);
    std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(a)), {});
    const std::string sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_EQ(sa, sb);
  }
}

TEST(Wav, HeaderLayout) {
  AudioTrace t;
  t.samples = {0.0, 0.5, -0.5};
  const auto path = temp_path("hdr.wav");
  write_wav(path, t);
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(bytes.size(), 44u + 6u);
  EXPECT_EQ(bytes.substr(0, 4), "RIFF");
  EXPECT_EQ(bytes.substr(8, 4), "WAVE");
  // 0.5 * 32768 = 16384 = 0x4000, little endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[46]), 0x00);
  EXPECT_EQ(static_cast<unsigned char>(bytes[47]), 0x40);
}

TEST(Wav, RejectsGarbageAndMissingFiles) {
  const auto path = temp_path("junk.wav");
  {
    std::ofstream out(path, std::ios::binary);
    out << "this is not a riff file at all, not even close";
  }
  EXPECT_THROW(read_wav(path), FormatError);
  EXPECT_THROW(read_wav(temp_path("does_not_exist.wav")), DataError);
}

TEST(Wav, RejectsUnsupportedRateOnWrite) {
  AudioTrace t;
  t.sample_rate = 22050;
  t.samples = {0.0};
  EXPECT_THROW(write_wav(temp_path("bad.wav"), t), DataError);
}

TEST(Validate, CatchesBadTraces) {
  AudioTrace t;
  EXPECT_THROW(validate(t), DataError);
  t.samples = {0.0, 1.5};
  EXPECT_THROW(validate(t), DataError);
  t.samples = {0.0, std::nan("")};
  EXPECT_THROW(validate(t), DataError);
  t.samples = {0.0, 0.25};
  EXPECT_NO_THROW(validate(t));
}

TEST(Decibels, ShiftedScale) {
  EXPECT_DOUBLE_EQ(amplitude_to_db(1.0), 120.0);
  EXPECT_NEAR(amplitude_to_db(0.1), 100.0, 1e-12);
  EXPECT_DOUBLE_EQ(amplitude_to_db(0.0), 0.0);  // floored at 1e-6
  EXPECT_NEAR(db_to_amplitude(amplitude_to_db(0.3)), 0.3, 1e-12);
}

TEST(Intervals, PartitionCoversTheSignal) {
  for (std::size_t len : {512u, 1000u, 12345u}) {
    const auto b = interval_bounds(len, 512);
    ASSERT_EQ(b.size(), 512u);
    EXPECT_EQ(b.front().first, 0u);
    EXPECT_EQ(b.back().second, len);
    for (std::size_t j = 1; j < b.size(); ++j) EXPECT_EQ(b[j].first, b[j - 1].second);
  }
}

TEST(TraceMatrix, MeanAbsoluteAmplitudePerInterval) {
  Utterance u;
  u.samples.assign(1024, 0.0);
  u.samples[3] = 0.5;     // interval 1 of 512 (two samples each)
  u.samples[1000] = -1.0; // interval 500
  const std::vector<Utterance> us = {u};
  const TraceMatrix O = build_trace_matrix(us, 512);
  ASSERT_EQ(O.values.rows(), 1);
  ASSERT_EQ(O.values.cols(), 512);
  // Two samples per interval, one of them zero.
  EXPECT_NEAR(O.values(0, 1), 20.0 * std::log10(0.25) + 120.0, 1e-12);
  EXPECT_NEAR(O.values(0, 500), 20.0 * std::log10(0.5) + 120.0, 1e-12);
  EXPECT_DOUBLE_EQ(O.values(0, 0), 0.0);
  EXPECT_EQ(O.row_lengths[0], 1024u);
}

TEST(Resample, PreservesALowTone) {
  AudioTrace t;
  t.sample_rate = 48000;
  for (int i = 0; i < 48000; ++i) t.samples.push_back(0.5 * std::sin(2.0 * M_PI * 440.0 * i / 48000.0));
  const AudioTrace r = resample(t, 16000);
  EXPECT_EQ(r.sample_rate, 16000);
  EXPECT_NEAR(static_cast<double>(r.samples.size()), 16000.0, 2.0);
  // Compare with the analytic tone away from the edges.
  double err = 0.0;
  for (std::size_t i = 1000; i + 1000 < r.samples.size(); ++i) {
    err = std::max(err, std::abs(r.samples[i] - 0.5 * std::sin(2.0 * M_PI * 440.0 * i / 16000.0)));
  }
  EXPECT_LT(err, 1e-2);
}
