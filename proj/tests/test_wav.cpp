#include <doctest.h>

#include <fstream>

#include "se/wav_io.hpp"
#include "testutil.hpp"

using se::Waveform;

TEST_CASE("wav round trip is sample-exact after quantization") {
  const std::string dir = tu::scratch_dir("wav");
  se::Rng rng(5);
  const auto w = tu::random_wave<float>(1000, rng, 0.8);
  const std::string path = dir + "/a.wav";
  se::write_wav(path, w);
  const Waveform<float> r = se::read_wav<float>(path);
  CHECK(r.length() == 1000);
  CHECK(r.sample_rate == 16000);
  // one write+read quantizes once; a second round trip is lossless
  se::write_wav(path, r);
  const Waveform<float> r2 = se::read_wav<float>(path);
  CHECK((r2.samples - r.samples).cwiseAbs().maxCoeff() == 0.0f);
  CHECK((r.samples - w.samples).cwiseAbs().maxCoeff() <= 1.0f / 32768.0f);
}

TEST_CASE("wav writer clamps out-of-range samples") {
  const std::string dir = tu::scratch_dir("wav_clamp");
  Waveform<float> w;
  w.samples.resize(3);
  w.samples << 2.0f, -2.0f, 0.0f;
  const std::string path = dir + "/c.wav";
  se::write_wav(path, w);
  const Waveform<float> r = se::read_wav<float>(path);
  CHECK(r.samples(0) > 0.99f);
  CHECK(r.samples(1) < -0.99f);
  CHECK(r.samples(2) == 0.0f);
}

TEST_CASE("wav reader rejects wrong formats") {
  const std::string dir = tu::scratch_dir("wav_bad");
  const std::string path = dir + "/bad.wav";
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a wav file at all, just text padding to pass size checks......";
  }
  CHECK_THROWS_AS(se::read_wav<float>(path), se::Error);
  CHECK_THROWS_AS(se::read_wav<float>(dir + "/missing.wav"), se::Error);
}
