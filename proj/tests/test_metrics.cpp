#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "se/data.hpp"
#include "se/metrics.hpp"
#include "se/pipeline.hpp"
#include "se/training.hpp"
#include "testutil.hpp"

using se::Index;
using se::Tensor;
using se::Waveform;

TEST_CASE("snr-backed quality score hits its anchor points") {
  se::Rng rng(401);
  const Waveform<double> clean = tu::random_wave<double>(4000, rng, 0.4);

  SUBCASE("perfect reconstruction scores 1") {
    CHECK(se::q_snr(clean, clean) == 1.0);
  }

  SUBCASE("0 dB scores 0.25") {
    // estimate = clean + clean-energy noise: error energy equals ref energy
    Waveform<double> est = clean;
    Waveform<double> noise = tu::random_wave<double>(4000, rng, 0.3);
    const double scale =
        std::sqrt(clean.samples.squaredNorm() / noise.samples.squaredNorm());
    est.samples += noise.samples * scale;
    CHECK(se::q_snr(est, clean) == doctest::Approx(0.25).epsilon(1e-9));
  }

  SUBCASE("an anti-signal estimate lands near the floor of the window") {
    // est = -clean: error energy 4x reference, snr = -10 log10(4) ~ -6.02 dB
    Waveform<double> est = clean;
    est.samples = -est.samples;
    const double want = ((-10.0 * std::log10(4.0)) + 10.0) / 40.0;
    CHECK(se::q_snr(est, clean) == doctest::Approx(want).epsilon(1e-3));
    CHECK(se::q_snr(est, clean) == doctest::Approx(0.0995).epsilon(1e-2));
  }

  SUBCASE("score is monotone in mixing SNR") {
    double prev = -1.0;
    for (double snr : {-5.0, 0.0, 5.0, 10.0, 20.0}) {
      se::Rng mix_rng(77);
      const Waveform<double> noise = tu::random_wave<double>(4000, mix_rng, 0.3);
      const double gain = std::sqrt(clean.samples.squaredNorm() /
                                    noise.samples.squaredNorm() /
                                    std::pow(10.0, snr / 10.0));
      Waveform<double> est = clean;
      est.samples += noise.samples * gain;
      const double q = se::q_snr(est, clean);
      CHECK(q > prev);
      prev = q;
    }
  }
}

TEST_CASE("perceptual-score normalization is the fixed affine map") {
  CHECK(se::normalize_pesq(4.5) == 1.0);
  CHECK(se::normalize_pesq(-0.5) == 0.0);
  CHECK(se::normalize_pesq(2.454) == doctest::Approx(0.5908).epsilon(1e-12));
  // out of range clamps (and warns)
  CHECK(se::normalize_pesq(9.0) == 1.0);
  CHECK(se::normalize_pesq(-3.0) == 0.0);
}

TEST_CASE("metric factory resolves names") {
  const se::MetricFn<double> m = se::make_metric<double>("qsnr");
  CHECK(m.name == "qsnr");
  CHECK_THROWS_WITH_AS(se::make_metric<double>("nope"), doctest::Contains("unknown metric"),
                       se::Error);
  CHECK_THROWS_WITH_AS(se::make_metric<double>("external:echo 1"),
                       doctest::Contains("{enhanced}"), se::Error);
}

TEST_CASE("external metric adapter drives a shell command") {
  se::Rng rng(403);
  const Waveform<double> a = tu::random_wave<double>(800, rng, 0.4);
  const Waveform<double> b = tu::random_wave<double>(800, rng, 0.4);

  SUBCASE("fixed raw score maps through the affine normalization") {
    // the shell comment swallows the substituted paths
    const auto m = se::make_external_metric<double>("echo 4.5 # {enhanced} {clean}");
    CHECK(m(a, b) == 1.0);
    const auto mid = se::make_external_metric<double>("echo 2.0 # {enhanced} {clean}");
    CHECK(mid(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("out-of-range raw scores clamp") {
    const auto m = se::make_external_metric<double>("echo 9 # {enhanced} {clean}");
    CHECK(m(a, b) == 1.0);
  }

  SUBCASE("a failing command surfaces its output") {
    const auto m =
        se::make_external_metric<double>("echo broken tool 1>&2; false # {enhanced} {clean}");
    CHECK_THROWS_WITH_AS(m(a, b), doctest::Contains("broken tool"), se::Error);
  }

  SUBCASE("unparseable output is an error") {
    const auto m = se::make_external_metric<double>("echo not-a-number # {enhanced} {clean}");
    CHECK_THROWS_AS(m(a, b), se::Error);
  }

  SUBCASE("the paths really reach the command") {
    const std::string dir = tu::scratch_dir("extmetric");
    const auto m = se::make_external_metric<double>(
        "cp {enhanced} " + dir + "/seen_e.wav && cp {clean} " + dir + "/seen_c.wav && echo 3.0");
    CHECK(m(a, b) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(std::filesystem::exists(dir + "/seen_e.wav"));
    const Waveform<double> round = se::read_wav<double>(dir + "/seen_e.wav");
    CHECK(round.length() == a.length());
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("external scorer binary round-trips the snr-backed score") {
  const char* tool = std::getenv("SE_QSNR_TOOL");
  REQUIRE_MESSAGE(tool != nullptr, "SE_QSNR_TOOL must point at the scorer binary");
  se::Rng rng(407);
  const Waveform<double> clean = tu::random_wave<double>(3200, rng, 0.4);
  Waveform<double> est = clean;
  const Waveform<double> noise = tu::random_wave<double>(3200, rng, 0.05);
  est.samples += noise.samples;

  const auto external =
      se::make_external_metric<double>(std::string(tool) + " {enhanced} {clean}");
  const double via_tool = external(est, clean);
  const double direct = se::q_snr(est, clean);
  // the tool path quantizes through 16-bit wav files
  CHECK(via_tool == doctest::Approx(direct).epsilon(1e-3));
}

TEST_CASE("evaluation report scores a dataset before and after enhancement") {
  const std::string dir = tu::scratch_dir("evalrep");
  std::vector<se::MixSpec> specs;
  for (int i = 0; i < 3; ++i) {
    se::MixSpec ms;
    ms.duration_s = 0.05;
    ms.snr_db = 5.0;
    ms.seed = 900 + i;
    specs.push_back(ms);
  }
  const se::GeneratorConfig cfg = se::toy_generator_config();
  const se::FrameParams<float> p = se::frame_params_for<float>(cfg);
  const auto entries = se::synth_dataset<float>(specs, dir, 2 * p.window_len);
  const auto utts = se::load_utterances<float>(entries, p);
  const se::MetricFn<float> metric = se::make_metric<float>("qsnr");

  SUBCASE("an identity mask leaves the score nearly unchanged") {
    // zero weights + unit head bias: relu(0 x + 1) = 1 everywhere
    se::Rng wrng(11);
    se::GeneratorWeights<float> w = se::GeneratorWeights<float>::init(cfg, wrng);
    for (const se::NamedParam<float>& prm : w.named_params()) prm.tensor->flat().setZero();
    w.head_b.flat().setConstant(1.0f);

    const se::EvalReport<float> rep = se::eval_report(cfg, w, utts, metric, p);
    REQUIRE(rep.rows.size() == 3);
    for (const se::EvalRow<float>& row : rep.rows) {
      // only analysis/synthesis edges differ
      CHECK(std::abs(row.delta) < 0.05);
    }
    const std::string csv = rep.to_csv();
    CHECK(csv.find("id,q_noisy,q_enhanced,delta") != std::string::npos);
    CHECK(csv.find("mean,") != std::string::npos);
  }

  SUBCASE("empty dataset is rejected") {
    se::Rng wrng(11);
    se::GeneratorWeights<float> w = se::GeneratorWeights<float>::init(cfg, wrng);
    CHECK_THROWS_WITH_AS(se::eval_report(cfg, w, {}, metric, p), doctest::Contains("empty"),
                         se::Error);
  }
  std::filesystem::remove_all(dir);
}
